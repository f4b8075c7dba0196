//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 when a stage fails. A
//! failing stage is named on stderr.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::eval::{self, SweepInputs, SweepParam, TrainingInputs};
use crate::io::config::{load_run_config, DataLayout, RunConfig};
use crate::io::evalset::{load_evalset, save_evalset};
use crate::io::export::export_range_map;
use crate::io::model_file::{load_model, save_model};
use crate::io::observations::{
    read_observations, read_observations_with_species, read_species_list, write_observations,
    write_species_list,
};
use crate::io::ranges_file::{load_ranges, save_ranges};
use crate::io::taxonomy::{load_taxonomy, save_taxonomy};
use crate::raster::{ExpertRangeSet, GridSpec};
use crate::synth::{build_dataset, SyntheticSpecies};
use crate::train::{train, ObservationSet};
use crate::{Error, FusionConfig, ModelConfig, SinrModel, TaxonomyMap};

#[derive(Debug, Parser)]
#[command(
    name = "geoprior",
    version,
    about = "Train and evaluate coordinate-only species range models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data directory (defaults to the config's `data_dir`, then `data`).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
struct FusionFlags {
    #[arg(long)]
    delta: Option<f64>,
    /// Prior for vision species without a geo counterpart.
    #[arg(long)]
    k: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic data directory.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on `observations.csv`.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        /// Fusion settings stored with the model for later evaluation.
        #[command(flatten)]
        fusion: FusionFlags,
    },
    /// Top-1 accuracy of the classifier with and without the geo prior.
    EvalGeoprior {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        fusion: FusionFlags,
    },
    /// Mean average precision against expert ranges.
    EvalRange {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate over a list of values for one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Fusion sweeps reuse this model; without it one is trained.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        fusion: FusionFlags,
        /// One of k, delta, epochs, hidden-dim.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Write one species' predicted range as a grayscale PNG.
    ExportMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Geo species name or index.
        #[arg(long)]
        species: String,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
    },
}

#[derive(Debug)]
struct Failure {
    stage: &'static str,
    error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { stage, error })
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            1
        }
    }
}

struct Context {
    config: RunConfig,
    layout: DataLayout,
    out: Option<PathBuf>,
}

impl Context {
    fn new(common: Common) -> Result<Self, Failure> {
        let mut config = match &common.config {
            Some(p) => load_run_config(p).stage("loading config")?,
            None => RunConfig::default(),
        };
        if let Some(s) = common.seed {
            config.seed = s;
            config.train.seed = s;
        }
        let dir = common
            .data
            .or_else(|| config.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data"));
        Ok(Self {
            config,
            layout: DataLayout::new(dir),
            out: common.out,
        })
    }

    fn apply_train(&mut self, flags: &TrainFlags) {
        if let Some(e) = flags.epochs {
            self.config.train.epochs = e;
        }
        if let Some(h) = flags.hidden_dim {
            self.config.model.hidden_dim = h;
        }
        if let Some(b) = flags.batch_size {
            self.config.train.batch_size = b;
        }
        if let Some(l) = flags.learning_rate {
            self.config.train.learning_rate = l;
        }
    }

    fn fusion(&self, flags: &FusionFlags) -> Result<FusionConfig, Failure> {
        let mut f = self.config.fusion;
        if let Some(d) = flags.delta {
            f.delta = d;
        }
        if let Some(k) = flags.k {
            f.k_default = k;
        }
        f.validate().stage("reading arguments")?;
        Ok(f)
    }

    fn model_path(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.or_else(|| self.config.model_path.clone())
            .unwrap_or_else(|| PathBuf::from("model.bin"))
    }

    fn load_model(&self, flag: Option<PathBuf>) -> Result<SinrModel, Failure> {
        load_model(&self.model_path(flag)).stage("loading model")
    }

    fn geo_names(&self) -> Result<Vec<String>, Failure> {
        read_species_list(&self.layout.geo_species()).stage("loading data")
    }

    fn observations(&self) -> Result<(ObservationSet, Vec<String>), Failure> {
        let path = self.layout.observations();
        if self.layout.geo_species().exists() {
            let names = self.geo_names()?;
            let set = read_observations_with_species(&path, &names).stage("loading data")?;
            Ok((set, names))
        } else {
            read_observations(&path).stage("loading data")
        }
    }

    fn geoprior_inputs(&self) -> Result<(crate::eval::GeoPriorEvalSet, TaxonomyMap), Failure> {
        let vision = read_species_list(&self.layout.vision_species()).stage("loading data")?;
        let geo = self.geo_names()?;
        let taxonomy = load_taxonomy(&self.layout.taxonomy(), &vision, &geo).stage("loading data")?;
        let set = load_evalset(&self.layout.eval_items(), &self.layout.vision_probs(), &vision)
            .stage("loading data")?;
        Ok((set, taxonomy))
    }

    fn ranges_if_present(&self) -> Result<Option<ExpertRangeSet>, Failure> {
        let p = self.layout.ranges();
        if p.exists() {
            load_ranges(&p).map(Some).stage("loading data")
        } else {
            Ok(None)
        }
    }
}

fn emit_json<T: Serialize + ?Sized>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => crate::io::write_json(p, value).stage("writing output"),
        None => {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| Error::format("stdout", e.to_string()))
                .stage("writing output")?;
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct WorldRecord<'a> {
    seed: u64,
    /// Expert rasters mark cells where presence reaches this share of peak.
    range_threshold: f64,
    synth: &'a crate::synth::SynthConfig,
    species: Vec<NamedSpecies<'a>>,
    confusion_pairs: Vec<(String, String, f64)>,
}

#[derive(Serialize)]
struct NamedSpecies<'a> {
    name: String,
    mapped: bool,
    #[serde(flatten)]
    params: &'a SyntheticSpecies,
}

fn cmd_synth(ctx: Context) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let data = build_dataset(&cfg.synth, cfg.seed).stage("generating data")?;
    let layout = ctx.out.map(DataLayout::new).unwrap_or(ctx.layout);
    let vision = data.vision_names();
    let geo = data.geo_names();
    let write = |r: crate::Result<()>| r.stage("writing output");
    write(std::fs::create_dir_all(&layout.dir).map_err(|e| Error::io(&layout.dir, e)))?;
    write(write_species_list(&layout.vision_species(), &vision))?;
    write(write_species_list(&layout.geo_species(), &geo))?;
    write(save_taxonomy(&layout.taxonomy(), &data.taxonomy, &vision, &geo))?;
    write(write_observations(
        &layout.observations(),
        &data.observations,
        &geo,
    ))?;
    write(save_evalset(
        &layout.eval_items(),
        &layout.vision_probs(),
        &data.evalset,
        &vision,
    ))?;
    write(save_ranges(&data.geo_ranges, &layout.ranges()))?;
    let record = WorldRecord {
        seed: cfg.seed,
        range_threshold: crate::synth::RANGE_THRESHOLD,
        synth: &cfg.synth,
        species: data
            .world
            .species
            .iter()
            .enumerate()
            .map(|(v, s)| NamedSpecies {
                name: vision[v].clone(),
                mapped: data.taxonomy.geo_index(v).is_some(),
                params: s,
            })
            .collect(),
        confusion_pairs: data
            .plan
            .pairs()
            .iter()
            .map(|&(a, b, w)| (vision[a].clone(), vision[b].clone(), w))
            .collect(),
    };
    write(crate::io::write_json(&layout.world(), &record))?;
    println!(
        "wrote {} species ({} mapped), {} observations, {} evaluation items to {}",
        vision.len(),
        geo.len(),
        data.observations.len(),
        data.evalset.len(),
        layout.dir.display()
    );
    Ok(())
}

fn checkpoint_path(model: &Path, epoch: usize) -> PathBuf {
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model.with_file_name(format!("{stem}.epoch{epoch}.bin"))
}

/// Effective settings saved next to a trained model.
fn run_config_path(model: &Path) -> PathBuf {
    model.with_extension("config.json")
}

fn cmd_train(mut ctx: Context, flags: TrainFlags, fusion: FusionFlags) -> Result<(), Failure> {
    ctx.apply_train(&flags);
    ctx.config.fusion = ctx.fusion(&fusion)?;
    let (obs, names) = ctx.observations()?;
    let out = ctx.out.clone().unwrap_or_else(|| ctx.model_path(None));
    let model_cfg = ModelConfig {
        num_species: names.len(),
        ..ctx.config.model
    };
    let mut sink = |epoch: usize, m: &SinrModel| save_model(m, &checkpoint_path(&out, epoch));
    let outcome = train(&obs, &model_cfg, &ctx.config.train, Some(&mut sink)).stage("training")?;
    save_model(&outcome.model, &out).stage("writing output")?;
    let effective = RunConfig {
        model: model_cfg,
        // absolute, since relative paths in a config resolve against its own directory
        data_dir: std::path::absolute(&ctx.layout.dir).ok(),
        model_path: std::path::absolute(&out).ok(),
        ..ctx.config.clone()
    };
    crate::io::write_json(&run_config_path(&out), &effective).stage("writing output")?;
    if !ctx.layout.geo_species().exists() {
        let p = out.with_extension("species.json");
        write_species_list(&p, &names).stage("writing output")?;
    }
    for (e, l) in outcome.history.iter().enumerate() {
        println!("epoch {:>4}  loss {:.6}", e + 1, l.total);
    }
    println!("saved {}", out.display());
    Ok(())
}

fn echo_model(model: &SinrModel, cfg: &RunConfig) -> ModelConfig {
    let s = model.shape();
    ModelConfig {
        hidden_dim: s.hidden_dim,
        num_residual_blocks: s.num_blocks,
        num_species: s.num_species,
        dropout_rate: cfg.model.dropout_rate,
    }
}

fn cmd_eval_geoprior(ctx: Context, model: Option<PathBuf>, flags: FusionFlags) -> Result<(), Failure> {
    let fusion = ctx.fusion(&flags)?;
    let model_path = ctx.model_path(model);
    let saved = run_config_path(&model_path);
    let trained_with = if saved.exists() {
        Some(load_run_config(&saved).stage("loading model")?.train)
    } else {
        None
    };
    let model = ctx.load_model(Some(model_path))?;
    let (set, taxonomy) = ctx.geoprior_inputs()?;
    let mut report = eval::eval_geo_prior(&model, &set, &taxonomy, &fusion).stage("evaluating")?;
    if let Some(r) = ctx.ranges_if_present()? {
        let m = eval::mean_average_precision(&model, &r).stage("evaluating")?;
        report.map_scores.insert("expert".into(), m.map);
    }
    report.config_echo.model = Some(echo_model(&model, &ctx.config));
    report.config_echo.train = trained_with;
    emit_json(&report, ctx.out.as_deref())
}

fn cmd_eval_range(ctx: Context, model: Option<PathBuf>) -> Result<(), Failure> {
    let model = ctx.load_model(model)?;
    let ranges = load_ranges(&ctx.layout.ranges()).stage("loading data")?;
    let r = eval::mean_average_precision(&model, &ranges).stage("evaluating")?;
    emit_json(&r, ctx.out.as_deref())
}

fn cmd_sweep(
    mut ctx: Context,
    model: Option<PathBuf>,
    train_flags: TrainFlags,
    fusion_flags: FusionFlags,
    param: SweepParam,
    values: Vec<f64>,
) -> Result<(), Failure> {
    ctx.apply_train(&train_flags);
    let fusion = ctx.fusion(&fusion_flags)?;
    let base = match model {
        Some(p) => Some(ctx.load_model(Some(p))?),
        None => None,
    };
    let (set, taxonomy) = ctx.geoprior_inputs()?;
    let ranges = ctx.ranges_if_present()?;
    let obs = if base.is_none() || matches!(param, SweepParam::Epochs | SweepParam::HiddenDim) {
        Some(ctx.observations()?.0)
    } else {
        None
    };
    let inputs = SweepInputs {
        base_model: base.as_ref(),
        training: obs.as_ref().map(|o| TrainingInputs {
            observations: o,
            model_config: ModelConfig {
                num_species: o.num_species(),
                ..ctx.config.model
            },
            train_config: ctx.config.train.clone(),
        }),
        evalset: &set,
        taxonomy: &taxonomy,
        fusion,
        ranges: ranges.iter().map(|r| ("expert".to_string(), r)).collect(),
    };
    let rows = eval::sweep(&inputs, param, &values).stage("sweeping")?;
    print!("{}", eval::format_table(&rows));
    let out = ctx.out.unwrap_or_else(|| PathBuf::from("sweep.json"));
    emit_json(&rows, Some(&out))
}

fn cmd_export_map(
    ctx: Context,
    model: Option<PathBuf>,
    species: String,
    rows: Option<usize>,
    cols: Option<usize>,
) -> Result<(), Failure> {
    let model = ctx.load_model(model)?;
    let names = if ctx.layout.geo_species().exists() {
        ctx.geo_names()?
    } else {
        (0..model.num_species()).map(|i| i.to_string()).collect()
    };
    let index = names
        .iter()
        .position(|n| *n == species)
        .or_else(|| species.parse::<usize>().ok().filter(|&i| i < names.len()))
        .ok_or_else(|| Error::domain(format!("unknown species {species}")))
        .stage("reading arguments")?;
    let grid = GridSpec::new(
        rows.unwrap_or(ctx.config.map_rows),
        cols.unwrap_or(ctx.config.map_cols),
    )
    .stage("reading arguments")?;
    let out = ctx
        .out
        .unwrap_or_else(|| PathBuf::from(format!("{}.png", names[index])));
    export_range_map(&model, index, &names[index], &grid, &out).stage("exporting")?;
    println!("wrote {}", out.display());
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth { common } => cmd_synth(Context::new(common)?),
        Command::Train {
            common,
            train,
            fusion,
        } => cmd_train(Context::new(common)?, train, fusion),
        Command::EvalGeoprior {
            common,
            model,
            fusion,
        } => cmd_eval_geoprior(Context::new(common)?, model, fusion),
        Command::EvalRange { common, model } => cmd_eval_range(Context::new(common)?, model),
        Command::Sweep {
            common,
            model,
            train,
            fusion,
            param,
            values,
        } => cmd_sweep(Context::new(common)?, model, train, fusion, param, values),
        Command::ExportMap {
            common,
            model,
            species,
            rows,
            cols,
        } => cmd_export_map(Context::new(common)?, model, species, rows, cols),
    }
}
