//! Run configuration files and the layout of a data directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::read_json;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;
use crate::{FusionConfig, ModelConfig, Result};

/// All settings for a run. Missing fields take their defaults; relative
/// paths are resolved against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub fusion: FusionConfig,
    pub synth: SynthConfig,
    /// Grid used for range maps; range evaluation uses the fixture's grid.
    pub map_rows: usize,
    pub map_cols: usize,
    pub data_dir: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            fusion: FusionConfig::default(),
            synth: SynthConfig::default(),
            map_rows: 180,
            map_cols: 360,
            data_dir: None,
            model_path: None,
        }
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.data_dir, &mut cfg.model_path].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// File names inside a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLayout {
    pub dir: PathBuf,
}

impl DataLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn observations(&self) -> PathBuf {
        self.dir.join("observations.csv")
    }

    pub fn geo_species(&self) -> PathBuf {
        self.dir.join("geo_species.json")
    }

    pub fn vision_species(&self) -> PathBuf {
        self.dir.join("vision_species.json")
    }

    pub fn taxonomy(&self) -> PathBuf {
        self.dir.join("taxonomy.json")
    }

    pub fn eval_items(&self) -> PathBuf {
        self.dir.join("eval_items.csv")
    }

    pub fn vision_probs(&self) -> PathBuf {
        self.dir.join("vision_probs.f32m")
    }

    /// Expert ranges keyed by geo species index.
    pub fn ranges(&self) -> PathBuf {
        self.dir.join("ranges.bin")
    }

    pub fn world(&self) -> PathBuf {
        self.dir.join("world.json")
    }
}
