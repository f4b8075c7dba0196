//! The residual coordinate network.
//!
//! Parameters live in one flat vector in a fixed order, which is also the
//! order they are serialised in:
//!
//! 1. input layer weights (`hidden x 4`, row-major) and bias (`hidden`)
//! 2. for each residual block: `W1` (`hidden x hidden`), `b1`, `W2`, `b2`
//! 3. head weights (`species x hidden`) and bias (`species`)
//!
//! A forward pass computes
//!
//! ```text
//! h0      = relu(W_in · f + b_in)
//! h_{k+1} = h_k + drop(relu(W2 · relu(W1 · h_k + b1) + b2))
//! p       = sigmoid(W_head · h_B + b_head)
//! ```
//!
//! Weights may be stored as `f32` (the persisted model) or `f64` (used for
//! gradient checks); all arithmetic runs in `f64`.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{encode_unchecked, EncodedLocation, GeoCoordinate};
use crate::{Error, Matrix, Result, SeededRng};

/// Largest `f64` strictly below one.
const PROB_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;
const PROB_FLOOR: f64 = f64::MIN_POSITIVE;

/// Storage type of network parameters.
pub trait Weight: Copy + Into<f64> + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    fn from_f64(v: f64) -> Self;
}

impl Weight for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Weight for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Architecture of a network: everything needed to interpret a parameter
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub num_species: usize,
}

impl ModelShape {
    pub fn new(hidden_dim: usize, num_blocks: usize, num_species: usize) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(Error::domain("hidden_dim must be at least 1"));
        }
        if num_species == 0 {
            return Err(Error::domain("num_species must be at least 1"));
        }
        Ok(Self {
            hidden_dim,
            num_blocks,
            num_species,
        })
    }

    pub fn num_params(&self) -> usize {
        self.layout().total()
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout {
            h: self.hidden_dim,
            s: self.num_species,
            blocks: self.num_blocks,
        }
    }
}

/// Offsets of each parameter group inside the flat vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    h: usize,
    s: usize,
    blocks: usize,
}

impl Layout {
    fn block_len(&self) -> usize {
        2 * self.h * self.h + 2 * self.h
    }

    fn block_base(&self, k: usize) -> usize {
        5 * self.h + k * self.block_len()
    }

    pub fn in_w(&self) -> Range<usize> {
        0..4 * self.h
    }

    pub fn in_b(&self) -> Range<usize> {
        4 * self.h..5 * self.h
    }

    pub fn w1(&self, k: usize) -> Range<usize> {
        let b = self.block_base(k);
        b..b + self.h * self.h
    }

    pub fn b1(&self, k: usize) -> Range<usize> {
        let b = self.block_base(k) + self.h * self.h;
        b..b + self.h
    }

    pub fn w2(&self, k: usize) -> Range<usize> {
        let b = self.block_base(k) + self.h * self.h + self.h;
        b..b + self.h * self.h
    }

    pub fn b2(&self, k: usize) -> Range<usize> {
        let b = self.block_base(k) + 2 * self.h * self.h + self.h;
        b..b + self.h
    }

    pub fn head_w(&self) -> Range<usize> {
        let b = self.block_base(self.blocks);
        b..b + self.s * self.h
    }

    pub fn head_b(&self) -> Range<usize> {
        let b = self.block_base(self.blocks) + self.s * self.h;
        b..b + self.s
    }

    pub fn total(&self) -> usize {
        self.head_b().end
    }
}

/// Construction-time settings for a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_residual_blocks: usize,
    /// Filled from the training data when loaded from a config file.
    pub num_species: usize,
    /// Applied inside residual blocks in training mode only.
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            num_residual_blocks: 4,
            num_species: 0,
            dropout_rate: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn with_species(num_species: usize) -> Self {
        Self {
            num_species,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::domain(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.num_residual_blocks == 0 {
            return Err(Error::domain("num_residual_blocks must be at least 1"));
        }
        self.shape().map(|_| ())
    }

    pub fn shape(&self) -> Result<ModelShape> {
        ModelShape::new(self.hidden_dim, self.num_residual_blocks, self.num_species)
    }
}

/// Inverted dropout applied to residual branch outputs during training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut SeededRng,
}

/// A coordinate network with parameters stored as `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    shape: ModelShape,
    params: Vec<T>,
}

/// The persisted model type.
pub type SinrModel = Network<f32>;

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Trace {
    pub feats: [f64; 4],
    pub z0: Vec<f64>,
    /// Residual stream before each block, plus the final state.
    pub h: Vec<Vec<f64>>,
    /// Pre-activation of the first layer in each block.
    pub u: Vec<Vec<f64>>,
    /// Pre-activation of the second layer in each block.
    pub w: Vec<Vec<f64>>,
    /// Dropout scale per unit; empty when dropout is off.
    pub mask: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl Trace {
    fn relu_margin(&self) -> f64 {
        self.z0
            .iter()
            .chain(self.u.iter().flatten())
            .chain(self.w.iter().flatten())
            .fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    let p = if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_FLOOR, PROB_CEIL)
}

/// `out = W·x + b` with `W` row-major `out.len() x x.len()`.
fn affine<T: Weight>(w: &[T], b: &[T], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for (wij, xj) in row.iter().zip(x) {
            acc += (*wij).into() * xj;
        }
        *o = acc + b[i].into();
    }
}

impl<T: Weight> Network<T> {
    pub fn from_params(shape: ModelShape, params: Vec<T>) -> Result<Self> {
        ModelShape::new(shape.hidden_dim, shape.num_blocks, shape.num_species)?;
        if params.len() != shape.num_params() {
            return Err(Error::structure(format!(
                "shape needs {} parameters, got {}",
                shape.num_params(),
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| !(*p).into().is_finite()) {
            return Err(Error::domain(format!("parameter {i} is not finite")));
        }
        Ok(Self { shape, params })
    }

    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            shape,
            params: vec![T::from_f64(0.0); shape.num_params()],
        }
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn num_species(&self) -> usize {
        self.shape.num_species
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub(crate) fn layout(&self) -> Layout {
        self.shape.layout()
    }

    /// Named parameter groups, mainly for tests and diagnostics.
    pub fn head_bias_mut(&mut self) -> &mut [T] {
        let r = self.layout().head_b();
        &mut self.params[r]
    }

    pub fn head_bias(&self) -> &[T] {
        &self.params[self.layout().head_b()]
    }

    pub fn cast<U: Weight>(&self) -> Network<U> {
        Network {
            shape: self.shape,
            params: self.params.iter().map(|&p| U::from_f64(p.into())).collect(),
        }
    }

    /// Per-species presence probabilities at an encoded location. Passing
    /// `None` for `dropout` gives the deterministic inference pass.
    pub fn forward(&self, encoded: &EncodedLocation, dropout: Option<&mut Dropout<'_>>) -> Vec<f64> {
        let mut trace = Trace::default();
        self.forward_traced(encoded, dropout, &mut trace);
        trace.probs
    }

    /// Inference over many coordinates; row `i` is the forward pass at
    /// `coords[i]`.
    pub fn forward_batch(&self, coords: &[GeoCoordinate]) -> Result<Matrix<f64>> {
        for c in coords {
            c.validate()?;
        }
        let s = self.shape.num_species;
        let rows: Vec<Vec<f64>> = coords
            .par_iter()
            .map_init(Trace::default, |trace, c| {
                self.forward_traced(&encode_unchecked(c), None, trace);
                trace.probs.clone()
            })
            .collect();
        Matrix::from_rows(s, rows)
    }

    /// Smallest distance of any ReLU input from zero at `encoded`. The
    /// network is differentiable at that point only if this is positive.
    pub fn relu_margin(&self, encoded: &EncodedLocation, dropout: Option<&mut Dropout<'_>>) -> f64 {
        let mut trace = Trace::default();
        self.forward_traced(encoded, dropout, &mut trace);
        trace.relu_margin()
    }

    pub(crate) fn forward_traced(
        &self,
        encoded: &EncodedLocation,
        mut dropout: Option<&mut Dropout<'_>>,
        t: &mut Trace,
    ) {
        let l = self.layout();
        let (hd, nb, s) = (
            self.shape.hidden_dim,
            self.shape.num_blocks,
            self.shape.num_species,
        );
        let p = &self.params;

        t.feats = encoded.0;
        t.z0.resize(hd, 0.0);
        affine(&p[l.in_w()], &p[l.in_b()], &t.feats, &mut t.z0);
        t.h.resize_with(nb + 1, Vec::new);
        t.u.resize_with(nb, Vec::new);
        t.w.resize_with(nb, Vec::new);
        t.h[0].clear();
        t.h[0].extend(t.z0.iter().map(|&z| relu(z)));

        let dropping = matches!(&dropout, Some(d) if d.rate > 0.0);
        t.mask.resize_with(if dropping { nb } else { 0 }, Vec::new);

        let mut v = vec![0.0; hd];
        for k in 0..nb {
            t.u[k].resize(hd, 0.0);
            affine(&p[l.w1(k)], &p[l.b1(k)], &t.h[k], &mut t.u[k]);
            for (vi, ui) in v.iter_mut().zip(&t.u[k]) {
                *vi = relu(*ui);
            }
            t.w[k].resize(hd, 0.0);
            affine(&p[l.w2(k)], &p[l.b2(k)], &v, &mut t.w[k]);

            if dropping {
                let d = dropout.as_deref_mut().expect("dropout present");
                let keep = 1.0 - d.rate;
                let scale = 1.0 / keep;
                t.mask[k].clear();
                for _ in 0..hd {
                    let m = if d.rng.random::<f64>() < d.rate {
                        0.0
                    } else {
                        scale
                    };
                    t.mask[k].push(m);
                }
            }

            let (prev, rest) = t.h.split_at_mut(k + 1);
            let next = &mut rest[0];
            next.clear();
            for (i, (&h, &w)) in prev[k].iter().zip(&t.w[k]).enumerate() {
                let mut branch = relu(w);
                if dropping {
                    branch *= t.mask[k][i];
                }
                next.push(h + branch);
            }
        }

        t.probs.resize(s, 0.0);
        affine(&p[l.head_w()], &p[l.head_b()], &t.h[nb], &mut t.probs);
        for a in t.probs.iter_mut() {
            *a = sigmoid(*a);
        }
    }

    /// Accumulates into `grad` the gradient of a scalar objective given its
    /// derivative `dlogits` with respect to the head pre-activations of the
    /// pass recorded in `t`.
    pub(crate) fn backward(&self, t: &Trace, dlogits: &[f64], grad: &mut [f64]) {
        let l = self.layout();
        let (hd, nb, s) = (
            self.shape.hidden_dim,
            self.shape.num_blocks,
            self.shape.num_species,
        );
        let p = &self.params;

        // head
        let mut dh = vec![0.0; hd];
        {
            let hw = &p[l.head_w()];
            let hb = &t.h[nb];
            let gw = l.head_w().start;
            let gb = l.head_b().start;
            for j in 0..s {
                let g = dlogits[j];
                if g == 0.0 {
                    continue;
                }
                grad[gb + j] += g;
                let row = &hw[j * hd..(j + 1) * hd];
                let grow = &mut grad[gw + j * hd..gw + (j + 1) * hd];
                for i in 0..hd {
                    grow[i] += g * hb[i];
                    dh[i] += g * row[i].into();
                }
            }
        }

        let mut dw = vec![0.0; hd];
        let mut du = vec![0.0; hd];
        let mut v = vec![0.0; hd];
        for k in (0..nb).rev() {
            for (vj, uj) in v.iter_mut().zip(&t.u[k]) {
                *vj = relu(*uj);
            }
            for i in 0..hd {
                let mut g = if t.w[k][i] > 0.0 { dh[i] } else { 0.0 };
                if !t.mask.is_empty() {
                    g *= t.mask[k][i];
                }
                dw[i] = g;
            }

            // second layer: w = W2·v + b2, v = relu(u)
            let w2 = &p[l.w2(k)];
            let gw2 = l.w2(k).start;
            let gb2 = l.b2(k).start;
            du.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..hd {
                let g = dw[i];
                if g == 0.0 {
                    continue;
                }
                grad[gb2 + i] += g;
                let row = &w2[i * hd..(i + 1) * hd];
                let grow = &mut grad[gw2 + i * hd..gw2 + (i + 1) * hd];
                for j in 0..hd {
                    grow[j] += g * v[j];
                    du[j] += g * row[j].into();
                }
            }
            for (d, &u) in du.iter_mut().zip(&t.u[k]) {
                if u <= 0.0 {
                    *d = 0.0;
                }
            }

            // first layer: u = W1·h + b1; the skip path passes dh through
            let w1 = &p[l.w1(k)];
            let gw1 = l.w1(k).start;
            let gb1 = l.b1(k).start;
            let hk = &t.h[k];
            for i in 0..hd {
                let g = du[i];
                if g == 0.0 {
                    continue;
                }
                grad[gb1 + i] += g;
                let row = &w1[i * hd..(i + 1) * hd];
                let grow = &mut grad[gw1 + i * hd..gw1 + (i + 1) * hd];
                for j in 0..hd {
                    grow[j] += g * hk[j];
                    dh[j] += g * row[j].into();
                }
            }
        }

        let gw = l.in_w().start;
        let gb = l.in_b().start;
        for i in 0..hd {
            if t.z0[i] <= 0.0 {
                continue;
            }
            let g = dh[i];
            grad[gb + i] += g;
            for (c, f) in t.feats.iter().enumerate() {
                grad[gw + i * 4 + c] += g * f;
            }
        }
    }
}

impl SinrModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &ModelConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let shape = config.shape()?;
        let l = shape.layout();
        let mut params = vec![0.0f32; shape.num_params()];
        let (h, s) = (shape.hidden_dim, shape.num_species);
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-a..a) as f32;
            }
        };
        fill(l.in_w(), 4, h);
        for k in 0..shape.num_blocks {
            fill(l.w1(k), h, h);
            fill(l.w2(k), h, h);
        }
        fill(l.head_w(), h, s);
        Ok(Self { shape, params })
    }
}

/// Anything that maps locations to per-species scores.
pub trait SpeciesScorer: Sync {
    fn num_species(&self) -> usize;

    /// Row `i` holds the scores at `coords[i]`.
    fn predict_batch(&self, coords: &[GeoCoordinate]) -> Result<Matrix<f64>>;
}

impl<T: Weight> SpeciesScorer for Network<T> {
    fn num_species(&self) -> usize {
        self.shape.num_species
    }

    fn predict_batch(&self, coords: &[GeoCoordinate]) -> Result<Matrix<f64>> {
        self.forward_batch(coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::encode_location;
    use rand::SeedableRng;

    fn seeded_model(hidden: usize, blocks: usize, species: usize, seed: u64) -> SinrModel {
        let cfg = ModelConfig {
            hidden_dim: hidden,
            num_residual_blocks: blocks,
            num_species: species,
            dropout_rate: 0.5,
        };
        let mut rng = SeededRng::seed_from_u64(seed);
        let mut m = SinrModel::init(&cfg, &mut rng).unwrap();
        // non-zero biases so the oracle exercises them too
        for (i, p) in m.params_mut().iter_mut().enumerate() {
            if *p == 0.0 {
                *p = ((i % 7) as f32 - 3.0) * 0.05;
            }
        }
        m
    }

    /// Straight-line evaluation of the documented formulas with explicit
    /// offsets, independent of `Layout` and `affine`.
    fn naive_forward(m: &SinrModel, lon: f64, lat: f64) -> Vec<f64> {
        let h = m.shape().hidden_dim;
        let s = m.shape().num_species;
        let nb = m.shape().num_blocks;
        let p: Vec<f64> = m.params().iter().map(|&x| x as f64).collect();
        let x = std::f64::consts::PI * lon / 180.0;
        let y = std::f64::consts::PI * lat / 90.0;
        let f = [x.sin(), x.cos(), y.sin(), y.cos()];
        let mut off = 0;
        let mut state = vec![0.0; h];
        for i in 0..h {
            let mut a = 0.0;
            for c in 0..4 {
                a += p[off + i * 4 + c] * f[c];
            }
            state[i] = a;
        }
        off += 4 * h;
        for i in 0..h {
            state[i] = (state[i] + p[off + i]).max(0.0);
        }
        off += h;
        for _ in 0..nb {
            let w1 = off;
            let b1 = w1 + h * h;
            let w2 = b1 + h;
            let b2 = w2 + h * h;
            off = b2 + h;
            let mut mid = vec![0.0; h];
            for i in 0..h {
                let mut a = 0.0;
                for j in 0..h {
                    a += p[w1 + i * h + j] * state[j];
                }
                mid[i] = (a + p[b1 + i]).max(0.0);
            }
            let mut next = state.clone();
            for i in 0..h {
                let mut a = 0.0;
                for j in 0..h {
                    a += p[w2 + i * h + j] * mid[j];
                }
                next[i] += (a + p[b2 + i]).max(0.0);
            }
            state = next;
        }
        let hw = off;
        let hb = hw + s * h;
        (0..s)
            .map(|j| {
                let mut a = 0.0;
                for i in 0..h {
                    a += p[hw + j * h + i] * state[i];
                }
                1.0 / (1.0 + (-(a + p[hb + j])).exp())
            })
            .collect()
    }

    #[test]
    fn zero_model_outputs_one_half() {
        let m = SinrModel::zeros(ModelShape::new(16, 2, 7).unwrap());
        for (lon, lat) in [(0.0, 0.0), (-120.0, 45.0), (180.0, -90.0)] {
            let e = encode_location(&GeoCoordinate::new(lon, lat).unwrap()).unwrap();
            assert_eq!(m.forward(&e, None), vec![0.5; 7]);
        }
    }

    #[test]
    fn matches_naive_oracle() {
        for seed in 0..5 {
            let m = seeded_model(8, 3, 5, seed);
            for (lon, lat) in [(12.5, -33.0), (-170.0, 80.0), (0.0, 0.0)] {
                let e = encode_location(&GeoCoordinate::new(lon, lat).unwrap()).unwrap();
                let got = m.forward(&e, None);
                let want = naive_forward(&m, lon, lat);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-12, "{g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn inference_is_deterministic_and_dropout_free() {
        let m = seeded_model(8, 2, 4, 9);
        let e = encode_location(&GeoCoordinate::new(33.0, 10.0).unwrap()).unwrap();
        let a = m.forward(&e, None);
        let b = m.forward(&e, None);
        assert_eq!(a, b);

        // zero-rate dropout draws nothing and matches inference
        let mut rng = SeededRng::seed_from_u64(1);
        let mut d = Dropout {
            rate: 0.0,
            rng: &mut rng,
        };
        assert_eq!(m.forward(&e, Some(&mut d)), a);

        let mut d = Dropout {
            rate: 0.5,
            rng: &mut rng,
        };
        let noisy = m.forward(&e, Some(&mut d));
        assert!(noisy.iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn batch_rows_match_single_forward() {
        let m = seeded_model(8, 2, 5, 3);
        let coords: Vec<_> = [(1.0, 2.0), (-75.0, 40.0), (1.0, 2.0), (179.0, -60.0)]
            .iter()
            .map(|&(a, b)| GeoCoordinate::new(a, b).unwrap())
            .collect();
        let out = m.forward_batch(&coords).unwrap();
        assert_eq!(out.rows(), 4);
        for (i, c) in coords.iter().enumerate() {
            assert_eq!(
                out.row(i),
                m.forward(&encode_location(c).unwrap(), None).as_slice()
            );
        }
        assert_eq!(out.row(0), out.row(2));

        let mut rev = coords.clone();
        rev.reverse();
        let out_rev = m.forward_batch(&rev).unwrap();
        for i in 0..4 {
            assert_eq!(out.row(i), out_rev.row(3 - i));
        }
        assert_eq!(m.forward_batch(&[]).unwrap().rows(), 0);
    }

    #[test]
    fn extreme_logits_stay_inside_unit_interval() {
        let mut m = SinrModel::zeros(ModelShape::new(4, 1, 2).unwrap());
        m.head_bias_mut().copy_from_slice(&[1e6, -1e6]);
        let e = encode_location(&GeoCoordinate::new(0.0, 0.0).unwrap()).unwrap();
        let p = m.forward(&e, None);
        assert!(p[0] < 1.0 && p[0] > 0.99);
        assert!(p[1] > 0.0 && p[1] < 1e-300);
    }

    #[test]
    fn rejects_bad_parameters() {
        let shape = ModelShape::new(4, 1, 2).unwrap();
        assert!(matches!(
            SinrModel::from_params(shape, vec![0.0; 3]),
            Err(Error::Structure(_))
        ));
        let mut p = vec![0.0f32; shape.num_params()];
        p[5] = f32::NAN;
        assert!(matches!(SinrModel::from_params(shape, p), Err(Error::Domain(_))));
        assert!(ModelShape::new(0, 1, 2).is_err());
        assert!(ModelShape::new(4, 1, 0).is_err());
    }

    #[test]
    fn layout_covers_every_parameter_once() {
        let shape = ModelShape::new(3, 2, 5).unwrap();
        let l = shape.layout();
        let mut ranges = vec![l.in_w(), l.in_b()];
        for k in 0..2 {
            ranges.extend([l.w1(k), l.b1(k), l.w2(k), l.b2(k)]);
        }
        ranges.extend([l.head_w(), l.head_b()]);
        let mut next = 0;
        for r in ranges {
            assert_eq!(r.start, next);
            next = r.end;
        }
        assert_eq!(next, 4 * 3 + 3 + 2 * (2 * 9 + 2 * 3) + 5 * 3 + 5);
        assert_eq!(shape.num_params(), next);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn outputs_are_open_unit_interval(
            seed in 0u64..1000,
            lon in -180.0f64..=180.0,
            lat in -90.0f64..=90.0,
            scale in 0.1f32..20.0,
        ) {
            let mut m = seeded_model(6, 2, 3, seed);
            for p in m.params_mut() {
                *p *= scale;
            }
            let e = encode_location(&GeoCoordinate::new(lon, lat).unwrap()).unwrap();
            for p in m.forward(&e, None) {
                proptest::prop_assert!(p > 0.0 && p < 1.0 && p.is_finite());
            }
        }
    }
}
