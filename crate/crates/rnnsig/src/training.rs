//! Spiral data, penalised training and projected-gradient attacks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use rnnsig_core::linalg::Matrix;
use rnnsig_core::rkhs::rkhs_norm;
use rnnsig_core::{Activation, PathConfig, PiecewiseLinearPath, RnnParams};

use crate::error::{Error, Result};

const SPIRAL_NOISE: f64 = 0.01;

/// Labelled sequences of `T` points in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SpiralDataset {
    pub sequences: Vec<Vec<Vec<f64>>>,
    pub labels: Vec<f64>,
    pub seed: u64,
}

impl SpiralDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.sequences.first().and_then(|s| s.first()).map_or(0, Vec::len)
    }

    /// Each sequence as a path through the origin and its samples.
    pub fn paths(&self) -> Result<Vec<PiecewiseLinearPath>> {
        self.sequences.iter().map(|s| Ok(PiecewiseLinearPath::from_samples(s)?)).collect()
    }

    pub fn max_total_variation(&self) -> Result<f64> {
        Ok(self.paths()?.iter().map(|p| p.total_variation(0.0, 1.0)).collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max))
    }

    pub fn scaled(&self, factor: f64) -> SpiralDataset {
        let sequences = self
            .sequences
            .iter()
            .map(|s| s.iter().map(|x| x.iter().map(|v| v * factor).collect()).collect())
            .collect();
        SpiralDataset { sequences, labels: self.labels.clone(), seed: self.seed }
    }

    /// Rescales every sequence by one common factor so that all paths have
    /// total variation at most `L`. Returns the factor.
    pub fn normalized(&self, config: PathConfig) -> Result<(SpiralDataset, f64)> {
        let tv = self.max_total_variation()?;
        let scale = if tv > config.l() { config.l() / tv } else { 1.0 };
        Ok((self.scaled(scale), scale))
    }

    /// Mean Frobenius norm of the `T × d` input matrices.
    pub fn mean_frobenius(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.sequences.iter().map(|s| frobenius(s)).sum::<f64>() / self.len() as f64
    }
}

fn frobenius(x: &[Vec<f64>]) -> f64 {
    x.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// `n` noisy spirals `r = 0.25 + 0.75 t`, `φ = ±4πt + phase`, sampled at
/// `t_j = j / T`, `j = 1..T`. Labels alternate `+1` (counter-clockwise) and `-1`.
pub fn make_spirals(n: usize, steps: usize, seed: u64) -> SpiralDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, SPIRAL_NOISE).expect("positive standard deviation");
    let mut sequences = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let seq = (1..=steps)
            .map(|j| {
                let t = j as f64 / steps as f64;
                let r = 0.25 + 0.75 * t;
                let phi = label * 4.0 * std::f64::consts::PI * t + phase;
                vec![r * phi.cos() + noise.sample(&mut rng), r * phi.sin() + noise.sample(&mut rng)]
            })
            .collect();
        sequences.push(seq);
        labels.push(label);
    }
    SpiralDataset { sequences, labels, seed }
}

/// Optimiser and penalty settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// The learning rate is halved every this many epochs.
    pub halve_every: usize,
    pub lambda: f64,
    /// Truncation depth of the RKHS norm.
    pub depth: usize,
    /// Central-difference step of the penalty gradient.
    pub fd_step: f64,
    pub learn_h0: bool,
    pub path: PathConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            halve_every: 40,
            lambda: 0.0,
            depth: 3,
            fd_step: 1e-4,
            learn_h0: true,
            path: PathConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if !(self.lr > 0.0) || !(self.fd_step > 0.0) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("lr, fd_step and adam_eps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment decays must lie in [0, 1)".into()));
        }
        if self.halve_every == 0 {
            return Err(Error::Config("halve_every must be positive".into()));
        }
        Ok(())
    }
}

/// Weights drawn uniformly from `±1/√e`, zero initial state.
pub fn init_params(hidden: usize, input: usize, activation: Activation, rng: &mut impl Rng) -> RnnParams {
    let k = 1.0 / (hidden as f64).sqrt();
    let mut draw = |r: usize, c: usize| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-k..k)).collect()).expect("sizes match")
    };
    let u = draw(hidden, hidden);
    let v = draw(hidden, input);
    let b = draw(hidden, 1).data().to_vec();
    let psi = draw(1, hidden);
    RnnParams::new(u, v, b, psi, vec![0.0; hidden], activation).expect("consistent shapes")
}

/// `log(1 + e^{-m})`.
pub fn logistic_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `d/dm log(1 + e^{-m})`.
pub fn logistic_loss_derivative(margin: f64) -> f64 {
    if margin > 0.0 {
        let e = (-margin).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + margin.exp())
    }
}

/// Final readout `z_T`.
pub fn predict(params: &RnnParams, seq: &[Vec<f64>]) -> Result<f64> {
    let traj = params.forward(seq)?;
    Ok(traj.outputs.last().expect("non-empty sequence")[0])
}

/// `+1` if `z_T > 0`, otherwise `-1`.
pub fn classify(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn accuracy(params: &RnnParams, data: &SpiralDataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let correct = data
        .sequences
        .par_iter()
        .zip(&data.labels)
        .map(|(s, y)| Ok((classify(predict(params, s)?) == *y) as usize))
        .collect::<Result<Vec<_>>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / data.len() as f64)
}

/// Mean logistic loss of `y z_T`.
pub fn data_loss(params: &RnnParams, data: &SpiralDataset) -> Result<f64> {
    let losses = data
        .sequences
        .par_iter()
        .zip(&data.labels)
        .map(|(s, y)| Ok(logistic_loss(y * predict(params, s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Mean loss plus `λ ‖ξ‖²_ℋ`.
pub fn objective(params: &RnnParams, data: &SpiralDataset, cfg: &TrainConfig) -> Result<f64> {
    let mut value = data_loss(params, data)?;
    if cfg.lambda > 0.0 {
        let n = rkhs_norm(params, cfg.path, cfg.depth)?;
        value += cfg.lambda * n * n;
    }
    Ok(value)
}

/// Backpropagated gradient of the mean loss, flattened like [`RnnParams::to_flat`].
pub fn data_loss_gradient(params: &RnnParams, data: &SpiralDataset) -> Result<Vec<f64>> {
    let per_sample = data
        .sequences
        .par_iter()
        .zip(&data.labels)
        .map(|(s, y)| {
            let traj = params.forward(s)?;
            let z = traj.outputs.last().expect("non-empty sequence")[0];
            let mut upstream = vec![vec![0.0]; s.len()];
            upstream[s.len() - 1][0] = y * logistic_loss_derivative(y * z);
            Ok(params.backward(s, &traj, &upstream)?.to_flat())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; params.num_params()];
    for g in &per_sample {
        total.iter_mut().zip(g).for_each(|(t, v)| *t += v);
    }
    let inv = 1.0 / data.len() as f64;
    total.iter_mut().for_each(|t| *t *= inv);
    Ok(total)
}

/// Central differences of `λ ‖ξ‖²_ℋ` (truncated at `depth`) in every parameter.
pub fn penalty_gradient(params: &RnnParams, lambda: f64, depth: usize, config: PathConfig, step: f64) -> Result<Vec<f64>> {
    let flat = params.to_flat();
    (0..flat.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = flat.clone();
            probe[i] = flat[i] + step;
            let plus = rkhs_norm(&params.with_flat(&probe)?, config, depth)?;
            probe[i] = flat[i] - step;
            let minus = rkhs_norm(&params.with_flat(&probe)?, config, depth)?;
            Ok(lambda * (plus * plus - minus * minus) / (2.0 * step))
        })
        .collect()
}

/// Gradient of [`objective`]: backpropagation for the loss, finite
/// differences for the penalty.
pub fn objective_gradient(params: &RnnParams, data: &SpiralDataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    let mut g = data_loss_gradient(params, data)?;
    if cfg.lambda > 0.0 {
        let p = penalty_gradient(params, cfg.lambda, cfg.depth, cfg.path, cfg.fd_step)?;
        g.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
    }
    Ok(g)
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    /// `‖[U V]‖_F`.
    pub frob_norm: f64,
    pub rkhs_norm: f64,
}

fn record(epoch: usize, params: &RnnParams, data: &SpiralDataset, cfg: &TrainConfig) -> Result<EpochRecord> {
    let loss = objective(params, data, cfg)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training objective at epoch {epoch}")));
    }
    Ok(EpochRecord {
        epoch,
        loss,
        accuracy: accuracy(params, data)?,
        frob_norm: params.w().frobenius(),
        rkhs_norm: rkhs_norm(params, cfg.path, cfg.depth)?,
    })
}

/// Full-batch Adam on [`objective`]. The trace starts with the initial
/// parameters (epoch 0) and has one row per epoch after that.
pub fn train(cfg: &TrainConfig, data: &SpiralDataset, init: &RnnParams) -> Result<(RnnParams, Vec<EpochRecord>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(rnnsig_core::Error::EmptySamples.into());
    }
    let mut params = init.clone();
    let mut theta = params.to_flat();
    let h0_start = theta.len() - params.hidden_size();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut trace = vec![record(0, &params, data, cfg)?];
    for epoch in 1..=cfg.epochs {
        let mut g = objective_gradient(&params, data, cfg)?;
        if !cfg.learn_h0 {
            g[h0_start..].iter_mut().for_each(|x| *x = 0.0);
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at epoch {epoch}")));
        }
        let lr = cfg.lr * 0.5f64.powi(((epoch - 1) / cfg.halve_every) as i32);
        let c1 = 1.0 - cfg.beta1.powi(epoch as i32);
        let c2 = 1.0 - cfg.beta2.powi(epoch as i32);
        for i in 0..theta.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
        }
        params = params.with_flat(&theta)?;
        trace.push(record(epoch, &params, data, cfg)?);
    }
    Ok((params, trace))
}

/// Outcome of an attack at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub epsilon: f64,
    pub perturbed: SpiralDataset,
    /// Whether each example is misclassified after the attack.
    pub broken: Vec<bool>,
    pub accuracy: f64,
}

fn input_gradient(params: &RnnParams, seq: &[Vec<f64>], y: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let traj = params.forward(seq)?;
    let z = traj.outputs.last().expect("non-empty sequence")[0];
    let mut upstream = vec![vec![0.0]; seq.len()];
    upstream[seq.len() - 1][0] = y * logistic_loss_derivative(y * z);
    Ok((z, params.backward(seq, &traj, &upstream)?.x))
}

fn attack_one(params: &RnnParams, seq: &[Vec<f64>], y: f64, eps: f64, steps: usize, step_size: f64) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut delta = vec![vec![0.0; seq[0].len()]; seq.len()];
    let shifted = |delta: &[Vec<f64>]| -> Vec<Vec<f64>> {
        seq.iter().zip(delta).map(|(x, d)| x.iter().zip(d).map(|(a, b)| a + b).collect()).collect()
    };
    let mut current = seq.to_vec();
    for _ in 0..steps {
        let (z, g) = input_gradient(params, &current, y)?;
        if classify(z) != y {
            return Ok((current, true));
        }
        let norm = frobenius(&g);
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        for (d, gi) in delta.iter_mut().zip(&g) {
            d.iter_mut().zip(gi).for_each(|(a, b)| *a += step_size * b / norm);
        }
        let dn = frobenius(&delta);
        if dn > eps {
            let s = eps / dn;
            delta.iter_mut().flatten().for_each(|a| *a *= s);
        }
        current = shifted(&delta);
    }
    let z = predict(params, &current)?;
    Ok((current, classify(z) != y))
}

/// Projected gradient ascent on each example's loss inside the Frobenius
/// ball of radius `ε` around its `T × d` input matrix. Steps have length
/// `step_size` along the normalised gradient; an example stops as soon as it
/// is misclassified.
pub fn pgd_attack(params: &RnnParams, data: &SpiralDataset, eps: f64, steps: usize, step_size: f64) -> Result<AttackResult> {
    if !(eps >= 0.0) || !(step_size >= 0.0) {
        return Err(Error::Config("ε and the step size must be non-negative".into()));
    }
    let steps = if eps == 0.0 { 0 } else { steps };
    let results = data
        .sequences
        .par_iter()
        .zip(&data.labels)
        .map(|(s, y)| attack_one(params, s, *y, eps, steps, step_size))
        .collect::<Result<Vec<_>>>()?;
    let (sequences, broken): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let accuracy = broken.iter().filter(|b| !**b).count() as f64 / data.len().max(1) as f64;
    Ok(AttackResult {
        epsilon: eps,
        perturbed: SpiralDataset { sequences, labels: data.labels.clone(), seed: data.seed },
        broken,
        accuracy,
    })
}

/// Adversarial accuracy along an increasing grid of radii, with step size
/// `2.5 ε / steps`. A perturbation found at one radius stays admissible at
/// every larger one, so an example broken at `ε` counts as broken further
/// up the grid.
pub fn attack_curve(params: &RnnParams, data: &SpiralDataset, grid: &[f64], steps: usize) -> Result<Vec<(f64, f64)>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("ε grid must be non-decreasing".into()));
    }
    let mut broken = vec![false; data.len()];
    let mut out = Vec::with_capacity(grid.len());
    for &eps in grid {
        let step_size = if steps == 0 { 0.0 } else { 2.5 * eps / steps as f64 };
        let r = pgd_attack(params, data, eps, steps, step_size)?;
        broken.iter_mut().zip(&r.broken).for_each(|(a, b)| *a |= *b);
        let acc = broken.iter().filter(|b| !**b).count() as f64 / data.len().max(1) as f64;
        out.push((eps, acc));
    }
    Ok(out)
}
