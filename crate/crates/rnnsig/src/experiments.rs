//! The experiment drivers behind the command-line subcommands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rnnsig_core::linalg::Matrix;
use rnnsig_core::ode::{euler_gap, integrate_cde, CdeField, Tolerance};
use rnnsig_core::signature::signature;
use rnnsig_core::taylor::{taylor_error_bound, TaylorExpansion};
use rnnsig_core::{Activation, PathConfig, PiecewiseLinearPath, RnnParams};

use crate::error::Result;
use crate::io::Table;
use crate::training::{attack_curve, init_params, make_spirals, train, EpochRecord, TrainConfig};

/// Seed of the `index`-th independent run derived from a base seed.
pub fn run_seed(base: u64, index: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9)) ^ index
}

/// The noise-free spiral `r = 0.25 + 0.75 t`, `φ = 4πt + phase` through
/// `segments + 1` equispaced points, translated to start at the origin and
/// rescaled to total variation `L`. The phase is drawn from `seed`.
pub fn spiral_path(segments: usize, seed: u64, config: PathConfig) -> Result<PiecewiseLinearPath> {
    let phase = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..std::f64::consts::TAU);
    let times: Vec<f64> = (0..=segments).map(|i| i as f64 / segments as f64).collect();
    let values = times
        .iter()
        .map(|t| {
            let (r, phi) = (0.25 + 0.75 * t, 4.0 * std::f64::consts::PI * t + phase);
            vec![r * phi.cos(), r * phi.sin()]
        })
        .collect();
    let path = PiecewiseLinearPath::new(times, values)?.normalize(config).0;
    let tv = path.total_variation(0.0, 1.0)?;
    Ok(path.scaled(config.l() / tv))
}

/// Uniform weights in `±s/√e` for `U` and `V`, default-scale `b` and `ψ`.
pub fn random_params(rng: &mut ChaCha8Rng, hidden: usize, input: usize, weight_scale: f64, activation: Activation) -> RnnParams {
    let mut p = init_params(hidden, input, activation, rng);
    let k = weight_scale / (hidden as f64).sqrt();
    let mut draw = |r: usize, c: usize| Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-k..k)).collect()).unwrap();
    p.u = draw(hidden, hidden);
    p.v = draw(hidden, input);
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorConfig {
    pub runs: usize,
    pub hidden: usize,
    pub max_depth: usize,
    pub activations: Vec<Activation>,
    /// `log10` range of the weight scale relative to the default initialisation.
    pub log_scale: (f64, f64),
    pub path_segments: usize,
    pub path: PathConfig,
    pub tol: Tolerance,
    pub seed: u64,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig {
            runs: 100,
            hidden: 2,
            max_depth: 5,
            activations: vec![Activation::Logistic, Activation::Tanh],
            log_scale: (-4.0, 0.0),
            path_segments: 100,
            path: PathConfig::default(),
            tol: Tolerance::new(1e-14, 1e-13).expect("valid tolerance"),
            seed: 0,
        }
    }
}

/// Error of the step-`N` expansion for one network and one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorRow {
    pub run_id: usize,
    pub activation: Activation,
    pub frob_norm: f64,
    pub radius_holds: bool,
    pub depth: usize,
    pub error: f64,
    pub bound: f64,
}

/// `‖H̄_1 - H̄^N_1‖` against a tight reference solution for `N = 1..max_depth`.
pub fn taylor_convergence(cfg: &TaylorConfig) -> Result<Vec<TaylorRow>> {
    let path = spiral_path(cfg.path_segments, cfg.seed, cfg.path)?;
    let aug = path.time_augment(cfg.path);
    let sig = signature(&aug, cfg.max_depth, 0.0, 1.0)?;
    let jobs: Vec<(usize, Activation)> =
        cfg.activations.iter().flat_map(|a| (0..cfg.runs).map(move |r| (r, *a))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(run, act)| -> Result<Vec<TaylorRow>> {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, run as u64));
            let scale = 10f64.powf(rng.gen_range(cfg.log_scale.0..=cfg.log_scale.1));
            let params = random_params(&mut rng, cfg.hidden, 2, scale, act);
            let field = CdeField::new(&params, cfg.path);
            let reference = integrate_cde(&params, &aug, cfg.path, cfg.tol)?.final_value();
            let expansion = TaylorExpansion::new(&field, &aug.point(0)[..2], cfg.max_depth)?;
            let frob_norm = params.w().frobenius();
            (1..=cfg.max_depth)
                .map(|n| {
                    let approx = expansion.evaluate(&sig, n)?;
                    let error = approx.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    let b = taylor_error_bound(&field, n);
                    Ok(TaylorRow {
                        run_id: run,
                        activation: act,
                        frob_norm,
                        radius_holds: b.radius_holds,
                        depth: n,
                        error,
                        bound: b.bound,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn taylor_table(rows: &[TaylorRow]) -> Table {
    let mut t = Table::new(&["run_id", "frob_norm", "activation", "N", "error", "bound", "radius_holds"]);
    for r in rows {
        t.push(vec![
            r.run_id.to_string(),
            format!("{:?}", r.frob_norm),
            r.activation.name().to_string(),
            r.depth.to_string(),
            format!("{:?}", r.error),
            format!("{:?}", r.bound),
            r.radius_holds.to_string(),
        ]);
    }
    t
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `log10` of an error, floored at the smallest positive double.
pub fn log_error(e: f64) -> f64 {
    e.max(f64::MIN_POSITIVE).log10()
}

/// Median `log10` error per depth for one activation.
pub fn median_log_errors(rows: &[TaylorRow], act: Activation, max_depth: usize) -> Vec<f64> {
    (1..=max_depth)
        .map(|n| {
            let mut v: Vec<f64> =
                rows.iter().filter(|r| r.activation == act && r.depth == n).map(|r| log_error(r.error)).collect();
            median(&mut v)
        })
        .collect()
}

/// Per-run slope of `log10` error against `N`, with the run's radius flag.
pub fn run_slopes(rows: &[TaylorRow], act: Activation) -> Vec<(usize, bool, f64)> {
    let mut ids: Vec<usize> = rows.iter().filter(|r| r.activation == act).map(|r| r.run_id).collect();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let run: Vec<&TaylorRow> = rows.iter().filter(|r| r.activation == act && r.run_id == id).collect();
            let x: Vec<f64> = run.iter().map(|r| r.depth as f64).collect();
            let y: Vec<f64> = run.iter().map(|r| log_error(r.error)).collect();
            (id, run[0].radius_holds, slope(&x, &y))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerConfig {
    pub runs: usize,
    pub hidden: usize,
    pub input: usize,
    pub steps: Vec<usize>,
    pub path_segments: usize,
    pub activation: Activation,
    pub path: PathConfig,
    pub tol: Tolerance,
    pub seed: u64,
}

impl Default for EulerConfig {
    fn default() -> Self {
        EulerConfig {
            runs: 20,
            hidden: 2,
            input: 2,
            steps: vec![16, 32, 64, 128],
            path_segments: 512,
            activation: Activation::Logistic,
            path: PathConfig::default(),
            tol: Tolerance::new(1e-13, 1e-12).expect("valid tolerance"),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerRow {
    pub run_id: usize,
    pub steps: usize,
    pub gap: f64,
    pub bound: f64,
}

/// Discretisation gap of random default-initialised networks along one fixed
/// fine path sampled at `j / T`.
pub fn euler_sweep(cfg: &EulerConfig) -> Result<Vec<EulerRow>> {
    let path = if cfg.input == 2 {
        spiral_path(cfg.path_segments, cfg.seed, cfg.path)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let s: Vec<Vec<f64>> =
            (0..cfg.path_segments).map(|_| (0..cfg.input).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        PiecewiseLinearPath::from_samples(&s)?.normalize(cfg.path).0
    };
    let rows = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<EulerRow>> {
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(cfg.seed, run as u64));
            let params = init_params(cfg.hidden, cfg.input, cfg.activation, &mut rng);
            cfg.steps
                .iter()
                .map(|&t| {
                    let g = euler_gap(&params, &path, t, cfg.path, cfg.tol)?;
                    Ok(EulerRow { run_id: run, steps: t, gap: g.gap, bound: g.bound })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn euler_table(rows: &[EulerRow]) -> Table {
    let mut t = Table::new(&["run_id", "T", "gap", "bound"]);
    for r in rows {
        t.push(vec![r.run_id.to_string(), r.steps.to_string(), format!("{:?}", r.gap), format!("{:?}", r.bound)]);
    }
    t
}

/// Time-channel constant of the RKHS penalty in the attack experiment. The
/// raw spirals are not rescaled into the `L` ball, so `L` only weights the
/// time letter; at `L = 0.5` a penalty of `λ = 0.1` drives the readout to zero.
pub const TRAIN_ATTACK_L: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainAttackConfig {
    pub seeds: Vec<u64>,
    pub hidden: usize,
    pub activation: Activation,
    pub n_train: usize,
    pub n_test: usize,
    pub steps: usize,
    pub lambda: f64,
    pub train: TrainConfig,
    /// Radii as multiples of the mean Frobenius norm of the test inputs.
    pub eps_grid: Vec<f64>,
    pub pgd_steps: usize,
    /// Rescale the data so every training path has total variation at most `L`.
    pub normalize: bool,
}

impl Default for TrainAttackConfig {
    fn default() -> Self {
        TrainAttackConfig {
            seeds: (0..5).collect(),
            hidden: 32,
            activation: Activation::Tanh,
            n_train: 50,
            n_test: 1000,
            steps: 100,
            lambda: 0.1,
            train: TrainConfig { path: PathConfig::new(TRAIN_ATTACK_L).expect("valid L"), ..TrainConfig::default() },
            eps_grid: (0..=10).map(|i| i as f64 * 0.04).collect(),
            pgd_steps: 50,
            normalize: false,
        }
    }
}

/// Trace and attack curve of one trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub lambda: f64,
    pub params: RnnParams,
    pub trace: Vec<EpochRecord>,
    pub clean_accuracy: f64,
    /// `(ε, adversarial accuracy)`, ε in absolute input units.
    pub curve: Vec<(f64, f64)>,
}

/// Trains a penalised and an unpenalised model from the same initialisation
/// for every seed and attacks both on a fresh test set.
pub fn train_attack(cfg: &TrainAttackConfig) -> Result<Vec<RunOutcome>> {
    let jobs: Vec<(u64, f64)> = cfg.seeds.iter().flat_map(|&s| [(s, 0.0), (s, cfg.lambda)]).collect();
    jobs.par_iter()
        .map(|&(seed, lambda)| {
            let train_raw = make_spirals(cfg.n_train, cfg.steps, run_seed(seed, 1));
            let test_raw = make_spirals(cfg.n_test, cfg.steps, run_seed(seed, 2));
            let (train_data, test_data) = if cfg.normalize {
                let (t, scale) = train_raw.normalized(cfg.train.path)?;
                (t, test_raw.scaled(scale))
            } else {
                (train_raw, test_raw)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 3));
            let init = init_params(cfg.hidden, 2, cfg.activation, &mut rng);
            let tc = TrainConfig { lambda, ..cfg.train.clone() };
            let (params, trace) = train(&tc, &train_data, &init)?;
            let unit = test_data.mean_frobenius();
            let grid: Vec<f64> = cfg.eps_grid.iter().map(|e| e * unit).collect();
            let curve = attack_curve(&params, &test_data, &grid, cfg.pgd_steps)?;
            let clean_accuracy = crate::training::accuracy(&params, &test_data)?;
            Ok(RunOutcome { seed, lambda, params, trace, clean_accuracy, curve })
        })
        .collect()
}

pub fn trace_table(runs: &[RunOutcome]) -> Table {
    let mut t = Table::new(&["seed", "lambda", "epoch", "loss", "acc", "frob_norm", "rkhs_norm"]);
    for r in runs {
        for e in &r.trace {
            t.push(vec![
                r.seed.to_string(),
                r.lambda.to_string(),
                e.epoch.to_string(),
                format!("{:?}", e.loss),
                format!("{:?}", e.accuracy),
                format!("{:?}", e.frob_norm),
                format!("{:?}", e.rkhs_norm),
            ]);
        }
    }
    t
}

pub fn attack_table(runs: &[RunOutcome]) -> Table {
    let mut t = Table::new(&["seed", "lambda", "epsilon", "adv_accuracy"]);
    for r in runs {
        for (eps, acc) in &r.curve {
            t.push(vec![r.seed.to_string(), r.lambda.to_string(), format!("{eps:?}"), format!("{acc:?}")]);
        }
    }
    t
}

/// Mean adversarial accuracy at grid position `index` over runs with the given `λ`.
pub fn mean_accuracy_at(runs: &[RunOutcome], lambda: f64, index: usize) -> f64 {
    let sel: Vec<f64> = runs.iter().filter(|r| r.lambda == lambda).map(|r| r.curve[index].1).collect();
    sel.iter().sum::<f64>() / sel.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_and_median() {
        assert!((slope(&[1.0, 2.0, 3.0], &[5.0, 3.0, 1.0]) + 2.0).abs() < 1e-15);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(log_error(0.0), f64::MIN_POSITIVE.log10());
    }

    #[test]
    fn spiral_path_has_budget_variation() {
        let cfg = PathConfig::default();
        let p = spiral_path(64, 3, cfg).unwrap();
        assert!((p.total_variation(0.0, 1.0).unwrap() - cfg.l()).abs() < 1e-12);
        assert_ne!(run_seed(1, 0), run_seed(1, 1));
    }

    #[test]
    fn small_taylor_run_converges() {
        let cfg = TaylorConfig { runs: 4, max_depth: 4, log_scale: (-2.0, -1.0), ..TaylorConfig::default() };
        let rows = taylor_convergence(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 4 * 4);
        for act in [Activation::Logistic, Activation::Tanh] {
            let med = median_log_errors(&rows, act, 4);
            assert!(med.windows(2).all(|w| w[1] < w[0]), "{med:?}");
        }
        assert_eq!(taylor_table(&rows).rows.len(), rows.len());
    }

    #[test]
    fn small_euler_sweep_respects_bound() {
        let cfg = EulerConfig { runs: 3, steps: vec![8, 16], path_segments: 64, ..EulerConfig::default() };
        let rows = euler_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.gap <= r.bound));
    }
}
