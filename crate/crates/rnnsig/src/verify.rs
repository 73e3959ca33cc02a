//! Property suites with independent oracles.
//!
//! Each check returns a [`Check`]; [`run_all`] runs them in a fixed order.
//! [`Scale::Full`] uses the sizes and tolerances of the acceptance criteria,
//! [`Scale::Quick`] shrinks the sample counts for a fast smoke run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rnnsig_core::linalg::Matrix;
use rnnsig_core::ode::{bound_constants, CdeField};
use rnnsig_core::rkhs::{
    alpha_series, bound_binary, bound_sequential, rkhs_predict, stability_gap, BinaryClass, BoundSetting,
    SequentialClass,
};
use rnnsig_core::signature::{signature, Signature};
use rnnsig_core::taylor::{iterated_star_closed_form, iterated_star_tower, taylor_error_bound};
use rnnsig_core::{Activation, PathConfig, PiecewiseLinearPath, RnnParams};

use crate::config::Config;
use crate::error::Result;
use crate::experiments::{
    self, euler_sweep, mean_accuracy_at, median_log_errors, run_seed, run_slopes, spiral_path, taylor_convergence,
    EulerConfig, TaylorConfig, TrainAttackConfig,
};
use crate::training::{init_params, make_spirals, objective, objective_gradient, pgd_attack, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn all_words(alphabet: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut level: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        level = level
            .iter()
            .flat_map(|w| (1..=alphabet).map(move |a| [w.clone(), vec![a]].concat()))
            .collect();
        out.extend(level.iter().cloned());
    }
    out
}

/// Fine grid over a path, aligned with its breakpoints, with cells of width
/// at most `h`.
fn fine_grid(path: &PiecewiseLinearPath, h: f64) -> Vec<Vec<f64>> {
    let times = path.times();
    let mut pts = vec![path.point(0).to_vec()];
    for i in 0..times.len() - 1 {
        let m = ((times[i + 1] - times[i]) / h).round().max(1.0) as usize;
        let (a, b) = (path.point(i), path.point(i + 1));
        for s in 1..=m {
            let w = s as f64 / m as f64;
            pts.push(a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect());
        }
    }
    pts
}

/// `k! ∫ dX^{w_1} ⋯ dX^{w_k}` by nested trapezoid sums over the grid.
fn nested_sum(grid: &[Vec<f64>], word: &[usize]) -> f64 {
    let mut prev = vec![1.0; grid.len()];
    for &letter in word {
        let a = letter - 1;
        let mut next = vec![0.0; grid.len()];
        for m in 0..grid.len() - 1 {
            next[m + 1] = next[m] + 0.5 * (prev[m] + prev[m + 1]) * (grid[m + 1][a] - grid[m][a]);
        }
        prev = next;
    }
    prev[grid.len() - 1] * (1..=word.len()).map(|k| k as f64).product::<f64>()
}

/// Nested trapezoid sums at steps `h` and `2h`, Richardson-combined to
/// cancel their `O(h²)` error.
fn riemann_oracle(path: &PiecewiseLinearPath, word: &[usize], h: f64) -> f64 {
    let fine = nested_sum(&fine_grid(path, h), word);
    let coarse = nested_sum(&fine_grid(path, 2.0 * h), word);
    (4.0 * fine - coarse) / 3.0
}

/// Every signature entry up to level 4 against nested sums on a `1e-4` grid.
pub fn signature_oracle(scale: Scale, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 101));
    let paths = scale.pick(4, 20);
    let depth = 4;
    let words = all_words(2, depth);
    let mut worst: f64 = 0.0;
    for _ in 0..paths {
        let path = PiecewiseLinearPath::from_samples(&random_samples(&mut rng, 10, 2))?;
        let sig = signature(&path, depth, 0.0, 1.0)?;
        let oracle: Vec<f64> = words.iter().map(|w| riemann_oracle(&path, w, 1e-4)).collect();
        for k in 1..=depth {
            let level: Vec<(usize, f64)> =
                words.iter().enumerate().filter(|(_, w)| w.len() == k).map(|(i, _)| (i, oracle[i])).collect();
            let level_norm = level.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            for (i, o) in level {
                let got = sig.coefficient(&words[i])?;
                let rel = (got - o).abs() / o.abs().max(1e-3 * level_norm);
                worst = worst.max(rel);
            }
        }
    }
    Ok(Check::new("signature-oracle", worst < 1e-5, format!("{paths} paths, max relative error {worst:.2e} (< 1e-5)")))
}

fn random_normalized_path(rng: &mut ChaCha8Rng, config: PathConfig) -> Result<PiecewiseLinearPath> {
    let n = rng.gen_range(1..=20);
    let amp = 10f64.powf(rng.gen_range(-2.0..1.0));
    let s: Vec<Vec<f64>> = random_samples(rng, n, 2).into_iter().map(|x| x.iter().map(|v| v * amp).collect()).collect();
    Ok(PiecewiseLinearPath::from_samples(&s)?.normalize(config).0)
}

/// `‖S(X̄)‖ ≤ 2 / (1 - L)` at depth 8.
pub fn signature_norm_bound(scale: Scale, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 102));
    let per_l = scale.pick(20, 100);
    let mut worst_ratio: f64 = 0.0;
    for l in [0.25, 0.5, 0.75] {
        let cfg = PathConfig::new(l)?;
        for _ in 0..per_l {
            let path = random_normalized_path(&mut rng, cfg)?;
            let norm = signature(&path.time_augment(cfg), 8, 0.0, 1.0)?.norm();
            worst_ratio = worst_ratio.max(norm / (2.0 / (1.0 - l)));
        }
    }
    Ok(Check::new(
        "signature-norm-bound",
        worst_ratio <= 1.0,
        format!("{} paths, max ‖S‖ (1-L)/2 = {worst_ratio:.4}", 3 * per_l),
    ))
}

/// Euler gap below `c_1 / T`, and halving from `T = 64` to `128`.
pub fn euler_rate(scale: Scale, seed: u64) -> Result<Check> {
    let cfg = EulerConfig { runs: scale.pick(5, 20), seed: run_seed(seed, 103), ..EulerConfig::default() };
    let rows = euler_sweep(&cfg)?;
    let within = rows.iter().all(|r| r.gap <= r.bound);
    let mut good = 0;
    let mut ratios = Vec::new();
    for run in 0..cfg.runs {
        let g = |t: usize| rows.iter().find(|r| r.run_id == run && r.steps == t).map(|r| r.gap).unwrap_or(f64::NAN);
        let ratio = g(64) / g(128);
        ratios.push(ratio);
        good += (1.5..=2.5).contains(&ratio) as usize;
    }
    let frac = good as f64 / cfg.runs as f64;
    let med = experiments::median(&mut ratios);
    Ok(Check::new(
        "euler-rate",
        within && frac >= 0.8,
        format!("{} nets, gap ≤ c1/T: {within}, ratio in [1.5, 2.5] for {:.0}% (median {med:.3})", cfg.runs, 100.0 * frac),
    ))
}

fn random_identity_params(rng: &mut ChaCha8Rng, e: usize, d: usize, scale: f64) -> RnnParams {
    let mut m = |r: usize, c: usize| {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).expect("sizes match")
    };
    let (u, v, b, psi) = (m(e, e), m(e, d), m(e, 1), m(1, e));
    RnnParams::new(u, v, b.data().to_vec(), psi, vec![0.0; e], Activation::Identity).expect("consistent shapes")
}

/// Derivative towers against the closed form for the identity activation.
pub fn identity_closed_form(scale: Scale, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 104));
    let draws = scale.pick(3, 10);
    let words = all_words(3, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let mut p = random_identity_params(&mut rng, 2, 2, 0.5);
        p.h0 = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let field = CdeField::new(&p, PathConfig::default());
        let hbar: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for w in &words {
            let a = iterated_star_tower(&field, w, &hbar)?;
            let b = iterated_star_closed_form(&field, w, &hbar)?;
            let scale = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(diff / scale);
        }
    }
    Ok(Check::new(
        "identity-closed-form",
        worst <= 1e-12,
        format!("{draws} draws × {} words, max deviation {worst:.2e} (≤ 1e-12)", words.len()),
    ))
}

/// Taylor expansion convergence and its analytic bound.
pub fn taylor_checks(scale: Scale, seed: u64) -> Result<[Check; 2]> {
    let cfg = TaylorConfig { runs: scale.pick(20, 100), seed: run_seed(seed, 105), ..TaylorConfig::default() };
    let rows = taylor_convergence(&cfg)?;
    let mut decreasing = true;
    let mut medians = String::new();
    for act in &cfg.activations {
        let med = median_log_errors(&rows, *act, cfg.max_depth);
        decreasing &= med.windows(2).all(|w| w[1] < w[0]);
        medians.push_str(&format!(
            " {}: [{}]",
            act.name(),
            med.iter().map(|m| format!("{m:.2}")).collect::<Vec<_>>().join(", ")
        ));
    }
    let slopes: Vec<(usize, bool, f64)> = cfg.activations.iter().flat_map(|a| run_slopes(&rows, *a)).collect();
    let inside: Vec<f64> = slopes.iter().filter(|s| s.1).map(|s| s.2).collect();
    let neg = inside.iter().filter(|s| **s < 0.0).count();
    let frac = if inside.is_empty() { 0.0 } else { neg as f64 / inside.len() as f64 };
    let all_neg = slopes.iter().filter(|s| s.2 < 0.0).count();
    let convergence = Check::new(
        "taylor-convergence",
        decreasing && !inside.is_empty() && frac >= 0.95,
        format!(
            "median log10 error{medians}; negative slope in {neg}/{} runs under the radius, {all_neg}/{} overall",
            inside.len(),
            slopes.len()
        ),
    );
    let checked: Vec<_> = rows.iter().filter(|r| r.radius_holds && r.depth <= 4).collect();
    let violations = checked.iter().filter(|r| r.error > r.bound).count();
    let worst = checked.iter().map(|r| r.error / r.bound).fold(0.0, f64::max);
    let bound = Check::new(
        "taylor-bound",
        violations == 0 && !checked.is_empty(),
        format!("{} (run, N) pairs under the radius, {violations} violations, max error/bound {worst:.2e}", checked.len()),
    );
    Ok([convergence, bound])
}

/// `|z_T - ⟨α, S(X̄)⟩| ≤ ‖ψ‖ c_1 / T + tail`, and the gap halves with `T`.
pub fn embedding(scale: Scale, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 106));
    let cfg = PathConfig::default();
    let draws = scale.pick(2, 5);
    let depth = 10;
    let steps = [16usize, 32, 64, 128];
    let mut ok = true;
    let mut ratios = Vec::new();
    let mut worst_use: f64 = 0.0;
    for i in 0..draws {
        let p = random_identity_params(&mut rng, 2, 2, 0.2);
        let path = spiral_path(512, run_seed(seed, 200 + i as u64), cfg)?;
        let alpha = alpha_series(&p, cfg, depth)?;
        let xi = rkhs_predict(&alpha, &path, cfg, None)?[0];
        let psi_op = p.psi.op_norm();
        let c1 = bound_constants(&p, cfg.l()).c1;
        let tail = psi_op * taylor_error_bound(&CdeField::new(&p, cfg), depth).bound;
        let mut gaps = Vec::new();
        for &t in &steps {
            let samples: Vec<Vec<f64>> = (1..=t).map(|j| path.evaluate(j as f64 / t as f64)).collect();
            let z = p.forward(&samples)?.outputs[t - 1][0];
            let gap = (z - xi).abs();
            let bound = psi_op * c1 / t as f64 + tail;
            ok &= gap <= bound;
            worst_use = worst_use.max(gap / bound);
            gaps.push(gap);
        }
        for w in gaps.windows(2) {
            let r = w[1] / w[0];
            ok &= (0.35..=0.65).contains(&r);
            ratios.push(r);
        }
    }
    let shown = ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    Ok(Check::new(
        "rkhs-embedding",
        ok,
        format!("{draws} nets, max gap/bound {worst_use:.2e}, ratios gap(2T)/gap(T) [{shown}] in [0.35, 0.65]"),
    ))
}

/// Implemented gradient of the penalised objective against central differences.
pub fn gradient_integrity(scale: Scale, seed: u64) -> Result<Check> {
    let seeds = scale.pick(2, 5);
    let mut worst: f64 = 0.0;
    for s in 0..seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 300 + s));
        let mut p = init_params(4, 2, Activation::Tanh, &mut rng);
        p.h0 = (0..4).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let data = make_spirals(8, 20, run_seed(seed, 400 + s)).normalized(PathConfig::default())?.0;
        let cfg = TrainConfig { lambda: 0.1, ..TrainConfig::default() };
        let g = objective_gradient(&p, &data, &cfg)?;
        let flat = p.to_flat();
        let h = 1e-5;
        let mut fd = vec![0.0; flat.len()];
        for i in 0..flat.len() {
            let mut probe = flat.clone();
            probe[i] = flat[i] + h;
            let plus = objective(&p.with_flat(&probe)?, &data, &cfg)?;
            probe[i] = flat[i] - h;
            let minus = objective(&p.with_flat(&probe)?, &data, &cfg)?;
            fd[i] = (plus - minus) / (2.0 * h);
        }
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    Ok(Check::new(
        "gradient-integrity",
        worst < 1e-3,
        format!("{seeds} seeds, 4 units, λ = 0.1, max relative error {worst:.2e} (< 1e-3)"),
    ))
}

/// Penalised against unpenalised training under PGD attack.
pub fn adversarial_trend(scale: Scale, seed: u64, overrides: &Config) -> Result<Check> {
    let d = TrainAttackConfig::default();
    let cfg = TrainAttackConfig {
        seeds: (0..scale.pick(2, 5) as u64).map(|i| run_seed(seed, 500 + i)).collect(),
        hidden: 8,
        n_train: 50,
        n_test: overrides.at_least("verify_n_test", scale.pick(100, 500), 1)?,
        train: TrainConfig { epochs: scale.pick(60, 200), depth: 3, ..d.train.clone() },
        eps_grid: overrides.get_list("verify_eps_grid", d.eps_grid.clone())?,
        normalize: overrides.get("verify_normalize", d.normalize)?,
        ..d
    };
    let runs = experiments::train_attack(&cfg)?;
    let mid = cfg.eps_grid.len() / 2;
    let (plain0, pen0) = (mean_accuracy_at(&runs, 0.0, 0), mean_accuracy_at(&runs, cfg.lambda, 0));
    let (plain, pen) = (mean_accuracy_at(&runs, 0.0, mid), mean_accuracy_at(&runs, cfg.lambda, mid));
    let mean_final = |lambda: f64, f: fn(&crate::training::EpochRecord) -> f64| {
        let v: Vec<f64> = runs.iter().filter(|r| r.lambda == lambda).map(|r| f(r.trace.last().unwrap())).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let passed = pen > plain && (pen0 - plain0).abs() <= 0.05;
    Ok(Check::new(
        "adversarial-trend",
        passed,
        format!(
            "{} seed pairs, ε = {:.2}·mean‖x‖_F: penalised {pen:.3} vs plain {plain:.3}; clean {pen0:.3} vs {plain0:.3}; \
             final ‖W‖_F {:.2} vs {:.2}, RKHS norm {:.3} vs {:.3}",
            cfg.seeds.len(),
            cfg.eps_grid[mid],
            mean_final(cfg.lambda, |r| r.frob_norm),
            mean_final(0.0, |r| r.frob_norm),
            mean_final(cfg.lambda, |r| r.rkhs_norm),
            mean_final(0.0, |r| r.rkhs_norm),
        ),
    ))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-300) || a == b
}

/// Bound calculators against values substituted by hand.
pub fn bound_calculators() -> Result<Check> {
    let mut failures = Vec::new();
    let mut compare = |set: &str, report: &rnnsig_core::rkhs::BoundReport, expected: &[(&str, f64)]| {
        for (k, v) in expected {
            match report.get(k) {
                Some(got) if close(got, *v) => {}
                got => failures.push(format!("{set}.{k}: {got:?} vs {v}")),
            }
        }
    };
    let example = bound_binary(
        BinaryClass::Logistic { k_w: 0.5 / 256.0, k_b: 1.0, k_psi: 1.0, d: 2 },
        1.0,
        BoundSetting { l: 0.5, n: 100, delta: 0.05, steps: 100, empirical_risk: 0.1 },
    )?;
    compare(
        "logistic",
        &example,
        &[
            ("B", 1.885_618_083_164_126_7),
            ("c2", 0.002_939_241_027_605_173_8),
            ("term_discretisation", 0.000_029_392_410_276_051_738),
            ("term_complexity", 3.016_988_933_062_602_7),
            ("term_confidence", 0.923_103_137_387_885_5),
            ("total", 4.040_121_462_860_764),
        ],
    );
    let raw = bound_binary(
        BinaryClass::Raw { b: 2.0, k_psi: 1.5, k_f: 0.3, f_sup: 8f64.sqrt() },
        0.5,
        BoundSetting { l: 0.25, n: 1000, delta: 0.01, steps: 50, empirical_risk: 0.2 },
    )?;
    compare(
        "raw",
        &raw,
        &[
            ("c2", 1.235_518_861_821_413_7),
            ("term_discretisation", 0.024_710_377_236_428_275),
            ("term_complexity", 0.337_309_617_084_627_14),
            ("term_confidence", 0.127_960_690_991_682_17),
            ("total", 0.689_980_685_312_737_6),
        ],
    );
    let seq = bound_sequential(
        SequentialClass { p: 2, k_y: 1.0, b: 0.8, theta_sup: 3.0 },
        BoundSetting { l: 0.5, n: 500, delta: 0.1, steps: 64, empirical_risk: 0.05 },
    )?;
    compare(
        "sequential",
        &seq,
        &[
            ("c3", 9.525_483_399_593_904),
            ("c4", 2.6),
            ("c5", 34.28),
            ("term_discretisation", 0.148_835_678_118_654_75),
            ("term_complexity", 1.488_326_845_823_86),
            ("term_confidence", 0.561_898_983_760_732_1),
            ("total", 2.249_061_507_703_246_8),
        ],
    );
    let degenerate = bound_sequential(
        SequentialClass { p: 1, k_y: 0.0, b: 0.0, theta_sup: 2.0 },
        BoundSetting { l: 0.75, n: 50, delta: 0.05, steps: 100, empirical_risk: 0.1 },
    )?;
    compare("degenerate", &degenerate, &[("c3", 2.0), ("c4", 0.0), ("c5", 0.0), ("total", 0.12)]);
    let passed = failures.is_empty();
    let detail = if passed { "4 constant sets match to 1e-12".to_string() } else { failures.join("; ") };
    Ok(Check::new("bound-calculators", passed, detail))
}

/// Chen's identity at a random split.
pub fn chen_identity(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 107));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let path = PiecewiseLinearPath::from_samples(&random_samples(&mut rng, 8, 3))?;
        let u = rng.gen_range(0.05..0.95);
        let whole = signature(&path, 4, 0.0, 1.0)?;
        let joined: Signature = signature(&path, 4, 0.0, u)?.concat(&signature(&path, 4, u, 1.0)?)?;
        worst = worst.max(whole.seq().sub(joined.seq())?.norm() / whole.norm());
    }
    Ok(Check::new("chen-identity", worst < 1e-12, format!("20 paths, max relative deviation {worst:.2e}")))
}

/// Stability gap never exceeds `‖ξ‖_ℋ ‖S(X̄) - S(X̄')‖`.
pub fn stability(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 108));
    let cfg = PathConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = init_params(3, 2, Activation::Tanh, &mut rng);
        let x = random_normalized_path(&mut rng, cfg)?;
        let y = random_normalized_path(&mut rng, cfg)?;
        let (gap, bound) = stability_gap(&p, cfg, 3, &x, &y)?;
        if bound > 0.0 {
            worst = worst.max(gap / bound);
        }
    }
    Ok(Check::new("stability-gap", worst <= 1.0, format!("20 pairs, max gap/bound {worst:.3}")))
}

/// PGD perturbations stay in the ball; training is reproducible.
pub fn attack_and_determinism(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, 109));
    let p = init_params(4, 2, Activation::Tanh, &mut rng);
    let data = make_spirals(10, 20, run_seed(seed, 110));
    let eps = 0.3;
    let r = pgd_attack(&p, &data, eps, 20, 2.5 * eps / 20.0)?;
    let worst = r
        .perturbed
        .sequences
        .iter()
        .zip(&data.sequences)
        .map(|(a, b)| a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let cfg = TrainConfig { epochs: 3, lambda: 0.1, ..TrainConfig::default() };
    let same = train(&cfg, &data, &p)? == train(&cfg, &data, &p)?;
    Ok(Check::new(
        "pgd-projection-determinism",
        worst <= eps + 1e-9 && same,
        format!("max ‖Δ‖_F {worst:.6} (ε = {eps}), repeated training identical: {same}"),
    ))
}

/// Every suite, acceptance checks first.
pub fn run_all(scale: Scale, seed: u64, overrides: &Config) -> Result<Vec<Check>> {
    let mut out = vec![
        signature_oracle(scale, seed)?,
        signature_norm_bound(scale, seed)?,
        euler_rate(scale, seed)?,
        identity_closed_form(scale, seed)?,
    ];
    out.extend(taylor_checks(scale, seed)?);
    out.push(embedding(scale, seed)?);
    out.push(gradient_integrity(scale, seed)?);
    out.push(adversarial_trend(scale, seed, overrides)?);
    out.push(bound_calculators()?);
    out.push(chen_identity(seed)?);
    out.push(stability(seed)?);
    out.push(attack_and_determinism(seed)?);
    Ok(out)
}
