//! Continuous-time reference solutions.
//!
//! Integration uses the Dormand–Prince 5(4) pair with PI step-size control
//! and its native dense output, restarting at every path breakpoint so the
//! right-hand side is smooth inside each step.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;
use crate::path::{PathConfig, PiecewiseLinearPath};
use crate::rnn::{Activation, RnnParams};
use crate::{Error, Result};

/// Mixed absolute/relative local error tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Result<Self> {
        if !(atol > 0.0 && rtol >= 0.0 && atol.is_finite() && rtol.is_finite()) {
            return Err(Error::InvalidArgument("tolerances must be positive and finite"));
        }
        Ok(Tolerance { atol, rtol })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { atol: 1e-10, rtol: 1e-8 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Piece {
    fn eval(&self, t: f64) -> Vec<f64> {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len())
            .map(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
            .collect()
    }
}

/// Dense solution of an initial value problem on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    initial: Vec<f64>,
    pieces: Vec<Piece>,
    steps: usize,
    rejected: usize,
    tol: Tolerance,
}

impl OdeSolution {
    /// Solution at `t`, clamped to `[0, 1]`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t <= 0.0 || self.pieces.is_empty() {
            return self.initial.clone();
        }
        let i = self.pieces.partition_point(|p| p.t0 <= t).max(1) - 1;
        self.pieces[i].eval(t)
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn final_value(&self) -> Vec<f64> {
        self.eval(1.0)
    }

    /// Accepted steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    /// Endpoint values of every accepted step, in time order.
    pub fn knots(&self) -> Vec<(f64, Vec<f64>)> {
        let mut out = vec![(0.0, self.initial.clone())];
        out.extend(self.pieces.iter().map(|p| (p.t0 + p.h, p.eval(p.t0 + p.h))));
        out
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: Tolerance) -> f64 {
    let n = err.len().max(1) as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    math::sqrt(s / n)
}

/// Integrates `y' = f(t, y)` from `t = 0` to `1`, restarting at each
/// breakpoint in `breaks`.
pub fn integrate<F>(mut f: F, y0: &[f64], breaks: &[f64], tol: Tolerance) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    integrate_piecewise(|_, t, y| f(t, y), y0, breaks, tol)
}

/// Like [`integrate`], but `f` also receives the index of the interval
/// between consecutive knots `0, breaks.., 1` it is evaluated on, so a
/// right-hand side that jumps at a knot is never sampled across it.
pub fn integrate_piecewise<F>(mut f: F, y0: &[f64], breaks: &[f64], tol: Tolerance) -> Result<OdeSolution>
where
    F: FnMut(usize, f64, &[f64]) -> Vec<f64>,
{
    let n = y0.len();
    let mut knots: Vec<f64> = vec![0.0];
    knots.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < 1.0));
    knots.dedup();
    knots.push(1.0);
    let mut sol = OdeSolution { initial: y0.to_vec(), pieces: Vec::new(), steps: 0, rejected: 0, tol };
    let mut y = y0.to_vec();
    let mut h_next: Option<f64> = None;

    for (piece, w) in knots.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        if end <= start {
            continue;
        }
        let mut t = start;
        let mut k1 = f(piece, t, &y);
        let mut h = match h_next {
            Some(h) => h,
            None => initial_step(&y, &k1, tol, end - start),
        }
        .min(end - start);
        let mut facold: f64 = 1e-4;
        let mut last_rejected = false;
        let mut k: [Vec<f64>; 7] = Default::default();
        loop {
            let remaining = end - t;
            if remaining <= 1e-15 * end.max(1.0) {
                break;
            }
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, step: h });
            }
            k[0] = k1.clone();
            for s in 1..7 {
                let ys: Vec<f64> =
                    (0..n).map(|i| y[i] + h * A[s].iter().enumerate().map(|(j, a)| a * k[j][i]).sum::<f64>()).collect();
                k[s] = f(piece, (t + C[s] * h).min(end), &ys);
            }
            // A[6] holds the fifth-order weights (FSAL)
            let y1: Vec<f64> = (0..n).map(|i| y[i] + h * A[6].iter().enumerate().map(|(j, a)| a * k[j][i]).sum::<f64>()).collect();
            let err: Vec<f64> = (0..n).map(|i| h * E.iter().enumerate().map(|(j, e)| e * k[j][i]).sum::<f64>()).collect();
            let en = error_norm(&err, &y, &y1, tol);
            if !en.is_finite() {
                h *= 0.1;
                last_rejected = true;
                sol.rejected += 1;
                continue;
            }
            // PI controller
            let fac11 = math::powf(en, 0.17);
            let mut fac = fac11 / math::powf(facold, 0.04);
            fac = (fac / 0.9).clamp(0.1, 5.0);
            let mut h_new = h / fac;
            if en <= 1.0 {
                facold = en.max(1e-4);
                let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k[0][i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k[6][i] - r3[i]).collect();
                let r5: Vec<f64> =
                    (0..n).map(|i| h * D.iter().enumerate().map(|(j, d)| d * k[j][i]).sum::<f64>()).collect();
                sol.pieces.push(Piece { t0: t, h, r: [y.clone(), r2, r3, r4, r5] });
                sol.steps += 1;
                t += h;
                y = y1;
                k1 = k[6].clone();
                if last_rejected {
                    h_new = h_new.min(h);
                }
                last_rejected = false;
                h_next = Some(h_new);
            } else {
                h_new = h / (fac11 / 0.9).min(5.0);
                last_rejected = true;
                sol.rejected += 1;
            }
            h = h_new;
            if sol.steps + sol.rejected > 10_000_000 {
                return Err(Error::StepSizeUnderflow { t, step: h });
            }
        }
    }
    Ok(sol)
}

fn initial_step(y: &[f64], f0: &[f64], tol: Tolerance, span: f64) -> f64 {
    let sc: Vec<f64> = y.iter().map(|v| tol.atol + tol.rtol * v.abs()).collect();
    let d0 = math::sqrt(y.iter().zip(&sc).map(|(v, s)| (v / s) * (v / s)).sum::<f64>() / y.len().max(1) as f64);
    let d1 = math::sqrt(f0.iter().zip(&sc).map(|(v, s)| (v / s) * (v / s)).sum::<f64>() / y.len().max(1) as f64);
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(1e-8_f64.min(span))
}

/// Solution of `dH = f(H, X_t) dt`, `H_0 = h_0`, for the feedforward cell.
pub fn integrate_ode(params: &RnnParams, path: &PiecewiseLinearPath, tol: Tolerance) -> Result<OdeSolution> {
    if path.dim() != params.input_size() {
        return Err(Error::DimensionMismatch { expected: params.input_size(), found: path.dim() });
    }
    integrate(|t, h| params.cell(h, &path.evaluate(t)), &params.h0, path.times(), tol)
}

/// The tensor field `F: ℝ^{e+d} → ℝ^{(e+d)×(d+1)}` of the controlled
/// differential equation `dH̄ = F(H̄) dX̄` driven by the time-augmented path.
///
/// Columns `1..=d` are the constant basis vectors `e_{e+i}`; column `d+1` is
/// `(2/(1-L)) σ(W h̄ + b)` on the first `e` coordinates and zero below.
#[derive(Debug, Clone, PartialEq)]
pub struct CdeField {
    params: RnnParams,
    w: Matrix,
    config: PathConfig,
}

impl CdeField {
    pub fn new(params: &RnnParams, config: PathConfig) -> Self {
        CdeField { params: params.clone(), w: params.w(), config }
    }

    pub fn params(&self) -> &RnnParams {
        &self.params
    }

    pub fn config(&self) -> PathConfig {
        self.config
    }

    /// `ē = e + d`.
    pub fn state_dim(&self) -> usize {
        self.params.hidden_size() + self.params.input_size()
    }

    /// `d̄ = d + 1`.
    pub fn path_dim(&self) -> usize {
        self.params.input_size() + 1
    }

    /// `W = [U V]`.
    pub fn w(&self) -> &Matrix {
        &self.w
    }

    /// `2 / (1 - L)`.
    pub fn scale(&self) -> f64 {
        2.0 / (1.0 - self.config.l())
    }

    /// Column `i` (1-indexed) evaluated at `hbar`.
    pub fn column(&self, i: usize, hbar: &[f64]) -> Result<Vec<f64>> {
        let (e, d) = (self.params.hidden_size(), self.params.input_size());
        if i == 0 || i > d + 1 {
            return Err(Error::LetterOutOfRange { letter: i, alphabet: d + 1 });
        }
        if hbar.len() != e + d {
            return Err(Error::DimensionMismatch { expected: e + d, found: hbar.len() });
        }
        let mut out = vec![0.0; e + d];
        if i <= d {
            out[e + i - 1] = 1.0;
        } else {
            let a = self.w.matvec(hbar);
            for j in 0..e {
                out[j] = self.scale() * self.params.activation.value(a[j] + self.params.b[j]);
            }
        }
        Ok(out)
    }

    /// The full `ē × d̄` matrix `F(h̄)`.
    pub fn matrix(&self, hbar: &[f64]) -> Result<Matrix> {
        let (rows, cols) = (self.state_dim(), self.path_dim());
        let mut m = Matrix::zeros(rows, cols);
        for i in 1..=cols {
            for (r, v) in self.column(i, hbar)?.into_iter().enumerate() {
                m.set(r, i - 1, v);
            }
        }
        Ok(m)
    }

    /// `F(h̄) v` for a path increment or velocity `v ∈ ℝ^{d̄}`.
    pub fn apply(&self, hbar: &[f64], v: &[f64]) -> Vec<f64> {
        let (e, d) = (self.params.hidden_size(), self.params.input_size());
        let mut out = vec![0.0; e + d];
        out[e..].copy_from_slice(&v[..d]);
        let c = self.scale() * v[d];
        if c != 0.0 {
            let a = self.w.matvec(hbar);
            for j in 0..e {
                out[j] = c * self.params.activation.value(a[j] + self.params.b[j]);
            }
        }
        out
    }
}

pub fn cde_field(params: &RnnParams, config: PathConfig) -> CdeField {
    CdeField::new(params, config)
}

/// Solves `dH̄ = F(H̄) dX̄` with `H̄_0 = (h_0, X_0)` along a time-augmented path.
pub fn integrate_cde(
    params: &RnnParams,
    augmented: &PiecewiseLinearPath,
    config: PathConfig,
    tol: Tolerance,
) -> Result<OdeSolution> {
    let field = CdeField::new(params, config);
    if augmented.dim() != field.path_dim() {
        return Err(Error::DimensionMismatch { expected: field.path_dim(), found: augmented.dim() });
    }
    let mut start = params.h0.clone();
    start.extend_from_slice(&augmented.point(0)[..params.input_size()]);
    let segments = augmented.segments(0.0, 1.0)?;
    let velocities: Vec<Vec<f64>> =
        segments.iter().map(|s| s.delta.iter().map(|x| x / (s.end - s.start)).collect()).collect();
    let inner = &augmented.times()[1..augmented.len() - 1];
    integrate_piecewise(|i, _, h| field.apply(h, &velocities[i]), &start, inner, tol)
}

/// Constants of the discretisation bound `‖H_{j/T} - h_j‖ ≤ c_1 / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// `sup_{‖x‖≤L} ‖f(h_0, x)‖ e^{K_f}`; the state obeys `‖H_t‖ ≤ ‖h_0‖ + M`.
    pub m: f64,
    pub c1: f64,
    pub k_f: f64,
    /// `sup ‖f(h, x)‖` over `‖h‖ ≤ ‖h_0‖ + M`, `‖x‖ ≤ L`.
    pub sup_f: f64,
}

impl BoundConstants {
    /// Radius of the ball that contains the whole trajectory.
    pub fn state_radius(&self, h0: &[f64]) -> f64 {
        math::norm(h0) + self.m
    }
}

/// Evaluates `M` first and then `c_1`. Bounded activations use
/// `‖σ(·)‖ ≤ √e`; the identity uses the affine bounds
/// `‖U h_0 + b‖ + L‖V‖` and `‖b‖ + R‖U‖ + L‖V‖`.
pub fn bound_constants(params: &RnnParams, l: f64) -> BoundConstants {
    let (_, _, k_f) = params.lipschitz_constants();
    let growth = math::exp(k_f);
    let e = params.hidden_size() as f64;
    let v_op = params.v.op_norm();
    let sup_f0 = match params.activation {
        Activation::Identity => {
            let base: Vec<f64> = params.u.matvec(&params.h0).iter().zip(&params.b).map(|(a, b)| a + b).collect();
            math::norm(&base) + l * v_op
        }
        _ => math::sqrt(e),
    };
    let m = sup_f0 * growth;
    let radius = math::norm(&params.h0) + m;
    let sup_f = match params.activation {
        Activation::Identity => math::norm(&params.b) + radius * params.u.op_norm() + l * v_op,
        _ => math::sqrt(e),
    };
    let c1 = k_f * growth * (l + sup_f * growth);
    BoundConstants { m, c1, k_f, sup_f }
}

/// Result of comparing a discrete network with its continuous-time limit.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerGap {
    /// `max_j ‖H_{j/T} - h_j‖`.
    pub gap: f64,
    /// `c_1 / T`.
    pub bound: f64,
    pub constants: BoundConstants,
    /// `max_t ‖H_t‖` over the solver knots.
    pub max_state_norm: f64,
}

/// Samples `x_j = X_{j/T}`, runs the network and compares with the ODE solution
/// driven by `X` itself.
pub fn euler_gap(
    params: &RnnParams,
    path: &PiecewiseLinearPath,
    steps: usize,
    config: PathConfig,
    tol: Tolerance,
) -> Result<EulerGap> {
    if steps == 0 {
        return Err(Error::EmptySamples);
    }
    let samples: Vec<Vec<f64>> = (1..=steps).map(|j| path.evaluate(j as f64 / steps as f64)).collect();
    let traj = params.forward(&samples)?;
    let sol = integrate_ode(params, path, tol)?;
    let gap = traj
        .hidden
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let hh = sol.eval(j as f64 / steps as f64);
            math::norm(&hh.iter().zip(h).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max);
    let constants = bound_constants(params, config.l());
    let max_state_norm = sol.knots().iter().map(|(_, y)| math::norm(y)).fold(0.0, f64::max);
    Ok(EulerGap { gap, bound: constants.c1 / steps as f64, constants, max_state_norm })
}
