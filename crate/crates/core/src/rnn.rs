//! Residual recurrent networks `h_{j+1} = h_j + f(h_j, x_{j+1}) / T`.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Logistic,
    Tanh,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(name: &str) -> Option<Activation> {
        match name {
            "identity" | "linear" => Some(Activation::Identity),
            "logistic" | "sigmoid" => Some(Activation::Logistic),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Logistic => logistic(x),
            Activation::Tanh => math::tanh(x),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = math::tanh(x);
                1.0 - t * t
            }
        }
    }

    /// `σ(x), σ'(x), ..., σ^{(m)}(x)`.
    ///
    /// Logistic and tanh derivatives are polynomials in `σ` itself:
    /// `P_{n+1}(s) = P_n'(s) q(s)` with `q(s) = s - s²` and `q(s) = 1 - s²`.
    pub fn derivatives(&self, x: f64, m: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(m + 1);
        match self {
            Activation::Identity => {
                out.push(x);
                if m >= 1 {
                    out.push(1.0);
                }
                out.resize(m + 1, 0.0);
            }
            Activation::Logistic | Activation::Tanh => {
                let (s, q) = match self {
                    Activation::Logistic => (logistic(x), [0.0, 1.0, -1.0]),
                    _ => (math::tanh(x), [1.0, 0.0, -1.0]),
                };
                // coefficients of P_n in increasing powers of s
                let mut poly = vec![0.0, 1.0];
                for n in 0..=m {
                    if n > 0 {
                        let deriv: Vec<f64> = poly.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
                        let mut next = vec![0.0; deriv.len() + 2];
                        for (i, c) in deriv.iter().enumerate() {
                            for (j, qj) in q.iter().enumerate() {
                                next[i + j] += c * qj;
                            }
                        }
                        poly = next;
                    }
                    out.push(poly.iter().rev().fold(0.0, |acc, c| acc * s + c));
                }
            }
        }
        out
    }

    /// Lipschitz constant `K_σ`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Activation::Identity | Activation::Tanh => 1.0,
            Activation::Logistic => 0.25,
        }
    }

    /// The constant `a` with `‖σ^{(n)}‖_∞ ≤ a^{n+1} n!` (none for the identity).
    pub fn derivative_constant(&self) -> Option<f64> {
        match self {
            Activation::Identity => None,
            Activation::Logistic => Some(2.0),
            Activation::Tanh => Some(4.0),
        }
    }

    /// `sup |σ|`, if finite.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            Activation::Identity => None,
            Activation::Logistic | Activation::Tanh => Some(1.0),
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + math::exp(-x))
    } else {
        let e = math::exp(x);
        e / (1.0 + e)
    }
}

/// Weights of the feedforward cell `f(h, x) = σ(U h + V x + b)` with a linear
/// readout `z = ψ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub u: Matrix,
    pub v: Matrix,
    pub b: Vec<f64>,
    pub psi: Matrix,
    pub h0: Vec<f64>,
    pub activation: Activation,
}

/// Hidden states `h_0..h_T` and outputs `z_1..z_T` of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub hidden: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Pre-activations `U h_j + V x_{j+1} + b`, one per step.
    pub pre: Vec<Vec<f64>>,
}

/// Gradients of a scalar objective with respect to every weight and input.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnGradients {
    pub u: Matrix,
    pub v: Matrix,
    pub b: Vec<f64>,
    pub psi: Matrix,
    pub h0: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl RnnGradients {
    /// Flattened in the same order as [`RnnParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        [self.u.data(), self.v.data(), &self.b, self.psi.data(), &self.h0].concat()
    }
}

impl RnnParams {
    pub fn new(u: Matrix, v: Matrix, b: Vec<f64>, psi: Matrix, h0: Vec<f64>, activation: Activation) -> Result<Self> {
        let e = u.rows();
        if u.cols() != e || v.rows() != e || b.len() != e || psi.cols() != e || h0.len() != e {
            return Err(Error::ShapeMismatch("need U e×e, V e×d, b and h0 of length e, psi p×e"));
        }
        if e == 0 || v.cols() == 0 || psi.rows() == 0 {
            return Err(Error::ShapeMismatch("hidden, input and output sizes must be positive"));
        }
        Ok(RnnParams { u, v, b, psi, h0, activation })
    }

    /// All-zero weights of the given sizes.
    pub fn zeros(hidden: usize, input: usize, output: usize, activation: Activation) -> Self {
        RnnParams {
            u: Matrix::zeros(hidden, hidden),
            v: Matrix::zeros(hidden, input),
            b: vec![0.0; hidden],
            psi: Matrix::zeros(output, hidden),
            h0: vec![0.0; hidden],
            activation,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.u.rows()
    }

    pub fn input_size(&self) -> usize {
        self.v.cols()
    }

    pub fn output_size(&self) -> usize {
        self.psi.rows()
    }

    /// `W = [U V]`, of shape `e × (e + d)`.
    pub fn w(&self) -> Matrix {
        self.u.hstack(&self.v).expect("U and V share their row count")
    }

    pub fn num_params(&self) -> usize {
        let (e, d, p) = (self.hidden_size(), self.input_size(), self.output_size());
        e * e + e * d + e + p * e + e
    }

    /// `(U, V, b, ψ, h_0)` concatenated, each row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        [self.u.data(), self.v.data(), &self.b, self.psi.data(), &self.h0].concat()
    }

    /// Copy with weights taken from a vector laid out as in [`Self::to_flat`].
    pub fn with_flat(&self, flat: &[f64]) -> Result<RnnParams> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), found: flat.len() });
        }
        let mut out = self.clone();
        let mut rest = flat;
        for dst in [out.u.data_mut(), out.v.data_mut(), &mut out.b[..], out.psi.data_mut(), &mut out.h0[..]] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(out)
    }

    /// `U h + V x + b`.
    pub fn preactivation(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let uh = self.u.matvec(h);
        let vx = self.v.matvec(x);
        uh.iter().zip(&vx).zip(&self.b).map(|((a, c), b)| a + c + b).collect()
    }

    /// `f(h, x) = σ(U h + V x + b)`.
    pub fn cell(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        self.preactivation(h, x).into_iter().map(|a| self.activation.value(a)).collect()
    }

    fn check_samples(&self, samples: &[Vec<f64>]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        if let Some(x) = samples.iter().find(|x| x.len() != self.input_size()) {
            return Err(Error::DimensionMismatch { expected: self.input_size(), found: x.len() });
        }
        Ok(())
    }

    /// Runs `h_{j+1} = h_j + f(h_j, x_{j+1}) / T` and reads out `z_j = ψ h_j`.
    pub fn forward(&self, samples: &[Vec<f64>]) -> Result<Trajectory> {
        self.check_samples(samples)?;
        let inv_t = 1.0 / samples.len() as f64;
        let mut hidden = Vec::with_capacity(samples.len() + 1);
        let mut outputs = Vec::with_capacity(samples.len());
        let mut pre = Vec::with_capacity(samples.len());
        hidden.push(self.h0.clone());
        for x in samples {
            let h = hidden.last().unwrap();
            let a = self.preactivation(h, x);
            let next: Vec<f64> = h.iter().zip(&a).map(|(hi, ai)| hi + inv_t * self.activation.value(*ai)).collect();
            outputs.push(self.psi.matvec(&next));
            hidden.push(next);
            pre.push(a);
        }
        Ok(Trajectory { hidden, outputs, pre })
    }

    /// Reverse-mode gradients of `Σ_j ⟨upstream_j, z_j⟩` through the unrolled recursion.
    pub fn backward(&self, samples: &[Vec<f64>], traj: &Trajectory, upstream: &[Vec<f64>]) -> Result<RnnGradients> {
        self.check_samples(samples)?;
        let steps = samples.len();
        if upstream.len() != steps || traj.hidden.len() != steps + 1 {
            return Err(Error::ShapeMismatch("need one upstream gradient and one state per step"));
        }
        if let Some(g) = upstream.iter().find(|g| g.len() != self.output_size()) {
            return Err(Error::DimensionMismatch { expected: self.output_size(), found: g.len() });
        }
        let (e, d) = (self.hidden_size(), self.input_size());
        let inv_t = 1.0 / steps as f64;
        let mut grads = RnnGradients {
            u: Matrix::zeros(e, e),
            v: Matrix::zeros(e, d),
            b: vec![0.0; e],
            psi: Matrix::zeros(self.output_size(), e),
            h0: vec![0.0; e],
            x: vec![vec![0.0; d]; steps],
        };
        let mut g = vec![0.0; e];
        for j in (0..steps).rev() {
            // h_{j+1} feeds z_{j+1} and the next step
            let dz = &upstream[j];
            let h_next = &traj.hidden[j + 1];
            for (p, &dzp) in dz.iter().enumerate() {
                if dzp != 0.0 {
                    for (k, hk) in h_next.iter().enumerate() {
                        grads.psi.data_mut()[p * e + k] += dzp * hk;
                    }
                }
            }
            let from_out = self.psi.matvec_t(dz);
            g.iter_mut().zip(&from_out).for_each(|(gi, o)| *gi += o);

            let delta: Vec<f64> =
                traj.pre[j].iter().zip(&g).map(|(a, gi)| inv_t * self.activation.derivative(*a) * gi).collect();
            let h = &traj.hidden[j];
            let x = &samples[j];
            for (r, &dr) in delta.iter().enumerate() {
                if dr == 0.0 {
                    continue;
                }
                for (c, hc) in h.iter().enumerate() {
                    grads.u.data_mut()[r * e + c] += dr * hc;
                }
                for (c, xc) in x.iter().enumerate() {
                    grads.v.data_mut()[r * d + c] += dr * xc;
                }
                grads.b[r] += dr;
            }
            grads.x[j] = self.v.matvec_t(&delta);
            let through = self.u.matvec_t(&delta);
            g.iter_mut().zip(&through).for_each(|(gi, t)| *gi += t);
        }
        grads.h0 = g;
        Ok(grads)
    }

    /// `(K_h, K_x, K_f)`: Lipschitz constants of `f` in `h`, in `x`, and their maximum.
    pub fn lipschitz_constants(&self) -> (f64, f64, f64) {
        let ks = self.activation.lipschitz();
        let kh = ks * self.u.op_norm();
        let kx = ks * self.v.op_norm();
        (kh, kx, kh.max(kx))
    }
}

/// One gate `act(W x + U h + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl Gate {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Gate { w: Matrix::zeros(hidden, input), u: Matrix::zeros(hidden, hidden), b: vec![0.0; hidden] }
    }

    fn check(&self, hidden: usize, input: usize) -> Result<()> {
        if self.w.rows() != hidden
            || self.w.cols() != input
            || self.u.rows() != hidden
            || self.u.cols() != hidden
            || self.b.len() != hidden
        {
            return Err(Error::ShapeMismatch("gate weights must be e×d, e×e and e"));
        }
        Ok(())
    }

    fn affine(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let wx = self.w.matvec(x);
        let uh = self.u.matvec(h);
        wx.iter().zip(&uh).zip(&self.b).map(|((a, c), b)| a + c + b).collect()
    }
}

/// Gated recurrent unit in residual form: `f(h, x) = z ⊙ (n - h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub reset: Gate,
    pub update: Gate,
    pub candidate: Gate,
    /// Bias added to `U_n h` inside the reset product.
    pub c_n: Vec<f64>,
    pub h0: Vec<f64>,
}

impl GruParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            reset: Gate::zeros(hidden, input),
            update: Gate::zeros(hidden, input),
            candidate: Gate::zeros(hidden, input),
            c_n: vec![0.0; hidden],
            h0: vec![0.0; hidden],
        }
    }

    fn check(&self, samples: &[Vec<f64>]) -> Result<()> {
        let e = self.h0.len();
        let d = self.reset.w.cols();
        for gate in [&self.reset, &self.update, &self.candidate] {
            gate.check(e, d)?;
        }
        if self.c_n.len() != e {
            return Err(Error::ShapeMismatch("c_n must have length e"));
        }
        check_inputs(samples, d)
    }

    pub fn cell(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = self.reset.affine(h, x).into_iter().map(logistic).collect();
        let z: Vec<f64> = self.update.affine(h, x).into_iter().map(logistic).collect();
        let un = self.candidate.u.matvec(h);
        let wn = self.candidate.w.matvec(x);
        (0..h.len())
            .map(|i| {
                let n = math::tanh(wn[i] + self.candidate.b[i] + r[i] * (un[i] + self.c_n[i]));
                z[i] * (n - h[i])
            })
            .collect()
    }

    /// Hidden states `h_0..h_T`.
    pub fn forward(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(samples)?;
        Ok(residual_unroll(&self.h0, samples, |h, x| self.cell(h, x)))
    }
}

/// Long short-term memory in residual form over the stacked state `(h, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input: Gate,
    pub forget: Gate,
    pub cell: Gate,
    pub output: Gate,
    pub h0: Vec<f64>,
    pub c0: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            input: Gate::zeros(hidden, input),
            forget: Gate::zeros(hidden, input),
            cell: Gate::zeros(hidden, input),
            output: Gate::zeros(hidden, input),
            h0: vec![0.0; hidden],
            c0: vec![0.0; hidden],
        }
    }

    fn check(&self, samples: &[Vec<f64>]) -> Result<()> {
        let e = self.h0.len();
        let d = self.input.w.cols();
        for gate in [&self.input, &self.forget, &self.cell, &self.output] {
            gate.check(e, d)?;
        }
        if self.c0.len() != e {
            return Err(Error::ShapeMismatch("c0 must have length e"));
        }
        check_inputs(samples, d)
    }

    /// Residual field on the stacked state `(h, c)`.
    pub fn field(&self, state: &[f64], x: &[f64]) -> Vec<f64> {
        let e = self.h0.len();
        let (h, c) = state.split_at(e);
        let i = self.input.affine(h, x);
        let f = self.forget.affine(h, x);
        let g = self.cell.affine(h, x);
        let o = self.output.affine(h, x);
        let mut out = vec![0.0; 2 * e];
        for k in 0..e {
            let c_new = logistic(f[k]) * c[k] + logistic(i[k]) * math::tanh(g[k]);
            out[k] = logistic(o[k]) * math::tanh(c_new) - h[k];
            out[e + k] = c_new - c[k];
        }
        out
    }

    /// Stacked states `(h_j, c_j)` for `j = 0..T`.
    pub fn forward(&self, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check(samples)?;
        let start = [&self.h0[..], &self.c0[..]].concat();
        Ok(residual_unroll(&start, samples, |s, x| self.field(s, x)))
    }
}

fn check_inputs(samples: &[Vec<f64>], d: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    match samples.iter().find(|x| x.len() != d) {
        Some(x) => Err(Error::DimensionMismatch { expected: d, found: x.len() }),
        None => Ok(()),
    }
}

fn residual_unroll(start: &[f64], samples: &[Vec<f64>], f: impl Fn(&[f64], &[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
    let inv_t = 1.0 / samples.len() as f64;
    let mut states = Vec::with_capacity(samples.len() + 1);
    states.push(start.to_vec());
    for x in samples {
        let h = states.last().unwrap();
        let step = f(h, x);
        let next = h.iter().zip(&step).map(|(a, s)| a + inv_t * s).collect();
        states.push(next);
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, e: usize, d: usize, p: usize, act: Activation) -> RnnParams {
        RnnParams::new(
            random_matrix(rng, e, e, 1.0),
            random_matrix(rng, e, d, 1.0),
            (0..e).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            random_matrix(rng, p, e, 1.0),
            (0..e).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            act,
        )
        .unwrap()
    }

    fn random_samples(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
        (0..t).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn logistic_closed_forms() {
        let act = Activation::Logistic;
        let d = act.derivatives(0.0, 3);
        assert_eq!(d[0], 0.5);
        assert_eq!(d[1], 0.25);
        assert!(d[2].abs() < 1e-17);
        assert!((d[3] + 0.125).abs() < 1e-15);
        for i in -100..=100 {
            let x = i as f64 / 10.0;
            let s = act.value(x);
            assert!((act.derivatives(x, 1)[1] - s * (1.0 - s)).abs() < 1e-15);
            assert_eq!(act.derivatives(x, 1)[1], act.derivative(x));
        }
    }

    #[test]
    fn tanh_closed_forms() {
        let act = Activation::Tanh;
        for i in -50..=50 {
            let x = i as f64 / 10.0;
            let t = libm::tanh(x);
            let d = act.derivatives(x, 3);
            assert!((d[1] - (1.0 - t * t)).abs() < 1e-15);
            assert!((d[2] + 2.0 * t * (1.0 - t * t)).abs() < 1e-14);
            assert!((d[3] - (-2.0 + 8.0 * t * t - 6.0 * t * t * t * t)).abs() < 1e-13);
        }
        assert_eq!(Activation::Identity.derivatives(3.0, 3), vec![3.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-4;
        for act in [Activation::Logistic, Activation::Tanh] {
            for i in -20..=20 {
                let x = i as f64 / 4.0;
                let d = act.derivatives(x, 6);
                let dp = act.derivatives(x + h, 5);
                let dm = act.derivatives(x - h, 5);
                for n in 0..6 {
                    let fd = (dp[n] - dm[n]) / (2.0 * h);
                    assert!((fd - d[n + 1]).abs() < 1e-6 * (1.0 + d[n + 1].abs()), "{act:?} n={n} x={x}");
                }
            }
        }
    }

    #[test]
    fn derivative_sup_bounds_on_grid() {
        for (act, bound) in [
            (Activation::Logistic, (|n: usize| 2f64.powi(n as i32 - 1) * math::factorial(n)) as fn(usize) -> f64),
            (Activation::Tanh, |n: usize| 4f64.powi(n as i32) * math::factorial(n)),
        ] {
            let a = act.derivative_constant().unwrap();
            for i in -2000..=2000 {
                let x = i as f64 / 200.0;
                let d = act.derivatives(x, 8);
                for n in 1..=8 {
                    assert!(d[n].abs() <= bound(n), "{act:?} n={n} x={x}");
                    assert!(d[n].abs() <= libm::pow(a, (n + 1) as f64) * math::factorial(n));
                }
            }
        }
    }

    #[test]
    fn constant_field_recursion() {
        let mut p = RnnParams::zeros(2, 1, 1, Activation::Identity);
        p.b = vec![0.5, -1.0];
        p.psi = Matrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let traj = p.forward(&vec![vec![3.0]; 4]).unwrap();
        for (j, h) in traj.hidden.iter().enumerate() {
            let t = j as f64 / 4.0;
            assert!((h[0] - 0.5 * t).abs() < 1e-15 && (h[1] + t).abs() < 1e-15);
        }
        assert_eq!(traj.outputs.len(), 4);
        assert!((traj.outputs[3][0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 3, 2, 1, Activation::Tanh);
        let x = vec![0.3, -0.2];
        let traj = p.forward(std::slice::from_ref(&x)).unwrap();
        let f = p.cell(&p.h0, &x);
        let expected: Vec<f64> = p.h0.iter().zip(&f).map(|(a, b)| a + b).collect();
        assert_eq!(traj.hidden[1], expected);
    }

    #[test]
    fn unrolled_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 2, 2, 1, Activation::Logistic);
        let xs = random_samples(&mut rng, 4, 2);
        let traj = p.forward(&xs).unwrap();
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = p.h0.clone();
        for (j, x) in xs.iter().enumerate() {
            let a0 = p.u.get(0, 0) * h[0] + p.u.get(0, 1) * h[1] + p.v.get(0, 0) * x[0] + p.v.get(0, 1) * x[1] + p.b[0];
            let a1 = p.u.get(1, 0) * h[0] + p.u.get(1, 1) * h[1] + p.v.get(1, 0) * x[0] + p.v.get(1, 1) * x[1] + p.b[1];
            h = vec![h[0] + s(a0) / 4.0, h[1] + s(a1) / 4.0];
            assert!((traj.hidden[j + 1][0] - h[0]).abs() < 1e-15);
            assert!((traj.hidden[j + 1][1] - h[1]).abs() < 1e-15);
            let z = p.psi.get(0, 0) * h[0] + p.psi.get(0, 1) * h[1];
            assert!((traj.outputs[j][0] - z).abs() < 1e-15);
        }
    }

    #[test]
    fn opposite_linear_fields_cancel() {
        // identity activation: running f then -f returns to h0
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(&mut rng, 3, 2, 1, Activation::Identity);
        let mut q = p.clone();
        q.u = p.u.scaled(-1.0);
        q.v = p.v.scaled(-1.0);
        q.b = p.b.iter().map(|x| -x).collect();
        let xs = random_samples(&mut rng, 5, 2);
        let h1 = p.forward(&xs).unwrap().hidden;
        for j in 0..5 {
            let step = q.cell(&h1[j], &xs[j]);
            let back: Vec<f64> = h1[j + 1].iter().zip(&step).map(|(a, s)| a + s / 5.0).collect();
            for (a, b) in back.iter().zip(&h1[j]) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for act in [Activation::Identity, Activation::Logistic, Activation::Tanh] {
            let p = random_params(&mut rng, 3, 2, 2, act);
            let xs = random_samples(&mut rng, 5, 2);
            let up: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
            let objective = |q: &RnnParams, xs: &[Vec<f64>]| -> f64 {
                let t = q.forward(xs).unwrap();
                t.outputs.iter().zip(&up).map(|(z, g)| z.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()).sum()
            };
            let traj = p.forward(&xs).unwrap();
            let g = p.backward(&xs, &traj, &up).unwrap();
            let flat = p.to_flat();
            let analytic = g.to_flat();
            let h = 1e-5;
            for i in 0..flat.len() {
                let mut plus = flat.clone();
                plus[i] += h;
                let mut minus = flat.clone();
                minus[i] -= h;
                let fd = (objective(&p.with_flat(&plus).unwrap(), &xs) - objective(&p.with_flat(&minus).unwrap(), &xs)) / (2.0 * h);
                let err = (fd - analytic[i]).abs() / (fd.abs().max(analytic[i].abs()).max(1e-8));
                assert!(err < 1e-4 || (fd - analytic[i]).abs() < 1e-9, "{act:?} param {i}: {fd} vs {}", analytic[i]);
            }
            for j in 0..5 {
                for c in 0..2 {
                    let mut xp = xs.clone();
                    xp[j][c] += h;
                    let mut xm = xs.clone();
                    xm[j][c] -= h;
                    let fd = (objective(&p, &xp) - objective(&p, &xm)) / (2.0 * h);
                    assert!((fd - g.x[j][c]).abs() < 1e-4 * (1.0 + fd.abs()));
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_params(&mut rng, 3, 2, 1, Activation::Tanh);
        let xs = random_samples(&mut rng, 4, 2);
        let traj = p.forward(&xs).unwrap();
        let g = p.backward(&xs, &traj, &vec![vec![0.0]; 4]).unwrap();
        assert!(g.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_step_closed_form() {
        // z = ψ(h0 + U h0 + V x + b), objective = z
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_params(&mut rng, 2, 2, 1, Activation::Identity);
        let x = vec![0.4, -0.9];
        let traj = p.forward(std::slice::from_ref(&x)).unwrap();
        let g = p.backward(std::slice::from_ref(&x), &traj, &[vec![1.0]]).unwrap();
        let psi = p.psi.row(0);
        for r in 0..2 {
            for c in 0..2 {
                assert!((g.u.get(r, c) - psi[r] * p.h0[c]).abs() < 1e-15);
                assert!((g.v.get(r, c) - psi[r] * x[c]).abs() < 1e-15);
            }
            assert!((g.b[r] - psi[r]).abs() < 1e-15);
        }
        let h1 = &traj.hidden[1];
        assert_eq!(g.psi.row(0), &h1[..]);
        let expected_h0: Vec<f64> = (0..2).map(|c| psi[c] + psi[0] * p.u.get(0, c) + psi[1] * p.u.get(1, c)).collect();
        for c in 0..2 {
            assert!((g.h0[c] - expected_h0[c]).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(RnnParams::new(Matrix::zeros(2, 2), Matrix::zeros(3, 1), vec![0.0; 2], Matrix::zeros(1, 2), vec![0.0; 2], Activation::Tanh).is_err());
        let p = RnnParams::zeros(2, 1, 1, Activation::Tanh);
        assert!(p.forward(&[]).is_err());
        assert!(p.forward(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let mut p = RnnParams::zeros(2, 2, 1, Activation::Logistic);
        p.u = Matrix::identity(2).scaled(2.0);
        assert_eq!(p.lipschitz_constants().0, 0.5);
        p.u = Matrix::zeros(2, 2);
        assert_eq!(p.lipschitz_constants().0, 0.0);
    }

    #[test]
    fn gru_zero_weights() {
        let g = GruParams { h0: vec![1.0, -2.0], ..GruParams::zeros(2, 3) };
        let xs = vec![vec![0.5, 0.1, -0.3]; 6];
        let states = g.forward(&xs).unwrap();
        // r = z = 1/2, n = tanh(0) = 0, so h <- h - h / (2T)
        let mut h = g.h0.clone();
        for s in &states[1..] {
            h = h.iter().map(|v| v - v / 12.0).collect();
            assert!((s[0] - h[0]).abs() < 1e-15 && (s[1] - h[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn lstm_zero_weights() {
        let l = LstmParams { h0: vec![0.2], c0: vec![1.0], ..LstmParams::zeros(1, 2) };
        let xs = vec![vec![1.0, 1.0]; 4];
        let states = l.forward(&xs).unwrap();
        // gates 1/2, g = tanh(0) = 0: c' = c/2, h' = tanh(c')/2
        let (mut h, mut c) = (0.2f64, 1.0f64);
        for s in &states[1..] {
            let c_new = 0.5 * c;
            let h_new = 0.5 * c_new.tanh();
            h += (h_new - h) / 4.0;
            c += (c_new - c) / 4.0;
            assert!((s[0] - h).abs() < 1e-15 && (s[1] - c).abs() < 1e-15);
        }
    }

    #[test]
    fn gated_steps_scale_like_one_over_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut g = GruParams::zeros(2, 2);
        for gate in [&mut g.reset, &mut g.update, &mut g.candidate] {
            gate.w = random_matrix(&mut rng, 2, 2, 1.0);
            gate.u = random_matrix(&mut rng, 2, 2, 1.0);
        }
        g.h0 = vec![0.5, 0.5];
        for t in [10usize, 100, 1000] {
            let xs = vec![vec![0.2, 0.1]; t];
            let states = g.forward(&xs).unwrap();
            let step = math::norm(&[states[1][0] - states[0][0], states[1][1] - states[0][1]]);
            assert!(step * t as f64 <= 2.0 * math::norm(&g.h0) + 2.0);
            assert!(step > 0.0);
        }
        assert!(g.forward(&[vec![1.0]]).is_err());
    }
}
