//! Step-N Taylor expansion of the CDE solution.
//!
//! Iterated star products `F^{i_1} ⋆ ⋯ ⋆ F^{i_k}(h̄_0)` are computed from
//! truncated derivative towers at the single base point `h̄_0`:
//! `(F ⋆ G)(h) = J(G)(h) F(h)`, folded from the right, with the product rule
//! supplying every derivative of the result that later folds need.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math;
use crate::ode::{bound_constants, CdeField};
use crate::path::PiecewiseLinearPath;
use crate::rnn::Activation;
use crate::signature::{signature, Signature};
use crate::tensor::{increment, DenseTensor};
use crate::{Error, Result};

/// Derivatives `J^0 F, ..., J^m F` of a vector field `F: ℝ^n → ℝ^n` at one point.
///
/// `derivs[k]` has order `k + 1`: axis 1 is the output component, axes
/// `2..=k+1` the differentiation variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTower {
    dim: usize,
    derivs: Vec<DenseTensor>,
}

impl DerivativeTower {
    pub fn new(derivs: Vec<DenseTensor>) -> Result<Self> {
        let dim = derivs.first().ok_or(Error::InvalidArgument("a tower needs at least its value"))?.dim();
        for (k, t) in derivs.iter().enumerate() {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: t.dim() });
            }
            if t.order() != k + 1 {
                return Err(Error::ShapeMismatch("derivs[k] must have order k + 1"));
            }
        }
        Ok(DerivativeTower { dim, derivs })
    }

    /// Tower of a constant field: value `v`, all derivatives zero.
    pub fn constant(v: &[f64], order: usize) -> Self {
        let dim = v.len();
        let mut derivs = vec![DenseTensor::vector(v)];
        derivs.extend((1..=order).map(|k| DenseTensor::zeros(dim, k + 1)));
        DerivativeTower { dim, derivs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest derivative order held.
    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn value(&self) -> &[f64] {
        self.derivs[0].data()
    }

    pub fn deriv(&self, k: usize) -> &DenseTensor {
        &self.derivs[k]
    }

    pub fn derivs(&self) -> &[DenseTensor] {
        &self.derivs
    }

    pub fn truncated(&self, order: usize) -> DerivativeTower {
        DerivativeTower { dim: self.dim, derivs: self.derivs[..=order.min(self.order())].to_vec() }
    }

    /// The Jacobian `J(F)` as a matrix, if the tower holds it.
    pub fn jacobian(&self) -> Option<Matrix> {
        let t = self.derivs.get(1)?;
        Matrix::from_vec(self.dim, self.dim, t.data().to_vec()).ok()
    }
}

/// Tower of column `i` (1-indexed) of the CDE field at `hbar`, up to order `m`.
///
/// Columns `i ≤ d` are constant. For column `d + 1` and output row `j < e`,
/// `∂^k F_j / ∂h̄_{i_1}⋯∂h̄_{i_k} = c W_{j i_1} ⋯ W_{j i_k} σ^{(k)}(W_j h̄ + b_j)`
/// with `c = 2 / (1 - L)`; rows `j ≥ e` vanish.
pub fn field_tower(field: &CdeField, i: usize, hbar: &[f64], m: usize) -> Result<DerivativeTower> {
    let params = field.params();
    let (e, d) = (params.hidden_size(), params.input_size());
    let n = e + d;
    if i == 0 || i > d + 1 {
        return Err(Error::LetterOutOfRange { letter: i, alphabet: d + 1 });
    }
    if hbar.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: hbar.len() });
    }
    if i <= d {
        let mut v = vec![0.0; n];
        v[e + i - 1] = 1.0;
        return Ok(DerivativeTower::constant(&v, m));
    }
    let w = field.w();
    let a = w.matvec(hbar);
    let c = field.scale();
    let mut derivs: Vec<DenseTensor> = (0..=m).map(|k| DenseTensor::zeros(n, k + 1)).collect();
    for j in 0..e {
        let sig = params.activation.derivatives(a[j] + params.b[j], m);
        let row = w.row(j);
        // outer powers of W_j, built level by level
        let mut power = vec![1.0];
        for (k, deriv) in derivs.iter_mut().enumerate() {
            if k > 0 {
                power = power.iter().flat_map(|p| row.iter().map(move |r| p * r)).collect();
            }
            let scale = c * sig[k];
            if scale == 0.0 {
                continue;
            }
            let block = power.len();
            let out = &mut deriv.data_mut()[j * block..(j + 1) * block];
            out.iter_mut().zip(&power).for_each(|(o, p)| *o = scale * p);
        }
    }
    DerivativeTower::new(derivs)
}

/// Tower of `F ⋆ G = J(G) F` at order `g.order() - 1`.
///
/// By the product rule,
/// `∂_{i_1..i_n}(F⋆G)_j = Σ_a Σ_{S ⊆ {1..n}} ∂_{a, i_S} G_j · ∂_{i_{S^c}} F_a`.
pub fn star_apply(g: &DerivativeTower, f: &DerivativeTower) -> Result<DerivativeTower> {
    if g.dim != f.dim {
        return Err(Error::DimensionMismatch { expected: g.dim, found: f.dim });
    }
    if g.order() == 0 {
        return Err(Error::OrderExhausted { needed: 1, available: 0 });
    }
    let m = g.order() - 1;
    if f.order() < m {
        return Err(Error::OrderExhausted { needed: m, available: f.order() });
    }
    let dim = g.dim;
    let g_nonzero: Vec<bool> = g.derivs.iter().map(|t| t.data().iter().any(|&x| x != 0.0)).collect();
    let f_nonzero: Vec<bool> = f.derivs.iter().map(|t| t.data().iter().any(|&x| x != 0.0)).collect();
    let pow: Vec<usize> = (0..=m + 1).map(|k| dim.pow(k as u32)).collect();

    let mut derivs = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let mut out = DenseTensor::zeros(dim, n + 1);
        // subsets S of the n differentiation slots that can contribute
        let masks: Vec<u32> = (0..1u32 << n)
            .filter(|&mask| {
                let s = mask.count_ones() as usize;
                g_nonzero[s + 1] && f_nonzero[n - s]
            })
            .collect();
        if masks.is_empty() {
            derivs.push(out);
            continue;
        }
        let mut idx = vec![0usize; n];
        let block = pow[n];
        for flat in 0..block {
            for mask in &masks {
                let s = mask.count_ones() as usize;
                let (mut off_s, mut off_c) = (0usize, 0usize);
                for (slot, &i) in idx.iter().enumerate() {
                    if mask >> slot & 1 == 1 {
                        off_s = off_s * dim + i;
                    } else {
                        off_c = off_c * dim + i;
                    }
                }
                let gd = g.derivs[s + 1].data();
                let fd = f.derivs[n - s].data();
                let fstride = pow[n - s];
                let gstride = pow[s];
                for j in 0..dim {
                    let mut acc = 0.0;
                    let gbase = j * dim * gstride;
                    for a in 0..dim {
                        acc += gd[gbase + a * gstride + off_s] * fd[a * fstride + off_c];
                    }
                    out.data_mut()[j * block + flat] += acc;
                }
            }
            increment(&mut idx, dim);
        }
        derivs.push(out);
    }
    DerivativeTower::new(derivs)
}

fn check_word(word: &[usize], alphabet: usize) -> Result<()> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("words must have at least one letter"));
    }
    match word.iter().find(|&&l| l == 0 || l > alphabet) {
        Some(&letter) => Err(Error::LetterOutOfRange { letter, alphabet }),
        None => Ok(()),
    }
}

/// `F^{i_1} ⋆ ⋯ ⋆ F^{i_k}(h̄)` by tower arithmetic, whatever the activation.
pub fn iterated_star_tower(field: &CdeField, word: &[usize], hbar: &[f64]) -> Result<Vec<f64>> {
    check_word(word, field.path_dim())?;
    let k = word.len();
    let mut acc = field_tower(field, word[k - 1], hbar, k - 1)?;
    for (pos, &letter) in word[..k - 1].iter().enumerate().rev() {
        let f = field_tower(field, letter, hbar, pos)?;
        acc = star_apply(&acc, &f)?;
    }
    Ok(acc.value().to_vec())
}

/// The affine fields `F^i(h̄) = W_i h̄ + b_i` of the identity activation.
fn affine_parts(field: &CdeField) -> (Matrix, Vec<f64>) {
    let params = field.params();
    let (e, d) = (params.hidden_size(), params.input_size());
    let c = field.scale();
    let mut w = Matrix::zeros(e + d, e + d);
    let src = field.w();
    for j in 0..e {
        for col in 0..e + d {
            w.set(j, col, c * src.get(j, col));
        }
    }
    let mut b = vec![0.0; e + d];
    for j in 0..e {
        b[j] = c * params.b[j];
    }
    (w, b)
}

/// `W_{i_k} ⋯ W_{i_2} (W_{i_1} h̄ + b_{i_1})`, valid for the identity activation only.
pub fn iterated_star_closed_form(field: &CdeField, word: &[usize], hbar: &[f64]) -> Result<Vec<f64>> {
    if field.params().activation != Activation::Identity {
        return Err(Error::InvalidArgument("the closed form needs the identity activation"));
    }
    check_word(word, field.path_dim())?;
    let d = field.params().input_size();
    let e = field.params().hidden_size();
    let (w_last, b_last) = affine_parts(field);
    let mut v = if word[0] <= d {
        let mut v = vec![0.0; e + d];
        v[e + word[0] - 1] = 1.0;
        v
    } else {
        w_last.matvec(hbar).iter().zip(&b_last).map(|(a, b)| a + b).collect()
    };
    for &letter in &word[1..] {
        if letter <= d {
            return Ok(vec![0.0; e + d]);
        }
        v = w_last.matvec(&v);
    }
    Ok(v)
}

/// `F^{i_1} ⋆ ⋯ ⋆ F^{i_k}(h̄)`, using the closed form when `σ` is the identity.
pub fn iterated_star(field: &CdeField, word: &[usize], hbar: &[f64]) -> Result<Vec<f64>> {
    if field.params().activation == Activation::Identity {
        iterated_star_closed_form(field, word, hbar)
    } else {
        iterated_star_tower(field, word, hbar)
    }
}

/// Every iterated star product of length `1..=depth` at one base point.
///
/// Level `k` lists the `d̄^k` words in lexicographic order, which matches the
/// row-major layout of an order-`k` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct WordValues {
    state_dim: usize,
    alphabet: usize,
    levels: Vec<Vec<Vec<f64>>>,
    evaluations: usize,
}

impl WordValues {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Values for all words of length `k` (level 0 is empty).
    pub fn level(&self, k: usize) -> &[Vec<f64>] {
        &self.levels[k]
    }

    /// Value for one word, letters in `1..=d̄`.
    pub fn get(&self, word: &[usize]) -> Result<&[f64]> {
        check_word(word, self.alphabet)?;
        if word.len() > self.depth() {
            return Err(Error::OrderExhausted { needed: word.len(), available: self.depth() });
        }
        let idx = word.iter().fold(0, |acc, &l| acc * self.alphabet + l - 1);
        Ok(&self.levels[word.len()][idx])
    }

    /// Number of word values produced, `Σ_{k≤N} d̄^k`.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// `max_{|w|=k} ‖F^{w}(h̄_0)‖`: a point estimate, not the supremum over a ball.
    pub fn max_norm(&self, k: usize) -> f64 {
        self.levels[k].iter().map(|v| math::norm(v)).fold(0.0, f64::max)
    }
}

/// All iterated star products up to `depth`, sharing towers between words
/// with a common suffix.
pub fn all_words(field: &CdeField, hbar: &[f64], depth: usize) -> Result<WordValues> {
    let alphabet = field.path_dim();
    let n = field.state_dim();
    if hbar.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: hbar.len() });
    }
    let mut levels: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
    for k in 1..=depth {
        levels.push(vec![vec![0.0; n]; alphabet.pow(k as u32)]);
    }
    let mut values = WordValues { state_dim: n, alphabet, levels, evaluations: 0 };
    if depth == 0 {
        return Ok(values);
    }
    let towers: Vec<DerivativeTower> =
        (1..=alphabet).map(|i| field_tower(field, i, hbar, depth - 1)).collect::<Result<_>>()?;

    // suffix towers: a word of length ℓ carries order depth - ℓ
    let mut stack: Vec<(Vec<usize>, DerivativeTower)> = Vec::new();
    for i in (1..=alphabet).rev() {
        stack.push((vec![i], towers[i - 1].clone()));
    }
    while let Some((suffix, tower)) = stack.pop() {
        let len = suffix.len();
        let idx = suffix.iter().fold(0, |acc, &l| acc * alphabet + l - 1);
        values.levels[len][idx] = tower.value().to_vec();
        if len == depth {
            continue;
        }
        // a suffix ending in a constant column has no derivatives, so every
        // longer word sharing it vanishes
        let last = *suffix.last().unwrap();
        if last < alphabet {
            continue;
        }
        if tower.derivs().iter().skip(1).all(|t| t.data().iter().all(|&x| x == 0.0)) {
            continue;
        }
        for i in (1..=alphabet).rev() {
            let f = towers[i - 1].truncated(depth - len - 1);
            let next = star_apply(&tower, &f)?;
            let mut word = Vec::with_capacity(len + 1);
            word.push(i);
            word.extend_from_slice(&suffix);
            stack.push((word, next));
        }
    }
    values.evaluations = (1..=depth).map(|k| alphabet.pow(k as u32)).sum();
    Ok(values)
}

/// Precomputed word values for evaluating `H^N_t` at many times or depths.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorExpansion {
    start: Vec<f64>,
    words: WordValues,
}

impl TaylorExpansion {
    /// Expansion around `H̄_0 = (h_0, x_0)`.
    pub fn new(field: &CdeField, x0: &[f64], depth: usize) -> Result<Self> {
        let params = field.params();
        if x0.len() != params.input_size() {
            return Err(Error::DimensionMismatch { expected: params.input_size(), found: x0.len() });
        }
        let start = [&params.h0[..], x0].concat();
        let words = all_words(field, &start, depth)?;
        Ok(TaylorExpansion { start, words })
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn words(&self) -> &WordValues {
        &self.words
    }

    /// `H̄_0 + Σ_{k=1}^{n} (1/k!) Σ_{|w|=k} S^{w} F^{w}(H̄_0)` for a
    /// factorial-normalised signature `sig` of the augmented path.
    pub fn evaluate(&self, sig: &Signature, n: usize) -> Result<Vec<f64>> {
        if n > self.words.depth() || n > sig.depth() {
            return Err(Error::OrderExhausted { needed: n, available: self.words.depth().min(sig.depth()) });
        }
        if sig.dim() != self.words.alphabet() {
            return Err(Error::DimensionMismatch { expected: self.words.alphabet(), found: sig.dim() });
        }
        let mut out = self.start.clone();
        for k in 1..=n {
            let inv = 1.0 / math::factorial(k);
            for (coeff, value) in sig.level(k).data().iter().zip(self.words.level(k)) {
                let c = coeff * inv;
                if c != 0.0 {
                    out.iter_mut().zip(value).for_each(|(o, v)| *o += c * v);
                }
            }
        }
        Ok(out)
    }
}

/// Step-`N` Taylor expansion `H̄^N_t` along a time-augmented path.
pub fn taylor_expansion(field: &CdeField, augmented: &PiecewiseLinearPath, depth: usize, t: f64) -> Result<Vec<f64>> {
    if augmented.dim() != field.path_dim() {
        return Err(Error::DimensionMismatch { expected: field.path_dim(), found: augmented.dim() });
    }
    let d = field.params().input_size();
    let expansion = TaylorExpansion::new(field, &augmented.point(0)[..d], depth)?;
    let sig = signature(augmented, depth, 0.0, t)?;
    expansion.evaluate(&sig, depth)
}

/// Largest `‖W‖_F` for which the smooth-activation series is known to converge,
/// `(1 - L) / (8 a² d̄)`; `None` for the identity, which needs no condition.
pub fn radius(field: &CdeField) -> Option<f64> {
    let a = field.params().activation.derivative_constant()?;
    Some((1.0 - field.config().l()) / (8.0 * a * a * field.path_dim() as f64))
}

/// Analytic bound on `Λ_k`, the supremum of length-`k` iterated star norms.
///
/// Smooth activations: `√2 a (8 a² ‖W‖_F / (1 - L))^{k-1} k!`. Identity:
/// `C ‖W_{d+1}‖^{k-1}` with `C = ‖W_{d+1}‖ M̄ + max(1, 2‖b‖ / (1 - L))` and
/// `M̄ = ‖h_0‖ + M + L` the radius of the ball holding `H̄`.
pub fn lambda_bound(field: &CdeField, k: usize) -> f64 {
    assert!(k >= 1, "Λ_k is defined for k ≥ 1");
    let params = field.params();
    let l = field.config().l();
    match params.activation.derivative_constant() {
        Some(a) => {
            let wf = field.w().frobenius();
            math::sqrt(2.0) * a * math::powi(8.0 * a * a * wf / (1.0 - l), k as i32 - 1) * math::factorial(k)
        }
        None => {
            let w_op = field.scale() * field.w().op_norm();
            let consts = bound_constants(params, l);
            let m_bar = consts.state_radius(&params.h0) + l;
            let c = w_op * m_bar + (2.0 * math::norm(&params.b) / (1.0 - l)).max(1.0);
            c * math::powi(w_op, k as i32 - 1)
        }
    }
}

/// The truncation bound `‖H_t - H^N_t‖ ≤ d̄^{N+1} Λ_{N+1} / (N+1)!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorBound {
    pub depth: usize,
    pub lambda_next: f64,
    pub bound: f64,
    pub radius: Option<f64>,
    /// Whether `‖W‖_F` lies below [`radius`] (always true for the identity).
    pub radius_holds: bool,
}

pub fn taylor_error_bound(field: &CdeField, depth: usize) -> TaylorBound {
    let lambda_next = lambda_bound(field, depth + 1);
    let dbar = field.path_dim() as f64;
    let bound = math::powi(dbar, depth as i32 + 1) / math::factorial(depth + 1) * lambda_next;
    let r = radius(field);
    let radius_holds = r.is_none_or(|r| field.w().frobenius() < r);
    TaylorBound { depth, lambda_next, bound, radius: r, radius_holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_cde, Tolerance};
    use crate::path::PathConfig;
    use crate::rnn::RnnParams;
    use crate::tensor::permute_axes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, e: usize, d: usize, scale: f64, act: Activation) -> CdeField {
        let m = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
        };
        let p = RnnParams::new(
            m(rng, e, e),
            m(rng, e, d),
            (0..e).map(|_| rng.gen_range(-scale..scale)).collect(),
            m(rng, 1, e),
            (0..e).map(|_| rng.gen_range(-0.3..0.3)).collect(),
            act,
        )
        .unwrap();
        CdeField::new(&p, PathConfig::default())
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
    }

    /// Tower entries by repeated central differences of the column.
    fn fd_derivative(field: &CdeField, i: usize, h: &[f64], axes: &[usize], step: f64) -> Vec<f64> {
        match axes.split_first() {
            None => field.column(i, h).unwrap(),
            Some((&a, rest)) => {
                let mut hp = h.to_vec();
                hp[a] += step;
                let mut hm = h.to_vec();
                hm[a] -= step;
                let p = fd_derivative(field, i, &hp, rest, step);
                let m = fd_derivative(field, i, &hm, rest, step);
                p.iter().zip(&m).map(|(x, y)| (x - y) / (2.0 * step)).collect()
            }
        }
    }

    #[test]
    fn constant_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let field = random_field(&mut rng, 2, 2, 1.0, Activation::Tanh);
        let h = random_point(&mut rng, 4);
        let t = field_tower(&field, 2, &h, 3).unwrap();
        assert_eq!(t.value(), &[0.0, 0.0, 0.0, 1.0]);
        for k in 1..=3 {
            assert!(t.deriv(k).data().iter().all(|&x| x == 0.0));
        }
        assert!(field_tower(&field, 4, &h, 1).is_err());
        assert!(field_tower(&field, 0, &h, 1).is_err());
    }

    #[test]
    fn identity_tower_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let field = random_field(&mut rng, 2, 2, 1.0, Activation::Identity);
        let h = random_point(&mut rng, 4);
        let t = field_tower(&field, 3, &h, 3).unwrap();
        let (w, b) = affine_parts(&field);
        let expected: Vec<f64> = w.matvec(&h).iter().zip(&b).map(|(a, c)| a + c).collect();
        for (a, c) in t.value().iter().zip(&expected) {
            assert!((a - c).abs() < 1e-14);
        }
        assert_eq!(t.jacobian().unwrap(), w);
        assert!(t.deriv(2).data().iter().all(|&x| x == 0.0));
        assert!(t.deriv(3).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn logistic_tower_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let field = random_field(&mut rng, 2, 1, 1.0, Activation::Logistic);
        let h = random_point(&mut rng, 3);
        let t = field_tower(&field, 2, &h, 2).unwrap();
        for a in 0..3 {
            let fd = fd_derivative(&field, 2, &h, &[a], 1e-5);
            for j in 0..3 {
                assert!((t.deriv(1).get(&[j, a]) - fd[j]).abs() < 1e-8);
            }
            for b in 0..3 {
                let fd = fd_derivative(&field, 2, &h, &[a, b], 1e-4);
                for j in 0..3 {
                    assert!((t.deriv(2).get(&[j, a, b]) - fd[j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn towers_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let field = random_field(&mut rng, 2, 1, 1.0, Activation::Tanh);
        let h = random_point(&mut rng, 3);
        let g = field_tower(&field, 2, &h, 3).unwrap();
        let f = field_tower(&field, 1, &h, 2).unwrap();
        let star = star_apply(&g, &field_tower(&field, 2, &h, 2).unwrap()).unwrap();
        for tower in [&g, &star, &star_apply(&star, &f.truncated(1)).unwrap()] {
            let t3 = tower.deriv(tower.order());
            if t3.order() >= 3 {
                let mut perm: Vec<usize> = (1..=t3.order()).collect();
                perm.swap(1, 2);
                let p = permute_axes(t3, &perm).unwrap();
                for (a, b) in p.data().iter().zip(t3.data()) {
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn star_at_order_zero_is_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let field = random_field(&mut rng, 3, 2, 1.0, Activation::Logistic);
        let h = random_point(&mut rng, 5);
        let g = field_tower(&field, 3, &h, 1).unwrap();
        for i in 1..=3 {
            let f = field_tower(&field, i, &h, 0).unwrap();
            let star = star_apply(&g, &f).unwrap();
            let direct = g.jacobian().unwrap().matvec(f.value());
            assert_eq!(star.order(), 0);
            for (a, b) in star.value().iter().zip(&direct) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_g_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let field = random_field(&mut rng, 2, 2, 1.0, Activation::Tanh);
        let h = random_point(&mut rng, 4);
        let g = field_tower(&field, 1, &h, 3).unwrap();
        let f = field_tower(&field, 3, &h, 2).unwrap();
        let star = star_apply(&g, &f).unwrap();
        assert!(star.derivs().iter().all(|t| t.data().iter().all(|&x| x == 0.0)));
        assert!(matches!(star_apply(&g, &f.truncated(1)), Err(Error::OrderExhausted { .. })));
        assert!(matches!(star_apply(&g.truncated(0), &f), Err(Error::OrderExhausted { .. })));
    }

    #[test]
    fn star_tower_matches_finite_differences() {
        // (F ⋆ G)(h) = J(G)(h) F(h), with J(G) itself by finite differences
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let field = random_field(&mut rng, 2, 1, 0.8, Activation::Logistic);
        let h = random_point(&mut rng, 3);
        let composed = |x: &[f64]| -> Vec<f64> {
            let g = field_tower(&field, 2, x, 1).unwrap();
            let f = field.column(2, x).unwrap();
            g.jacobian().unwrap().matvec(&f)
        };
        let star = star_apply(&field_tower(&field, 2, &h, 3).unwrap(), &field_tower(&field, 2, &h, 2).unwrap()).unwrap();
        let step = 1e-3;
        for a in 0..3 {
            let mut hp = h.clone();
            hp[a] += step;
            let mut hm = h.clone();
            hm[a] -= step;
            let (p, m) = (composed(&hp), composed(&hm));
            for j in 0..3 {
                assert!((star.deriv(1).get(&[j, a]) - (p[j] - m[j]) / (2.0 * step)).abs() < 1e-5);
            }
            for b in 0..3 {
                let at = |da: f64, db: f64| {
                    let mut x = h.clone();
                    x[a] += da;
                    x[b] += db;
                    composed(&x)
                };
                let (pp, pm, mp, mm) = (at(step, step), at(step, -step), at(-step, step), at(-step, -step));
                for j in 0..3 {
                    let fd = (pp[j] - pm[j] - mp[j] + mm[j]) / (4.0 * step * step);
                    assert!((star.deriv(2).get(&[j, a, b]) - fd).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn identity_closed_form_matches_towers() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let field = random_field(&mut rng, 2, 2, 1.0, Activation::Identity);
        let h = random_point(&mut rng, 4);
        let words = all_words(&field, &h, 4).unwrap();
        for k in 1..=4 {
            let mut word = vec![1usize; k];
            loop {
                let closed = iterated_star_closed_form(&field, &word, &h).unwrap();
                let tower = iterated_star_tower(&field, &word, &h).unwrap();
                let shared = words.get(&word).unwrap();
                for ((a, b), c) in closed.iter().zip(&tower).zip(shared) {
                    assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12, "{word:?}");
                }
                // next word in lexicographic order
                let mut pos = k;
                while pos > 0 && word[pos - 1] == 3 {
                    word[pos - 1] = 1;
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                word[pos - 1] += 1;
            }
        }
        assert_eq!(iterated_star(&field, &[2], &h).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(iterated_star(&field, &[4], &h).is_err());
        assert!(iterated_star(&field, &[], &h).is_err());
    }

    #[test]
    fn nested_finite_difference_triple() {
        // F^{i1} ⋆ (F^{i2} ⋆ F^{i3}) = J(J(F^{i3}) F^{i2}) F^{i1}
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let field = random_field(&mut rng, 1, 2, 1.0, Activation::Logistic);
        let h = random_point(&mut rng, 3);
        let step = 1e-4;
        let jac = |g: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], dir: &[f64]| -> Vec<f64> {
            let xp: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + step * b).collect();
            let xm: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a - step * b).collect();
            g(&xp).iter().zip(&g(&xm)).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        };
        for word in [[3usize, 3, 3], [1, 3, 3], [3, 2, 3], [2, 1, 3]] {
            let [i1, i2, i3] = word;
            let fr = &field;
            let col = |i: usize| move |x: &[f64]| fr.column(i, x).unwrap();
            let inner = |x: &[f64]| jac(&col(i3), x, &field.column(i2, x).unwrap());
            let fd = jac(&inner, &h, &field.column(i1, &h).unwrap());
            let tower = iterated_star_tower(&field, &word, &h).unwrap();
            for (a, b) in tower.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-4 * (1.0 + a.abs()), "{word:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn word_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let field = random_field(&mut rng, 2, 2, 0.3, Activation::Tanh);
        let words = all_words(&field, &random_point(&mut rng, 4), 5).unwrap();
        assert_eq!(words.evaluations(), 3 + 9 + 27 + 81 + 243);
        assert_eq!(words.level(5).len(), 243);
        assert_eq!(words.get(&[1, 2, 3, 1, 1]).unwrap(), &[0.0; 4]);
    }

    #[test]
    fn taylor_converges_to_cde_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = PathConfig::default();
        for act in [Activation::Identity, Activation::Logistic, Activation::Tanh] {
            let field = random_field(&mut rng, 2, 2, 0.05, act);
            let samples: Vec<Vec<f64>> = (0..6).map(|_| random_point(&mut rng, 2)).collect();
            let path = PiecewiseLinearPath::from_samples(&samples).unwrap().normalize(cfg).0;
            let aug = path.time_augment(cfg);
            let exact = integrate_cde(field.params(), &aug, cfg, Tolerance::new(1e-14, 1e-13).unwrap()).unwrap();
            let target = exact.final_value();
            let mut errors = Vec::new();
            for n in 0..=4 {
                let approx = taylor_expansion(&field, &aug, n, 1.0).unwrap();
                let err = math::norm(&approx.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
                errors.push(err);
                let tb = taylor_error_bound(&field, n);
                if n >= 1 && tb.radius_holds {
                    assert!(err <= tb.bound, "{act:?} N={n}: {err} > {}", tb.bound);
                }
            }
            for w in errors.windows(2) {
                assert!(w[1] < w[0], "{act:?}: {errors:?}");
            }
            assert_eq!(taylor_expansion(&field, &aug, 0, 1.0).unwrap(), [&field.params().h0[..], &[0.0, 0.0][..]].concat());
        }
    }

    #[test]
    fn lambda_bound_examples() {
        let p = RnnParams::zeros(2, 2, 1, Activation::Logistic);
        let field = CdeField::new(&p, PathConfig::default());
        assert!((lambda_bound(&field, 1) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let tb = taylor_error_bound(&field, 2);
        assert!(tb.radius_holds);
        assert!((tb.radius.unwrap() - 0.5 / (8.0 * 4.0 * 3.0)).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let field = random_field(&mut rng, 2, 2, 0.5, Activation::Identity);
        let w_op = 4.0 * field.w().op_norm();
        let l1 = lambda_bound(&field, 1);
        for k in 2..5 {
            assert!((lambda_bound(&field, k) - l1 * w_op.powi(k as i32 - 1)).abs() < 1e-12 * l1);
        }
        assert!(taylor_error_bound(&field, 3).radius.is_none());
    }
}
