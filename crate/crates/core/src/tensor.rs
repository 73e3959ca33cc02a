//! Dense tensors over `ℝ^d` and truncated graded sequences of them.
//!
//! A tensor of order `k` over `ℝ^d` is stored as a flat row-major array of
//! length `d^k` (last index fastest). Axes are numbered from 1 in the public
//! API, so `tensor_dot(a, b, 2, 1)` on two matrices is the matrix product.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// An element of `(ℝ^dim)^{⊗order}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

fn checked_len(dim: usize, order: usize) -> usize {
    dim.pow(order as u32)
}

impl DenseTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        assert!(dim > 0, "tensor dimension must be positive");
        DenseTensor { dim, order, data: vec![0.0; checked_len(dim, order)] }
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        assert!(dim > 0, "tensor dimension must be positive");
        DenseTensor { dim, order: 0, data: vec![value] }
    }

    /// Order-1 tensor holding `v`.
    pub fn vector(v: &[f64]) -> Self {
        assert!(!v.is_empty(), "tensor dimension must be positive");
        DenseTensor { dim: v.len(), order: 1, data: v.to_vec() }
    }

    pub fn from_vec(dim: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be positive"));
        }
        if data.len() != checked_len(dim, order) {
            return Err(Error::ShapeMismatch("tensor data length must equal dim^order"));
        }
        Ok(DenseTensor { dim, order, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a 0-indexed multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order);
        index.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    /// Entry at a 0-indexed multi-index.
    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let at = self.offset(index);
        self.data[at] = value;
    }

    /// Frobenius norm: the Hilbert norm of `(ℝ^d)^{⊗k}`.
    pub fn norm(&self) -> f64 {
        math::norm(&self.data)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, other: &DenseTensor, factor: f64) -> Result<()> {
        self.same_shape(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    fn same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if self.order != other.order {
            return Err(Error::ShapeMismatch("tensor orders differ"));
        }
        Ok(())
    }
}

/// Outer product: `result[(i..),(j..)] = a[(i..)] * b[(j..)]`.
pub fn tensor_product(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    let mut data = Vec::with_capacity(a.data.len() * b.data.len());
    for &x in &a.data {
        data.extend(b.data.iter().map(|&y| x * y));
    }
    Ok(DenseTensor { dim: a.dim, order: a.order + b.order, data })
}

/// Reorders axes so that `result[(i_1..i_k)] = a[(i_{perm(1)}..i_{perm(k)})]`.
///
/// `perm` is 1-indexed. With `perm = [2, 1]` this is the matrix transpose.
pub fn permute_axes(a: &DenseTensor, perm: &[usize]) -> Result<DenseTensor> {
    let k = a.order;
    if perm.len() != k {
        return Err(Error::InvalidPermutation);
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p == 0 || p > k || seen[p - 1] {
            return Err(Error::InvalidPermutation);
        }
        seen[p - 1] = true;
    }
    if k == 0 {
        return Ok(a.clone());
    }
    // strides[t] is the stride of source axis t (0-indexed)
    let mut strides = vec![1usize; k];
    for t in (0..k.saturating_sub(1)).rev() {
        strides[t] = strides[t + 1] * a.dim;
    }
    // Source axis t reads the result index at position perm[t] - 1.
    let mut out = Vec::with_capacity(a.data.len());
    let mut index = vec![0usize; k];
    for _ in 0..a.data.len() {
        let src: usize = (0..k).map(|t| index[perm[t] - 1] * strides[t]).sum();
        out.push(a.data[src]);
        increment(&mut index, a.dim);
    }
    Ok(DenseTensor { dim: a.dim, order: k, data: out })
}

/// Tensor dot product along the 1-indexed axes `p` of `a` and `q` of `b`.
///
/// The contracted index is summed; the remaining axes of `a` come first, in
/// order, followed by the remaining axes of `b`.
pub fn tensor_dot(a: &DenseTensor, b: &DenseTensor, p: usize, q: usize) -> Result<DenseTensor> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    if p == 0 || p > a.order {
        return Err(Error::AxisOutOfRange { axis: p, order: a.order });
    }
    if q == 0 || q > b.order {
        return Err(Error::AxisOutOfRange { axis: q, order: b.order });
    }
    let d = a.dim;
    let (k, l) = (a.order, b.order);
    // Move the contracted axis of `a` last and that of `b` first, then it is
    // a plain (d^{k-1} x d) * (d x d^{l-1}) matrix product.
    let perm_a: Vec<usize> = (1..p).chain(core::iter::once(k)).chain(p..k).collect();
    let perm_b: Vec<usize> = (2..=q).chain(core::iter::once(1)).chain(q + 1..=l).collect();
    let a_mat = permute_axes(a, &perm_a)?;
    let b_mat = permute_axes(b, &perm_b)?;
    let rows = a_mat.data.len() / d;
    let cols = b_mat.data.len() / d;
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        let a_row = &a_mat.data[r * d..(r + 1) * d];
        let out_row = &mut out[r * cols..(r + 1) * cols];
        for (j, &x) in a_row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let b_row = &b_mat.data[j * cols..(j + 1) * cols];
            out_row.iter_mut().zip(b_row).for_each(|(o, &y)| *o += x * y);
        }
    }
    Ok(DenseTensor { dim: d, order: k + l - 2, data: out })
}

/// Odometer increment of a 0-indexed multi-index, last index fastest.
pub(crate) fn increment(index: &mut [usize], dim: usize) {
    for slot in index.iter_mut().rev() {
        *slot += 1;
        if *slot < dim {
            return;
        }
        *slot = 0;
    }
}

/// A truncated element `(a_0, a_1, ..., a_N)` of the tensor Hilbert space,
/// with `a_k` of order `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedTensorSeq {
    dim: usize,
    levels: Vec<DenseTensor>,
}

impl GradedTensorSeq {
    pub fn new(dim: usize, levels: Vec<DenseTensor>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("a graded sequence needs level 0"));
        }
        for (k, level) in levels.iter().enumerate() {
            if level.dim != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: level.dim });
            }
            if level.order != k {
                return Err(Error::ShapeMismatch("level k must have order k"));
            }
        }
        Ok(GradedTensorSeq { dim, levels })
    }

    pub fn zeros(dim: usize, depth: usize) -> Self {
        GradedTensorSeq { dim, levels: (0..=depth).map(|k| DenseTensor::zeros(dim, k)).collect() }
    }

    /// `(1, 0, 0, ...)`, the signature of a constant path.
    pub fn unit(dim: usize, depth: usize) -> Self {
        let mut seq = Self::zeros(dim, depth);
        seq.levels[0].data[0] = 1.0;
        seq
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &DenseTensor {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut DenseTensor {
        &mut self.levels[k]
    }

    pub fn levels(&self) -> &[DenseTensor] {
        &self.levels
    }

    /// Inner product over the shared prefix of levels.
    pub fn inner(&self, other: &GradedTensorSeq) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut acc = 0.0;
        for (a, b) in self.levels.iter().zip(&other.levels) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.levels.iter().map(|l| l.data.iter().map(|x| x * x).sum::<f64>()).sum())
    }

    /// Componentwise `self - other` over the shared prefix.
    pub fn sub(&self, other: &GradedTensorSeq) -> Result<GradedTensorSeq> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let mut levels = Vec::new();
        for (a, b) in self.levels.iter().zip(&other.levels) {
            let mut diff = a.clone();
            diff.add_scaled(b, -1.0)?;
            levels.push(diff);
        }
        Ok(GradedTensorSeq { dim: self.dim, levels })
    }

    /// Drops every level above `depth`.
    pub fn truncated(&self, depth: usize) -> GradedTensorSeq {
        let keep = (depth + 1).min(self.levels.len());
        GradedTensorSeq { dim: self.dim, levels: self.levels[..keep].to_vec() }
    }
}

/// `⟨a, b⟩ = Σ_k ⟨a_k, b_k⟩` over `min(depth_a, depth_b)` levels.
pub fn seq_inner(a: &GradedTensorSeq, b: &GradedTensorSeq) -> Result<f64> {
    a.inner(b)
}

pub fn seq_norm(a: &GradedTensorSeq) -> f64 {
    a.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, dim: usize, order: usize) -> DenseTensor {
        let data = (0..dim.pow(order as u32)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseTensor::from_vec(dim, order, data).unwrap()
    }

    fn all_indices(dim: usize, order: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut idx = vec![0; order];
        for _ in 0..dim.pow(order as u32) {
            out.push(idx.clone());
            increment(&mut idx, dim);
        }
        out
    }

    // Entrywise definition, written independently of the permute/matmul route.
    fn naive_dot(a: &DenseTensor, b: &DenseTensor, p: usize, q: usize) -> DenseTensor {
        let d = a.dim();
        let mut out = DenseTensor::zeros(d, a.order() + b.order() - 2);
        for idx in all_indices(d, out.order()) {
            let (is, js) = idx.split_at(a.order() - 1);
            let mut acc = 0.0;
            for j in 0..d {
                let mut ai = is.to_vec();
                ai.insert(p - 1, j);
                let mut bi = js.to_vec();
                bi.insert(q - 1, j);
                acc += a.get(&ai) * b.get(&bi);
            }
            out.set(&idx, acc);
        }
        out
    }

    #[test]
    fn outer_product_of_vectors() {
        let a = DenseTensor::vector(&[1.0, 2.0]);
        let t = tensor_product(&a, &a).unwrap();
        assert_eq!(t.order(), 2);
        assert_eq!(t.data(), &[1.0, 2.0, 2.0, 4.0]);

        let e1 = DenseTensor::vector(&[1.0, 0.0]);
        let e2 = DenseTensor::vector(&[0.0, 1.0]);
        let t = tensor_product(&e1, &e2).unwrap();
        assert_eq!(t.get(&[0, 0]), 0.0);
        assert_eq!(t.get(&[0, 1]), 1.0);
        assert_eq!(t.get(&[1, 0]), 0.0);
        assert_eq!(t.get(&[1, 1]), 0.0);
    }

    #[test]
    fn scalar_times_tensor() {
        let three = DenseTensor::scalar(2, 3.0);
        let b = DenseTensor::from_vec(2, 2, vec![1.0, -2.0, 0.5, 4.0]).unwrap();
        let t = tensor_product(&three, &b).unwrap();
        assert_eq!(t, b.clone().scaled(3.0));
    }

    #[test]
    fn product_dimension_mismatch() {
        let a = DenseTensor::vector(&[1.0, 2.0]);
        let b = DenseTensor::vector(&[1.0, 2.0, 3.0]);
        assert!(matches!(tensor_product(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(DenseTensor::from_vec(2, 3, vec![0.0; 7]).is_err());
        assert!(DenseTensor::from_vec(2, 0, vec![1.0]).is_ok());
    }

    #[test]
    fn dot_of_matrices_is_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, 3, 2);
        let b = random_tensor(&mut rng, 3, 2);
        let c = tensor_dot(&a, &b, 2, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert_eq!(c.get(&[i, j]), acc);
            }
        }
    }

    #[test]
    fn dot_of_vectors_is_inner_product() {
        let u = DenseTensor::vector(&[1.0, 2.0, 3.0]);
        let v = DenseTensor::vector(&[-1.0, 0.5, 2.0]);
        let s = tensor_dot(&u, &v, 1, 1).unwrap();
        assert_eq!(s.order(), 0);
        assert_eq!(s.data()[0], 6.0);
    }

    #[test]
    fn dot_matches_naive_contraction_for_every_axis_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&mut rng, 2, 3);
        let b = random_tensor(&mut rng, 2, 2);
        for p in 1..=3 {
            for q in 1..=2 {
                let fast = tensor_dot(&a, &b, p, q).unwrap();
                let slow = naive_dot(&a, &b, p, q);
                for (x, y) in fast.data().iter().zip(slow.data()) {
                    assert!((x - y).abs() < 1e-14, "p={p} q={q}");
                }
            }
        }
    }

    #[test]
    fn dot_axis_errors() {
        let a = DenseTensor::zeros(2, 2);
        assert!(matches!(tensor_dot(&a, &a, 3, 1), Err(Error::AxisOutOfRange { axis: 3, .. })));
        assert!(matches!(tensor_dot(&a, &a, 1, 0), Err(Error::AxisOutOfRange { axis: 0, .. })));
        let s = DenseTensor::scalar(2, 1.0);
        assert!(tensor_dot(&s, &a, 1, 1).is_err());
    }

    #[test]
    fn transpose_via_permutation() {
        let a = DenseTensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = permute_axes(&a, &[2, 1]).unwrap();
        assert_eq!(t.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(permute_axes(&a, &[1, 2]).unwrap(), a);
    }

    #[test]
    fn cyclic_permutation_has_order_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, 3, 3);
        let cyc = [2, 3, 1];
        let once = permute_axes(&a, &cyc).unwrap();
        assert_ne!(once, a);
        let thrice = permute_axes(&permute_axes(&once, &cyc).unwrap(), &cyc).unwrap();
        assert_eq!(thrice, a);
    }

    #[test]
    fn permutation_semantics_entrywise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tensor(&mut rng, 2, 3);
        let perm = [3, 1, 2];
        let p = permute_axes(&a, &perm).unwrap();
        for idx in all_indices(2, 3) {
            let src = [idx[perm[0] - 1], idx[perm[1] - 1], idx[perm[2] - 1]];
            assert_eq!(p.get(&idx), a.get(&src));
        }
    }

    #[test]
    fn invalid_permutations_rejected() {
        let a = DenseTensor::zeros(2, 3);
        assert_eq!(permute_axes(&a, &[1, 1, 2]), Err(Error::InvalidPermutation));
        assert_eq!(permute_axes(&a, &[1, 2]), Err(Error::InvalidPermutation));
        assert_eq!(permute_axes(&a, &[0, 1, 2]), Err(Error::InvalidPermutation));
        assert_eq!(permute_axes(&a, &[1, 2, 4]), Err(Error::InvalidPermutation));
    }

    #[test]
    fn seq_inner_examples() {
        let one = GradedTensorSeq::unit(2, 0);
        assert_eq!(seq_inner(&one, &one).unwrap(), 1.0);

        let u = [0.3, -1.2];
        let v = [2.0, 0.5];
        let mut a = GradedTensorSeq::unit(2, 3);
        let mut b = GradedTensorSeq::unit(2, 3);
        a.level_mut(1).data_mut().copy_from_slice(&u);
        b.level_mut(1).data_mut().copy_from_slice(&v);
        let expected = 1.0 + u[0] * v[0] + u[1] * v[1];
        assert!((seq_inner(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn mixed_depth_inner_uses_shared_prefix() {
        let mut a = GradedTensorSeq::unit(2, 1);
        a.level_mut(1).data_mut().copy_from_slice(&[1.0, 1.0]);
        let mut b = GradedTensorSeq::unit(2, 3);
        b.level_mut(1).data_mut().copy_from_slice(&[2.0, 3.0]);
        b.level_mut(2).data_mut().fill(100.0);
        assert_eq!(seq_inner(&a, &b).unwrap(), 6.0);
        assert_eq!(seq_inner(&b, &a).unwrap(), 6.0);
    }

    #[test]
    fn graded_seq_validation() {
        let bad = vec![DenseTensor::scalar(2, 1.0), DenseTensor::zeros(2, 2)];
        assert!(GradedTensorSeq::new(2, bad).is_err());
        let other_dim = vec![DenseTensor::scalar(2, 1.0), DenseTensor::zeros(3, 1)];
        assert!(GradedTensorSeq::new(2, other_dim).is_err());
        let a = GradedTensorSeq::unit(2, 2);
        let b = GradedTensorSeq::unit(3, 2);
        assert!(seq_inner(&a, &b).is_err());
    }

    fn arb_tensor(dim: usize, order: usize) -> impl Strategy<Value = DenseTensor> {
        prop::collection::vec(-2.0f64..2.0, dim.pow(order as u32))
            .prop_map(move |data| DenseTensor::from_vec(dim, order, data).unwrap())
    }

    fn arb_dot_case() -> impl Strategy<Value = (DenseTensor, DenseTensor, usize, usize)> {
        (2usize..=3, 1usize..=4, 1usize..=4).prop_flat_map(|(d, k, l)| {
            (arb_tensor(d, k), arb_tensor(d, l), 1..=k, 1..=l)
        })
    }

    fn arb_seq(dim: usize, depth: usize) -> impl Strategy<Value = GradedTensorSeq> {
        let levels: Vec<_> = (0..=depth).map(|k| arb_tensor(dim, k)).collect();
        levels.prop_map(move |levels| GradedTensorSeq::new(dim, levels).unwrap())
    }

    proptest! {
        #[test]
        fn dot_norm_is_submultiplicative((a, b, p, q) in arb_dot_case()) {
            let c = tensor_dot(&a, &b, p, q).unwrap();
            prop_assert!(c.norm() <= a.norm() * b.norm() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn permutation_preserves_norm(a in arb_tensor(3, 3), shift in 0usize..3) {
            let perm: Vec<usize> = (0..3).map(|t| (t + shift) % 3 + 1).collect();
            let p = permute_axes(&a, &perm).unwrap();
            // same multiset of entries, hence the same norm up to summation order
            let mut sp = p.data().to_vec();
            sp.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut sa = a.data().to_vec();
            sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assert_eq!(sp, sa);
            prop_assert!((p.norm() - a.norm()).abs() <= 1e-12 * a.norm().max(1.0));
        }

        #[test]
        fn seq_inner_is_symmetric_bilinear_positive(
            a in arb_seq(2, 3), b in arb_seq(2, 3), c in arb_seq(2, 3), s in -3.0f64..3.0
        ) {
            let ab = seq_inner(&a, &b).unwrap();
            prop_assert!((ab - seq_inner(&b, &a).unwrap()).abs() < 1e-12);
            // linearity in the first slot
            let mut lin = a.clone();
            for k in 0..=3 {
                lin.level_mut(k).add_scaled(c.level(k), s).unwrap();
            }
            let lhs = seq_inner(&lin, &b).unwrap();
            let rhs = ab + s * seq_inner(&c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
            prop_assert!(seq_inner(&a, &a).unwrap() >= 0.0);
            prop_assert!(ab.abs() <= seq_norm(&a) * seq_norm(&b) + 1e-12);
        }
    }

    #[test]
    fn positive_definite_on_nonzero() {
        let mut a = GradedTensorSeq::zeros(3, 2);
        assert_eq!(seq_norm(&a), 0.0);
        a.level_mut(2).data_mut()[5] = 1e-3;
        assert!(seq_inner(&a, &a).unwrap() > 0.0);
    }
}
