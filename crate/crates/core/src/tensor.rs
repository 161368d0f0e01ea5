//! Dense complex tensors and the two primitives everything else is built
//! on: pairwise contraction and truncated singular-value decomposition.
//!
//! All tensors are stored row-major: the last axis varies fastest. Matrices
//! handed to the linear-algebra backend are views over that storage, so a
//! reshape never moves data.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use num_complex::Complex64 as C64;

use crate::error::{argument, Error, Result};

/// Relative gap below which neighbouring singular values count as one
/// degenerate multiplet.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Singular values this far below the largest are treated as numerical
/// noise and never trigger multiplet extension.
const MULTIPLET_NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {len} amplitudes, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); len] }
    }

    /// Builds a tensor by evaluating `f` on every multi-index in row-major
    /// order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(vec![n, n], |i| if i[0] == i[1] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders axes so that axis `k` of the result is axis `perm[k]` of
    /// `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return argument(format!("{perm:?} is not a permutation of {rank} axes"));
        }
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let data = permute_data(&self.data, &self.shape, perm);
        Ok(Self { shape, data })
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| x * factor).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|x| x.conj()).collect() }
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Largest absolute elementwise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// The tensor viewed as a matrix with the first `row_axes` axes fused
    /// into rows.
    pub fn matrix_dims(&self, row_axes: usize) -> (usize, usize) {
        let rows = self.shape[..row_axes].iter().product();
        let cols = self.shape[row_axes..].iter().product();
        (rows, cols)
    }
}

pub(crate) fn frobenius(data: &[C64]) -> f64 {
    data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn permute_data(data: &[C64], shape: &[usize], perm: &[usize]) -> Vec<C64> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for ax in (0..rank.saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    let new_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let new_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for _ in 0..data.len() {
        out.push(data[src]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            src += new_strides[ax];
            if idx[ax] < new_shape[ax] {
                break;
            }
            src -= new_strides[ax] * new_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// Row-major `m×k` times `k×n`.
pub(crate) fn matmul_rm(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    matmul_into(&mut out, a, b, m, k, n, false);
    out
}

/// Row-major `(k×m)^†` times `k×n`.
pub(crate) fn matmul_adj_rm(a: &[C64], b: &[C64], k: usize, m: usize, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    matmul_into(&mut out, a, b, m, k, n, true);
    out
}

fn matmul_into(out: &mut [C64], a: &[C64], b: &[C64], m: usize, k: usize, n: usize, adjoint_a: bool) {
    let dst = MatMut::from_row_major_slice_mut(out, m, n);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    if adjoint_a {
        let lhs = MatRef::from_row_major_slice(a, k, m).adjoint();
        matmul(dst, Accum::Replace, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
    } else {
        let lhs = MatRef::from_row_major_slice(a, m, k);
        matmul(dst, Accum::Replace, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
    }
}

/// Contracts `a` and `b` over the listed `(axis of a, axis of b)` pairs.
///
/// The result carries the uncontracted axes of `a` in their original order
/// followed by those of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axes: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in axes {
        if ia >= a.rank() || ib >= b.rank() {
            return argument(format!("axis pair ({ia}, {ib}) out of range"));
        }
        if std::mem::replace(&mut used_a[ia], true) || std::mem::replace(&mut used_b[ib], true) {
            return argument(format!("axis pair ({ia}, {ib}) repeats an axis"));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "contracted extents differ: a[{ia}]={} vs b[{ib}]={}",
                a.shape[ia], b.shape[ib]
            )));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&i| !used_b[i]).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(axes.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axes.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = axes.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();
    let a_mat = permute_data(&a.data, &a.shape, &perm_a);
    let b_mat = permute_data(&b.data, &b.shape, &perm_b);
    let data = matmul_rm(&a_mat, &b_mat, m, k, n);
    let shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).chain(free_b.iter().map(|&i| b.shape[i])).collect();
    // A full contraction yields a scalar, stored with shape [1].
    let shape = if shape.is_empty() { vec![1] } else { shape };
    DenseTensor::new(shape, data)
}

/// Truncation settings shared by every compression step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    /// Hard cap on kept singular values; `None` keeps every one above the
    /// cutoff.
    pub chi_max: Option<usize>,
    /// Values with `s_k < cutoff · s_0` are dropped.
    pub cutoff: f64,
    /// Never split a degenerate multiplet at the `chi_max` boundary; the
    /// kept count grows by at most the multiplet size instead.
    pub keep_multiplets: bool,
}

impl Truncation {
    pub fn exact() -> Self {
        Self { chi_max: None, cutoff: 0.0, keep_multiplets: false }
    }

    pub fn new(chi_max: Option<usize>, cutoff: f64) -> Self {
        Self { chi_max, cutoff, keep_multiplets: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max == Some(0) {
            return argument("chi_max must be positive");
        }
        if !(self.cutoff >= 0.0) {
            return argument(format!("cutoff must be non-negative, got {}", self.cutoff));
        }
        Ok(())
    }

    /// Number of singular values to keep out of the non-increasing `s`.
    pub fn kept(&self, s: &[f64]) -> usize {
        if s.is_empty() {
            return 0;
        }
        let s0 = s[0];
        let above = s.iter().take_while(|&&x| x >= self.cutoff * s0).count().max(1);
        let mut k = match self.chi_max {
            Some(chi) => above.min(chi),
            None => above,
        };
        if self.keep_multiplets && k < above {
            while k < above {
                let prev = s[k - 1];
                if prev <= MULTIPLET_NOISE_FLOOR * s0 || prev - s[k] > DEGENERACY_TOL * prev {
                    break;
                }
                k += 1;
            }
        }
        k
    }
}

/// `m ≈ U · diag(s) · Vh` with `U: m×k`, `Vh: k×n`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// Left isometry, shape `[rows, k]`.
    pub u: DenseTensor,
    /// Kept singular values, non-increasing.
    pub s: Vec<f64>,
    /// Conjugate transpose of the right isometry, shape `[k, cols]`.
    pub vh: DenseTensor,
    /// Sum of squared dropped singular values.
    pub discarded_weight: f64,
    /// Sum of all squared singular values (kept and dropped).
    pub total_weight: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Rebuilds `U · diag(s) · Vh`.
    pub fn reconstruct(&self) -> DenseTensor {
        let (m, k) = (self.u.shape[0], self.s.len());
        let n = self.vh.shape[1];
        let mut us = self.u.data.clone();
        for row in us.chunks_mut(k) {
            for (x, &s) in row.iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        DenseTensor { shape: vec![m, n], data: matmul_rm(&us, &self.vh.data, m, k, n) }
    }
}

/// Truncated SVD keeping at most `chi_max` values and dropping those below
/// `cutoff · s_0`. Multiplets are split exactly at `chi_max`; see
/// [`svd_truncate_with`] for the multiplet-preserving variant.
pub fn svd_truncate(m: &DenseTensor, chi_max: usize, cutoff: f64) -> Result<SvdFactors> {
    let trunc = Truncation { chi_max: Some(chi_max), cutoff, keep_multiplets: false };
    svd_truncate_with(m, &trunc)
}

pub fn svd_truncate_with(m: &DenseTensor, trunc: &Truncation) -> Result<SvdFactors> {
    if m.rank() != 2 {
        return Err(Error::Dimension(format!("svd needs a matrix, got shape {:?}", m.shape)));
    }
    svd_raw(&m.data, m.shape[0], m.shape[1], trunc)
}

/// Singular values with `U` (`rows×r`) and `V` (`cols×r`) row-major,
/// `r = min(rows, cols)`; `None` when faer fails or returns non-finite
/// factors.
fn thin_svd_checked(data: &[C64], rows: usize, cols: usize) -> Option<(Vec<f64>, Vec<C64>, Vec<C64>)> {
    let svd = MatRef::from_row_major_slice(data, rows, cols).thin_svd().ok()?;
    let full = rows.min(cols);
    let s: Vec<f64> = (0..full).map(|i| svd.S().column_vector()[i].re.max(0.0)).collect();
    let (um, vm) = (svd.U(), svd.V());
    let u: Vec<C64> = (0..rows).flat_map(|i| (0..full).map(move |j| um[(i, j)])).collect();
    let v: Vec<C64> = (0..cols).flat_map(|i| (0..full).map(move |j| vm[(i, j)])).collect();
    let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
    (s.iter().all(|x| x.is_finite()) && u.iter().all(finite) && v.iter().all(finite)).then_some((s, u, v))
}

/// faer occasionally returns NaN vectors for perfectly ordinary input. A
/// rescaled copy (or the adjoint) takes a different path through the
/// bidiagonalization and has always worked in practice.
fn robust_thin_svd(data: &[C64], rows: usize, cols: usize) -> Option<(Vec<f64>, Vec<C64>, Vec<C64>)> {
    if let Some(f) = thin_svd_checked(data, rows, cols) {
        return Some(f);
    }
    for scale in [3.0, 0.3, 7.0] {
        let scaled: Vec<C64> = data.iter().map(|z| z * scale).collect();
        if let Some((s, u, v)) = thin_svd_checked(&scaled, rows, cols) {
            return Some((s.into_iter().map(|x| x / scale).collect(), u, v));
        }
    }
    thin_svd_checked(&adjoint_rm(data, rows, cols), cols, rows).map(|(s, u, v)| (s, v, u))
}

pub(crate) fn svd_raw(data: &[C64], rows: usize, cols: usize, trunc: &Truncation) -> Result<SvdFactors> {
    trunc.validate()?;
    if !data.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::NumericalInstability("non-finite amplitudes entering svd".into()));
    }
    let (raw, u_all, v_all) = robust_thin_svd(data, rows, cols)
        .ok_or_else(|| Error::NumericalInstability(format!("svd of a {rows}x{cols} matrix failed")))?;
    let full = rows.min(cols);
    // faer does not always return deflated values in order
    let mut order: Vec<usize> = (0..full).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let s_all: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let k = trunc.kept(&s_all);
    let total_weight: f64 = s_all.iter().map(|x| x * x).sum();
    let discarded_weight: f64 = s_all[k..].iter().map(|x| x * x).sum();
    let mut u = Vec::with_capacity(rows * k);
    for i in 0..rows {
        for &j in &order[..k] {
            u.push(u_all[i * full + j]);
        }
    }
    let mut vh = Vec::with_capacity(k * cols);
    for &j in &order[..k] {
        for i in 0..cols {
            vh.push(v_all[i * full + j].conj());
        }
    }
    Ok(SvdFactors {
        u: DenseTensor { shape: vec![rows, k], data: u },
        s: s_all[..k].to_vec(),
        vh: DenseTensor { shape: vec![k, cols], data: vh },
        discarded_weight,
        total_weight,
    })
}

/// Thin QR of a row-major `rows×cols` matrix with the diagonal of `R` made
/// real and non-negative, so the factorization of an isometry is `(Q, 1)`.
pub(crate) fn qr_positive(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>, usize) {
    let view = MatRef::from_row_major_slice(data, rows, cols);
    let qr = view.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let k = rows.min(cols);
    let mut phases = vec![C64::new(1.0, 0.0); k];
    for (i, p) in phases.iter_mut().enumerate() {
        let d = r[(i, i)];
        let n = d.norm();
        if n > 0.0 {
            *p = d / n;
        }
    }
    let mut q_out = Vec::with_capacity(rows * k);
    for i in 0..rows {
        for j in 0..k {
            q_out.push(q[(i, j)] * phases[j]);
        }
    }
    let mut r_out = Vec::with_capacity(k * cols);
    for i in 0..k {
        for j in 0..cols {
            let v = if j < i { C64::new(0.0, 0.0) } else { r[(i, j)] };
            r_out.push(phases[i].conj() * v);
        }
    }
    (q_out, r_out, k)
}

/// Conjugate transpose of a row-major `rows×cols` matrix.
pub(crate) fn adjoint_rm(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(data[i * cols + j].conj());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn sigma_z() -> DenseTensor {
        DenseTensor::new(vec![2, 2], vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap()
    }

    #[test]
    fn identity_leaves_vector_alone() {
        let v = DenseTensor::new(vec![2], vec![c(0.3, -1.0), c(2.0, 0.5)]).unwrap();
        let out = contract(&DenseTensor::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn sigma_z_squares_to_identity() {
        let out = contract(&sigma_z(), &sigma_z(), &[(1, 0)]).unwrap();
        assert_eq!(out, DenseTensor::identity(2));
    }

    #[test]
    fn matmul_agrees_with_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(vec![3, 4], &mut rng);
        let b = random(vec![4, 5], &mut rng);
        let out = contract(&a, &b, &[(1, 0)]).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                let mut acc = c(0.0, 0.0);
                for k in 0..4 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert!((out.get(&[i, j]) - acc).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn multi_axis_contraction_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(vec![2, 3, 4], &mut rng);
        let b = random(vec![4, 5, 2], &mut rng);
        let out = contract(&a, &b, &[(2, 0), (0, 2)]).unwrap();
        assert_eq!(out.shape(), &[3, 5]);
        for j in 0..3 {
            for l in 0..5 {
                let mut acc = c(0.0, 0.0);
                for i in 0..2 {
                    for k in 0..4 {
                        acc += a.get(&[i, j, k]) * b.get(&[k, l, i]);
                    }
                }
                assert!((out.get(&[j, l]) - acc).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn mismatched_extents_are_rejected() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 3]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Dimension(_))));
    }

    #[test]
    fn shape_and_data_must_agree() {
        assert!(DenseTensor::new(vec![2, 2], vec![c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn permute_matches_index_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(vec![2, 3, 4], &mut rng);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), a.get(&[i, j, k]));
                }
            }
        }
        assert!(a.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn rank_one_keeps_one_value() {
        let u = [c(1.0, 0.5), c(-0.3, 2.0), c(0.7, 0.0)];
        let v = [c(0.2, -1.0), c(1.0, 1.0)];
        let m = DenseTensor::from_fn(vec![3, 2], |i| u[i[0]] * v[i[1]]);
        let f = svd_truncate(&m, 8, 1e-12).unwrap();
        assert_eq!(f.rank(), 1);
    }

    #[test]
    fn identity_truncates_to_two_with_weight_two() {
        let f = svd_truncate(&DenseTensor::identity(4), 2, 0.0).unwrap();
        assert_eq!(f.rank(), 2);
        assert!((f.discarded_weight - 2.0).abs() < 1e-12);
    }

    #[test]
    fn multiplet_mode_keeps_the_degenerate_block() {
        let trunc = Truncation { chi_max: Some(2), cutoff: 0.0, keep_multiplets: true };
        let f = svd_truncate_with(&DenseTensor::identity(4), &trunc).unwrap();
        assert_eq!(f.rank(), 4);
        let spectrum = [3.0, 2.0, 1.0, 1.0, 1.0, 0.5];
        assert_eq!(trunc.kept(&spectrum), 2);
        let t3 = Truncation { chi_max: Some(3), ..trunc };
        assert_eq!(t3.kept(&spectrum), 5);
    }

    #[test]
    fn zero_chi_is_an_argument_error() {
        assert!(matches!(svd_truncate(&DenseTensor::identity(2), 0, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn full_svd_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random(vec![16, 16], &mut rng);
        let f = svd_truncate(&m, 16, 0.0).unwrap();
        assert!(f.reconstruct().max_abs_diff(&m).unwrap() < 1e-12);
        assert!(f.s.windows(2).all(|w| w[0] >= w[1]) && f.s.iter().all(|&x| x >= 0.0));
        let utu = matmul_adj_rm(f.u.data(), f.u.data(), 16, 16, 16);
        let vvh = matmul_rm(f.vh.data(), &adjoint_rm(f.vh.data(), 16, 16), 16, 16, 16);
        let id = DenseTensor::identity(16);
        for prod in [utu, vvh] {
            let t = DenseTensor::new(vec![16, 16], prod).unwrap();
            assert!(t.max_abs_diff(&id).unwrap() < 1e-12);
        }
    }

    #[test]
    fn truncation_error_is_sqrt_of_discarded_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random(vec![12, 9], &mut rng);
        let f = svd_truncate(&m, 4, 0.0).unwrap();
        let diff: Vec<C64> = f.reconstruct().data().iter().zip(m.data()).map(|(a, b)| a - b).collect();
        assert!((frobenius(&diff) - f.discarded_weight.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn qr_of_isometry_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random(vec![8, 3], &mut rng);
        let (q, _, k) = qr_positive(m.data(), 8, 3);
        let (q2, r2, _) = qr_positive(&q, 8, k);
        let diff: f64 = q.iter().zip(&q2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-13);
        let id = DenseTensor::identity(3);
        assert!(DenseTensor::new(vec![3, 3], r2).unwrap().max_abs_diff(&id).unwrap() < 1e-13);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn contraction_is_bilinear(seed in 0u64..1000, re in -2.0f64..2.0, im in -2.0f64..2.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(vec![3, 4, 2], &mut rng);
                let b = random(vec![2, 4], &mut rng);
                let alpha = c(re, im);
                let lhs = contract(&a.scale(alpha), &b, &[(2, 0), (1, 1)]).unwrap();
                let rhs = contract(&a, &b, &[(2, 0), (1, 1)]).unwrap().scale(alpha);
                prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-13);
            }

            #[test]
            fn permute_and_reshape_preserve_norm(seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random(vec![2, 3, 5], &mut rng);
                let p = a.permute(&[1, 2, 0]).unwrap();
                prop_assert_eq!(p.norm().to_bits(), p.clone().reshape(vec![15, 2]).unwrap().norm().to_bits());
                prop_assert!((p.norm() - a.norm()).abs() <= 1e-15 * a.norm());
            }

            #[test]
            fn untruncated_svd_reconstructs(seed in 0u64..1000, rows in 1usize..10, cols in 1usize..10) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = random(vec![rows, cols], &mut rng);
                let f = svd_truncate(&m, rows.max(cols), 0.0).unwrap();
                prop_assert!(f.reconstruct().max_abs_diff(&m).unwrap() < 1e-12);
            }
        }
    }
}
