//! Dense transfer matrices built trajectory by trajectory.
//!
//! Nothing here goes through the MPS/MPO code: weights come from explicit
//! products of 2×2 matrices along each forward and backward path.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use super::{decode, FoldedDenseIM};
use crate::error::{argument, Error, Result};
use crate::influence::BoundaryKind;
use crate::model::{floquet_kernel, mat_mul, spin, unfold, BranchOps, LocalKernel, Mat2, ModelSpec, SiteRole};
use crate::mps::PHYS;
use crate::tensor::{matmul_rm, DenseTensor};

/// Largest `T` accepted by the dense constructions.
pub const MAX_DENSE_T: usize = 6;

fn projected_phase(kernel: &LocalKernel, s: usize) -> Mat2 {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    m[s][s] = C64::from_polar(1.0, -kernel.h_angle * spin(s));
    m
}

/// `Tr[X ρ Y†]` where `X` (`Y`) is the forward (backward) path operator
/// projected onto the trajectory.
pub fn trajectory_weight(kernel: &LocalKernel, ops: &BranchOps, rho0: &Mat2, traj: &[usize]) -> C64 {
    let t = traj.len();
    let mut x = ops.a[0];
    let mut y = ops.b[0];
    for (tau, &a) in traj.iter().enumerate() {
        let (s, sb) = unfold(a);
        let step_f = mat_mul(&kernel.post, &mat_mul(&projected_phase(kernel, s), &kernel.pre));
        let step_b = mat_mul(&kernel.post, &mat_mul(&projected_phase(kernel, sb), &kernel.pre));
        x = mat_mul(&ops.a[tau + 1], &mat_mul(&step_f, &x));
        y = mat_mul(&ops.b[tau + 1], &mat_mul(&step_b, &y));
    }
    debug_assert_eq!(ops.a.len(), t + 1);
    let xr = mat_mul(&x, rho0);
    // Tr[xr · y†] = Σ_ij xr[i][j] conj(y[i][j])
    (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| xr[i][j] * y[i][j].conj()).sum()
}

fn check_t(t: usize) -> Result<()> {
    if t == 0 || t > MAX_DENSE_T {
        return Err(Error::Resource(format!("dense transfer matrices support 1..={MAX_DENSE_T} steps, got {t}")));
    }
    Ok(())
}

/// `W(b)` for every trajectory of a bulk environment spin.
pub fn environment_weight_dense(spec: &ModelSpec) -> Result<Vec<C64>> {
    check_t(spec.t)?;
    let kernel = floquet_kernel(&spec.homogeneous(), SiteRole::Bulk)?;
    let ops = BranchOps::identity(spec.t);
    let mut traj = vec![0; spec.t];
    Ok((0..PHYS.pow(spec.t as u32))
        .map(|b| {
            decode(b, spec.t, &mut traj);
            trajectory_weight(&kernel, &ops, &kernel.rho0, &traj)
        })
        .collect())
}

/// `Σ_τ (σ_τ s_τ − σ̄_τ s̄_τ)` for output `a` and input `b`.
fn coupling_sum(a: &[usize], b: &[usize]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let (s, sb) = unfold(x);
            let (e, eb) = unfold(y);
            spin(s) * spin(e) - spin(sb) * spin(eb)
        })
        .sum()
}

fn slice_from(t: usize, weight: &[C64], kernel_fn: impl Fn(&[usize], &[usize]) -> C64) -> Result<DenseTensor> {
    let n = PHYS.pow(t as u32);
    let mut ta = vec![0; t];
    let mut tb = vec![0; t];
    let mut data = Vec::with_capacity(n * n);
    for a in 0..n {
        decode(a, t, &mut ta);
        for (b, w) in weight.iter().enumerate() {
            decode(b, t, &mut tb);
            data.push(kernel_fn(&ta, &tb) * w);
        }
    }
    DenseTensor::new(vec![n, n], data)
}

/// Dense dual transfer matrix with the given coupling.
pub fn dense_slice(spec: &ModelSpec, coupling: f64) -> Result<DenseTensor> {
    let w = environment_weight_dense(spec)?;
    slice_from(spec.t, &w, |a, b| C64::from_polar(1.0, -coupling * coupling_sum(a, b)))
}

/// Exact disorder average: the phase averages to `δ(Σ = 0)`.
pub fn dense_disorder_slice(spec: &ModelSpec) -> Result<DenseTensor> {
    let w = environment_weight_dense(spec)?;
    slice_from(spec.t, &w, |a, b| C64::new(if coupling_sum(a, b) == 0.0 { 1.0 } else { 0.0 }, 0.0))
}

/// Trapezoid average of [`dense_slice`] over `J ∈ [0, 2π]` with `n` nodes.
pub fn quadrature_disorder_slice(spec: &ModelSpec, n: usize) -> Result<DenseTensor> {
    if n == 0 {
        return argument("quadrature needs at least one node");
    }
    let mut acc: Option<DenseTensor> = None;
    for k in 0..n {
        let s = dense_slice(spec, TAU * k as f64 / n as f64)?;
        acc = Some(match acc {
            None => s,
            Some(a) => {
                let data = a.data().iter().zip(s.data()).map(|(x, y)| x + y).collect();
                DenseTensor::new(a.shape().to_vec(), data)?
            }
        });
    }
    Ok(acc.expect("n ≥ 1").scale(C64::new(1.0 / n as f64, 0.0)))
}

fn apply(m: &DenseTensor, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    matmul_rm(m.data(), v, n, n, 1)
}

/// The self-consistent IM by `T` dense applications of the slice to the
/// boundary vector; the result must be unchanged by one more application.
pub fn dense_transfer_fixed_point(spec: &ModelSpec, boundary: BoundaryKind) -> Result<FoldedDenseIM> {
    check_t(spec.t)?;
    let slice = if spec.disorder.is_some() { dense_disorder_slice(spec)? } else { dense_slice(spec, spec.j_eff())? };
    let b = boundary.folded_vector();
    let mut v = FoldedDenseIM::from_fn(spec.t, |traj| traj.iter().map(|&a| b[a]).product())?.amplitudes;
    for _ in 0..spec.t {
        v = apply(&slice, &v);
    }
    let again = apply(&slice, &v);
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let diff = v.iter().zip(&again).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
    if diff > 1e-10 {
        return Err(Error::NumericalInstability(format!("dense slice is not idempotent after T steps ({diff:.2e})")));
    }
    FoldedDenseIM::new(spec.t, v)
}

/// IM seen by an impurity: one slice with coupling `β·J` on the
/// homogeneous fixed point.
pub fn dense_impurity_im(spec: &ModelSpec, boundary: BoundaryKind) -> Result<FoldedDenseIM> {
    let beta = spec.impurity.map(|i| i.beta).ok_or_else(|| Error::Argument("spec has no impurity".into()))?;
    let base = dense_transfer_fixed_point(&spec.homogeneous(), boundary)?;
    let slice = dense_slice(spec, beta * spec.j_eff())?;
    FoldedDenseIM::new(spec.t, apply(&slice, &base.amplitudes))
}

/// `Σ_a w_0(a) I_L(a) I_R(a)` with site 0's weight built from explicit
/// path products.
pub fn dense_network_value(
    kernel: &LocalKernel,
    ops: &BranchOps,
    rho0: Option<&Mat2>,
    left: &FoldedDenseIM,
    right: &FoldedDenseIM,
) -> Result<C64> {
    if left.t != right.t || ops.a.len() != left.t + 1 {
        return argument("mismatched lengths in dense network value");
    }
    let t = left.t;
    let rho = rho0.copied().unwrap_or(kernel.rho0);
    let mut traj = vec![0; t];
    Ok((0..left.amplitudes.len())
        .map(|a| {
            decode(a, t, &mut traj);
            trajectory_weight(kernel, ops, &rho, &traj) * left.amplitudes[a] * right.amplitudes[a]
        })
        .sum())
}

/// Identity branch operators with `op` inserted on the forward branch at
/// times 0 and `t`.
pub fn forward_pair(t: usize, op: Mat2) -> BranchOps {
    let mut ops = BranchOps::identity(t);
    ops.a[0] = op;
    ops.a[t] = mat_mul(&op, &ops.a[t]);
    ops
}
