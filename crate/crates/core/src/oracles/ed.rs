//! Exact state-vector evolution of short open chains.
//!
//! The chain has an odd number of sites with the probe (and any impurity)
//! in the middle. For `T` periods a chain of `2T + 1` sites is exact: the
//! circuit has a strict light cone of one site per period.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Error, Result};
use crate::model::{floquet_kernel, mat_identity, spin, LocalKernel, Mat2, ModelSpec, SiteRole};
use crate::observables::InsertionPlan;

/// Largest chain handled (2^13 amplitudes per state, 2^13 initial states).
pub const MAX_ED_SITES: usize = 13;

#[derive(Clone, Debug)]
pub struct EdChain {
    l: usize,
    center: usize,
    kernels: Vec<LocalKernel>,
    /// Ising angle of bond `(i, i + 1)` per period.
    couplings: Vec<f64>,
    diag: Vec<C64>,
}

impl EdChain {
    /// Homogeneous chain of `l` sites for `spec` (impurity at the centre).
    pub fn from_spec(spec: &ModelSpec, l: usize) -> Result<Self> {
        if spec.disorder.is_some() {
            return argument("disordered chains need explicit couplings");
        }
        let mut couplings = vec![spec.j_eff(); l.saturating_sub(1)];
        if spec.impurity.is_some() && l > 1 {
            let c = l / 2;
            couplings[c - 1] = spec.impurity_coupling();
            couplings[c] = spec.impurity_coupling();
        }
        Self::build(spec, l, couplings)
    }

    /// Chain with the given per-period bond angles; `spec.j` is ignored.
    pub fn with_couplings(spec: &ModelSpec, l: usize, couplings: Vec<f64>) -> Result<Self> {
        if couplings.len() + 1 != l {
            return Err(Error::Dimension(format!("{} couplings for {l} sites", couplings.len())));
        }
        Self::build(spec, l, couplings)
    }

    fn build(spec: &ModelSpec, l: usize, couplings: Vec<f64>) -> Result<Self> {
        if l == 0 || l % 2 == 0 {
            return argument(format!("chain length must be odd, got {l}"));
        }
        if l > MAX_ED_SITES {
            return Err(Error::Resource(format!("exact evolution is limited to {MAX_ED_SITES} sites, asked for {l}")));
        }
        let center = l / 2;
        let bulk = floquet_kernel(&spec.homogeneous(), SiteRole::Bulk)?;
        let mut kernels = vec![bulk; l];
        if spec.impurity.is_some() {
            kernels[center] = floquet_kernel(spec, SiteRole::ImpuritySite)?;
        }
        for k in &kernels {
            if k.rho0[0][1].norm() > 0.0 || k.rho0[1][0].norm() > 0.0 {
                return argument("initial states must be diagonal in the z basis");
            }
        }
        let mut chain = Self { l, center, kernels, couplings, diag: Vec::new() };
        chain.diag = chain.diagonal_layer();
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.l
    }

    pub fn is_empty(&self) -> bool {
        self.l == 0
    }

    pub fn center(&self) -> usize {
        self.center
    }

    fn bit(&self, x: usize, site: usize) -> usize {
        (x >> (self.l - 1 - site)) & 1
    }

    fn diagonal_layer(&self) -> Vec<C64> {
        (0..1usize << self.l)
            .map(|x| {
                let mut angle = 0.0;
                for i in 0..self.l {
                    angle += self.kernels[i].h_angle * spin(self.bit(x, i));
                }
                for (i, c) in self.couplings.iter().enumerate() {
                    angle += c * spin(self.bit(x, i)) * spin(self.bit(x, i + 1));
                }
                C64::from_polar(1.0, -angle)
            })
            .collect()
    }

    fn apply_site(&self, psi: &mut [C64], site: usize, m: &Mat2) {
        let mask = 1usize << (self.l - 1 - site);
        for x in 0..psi.len() {
            if x & mask != 0 {
                continue;
            }
            let (a, b) = (psi[x], psi[x | mask]);
            psi[x] = m[0][0] * a + m[0][1] * b;
            psi[x | mask] = m[1][0] * a + m[1][1] * b;
        }
    }

    fn period(&self, psi: &mut [C64]) {
        let id = mat_identity();
        for (i, k) in self.kernels.iter().enumerate() {
            if k.pre != id {
                self.apply_site(psi, i, &k.pre);
            }
        }
        for (p, d) in psi.iter_mut().zip(&self.diag) {
            *p *= d;
        }
        for (i, k) in self.kernels.iter().enumerate() {
            self.apply_site(psi, i, &k.post);
        }
    }

    fn probability(&self, x: usize, center_rho: Option<&Mat2>) -> f64 {
        (0..self.l)
            .map(|i| {
                let b = self.bit(x, i);
                let rho = match center_rho {
                    Some(r) if i == self.center => r,
                    _ => &self.kernels[i].rho0,
                };
                rho[b][b].re
            })
            .product()
    }

    fn center_z(&self, psi: &[C64]) -> f64 {
        psi.iter().enumerate().map(|(y, a)| a.norm_sqr() * spin(self.bit(y, self.center))).sum()
    }

    /// `Tr[σ^z_c(τ) σ^z_c ρ]` for `τ = 0..=t_max`, or `Tr[σ^z_c(τ) ρ]`
    /// when `with_initial_z` is false.
    pub fn z_series(&self, t_max: usize, with_initial_z: bool) -> Vec<C64> {
        let n = 1usize << self.l;
        let mut out = vec![0.0; t_max + 1];
        let mut psi = vec![C64::new(0.0, 0.0); n];
        for x in 0..n {
            let p = self.probability(x, None);
            if p == 0.0 {
                continue;
            }
            let w = if with_initial_z { p * spin(self.bit(x, self.center)) } else { p };
            psi.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            psi[x] = C64::new(1.0, 0.0);
            out[0] += w * spin(self.bit(x, self.center));
            for v in out.iter_mut().skip(1) {
                self.period(&mut psi);
                *v += w * self.center_z(&psi);
            }
        }
        out.into_iter().map(|v| C64::new(v, 0.0)).collect()
    }

    /// `Tr[X ρ Y†]` with `X = A_T U ⋯ U A_0`, `Y = B_T U ⋯ U B_0` and the
    /// plan's operators acting on the centre site.
    pub fn evaluate(&self, plan: &InsertionPlan, t: usize) -> Result<C64> {
        let ops = plan.branch_ops(t)?;
        if let Some(r) = &plan.initial_state {
            if r[0][1].norm() > 0.0 || r[1][0].norm() > 0.0 {
                return argument("initial states must be diagonal in the z basis");
            }
        }
        let n = 1usize << self.l;
        let id = mat_identity();
        let mut total = C64::new(0.0, 0.0);
        let mut x_vec = vec![C64::new(0.0, 0.0); n];
        let mut y_vec = vec![C64::new(0.0, 0.0); n];
        for x in 0..n {
            let p = self.probability(x, plan.initial_state.as_ref());
            if p == 0.0 {
                continue;
            }
            for (v, ops_branch) in [(&mut x_vec, &ops.a), (&mut y_vec, &ops.b)] {
                v.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                v[x] = C64::new(1.0, 0.0);
                for (tau, op) in ops_branch.iter().enumerate() {
                    if tau > 0 {
                        self.period(v);
                    }
                    if *op != id {
                        self.apply_site(v, self.center, op);
                    }
                }
            }
            let overlap: C64 = y_vec.iter().zip(&x_vec).map(|(y, x)| y.conj() * x).sum();
            total += p * overlap;
        }
        Ok(total)
    }
}

/// Infinite-temperature `C_zz(τ)` of the centre of a `2T + 1` chain, exact
/// for every `τ ≤ T`.
pub fn ed_autocorrelator(spec: &ModelSpec, t_max: usize) -> Result<Vec<C64>> {
    EdChain::from_spec(spec, 2 * t_max + 1).map(|c| c.z_series(t_max, true))
}

/// `⟨σ^z_c(τ)⟩` from the product initial state of `spec`.
pub fn ed_magnetization(spec: &ModelSpec, l: usize, t_max: usize) -> Result<Vec<C64>> {
    EdChain::from_spec(spec, l).map(|c| c.z_series(t_max, false))
}

/// Sample mean and standard error of a disorder-averaged series.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

/// Bond angles of sample `index`, uniform on `[0, 2π)`.
pub fn sample_couplings(seed: u64, index: u64, bonds: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..bonds).map(|_| rng.gen_range(0.0..TAU)).collect()
}

/// Monte Carlo average of the centre `C_zz(τ)`, `τ = 0..=t_max`, over
/// independent uniform couplings on a `2·t_max + 1` chain.
pub fn ed_disorder_autocorrelator(spec: &ModelSpec, t_max: usize, samples: usize, seed: u64) -> Result<DisorderEstimate> {
    if samples < 2 {
        return argument("at least two disorder samples are needed");
    }
    let l = 2 * t_max + 1;
    let base = ModelSpec { disorder: None, ..*spec };
    let mut sum = vec![0.0; t_max + 1];
    let mut sum_sq = vec![0.0; t_max + 1];
    for i in 0..samples {
        let chain = EdChain::with_couplings(&base, l, sample_couplings(seed, i as u64, l - 1))?;
        for (k, v) in chain.z_series(t_max, true).into_iter().enumerate() {
            sum[k] += v.re;
            sum_sq[k] += v.re * v.re;
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let stderr = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(DisorderEstimate { mean, stderr, samples, seed })
}
