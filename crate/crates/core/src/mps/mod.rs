//! Matrix-product states over the folded time axis.
//!
//! Site `τ` (0-based) holds a tensor of shape `[left, 4, right]`. The
//! represented vector is `exp(norm_log)` times the contraction of the site
//! tensors, so amplitudes that would overflow a double stay representable.
//! Dense vectors use the site-0-major ordering: the folded index of site 0
//! is the most significant digit.

mod codec;
mod mpo;

pub use codec::{read_mps, write_mps};
pub use mpo::{apply_mpo_zipup, apply_mpo_zipup_with, TemporalMpo, ZipUp};

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::tensor::{adjoint_rm, frobenius, matmul_adj_rm, matmul_rm, qr_positive, svd_raw, DenseTensor, Truncation};

/// Local dimension of a folded time site.
pub const PHYS: usize = 4;

/// Dense vectors beyond this many sites are refused.
pub const MAX_DENSE_SITES: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalMps {
    sites: Vec<DenseTensor>,
    center: Option<usize>,
    norm_log: f64,
}

/// Schmidt data of one bond. `bond = b` cuts the chain after its first `b`
/// sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BondSpectrum {
    pub bond: usize,
    pub schmidt: Vec<f64>,
    pub entropy: f64,
}

impl BondSpectrum {
    /// Normalizes raw singular values so their squares sum to one.
    pub fn from_singular_values(bond: usize, s: &[f64]) -> Self {
        let total: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let schmidt: Vec<f64> = if total > 0.0 { s.iter().map(|x| x / total).collect() } else { s.to_vec() };
        let entropy = von_neumann(&schmidt);
        Self { bond, schmidt, entropy }
    }
}

/// `−Σ λ² ln λ²` over Schmidt values `λ`.
pub fn von_neumann(schmidt: &[f64]) -> f64 {
    schmidt
        .iter()
        .map(|l| l * l)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        // fold from +0 so a product state reports 0, not -0
        .fold(0.0, |a, x| a + x)
}

/// A complex number stored as `exp(log_abs) · phase`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar {
    pub log_abs: f64,
    pub phase: C64,
}

impl LogScalar {
    pub fn value(&self) -> C64 {
        self.phase * self.log_abs.exp()
    }
}

impl TemporalMps {
    pub fn new(sites: Vec<DenseTensor>, center: Option<usize>, norm_log: f64) -> Result<Self> {
        if sites.is_empty() {
            return argument("an MPS needs at least one site");
        }
        for (i, s) in sites.iter().enumerate() {
            let sh = s.shape();
            if sh.len() != 3 || sh[1] != PHYS {
                return Err(Error::Dimension(format!("site {i} has shape {sh:?}, expected [l, 4, r]")));
            }
            if i == 0 && sh[0] != 1 {
                return Err(Error::Dimension("left boundary bond must have extent 1".into()));
            }
            if i + 1 == sites.len() && sh[2] != 1 {
                return Err(Error::Dimension("right boundary bond must have extent 1".into()));
            }
            if i > 0 && sites[i - 1].shape()[2] != sh[0] {
                return Err(Error::Dimension(format!("bond mismatch between sites {} and {i}", i - 1)));
            }
            if !s.is_finite() {
                return Err(Error::NumericalInstability(format!("non-finite amplitudes at site {i}")));
            }
        }
        if let Some(c) = center {
            if c >= sites.len() {
                return argument(format!("center {c} outside chain of {} sites", sites.len()));
            }
        }
        Ok(Self { sites, center, norm_log })
    }

    pub(crate) fn from_parts(sites: Vec<DenseTensor>, center: Option<usize>, norm_log: f64) -> Self {
        debug_assert!(Self::new(sites.clone(), center, norm_log).is_ok());
        Self { sites, center, norm_log }
    }

    /// Product state with the given per-site folded vectors.
    pub fn product(vectors: &[[C64; PHYS]]) -> Result<Self> {
        let sites = vectors
            .iter()
            .map(|v| DenseTensor::new(vec![1, PHYS, 1], v.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites, None, 0.0)
    }

    /// The same folded vector on all `t` sites.
    pub fn uniform_product(t: usize, v: [C64; PHYS]) -> Result<Self> {
        Self::product(&vec![v; t])
    }

    /// Random MPS with bond dimension `chi` (capped by the exact rank at each
    /// bond).
    pub fn random(t: usize, chi: usize, rng: &mut impl Rng) -> Result<Self> {
        if t == 0 || chi == 0 {
            return argument("random MPS needs t ≥ 1 and chi ≥ 1");
        }
        let mut dims = vec![1usize; t + 1];
        for b in 1..t {
            let from_left = PHYS.saturating_pow(b as u32);
            let from_right = PHYS.saturating_pow((t - b) as u32);
            dims[b] = chi.min(from_left).min(from_right);
        }
        let sites = (0..t)
            .map(|i| {
                DenseTensor::from_fn(vec![dims[i], PHYS, dims[i + 1]], |_| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        Self::new(sites, None, 0.0)
    }

    /// Compresses a dense vector of length `4^t` by successive SVDs.
    pub fn from_dense(t: usize, amplitudes: &[C64], trunc: &Truncation) -> Result<Self> {
        if t == 0 || t > MAX_DENSE_SITES {
            return argument(format!("dense conversion supports 1..={MAX_DENSE_SITES} sites, got {t}"));
        }
        if amplitudes.len() != PHYS.pow(t as u32) {
            return Err(Error::Dimension(format!("expected 4^{t} amplitudes, got {}", amplitudes.len())));
        }
        let nrm = frobenius(amplitudes);
        if nrm == 0.0 {
            return argument("cannot compress the zero vector");
        }
        let mut rest: Vec<C64> = amplitudes.iter().map(|x| x / nrm).collect();
        let mut left = 1usize;
        let mut sites = Vec::with_capacity(t);
        let mut norm_log = nrm.ln();
        for _ in 0..t - 1 {
            let rows = left * PHYS;
            let cols = rest.len() / rows;
            let f = svd_raw(&rest, rows, cols, trunc)?;
            let k = f.rank();
            sites.push(DenseTensor::new(vec![left, PHYS, k], f.u.into_data())?);
            let mut carry = f.vh.into_data();
            for (row, s) in carry.chunks_mut(cols).zip(&f.s) {
                row.iter_mut().for_each(|x| *x *= s);
            }
            let cn = frobenius(&carry);
            carry.iter_mut().for_each(|x| *x /= cn);
            norm_log += cn.ln();
            rest = carry;
            left = k;
        }
        sites.push(DenseTensor::new(vec![left, PHYS, 1], rest)?);
        Ok(Self { sites, center: Some(t - 1), norm_log })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &DenseTensor {
        &self.sites[i]
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn norm_log(&self) -> f64 {
        self.norm_log
    }

    /// Bond extents including the two trivial boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.sites.iter().map(|s| s.shape()[0]).collect();
        d.push(1);
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Multiplies the state by a scalar: the magnitude goes into `norm_log`,
    /// the phase into the center tensor (site 0 when not canonical).
    pub fn scaled(mut self, factor: C64) -> Self {
        let mag = factor.norm();
        if mag == 0.0 {
            self.norm_log = f64::NEG_INFINITY;
            return self;
        }
        self.norm_log += mag.ln();
        let phase = factor / mag;
        let c = self.center.unwrap_or(0);
        self.sites[c].data_mut().iter_mut().for_each(|x| *x *= phase);
        self
    }

    /// Full dense vector; refused above [`MAX_DENSE_SITES`] sites.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        if self.len() > MAX_DENSE_SITES {
            return Err(Error::Resource(format!("dense vector of {} sites is too large", self.len())));
        }
        let mut acc = vec![C64::new(1.0, 0.0)];
        let mut rows = 1usize;
        for s in &self.sites {
            let (l, r) = (s.shape()[0], s.shape()[2]);
            acc = matmul_rm(&acc, s.data(), rows, l, PHYS * r);
            rows *= PHYS;
        }
        let scale = self.norm_log.exp();
        Ok(acc.into_iter().map(|x| x * scale).collect())
    }

    /// Brings the state into mixed-canonical form about `center`.
    ///
    /// Sites left of the center become left isometries, sites right of it
    /// right isometries, and the center tensor is scaled to unit norm.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let t = self.len();
        if center >= t {
            return argument(format!("center {center} outside chain of {t} sites"));
        }
        let mut sites = self.sites.clone();
        let mut norm_log = self.norm_log;
        for i in 0..center {
            let sh = sites[i].shape().to_vec();
            let (q, mut r, k) = qr_positive(sites[i].data(), sh[0] * PHYS, sh[2]);
            norm_log += normalize(&mut r);
            sites[i] = DenseTensor::new(vec![sh[0], PHYS, k], q)?;
            let next = &sites[i + 1];
            let nsh = next.shape().to_vec();
            let merged = matmul_rm(&r, next.data(), k, nsh[0], PHYS * nsh[2]);
            sites[i + 1] = DenseTensor::new(vec![k, PHYS, nsh[2]], merged)?;
        }
        for i in (center + 1..t).rev() {
            let sh = sites[i].shape().to_vec();
            let cols = PHYS * sh[2];
            let adj = adjoint_rm(sites[i].data(), sh[0], cols);
            let (q, r, k) = qr_positive(&adj, cols, sh[0]);
            let mut r_adj = adjoint_rm(&r, k, sh[0]);
            norm_log += normalize(&mut r_adj);
            sites[i] = DenseTensor::new(vec![k, PHYS, sh[2]], adjoint_rm(&q, cols, k))?;
            let prev = &sites[i - 1];
            let psh = prev.shape().to_vec();
            let merged = matmul_rm(prev.data(), &r_adj, psh[0] * PHYS, sh[0], k);
            sites[i - 1] = DenseTensor::new(vec![psh[0], PHYS, k], merged)?;
        }
        norm_log += normalize(sites[center].data_mut());
        let out = Self { sites, center: Some(center), norm_log };
        if !out.sites.iter().all(DenseTensor::is_finite) {
            return Err(Error::NumericalInstability("canonicalization produced non-finite amplitudes".into()));
        }
        Ok(out)
    }

    /// `ln ‖ψ‖`.
    pub fn log_norm(&self) -> f64 {
        match log_overlap(self, self) {
            Ok(v) => 0.5 * v.log_abs,
            Err(_) => f64::NAN,
        }
    }

    /// Schmidt spectrum across `bond` (1 ≤ bond < T).
    pub fn bond_entropy(&self, bond: usize) -> Result<BondSpectrum> {
        if bond == 0 || bond >= self.len() {
            return argument(format!("bond {bond} is not internal to a chain of {} sites", self.len()));
        }
        let c = self.canonicalize(bond - 1)?;
        let s = &c.sites[bond - 1];
        let sh = s.shape();
        let f = svd_raw(s.data(), sh[0] * PHYS, sh[2], &Truncation::exact())?;
        Ok(BondSpectrum::from_singular_values(bond, &f.s))
    }

    /// Spectra of every internal bond, ordered by bond index.
    pub fn entropy_profile(&self) -> Result<Vec<BondSpectrum>> {
        let t = self.len();
        if t == 1 {
            return Ok(Vec::new());
        }
        let mut c = self.canonicalize(t - 1)?;
        let mut out = Vec::with_capacity(t - 1);
        for i in (1..t).rev() {
            let sh = c.sites[i].shape().to_vec();
            let cols = PHYS * sh[2];
            let f = svd_raw(c.sites[i].data(), sh[0], cols, &Truncation::exact())?;
            out.push(BondSpectrum::from_singular_values(i, &f.s));
            let k = f.rank();
            let mut us = f.u.into_data();
            for row in us.chunks_mut(k) {
                row.iter_mut().zip(&f.s).for_each(|(x, s)| *x *= s);
            }
            c.sites[i] = DenseTensor::new(vec![k, PHYS, sh[2]], f.vh.into_data())?;
            let psh = c.sites[i - 1].shape().to_vec();
            let merged = matmul_rm(c.sites[i - 1].data(), &us, psh[0] * PHYS, sh[0], k);
            c.sites[i - 1] = DenseTensor::new(vec![psh[0], PHYS, k], merged)?;
        }
        out.reverse();
        Ok(out)
    }

    /// Entropy across the middle bond `⌊T/2⌋`; zero for a single site.
    pub fn half_cut_entropy(&self) -> Result<f64> {
        if self.len() < 2 {
            return Ok(0.0);
        }
        Ok(self.bond_entropy(self.len() / 2)?.entropy)
    }
}

/// Scales `data` to unit Frobenius norm and returns the log of the removed
/// factor. A zero block is left alone.
pub(crate) fn normalize(data: &mut [C64]) -> f64 {
    let n = frobenius(data);
    if n == 0.0 || !n.is_finite() {
        return if n == 0.0 { 0.0 } else { f64::NAN };
    }
    data.iter_mut().for_each(|x| *x /= n);
    n.ln()
}

/// `⟨a|b⟩` in log form, conjugating `a`.
pub fn log_overlap(a: &TemporalMps, b: &TemporalMps) -> Result<LogScalar> {
    if a.len() != b.len() {
        return argument(format!("overlap of chains with {} and {} sites", a.len(), b.len()));
    }
    let mut env = vec![C64::new(1.0, 0.0)];
    let mut log_acc = 0.0;
    for (sa, sb) in a.sites.iter().zip(&b.sites) {
        let (la, ra) = (sa.shape()[0], sa.shape()[2]);
        let (lb, rb) = (sb.shape()[0], sb.shape()[2]);
        let x = matmul_rm(&env, sb.data(), la, lb, PHYS * rb);
        env = matmul_adj_rm(sa.data(), &x, la * PHYS, ra, rb);
        let scale = env.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(LogScalar { log_abs: f64::NEG_INFINITY, phase: C64::new(1.0, 0.0) });
        }
        if !scale.is_finite() {
            return Err(Error::NumericalInstability("overlap environment overflowed".into()));
        }
        env.iter_mut().for_each(|z| *z /= scale);
        log_acc += scale.ln();
    }
    let e = env[0];
    let mag = e.norm();
    if mag == 0.0 {
        return Ok(LogScalar { log_abs: f64::NEG_INFINITY, phase: C64::new(1.0, 0.0) });
    }
    Ok(LogScalar { log_abs: log_acc + mag.ln() + a.norm_log + b.norm_log, phase: e / mag })
}

/// `⟨a|b⟩` including the `norm_log` factors.
pub fn overlap(a: &TemporalMps, b: &TemporalMps) -> Result<C64> {
    Ok(log_overlap(a, b)?.value())
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)`.
pub fn fidelity(a: &TemporalMps, b: &TemporalMps) -> Result<f64> {
    let ab = log_overlap(a, b)?.log_abs;
    let aa = log_overlap(a, a)?.log_abs;
    let bb = log_overlap(b, b)?.log_abs;
    Ok((ab - 0.5 * (aa + bb)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dense_inner(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn rel_diff(a: &[C64], b: &[C64]) -> f64 {
        let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        frobenius(&d) / frobenius(b)
    }

    #[test]
    fn boundary_bonds_must_be_trivial() {
        let s = DenseTensor::zeros(vec![2, 4, 1]);
        assert!(TemporalMps::new(vec![s], None, 0.0).is_err());
    }

    #[test]
    fn product_state_is_unchanged_up_to_phases() {
        let v = [c(0.5, 0.0), c(0.0, 0.5), c(-0.5, 0.0), c(0.5, 0.0)];
        let psi = TemporalMps::uniform_product(4, v).unwrap();
        let can = psi.canonicalize(2).unwrap();
        for (a, b) in psi.sites().iter().zip(can.sites()) {
            let ratio = b.data()[0] / a.data()[0];
            assert!((ratio.norm() - 1.0).abs() < 1e-14);
            assert!(b.max_abs_diff(&a.scale(ratio)).unwrap() < 1e-14);
        }
    }

    #[test]
    fn canonicalize_keeps_the_dense_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = TemporalMps::random(6, 8, &mut rng).unwrap();
        let before = psi.to_dense().unwrap();
        for center in 0..6 {
            let can = psi.canonicalize(center).unwrap();
            assert!(rel_diff(&can.to_dense().unwrap(), &before) < 1e-10);
        }
    }

    #[test]
    fn canonical_form_has_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let can = TemporalMps::random(6, 8, &mut rng).unwrap().canonicalize(3).unwrap();
        for (i, s) in can.sites().iter().enumerate() {
            let sh = s.shape();
            let gram = if i < 3 {
                matmul_adj_rm(s.data(), s.data(), sh[0] * PHYS, sh[2], sh[2])
            } else if i > 3 {
                let adj = adjoint_rm(s.data(), sh[0], PHYS * sh[2]);
                matmul_adj_rm(&adj, &adj, PHYS * sh[2], sh[0], sh[0])
            } else {
                continue;
            };
            let n = (gram.len() as f64).sqrt() as usize;
            let id = DenseTensor::identity(n);
            assert!(max_diff(&gram, id.data()) < 1e-10, "site {i}");
        }
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let once = TemporalMps::random(5, 6, &mut rng).unwrap().canonicalize(2).unwrap();
        let twice = once.canonicalize(2).unwrap();
        for (a, b) in once.sites().iter().zip(twice.sites()) {
            assert!(a.max_abs_diff(b).unwrap() < 1e-12);
        }
        assert!((once.norm_log() - twice.norm_log()).abs() < 1e-12);
    }

    #[test]
    fn self_overlap_is_real_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = TemporalMps::random(5, 4, &mut rng).unwrap();
        let o = overlap(&psi, &psi).unwrap();
        assert!(o.re > 0.0 && o.im.abs() < 1e-12 * o.re);
    }

    #[test]
    fn orthogonal_products_have_zero_overlap() {
        let up = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let down = [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let a = TemporalMps::product(&[up, up, up]).unwrap();
        let b = TemporalMps::product(&[up, down, up]).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn overlap_matches_dense_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = TemporalMps::random(5, 6, &mut rng).unwrap().scaled(c(0.0, 3.0));
        let b = TemporalMps::random(5, 3, &mut rng).unwrap();
        let exact = dense_inner(&a.to_dense().unwrap(), &b.to_dense().unwrap());
        assert!((overlap(&a, &b).unwrap() - exact).norm() < 1e-11 * exact.norm().max(1.0));
    }

    #[test]
    fn length_mismatch_is_an_argument_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = TemporalMps::random(3, 2, &mut rng).unwrap();
        let b = TemporalMps::random(4, 2, &mut rng).unwrap();
        assert!(matches!(overlap(&a, &b), Err(Error::Argument(_))));
    }

    #[test]
    fn product_state_has_zero_entropy() {
        let v = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let psi = TemporalMps::uniform_product(6, v).unwrap();
        for spec in psi.entropy_profile().unwrap() {
            assert!(spec.entropy.abs() < 1e-14);
        }
    }

    #[test]
    fn two_term_superposition_has_log_two() {
        let mut amps = vec![c(0.0, 0.0); 16];
        amps[0] = c(1.0, 0.0);
        amps[15] = c(1.0, 0.0);
        let psi = TemporalMps::from_dense(2, &amps, &Truncation::exact()).unwrap();
        let s = psi.bond_entropy(1).unwrap();
        assert!((s.entropy - 2f64.ln()).abs() < 1e-12);
        let sq: f64 = s.schmidt.iter().map(|x| x * x).sum();
        assert!((sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_agrees_with_single_bond_queries() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi = TemporalMps::random(6, 5, &mut rng).unwrap();
        let profile = psi.entropy_profile().unwrap();
        assert_eq!(profile.len(), 5);
        for p in &profile {
            let single = psi.bond_entropy(p.bond).unwrap();
            assert!((single.entropy - p.entropy).abs() < 1e-12);
        }
    }

    #[test]
    fn from_dense_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<C64> = (0..256).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi = TemporalMps::from_dense(4, &v, &Truncation::exact()).unwrap();
        assert!(max_diff(&psi.to_dense().unwrap(), &v) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn canonicalize_preserves_the_norm(seed in 0u64..10_000, t in 1usize..7, chi in 1usize..9, center in 0usize..7) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let psi = TemporalMps::random(t, chi, &mut rng).unwrap();
                let center = center % t;
                let before = psi.log_norm();
                let after = psi.canonicalize(center).unwrap().log_norm();
                prop_assert!(((after - before) * 2.0).exp_m1().abs() < 1e-10);
            }

            #[test]
            fn entropy_is_gauge_invariant(seed in 0u64..10_000, bond in 1usize..5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let psi = TemporalMps::random(5, 4, &mut rng).unwrap();
                let mut sites = psi.sites().to_vec();
                // Insert G·G⁻¹ on the bond after site `bond - 1`.
                let d = sites[bond - 1].shape()[2];
                let g: Vec<C64> = (0..d * d)
                    .map(|i| if i % (d + 1) == 0 { c(2.0, 0.0) } else { c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)) })
                    .collect();
                let gt = DenseTensor::new(vec![d, d], g).unwrap();
                let inv = invert(&gt);
                let a = &sites[bond - 1];
                let ash = a.shape().to_vec();
                sites[bond - 1] = DenseTensor::new(ash.clone(), matmul_rm(a.data(), gt.data(), ash[0] * PHYS, d, d)).unwrap();
                let b = &sites[bond];
                let bsh = b.shape().to_vec();
                sites[bond] = DenseTensor::new(bsh.clone(), matmul_rm(&inv, b.data(), d, d, PHYS * bsh[2])).unwrap();
                let gauged = TemporalMps::new(sites, None, psi.norm_log()).unwrap();
                for (x, y) in psi.entropy_profile().unwrap().iter().zip(gauged.entropy_profile().unwrap()) {
                    prop_assert!((x.entropy - y.entropy).abs() < 1e-10);
                }
            }
        }

        fn invert(m: &DenseTensor) -> Vec<C64> {
            let n = m.shape()[0];
            let mut a = m.data().to_vec();
            let mut inv = DenseTensor::identity(n).into_data();
            for col in 0..n {
                let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm())).unwrap();
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                    inv.swap(col * n + k, piv * n + k);
                }
                let p = a[col * n + col];
                for k in 0..n {
                    a[col * n + k] /= p;
                    inv[col * n + k] /= p;
                }
                for r in 0..n {
                    if r != col {
                        let f = a[r * n + col];
                        for k in 0..n {
                            let (ak, ik) = (a[col * n + k], inv[col * n + k]);
                            a[r * n + k] -= f * ak;
                            inv[r * n + k] -= f * ik;
                        }
                    }
                }
            }
            inv
        }
    }
}
