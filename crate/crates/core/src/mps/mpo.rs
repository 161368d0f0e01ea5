//! Temporal matrix-product operators and the zip-up application.

use num_complex::Complex64 as C64;

use super::{normalize, BondSpectrum, TemporalMps, MAX_DENSE_SITES, PHYS};
use crate::error::{argument, Error, Result};
use crate::tensor::{matmul_rm, permute_data, svd_raw, DenseTensor, Truncation};

/// Site tensors of shape `[left, out, in, right]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemporalMpo {
    sites: Vec<DenseTensor>,
}

impl TemporalMpo {
    pub fn new(sites: Vec<DenseTensor>) -> Result<Self> {
        if sites.is_empty() {
            return argument("an MPO needs at least one site");
        }
        for (i, s) in sites.iter().enumerate() {
            let sh = s.shape();
            if sh.len() != 4 || sh[1] != PHYS || sh[2] != PHYS {
                return Err(Error::Dimension(format!("site {i} has shape {sh:?}, expected [l, 4, 4, r]")));
            }
            if (i == 0 && sh[0] != 1) || (i + 1 == sites.len() && sh[3] != 1) {
                return Err(Error::Dimension("boundary bonds of an MPO must have extent 1".into()));
            }
            if i > 0 && sites[i - 1].shape()[3] != sh[0] {
                return Err(Error::Dimension(format!("bond mismatch between sites {} and {i}", i - 1)));
            }
            if !s.is_finite() {
                return Err(Error::NumericalInstability(format!("non-finite amplitudes at MPO site {i}")));
            }
        }
        Ok(Self { sites })
    }

    pub fn identity(t: usize) -> Result<Self> {
        let id = DenseTensor::from_fn(vec![1, PHYS, PHYS, 1], |i| {
            if i[1] == i[2] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(vec![id; t])
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

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.sites.iter().map(|s| s.shape()[0]).collect();
        d.push(1);
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Dense `4^T × 4^T` matrix, rows indexed by the output trajectory.
    pub fn to_dense_matrix(&self) -> Result<DenseTensor> {
        if self.len() > MAX_DENSE_SITES / 2 {
            return Err(Error::Resource(format!("dense MPO of {} sites is too large", self.len())));
        }
        // acc[out, in, bond] accumulated site by site.
        let mut acc = vec![C64::new(1.0, 0.0)];
        let mut dim = 1usize;
        let mut bond = 1usize;
        for s in &self.sites {
            let (l, r) = (s.shape()[0], s.shape()[3]);
            debug_assert_eq!(l, bond);
            let prod = matmul_rm(&acc, s.data(), dim * dim, l, PHYS * PHYS * r);
            // prod[o, i, a, b, r] -> [o, a, i, b, r]
            acc = permute_data(&prod, &[dim, dim, PHYS, PHYS, r], &[0, 2, 1, 3, 4]);
            dim *= PHYS;
            bond = r;
        }
        DenseTensor::new(vec![dim, dim], acc)
    }

    /// Exact action on a dense vector.
    pub fn apply_dense(&self, v: &[C64]) -> Result<Vec<C64>> {
        let m = self.to_dense_matrix()?;
        let n = m.shape()[0];
        if v.len() != n {
            return Err(Error::Dimension(format!("vector of length {} for a {n}-dim operator", v.len())));
        }
        Ok(matmul_rm(m.data(), v, n, n, 1))
    }
}

/// Result of a zip-up application.
#[derive(Clone, Debug)]
pub struct ZipUp {
    /// Compressed `op·psi`, canonical about site 0.
    pub psi: TemporalMps,
    /// Sum over all truncations of the dropped fraction of squared weight.
    pub discarded_weight: f64,
    /// Schmidt spectra of every internal bond of the result.
    pub spectra: Vec<BondSpectrum>,
}

pub fn apply_mpo_zipup(op: &TemporalMpo, psi: &TemporalMps, chi_max: usize, cutoff: f64) -> Result<ZipUp> {
    apply_mpo_zipup_with(op, psi, &Truncation::new(Some(chi_max), cutoff))
}

/// `op·psi` with truncation interleaved into a left-to-right sweep, then a
/// right-to-left SVD sweep that fixes the final bonds and records spectra.
pub fn apply_mpo_zipup_with(op: &TemporalMpo, psi: &TemporalMps, trunc: &Truncation) -> Result<ZipUp> {
    trunc.validate()?;
    let t = psi.len();
    if op.len() != t {
        return argument(format!("MPO of {} sites applied to MPS of {t} sites", op.len()));
    }
    // Truncation during the sweep is only close to optimal when the
    // unprocessed part of psi is right-orthonormal.
    let canon;
    let psi = if psi.center() == Some(0) {
        psi
    } else {
        canon = psi.canonicalize(0)?;
        &canon
    };
    let sweep_trunc = Truncation { cutoff: trunc.cutoff * 0.1, ..*trunc };
    let mut norm_log = psi.norm_log();
    let mut discarded = 0.0;
    let mut sites: Vec<DenseTensor> = Vec::with_capacity(t);
    // carry[n, wl, l]
    let mut carry = vec![C64::new(1.0, 0.0)];
    let (mut n, mut wl, mut l) = (1usize, 1usize, 1usize);
    for (i, (a, w)) in psi.sites().iter().zip(op.sites()).enumerate() {
        let r = a.shape()[2];
        let wr = w.shape()[3];
        debug_assert_eq!(a.shape()[0], l);
        debug_assert_eq!(w.shape()[0], wl);
        // y[n, wl, b, r]
        let y = matmul_rm(&carry, a.data(), n * wl, l, PHYS * r);
        let y = permute_data(&y, &[n, wl, PHYS, r], &[0, 3, 1, 2]);
        // w as [wl, b, a, wr]
        let wp = permute_data(w.data(), &[wl, PHYS, PHYS, wr], &[0, 2, 1, 3]);
        // z[n, r, a, wr] -> [n, a, wr, r]
        let z = matmul_rm(&y, &wp, n * r, wl * PHYS, PHYS * wr);
        let mut z = permute_data(&z, &[n, r, PHYS, wr], &[0, 2, 3, 1]);
        if i + 1 == t {
            norm_log += normalize(&mut z);
            sites.push(DenseTensor::new(vec![n, PHYS, 1], z)?);
            break;
        }
        let f = svd_raw(&z, n * PHYS, wr * r, &sweep_trunc)?;
        if f.total_weight > 0.0 {
            discarded += f.discarded_weight / f.total_weight;
        }
        let k = f.rank();
        sites.push(DenseTensor::new(vec![n, PHYS, k], f.u.into_data())?);
        let mut next = f.vh.into_data();
        for (row, s) in next.chunks_mut(wr * r).zip(&f.s) {
            row.iter_mut().for_each(|x| *x *= s);
        }
        norm_log += normalize(&mut next);
        carry = next;
        n = k;
        wl = wr;
        l = r;
    }
    let mut spectra = Vec::with_capacity(t.saturating_sub(1));
    for i in (1..t).rev() {
        let sh = sites[i].shape().to_vec();
        let cols = PHYS * sh[2];
        let f = svd_raw(sites[i].data(), sh[0], cols, trunc)?;
        if f.total_weight > 0.0 {
            discarded += f.discarded_weight / f.total_weight;
        }
        spectra.push(BondSpectrum::from_singular_values(i, &f.s));
        let k = f.rank();
        let mut us = f.u.into_data();
        for row in us.chunks_mut(k) {
            row.iter_mut().zip(&f.s).for_each(|(x, s)| *x *= s);
        }
        norm_log += normalize(&mut us);
        sites[i] = DenseTensor::new(vec![k, PHYS, sh[2]], f.vh.into_data())?;
        let psh = sites[i - 1].shape().to_vec();
        let merged = matmul_rm(sites[i - 1].data(), &us, psh[0] * PHYS, sh[0], k);
        sites[i - 1] = DenseTensor::new(vec![psh[0], PHYS, k], merged)?;
    }
    spectra.reverse();
    norm_log += normalize(sites[0].data_mut());
    if !norm_log.is_finite() || !sites.iter().all(DenseTensor::is_finite) {
        return Err(Error::NumericalInstability("zip-up produced a non-finite state".into()));
    }
    Ok(ZipUp { psi: TemporalMps::from_parts(sites, Some(0), norm_log), discarded_weight: discarded, spectra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mpo(t: usize, w: usize, rng: &mut ChaCha8Rng) -> TemporalMpo {
        let sites = (0..t)
            .map(|i| {
                let l = if i == 0 { 1 } else { w };
                let r = if i + 1 == t { 1 } else { w };
                DenseTensor::from_fn(vec![l, PHYS, PHYS, r], |_| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                })
            })
            .collect();
        TemporalMpo::new(sites).unwrap()
    }

    fn rel_err(a: &[C64], b: &[C64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn identity_mpo_leaves_state_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = TemporalMps::random(5, 6, &mut rng).unwrap();
        let out = apply_mpo_zipup(&TemporalMpo::identity(5).unwrap(), &psi, 64, 0.0).unwrap();
        assert!(rel_err(&out.psi.to_dense().unwrap(), &psi.to_dense().unwrap()) < 1e-12);
        assert!(out.discarded_weight < 1e-24);
    }

    #[test]
    fn unbounded_zipup_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in 1..=5 {
            let psi = TemporalMps::random(t, 4, &mut rng).unwrap();
            let op = random_mpo(t, 3, &mut rng);
            let out = apply_mpo_zipup(&op, &psi, 1024, 0.0).unwrap();
            let exact = op.apply_dense(&psi.to_dense().unwrap()).unwrap();
            assert!(rel_err(&out.psi.to_dense().unwrap(), &exact) < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn chi_one_on_entangling_mpo_discards_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = TemporalMps::random(4, 1, &mut rng).unwrap();
        let op = random_mpo(4, 4, &mut rng);
        let out = apply_mpo_zipup(&op, &psi, 1, 0.0).unwrap();
        assert!(out.discarded_weight > 0.0);
        assert_eq!(out.psi.max_bond(), 1);
    }

    #[test]
    fn spectra_match_entropy_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = TemporalMps::random(5, 4, &mut rng).unwrap();
        let out = apply_mpo_zipup(&random_mpo(5, 2, &mut rng), &psi, 256, 0.0).unwrap();
        let profile = out.psi.entropy_profile().unwrap();
        for (a, b) in out.spectra.iter().zip(&profile) {
            assert_eq!(a.bond, b.bond);
            assert!((a.entropy - b.entropy).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_matrix_of_identity_is_identity() {
        let m = TemporalMpo::identity(3).unwrap().to_dense_matrix().unwrap();
        assert!(m.max_abs_diff(&DenseTensor::identity(64)).unwrap() == 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn discarded_weight_shrinks_with_chi(seed in 0u64..10_000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let psi = TemporalMps::random(6, 4, &mut rng).unwrap();
                let op = random_mpo(6, 3, &mut rng);
                let mut last = f64::INFINITY;
                for chi in [1usize, 2, 4, 8, 16, 64] {
                    let w = apply_mpo_zipup(&op, &psi, chi, 0.0).unwrap().discarded_weight;
                    prop_assert!(w <= last * (1.0 + 1e-9) + 1e-14, "chi {} gave {} after {}", chi, w, last);
                    last = w;
                }
            }
        }
    }
}
