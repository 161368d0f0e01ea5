//! Reference results used to check the tensor-network engine: closed forms,
//! dense (exponential-cost) IM constructions and exact diagonalization of
//! finite chains.

pub mod closed_form;
pub mod cross_check;
pub mod dense;
pub mod ed;

use num_complex::Complex64 as C64;

use crate::error::{argument, Error, Result};
use crate::mps::{TemporalMps, MAX_DENSE_SITES, PHYS};
use crate::tensor::Truncation;

/// An IM stored as all `4^T` amplitudes, site 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedDenseIM {
    pub t: usize,
    pub amplitudes: Vec<C64>,
}

impl FoldedDenseIM {
    pub fn new(t: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if t == 0 || t > MAX_DENSE_SITES {
            return argument(format!("dense IMs support 1..={MAX_DENSE_SITES} sites"));
        }
        if amplitudes.len() != PHYS.pow(t as u32) {
            return Err(Error::Dimension(format!("{} amplitudes for T = {t}", amplitudes.len())));
        }
        if !amplitudes.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NumericalInstability("non-finite dense IM".into()));
        }
        Ok(Self { t, amplitudes })
    }

    pub fn from_fn(t: usize, f: impl Fn(&[usize]) -> C64) -> Result<Self> {
        let n = PHYS.pow(t as u32);
        let mut traj = vec![0usize; t];
        let amplitudes = (0..n)
            .map(|idx| {
                decode(idx, t, &mut traj);
                f(&traj)
            })
            .collect();
        Self::new(t, amplitudes)
    }

    pub fn from_mps(psi: &TemporalMps) -> Result<Self> {
        Self::new(psi.len(), psi.to_dense()?)
    }

    pub fn to_mps(&self, trunc: &Truncation) -> Result<TemporalMps> {
        TemporalMps::from_dense(self.t, &self.amplitudes, trunc)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest elementwise deviation relative to the largest amplitude of
    /// `reference`.
    pub fn relative_error(&self, reference: &Self) -> f64 {
        let scale = reference.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.amplitudes.iter().zip(&reference.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
    }

    /// Like [`relative_error`](Self::relative_error) after fitting the best
    /// complex scale factor onto `reference`.
    pub fn error_up_to_scale(&self, reference: &Self) -> f64 {
        let num: C64 = self.amplitudes.iter().zip(&reference.amplitudes).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if den == 0.0 {
            return f64::INFINITY;
        }
        let c = num / den;
        let scaled = Self { t: self.t, amplitudes: self.amplitudes.iter().map(|a| a * c).collect() };
        scaled.relative_error(reference)
    }
}

/// Folded indices of trajectory `idx`, site 0 first.
pub(crate) fn decode(idx: usize, t: usize, out: &mut [usize]) {
    for (tau, slot) in out.iter_mut().enumerate().take(t) {
        *slot = (idx >> (2 * (t - 1 - tau))) & 3;
    }
}
