//! Circuit parameters and the single-spin local kernel.
//!
//! One period acts as `U = post · D · pre` with the diagonal layer
//! `D = exp[−i(J Σ σ^z σ^z + h Σ σ^z)]` and single-site kicks
//! `K(θ) = exp(−iθσ^x)`. The native Floquet circuit has `pre = 1`,
//! `post = K(g)`; the second-order Trotter circuit splits the kick as
//! `pre = post = K(g/2)`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{argument, Error, Result};
use crate::mps::PHYS;
use crate::tensor::DenseTensor;

/// Local Hilbert-space dimension of one spin.
pub const LOCAL_DIM: usize = 2;

pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn mat_identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// `exp(−iθσ^x)`.
pub fn kick(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

/// `σ^z` eigenvalue of a spin index: 0 ↦ +1 (↑), 1 ↦ −1 (↓).
#[inline]
pub fn spin(i: usize) -> f64 {
    if i == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Folded index of `(σ, σ̄)`.
#[inline]
pub fn fold(s: usize, sb: usize) -> usize {
    2 * s + sb
}

/// Inverse of [`fold`].
#[inline]
pub fn unfold(a: usize) -> (usize, usize) {
    (a / 2, a % 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    InfiniteTemperature,
    ZPolarizedUp,
}

impl InitialState {
    pub fn density_matrix(self) -> Mat2 {
        match self {
            Self::InfiniteTemperature => [[C64::new(0.5, 0.0), ZERO], [ZERO, C64::new(0.5, 0.0)]],
            Self::ZPolarizedUp => [[ONE, ZERO], [ZERO, ZERO]],
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::InfiniteTemperature => "infinite_temperature",
            Self::ZPolarizedUp => "z_polarized_up",
        })
    }
}

impl FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "infinite_temperature" => Ok(Self::InfiniteTemperature),
            "z_polarized_up" => Ok(Self::ZPolarizedUp),
            other => argument(format!("unknown initial state `{other}`")),
        }
    }
}

/// Site 0 with fields scaled by `alpha` and both adjacent couplings scaled
/// by `beta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Impurity {
    pub alpha: f64,
    pub beta: f64,
}

/// Bond couplings drawn independently and uniformly from `[0, 2π]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disorder {
    UniformJ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

impl fmt::Display for TrotterOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::First => "1",
            Self::Second => "2",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub j: f64,
    pub g: f64,
    pub h: f64,
    /// Number of periods (time steps).
    pub t: usize,
    /// Trotter step; zero selects the native Floquet circuit.
    pub eps: f64,
    pub initial_state: InitialState,
    pub impurity: Option<Impurity>,
    pub disorder: Option<Disorder>,
    pub trotter_order: TrotterOrder,
}

impl ModelSpec {
    /// Native kicked-Ising circuit at infinite temperature.
    pub fn floquet(j: f64, g: f64, h: f64, t: usize) -> Self {
        Self {
            j,
            g,
            h,
            t,
            eps: 0.0,
            initial_state: InitialState::InfiniteTemperature,
            impurity: None,
            disorder: None,
            trotter_order: TrotterOrder::Second,
        }
    }

    /// Disordered kicked chain with kick angle `π/2 − eps_kick`.
    pub fn dtc(eps_kick: f64, h: f64, t: usize) -> Self {
        Self { disorder: Some(Disorder::UniformJ), ..Self::floquet(0.0, FRAC_PI_2 - eps_kick, h, t) }
    }

    pub fn with_steps(self, t: usize) -> Self {
        Self { t, ..self }
    }

    pub fn with_initial_state(self, initial_state: InitialState) -> Self {
        Self { initial_state, ..self }
    }

    pub fn with_impurity(self, alpha: f64, beta: f64) -> Self {
        Self { impurity: Some(Impurity { alpha, beta }), ..self }
    }

    pub fn with_trotter_order(self, trotter_order: TrotterOrder) -> Self {
        Self { trotter_order, ..self }
    }

    /// The same spec with the impurity removed.
    pub fn homogeneous(self) -> Self {
        Self { impurity: None, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return argument("T must be at least 1");
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return argument(format!("eps must be finite and non-negative, got {}", self.eps));
        }
        for (name, v) in [("J", self.j), ("g", self.g), ("h", self.h)] {
            if !v.is_finite() {
                return argument(format!("{name} must be finite"));
            }
        }
        if let Some(imp) = self.impurity {
            if !imp.alpha.is_finite() || !imp.beta.is_finite() {
                return argument("impurity scales must be finite");
            }
        }
        Ok(())
    }

    pub fn is_trotterized(&self) -> bool {
        self.eps > 0.0
    }

    fn step_scale(&self) -> f64 {
        if self.is_trotterized() {
            self.eps
        } else {
            1.0
        }
    }

    /// Per-period Ising angle.
    pub fn j_eff(&self) -> f64 {
        self.j * self.step_scale()
    }

    /// Per-period kick angle.
    pub fn g_eff(&self) -> f64 {
        self.g * self.step_scale()
    }

    /// Per-period longitudinal angle.
    pub fn h_eff(&self) -> f64 {
        self.h * self.step_scale()
    }

    /// Physical time `T·eps`, or the period count for Floquet specs.
    pub fn time(&self) -> f64 {
        self.t as f64 * self.step_scale()
    }

    /// Coupling between the impurity and its neighbours.
    pub fn impurity_coupling(&self) -> f64 {
        self.impurity.map_or(1.0, |i| i.beta) * self.j_eff()
    }

    fn splits_kick(&self) -> bool {
        self.is_trotterized() && self.trotter_order == TrotterOrder::Second
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteRole {
    Bulk,
    ImpuritySite,
}

/// Everything a single spin contributes to the folded network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalKernel {
    /// Kick applied before the diagonal layer of each period.
    pub pre: Mat2,
    /// Kick applied after the diagonal layer of each period.
    pub post: Mat2,
    /// Longitudinal angle of the diagonal layer.
    pub h_angle: f64,
    pub rho0: Mat2,
}

pub fn floquet_kernel(spec: &ModelSpec, role: SiteRole) -> Result<LocalKernel> {
    spec.validate()?;
    let scale = match role {
        SiteRole::Bulk => 1.0,
        SiteRole::ImpuritySite => match spec.impurity {
            Some(imp) => imp.alpha,
            None => return argument("impurity kernel requested for a spec without impurity"),
        },
    };
    let theta = scale * spec.g_eff();
    let (pre, post) = if spec.splits_kick() {
        (kick(0.5 * theta), kick(0.5 * theta))
    } else {
        (mat_identity(), kick(theta))
    };
    Ok(LocalKernel { pre, post, h_angle: scale * spec.h_eff(), rho0: spec.initial_state.density_matrix() })
}

/// Operators on the forward (`a`) and backward (`b`) branch at each time
/// `τ = 0..=T`. Time `τ` sits after `τ` complete periods.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchOps {
    pub a: Vec<Mat2>,
    pub b: Vec<Mat2>,
}

impl BranchOps {
    pub fn identity(t: usize) -> Self {
        Self { a: vec![mat_identity(); t + 1], b: vec![mat_identity(); t + 1] }
    }
}

impl LocalKernel {
    /// Full kick of one period, `post · pre`.
    pub fn forward_kick(&self) -> Mat2 {
        mat_mul(&self.post, &self.pre)
    }

    pub fn backward_kick(&self) -> Mat2 {
        let k = self.forward_kick();
        [[k[0][0].conj(), k[0][1].conj()], [k[1][0].conj(), k[1][1].conj()]]
    }

    /// `exp[−ih(σ − σ̄)]` on folded index `a`.
    pub fn phase(&self, a: usize) -> C64 {
        let (s, sb) = unfold(a);
        C64::from_polar(1.0, -self.h_angle * (spin(s) - spin(sb)))
    }

    /// Site tensors `[k_left, 4, k_right]` of the spin's own trajectory
    /// weight: initial state, kicks between diagonal layers, longitudinal
    /// phases and the final trace, with the given insertions. The virtual
    /// index carries the previous folded state.
    pub fn weight_chain(&self, ops: &BranchOps, rho0: Option<&Mat2>) -> Result<Vec<DenseTensor>> {
        let t = ops.a.len().saturating_sub(1);
        if t == 0 || ops.b.len() != ops.a.len() {
            return argument("weight chain needs T ≥ 1 and matching branch lists");
        }
        let rho0 = rho0.unwrap_or(&self.rho0);
        let pre_adj = mat_adjoint(&self.pre);
        let rho = mat_mul(&mat_mul(&mat_mul(&self.pre, &ops.a[0]), &mat_mul(rho0, &mat_adjoint(&ops.b[0]))), &pre_adj);
        let post_adj = mat_adjoint(&self.post);
        let fin = mat_mul(&mat_mul(&post_adj, &mat_mul(&mat_adjoint(&ops.b[t]), &ops.a[t])), &self.post);
        let mut sites = Vec::with_capacity(t);
        for i in 0..t {
            let last = i + 1 == t;
            let kl = if i == 0 { 1 } else { PHYS };
            let kr = if last { 1 } else { PHYS };
            let link = (i > 0).then(|| {
                let xf = mat_mul(&mat_mul(&self.pre, &ops.a[i]), &self.post);
                let xb = mat_mul(&mat_mul(&self.pre, &ops.b[i]), &self.post);
                (xf, xb)
            });
            let site = DenseTensor::from_fn(vec![kl, PHYS, kr], |idx| {
                let (l, p, r) = (idx[0], idx[1], idx[2]);
                let (s, sb) = unfold(p);
                let entry = match &link {
                    None => rho[s][sb],
                    Some((xf, xb)) => {
                        let (ls, lsb) = unfold(l);
                        xf[s][ls] * xb[sb][lsb].conj()
                    }
                };
                let tail = if last {
                    fin[sb][s]
                } else if r == p {
                    ONE
                } else {
                    ZERO
                };
                entry * self.phase(p) * tail
            });
            sites.push(site);
        }
        Ok(sites)
    }
}

/// Continuous-time couplings of `H = J Σ σ^zσ^z + h Σ σ^z + g Σ σ^x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianParams {
    pub j: f64,
    pub g: f64,
    pub h: f64,
}

/// Second-order Trotter circuit for evolution up to time `t` in steps
/// `eps`.
pub fn trotterize(params: HamiltonianParams, t: f64, eps: f64) -> Result<ModelSpec> {
    if !(eps > 0.0) || !eps.is_finite() {
        return argument(format!("Trotter step must be positive, got {eps}"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return argument(format!("evolution time must be non-negative, got {t}"));
    }
    let ratio = t / eps;
    let steps = ratio.round();
    if (ratio - steps).abs() > 4.0 * f64::EPSILON * ratio.abs().max(1.0) {
        return argument(format!("t = {t} is not an integer multiple of eps = {eps}"));
    }
    Ok(ModelSpec {
        j: params.j,
        g: params.g,
        h: params.h,
        t: steps as usize,
        eps,
        initial_state: InitialState::InfiniteTemperature,
        impurity: None,
        disorder: None,
        trotter_order: TrotterOrder::Second,
    })
}
