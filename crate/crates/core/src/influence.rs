//! Dual transfer slices and the self-consistent influence matrix.
//!
//! The IM seen by site 0 from one side is a functional of its folded
//! trajectory and already contains the Ising phases of the bond joining it
//! to that side. One slice adds one environment spin:
//!
//! ```text
//! I'(a) = Σ_b Φ(a, b) · W(b) · I(b)
//! Φ(a, b) = Π_τ exp[−iJ(σ_τ s_τ − σ̄_τ s̄_τ)]
//! ```
//!
//! where `W` is the new spin's own trajectory weight (initial state, kicks,
//! fields and final trace). As an MPO the virtual index carries the previous
//! folded state of the new spin, so the bond dimension is 4.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{argument, Error, Result};
use crate::model::{floquet_kernel, spin, unfold, BranchOps, ModelSpec, SiteRole};
use crate::mps::{apply_mpo_zipup_with, log_overlap, read_mps, write_mps, LogScalar, TemporalMpo, TemporalMps, ZipUp, PHYS};
use crate::tensor::{matmul_rm, permute_data, DenseTensor, Truncation};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Default overlap-deficit threshold for declaring convergence.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    /// `I = 1`: the chain simply ends.
    Open,
    /// `I = Π_τ δ(σ_τ, σ̄_τ)`: the boundary spin is measured every period.
    PerfectDephaser,
}

impl BoundaryKind {
    pub fn folded_vector(self) -> [C64; PHYS] {
        match self {
            Self::Open => [ONE; PHYS],
            Self::PerfectDephaser => [ONE, ZERO, ZERO, ONE],
        }
    }

    pub fn mps(self, t: usize) -> Result<TemporalMps> {
        TemporalMps::uniform_product(t, self.folded_vector())
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Open => "open",
            Self::PerfectDephaser => "perfect_dephaser",
        })
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Self::Open),
            "perfect_dephaser" | "pd" => Ok(Self::PerfectDephaser),
            other => argument(format!("unknown boundary `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
        })
    }
}

/// Trajectory weight of one bulk environment spin, as site tensors
/// `[k_left, 4, k_right]`.
pub fn environment_weight(spec: &ModelSpec) -> Result<Vec<DenseTensor>> {
    let kernel = floquet_kernel(&spec.homogeneous(), SiteRole::Bulk)?;
    kernel.weight_chain(&BranchOps::identity(spec.t), None)
}

/// `exp[−ic(σ s − σ̄ s̄)]` for output index `a = (σ, σ̄)` and input index
/// `b = (s, s̄)`.
pub fn bond_phase(coupling: f64, a: usize, b: usize) -> C64 {
    let (s, sb) = unfold(a);
    let (e, eb) = unfold(b);
    C64::from_polar(1.0, -coupling * (spin(s) * spin(e) - spin(sb) * spin(eb)))
}

/// One dual transfer slice with the given subsystem-facing coupling.
///
/// The folded network is symmetric under spatial reflection, so the left
/// slice coincides with the right one; `side` is kept for bookkeeping.
pub fn build_transfer_slice(spec: &ModelSpec, bond_coupling: f64, side: Side) -> Result<TemporalMpo> {
    let _ = side;
    let weight = environment_weight(spec)?;
    let sites = weight
        .iter()
        .map(|w| {
            let (kl, kr) = (w.shape()[0], w.shape()[2]);
            DenseTensor::from_fn(vec![kl, PHYS, PHYS, kr], |i| {
                w.get(&[i[0], i[2], i[3]]) * bond_phase(bond_coupling, i[1], i[2])
            })
        })
        .collect();
    TemporalMpo::new(sites)
}

/// `Σ_a weight(a) · left(a) · right(a)` for MPS-shaped weight tensors
/// `[k_left, 4, k_right]`.
pub fn contract_with_weight(left: &TemporalMps, right: &TemporalMps, weight: &[DenseTensor]) -> Result<LogScalar> {
    let t = weight.len();
    if left.len() != t || right.len() != t {
        return argument(format!(
            "contraction of IMs with {} and {} sites against a {t}-site kernel",
            left.len(),
            right.len()
        ));
    }
    // env[l1, l2, k]
    let mut env = vec![ONE];
    let (mut d1, mut d2, mut dk) = (1usize, 1usize, 1usize);
    let mut log_acc = left.norm_log() + right.norm_log();
    for ((a1, a2), w) in left.sites().iter().zip(right.sites()).zip(weight) {
        let (r1, r2, kr) = (a1.shape()[2], a2.shape()[2], w.shape()[2]);
        debug_assert_eq!(w.shape()[0], dk);
        let e_perm = permute_data(&env, &[d1, d2, dk], &[1, 2, 0]);
        let mut next = vec![ZERO; r1 * r2 * kr];
        for p in 0..PHYS {
            let wp: Vec<C64> = (0..dk * kr).map(|i| w.get(&[i / kr, p, i % kr])).collect();
            if wp.iter().all(|x| *x == ZERO) {
                continue;
            }
            let a1p: Vec<C64> = (0..d1 * r1).map(|i| a1.get(&[i / r1, p, i % r1])).collect();
            let a2p: Vec<C64> = (0..d2 * r2).map(|i| a2.get(&[i / r2, p, i % r2])).collect();
            // f[l2, k, r1]
            let f = matmul_rm(&e_perm, &a1p, d2 * dk, d1, r1);
            let f = permute_data(&f, &[d2, dk, r1], &[1, 2, 0]);
            // g[k, r1, r2]
            let g = matmul_rm(&f, &a2p, dk * r1, d2, r2);
            // next[r1, r2, k'] += Σ_k g[k, r1, r2] w[k, p, k']
            let g_t = permute_data(&g, &[dk, r1 * r2], &[1, 0]);
            let contrib = matmul_rm(&g_t, &wp, r1 * r2, dk, kr);
            next.iter_mut().zip(contrib).for_each(|(x, y)| *x += y);
        }
        let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(LogScalar { log_abs: f64::NEG_INFINITY, phase: ONE });
        }
        if !scale.is_finite() {
            return Err(Error::NumericalInstability("kernel contraction overflowed".into()));
        }
        next.iter_mut().for_each(|z| *z /= scale);
        log_acc += scale.ln();
        env = next;
        d1 = r1;
        d2 = r2;
        dk = kr;
    }
    let e = env[0];
    Ok(LogScalar { log_abs: log_acc + e.norm().ln(), phase: e / e.norm() })
}

/// `N[I] = Σ_b W(b) I(b)`: the trace of a chain that ends one spin beyond
/// the IM. Equal to 1 for every exact IM.
pub fn normalization(spec: &ModelSpec, psi: &TemporalMps) -> Result<C64> {
    let ones = BoundaryKind::Open.mps(psi.len())?;
    Ok(contract_with_weight(psi, &ones, &environment_weight(spec)?)?.value())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub trunc: Truncation,
    /// Iterations are never stopped before this count.
    pub min_iters: usize,
    pub max_iters: usize,
    /// Overlap-deficit threshold.
    pub tol: f64,
    /// Ignore the relative cutoff and keep up to `chi_max` values.
    pub preserve_weak_bonds: bool,
}

impl SolveOptions {
    /// Defaults for `spec`: Floquet circuits run through the full light
    /// cone (`T` iterations plus one confirming step); Trotterized ones may
    /// stop early once the deficit falls below the tolerance.
    pub fn for_spec(spec: &ModelSpec, chi_max: Option<usize>, cutoff: f64) -> Self {
        Self {
            trunc: Truncation::new(chi_max, cutoff),
            min_iters: if spec.is_trotterized() { 1 } else { spec.t },
            max_iters: spec.t + 1,
            tol: DEFAULT_TOL,
            preserve_weak_bonds: false,
        }
    }

    pub fn effective_truncation(&self) -> Truncation {
        if self.preserve_weak_bonds {
            Truncation { cutoff: 0.0, ..self.trunc }
        } else {
            self.trunc
        }
    }
}

/// Diagnostics of one power-iteration step.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `1 − |⟨ψ_{ℓ−1}|ψ_ℓ⟩| / (‖ψ_{ℓ−1}‖‖ψ_ℓ‖)`.
    pub deficit: f64,
    /// `|ln|N[ψ_ℓ]||` before renormalization.
    pub eigenvalue_drift: f64,
    pub discarded_weight: f64,
    pub max_bond: usize,
    /// Entropies of bonds `1..T`.
    pub entropy_profile: Vec<f64>,
    pub half_cut_entropy: f64,
    pub max_entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceMatrix {
    pub psi: TemporalMps,
    pub spec: ModelSpec,
    pub iterations: usize,
    pub boundary: BoundaryKind,
    pub eigenvalue_drift: f64,
    pub side: Side,
    pub converged: bool,
    /// Discarded weight summed over all iterations.
    pub discarded_weight: f64,
    pub trunc: Truncation,
}

impl InfluenceMatrix {
    /// The IM of the opposite side.
    pub fn mirrored(&self) -> Self {
        let side = match self.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        Self { side, ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

fn record(iteration: usize, deficit: f64, drift: f64, z: &ZipUp, t: usize) -> IterationRecord {
    let entropy_profile: Vec<f64> = z.spectra.iter().map(|s| s.entropy).collect();
    let half_cut_entropy = if t >= 2 { entropy_profile[t / 2 - 1] } else { 0.0 };
    IterationRecord {
        iteration,
        deficit,
        eigenvalue_drift: drift,
        discarded_weight: z.discarded_weight,
        max_bond: z.psi.max_bond(),
        max_entropy: entropy_profile.iter().copied().fold(0.0, f64::max),
        entropy_profile,
        half_cut_entropy,
    }
}

/// Applies `step` to `psi` and rescales the result so that `N = 1`.
/// Returns the rescaled state and the log-drift.
fn renormalized(spec: &ModelSpec, z: ZipUp, iteration: usize) -> Result<(ZipUp, f64)> {
    let lambda = normalization(spec, &z.psi)?;
    let mag = lambda.norm();
    if !mag.is_finite() || mag == 0.0 {
        return Err(Error::NumericalInstability(format!(
            "IM normalization became {lambda} at iteration {iteration}"
        )));
    }
    let drift = mag.ln().abs();
    let psi = z.psi.scaled(lambda.inv());
    Ok((ZipUp { psi, ..z }, drift))
}

fn deficit(a: &TemporalMps, b: &TemporalMps) -> Result<f64> {
    let ab = log_overlap(a, b)?.log_abs;
    let aa = log_overlap(a, a)?.log_abs;
    let bb = log_overlap(b, b)?.log_abs;
    // 1 − e^x for small x without cancellation.
    Ok(-(ab - 0.5 * (aa + bb)).exp_m1())
}

/// Power iteration of a fixed step from `boundary` to the fixed point.
fn iterate<F>(
    spec: &ModelSpec,
    boundary: BoundaryKind,
    opts: &SolveOptions,
    mut step: F,
) -> Result<(InfluenceMatrix, Vec<IterationRecord>)>
where
    F: FnMut(&TemporalMps, &Truncation) -> Result<ZipUp>,
{
    spec.validate()?;
    let trunc = opts.effective_truncation();
    trunc.validate()?;
    if opts.max_iters == 0 {
        return argument("max_iters must be positive");
    }
    let t = spec.t;
    let mut psi = boundary.mps(t)?.canonicalize(0)?;
    let mut records = Vec::new();
    let mut total_discarded = 0.0;
    let mut converged = false;
    let mut drift = 0.0;
    for it in 1..=opts.max_iters {
        let z = step(&psi, &trunc)?;
        let (z, d) = renormalized(spec, z, it)?;
        drift = d;
        if !drift.is_finite() || (it > t && drift > 1.0) {
            return Err(Error::NumericalInstability(format!(
                "eigenvalue drift {drift:.3e} at iteration {it} (T = {t})"
            )));
        }
        let def = deficit(&psi, &z.psi)?;
        total_discarded += z.discarded_weight;
        records.push(record(it, def, drift, &z, t));
        psi = z.psi;
        if it >= opts.min_iters && def < opts.tol {
            converged = true;
            break;
        }
    }
    let im = InfluenceMatrix {
        psi,
        spec: *spec,
        iterations: records.len(),
        boundary,
        eigenvalue_drift: drift,
        side: Side::Right,
        converged,
        discarded_weight: total_discarded,
        trunc,
    };
    Ok((im, records))
}

/// Self-consistent IM of the homogeneous chain (any impurity in `spec` is
/// ignored here; see [`impurity_im`]). Disordered specs use the exact
/// disorder-averaged slice.
pub fn solve_im(
    spec: &ModelSpec,
    boundary: BoundaryKind,
    opts: &SolveOptions,
) -> Result<(InfluenceMatrix, Vec<IterationRecord>)> {
    if spec.disorder.is_some() {
        let slice = build_disorder_slice(spec)?;
        return iterate(spec, boundary, opts, |psi, trunc| slice.apply(psi, trunc));
    }
    let slice = build_transfer_slice(spec, spec.j_eff(), Side::Right)?;
    iterate(spec, boundary, opts, |psi, trunc| apply_mpo_zipup_with(&slice, psi, trunc))
}

/// IM seen by an impurity whose bonds are scaled by `beta`: one more slice
/// on top of the homogeneous fixed point, with coupling `β·J`.
pub fn impurity_im(spec: &ModelSpec, base: &InfluenceMatrix, trunc: &Truncation) -> Result<InfluenceMatrix> {
    let Some(imp) = spec.impurity else {
        return argument("impurity_im needs a spec with an impurity");
    };
    if spec.disorder.is_some() {
        return argument("impurities are not supported together with disorder");
    }
    if base.len() != spec.t {
        return argument(format!("base IM has {} sites, spec has T = {}", base.len(), spec.t));
    }
    let slice = build_transfer_slice(spec, imp.beta * spec.j_eff(), base.side)?;
    let z = apply_mpo_zipup_with(&slice, &base.psi, trunc)?;
    let (z, drift) = renormalized(spec, z, base.iterations + 1)?;
    Ok(InfluenceMatrix {
        psi: z.psi,
        spec: *spec,
        iterations: base.iterations + 1,
        eigenvalue_drift: drift,
        discarded_weight: base.discarded_weight + z.discarded_weight,
        ..base.clone()
    })
}

/// The disorder-averaged slice, kept as two factors: the environment
/// spin's trajectory weight (diagonal, bond 4) and the constraint
/// `Σ_τ (σ_τ s_τ − σ̄_τ s̄_τ) = 0` (bond ≤ T + 1).
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderSliceMpo {
    weight: TemporalMpo,
    constraint: TemporalMpo,
}

/// Half the change of the running sum, `(σs − σ̄s̄)/2 ∈ {−1, 0, 1}`.
fn constraint_step(a: usize, b: usize) -> i64 {
    let (s, sb) = unfold(a);
    let (e, eb) = unfold(b);
    ((spin(s) * spin(e) - spin(sb) * spin(eb)) / 2.0) as i64
}

/// Largest `|B|` carried on bond `bond` (sites to its left) of a `t`-site
/// constraint: the sum must be reachable and still able to return to zero.
fn constraint_radius(bond: usize, t: usize) -> usize {
    bond.min(t - bond)
}

impl DisorderSliceMpo {
    pub fn weight_part(&self) -> &TemporalMpo {
        &self.weight
    }

    pub fn constraint_part(&self) -> &TemporalMpo {
        &self.constraint
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    pub fn max_bond(&self) -> usize {
        self.constraint.max_bond()
    }

    /// Single MPO `constraint · weight` (bond up to `4(T+1)`).
    pub fn to_mpo(&self) -> Result<TemporalMpo> {
        let sites = self
            .constraint
            .sites()
            .iter()
            .zip(self.weight.sites())
            .map(|(c, w)| {
                let (cl, cr) = (c.shape()[0], c.shape()[3]);
                let (wl, wr) = (w.shape()[0], w.shape()[3]);
                DenseTensor::from_fn(vec![cl * wl, PHYS, PHYS, cr * wr], |i| {
                    let (bl, kl) = (i[0] / wl, i[0] % wl);
                    let (br, kr) = (i[3] / wr, i[3] % wr);
                    (0..PHYS).map(|m| c.get(&[bl, i[1], m, br]) * w.get(&[kl, m, i[2], kr])).sum()
                })
            })
            .collect();
        TemporalMpo::new(sites)
    }

    /// Two successive zip-ups: the weight, then the constraint.
    pub fn apply(&self, psi: &TemporalMps, trunc: &Truncation) -> Result<ZipUp> {
        let first = apply_mpo_zipup_with(&self.weight, psi, trunc)?;
        let second = apply_mpo_zipup_with(&self.constraint, &first.psi, trunc)?;
        Ok(ZipUp { discarded_weight: first.discarded_weight + second.discarded_weight, ..second })
    }
}

pub fn build_disorder_slice(spec: &ModelSpec) -> Result<DisorderSliceMpo> {
    if spec.disorder.is_none() {
        return argument("disorder slice requested for a spec without disorder");
    }
    spec.validate()?;
    let t = spec.t;
    let weight_sites = environment_weight(spec)?
        .iter()
        .map(|w| {
            let (kl, kr) = (w.shape()[0], w.shape()[2]);
            DenseTensor::from_fn(vec![kl, PHYS, PHYS, kr], |i| {
                if i[1] == i[2] {
                    w.get(&[i[0], i[2], i[3]])
                } else {
                    ZERO
                }
            })
        })
        .collect();
    let constraint_sites = (0..t)
        .map(|i| {
            let rl = constraint_radius(i, t) as i64;
            let rr = constraint_radius(i + 1, t) as i64;
            let (dl, dr) = (2 * rl as usize + 1, 2 * rr as usize + 1);
            DenseTensor::from_fn(vec![dl, PHYS, PHYS, dr], |x| {
                let bl = x[0] as i64 - rl;
                let br = x[3] as i64 - rr;
                if br == bl + constraint_step(x[1], x[2]) {
                    ONE
                } else {
                    ZERO
                }
            })
        })
        .collect();
    Ok(DisorderSliceMpo { weight: TemporalMpo::new(weight_sites)?, constraint: TemporalMpo::new(constraint_sites)? })
}

/// Metadata stored in front of a checkpointed IM. The impurity field scale
/// is deliberately absent: the IM does not depend on it.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub entries: Vec<(String, String)>,
}

impl CheckpointHeader {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

const CHECKPOINT_MAGIC: &str = "TIMCKPT1";

fn checkpoint_entries(im: &InfluenceMatrix) -> Vec<(String, String)> {
    let s = &im.spec;
    let opt = |v: Option<usize>| v.map_or("none".to_string(), |x| x.to_string());
    vec![
        ("engine".into(), crate::ENGINE_VERSION.into()),
        ("J".into(), format!("{:?}", s.j)),
        ("g".into(), format!("{:?}", s.g)),
        ("h".into(), format!("{:?}", s.h)),
        ("T".into(), s.t.to_string()),
        ("eps".into(), format!("{:?}", s.eps)),
        ("initial_state".into(), s.initial_state.to_string()),
        ("beta".into(), s.impurity.map_or("none".to_string(), |i| format!("{:?}", i.beta))),
        ("disorder".into(), if s.disorder.is_some() { "uniform_J_0_2pi" } else { "none" }.into()),
        ("trotter_order".into(), s.trotter_order.to_string()),
        ("boundary".into(), im.boundary.to_string()),
        ("side".into(), im.side.to_string()),
        ("chi".into(), opt(im.trunc.chi_max)),
        ("cutoff".into(), format!("{:?}", im.trunc.cutoff)),
        ("iterations".into(), im.iterations.to_string()),
    ]
}

pub fn write_checkpoint<W: Write>(mut w: W, im: &InfluenceMatrix) -> Result<()> {
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    for (k, v) in checkpoint_entries(im) {
        writeln!(w, "{k}={v}")?;
    }
    writeln!(w, "end")?;
    write_mps(w, &im.psi)
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<(CheckpointHeader, TemporalMps)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::Format("not an IM checkpoint".into()));
    }
    let mut entries = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("checkpoint header is not terminated".into()));
        }
        let l = line.trim_end();
        if l == "end" {
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Format(format!("bad header line `{l}`")))?;
        entries.push((k.to_string(), v.to_string()));
    }
    let psi = read_mps(r)?;
    Ok((CheckpointHeader { entries }, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Truncation;
    use std::f64::consts::FRAC_PI_4;

    fn dense_dist(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn decoupled_slice_gives_a_constant() {
        let spec = ModelSpec::floquet(0.0, 0.7, 0.3, 3);
        let slice = build_transfer_slice(&spec, 0.0, Side::Right).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let psi = TemporalMps::random(3, 4, &mut rng).unwrap();
        let out = apply_mpo_zipup_with(&slice, &psi, &Truncation::new(None, 1e-12)).unwrap();
        assert_eq!(out.psi.max_bond(), 1);
        let v = out.psi.to_dense().unwrap();
        assert!(v.iter().all(|x| (x - v[0]).norm() < 1e-12 * v[0].norm()));
    }

    #[test]
    fn slice_bond_dimension_is_four() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 5);
        let slice = build_transfer_slice(&spec, spec.j_eff(), Side::Left).unwrap();
        assert_eq!(slice.max_bond(), 4);
        assert_eq!(slice, build_transfer_slice(&spec, spec.j_eff(), Side::Right).unwrap());
    }

    #[test]
    fn open_boundary_is_normalized() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 4);
        for b in [BoundaryKind::Open, BoundaryKind::PerfectDephaser] {
            let n = normalization(&spec, &b.mps(4).unwrap()).unwrap();
            assert!((n - ONE).norm() < 1e-13, "{b}: {n}");
        }
    }

    #[test]
    fn g0_fixed_point_is_the_cosine() {
        let (j, t) = (0.37, 5);
        let spec = ModelSpec::floquet(j, 0.0, 0.4, t);
        let (im, _) = solve_im(&spec, BoundaryKind::Open, &SolveOptions::for_spec(&spec, None, 0.0)).unwrap();
        assert!(im.converged);
        let v = im.psi.to_dense().unwrap();
        for (idx, x) in v.iter().enumerate() {
            let sum: f64 = (0..t)
                .map(|tau| {
                    let (s, sb) = unfold((idx >> (2 * (t - 1 - tau))) & 3);
                    spin(s) - spin(sb)
                })
                .sum();
            assert!((x - C64::new((j * sum).cos(), 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn perfect_dephaser_is_fixed_at_the_self_dual_point() {
        let spec = ModelSpec::floquet(FRAC_PI_4, FRAC_PI_4, 0.3, 4);
        let pd = BoundaryKind::PerfectDephaser.mps(4).unwrap();
        let slice = build_transfer_slice(&spec, spec.j_eff(), Side::Right).unwrap();
        let out = apply_mpo_zipup_with(&slice, &pd, &Truncation::exact()).unwrap();
        let f = crate::mps::fidelity(&out.psi, &pd).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn light_cone_convergence() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 4);
        let (im, recs) = solve_im(&spec, BoundaryKind::Open, &SolveOptions::for_spec(&spec, None, 0.0)).unwrap();
        assert!(im.converged);
        assert_eq!(recs.len(), 4);
        assert!(recs[3].deficit < 1e-10 && recs[2].deficit < 1e-10);
        assert!(recs[1].deficit > 1e-6);
        // One step beyond the light cone changes nothing.
        let slice = build_transfer_slice(&spec, spec.j_eff(), Side::Right).unwrap();
        let next = apply_mpo_zipup_with(&slice, &im.psi, &Truncation::exact()).unwrap();
        assert!(deficit(&im.psi, &next.psi).unwrap() < 1e-10);
    }

    #[test]
    fn impurity_with_zero_beta_is_constant() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 3).with_impurity(0.7, 0.0);
        let (base, _) = solve_im(&spec, BoundaryKind::Open, &SolveOptions::for_spec(&spec, None, 0.0)).unwrap();
        let imp = impurity_im(&spec, &base, &Truncation::exact()).unwrap();
        let v = imp.psi.to_dense().unwrap();
        assert!(dense_dist(&v, &vec![ONE; v.len()]) < 1e-12);
    }

    #[test]
    fn single_step_constraint() {
        let spec = ModelSpec::dtc(0.1, 0.3, 1);
        let slice = build_disorder_slice(&spec).unwrap();
        let c = slice.constraint_part().to_dense_matrix().unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let (s, sb) = unfold(a);
                let (e, eb) = unfold(b);
                let expect = if spin(s) * spin(e) == spin(sb) * spin(eb) { 1.0 } else { 0.0 };
                assert_eq!(c.get(&[a, b]), C64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn constraint_bond_is_trimmed() {
        let spec = ModelSpec::dtc(0.1, 0.3, 8);
        let slice = build_disorder_slice(&spec).unwrap();
        assert_eq!(slice.constraint_part().bond_dims(), vec![1, 3, 5, 7, 9, 7, 5, 3, 1]);
        assert!(slice.max_bond() <= spec.t + 1);
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 3);
        let (im, _) = solve_im(&spec, BoundaryKind::Open, &SolveOptions::for_spec(&spec, Some(16), 1e-12)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &im).unwrap();
        let (hdr, psi) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(psi, im.psi);
        assert_eq!(hdr.get("T"), Some("3"));
        assert_eq!(hdr.get("boundary"), Some("open"));
        assert_eq!(hdr.get("chi"), Some("16"));
        assert!(hdr.get("alpha").is_none());
    }
}
