//! Local observables from a pair of influence matrices.
//!
//! Site 0 is contracted with its left and right IMs through its own local
//! kernel. Operators are inserted at times `τ = 0..=T`: time `τ` sits after
//! `τ` complete periods, so `τ = 0` acts on the initial state and `τ = T`
//! right before the final trace.

use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{argument, Error, Result};
use crate::influence::{
    contract_with_weight, impurity_im, solve_im, BoundaryKind, InfluenceMatrix, IterationRecord, Side, SolveOptions,
};
use crate::model::{
    floquet_kernel, mat_adjoint, mat_identity, mat_mul, trotterize, BranchOps, HamiltonianParams, InitialState,
    LocalKernel, Mat2, ModelSpec, SiteRole,
};
use crate::mps::TemporalMps;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Mat2 {
        let i = C64::new(0.0, 1.0);
        match self {
            Self::I => mat_identity(),
            Self::X => [[ZERO, ONE], [ONE, ZERO]],
            Self::Y => [[ZERO, -i], [i, ZERO]],
            Self::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// `ρ → Oρ`.
    Forward,
    /// `ρ → ρO`.
    Backward,
    /// `ρ → OρO†`.
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub time: usize,
    pub branch: Branch,
    pub op: Pauli,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InsertionPlan {
    insertions: Vec<Insertion>,
    /// Replaces the initial state of site 0.
    pub initial_state: Option<Mat2>,
}

impl InsertionPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, time: usize, branch: Branch, op: Pauli) -> Result<Self> {
        self.push(Insertion { time, branch, op })?;
        Ok(self)
    }

    pub fn push(&mut self, ins: Insertion) -> Result<()> {
        let clash = self.insertions.iter().any(|o| {
            o.time == ins.time && (o.branch == ins.branch || o.branch == Branch::Both || ins.branch == Branch::Both)
        });
        if clash {
            return argument(format!("a {:?} insertion at τ = {} already exists", ins.branch, ins.time));
        }
        self.insertions.push(ins);
        Ok(())
    }

    pub fn insertions(&self) -> &[Insertion] {
        &self.insertions
    }

    /// Branch operators for a network of `t` periods.
    pub fn branch_ops(&self, t: usize) -> Result<BranchOps> {
        let mut ops = BranchOps::identity(t);
        for ins in &self.insertions {
            if ins.time > t {
                return argument(format!("insertion at τ = {} beyond T = {t}", ins.time));
            }
            let m = ins.op.matrix();
            match ins.branch {
                Branch::Forward => ops.a[ins.time] = m,
                Branch::Backward => ops.b[ins.time] = mat_adjoint(&m),
                Branch::Both => {
                    ops.a[ins.time] = m;
                    ops.b[ins.time] = m;
                }
            }
        }
        Ok(ops)
    }
}

fn check_pair(left: &InfluenceMatrix, right: &InfluenceMatrix) -> Result<()> {
    if left.len() != right.len() {
        return argument(format!("IMs of lengths {} and {}", left.len(), right.len()));
    }
    if left.side == right.side {
        return argument(format!("both IMs are {}-side", left.side));
    }
    Ok(())
}

/// Network value with explicit branch operators (not restricted to Pauli
/// matrices).
pub fn contract_branch_ops(
    left: &InfluenceMatrix,
    right: &InfluenceMatrix,
    kernel: &LocalKernel,
    ops: &BranchOps,
    rho0: Option<&Mat2>,
) -> Result<C64> {
    check_pair(left, right)?;
    if ops.a.len() != left.len() + 1 {
        return argument("branch operators do not match the IM length");
    }
    let weight = kernel.weight_chain(ops, rho0)?;
    Ok(contract_with_weight(&left.psi, &right.psi, &weight)?.value())
}

/// Folded-network value of site 0 between `left` and `right` with the
/// insertions of `plan`.
pub fn temporal_contract(
    left: &InfluenceMatrix,
    right: &InfluenceMatrix,
    kernel: &LocalKernel,
    plan: &InsertionPlan,
) -> Result<C64> {
    let ops = plan.branch_ops(left.len())?;
    contract_branch_ops(left, right, kernel, &ops, plan.initial_state.as_ref())
}

/// `Tr[A ρ B†]`: the value of a plan with no periods.
fn zero_time_value(kernel: &LocalKernel, plan: &InsertionPlan) -> Result<C64> {
    let ops = plan.branch_ops(0)?;
    let rho = plan.initial_state.unwrap_or(kernel.rho0);
    let m = mat_mul(&mat_mul(&ops.a[0], &rho), &mat_adjoint(&ops.b[0]));
    Ok(m[0][0] + m[1][1])
}

/// Whether series points get their own IMs or share one of maximal length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesMode {
    /// A freshly converged IM of length `T` for every point.
    Fresh,
    /// One IM of length `T_max`; by causality an insertion at `τ < T_max`
    /// gives the same value as a length-`τ` network.
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesOptions {
    pub chi_max: Option<usize>,
    pub cutoff: f64,
    pub boundary: BoundaryKind,
    pub mode: SeriesMode,
    pub preserve_weak_bonds: bool,
    /// Overrides the convergence threshold.
    pub tol: Option<f64>,
}

impl SeriesOptions {
    pub fn new(chi_max: Option<usize>, cutoff: f64) -> Self {
        Self {
            chi_max,
            cutoff,
            boundary: BoundaryKind::Open,
            mode: SeriesMode::Fresh,
            preserve_weak_bonds: false,
            tol: None,
        }
    }

    pub fn shared(self) -> Self {
        Self { mode: SeriesMode::Shared, ..self }
    }

    pub fn with_boundary(self, boundary: BoundaryKind) -> Self {
        Self { boundary, ..self }
    }

    pub fn solve_options(&self, spec: &ModelSpec) -> SolveOptions {
        let mut o = SolveOptions::for_spec(spec, self.chi_max, self.cutoff);
        o.preserve_weak_bonds = self.preserve_weak_bonds;
        if let Some(tol) = self.tol {
            o.tol = tol;
        }
        o
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesMeta {
    pub chi: Option<usize>,
    pub cutoff: f64,
    pub eps: f64,
    pub boundary: String,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Model parameters as `(name, value)` pairs.
    pub params: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultSeries {
    pub label: String,
    /// Step count, or physical time for Trotterized runs.
    pub abscissa: Vec<f64>,
    pub values: Vec<C64>,
    pub entropy_halfcut: Vec<f64>,
    pub entropy_max: Vec<f64>,
    pub discarded_weight: Vec<f64>,
    /// `|Z − 1|` of the empty plan for the IMs behind each point.
    pub trace_error: Vec<f64>,
    pub meta: SeriesMeta,
    /// Non-fatal conditions, e.g. entropies not converged in χ.
    pub notes: Vec<String>,
}

pub const CSV_HEADER: &str =
    "abscissa,value_re,value_im,entropy_halfcut,entropy_max,discarded_weight,chi,eps,boundary,seed";

/// Shortest-free full-precision decimal: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

impl ResultSeries {
    fn new(label: impl Into<String>, meta: SeriesMeta) -> Self {
        Self { label: label.into(), meta, ..Default::default() }
    }

    fn push(&mut self, x: f64, v: C64, s_half: f64, s_max: f64, w: f64, trace_err: f64) {
        self.abscissa.push(x);
        self.values.push(v);
        self.entropy_halfcut.push(s_half);
        self.entropy_max.push(s_max);
        self.discarded_weight.push(w);
        self.trace_error.push(trace_err);
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [self.values.len(), self.entropy_halfcut.len(), self.entropy_max.len(), self.discarded_weight.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Dimension("series columns have different lengths".into()));
        }
        if self.abscissa.windows(2).any(|w| !(w[1] > w[0])) {
            return argument("abscissa is not strictly increasing");
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let chi = self.meta.chi.map_or("none".to_string(), |c| c.to_string());
        let seed = self.meta.seed.map_or("none".to_string(), |s| s.to_string());
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                format_f64(self.abscissa[i]),
                format_f64(self.values[i].re),
                format_f64(self.values[i].im),
                format_f64(self.entropy_halfcut[i]),
                format_f64(self.entropy_max[i]),
                format_f64(self.discarded_weight[i]),
                chi,
                format_f64(self.meta.eps),
                self.meta.boundary,
                seed
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

fn spec_params(spec: &ModelSpec) -> Vec<(String, String)> {
    let mut p = vec![
        ("J".to_string(), format!("{:?}", spec.j)),
        ("g".to_string(), format!("{:?}", spec.g)),
        ("h".to_string(), format!("{:?}", spec.h)),
        ("eps".to_string(), format!("{:?}", spec.eps)),
        ("initial_state".to_string(), spec.initial_state.to_string()),
        ("trotter_order".to_string(), spec.trotter_order.to_string()),
    ];
    if let Some(imp) = spec.impurity {
        p.push(("alpha".to_string(), format!("{:?}", imp.alpha)));
        p.push(("beta".to_string(), format!("{:?}", imp.beta)));
    }
    if spec.disorder.is_some() {
        p.push(("disorder".to_string(), "uniform_J_0_2pi".to_string()));
    }
    p
}

fn meta_for(spec: &ModelSpec, opts: &SeriesOptions) -> SeriesMeta {
    SeriesMeta {
        chi: opts.chi_max,
        cutoff: opts.cutoff,
        eps: spec.eps,
        boundary: opts.boundary.to_string(),
        seed: None,
        samples: None,
        params: spec_params(spec),
    }
}

/// Converged left/right IMs and the site-0 kernel for `spec`.
#[derive(Clone, Debug)]
pub struct SolvedPair {
    pub left: InfluenceMatrix,
    pub right: InfluenceMatrix,
    pub kernel: LocalKernel,
    pub records: Vec<IterationRecord>,
    pub entropy_halfcut: f64,
    pub entropy_max: f64,
}

impl SolvedPair {
    /// `|Z − 1|` for the empty plan.
    pub fn trace_error(&self) -> Result<f64> {
        Ok((temporal_contract(&self.left, &self.right, &self.kernel, &InsertionPlan::new())? - ONE).norm())
    }

    pub fn value(&self, plan: &InsertionPlan) -> Result<C64> {
        temporal_contract(&self.left, &self.right, &self.kernel, plan)
    }
}

fn entropies(psi: &TemporalMps) -> Result<(f64, f64)> {
    let profile = psi.entropy_profile()?;
    if profile.is_empty() {
        return Ok((0.0, 0.0));
    }
    let half = profile[psi.len() / 2 - 1].entropy;
    let max = profile.iter().map(|s| s.entropy).fold(0.0, f64::max);
    Ok((half, max))
}

/// Solves the IM of `spec` (including its impurity, if any) and pairs it
/// with its mirror image.
pub fn solve_pair(spec: &ModelSpec, opts: &SeriesOptions) -> Result<SolvedPair> {
    let solve_opts = opts.solve_options(spec);
    let (base, records) = solve_im(spec, opts.boundary, &solve_opts)?;
    let (right, role) = match spec.impurity {
        Some(_) => (impurity_im(spec, &base, &solve_opts.effective_truncation())?, SiteRole::ImpuritySite),
        None => (base, SiteRole::Bulk),
    };
    let (entropy_halfcut, entropy_max) = match (spec.impurity, records.last()) {
        (None, Some(r)) => (r.half_cut_entropy, r.max_entropy),
        _ => entropies(&right.psi)?,
    };
    let left = InfluenceMatrix { side: Side::Left, ..right.clone() };
    Ok(SolvedPair { left, right, kernel: floquet_kernel(spec, role)?, records, entropy_halfcut, entropy_max })
}

fn abscissa(spec: &ModelSpec, tau: usize) -> f64 {
    if spec.is_trotterized() {
        tau as f64 * spec.eps
    } else {
        tau as f64
    }
}

/// Runs `plan_at(τ)` for `τ = 1..=t_max`, either on fresh IMs per point or
/// on one shared IM of length `t_max`.
fn series_driver(
    spec: &ModelSpec,
    t_max: usize,
    opts: &SeriesOptions,
    series: &mut ResultSeries,
    plan_at: impl Fn(usize) -> Result<InsertionPlan>,
) -> Result<()> {
    match opts.mode {
        SeriesMode::Fresh => {
            for t in 1..=t_max {
                let s = spec.with_steps(t);
                let pair = solve_pair(&s, opts)?;
                let v = pair.value(&plan_at(t)?)?;
                series.push(
                    abscissa(spec, t),
                    v,
                    pair.entropy_halfcut,
                    pair.entropy_max,
                    pair.right.discarded_weight,
                    pair.trace_error()?,
                );
            }
        }
        SeriesMode::Shared => {
            let s = spec.with_steps(t_max);
            let pair = solve_pair(&s, opts)?;
            let trace_err = pair.trace_error()?;
            for tau in 1..=t_max {
                let v = pair.value(&plan_at(tau)?)?;
                series.push(
                    abscissa(spec, tau),
                    v,
                    pair.entropy_halfcut,
                    pair.entropy_max,
                    pair.right.discarded_weight,
                    trace_err,
                );
            }
        }
    }
    Ok(())
}

/// `C_zz(T) = Tr[σ^z(T) σ^z(0) ρ]` for `T = 0..=t_max`.
pub fn autocorrelator_series(spec: &ModelSpec, opts: &SeriesOptions, t_max: usize) -> Result<ResultSeries> {
    if spec.initial_state != InitialState::InfiniteTemperature {
        return argument("the autocorrelator series expects an infinite-temperature state");
    }
    let mut series = ResultSeries::new("czz", meta_for(spec, opts));
    let kernel = floquet_kernel(spec, if spec.impurity.is_some() { SiteRole::ImpuritySite } else { SiteRole::Bulk })?;
    let at_zero = InsertionPlan::new().with(0, Branch::Forward, Pauli::Z)?.with(0, Branch::Backward, Pauli::Z)?;
    series.push(0.0, zero_time_value(&kernel, &at_zero)?, 0.0, 0.0, 0.0, 0.0);
    series_driver(spec, t_max, opts, &mut series, |tau| {
        InsertionPlan::new().with(0, Branch::Forward, Pauli::Z)?.with(tau, Branch::Forward, Pauli::Z)
    })?;
    Ok(series)
}

/// `⟨σ^z_0(t)⟩` after a quench from the fully polarized state, at
/// `t = k·eps` for `k = 0..=t_max/eps`.
pub fn quench_magnetization_series(
    params: HamiltonianParams,
    t_max: f64,
    eps: f64,
    opts: &SeriesOptions,
) -> Result<ResultSeries> {
    let spec = trotterize(params, t_max, eps)?.with_initial_state(InitialState::ZPolarizedUp);
    let mut series = ResultSeries::new("sz_quench", meta_for(&spec, opts));
    series.push(0.0, ONE, 0.0, 0.0, 0.0, 0.0);
    series_driver(&spec, spec.t, opts, &mut series, |tau| InsertionPlan::new().with(tau, Branch::Forward, Pauli::Z))?;
    Ok(series)
}

/// Half-cut and maximal IM entropies for a family of specs, each solved
/// for every χ in `chis` (ascending). Values come from the largest χ; a
/// note is recorded when the two largest disagree by more than 2%.
pub fn entropy_series(
    points: &[(f64, ModelSpec)],
    chis: &[usize],
    opts: &SeriesOptions,
    label: &str,
) -> Result<ResultSeries> {
    if chis.is_empty() {
        return argument("entropy series needs at least one bond dimension");
    }
    let mut chis = chis.to_vec();
    chis.sort_unstable();
    let first = points.first().map(|p| p.1).ok_or_else(|| Error::Argument("no parameter points".into()))?;
    let mut meta = meta_for(&first, opts);
    meta.chi = chis.last().copied();
    let mut series = ResultSeries::new(label, meta);
    for (x, spec) in points {
        let mut results = Vec::new();
        for &chi in &chis {
            let o = SeriesOptions { chi_max: Some(chi), ..*opts };
            let pair = solve_pair(spec, &o)?;
            results.push((pair.entropy_halfcut, pair.entropy_max, pair.right.discarded_weight, pair.trace_error()?));
        }
        let (s_half, s_max, w, tr) = *results.last().expect("non-empty");
        if results.len() >= 2 {
            let prev = results[results.len() - 2].0;
            if (s_half - prev).abs() > 0.02 * s_half.abs().max(prev.abs()) {
                series.notes.push(format!("abscissa {x}: half-cut entropy not converged in chi ({prev} vs {s_half})"));
            }
        }
        series.push(*x, C64::new(s_half, 0.0), s_half, s_max, w, tr);
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_opts() -> SeriesOptions {
        SeriesOptions::new(None, 0.0)
    }

    #[test]
    fn empty_plan_is_trace_one() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 4);
        let pair = solve_pair(&spec, &exact_opts()).unwrap();
        assert!(pair.trace_error().unwrap() < 1e-8);
    }

    #[test]
    fn equal_time_autocorrelator_is_one() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 3);
        let pair = solve_pair(&spec, &exact_opts()).unwrap();
        let plan = InsertionPlan::new().with(0, Branch::Forward, Pauli::Z).unwrap().with(0, Branch::Backward, Pauli::Z).unwrap();
        assert!((pair.value(&plan).unwrap() - ONE).norm() < 1e-8);
    }

    #[test]
    fn g0_autocorrelator_is_conserved() {
        let spec = ModelSpec::floquet(0.6, 0.0, 0.3, 1);
        let s = autocorrelator_series(&spec, &exact_opts(), 5).unwrap();
        for v in &s.values {
            assert!((v - ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn conflicting_insertions_are_rejected() {
        let plan = InsertionPlan::new().with(2, Branch::Both, Pauli::X).unwrap();
        assert!(plan.clone().with(2, Branch::Forward, Pauli::Z).is_err());
        assert!(plan.with(3, Branch::Forward, Pauli::Z).is_ok());
    }

    #[test]
    fn duplicated_sides_are_rejected() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 2);
        let pair = solve_pair(&spec, &exact_opts()).unwrap();
        let r = temporal_contract(&pair.right, &pair.right, &pair.kernel, &InsertionPlan::new());
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn quench_starts_at_one() {
        let s = quench_magnetization_series(HamiltonianParams { j: 1.0, g: 0.25, h: 0.4 }, 0.2, 0.04, &exact_opts()).unwrap();
        assert_eq!(s.values[0], ONE);
        assert_eq!(s.len(), 6);
        s.validate().unwrap();
    }

    #[test]
    fn g0_quench_stays_polarized() {
        let s = quench_magnetization_series(HamiltonianParams { j: 1.0, g: 0.0, h: 0.4 }, 0.2, 0.04, &exact_opts()).unwrap();
        for v in &s.values {
            assert!((v - ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn csv_has_fixed_columns_and_full_precision() {
        let spec = ModelSpec::floquet(0.8, 0.7236, 0.6472, 1);
        let s = autocorrelator_series(&spec, &SeriesOptions::new(Some(8), 1e-12), 2).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[0], "0.0000000000000000e0");
        assert_eq!(row[6], "8");
        let re: f64 = row[1].parse().unwrap();
        assert_eq!(re, 1.0);
    }

    #[test]
    fn perfect_dephaser_im_has_no_entropy() {
        let pd = crate::influence::BoundaryKind::PerfectDephaser.mps(6).unwrap();
        assert!(entropies(&pd).unwrap().1.abs() < 1e-14);
    }
}
