//! Engine-vs-oracle comparisons bundled into one suite.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64 as C64;

use super::closed_form::im_g0;
use super::dense::{
    dense_disorder_slice, dense_impurity_im, dense_network_value, dense_slice, dense_transfer_fixed_point,
    forward_pair, quadrature_disorder_slice, MAX_DENSE_T,
};
use super::ed::{ed_autocorrelator, MAX_ED_SITES};
use super::FoldedDenseIM;
use crate::error::{argument, Result};
use crate::influence::{build_disorder_slice, build_transfer_slice, impurity_im, solve_im, BoundaryKind, Side, SolveOptions};
use crate::model::{floquet_kernel, ModelSpec, SiteRole};
use crate::observables::{autocorrelator_series, Pauli, SeriesOptions};

/// Tolerance of every dense-vs-MPS comparison.
pub const CHECK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub t: usize,
    pub error: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.error.is_finite() && self.error <= self.tol
    }
}

fn exact(spec: &ModelSpec) -> SolveOptions {
    SolveOptions::for_spec(spec, None, 1e-14)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Generic non-integrable parameters.
pub fn generic_spec(t: usize) -> ModelSpec {
    ModelSpec::floquet(0.8, 0.7236, 0.6472, t)
}

/// All checks at `t` steps. `t` is capped by the dense limit; ED checks
/// are skipped when `2t + 1` exceeds the ED limit.
pub fn run_checks(t: usize) -> Result<Vec<CheckResult>> {
    if t == 0 || t > MAX_DENSE_T {
        return argument(format!("oracle checks support 1..={MAX_DENSE_T} steps"));
    }
    let mut out = Vec::new();
    let mut push = |name: &str, error: f64| out.push(CheckResult { name: name.into(), t, error, tol: CHECK_TOL });

    let spec = generic_spec(t);
    let mpo = build_transfer_slice(&spec, spec.j_eff(), Side::Right)?.to_dense_matrix()?;
    push("slice_mpo_vs_dense", mpo.max_abs_diff(&dense_slice(&spec, spec.j_eff())?)?);

    let (im, _) = solve_im(&spec, BoundaryKind::Open, &exact(&spec))?;
    let fp = dense_transfer_fixed_point(&spec, BoundaryKind::Open)?;
    let mps_dense = FoldedDenseIM::from_mps(&im.psi)?;
    push("im_vs_dense_fixed_point", mps_dense.error_up_to_scale(&fp));

    let kernel = floquet_kernel(&spec, SiteRole::Bulk)?;
    let ops = forward_pair(t, Pauli::Z.matrix());
    let dense_value = dense_network_value(&kernel, &ops, None, &fp, &fp)?;
    let dense_norm = dense_network_value(&kernel, &crate::model::BranchOps::identity(t), None, &fp, &fp)?;
    let left = im.mirrored();
    let engine_value = crate::observables::contract_branch_ops(&left, &im, &kernel, &ops, None)?;
    push("czz_vs_dense_network", (engine_value - dense_value / dense_norm).norm());

    let g0 = ModelSpec::floquet(0.37, 0.0, 0.5, t);
    let (im0, _) = solve_im(&g0, BoundaryKind::Open, &exact(&g0))?;
    push("g0_im_vs_closed_form", FoldedDenseIM::from_mps(&im0.psi)?.error_up_to_scale(&im_g0(0.37, t)?));

    let sd = ModelSpec::floquet(FRAC_PI_4, FRAC_PI_4, 0.3, t);
    let (im_sd, _) = solve_im(&sd, BoundaryKind::Open, &exact(&sd))?;
    let pd = dense_transfer_fixed_point(&sd, BoundaryKind::PerfectDephaser)?;
    push("self_dual_im_vs_dephaser", FoldedDenseIM::from_mps(&im_sd.psi)?.error_up_to_scale(&pd));

    let dis = ModelSpec::dtc(0.1, 0.3, t);
    let dslice = build_disorder_slice(&dis)?.to_mpo()?.to_dense_matrix()?;
    push("disorder_slice_vs_exact_average", dslice.max_abs_diff(&dense_disorder_slice(&dis)?)?);
    push("disorder_slice_vs_quadrature", dslice.max_abs_diff(&quadrature_disorder_slice(&dis, 64)?)?);
    let (im_dis, _) = solve_im(&dis, BoundaryKind::Open, &exact(&dis))?;
    let fp_dis = dense_transfer_fixed_point(&dis, BoundaryKind::Open)?;
    push("disorder_im_vs_dense_fixed_point", FoldedDenseIM::from_mps(&im_dis.psi)?.error_up_to_scale(&fp_dis));

    let imp = spec.with_impurity(0.6, 0.25);
    let trunc = exact(&imp).trunc;
    let im_imp = impurity_im(&imp, &im, &trunc)?;
    push(
        "impurity_im_vs_dense",
        FoldedDenseIM::from_mps(&im_imp.psi)?.error_up_to_scale(&dense_impurity_im(&imp, BoundaryKind::Open)?),
    );

    if 2 * t + 1 <= MAX_ED_SITES {
        let opts = SeriesOptions::new(None, 1e-14);
        for (name, s) in [
            ("czz_vs_ed", spec),
            ("impurity_czz_vs_ed", imp),
            ("trotter_czz_vs_ed", ModelSpec { eps: 0.2, ..ModelSpec::floquet(1.0, 0.9, 0.4, t) }),
        ] {
            let engine = autocorrelator_series(&s, &opts, t)?;
            let ed = ed_autocorrelator(&s.with_steps(t), t)?;
            push(name, max_diff(&engine.values, &ed));
        }
    }
    Ok(out)
}

/// [`run_checks`] for every `T` in `1..=t_max`.
pub fn run_suite(t_max: usize) -> Result<Vec<CheckResult>> {
    let mut all = Vec::new();
    for t in 1..=t_max {
        all.extend(run_checks(t)?);
    }
    Ok(all)
}
