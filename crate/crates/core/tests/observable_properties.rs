use num_complex::Complex64 as C64;
use proptest::prelude::*;

use temporal_im::influence::{
    impurity_im, solve_im, write_checkpoint, BoundaryKind, SolveOptions,
};
use temporal_im::model::{floquet_kernel, BranchOps, Mat2, ModelSpec, SiteRole};
use temporal_im::mps::fidelity;
use temporal_im::observables::{
    autocorrelator_series, contract_branch_ops, solve_pair, temporal_contract, Branch, InsertionPlan, Pauli,
    SeriesOptions,
};
use temporal_im::oracles::closed_form::isolated_spin_autocorrelator;

fn fig2(t: usize) -> ModelSpec {
    ModelSpec::floquet(0.8, 0.7236, 0.6472, t)
}

fn hermitian(c: [f64; 4]) -> Mat2 {
    let m = |p: Pauli| p.matrix();
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (k, p) in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
        let pm = m(p);
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += pm[i][j] * c[k];
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn autocorrelator_is_real_and_bounded(
        j in -1.5f64..1.5,
        g in -1.5f64..1.5,
        h in -1.0f64..1.0,
        eps in prop_oneof![Just(0.0), 0.05f64..0.3],
    ) {
        let spec = ModelSpec { eps, ..ModelSpec::floquet(j, g, h, 5) };
        let s = autocorrelator_series(&spec, &SeriesOptions::new(Some(64), 1e-12).shared(), 5).unwrap();
        for v in &s.values {
            prop_assert!(v.im.abs() < 1e-8, "{v}");
            prop_assert!(v.norm() <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn contraction_is_linear_in_each_insertion(
        c1 in prop::array::uniform4(-1.0f64..1.0),
        c2 in prop::array::uniform4(-1.0f64..1.0),
        tau in 1usize..=4,
    ) {
        let spec = fig2(4);
        let pair = solve_pair(&spec, &SeriesOptions::new(None, 1e-14)).unwrap();
        let value = |a0: Mat2, at: Mat2| {
            let mut ops = BranchOps::identity(4);
            ops.a[0] = a0;
            ops.a[tau] = at;
            contract_branch_ops(&pair.left, &pair.right, &pair.kernel, &ops, None).unwrap()
        };
        let paulis = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let whole = value(hermitian(c1), hermitian(c2));
        let mut split = C64::new(0.0, 0.0);
        for (k, p) in paulis.iter().enumerate() {
            for (l, q) in paulis.iter().enumerate() {
                let plan = InsertionPlan::new().with(0, Branch::Forward, *p).unwrap().with(tau, Branch::Forward, *q).unwrap();
                split += temporal_contract(&pair.left, &pair.right, &pair.kernel, &plan).unwrap() * (c1[k] * c2[l]);
            }
        }
        prop_assert!((whole - split).norm() < 1e-10, "{whole} vs {split}");
    }

    #[test]
    fn checkpoint_bytes_ignore_alpha(alpha1 in 0.1f64..2.0, alpha2 in 0.1f64..2.0, beta in 0.0f64..1.5) {
        let bytes = |alpha: f64| {
            let spec = fig2(4).with_impurity(alpha, beta);
            let opts = SolveOptions::for_spec(&spec, Some(32), 1e-12);
            let (base, _) = solve_im(&spec, BoundaryKind::Open, &opts).unwrap();
            let im = impurity_im(&spec, &base, &opts.trunc).unwrap();
            let mut out = Vec::new();
            write_checkpoint(&mut out, &im).unwrap();
            out
        };
        prop_assert_eq!(bytes(alpha1), bytes(alpha2));
    }
}

#[test]
fn open_and_dephaser_boundaries_converge_to_the_same_im() {
    for t in [4usize, 6] {
        let spec = fig2(t);
        let opts = SolveOptions::for_spec(&spec, None, 1e-14);
        let (open, _) = solve_im(&spec, BoundaryKind::Open, &opts).unwrap();
        let (pd, _) = solve_im(&spec, BoundaryKind::PerfectDephaser, &opts).unwrap();
        let f = fidelity(&open.psi, &pd.psi).unwrap();
        assert!(f > 1.0 - 1e-8, "T = {t}: fidelity {f}");
    }
}

#[test]
fn open_boundary_barrier_is_at_least_the_dephaser_one() {
    for t in 4..=12 {
        let spec = fig2(t);
        let opts = SolveOptions::for_spec(&spec, Some(64), 1e-10);
        let peak = |b| {
            let (_, recs) = solve_im(&spec, b, &opts).unwrap();
            recs.iter().map(|r| r.max_entropy).fold(0.0, f64::max)
        };
        let (open, pd) = (peak(BoundaryKind::Open), peak(BoundaryKind::PerfectDephaser));
        assert!(open >= pd - 1e-9, "T = {t}: open {open} vs pd {pd}");
    }
}

#[test]
fn decoupled_impurity_rotates_freely() {
    let spec = fig2(6).with_impurity(1.3, 0.0);
    let s = autocorrelator_series(&spec, &SeriesOptions::new(None, 1e-14).shared(), 6).unwrap();
    let kernel = floquet_kernel(&spec, SiteRole::ImpuritySite).unwrap();
    let single = isolated_spin_autocorrelator(&kernel, 6);
    for (a, b) in s.values.iter().zip(&single) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn unit_impurity_is_the_homogeneous_chain() {
    let opts = SeriesOptions::new(None, 1e-14);
    let a = autocorrelator_series(&fig2(5), &opts, 5).unwrap();
    let b = autocorrelator_series(&fig2(5).with_impurity(1.0, 1.0), &opts, 5).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn shared_im_matches_fresh_solves() {
    let spec = fig2(6);
    for boundary in [BoundaryKind::Open, BoundaryKind::PerfectDephaser] {
        let fresh = SeriesOptions::new(None, 0.0).with_boundary(boundary);
        let a = autocorrelator_series(&spec, &fresh, 6).unwrap();
        let b = autocorrelator_series(&spec, &fresh.shared(), 6).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }
}
