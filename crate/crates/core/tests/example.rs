//! The two-phase MAP example with E3 services and E2 vacations.

use std::sync::OnceLock;

use bulkvac::presets::example_model;
use bulkvac::solver::{solve, Solution, SolverOptions};
use bulkvac::Policy;

fn solved(policy: Policy) -> &'static Solution {
    static SV: OnceLock<Solution> = OnceLock::new();
    static MV: OnceLock<Solution> = OnceLock::new();
    let cell = if policy == Policy::Sv { &SV } else { &MV };
    cell.get_or_init(|| solve(&example_model(policy), &SolverOptions::default()).unwrap())
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

#[test]
fn sv_footer() {
    let p = &solved(Policy::Sv).measures;
    for (name, got, want) in [
        ("L_q", p.l_q, 48.547),
        ("L_s", p.l_s, 51.133),
        ("W_q", p.w_q, 0.859),
        ("W_s", p.w_s, 0.905),
        ("L_ser", p.l_ser, 8.141),
        ("L_vac", p.l_vac, 0.838),
        ("P_busy", p.p_busy, 0.318),
        ("P_idle", p.p_idle, 0.682),
    ] {
        assert!(rel(got, want) < 1e-2, "{name}: {got} vs {want}");
    }
    assert!((p.p_dormant - 0.0032).abs() < 1e-3, "{}", p.p_dormant);
}

#[test]
fn mv_footer() {
    let p = &solved(Policy::Mv).measures;
    for (name, got, want) in [
        ("L_q", p.l_q, 48.268),
        ("L_s", p.l_s, 50.837),
        ("W_q", p.w_q, 0.854),
        ("W_s", p.w_s, 0.899),
        ("L_ser", p.l_ser, 8.224),
        ("L_vac", p.l_vac, 0.887),
        ("P_idle", p.p_idle, 0.687),
        ("P_busy", p.p_busy, 0.312),
    ] {
        assert!(rel(got, want) < 1e-2, "{name}: {got} vs {want}");
    }
    assert_eq!(p.p_dormant, 0.0);
}

#[test]
fn embedded_cells() {
    let sv = &solved(Policy::Sv).embedded;
    let mv = &solved(Policy::Mv).embedded;
    // (value, printed)
    let cells = [
        (sv.xi_plus[0][0][0], 0.00243),
        (sv.xi_plus[0][0][1], 0.00173),
        (sv.xi_plus[4][2][0], 0.00888),
        (sv.xi_plus[4][4][0], 0.01086),
        (sv.xi_plus[4][4][1], 0.00814),
        (sv.xi_plus[4][152][0], 0.00046),
        (sv.gamma_plus[4][4][0], 0.00218),
        (sv.gamma_plus[4][4][1], 0.00156),
        (sv.gamma_plus[3][6][0], 0.00234),
        (sv.gamma_plus[0][31][0], 0.00007),
        (mv.xi_plus[0][0][0], 0.00188),
        (mv.xi_plus[4][2][0], 0.00916),
        (mv.xi_plus[4][20][1], 0.00324),
        (mv.gamma_plus[4][4][0], 0.00272),
        (mv.gamma_plus[3][3][0], 0.00133),
    ];
    for (i, (got, want)) in cells.iter().enumerate() {
        assert!((got - want).abs() < 1e-4 * 0.5 + 1e-9, "cell {i}: {got} vs {want}");
    }
    assert!((sv.queue_marginal(0) - 0.02200).abs() < 1e-5);
    assert!((mv.queue_marginal(4) - 0.05013).abs() < 1e-5);
}

#[test]
fn embedded_totals() {
    let sv = &solved(Policy::Sv).embedded;
    let mv = &solved(Policy::Mv).embedded;
    let col = |c: &Vec<bulkvac::linalg::RRow>, i: usize| c.iter().map(|v| v[i]).sum::<f64>();
    let sv_xi = [0.0353, 0.0265, 0.0242, 0.0181, 0.0214, 0.0160, 0.0188, 0.0141, 0.3633, 0.2725];
    let mv_xi = [0.02734, 0.02051, 0.02486, 0.01865, 0.02207, 0.01656, 0.01940, 0.01455, 0.36214, 0.27164];
    let mv_g = [0.01235, 0.00926, 0.02160, 0.01620, 0.02577, 0.01932, 0.02720, 0.02040, 0.02864, 0.02148];
    for (j, want) in sv_xi.iter().enumerate() {
        let got = col(&sv.xi_plus[j / 2], j % 2);
        assert!((got - want).abs() < 1e-4, "SV xi+ total {j}: {got}");
    }
    for (j, want) in mv_xi.iter().enumerate() {
        let got = col(&mv.xi_plus[j / 2], j % 2);
        assert!((got - want).abs() < 2e-4, "MV xi+ total {j}: {got}");
    }
    for (j, want) in mv_g.iter().enumerate() {
        let got = col(&mv.gamma_plus[j / 2], j % 2);
        assert!((got - want).abs() < 2e-4, "MV gamma+ total {j}: {got}");
    }
    // SV vacation totals: every column but the first matches the printed row
    let sv_g = [0.02192, 0.0164, 0.0256, 0.0192, 0.0253, 0.0190, 0.02297, 0.0172];
    for (j, want) in sv_g.iter().enumerate() {
        let got = col(&sv.gamma_plus[1 + j / 2], j % 2);
        assert!((got - want).abs() < 2e-4, "SV gamma+ total {j}: {got}");
    }
}

#[test]
fn arbitrary_cells() {
    let sv = &solved(Policy::Sv).epoch;
    let mv = &solved(Policy::Mv).epoch;
    let cells = [
        (sv.dormant[4][0], 0.00126),
        (sv.dormant[4][1], 0.00092),
        (sv.dormant[3][0], 0.00046),
        (sv.gamma[0][0][0], 0.00187),
        (sv.gamma[4][4][0], 0.00308),
        (sv.gamma[2][10][1], 0.00167),
        (mv.gamma[4][4][0], 0.00388),
        (mv.gamma[0][0][0], 0.00185),
        (mv.gamma[2][2][0], 0.00378),
    ];
    for (i, (got, want)) in cells.iter().enumerate() {
        assert!((got - want).abs() < 1e-4 * 0.5 + 1e-9, "cell {i}: {got} vs {want}");
    }
    assert!((sv.queue_marginal(0) - 0.02966).abs() < 1e-5);
    assert!((mv.queue_marginal(0) - 0.02851).abs() < 1e-5);
    let r_tot: Vec<f64> = (0..2).map(|i| sv.dormant.iter().map(|v| v[i]).sum()).collect();
    assert!((r_tot[0] - 0.00185).abs() < 1e-5 && (r_tot[1] - 0.00134).abs() < 1e-5, "{r_tot:?}");
}

/// The printed arbitrary-epoch service tables list row `n + 1` under label `n`.
#[test]
fn arbitrary_service_rows_are_shifted_in_print() {
    let sv = &solved(Policy::Sv).epoch;
    let printed = [0.00421, 0.00346, 0.00273, 0.00208, 0.00154];
    for (n, want) in printed.iter().enumerate() {
        assert!((sv.xi[0][n + 1][0] - want).abs() < 1e-5, "row {n}");
    }
    let mv = &solved(Policy::Mv).epoch;
    let printed = [0.00338, 0.00399, 0.00416, 0.00407, 0.00386];
    for (n, want) in printed.iter().enumerate() {
        assert!((mv.xi[4][n + 1][0] - want).abs() < 1e-5, "row {n}");
    }
    // the printed totals leave out the first row
    let tot: f64 = sv.xi[0].iter().skip(1).map(|v| v[0]).sum();
    assert!((tot - 0.01767).abs() < 1e-5, "{tot}");
    let tot: f64 = mv.xi[4].iter().skip(1).map(|v| v[1]).sum();
    assert!((tot - 0.09570).abs() < 1e-5, "{tot}");
}

#[test]
fn root_structure() {
    for policy in [Policy::Sv, Policy::Mv] {
        let roots = &solved(policy).diagnostics.roots;
        assert_eq!(roots.full_closed_disk, 18);
        let inside: usize = roots.inside.iter().map(|r| r.multiplicity).sum();
        assert_eq!(inside + 1, 18);
        assert!(roots.unit_root_derivative.abs() > 1e-6);
        assert!(roots.outside.iter().all(|r| r.z().norm() > 1.0 + 1e-8));
    }
}

#[test]
fn normalization_and_identities() {
    for policy in [Policy::Sv, Policy::Mv] {
        let s = solved(policy);
        assert!((s.embedded.stats.total - 1.0).abs() < 1e-8);
        assert!((s.epoch.stats.total - 1.0).abs() < 1e-7);
        let p = &s.measures;
        assert!((p.p_dormant + p.p_busy + p.p_vacation - 1.0).abs() < 1e-7);
        let lambda = s.model.arrivals().rate();
        assert_eq!(p.w_q, p.l_q / lambda);
        assert_eq!(p.w_s, p.l_s / lambda);
        assert!((s.epoch.stats.sigma * s.epoch.stats.cycle - 1.0).abs() < 1e-9);
        assert!(s.diagnostics.warnings.is_empty(), "{:?}", s.diagnostics.warnings);
    }
    assert_eq!(solved(Policy::Mv).epoch.stats.t_dormant, 0.0);
}

#[test]
fn dormancy_flow_balance() {
    let s = solved(Policy::Sv);
    let d = s.model.arrivals().d();
    let cycle = s.epoch.stats.cycle;
    let mut inflow = 0.0;
    for n in 0..s.model.h() {
        inflow += s.embedded.gamma_total(n).sum() / cycle;
        let out = (&s.epoch.dormant[n] * d).sum();
        assert!((out - inflow).abs() < 1e-12, "n = {n}: {out} vs {inflow}");
    }
}

#[test]
fn identity_at_interior_points() {
    use num_complex::Complex64;
    for policy in [Policy::Sv, Policy::Mv] {
        let s = solved(policy);
        for i in 0..10 {
            let z = Complex64::from_polar(0.15 + 0.07 * i as f64, 0.9 + 0.61 * i as f64);
            let res = s.identity_residual(z).unwrap();
            assert!(res < 1e-7, "z = {z}: {res}");
        }
    }
}
