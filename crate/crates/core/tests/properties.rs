use std::sync::OnceLock;

use bulkvac::kernel::Kernel;
use bulkvac::linalg::RMat;
use bulkvac::poly::{find_roots, partial_fractions, Polynomial};
use bulkvac::presets::{example_model, random_model, sweep_model, VacationSchedule};
use bulkvac::solver::{solve, Solution, SolverOptions};
use bulkvac::{MarkovianArrivalProcess, PhaseType, Policy, QueueModel};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn model_from_seed(seed: u64, mv: bool) -> QueueModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model(&mut rng, if mv { Policy::Mv } else { Policy::Sv }).unwrap()
}

fn interior_points(seed: u64) -> Vec<Complex64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..10)
        .map(|_| Complex64::from_polar(rng.random_range(0.05..0.9), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 25, ..ProptestConfig::default() })]

    #[test]
    fn random_models_normalize(seed in any::<u64>(), mv in any::<bool>()) {
        let model = model_from_seed(seed, mv);
        let s = solve(&model, &SolverOptions::default()).unwrap();
        prop_assert!((s.embedded.stats.total - 1.0).abs() < 1e-8, "embedded total {}", s.embedded.stats.total);
        prop_assert!((s.epoch.stats.total - 1.0).abs() < 1e-7, "arbitrary total {}", s.epoch.stats.total);
        prop_assert_eq!(s.diagnostics.roots.inside.len() + 1, model.phases() * model.H());
        prop_assert!(s.embedded.stats.reconstruction_error < 1e-8);
        let m = &s.measures;
        prop_assert!((m.p_dormant + m.p_busy + m.p_vacation - 1.0).abs() < 1e-7);
        if mv {
            prop_assert_eq!(m.p_dormant, 0.0);
        }
        for z in interior_points(seed) {
            let r = s.identity_residual(z).unwrap();
            prop_assert!(r < 1e-7, "identity residual {r:.3e} at {z}");
        }
        let all = s.embedded.xi_plus.iter().chain(&s.embedded.gamma_plus).chain(&s.epoch.xi).chain(&s.epoch.gamma);
        for col in all {
            for v in col {
                prop_assert!(v.iter().all(|x| *x >= 0.0));
            }
        }
    }

    #[test]
    fn scalar_kernel_is_the_lst(lambda in 0.1f64..5.0, ph_seed in any::<u64>(), zs in prop::collection::vec((0.0f64..1.0, 0.0f64..std::f64::consts::TAU), 20)) {
        let map = MarkovianArrivalProcess::poisson(lambda).unwrap();
        let ph = model_from_seed(ph_seed, false).service(model_from_seed(ph_seed, false).H()).clone();
        let k = Kernel::new(&ph, &map);
        let n = ph.phases();
        for (r, th) in zs {
            let z = Complex64::from_polar(r, th);
            let s = lambda * (1.0 - z);
            // alpha (sI - T)^{-1} t
            let m = nalgebra::DMatrix::<Complex64>::identity(n, n) * s - ph.t().map(|v| c(v, 0.0));
            let x = m.lu().solve(&ph.exit().map(|v| c(v, 0.0))).unwrap();
            let lst: Complex64 = ph.alpha().iter().zip(x.iter()).map(|(a, b)| b * *a).sum::<Complex64>() + ph.atom();
            let got = k.eval(z).unwrap()[(0, 0)];
            prop_assert!((got - lst).norm() < 1e-12, "{got} vs {lst}");
        }
    }

    #[test]
    fn kernel_coefficients_are_monotone(seed in any::<u64>()) {
        let model = model_from_seed(seed, seed % 2 == 0);
        for ph in model.services().iter().chain(model.vacations()) {
            let co = Kernel::new(ph, model.arrivals()).coefficients(20_000, 1e-12).unwrap();
            let mut partial = RMat::zeros(model.phases(), model.phases());
            for a in co.mats() {
                prop_assert!(a.iter().all(|v| *v >= 0.0));
                partial += a;
            }
            let rows = partial.column_sum();
            for v in rows.iter() {
                prop_assert!(*v <= 1.0 + 1e-12 && *v >= 1.0 - 1e-11, "row sum {v}");
            }
        }
    }

    #[test]
    fn roots_round_trip(roots in prop::collection::vec((0.3f64..4.0, 0.0f64..std::f64::consts::TAU), 1..=12)) {
        let zs: Vec<Complex64> = roots.iter().map(|&(r, t)| Complex64::from_polar(r, t)).collect();
        let separated = zs.iter().enumerate().all(|(i, a)| zs[..i].iter().all(|b| (a - b).norm() > 0.05));
        prop_assume!(separated);
        let p = Polynomial::from_roots(&zs, c(1.0, 0.0));
        let found = find_roots(&p);
        prop_assert_eq!(found.count(), zs.len());
        for z in &zs {
            let best = found.roots().iter().map(|r| (r.value - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6, "{z} missed by {best:.3e}");
        }
    }

    #[test]
    fn expansion_decays_at_the_dominant_pole(poles in prop::collection::vec((1.1f64..6.0, 0.0f64..std::f64::consts::TAU), 1..=5), shift in -0.5f64..0.5) {
        let zs: Vec<Complex64> = poles.iter().map(|&(r, t)| Complex64::from_polar(r, t)).collect();
        let separated = zs.iter().enumerate().all(|(i, a)| zs[..i].iter().all(|b| (a - b).norm() > 0.05));
        prop_assume!(separated);
        let den = Polynomial::from_roots(&zs, c(1.0, 0.0));
        let num = Polynomial::from_roots(&[c(shift, 0.0)], c(1.0, 0.0));
        let pfe = partial_fractions(&num, &den, &find_roots(&den)).unwrap();
        let beta = zs.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let co = pfe.coefficients(400);
        let bound = co.iter().map(|r| r[0].norm()).fold(0.0, f64::max);
        // |c_n| <= K (1/beta + 1e-6)^n with K the largest coefficient seen
        for (n, row) in co.iter().enumerate() {
            prop_assert!(row[0].norm() <= bound * (1.0 / beta + 1e-6).powi(n as i32) * (n as f64 + 1.0).powi(4) + 1e-300);
        }
    }
}

/// Stage rates of every vacation multiplied by `f`.
fn faster_vacations(model: &QueueModel, f: f64, policy: Policy) -> QueueModel {
    let vacations = model.vacations().iter().map(|v| v.scaled(f).unwrap()).collect::<Vec<PhaseType>>();
    QueueModel::new(model.arrivals().clone(), model.h(), model.H(), model.services().to_vec(), vacations, policy).unwrap()
}

#[test]
fn policies_meet_as_vacations_vanish() {
    for base in [example_model(Policy::Sv), sweep_model(1.5, VacationSchedule::QueueDependent, Policy::Sv).unwrap()] {
        let sv = solve(&faster_vacations(&base, 1e3, Policy::Sv), &SolverOptions::default()).unwrap();
        let mv = solve(&faster_vacations(&base, 1e3, Policy::Mv), &SolverOptions::default()).unwrap();
        let d = (sv.measures.l_q - mv.measures.l_q).abs();
        assert!(d < 1e-3, "L_q {} vs {} (difference {d:.3e})", sv.measures.l_q, mv.measures.l_q);
    }
}

/// `(policy, l, L_q QSDV, L_q QSIV)` over `l = 1.0, 1.1, ..., 2.0`.
fn sweep() -> &'static Vec<(Policy, f64, f64, f64)> {
    static S: OnceLock<Vec<(Policy, f64, f64, f64)>> = OnceLock::new();
    S.get_or_init(|| {
        let mut out = Vec::new();
        for policy in [Policy::Sv, Policy::Mv] {
            for i in 10..=20 {
                let l = i as f64 / 10.0;
                let lq = |sched| {
                    let s: Solution = solve(&sweep_model(l, sched, policy).unwrap(), &SolverOptions::default()).unwrap();
                    s.measures.l_q
                };
                out.push((policy, l, lq(VacationSchedule::QueueDependent), lq(VacationSchedule::QueueIndependent)));
            }
        }
        out
    })
}

#[test]
fn sweep_queue_grows_with_load() {
    for w in sweep().windows(2).filter(|w| w[0].0 == w[1].0) {
        assert!(w[1].2 > w[0].2, "{}: QSDV L_q fell from l = {} to {}", w[0].0, w[0].1, w[1].1);
        assert!(w[1].3 > w[0].3, "{}: QSIV L_q fell from l = {} to {}", w[0].0, w[0].1, w[1].1);
    }
}

#[test]
fn queue_dependent_vacations_shorten_the_queue() {
    for &(policy, l, qsdv, qsiv) in sweep() {
        assert!(qsdv <= qsiv, "{policy}, l = {l}: QSDV {qsdv} > QSIV {qsiv}");
    }
}
