//! Ready-made models: the two-phase MAP example with E3 services and E2
//! vacations, and the scaled sweep family used for the QSDV/QSIV comparison.

use rand::Rng;

use crate::error::Result;
use crate::linalg::{RMat, RRow};
use crate::map::MarkovianArrivalProcess;
use crate::model::{Policy, QueueModel};
use crate::ph::PhaseType;

pub fn example_map() -> MarkovianArrivalProcess {
    MarkovianArrivalProcess::new(
        RMat::from_row_slice(2, 2, &[-91.8125, 14.125, 49.4375, -77.6875]),
        RMat::from_row_slice(2, 2, &[49.4375, 28.25, 7.0625, 21.1875]),
    )
    .expect("example MAP is valid")
}

/// `h = 5`, `H = 9`; batch `r` served in E3 with stage rate `7.8 r`,
/// vacation type `k` lasts E2 with stage rate `(k + 1)^2`.
pub fn example_model(policy: Policy) -> QueueModel {
    let services = (5..=9).map(|r| PhaseType::erlang(3, 7.8 * r as f64).unwrap()).collect();
    let vacations = (0..5).map(|k| PhaseType::erlang(2, ((k + 1) * (k + 1)) as f64).unwrap()).collect();
    QueueModel::new(example_map(), 5, 9, services, vacations, policy).expect("example model is valid")
}

/// Vacation schedule of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VacationSchedule {
    /// Stage rate grows as `(k + 1)^2` times the base rate.
    QueueDependent,
    /// Every vacation type uses the base rate.
    QueueIndependent,
}

impl VacationSchedule {
    pub fn label(self) -> &'static str {
        match self {
            VacationSchedule::QueueDependent => "qsdv",
            VacationSchedule::QueueIndependent => "qsiv",
        }
    }

    pub fn stage_rate(self, k: usize, base: f64) -> f64 {
        match self {
            VacationSchedule::QueueDependent => ((k + 1) * (k + 1)) as f64 * base,
            VacationSchedule::QueueIndependent => base,
        }
    }
}

pub fn sweep_map() -> MarkovianArrivalProcess {
    MarkovianArrivalProcess::new(
        RMat::from_row_slice(2, 2, &[-4.657, 1.761, 1.128, -3.941]),
        RMat::from_row_slice(2, 2, &[1.657, 1.239, 0.872, 1.941]),
    )
    .expect("sweep MAP is valid")
}

/// Sweep point: `(lC, lD)`, `h = 3`, `H = 5`, E3 services with stage rate
/// `0.9 r`, E2 vacations with stage rate from `schedule` on base `2.2`.
pub fn sweep_model(l: f64, schedule: VacationSchedule, policy: Policy) -> Result<QueueModel> {
    let map = sweep_map().scaled(l)?;
    let services = (3..=5).map(|r| PhaseType::erlang(3, 0.9 * r as f64)).collect::<Result<Vec<_>>>()?;
    let vacations = (0..3).map(|k| PhaseType::erlang(2, schedule.stage_rate(k, 2.2))).collect::<Result<Vec<_>>>()?;
    QueueModel::new(map, 3, 5, services, vacations, policy)
}

/// Poisson arrivals, single exponential server, one-at-a-time service.
pub fn mm1(lambda: f64, mu: f64, vacation_rate: f64, policy: Policy) -> Result<QueueModel> {
    QueueModel::new(
        MarkovianArrivalProcess::poisson(lambda)?,
        1,
        1,
        vec![PhaseType::exponential(mu)?],
        vec![PhaseType::exponential(vacation_rate)?],
        policy,
    )
}

/// Random PH of order `1..=3` with mean `mean`, full alpha (no atom).
fn random_ph<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<PhaseType> {
    let n = rng.random_range(1..=3);
    let mut alpha = RRow::from_fn(n, |_, _| rng.random_range(0.05..1.0));
    alpha /= alpha.sum();
    let mut t = RMat::zeros(n, n);
    for i in 0..n {
        let exit = rng.random_range(0.2..1.0);
        let mut out = exit;
        for j in 0..n {
            if i != j && rng.random_bool(0.6) {
                let v = rng.random_range(0.0..1.0);
                t[(i, j)] = v;
                out += v;
            }
        }
        t[(i, i)] = -out;
    }
    let ph = PhaseType::new(alpha, t)?;
    ph.scaled(ph.mean() / mean)
}

/// A random stable model for property tests: `m` in `1..=3`,
/// `1 <= h <= H <= 6`, PH laws of order up to 3, traffic intensity in
/// `[0.2, 0.8]`.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, policy: Policy) -> Result<QueueModel> {
    let m = rng.random_range(1..=3);
    let mut c = RMat::zeros(m, m);
    let d = RMat::from_fn(m, m, |_, _| if rng.random_bool(0.7) { rng.random_range(0.1..2.0) } else { 0.0 });
    let mut d = d;
    for i in 0..m {
        if d.row(i).sum() == 0.0 {
            d[(i, i)] = 0.5;
        }
        for j in 0..m {
            if i != j {
                c[(i, j)] = rng.random_range(0.1..1.5);
            }
        }
        c[(i, i)] = -(c.row(i).sum() + d.row(i).sum());
    }
    let map = MarkovianArrivalProcess::new(c, d)?;
    let lambda = map.rate();
    let big_h = rng.random_range(1..=6);
    let h = rng.random_range(1..=big_h);
    let rho = rng.random_range(0.2..0.8);
    let top_mean = rho * big_h as f64 / lambda;
    let services = (h..=big_h)
        .map(|r| random_ph(rng, top_mean * (0.5 + 0.5 * r as f64 / big_h as f64)))
        .collect::<Result<Vec<_>>>()?;
    let vacations = (0..h)
        .map(|_| {
            let mean = rng.random_range(0.3..3.0) / lambda;
            random_ph(rng, mean)
        })
        .collect::<Result<Vec<_>>>()?;
    QueueModel::new(map, h, big_h, services, vacations, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_is_stable() {
        let m = example_model(Policy::Sv);
        assert!((m.arrivals().rate() - 56.5).abs() < 1e-10);
        let rho = m.traffic_intensity();
        // 56.5 * (3 / 70.2) / 9
        assert!((rho - 0.268281).abs() < 1e-5, "{rho}");
    }

    #[test]
    fn sweep_stable_range() {
        let lo = sweep_model(1.0, VacationSchedule::QueueDependent, Policy::Mv).unwrap();
        let hi = sweep_model(2.0, VacationSchedule::QueueIndependent, Policy::Mv).unwrap();
        assert!((lo.traffic_intensity() - 0.37953).abs() < 1e-4);
        assert!((hi.traffic_intensity() - 0.75906).abs() < 1e-4);
    }
}
