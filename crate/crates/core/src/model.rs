use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::MarkovianArrivalProcess;
use crate::ph::PhaseType;

/// Vacation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// One vacation, then dormancy until `h` customers are present.
    Sv,
    /// Vacations repeat until at least `h` customers are present.
    Mv,
}

impl Policy {
    /// `0` for SV, `1` for MV.
    pub fn epsilon(self) -> f64 {
        match self {
            Policy::Sv => 0.0,
            Policy::Mv => 1.0,
        }
    }

    pub fn is_multiple(self) -> bool {
        self == Policy::Mv
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Policy::Sv => "sv",
            Policy::Mv => "mv",
        })
    }
}

/// The `(h, H)` bulk-service queue with queue-size-dependent vacations.
#[derive(Debug, Clone)]
pub struct QueueModel {
    arrivals: MarkovianArrivalProcess,
    h: usize,
    big_h: usize,
    services: Vec<PhaseType>,
    vacations: Vec<PhaseType>,
    policy: Policy,
}

impl QueueModel {
    /// `services[i]` is the law for batch size `h + i`; `vacations[k]` for a
    /// vacation started with `k` waiting.
    pub fn new(
        arrivals: MarkovianArrivalProcess,
        h: usize,
        big_h: usize,
        services: Vec<PhaseType>,
        vacations: Vec<PhaseType>,
        policy: Policy,
    ) -> Result<Self> {
        if h < 1 || h > big_h {
            return Err(Error::input("thresholds", format!("need 1 <= h <= H, got h = {h}, H = {big_h}")));
        }
        if services.len() != big_h - h + 1 {
            return Err(Error::input(
                "services",
                format!("expected {} entries (r = {h}..{big_h}), got {}", big_h - h + 1, services.len()),
            ));
        }
        if vacations.len() != h {
            return Err(Error::input("vacations", format!("expected {h} entries (k = 0..{}), got {}", h - 1, vacations.len())));
        }
        Ok(QueueModel { arrivals, h, big_h, services, vacations, policy })
    }

    pub fn arrivals(&self) -> &MarkovianArrivalProcess {
        &self.arrivals
    }

    pub fn h(&self) -> usize {
        self.h
    }

    #[allow(non_snake_case)]
    pub fn H(&self) -> usize {
        self.big_h
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn epsilon(&self) -> f64 {
        self.policy.epsilon()
    }

    pub fn phases(&self) -> usize {
        self.arrivals.phases()
    }

    /// Service law for batch size `r`, `h <= r <= H`.
    pub fn service(&self, r: usize) -> &PhaseType {
        &self.services[r - self.h]
    }

    /// Vacation law for type `k < h`.
    pub fn vacation(&self, k: usize) -> &PhaseType {
        &self.vacations[k]
    }

    pub fn services(&self) -> &[PhaseType] {
        &self.services
    }

    pub fn vacations(&self) -> &[PhaseType] {
        &self.vacations
    }

    /// `lambda * s_H / H`.
    pub fn traffic_intensity(&self) -> f64 {
        self.arrivals.rate() * self.service(self.big_h).mean() / self.big_h as f64
    }

    pub fn check_stable(&self) -> Result<()> {
        let rho = self.traffic_intensity();
        if rho < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable { rho })
        }
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        QueueModel { policy, ..self.clone() }
    }

    pub fn with_arrivals(&self, arrivals: MarkovianArrivalProcess) -> Result<Self> {
        if arrivals.phases() != self.phases() {
            return Err(Error::Dimension("arrival process phase count changed".into()));
        }
        Ok(QueueModel { arrivals, ..self.clone() })
    }

    pub fn with_vacations(&self, vacations: Vec<PhaseType>) -> Result<Self> {
        QueueModel::new(self.arrivals.clone(), self.h, self.big_h, self.services.clone(), vacations, self.policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_model(h: usize, big_h: usize) -> Result<QueueModel> {
        let map = MarkovianArrivalProcess::poisson(1.0)?;
        let s = (h..=big_h).map(|_| PhaseType::exponential(2.0).unwrap()).collect();
        let v = (0..h).map(|_| PhaseType::exponential(3.0).unwrap()).collect();
        QueueModel::new(map, h, big_h, s, v, Policy::Sv)
    }

    #[test]
    fn thresholds_checked() {
        let err = poisson_model(3, 2).unwrap_err();
        assert!(err.to_string().contains("thresholds"));
        assert!(poisson_model(0, 2).is_err());
        assert!(poisson_model(2, 4).is_ok());
    }

    #[test]
    fn traffic_intensity() {
        let m = poisson_model(1, 2).unwrap();
        assert!((m.traffic_intensity() - 0.25).abs() < 1e-15);
        assert!(m.check_stable().is_ok());
        assert_eq!(m.with_policy(Policy::Mv).epsilon(), 1.0);
    }
}
