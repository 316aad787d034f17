use serde::Serialize;

use super::embedded::EmbeddedDistributions;
use super::epoch::ArbitraryEpoch;

/// Time-average performance measures.
#[derive(Debug, Clone, Serialize)]
pub struct PerformanceMeasures {
    /// Mean number waiting.
    pub l_q: f64,
    /// Mean number in system.
    pub l_s: f64,
    pub w_q: f64,
    pub w_s: f64,
    /// Mean batch size in service, given busy.
    pub l_ser: f64,
    /// Mean vacation type, given on vacation.
    pub l_vac: f64,
    pub p_dormant: f64,
    pub p_busy: f64,
    pub p_vacation: f64,
    pub p_idle: f64,
    /// Tail estimate added to `l_q` for `n > n_trunc`.
    pub l_q_tail: f64,
    /// `P_r^ser`, `r = h..=H`.
    pub p_service: Vec<f64>,
    /// Probability of a type-`k` vacation in progress.
    pub p_vacation_type: Vec<f64>,
    /// `P_n^queue`, `n <= n_trunc`.
    pub queue: Vec<f64>,
    /// `P_n^{queue+}`, `n <= n_trunc`.
    pub queue_embedded: Vec<f64>,
}

pub fn measures(emb: &EmbeddedDistributions, arb: &ArbitraryEpoch, lambda: f64) -> PerformanceMeasures {
    let (h, n_trunc) = (arb.h, emb.n_trunc);
    let queue: Vec<f64> = (0..=n_trunc).map(|n| arb.queue_marginal(n)).collect();
    let queue_embedded: Vec<f64> = (0..=n_trunc).map(|n| emb.queue_marginal(n)).collect();
    let p_service: Vec<f64> = arb.xi.iter().map(|c| c.iter().map(|v| v.sum()).sum()).collect();
    let p_vacation_type: Vec<f64> = arb.gamma.iter().map(|c| c.iter().map(|v| v.sum()).sum()).collect();
    let p_dormant: f64 = arb.dormant.iter().map(|v| v.sum()).sum();
    let p_busy: f64 = p_service.iter().sum();
    let p_vacation: f64 = p_vacation_type.iter().sum();

    // geometric tail at the dominant decay rate
    let rho = 1.0 / emb.stats.dominant_pole;
    let l_q_tail = match queue.last() {
        Some(&p) if rho < 1.0 => {
            let n = n_trunc as f64;
            p * (n * rho / (1.0 - rho) + rho / (1.0 - rho).powi(2))
        }
        _ => 0.0,
    };
    let l_q = queue.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>() + l_q_tail;
    let in_service: f64 = p_service.iter().enumerate().map(|(i, p)| (h + i) as f64 * p).sum();
    let l_s = l_q + in_service;
    let l_ser = if p_busy > 0.0 { in_service / p_busy } else { 0.0 };
    let l_vac = if p_vacation > 0.0 {
        p_vacation_type.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / p_vacation
    } else {
        0.0
    };
    PerformanceMeasures {
        l_q,
        l_s,
        w_q: l_q / lambda,
        w_s: l_s / lambda,
        l_ser,
        l_vac,
        p_dormant,
        p_busy,
        p_vacation,
        p_idle: 1.0 - p_busy,
        l_q_tail,
        p_service,
        p_vacation_type,
        queue,
        queue_embedded,
    }
}
