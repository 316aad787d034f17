//! The full solution pipeline: kernels, characteristic roots, boundary
//! unknowns, embedded-epoch distributions, arbitrary-epoch distributions and
//! measures.

pub mod boundary;
pub mod characteristic;
pub mod embedded;
pub mod epoch;
pub mod kernels;
pub mod measures;
pub mod termination;

use num_complex::Complex64;
use serde::Serialize;

pub use boundary::BoundaryUnknowns;
pub use characteristic::{CharacteristicRoots, RootInfo};
pub use embedded::{EmbeddedDistributions, EmbeddedStats};
pub use epoch::{ArbitraryEpoch, EpochStats};
pub use kernels::KernelSet;
pub use measures::PerformanceMeasures;
pub use termination::TerminationMap;

use crate::error::{Error, Result};

/// Negative entries smaller than this are rounding noise and are zeroed
/// without being counted; anything down to `-1e-10` is zeroed and counted.
pub(crate) const NOISE: f64 = 1e-15;
use crate::linalg::{row_complexify, CRow};
use crate::model::QueueModel;

#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    /// Fixed truncation level; chosen from `tail_target` when `None`.
    pub truncation: Option<usize>,
    pub tail_target: f64,
    /// Upper bound for the automatic truncation.
    pub truncation_cap: usize,
    pub coeff_cap: usize,
    pub coeff_target: f64,
    /// Tolerance between boundary solves with different components.
    pub component_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            truncation: None,
            tail_target: 1e-9,
            truncation_cap: 5000,
            coeff_cap: 20_000,
            coeff_target: 1e-13,
            component_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub rho: f64,
    pub n_trunc: usize,
    pub forced_truncation: bool,
    pub roots: CharacteristicRoots,
    pub boundary_condition: f64,
    pub boundary_residual: f64,
    pub component_diff: Option<f64>,
    pub embedded: EmbeddedStats,
    pub epoch: EpochStats,
    pub service_coeff_len: Vec<usize>,
    pub vacation_coeff_len: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub model: QueueModel,
    pub kernels: KernelSet,
    pub boundary: BoundaryUnknowns,
    pub embedded: EmbeddedDistributions,
    pub epoch: ArbitraryEpoch,
    pub measures: PerformanceMeasures,
    pub diagnostics: Diagnostics,
}

pub fn solve(model: &QueueModel, opts: &SolverOptions) -> Result<Solution> {
    model.check_stable()?;
    let rho = model.traffic_intensity();
    let ks = KernelSet::new(model, opts.coeff_cap, opts.coeff_target)?;
    let tm = TerminationMap::new(&ks)?;
    let (roots, _) = characteristic::characteristic_roots(&ks)?;
    log::debug!("characteristic degree {}, {} outside roots", roots.degree, roots.outside.len());
    let boundary = boundary::solve_boundary(&ks, &tm, &roots, opts.component_tol)?;
    log::debug!("boundary condition {:.3e}", boundary.condition);
    let embedded = embedded::service_joint(embedded::EmbeddedInput {
        ks: &ks,
        tm: &tm,
        roots: &roots,
        xi_small: &boundary.xi_plus,
        truncation: opts.truncation,
        tail_target: opts.tail_target,
        cap: opts.truncation_cap,
    })?;
    let epoch = epoch::arbitrary_epoch(model, &ks, &embedded)?;
    let measures = measures::measures(&embedded, &epoch, model.arrivals().rate());

    let forced = opts.truncation.is_some();
    let mut warnings = Vec::new();
    let checks = [
        ("embedded distribution", embedded.stats.total, 1e-8),
        ("arbitrary-epoch distribution", epoch.stats.total, 1e-7),
    ];
    for (what, total, tol) in checks {
        if (total - 1.0).abs() > tol {
            if forced {
                warnings.push(format!("{what} sums to {total:.12} at the forced truncation"));
            } else {
                return Err(Error::Normalization { what, total });
            }
        }
    }
    if embedded.stats.boundary_consistency > 1e-8 {
        warnings.push(format!(
            "expansion disagrees with the boundary unknowns by {:.3e}",
            embedded.stats.boundary_consistency
        ));
    }
    let clamped = boundary.clamped + embedded.stats.clamped + epoch.stats.clamped;
    if clamped > 0 {
        warnings.push(format!("{clamped} entries in [-1e-10, 0) set to zero"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let diagnostics = Diagnostics {
        rho,
        n_trunc: embedded.n_trunc,
        forced_truncation: forced,
        roots,
        boundary_condition: boundary.condition,
        boundary_residual: boundary.residual,
        component_diff: boundary.component_diff,
        embedded: embedded.stats.clone(),
        epoch: epoch.stats.clone(),
        service_coeff_len: ks.service_coeffs.iter().map(|c| c.len()).collect(),
        vacation_coeff_len: ks.vacation_coeffs.iter().map(|c| c.len()).collect(),
        warnings,
    };
    Ok(Solution { model: model.clone(), kernels: ks, boundary, embedded, epoch, measures, diagnostics })
}

impl Solution {
    /// `Psi+(z) = sum_n xi+(n) z^n` from the stored coefficients.
    pub fn psi_plus(&self, z: Complex64) -> CRow {
        let m = self.kernels.m;
        let mut out = CRow::zeros(m);
        let mut zn = Complex64::new(1.0, 0.0);
        for n in 0..self.embedded.len() {
            out += row_complexify(&self.embedded.xi_total(n)) * zn;
            zn *= z;
        }
        out
    }

    /// Relative residual of `Psi+(z) (z^H I - A^(H)(z)) = Num(z)` at `z`.
    pub fn identity_residual(&self, z: Complex64) -> Result<f64> {
        let ks = &self.kernels;
        let kv = ks.values(z)?;
        let emb = &self.embedded;
        let xi: Vec<_> = (0..ks.big_h).map(|n| emb.xi_total(n)).collect();
        let gamma: Vec<_> = (0..ks.big_h).map(|n| emb.gamma_total(n)).collect();
        let num = characteristic::numerator_direct(ks, &kv, &xi, &gamma, &emb.sources);
        let lhs = self.psi_plus(z) * characteristic::w_matrix(&kv, ks.big_h);
        let scale = num.norm().max(lhs.norm()).max(1e-300);
        Ok((lhs - num).norm() / scale)
    }
}
