//! JSON model and sweep configuration.

use std::path::{Path, PathBuf};

use bulkvac::linalg::{RMat, RRow};
use bulkvac::{MarkovianArrivalProcess, PhaseType, Policy, QueueModel, SimOptions, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arrivals {
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub h: usize,
    #[serde(rename = "H")]
    pub big_h: usize,
}

/// A PH law. Erlang and exponential laws take either a per-stage `rate` or
/// a `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhSpec {
    Erlang {
        phases: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
    },
    Exponential {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
    },
    Ph {
        alpha: Vec<f64>,
        #[serde(rename = "T")]
        t: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceEntry {
    pub r: usize,
    #[serde(flatten)]
    pub law: PhSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VacationEntry {
    pub k: usize,
    #[serde(flatten)]
    pub law: PhSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_guard: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub arrivals: Arrivals,
    pub thresholds: Thresholds,
    pub services: Vec<ServiceEntry>,
    pub vacations: Vec<VacationEntry>,
    pub policy: Policy,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub simulation: SimulationOverrides,
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), reason: reason.into() }
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<RMat, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(invalid(path, "matrix has no rows"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(format!("{path}[{i}]"), format!("expected {n} entries, got {}", row.len())));
        }
    }
    Ok(RMat::from_fn(n, n, |i, j| rows[i][j]))
}

fn one_of(path: &str, rate: Option<f64>, mean: Option<f64>, phases: usize) -> Result<f64, CliError> {
    match (rate, mean) {
        (Some(r), None) => Ok(r),
        (None, Some(m)) if m > 0.0 => Ok(phases as f64 / m),
        (None, Some(_)) => Err(invalid(format!("{path}.mean"), "must be positive")),
        _ => Err(invalid(path, "give exactly one of `rate` and `mean`")),
    }
}

impl PhSpec {
    pub fn build(&self, path: &str) -> Result<PhaseType, CliError> {
        let wrap = |e: bulkvac::Error| match e {
            bulkvac::Error::InvalidInput { path: p, reason } => invalid(format!("{path}.{p}"), reason),
            other => invalid(path, other.to_string()),
        };
        match self {
            PhSpec::Erlang { phases, rate, mean } => {
                let rate = one_of(&format!("{path}.erlang"), *rate, *mean, *phases)?;
                PhaseType::erlang(*phases, rate).map_err(wrap)
            }
            PhSpec::Exponential { rate, mean } => {
                let rate = one_of(&format!("{path}.exponential"), *rate, *mean, 1)?;
                PhaseType::exponential(rate).map_err(wrap)
            }
            PhSpec::Ph { alpha, t } => {
                let t = matrix(&format!("{path}.ph.T"), t)?;
                if alpha.len() != t.nrows() {
                    return Err(invalid(format!("{path}.ph.alpha"), format!("expected {} entries", t.nrows())));
                }
                PhaseType::new(RRow::from_row_slice(alpha), t).map_err(wrap)
            }
        }
    }

    pub fn from_ph(ph: &PhaseType) -> PhSpec {
        PhSpec::Ph {
            alpha: ph.alpha().iter().copied().collect(),
            t: ph.t().row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<ModelConfig, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "(root)".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<(ModelConfig, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_path_buf(), source: e })?;
        Ok((ModelConfig::parse(&text)?, text))
    }

    pub fn model(&self) -> Result<QueueModel, CliError> {
        let Thresholds { h, big_h } = self.thresholds;
        if h < 1 || h > big_h {
            return Err(invalid("thresholds", format!("need 1 <= h <= H, got h = {h}, H = {big_h}")));
        }
        let c = matrix("arrivals.C", &self.arrivals.c)?;
        let d = matrix("arrivals.D", &self.arrivals.d)?;
        if c.shape() != d.shape() {
            return Err(invalid("arrivals", "C and D differ in size"));
        }
        let map = MarkovianArrivalProcess::new(c, d).map_err(|e| match e {
            bulkvac::Error::InvalidInput { path, reason } => invalid(format!("arrivals.{path}"), reason),
            other => invalid("arrivals", other.to_string()),
        })?;
        let mut services = Vec::new();
        for r in h..=big_h {
            let (i, entry) = self
                .services
                .iter()
                .enumerate()
                .find(|(_, s)| s.r == r)
                .ok_or_else(|| invalid("services", format!("no entry for r = {r}")))?;
            services.push(entry.law.build(&format!("services[{i}]"))?);
        }
        if let Some((i, s)) = self.services.iter().enumerate().find(|(_, s)| s.r < h || s.r > big_h) {
            return Err(invalid(format!("services[{i}].r"), format!("r = {} is outside {h}..={big_h}", s.r)));
        }
        let mut vacations = Vec::new();
        for k in 0..h {
            let (i, entry) = self
                .vacations
                .iter()
                .enumerate()
                .find(|(_, v)| v.k == k)
                .ok_or_else(|| invalid("vacations", format!("no entry for k = {k}")))?;
            vacations.push(entry.law.build(&format!("vacations[{i}]"))?);
        }
        if let Some((i, v)) = self.vacations.iter().enumerate().find(|(_, v)| v.k >= h) {
            return Err(invalid(format!("vacations[{i}].k"), format!("k = {} is outside 0..{h}", v.k)));
        }
        QueueModel::new(map, h, big_h, services, vacations, self.policy).map_err(|e| invalid("model", e.to_string()))
    }

    /// Explicit `(alpha, T)` form of a model; parses back to the same model.
    pub fn from_model(model: &QueueModel) -> ModelConfig {
        let rows = |m: &RMat| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        ModelConfig {
            arrivals: Arrivals { c: rows(model.arrivals().c()), d: rows(model.arrivals().d()) },
            thresholds: Thresholds { h: model.h(), big_h: model.H() },
            services: (model.h()..=model.H())
                .map(|r| ServiceEntry { r, law: PhSpec::from_ph(model.service(r)) })
                .collect(),
            vacations: (0..model.h()).map(|k| VacationEntry { k, law: PhSpec::from_ph(model.vacation(k)) }).collect(),
            policy: model.policy(),
            solver: SolverOverrides::default(),
            simulation: SimulationOverrides::default(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        let s = &self.solver;
        o.truncation = s.truncation.or(o.truncation);
        o.tail_target = s.tail_target.unwrap_or(o.tail_target);
        o.truncation_cap = s.truncation_cap.unwrap_or(o.truncation_cap);
        o.coeff_target = s.coeff_target.unwrap_or(o.coeff_target);
        o.component_tol = s.component_tol.unwrap_or(o.component_tol);
        o
    }

    pub fn sim_options(&self) -> SimOptions {
        let mut o = SimOptions::default();
        let s = &self.simulation;
        o.seed = s.seed.unwrap_or(o.seed);
        o.events = s.events.unwrap_or(o.events);
        o.warmup = s.warmup.unwrap_or(o.warmup);
        o.batches = s.batches.unwrap_or(o.batches);
        o.queue_guard = s.queue_guard.unwrap_or(o.queue_guard);
        o
    }
}

/// How the vacation rate depends on the type `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// `rate * (k + 1)^2`
    Quadratic,
    Constant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub name: String,
    /// Erlang stages of every vacation.
    pub phases: usize,
    /// Per-stage rate of the type-0 vacation.
    pub rate: f64,
    pub growth: Growth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Base {
    Path(PathBuf),
    Inline(Box<ModelConfig>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Model config (inline, or a path relative to the sweep file) whose
    /// vacations are replaced per case.
    pub base: Base,
    /// Values of `l` in `(C, D) -> (l C, l D)`.
    pub scale: Vec<f64>,
    pub cases: Vec<SweepCase>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<(SweepConfig, ModelConfig, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Read { path: path.to_path_buf(), source: e })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let sweep: SweepConfig = serde_path_to_error::deserialize(de).map_err(|e| invalid(e.path().to_string(), e.inner().to_string()))?;
        if sweep.scale.is_empty() || sweep.scale.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(invalid("scale", "need one or more positive values"));
        }
        if sweep.cases.is_empty() {
            return Err(invalid("cases", "need at least one case"));
        }
        let base = match &sweep.base {
            Base::Inline(b) => (**b).clone(),
            Base::Path(p) => {
                let full = path.parent().unwrap_or(Path::new(".")).join(p);
                ModelConfig::load(&full)
                    .map_err(|e| match e {
                        CliError::Config { path, reason } => invalid(format!("base ({}): {path}", full.display()), reason),
                        other => other,
                    })?
                    .0
            }
        };
        Ok((sweep, base, text))
    }

    /// The base model at scale `l` with the vacations of `case`.
    pub fn point(base: &ModelConfig, case: &SweepCase, l: f64) -> Result<QueueModel, CliError> {
        let model = base.model()?;
        let map = model.arrivals().scaled(l).map_err(|e| invalid("scale", e.to_string()))?;
        let vacations = (0..model.h())
            .map(|k| {
                let rate = match case.growth {
                    Growth::Quadratic => case.rate * ((k + 1) * (k + 1)) as f64,
                    Growth::Constant => case.rate,
                };
                PhaseType::erlang(case.phases, rate).map_err(|e| invalid(format!("cases.{}", case.name), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        QueueModel::new(map, model.h(), model.H(), model.services().to_vec(), vacations, model.policy())
            .map_err(|e| invalid("model", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{
        "arrivals": {"C": [[-3.0]], "D": [[3.0]]},
        "thresholds": {"h": 1, "H": 2},
        "services": [{"r": 1, "exponential": {"rate": 4.0}}, {"r": 2, "erlang": {"phases": 2, "mean": 0.5}}],
        "vacations": [{"k": 0, "ph": {"alpha": [1.0], "T": [[-2.0]]}}],
        "policy": "sv"
    }"#;

    #[test]
    fn toy_parses() {
        let m = ModelConfig::parse(TOY).unwrap().model().unwrap();
        assert_eq!((m.h(), m.H()), (1, 2));
        assert!((m.service(2).mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_paths() {
        let bad = TOY.replace("\"rate\": 4.0", "\"rate\": \"fast\"");
        match ModelConfig::parse(&bad) {
            Err(CliError::Config { path, .. }) => assert!(path.starts_with("services[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
        let bad = TOY.replace("\"h\": 1", "\"h\": 3");
        match ModelConfig::parse(&bad).unwrap().model() {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "thresholds"),
            other => panic!("{other:?}"),
        }
        let bad = TOY.replace("\"mean\": 0.5", "\"mean\": 0.5, \"rate\": 1.0");
        assert!(ModelConfig::parse(&bad).unwrap().model().is_err());
        let bad = TOY.replace("\"policy\": \"sv\"", "\"policy\": \"sometimes\"");
        match ModelConfig::parse(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "policy"),
            other => panic!("{other:?}"),
        }
    }
}
