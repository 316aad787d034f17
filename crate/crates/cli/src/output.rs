//! CSV tables and JSON summaries.
//!
//! Tables are in long form with header `n,index,phase,value[,stderr]`.
//! `index` is the batch size `r` or vacation type `k`, `R` for dormancy and
//! `P` for a queue-length marginal (phase `all`). Each column ends with a
//! row whose `n` is `total`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bulkvac::linalg::RRow;
use bulkvac::sim::{Estimate, SimEstimates, SimTable};
use bulkvac::{Policy, Solution};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{CliError, Result};

#[derive(Debug, Clone)]
pub struct Column {
    pub index: String,
    pub phase: String,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem, e.g. `table1_service_completion`.
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, index: &str, phase: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.index == index && c.phase == phase)
    }
}

/// Numbering: 1-4 for SV, 5-8 for MV.
pub fn table_names(policy: Policy) -> [String; 4] {
    let base = if policy == Policy::Sv { 1 } else { 5 };
    let stems = ["service_completion", "vacation_termination", "arbitrary_service", "arbitrary_vacation"];
    std::array::from_fn(|i| format!("table{}_{}", base + i, stems[i]))
}

fn phase_columns(index: String, rows: &[RRow]) -> Vec<Column> {
    let m = rows.first().map_or(0, |r| r.len());
    (0..m)
        .map(|j| Column {
            index: index.clone(),
            phase: (j + 1).to_string(),
            values: rows.iter().map(|r| r[j]).collect(),
            stderr: None,
        })
        .collect()
}

fn marginal(values: Vec<f64>, stderr: Option<Vec<f64>>) -> Column {
    Column { index: "P".into(), phase: "all".into(), values, stderr }
}

pub fn solution_tables(sol: &Solution) -> Vec<Table> {
    let (h, policy) = (sol.model.h(), sol.model.policy());
    let names = table_names(policy);
    let emb = &sol.embedded;
    let arb = &sol.epoch;
    let mut t1 = Vec::new();
    for (i, col) in emb.xi_plus.iter().enumerate() {
        t1.extend(phase_columns((h + i).to_string(), col));
    }
    let mut t2 = Vec::new();
    for (k, col) in emb.gamma_plus.iter().enumerate() {
        t2.extend(phase_columns(k.to_string(), col));
    }
    t2.push(marginal((0..emb.len()).map(|n| emb.queue_marginal(n)).collect(), None));
    let mut t3 = Vec::new();
    if policy == Policy::Sv {
        t3.extend(phase_columns("R".into(), &arb.dormant));
    }
    for (i, col) in arb.xi.iter().enumerate() {
        t3.extend(phase_columns((h + i).to_string(), col));
    }
    let mut t4 = Vec::new();
    for (k, col) in arb.gamma.iter().enumerate() {
        t4.extend(phase_columns(k.to_string(), col));
    }
    t4.push(marginal(sol.measures.queue.clone(), None));
    names.into_iter().zip([t1, t2, t3, t4]).map(|(name, columns)| Table { name, columns }).collect()
}

fn sim_columns(index: String, t: &SimTable, i: usize) -> Vec<Column> {
    let m = t.mean[i].first().map_or(0, |r| r.len());
    (0..m)
        .map(|j| Column {
            index: index.clone(),
            phase: (j + 1).to_string(),
            values: t.mean[i].iter().map(|r| r[j]).collect(),
            stderr: Some(t.se[i].iter().map(|r| r[j]).collect()),
        })
        .collect()
}

fn estimates(e: &[Estimate]) -> Column {
    marginal(e.iter().map(|e| e.mean).collect(), Some(e.iter().map(|e| e.se).collect()))
}

pub fn sim_tables(est: &SimEstimates, h: usize, policy: Policy) -> Vec<Table> {
    let names = table_names(policy);
    let mut t1 = Vec::new();
    for i in 0..est.xi_plus.mean.len() {
        t1.extend(sim_columns((h + i).to_string(), &est.xi_plus, i));
    }
    let mut t2 = Vec::new();
    for k in 0..est.gamma_plus.mean.len() {
        t2.extend(sim_columns(k.to_string(), &est.gamma_plus, k));
    }
    t2.push(estimates(&est.queue_embedded));
    let mut t3 = Vec::new();
    if policy == Policy::Sv {
        t3.extend(sim_columns("R".into(), &est.dormant, 0));
    }
    for i in 0..est.xi.mean.len() {
        t3.extend(sim_columns((h + i).to_string(), &est.xi, i));
    }
    let mut t4 = Vec::new();
    for k in 0..est.gamma.mean.len() {
        t4.extend(sim_columns(k.to_string(), &est.gamma, k));
    }
    t4.push(estimates(&est.queue));
    names.into_iter().zip([t1, t2, t3, t4]).map(|(name, columns)| Table { name, columns }).collect()
}

fn fmt(v: f64) -> String {
    // keep "-0.000000" out of the files
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Write { path: path.to_path_buf(), source: e }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write { path: path.to_path_buf(), source: e.into() }
}

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    let path = dir.join(format!("{}.csv", table.name));
    let with_se = table.columns.iter().any(|c| c.stderr.is_some());
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    let mut header = vec!["n", "index", "phase", "value"];
    if with_se {
        header.push("stderr");
    }
    w.write_record(&header).map_err(csv_err(&path))?;
    let rows = table.columns.iter().map(|c| c.values.len()).max().unwrap_or(0);
    for n in 0..rows {
        for c in table.columns.iter().filter(|c| n < c.values.len()) {
            let mut rec = vec![n.to_string(), c.index.clone(), c.phase.clone(), fmt(c.values[n])];
            if with_se {
                rec.push(c.stderr.as_ref().map_or(String::new(), |s| fmt(s[n])));
            }
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
    }
    for c in &table.columns {
        let mut rec = vec!["total".to_string(), c.index.clone(), c.phase.clone(), fmt(c.values.iter().sum())];
        if with_se {
            rec.push(String::new());
        }
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(write_err(&path))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output types serialize");
    std::fs::write(path, text + "\n").map_err(write_err(path))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub version: &'static str,
}

impl Provenance {
    pub fn new(command: &str, config: &Path, text: &str) -> Self {
        Provenance {
            command: command.into(),
            config: config.display().to_string(),
            config_sha256: sha256_hex(text.as_bytes()),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Measures under the names used in the tables' footers.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureSummary {
    pub policy: Policy,
    pub lambda: f64,
    pub rho: f64,
    #[serde(rename = "L_q")]
    pub l_q: f64,
    #[serde(rename = "L_s")]
    pub l_s: f64,
    #[serde(rename = "W_q")]
    pub w_q: f64,
    #[serde(rename = "W_s")]
    pub w_s: f64,
    #[serde(rename = "L_ser")]
    pub l_ser: f64,
    #[serde(rename = "L_vac")]
    pub l_vac: f64,
    #[serde(rename = "P_dor")]
    pub p_dor: f64,
    #[serde(rename = "P_busy")]
    pub p_busy: f64,
    #[serde(rename = "P_vac")]
    pub p_vac: f64,
    #[serde(rename = "P_idle")]
    pub p_idle: f64,
    /// `P_r^ser` keyed by `r`.
    #[serde(rename = "P_ser")]
    pub p_ser: BTreeMap<usize, f64>,
    /// Type-`k` vacation probabilities keyed by `k`.
    pub p_vacation_type: BTreeMap<usize, f64>,
    /// Embedded epochs per unit time.
    pub sigma: f64,
    #[serde(rename = "E")]
    pub cycle: f64,
    pub l_q_tail: f64,
}

impl MeasureSummary {
    pub fn new(sol: &Solution) -> Self {
        let m = &sol.measures;
        let h = sol.model.h();
        MeasureSummary {
            policy: sol.model.policy(),
            lambda: sol.model.arrivals().rate(),
            rho: sol.diagnostics.rho,
            l_q: m.l_q,
            l_s: m.l_s,
            w_q: m.w_q,
            w_s: m.w_s,
            l_ser: m.l_ser,
            l_vac: m.l_vac,
            p_dor: m.p_dormant,
            p_busy: m.p_busy,
            p_vac: m.p_vacation,
            p_idle: m.p_idle,
            p_ser: m.p_service.iter().enumerate().map(|(i, p)| (h + i, *p)).collect(),
            p_vacation_type: m.p_vacation_type.iter().copied().enumerate().collect(),
            sigma: sol.epoch.stats.sigma,
            cycle: sol.epoch.stats.cycle,
            l_q_tail: m.l_q_tail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn negative_zero_prints_plain() {
        assert_eq!(fmt(-1e-12), "0.000000");
        assert_eq!(fmt(0.0024251), "0.002425");
    }
}
