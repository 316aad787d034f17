//! The four workflows behind the `bulkvac` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use bulkvac::sim::{Estimate, RateCheck};
use bulkvac::{effective_rate_check, simulate as run_sim, solve as run_solver, Policy, QueueModel, SimEstimates, SimOptions, Solution};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ModelConfig, SweepConfig};
use crate::output::{self, MeasureSummary, Provenance};
use crate::{CliError, Result};

/// `|z|` above which `compare` reports a disagreement.
pub const Z_LIMIT: f64 = 4.0;

/// Queue lengths `n < QUEUE_CELLS` whose marginals are compared.
pub const QUEUE_CELLS: usize = 10;

fn pool(jobs: Option<usize>) -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    b.build().expect("thread pool")
}

#[derive(Debug, Clone, Default)]
pub struct SolveArgs {
    pub policy: Option<Policy>,
    pub trunc: Option<usize>,
}

fn configured(cfg: &ModelConfig, args: &SolveArgs) -> Result<(QueueModel, bulkvac::SolverOptions)> {
    let mut model = cfg.model()?;
    if let Some(p) = args.policy {
        model = model.with_policy(p);
    }
    let mut opts = cfg.solver_options();
    if args.trunc.is_some() {
        opts.truncation = args.trunc;
    }
    Ok((model, opts))
}

#[derive(Serialize)]
struct SolveReport<'a> {
    provenance: Provenance,
    diagnostics: &'a bulkvac::solver::Diagnostics,
}

/// Solves `config` and writes the tables, `measures.json` and
/// `diagnostics.json` into `out`.
pub fn solve(config: &Path, out: &Path, args: &SolveArgs) -> Result<Solution> {
    let (cfg, text) = ModelConfig::load(config)?;
    let (model, opts) = configured(&cfg, args)?;
    let sol = run_solver(&model, &opts)?;
    output::create_dir(out)?;
    for t in output::solution_tables(&sol) {
        output::write_table(out, &t)?;
    }
    output::write_json(&out.join("measures.json"), &MeasureSummary::new(&sol))?;
    let report = SolveReport { provenance: Provenance::new("solve", config, &text), diagnostics: &sol.diagnostics };
    output::write_json(&out.join("diagnostics.json"), &report)?;
    info!("L_q = {:.6}, rho = {:.6}", sol.measures.l_q, sol.diagnostics.rho);
    Ok(sol)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateArgs {
    pub seed: Option<u64>,
    /// Events per replication.
    pub events: Option<u64>,
    pub replications: usize,
    pub jobs: Option<usize>,
    pub policy: Option<Policy>,
}

fn sim_options(cfg: &ModelConfig, seed: Option<u64>, events: Option<u64>) -> SimOptions {
    let mut o = cfg.sim_options();
    o.seed = seed.unwrap_or(o.seed);
    o.events = events.unwrap_or(o.events);
    o
}

/// Replications use seeds `seed, seed + 1, ...` and are pooled batch-wise.
fn replicate(model: &QueueModel, opts: &SimOptions, replications: usize, jobs: Option<usize>) -> Result<SimEstimates> {
    let parts = pool(jobs).install(|| {
        (0..replications.max(1) as u64)
            .into_par_iter()
            .map(|i| run_sim(model, &SimOptions { seed: opts.seed.wrapping_add(i), ..opts.clone() }))
            .collect::<bulkvac::Result<Vec<_>>>()
    })?;
    Ok(SimEstimates::merge(parts).expect("at least one replication"))
}

#[derive(Serialize)]
struct SimReport<'a> {
    provenance: Provenance,
    seeds: &'a [u64],
    events: u64,
    warmup: f64,
    batches: usize,
    time: f64,
    low_precision: bool,
    arrival_rate: RateCheck,
    measures: &'a bulkvac::sim::SimMeasures,
    p_service: &'a [Estimate],
    p_vacation_type: &'a [Estimate],
}

pub fn simulate(config: &Path, out: &Path, args: &SimulateArgs) -> Result<SimEstimates> {
    let (cfg, text) = ModelConfig::load(config)?;
    let mut model = cfg.model()?;
    if let Some(p) = args.policy {
        model = model.with_policy(p);
    }
    let opts = sim_options(&cfg, args.seed, args.events);
    let est = replicate(&model, &opts, args.replications, args.jobs)?;
    if est.low_precision {
        warn!("short run: standard errors rest on few observations");
    }
    output::create_dir(out)?;
    for t in output::sim_tables(&est, model.h(), model.policy()) {
        output::write_table(out, &t)?;
    }
    let report = SimReport {
        provenance: Provenance::new("simulate", config, &text),
        seeds: &est.seeds,
        events: est.events,
        warmup: est.warmup,
        batches: est.batches,
        time: est.time,
        low_precision: est.low_precision,
        arrival_rate: effective_rate_check(&est),
        measures: &est.measures,
        p_service: &est.p_service,
        p_vacation_type: &est.p_vacation_type,
    };
    output::write_json(&out.join("simulation.json"), &report)?;
    Ok(est)
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub quantity: String,
    pub solver: f64,
    pub simulated: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub policy: Policy,
    pub events: u64,
    pub seeds: Vec<u64>,
    pub limit: f64,
    pub rows: Vec<Comparison>,
}

impl CompareReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !(r.z.abs() <= self.limit)).count()
    }

    pub fn worst(&self) -> Option<&Comparison> {
        self.rows.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
    }

    pub fn check(&self) -> Result<()> {
        match self.failures() {
            0 => Ok(()),
            failed => Err(CliError::Compare { failed, total: self.rows.len(), limit: self.limit }),
        }
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>14} {:>14} {:>12} {:>8}", "quantity", "solver", "simulated", "stderr", "z")?;
        for r in &self.rows {
            let flag = if r.z.abs() <= self.limit { "" } else { "  <-" };
            writeln!(f, "{:<16} {:>14.6} {:>14.6} {:>12.6} {:>8.3}{flag}", r.quantity, r.solver, r.simulated, r.stderr, r.z)?;
        }
        write!(f, "{} of {} beyond |z| = {}", self.failures(), self.rows.len(), self.limit)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompareArgs {
    pub solve: SolveArgs,
    pub seed: Option<u64>,
    pub events: Option<u64>,
    pub replications: usize,
    pub jobs: Option<usize>,
}

/// Solver values against simulated estimates. Only the report is returned;
/// call [`CompareReport::check`] for the verdict.
pub fn compare(config: &Path, args: &CompareArgs) -> Result<CompareReport> {
    let (cfg, _) = ModelConfig::load(config)?;
    let (model, opts) = configured(&cfg, &args.solve)?;
    let sol = run_solver(&model, &opts)?;
    let sim_opts = sim_options(&cfg, args.seed, args.events);
    let est = replicate(&model, &sim_opts, args.replications, args.jobs)?;
    Ok(compare_with(&sol, &est))
}

pub fn compare_with(sol: &Solution, est: &SimEstimates) -> CompareReport {
    let (m, s) = (&sol.measures, &est.measures);
    let mut rows = Vec::new();
    let mut add = |quantity: String, solver: f64, e: Estimate| {
        rows.push(Comparison { quantity, solver, simulated: e.mean, stderr: e.se, z: e.z_score(solver) });
    };
    let scalar = [
        ("L_q", m.l_q, s.l_q),
        ("L_s", m.l_s, s.l_s),
        ("W_q", m.w_q, s.w_q),
        ("W_s", m.w_s, s.w_s),
        ("L_ser", m.l_ser, s.l_ser),
        ("L_vac", m.l_vac, s.l_vac),
        ("P_dor", m.p_dormant, s.p_dormant),
        ("P_busy", m.p_busy, s.p_busy),
        ("P_vac", m.p_vacation, s.p_vacation),
        ("P_idle", m.p_idle, s.p_idle),
        ("lambda", sol.model.arrivals().rate(), s.arrival_rate),
        ("epoch_rate", sol.epoch.stats.sigma, s.epoch_rate),
    ];
    for (name, v, e) in scalar {
        add(name.into(), v, e);
    }
    let h = sol.model.h();
    for (i, (v, e)) in m.p_service.iter().zip(&est.p_service).enumerate() {
        add(format!("P_ser[{}]", h + i), *v, *e);
    }
    for (k, (v, e)) in m.p_vacation_type.iter().zip(&est.p_vacation_type).enumerate() {
        add(format!("P_vac[{k}]"), *v, *e);
    }
    for n in 0..QUEUE_CELLS {
        let v = m.queue.get(n).copied().unwrap_or(0.0);
        if let Some(e) = est.queue.get(n) {
            add(format!("P_queue[{n}]"), v, *e);
        }
    }
    for n in 0..QUEUE_CELLS {
        let v = m.queue_embedded.get(n).copied().unwrap_or(0.0);
        if let Some(e) = est.queue_embedded.get(n) {
            add(format!("P_queue+[{n}]"), v, *e);
        }
    }
    CompareReport { policy: sol.model.policy(), events: est.events, seeds: est.seeds.clone(), limit: Z_LIMIT, rows }
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub jobs: Option<usize>,
    pub policy: Option<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub l: f64,
    pub case: String,
    pub lambda: f64,
    pub rho: f64,
    pub l_q: Option<f64>,
    /// `ok`, `unstable` or the solver error.
    pub status: String,
}

const SWEEP_HEADER: [&str; 6] = ["l", "case", "lambda", "rho", "L_q", "status"];

fn sweep_record(r: &SweepRow) -> [String; 6] {
    [
        format!("{}", r.l),
        r.case.clone(),
        format!("{:.6}", r.lambda),
        format!("{:.6}", r.rho),
        r.l_q.map_or(String::new(), |v| format!("{v:.6}")),
        r.status.clone(),
    ]
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let err = |e: csv::Error| CliError::Write { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(SWEEP_HEADER).map_err(err)?;
    for r in rows {
        w.write_record(sweep_record(r)).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Write { path: path.to_path_buf(), source: e })
}

fn sweep_point(base: &ModelConfig, case: &crate::config::SweepCase, l: f64, policy: Option<Policy>) -> Result<SweepRow> {
    let mut model = SweepConfig::point(base, case, l)?;
    if let Some(p) = policy {
        model = model.with_policy(p);
    }
    let (lambda, rho) = (model.arrivals().rate(), model.traffic_intensity());
    let row = |l_q, status: String| SweepRow { l, case: case.name.clone(), lambda, rho, l_q, status };
    Ok(match run_solver(&model, &base.solver_options()) {
        Ok(sol) => row(Some(sol.measures.l_q), "ok".into()),
        Err(e) if e.kind() == bulkvac::ErrorKind::Unstable => row(None, "unstable".into()),
        Err(e) => {
            warn!("l = {l}, case {}: {e}", case.name);
            row(None, format!("solver_failure: {e}"))
        }
    })
}

/// One row per `(l, case)`. Each point lands in its own file under
/// `out/points/` first; `sweep.csv` is assembled from those.
pub fn sweep(config: &Path, out: &Path, args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let (sweep, base, _) = SweepConfig::load(config)?;
    let points_dir = out.join("points");
    output::create_dir(&points_dir)?;
    let grid: Vec<(usize, f64, usize)> = sweep
        .scale
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| (0..sweep.cases.len()).map(move |c| (i, l, c)))
        .collect();
    let files: Vec<PathBuf> = pool(args.jobs).install(|| {
        grid.par_iter()
            .map(|&(i, l, c)| {
                let case = &sweep.cases[c];
                let row = sweep_point(&base, case, l, args.policy)?;
                let path = points_dir.join(format!("{i:04}_{}.csv", case.name));
                write_rows(&path, std::slice::from_ref(&row))?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::with_capacity(files.len());
    for path in &files {
        rows.push(read_row(path)?);
    }
    write_rows(&out.join("sweep.csv"), &rows)?;
    Ok(rows)
}

fn read_row(path: &Path) -> Result<SweepRow> {
    let bad = |reason: String| CliError::Config { path: path.display().to_string(), reason };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let rec = r.records().next().ok_or_else(|| bad("empty point file".into()))?.map_err(|e| bad(e.to_string()))?;
    let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(e.to_string()));
    Ok(SweepRow {
        l: num(0)?,
        case: rec[1].to_string(),
        lambda: num(2)?,
        rho: num(3)?,
        l_q: if rec[4].is_empty() { None } else { Some(num(4)?) },
        status: rec[5].to_string(),
    })
}
