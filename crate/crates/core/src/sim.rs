//! Event-by-event simulation of the queue, used as an independent check on
//! the analytic solution.
//!
//! Every holding time is exponential (MAP phases, PH stages), so the state
//! `(queue, server mode, arrival phase)` is advanced one competing-exponential
//! step at a time. One step is one event. Statistics are collected after a
//! warmup and split into batches by event count; standard errors come from
//! the spread of the batch means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Policy, QueueModel};
use crate::ph::PhaseType;

#[derive(Debug, Clone, Serialize)]
pub struct SimOptions {
    pub seed: u64,
    pub events: u64,
    pub warmup: f64,
    pub batches: usize,
    /// Queue length treated as evidence of instability.
    pub queue_guard: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { seed: 1, events: 10_000_000, warmup: 0.2, batches: 32, queue_guard: 1_000_000 }
    }
}

/// Runs below this many events are flagged as low precision.
pub const MIN_EVENTS: u64 = 10_000;

/// Transition table of one state: cumulative rates and targets.
#[derive(Debug, Clone)]
struct Jumps {
    total: f64,
    cum: Vec<f64>,
    to: Vec<Option<usize>>,
}

impl Jumps {
    fn pick(&self, u: f64) -> Option<usize> {
        let x = u * self.total;
        let i = self.cum.partition_point(|&c| c <= x).min(self.cum.len() - 1);
        self.to[i]
    }
}

/// Stage-walking form of a PH law. `None` as a target means absorption.
#[derive(Debug, Clone)]
struct Stages {
    start: Jumps,
    atom: bool,
    jumps: Vec<Jumps>,
}

impl Stages {
    fn new(ph: &PhaseType) -> Self {
        let n = ph.phases();
        let exit = ph.exit();
        let jumps = (0..n)
            .map(|i| {
                let mut cum = Vec::new();
                let mut to = Vec::new();
                let mut acc = 0.0;
                for j in 0..n {
                    if j != i && ph.t()[(i, j)] > 0.0 {
                        acc += ph.t()[(i, j)];
                        cum.push(acc);
                        to.push(Some(j));
                    }
                }
                acc += exit[i].max(0.0);
                cum.push(acc);
                to.push(None);
                Jumps { total: acc, cum, to }
            })
            .collect();
        let mut cum = Vec::new();
        let mut to = Vec::new();
        let mut acc = 0.0;
        for (i, &a) in ph.alpha().iter().enumerate() {
            if a > 0.0 {
                acc += a;
                cum.push(acc);
                to.push(Some(i));
            }
        }
        let atom = ph.atom() > 0.0;
        if atom {
            cum.push(1.0);
            to.push(None);
        }
        Stages { start: Jumps { total: if atom { 1.0 } else { acc }, cum, to }, atom, jumps }
    }

    fn first<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        if !self.atom && self.start.cum.len() == 1 {
            return self.start.to[0];
        }
        self.start.pick(rng.random())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Dormant,
    Busy { r: usize, stage: usize },
    Vacation { k: usize, stage: usize },
}

/// Per-batch accumulation, indexed `[index][n * m + phase]`.
#[derive(Debug, Clone, Default)]
struct Grid {
    cols: Vec<Vec<f64>>,
}

impl Grid {
    fn new(indices: usize) -> Self {
        Grid { cols: vec![Vec::new(); indices] }
    }

    #[inline]
    fn add(&mut self, index: usize, slot: usize, v: f64) {
        let col = &mut self.cols[index];
        if col.len() <= slot {
            col.resize(slot + 1, 0.0);
        }
        col[slot] += v;
    }

    fn get(&self, index: usize, slot: usize) -> f64 {
        self.cols[index].get(slot).copied().unwrap_or(0.0)
    }

    fn slots(&self) -> usize {
        self.cols.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Raw sums of one batch.
#[derive(Debug, Clone)]
struct Batch {
    time: f64,
    events: u64,
    arrivals: u64,
    epochs: u64,
    queue_time: f64,
    busy_time: f64,
    batch_time: f64,
    vacation_time: f64,
    type_time: f64,
    dormant_time: f64,
    xi_plus: Grid,
    gamma_plus: Grid,
    dormant: Grid,
    xi: Grid,
    gamma: Grid,
}

impl Batch {
    fn new(services: usize, h: usize) -> Self {
        Batch {
            time: 0.0,
            events: 0,
            arrivals: 0,
            epochs: 0,
            queue_time: 0.0,
            busy_time: 0.0,
            batch_time: 0.0,
            vacation_time: 0.0,
            type_time: 0.0,
            dormant_time: 0.0,
            xi_plus: Grid::new(services),
            gamma_plus: Grid::new(h),
            dormant: Grid::new(1),
            xi: Grid::new(services),
            gamma: Grid::new(h),
        }
    }
}

/// Mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Ratio estimate `sum num / sum den` with the spread of per-batch ratios.
    fn ratio(parts: &[(f64, f64)]) -> Estimate {
        let (sn, sd) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let mean = if sd > 0.0 { sn / sd } else { 0.0 };
        let vals: Vec<f64> = parts.iter().filter(|p| p.1 > 0.0).map(|p| p.0 / p.1).collect();
        Estimate { mean, se: batch_se(&vals) }
    }

    /// `(value - mean) / se`.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = value - self.mean;
        if self.se > 0.0 {
            d / self.se
        } else if d.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY * d.signum()
        }
    }
}

fn batch_se(vals: &[f64]) -> f64 {
    let b = vals.len();
    if b < 2 {
        return f64::INFINITY;
    }
    let mean = vals.iter().sum::<f64>() / b as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

type GridOf = fn(&Batch) -> &Grid;

/// Per-row sums over every index and phase of `grids`.
fn marginal(raw: &[Batch], m: usize, grids: &[GridOf], norm: impl Fn(&Batch) -> f64) -> Vec<Estimate> {
    let slots = raw.iter().flat_map(|b| grids.iter().map(move |g| g(b).slots())).max().unwrap_or(0);
    (0..slots.div_ceil(m.max(1)))
        .map(|n| {
            let parts: Vec<(f64, f64)> = raw
                .iter()
                .map(|b| {
                    let v: f64 = grids
                        .iter()
                        .map(|g| {
                            let grid = g(b);
                            (0..grid.cols.len()).map(|i| (0..m).map(|j| grid.get(i, n * m + j)).sum::<f64>()).sum::<f64>()
                        })
                        .sum();
                    (v, norm(b))
                })
                .collect();
            Estimate::ratio(&parts)
        })
        .collect()
}

/// Time fraction spent under each index of a time-average grid.
fn index_totals(raw: &[Batch], grid: GridOf) -> Vec<Estimate> {
    let indices = raw.first().map_or(0, |b| grid(b).cols.len());
    (0..indices)
        .map(|i| Estimate::ratio(&raw.iter().map(|b| (grid(b).cols[i].iter().sum(), b.time)).collect::<Vec<_>>()))
        .collect()
}

/// Estimated cells of one distribution, `[index][n][phase]`.
#[derive(Debug, Clone, Serialize)]
pub struct SimTable {
    pub mean: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
}

impl SimTable {
    fn build(batches: &[Batch], m: usize, grid: impl Fn(&Batch) -> &Grid, norm: impl Fn(&Batch) -> f64) -> SimTable {
        let indices = batches.first().map_or(0, |b| grid(b).cols.len());
        let slots = batches.iter().map(|b| grid(b).slots()).max().unwrap_or(0);
        let rows = slots.div_ceil(m.max(1));
        let mut mean = vec![vec![vec![0.0; m]; rows]; indices];
        let mut se = mean.clone();
        for i in 0..indices {
            for n in 0..rows {
                for j in 0..m {
                    let parts: Vec<(f64, f64)> = batches.iter().map(|b| (grid(b).get(i, n * m + j), norm(b))).collect();
                    let e = Estimate::ratio(&parts);
                    mean[i][n][j] = e.mean;
                    se[i][n][j] = e.se;
                }
            }
        }
        SimTable { mean, se }
    }

    /// Sum over phases of `[index][n]`.
    pub fn total(&self, index: usize, n: usize) -> f64 {
        self.mean.get(index).and_then(|c| c.get(n)).map_or(0.0, |v| v.iter().sum())
    }

    pub fn rows(&self) -> usize {
        self.mean.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Simulated counterparts of the solver's measures.
#[derive(Debug, Clone, Serialize)]
pub struct SimMeasures {
    pub l_q: Estimate,
    pub l_s: Estimate,
    pub w_q: Estimate,
    pub w_s: Estimate,
    pub l_ser: Estimate,
    pub l_vac: Estimate,
    pub p_dormant: Estimate,
    pub p_busy: Estimate,
    pub p_vacation: Estimate,
    pub p_idle: Estimate,
    /// Arrivals per unit time.
    pub arrival_rate: Estimate,
    /// Service completions plus vacation terminations per unit time.
    pub epoch_rate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimEstimates {
    pub seeds: Vec<u64>,
    pub events: u64,
    pub warmup: f64,
    pub batches: usize,
    /// Simulated time after warmup.
    pub time: f64,
    pub low_precision: bool,
    pub measures: SimMeasures,
    /// Embedded law at service completions, index `r - h`.
    pub xi_plus: SimTable,
    /// Embedded law at vacation terminations, index `k`.
    pub gamma_plus: SimTable,
    /// Time-average law while dormant (one index).
    pub dormant: SimTable,
    pub xi: SimTable,
    pub gamma: SimTable,
    /// `P_n^queue`.
    pub queue: Vec<Estimate>,
    /// `P_n^{queue+}`.
    pub queue_embedded: Vec<Estimate>,
    /// `P_r^ser`, `r = h..=H`.
    pub p_service: Vec<Estimate>,
    /// Probability of a type-`k` vacation in progress.
    pub p_vacation_type: Vec<Estimate>,
    #[serde(skip)]
    raw: Vec<Batch>,
    #[serde(skip)]
    m: usize,
    #[serde(skip)]
    lambda: f64,
}

impl SimEstimates {
    fn from_batches(raw: Vec<Batch>, m: usize, lambda: f64, seeds: Vec<u64>, warmup: f64) -> SimEstimates {
        let time = |b: &Batch| b.time;
        let per_time = |f: fn(&Batch) -> f64| Estimate::ratio(&raw.iter().map(|b| (f(b), b.time)).collect::<Vec<_>>());
        let l_q = per_time(|b| b.queue_time);
        let l_s = per_time(|b| b.queue_time + b.batch_time);
        let scale = |e: Estimate, f: f64| Estimate { mean: e.mean * f, se: e.se * f };
        let p_busy = per_time(|b| b.busy_time);
        let measures = SimMeasures {
            l_q,
            l_s,
            w_q: scale(l_q, 1.0 / lambda),
            w_s: scale(l_s, 1.0 / lambda),
            l_ser: Estimate::ratio(&raw.iter().map(|b| (b.batch_time, b.busy_time)).collect::<Vec<_>>()),
            l_vac: Estimate::ratio(&raw.iter().map(|b| (b.type_time, b.vacation_time)).collect::<Vec<_>>()),
            p_dormant: per_time(|b| b.dormant_time),
            p_busy,
            p_vacation: per_time(|b| b.vacation_time),
            p_idle: Estimate { mean: 1.0 - p_busy.mean, se: p_busy.se },
            arrival_rate: per_time(|b| b.arrivals as f64),
            epoch_rate: per_time(|b| b.epochs as f64),
        };
        let epochs = |b: &Batch| b.epochs as f64;
        let queue = marginal(&raw, m, &[|b| &b.dormant, |b| &b.xi, |b| &b.gamma], time);
        let queue_embedded = marginal(&raw, m, &[|b| &b.xi_plus, |b| &b.gamma_plus], epochs);
        let p_service = index_totals(&raw, |b| &b.xi);
        let p_vacation_type = index_totals(&raw, |b| &b.gamma);
        let events: u64 = raw.iter().map(|b| b.events).sum();
        SimEstimates {
            seeds,
            events,
            warmup,
            batches: raw.len(),
            time: raw.iter().map(time).sum(),
            low_precision: events < MIN_EVENTS || raw.iter().any(|b| b.epochs == 0),
            measures,
            xi_plus: SimTable::build(&raw, m, |b| &b.xi_plus, epochs),
            gamma_plus: SimTable::build(&raw, m, |b| &b.gamma_plus, epochs),
            dormant: SimTable::build(&raw, m, |b| &b.dormant, time),
            xi: SimTable::build(&raw, m, |b| &b.xi, time),
            gamma: SimTable::build(&raw, m, |b| &b.gamma, time),
            queue,
            queue_embedded,
            p_service,
            p_vacation_type,
            raw,
            m,
            lambda,
        }
    }

    /// Pools independent replications; their batches are kept as batches.
    pub fn merge(parts: Vec<SimEstimates>) -> Option<SimEstimates> {
        let first = parts.first()?;
        let (m, lambda, warmup) = (first.m, first.lambda, first.warmup);
        let mut seeds = Vec::new();
        let mut raw = Vec::new();
        for p in parts {
            seeds.extend(p.seeds);
            raw.extend(p.raw);
        }
        Some(SimEstimates::from_batches(raw, m, lambda, seeds, warmup))
    }

    /// Time fractions dormant, busy and on vacation; these sum to one.
    pub fn mode_fractions(&self) -> (f64, f64, f64) {
        let t: f64 = self.raw.iter().map(|b| b.time).sum();
        let f = |g: fn(&Batch) -> f64| self.raw.iter().map(g).sum::<f64>() / t;
        (f(|b| b.dormant_time), f(|b| b.busy_time), f(|b| b.vacation_time))
    }
}

/// Measured arrival rate against the fundamental rate `xi D e`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateCheck {
    pub measured: Estimate,
    pub expected: f64,
    pub z: f64,
}

pub fn effective_rate_check(est: &SimEstimates) -> RateCheck {
    let measured = est.measures.arrival_rate;
    RateCheck { measured, expected: est.lambda, z: measured.z_score(est.lambda) }
}

struct Sim<'a> {
    model: &'a QueueModel,
    rng: ChaCha8Rng,
    services: Vec<Stages>,
    vacations: Vec<Stages>,
    arrivals: Vec<(Jumps, Vec<bool>)>,
    queue: usize,
    phase: usize,
    mode: Mode,
    guard: usize,
}

impl Sim<'_> {
    fn check_guard(&self) -> Result<()> {
        if self.queue > self.guard {
            return Err(Error::QueueGuard { guard: self.guard });
        }
        Ok(())
    }

    /// Takes `min(queue, H)` into service, or goes on vacation / dormant.
    /// Zero-length services and vacations (PH atoms) complete on the spot.
    fn next_after_epoch(&mut self, after_vacation: bool, batch: Option<&mut Batch>) {
        let (h, big_h, m) = (self.model.h(), self.model.H(), self.model.phases());
        let mut batch = batch;
        let mut after_vacation = after_vacation;
        loop {
            if self.queue >= h {
                let r = self.queue.min(big_h);
                self.queue -= r;
                match self.services[r - h].first(&mut self.rng) {
                    Some(stage) => {
                        self.mode = Mode::Busy { r, stage };
                        return;
                    }
                    None => {
                        if let Some(b) = batch.as_deref_mut() {
                            b.xi_plus.add(r - h, self.queue * m + self.phase, 1.0);
                            b.epochs += 1;
                        }
                        after_vacation = false;
                        continue;
                    }
                }
            }
            if after_vacation && self.model.policy() == Policy::Sv {
                self.mode = Mode::Dormant;
                return;
            }
            let k = self.queue;
            match self.vacations[k].first(&mut self.rng) {
                Some(stage) => {
                    self.mode = Mode::Vacation { k, stage };
                    return;
                }
                None => {
                    if let Some(b) = batch.as_deref_mut() {
                        b.gamma_plus.add(k, self.queue * m + self.phase, 1.0);
                        b.epochs += 1;
                    }
                    after_vacation = true;
                }
            }
        }
    }

    fn step(&mut self, batch: Option<&mut Batch>) -> Result<()> {
        let (h, m) = (self.model.h(), self.model.phases());
        let server = match self.mode {
            Mode::Dormant => None,
            Mode::Busy { r, stage } => Some(&self.services[r - h].jumps[stage]),
            Mode::Vacation { k, stage } => Some(&self.vacations[k].jumps[stage]),
        };
        let (map_jumps, with_arrival) = &self.arrivals[self.phase];
        let server_rate = server.map_or(0.0, |j| j.total);
        let total = map_jumps.total + server_rate;
        let dt = self.rng.sample::<f64, _>(Exp1) / total;
        let mut batch = batch;
        if let Some(b) = batch.as_deref_mut() {
            let (q, j) = (self.queue as f64, self.phase);
            let slot = self.queue * m + j;
            b.time += dt;
            b.events += 1;
            b.queue_time += q * dt;
            match self.mode {
                Mode::Dormant => {
                    b.dormant_time += dt;
                    b.dormant.add(0, slot, dt);
                }
                Mode::Busy { r, .. } => {
                    b.busy_time += dt;
                    b.batch_time += r as f64 * dt;
                    b.xi.add(r - h, slot, dt);
                }
                Mode::Vacation { k, .. } => {
                    b.vacation_time += dt;
                    b.type_time += k as f64 * dt;
                    b.gamma.add(k, slot, dt);
                }
            }
        }
        let u: f64 = self.rng.random::<f64>() * total;
        if u < map_jumps.total {
            let i = map_jumps.cum.partition_point(|&c| c <= u).min(map_jumps.cum.len() - 1);
            let arrived = with_arrival[i];
            self.phase = map_jumps.to[i].expect("MAP jumps always have a target");
            if arrived {
                self.queue += 1;
                self.check_guard()?;
                if let Some(b) = batch.as_deref_mut() {
                    b.arrivals += 1;
                }
                if self.mode == Mode::Dormant && self.queue >= h {
                    self.next_after_epoch(false, batch);
                }
            }
            return Ok(());
        }
        let jumps = server.expect("server rate is positive only when busy or on vacation");
        let next = jumps.pick((u - map_jumps.total) / server_rate);
        match (self.mode, next) {
            (Mode::Busy { r, .. }, Some(stage)) => self.mode = Mode::Busy { r, stage },
            (Mode::Vacation { k, .. }, Some(stage)) => self.mode = Mode::Vacation { k, stage },
            (Mode::Busy { r, .. }, None) => {
                if let Some(b) = batch.as_deref_mut() {
                    b.xi_plus.add(r - h, self.queue * m + self.phase, 1.0);
                    b.epochs += 1;
                }
                self.next_after_epoch(false, batch);
            }
            (Mode::Vacation { k, .. }, None) => {
                if let Some(b) = batch.as_deref_mut() {
                    b.gamma_plus.add(k, self.queue * m + self.phase, 1.0);
                    b.epochs += 1;
                }
                self.next_after_epoch(true, batch);
            }
            (Mode::Dormant, _) => unreachable!("no server events while dormant"),
        }
        Ok(())
    }
}

fn map_jumps(model: &QueueModel) -> Vec<(Jumps, Vec<bool>)> {
    let (c, d) = (model.arrivals().c(), model.arrivals().d());
    let m = model.phases();
    (0..m)
        .map(|i| {
            let mut cum = Vec::new();
            let mut to = Vec::new();
            let mut arrival = Vec::new();
            let mut acc = 0.0;
            for j in 0..m {
                if j != i && c[(i, j)] > 0.0 {
                    acc += c[(i, j)];
                    cum.push(acc);
                    to.push(Some(j));
                    arrival.push(false);
                }
            }
            for j in 0..m {
                if d[(i, j)] > 0.0 {
                    acc += d[(i, j)];
                    cum.push(acc);
                    to.push(Some(j));
                    arrival.push(true);
                }
            }
            (Jumps { total: acc, cum, to }, arrival)
        })
        .collect()
}

/// Simulates `opts.events` events. The first `warmup` fraction is discarded.
pub fn simulate(model: &QueueModel, opts: &SimOptions) -> Result<SimEstimates> {
    if !(0.0..1.0).contains(&opts.warmup) {
        return Err(Error::input("simulation.warmup", "must lie in [0, 1)"));
    }
    if opts.batches < 2 {
        return Err(Error::input("simulation.batches", "need at least two batches"));
    }
    let warm = (opts.events as f64 * opts.warmup).floor() as u64;
    let kept = opts.events - warm;
    if kept < opts.batches as u64 {
        return Err(Error::input("simulation.events", format!("{} events leave fewer than one per batch", opts.events)));
    }
    if opts.events < MIN_EVENTS {
        log::warn!("{} events is below {MIN_EVENTS}; standard errors are unreliable", opts.events);
    }
    let (h, big_h, m) = (model.h(), model.H(), model.phases());
    let mut sim = Sim {
        model,
        rng: ChaCha8Rng::seed_from_u64(opts.seed),
        services: model.services().iter().map(Stages::new).collect(),
        vacations: model.vacations().iter().map(Stages::new).collect(),
        arrivals: map_jumps(model),
        queue: 0,
        phase: 0,
        mode: Mode::Dormant,
        guard: opts.queue_guard,
    };
    // start in a stationary arrival phase, server idle as after a vacation
    let xi = model.arrivals().stationary();
    let u: f64 = sim.rng.random();
    let mut acc = 0.0;
    sim.phase = (0..m).find(|&j| {
        acc += xi[j];
        u < acc
    }).unwrap_or(m - 1);
    sim.next_after_epoch(false, None);

    for _ in 0..warm {
        sim.step(None)?;
    }
    let mut raw: Vec<Batch> = (0..opts.batches).map(|_| Batch::new(big_h - h + 1, h)).collect();
    let per = kept / opts.batches as u64;
    for (b, batch) in raw.iter_mut().enumerate() {
        let len = if b + 1 == opts.batches { kept - per * (opts.batches as u64 - 1) } else { per };
        for _ in 0..len {
            sim.step(Some(batch))?;
        }
    }
    Ok(SimEstimates::from_batches(raw, m, model.arrivals().rate(), vec![opts.seed], opts.warmup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::mm1;

    #[test]
    fn stage_tables() {
        let s = Stages::new(&PhaseType::erlang(3, 2.0).unwrap());
        assert_eq!(s.jumps[0].to, vec![Some(1), None]);
        assert_eq!(s.jumps[2].to, vec![None]);
        assert!((s.jumps[2].total - 2.0).abs() < 1e-15);
        assert!(!s.atom);
    }

    #[test]
    fn too_few_events_rejected() {
        let model = mm1(1.0, 2.0, 1.0, Policy::Mv).unwrap();
        let opts = SimOptions { events: 10, ..SimOptions::default() };
        assert!(simulate(&model, &opts).is_err());
    }
}
