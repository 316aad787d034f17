//! Arbitrary-epoch probabilities from the embedded ones.
//!
//! `E` is the mean time between embedded epochs (dormancy included). The
//! supplementary-variable balance equations give, with `K = (-C)^{-1}`,
//!
//! ```text
//! R(n)     = (1-eps) sum_{j<=n} gamma+(j) D̃^{n-j} K / E,                 n < h
//! xi(n, r) = (xi(n-1, r) D + (start_r [n = 0] - xi+(n, r)) / E) K
//! gamma(n, k) = (gamma(n-1, k) D + (src_k [n = k] - gamma+(n, k)) / E) K
//! ```
//!
//! where a size-`r` batch starts with `x(r)` waiting for `h < r < H`, with
//! `x(n + H)` waiting for `r = H`, and the size-`h` batch also collects the
//! dormancy exits `(1-eps) R(h-1) D E`.

use serde::Serialize;

use super::embedded::EmbeddedDistributions;
use super::kernels::KernelSet;
use super::NOISE;
use crate::error::{Error, Result};
use crate::linalg::{RMat, RRow};
use crate::model::QueueModel;

#[derive(Debug, Clone)]
pub struct ArbitraryEpoch {
    pub h: usize,
    pub big_h: usize,
    /// `R(n)`, `n < h` (zero under MV).
    pub dormant: Vec<RRow>,
    /// `xi[r - h][n]`, `n <= n_trunc`
    pub xi: Vec<Vec<RRow>>,
    /// `gamma[k][n]`, `n <= n_trunc`
    pub gamma: Vec<Vec<RRow>>,
    pub stats: EpochStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    /// Mean time between embedded epochs, dormancy excluded.
    pub w_hat: f64,
    /// Mean dormancy time per embedded epoch.
    pub t_dormant: f64,
    /// `E = w_hat + t_dormant`.
    pub cycle: f64,
    /// Embedded-epoch rate `(1 - (1-eps) P_dor) / w_hat`; equals `1 / E`.
    pub sigma: f64,
    pub total: f64,
    pub clamped: usize,
}

fn clamp(v: &mut RRow, clamped: &mut usize, table: &'static str) -> Result<()> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            if *x < -1e-10 {
                return Err(Error::Negative { table, value: *x });
            }
            if *x < -NOISE {
                *clamped += 1;
            }
            *x = 0.0;
        }
    }
    Ok(())
}

pub fn arbitrary_epoch(model: &QueueModel, ks: &KernelSet, emb: &EmbeddedDistributions) -> Result<ArbitraryEpoch> {
    let (h, big_h, m) = (ks.h, ks.big_h, ks.m);
    let eps = ks.eps;
    let n_trunc = emb.n_trunc;
    let e = |v: &RRow| v.sum();
    let k_mat = &ks.neg_c_inv;
    let x: Vec<RRow> = (0..emb.len()).map(|n| emb.x(n)).collect();
    let gamma_tot: Vec<RRow> = (0..h).map(|n| emb.gamma_total(n)).collect();
    let s_mean = |r: usize| model.service(r).mean();
    let v_mean = |k: usize| model.vacation(k).mean();

    let head: f64 = x.iter().take(big_h + 1).map(e).sum();
    let mut w_hat = (1.0 - head) * s_mean(big_h);
    for (r, xr) in x.iter().enumerate().take(big_h + 1).skip(h) {
        w_hat += e(xr) * s_mean(r);
    }
    for n in 0..h {
        let xi_n = e(&emb.xi_total(n));
        let g = e(&gamma_tot[n]);
        w_hat += xi_n * v_mean(n) + (1.0 - eps) * g * s_mean(h) + eps * g * v_mean(n);
    }

    // unnormalized dormancy vectors sum_{j<=n} gamma+(j) D̃^{n-j}
    let mut dorm_raw: Vec<RRow> = Vec::with_capacity(h);
    for n in 0..h {
        let mut acc = RRow::zeros(m);
        if eps < 1.0 {
            for (j, g) in gamma_tot.iter().enumerate().take(n + 1) {
                acc += g * &ks.d_tilde_pow[n - j];
            }
            acc *= 1.0 - eps;
        }
        dorm_raw.push(acc * k_mat);
    }
    let t_dormant: f64 = dorm_raw.iter().map(e).sum();
    let cycle = w_hat + t_dormant;
    if !(cycle > 0.0 && cycle.is_finite()) {
        return Err(Error::Solver(format!("mean embedded cycle {cycle} is not positive")));
    }
    let dormant: Vec<RRow> = dorm_raw.into_iter().map(|v| v / cycle).collect();

    let mut clamped = 0;
    let len = emb.len();
    let mut xi_cols = Vec::with_capacity(big_h - h + 1);
    for r in h..=big_h {
        let plus = &emb.xi_plus[r - h];
        let inflow: Vec<RRow> = (0..len)
            .map(|n| {
                let mut v = -&plus[n] / cycle;
                if r == big_h {
                    if let Some(xn) = x.get(n + big_h) {
                        v += xn / cycle;
                    }
                } else if n == 0 {
                    v += &x[r] / cycle;
                }
                if r == h && n == 0 && eps < 1.0 {
                    v += &dormant[h - 1] * &ks.d;
                }
                v
            })
            .collect();
        let col = balance_chain(ks, &inflow, 0, n_trunc, &mut clamped, "xi(n, r)")?;
        xi_cols.push(col);
    }

    let mut gamma_cols = Vec::with_capacity(h);
    for k in 0..h {
        let plus = &emb.gamma_plus[k];
        let inflow: Vec<RRow> = (0..len)
            .map(|n| match n.cmp(&k) {
                std::cmp::Ordering::Less => RRow::zeros(m),
                std::cmp::Ordering::Equal => (&emb.sources[k] - &plus[n]) / cycle,
                std::cmp::Ordering::Greater => -&plus[n] / cycle,
            })
            .collect();
        gamma_cols.push(balance_chain(ks, &inflow, k, n_trunc, &mut clamped, "gamma(n, k)")?);
    }

    let p_dor: f64 = dormant.iter().map(e).sum();
    let sigma = (1.0 - (1.0 - eps) * p_dor) / w_hat;
    let total = p_dor
        + xi_cols.iter().chain(&gamma_cols).flat_map(|c| c.iter()).map(e).sum::<f64>();

    Ok(ArbitraryEpoch {
        h,
        big_h,
        dormant,
        xi: xi_cols,
        gamma: gamma_cols,
        stats: EpochStats { w_hat, t_dormant, cycle, sigma, total, clamped },
    })
}

/// Solves `u(n) (-C) = u(n-1) D + f(n)` for `n = start..=last` (zero before
/// `start`).
///
/// With `y(n) = u(n)(-C) = sum_{j<=n} f(j) D̃^{n-j}` and `D̃^k = M^k + e pi` for
/// `k >= 1`, `M = D̃ - e pi`,
/// `y(n) = w(n-1) M + f(n) - (sum_{j>=n} f(j) e) pi` with `w(n) = w(n-1) M + f(n)`.
/// The mass term is a tail sum of small terms, so nothing cancels as `n` grows,
/// unlike the plain recursion whose terms approach each other.
fn balance_chain(
    ks: &KernelSet,
    f: &[RRow],
    start: usize,
    last: usize,
    clamped: &mut usize,
    table: &'static str,
) -> Result<Vec<RRow>> {
    let m = ks.m;
    let pi = &ks.arrival_phase;
    let dt = &ks.d_tilde_pow[1];
    let e_pi = RMat::from_fn(m, m, |_, j| pi[j]);
    let mm = dt - e_pi;
    // tails[n] = sum_{j >= n} f(j) e
    let mut tails = vec![0.0; f.len() + 1];
    for n in (0..f.len()).rev() {
        tails[n] = tails[n + 1] + f[n].sum();
    }
    let mut out = vec![RRow::zeros(m); start.min(last + 1)];
    let mut w = RRow::zeros(m);
    for n in start..=last {
        let fn_ = f.get(n).cloned().unwrap_or_else(|| RRow::zeros(m));
        let wm = &w * &mm;
        let y = &wm + &fn_ - pi * tails[n.min(f.len())];
        w = wm + fn_;
        let mut u = y * &ks.neg_c_inv;
        clamp(&mut u, clamped, table)?;
        out.push(u);
    }
    Ok(out)
}

impl ArbitraryEpoch {
    pub fn len(&self) -> usize {
        self.xi[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P_n^queue`: probability that `n` wait at an arbitrary time.
    pub fn queue_marginal(&self, n: usize) -> f64 {
        let mut p = self.dormant.get(n).map(|v| v.sum()).unwrap_or(0.0);
        p += self.xi.iter().map(|c| c[n].sum()).sum::<f64>();
        p += self.gamma.iter().map(|c| c[n].sum()).sum::<f64>();
        p
    }
}
