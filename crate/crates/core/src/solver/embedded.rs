//! Joint distributions at service-completion and vacation-termination epochs.
//!
//! For `r < H`, `xi+(n, r) = s_r A^(r)_n` with
//! `s_h = x(h) + (1-eps) sum_{k<h} gamma+(k) D̃^{h-k}` and `s_r = x(r)` otherwise.
//! The `r = H` column has generating function
//! `L(z) = Psi+(z) - sum_{r<H} s_r A^(r)(z)`, which is expanded in partial
//! fractions over its poles outside the unit disk.

use num_complex::Complex64;
use serde::Serialize;

use super::characteristic::{numerator_direct, w_matrix, CharacteristicRoots, RootInfo};
use super::kernels::KernelSet;
use super::termination::{gamma_joint, TerminationMap};
use super::NOISE;
use crate::error::{Error, Result};
use crate::linalg::{row_complexify, CRow, RRow, ONE};
use crate::poly::expand;

#[derive(Debug, Clone)]
pub struct EmbeddedDistributions {
    pub h: usize,
    pub big_h: usize,
    /// Tables run over `n = 0..=n_trunc`; arrays are kept to `n_trunc + H`.
    pub n_trunc: usize,
    /// `xi_plus[r - h][n]`
    pub xi_plus: Vec<Vec<RRow>>,
    /// `gamma_plus[k][n]`, zero for `n < k`
    pub gamma_plus: Vec<Vec<RRow>>,
    /// Vacation sources `src_k = xi+(k) + eps gamma+(k)`.
    pub sources: Vec<RRow>,
    /// Coefficients of `s_r` for `h <= r < H`.
    pub service_starts: Vec<RRow>,
    pub stats: EmbeddedStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddedStats {
    /// Total probability over the stored arrays.
    pub total: f64,
    /// Mass of the expansion beyond `n_trunc`.
    pub tail_bound: f64,
    pub dominant_pole: f64,
    pub dominant_order: usize,
    pub pole_count: usize,
    pub polynomial_part: bool,
    pub reconstruction_error: f64,
    pub max_imaginary: f64,
    /// `max |sum_r xi+(n, r) - xi+(n)|` over `n < H`.
    pub boundary_consistency: f64,
    pub clamped: usize,
}

impl EmbeddedDistributions {
    pub fn len(&self) -> usize {
        self.xi_plus[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `xi+(n)`: service completions leaving `n` waiting.
    pub fn xi_total(&self, n: usize) -> RRow {
        let m = self.sources[0].len();
        self.xi_plus.iter().fold(RRow::zeros(m), |a, col| a + col.get(n).cloned().unwrap_or_else(|| RRow::zeros(m)))
    }

    /// `gamma+(n)`.
    pub fn gamma_total(&self, n: usize) -> RRow {
        let m = self.sources[0].len();
        self.gamma_plus.iter().fold(RRow::zeros(m), |a, col| a + col.get(n).cloned().unwrap_or_else(|| RRow::zeros(m)))
    }

    /// `x(n) = xi+(n) + gamma+(n)`.
    pub fn x(&self, n: usize) -> RRow {
        self.xi_total(n) + self.gamma_total(n)
    }

    /// `P_n^{queue+}`.
    pub fn queue_marginal(&self, n: usize) -> f64 {
        self.x(n).sum()
    }
}

/// Relative distance within which candidate poles are the same point
/// (identical kernels give bitwise-equal poles; polished roots agree to ~1e-12).
/// Roots of `chi` that sit close to, but not on, a kernel pole are distinct
/// poles and are handled by the shared-contour residues.
const POLE_MERGE: f64 = 1e-9;

/// Poles of `L(z)`: outside roots of `chi` and the kernel poles, with
/// duplicates merged and their orders summed.
fn pole_set(ks: &KernelSet, roots: &CharacteristicRoots) -> Result<Vec<(Complex64, usize)>> {
    let mut cands: Vec<(Complex64, usize, bool)> = roots.outside.iter().map(|r| (r.z(), r.multiplicity, false)).collect();
    cands.extend(ks.poles()?.into_iter().filter(|(p, _)| p.norm() > 1.0 + 1e-8).map(|(p, q)| (p, q, true)));
    let n = cands.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (cands[i].0 - cands[j].0).norm() <= POLE_MERGE * cands[i].0.norm().max(1.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut merged: Vec<(Complex64, usize)> = Vec::new();
    for root in 0..n {
        let members: Vec<usize> = (0..n).filter(|&i| find(&mut parent, i) == root).collect();
        if members.is_empty() {
            continue;
        }
        let order: usize = members.iter().map(|&i| cands[i].1).sum();
        let exact = members.iter().find(|&&i| cands[i].2).map(|&i| cands[i].0);
        let at = exact.unwrap_or_else(|| {
            members.iter().map(|&i| cands[i].0 * cands[i].1 as f64).sum::<Complex64>() / order as f64
        });
        merged.push((at, order));
    }
    merged.sort_by(|a, b| a.0.norm().partial_cmp(&b.0.norm()).unwrap());
    Ok(merged)
}

pub struct EmbeddedInput<'a> {
    pub ks: &'a KernelSet,
    pub tm: &'a TerminationMap,
    pub roots: &'a CharacteristicRoots,
    pub xi_small: &'a [RRow],
    pub truncation: Option<usize>,
    pub tail_target: f64,
    pub cap: usize,
}

pub fn service_joint(inp: EmbeddedInput<'_>) -> Result<EmbeddedDistributions> {
    let EmbeddedInput { ks, tm, roots, xi_small, truncation, tail_target, cap } = inp;
    let (h, big_h, m) = (ks.h, ks.big_h, ks.m);
    let sources = tm.sources(xi_small);
    let small = gamma_joint(ks, &sources, big_h);
    let gamma_small: Vec<RRow> = (0..big_h).map(|n| small.iter().fold(RRow::zeros(m), |a, col| a + &col[n])).collect();
    let x_small: Vec<RRow> = (0..big_h).map(|n| &xi_small[n] + &gamma_small[n]).collect();

    let mut starts: Vec<RRow> = Vec::new();
    for r in h..big_h {
        let mut s = x_small[r].clone();
        if r == h && ks.eps < 1.0 {
            for (k, g) in gamma_small.iter().enumerate().take(h) {
                s += g * &ks.d_tilde_pow[h - k] * (1.0 - ks.eps);
            }
        }
        starts.push(s);
    }

    let lplus = |z: Complex64| -> Result<Vec<Complex64>> {
        let kv = ks.values(z)?;
        let num = numerator_direct(ks, &kv, xi_small, &gamma_small, &sources);
        let w = w_matrix(&kv, big_h);
        // row vector times W^{-1}: solve W^T y^T = num^T
        let y = w.transpose().lu().solve(&num.transpose()).ok_or(Error::SingularKernel { z })?;
        let mut l: CRow = y.transpose();
        for (i, s) in starts.iter().enumerate() {
            l -= row_complexify(s) * kv.service(h, h + i);
        }
        Ok(l.iter().copied().collect())
    };

    let poles = pole_set(ks, roots)?;
    let mut avoid: Vec<Complex64> = roots.inside.iter().map(RootInfo::z).collect();
    avoid.push(ONE);
    let pfe = expand(lplus, m, &poles, &avoid, Some(0))?;

    let probes = probe_points(&avoid, &poles);
    let (rec_err, at) = pfe.reconstruction_error(lplus, &probes)?;
    if rec_err > 1e-8 {
        return Err(Error::Reconstruction { z: at, error: rec_err });
    }

    let (dominant, dominant_order) = poles.first().map(|p| (p.0.norm(), p.1)).unwrap_or((f64::INFINITY, 0));
    let coeffs = pfe.coefficients(cap + big_h + 1);
    let n_trunc = match truncation {
        Some(n) => n,
        None => auto_truncation(ks, &coeffs, dominant, tail_target, cap),
    };
    let len = n_trunc + big_h + 1;
    let tail_bound = tail_mass(&coeffs, n_trunc, dominant);

    let mut max_imaginary = 0.0_f64;
    let mut clamped = 0;
    let mut xi_plus: Vec<Vec<RRow>> = Vec::with_capacity(big_h - h + 1);
    for (i, s) in starts.iter().enumerate() {
        let r = h + i;
        xi_plus.push(
            (0..len)
                .map(|n| ks.service_coeff(r, n).map(|a| s * a).unwrap_or_else(|| RRow::zeros(m)))
                .collect(),
        );
    }
    let mut top = Vec::with_capacity(len);
    for n in 0..len {
        let row = coeffs.get(n).cloned().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); m]);
        let mut v = RRow::zeros(m);
        for i in 0..m {
            max_imaginary = max_imaginary.max(row[i].im.abs());
            v[i] = clamp(row[i].re, &mut clamped, "xi+(n, H)")?;
        }
        top.push(v);
    }
    xi_plus.push(top);
    let gamma_plus = gamma_joint(ks, &sources, len);

    let mut boundary_consistency = 0.0_f64;
    for (n, want) in xi_small.iter().enumerate() {
        let got = xi_plus.iter().fold(RRow::zeros(m), |a, col| a + &col[n]);
        boundary_consistency = boundary_consistency.max((got - want).amax());
    }
    let total = xi_plus.iter().chain(&gamma_plus).flat_map(|col| col.iter()).map(|v| v.sum()).sum();

    Ok(EmbeddedDistributions {
        h,
        big_h,
        n_trunc,
        xi_plus,
        gamma_plus,
        sources,
        service_starts: starts,
        stats: EmbeddedStats {
            total,
            tail_bound,
            dominant_pole: dominant,
            dominant_order,
            pole_count: poles.len(),
            polynomial_part: pfe.polynomial_part().iter().flatten().any(|v| v.norm() > 1e-12),
            reconstruction_error: rec_err,
            max_imaginary,
            boundary_consistency,
            clamped,
        },
    })
}

fn clamp(v: f64, clamped: &mut usize, table: &'static str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-10 {
        if v < -NOISE {
            *clamped += 1;
        }
        Ok(0.0)
    } else {
        Err(Error::Negative { table, value: v })
    }
}

/// Twenty points in the analytic region, kept away from every listed point.
fn probe_points(avoid: &[Complex64], poles: &[(Complex64, usize)]) -> Vec<Complex64> {
    let rmin = poles.first().map(|p| p.0.norm()).unwrap_or(2.0);
    let mut out = Vec::new();
    let mut k = 0u32;
    while out.len() < 20 && k < 400 {
        k += 1;
        // golden-angle spiral over radii in (0.2, 0.95 rmin)
        let t = k as f64 * 2.399_963_229_728_653;
        let rad = 0.2 + (0.95 * rmin - 0.2) * ((k % 20) as f64 + 0.5) / 20.0;
        let z = Complex64::from_polar(rad, t);
        let near = avoid.iter().chain(poles.iter().map(|p| &p.0)).any(|a| (a - z).norm() < 0.05);
        if !near {
            out.push(z);
        }
    }
    out
}

fn row_abs(row: &[Complex64]) -> f64 {
    row.iter().map(|v| v.norm()).sum()
}

/// Mass of the coefficients past `n`, with a geometric estimate beyond the stored range.
fn tail_mass(coeffs: &[Vec<Complex64>], n: usize, dominant: f64) -> f64 {
    if n + 1 >= coeffs.len() {
        return 0.0;
    }
    let stored: f64 = coeffs[n + 1..].iter().map(|r| row_abs(r)).sum();
    let rho = 1.0 / dominant;
    let last = row_abs(coeffs.last().unwrap());
    stored + if rho < 1.0 { last * rho / (1.0 - rho) } else { 0.0 }
}

fn auto_truncation(ks: &KernelSet, coeffs: &[Vec<Complex64>], dominant: f64, target: f64, cap: usize) -> usize {
    let limit = cap.min(coeffs.len() - 1);
    let rho = 1.0 / dominant;
    let mut tail = if rho < 1.0 { row_abs(coeffs.last().unwrap()) * rho / (1.0 - rho) } else { 0.0 };
    tail += coeffs[limit + 1..].iter().map(|r| row_abs(r)).sum::<f64>();
    let mut n = limit;
    while n > 0 {
        let next = tail + row_abs(&coeffs[n]);
        if next >= target {
            break;
        }
        tail = next;
        n -= 1;
    }
    let kernels = ks.max_service_len().max(ks.max_vacation_len() + ks.h);
    n.max(kernels).min(cap)
}
