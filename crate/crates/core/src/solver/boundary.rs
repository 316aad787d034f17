//! The `mH` boundary unknowns `xi+(n)`, `n < H`.
//!
//! Row `j` of `Psi+(z) = Num(z) adj(W(z)) / det W(z)` is analytic in the closed
//! disk, so `N_j(z) = (Num(z) adj W(z))_j` vanishes at each closed-disk root of
//! `det W` other than `z = 1` (to the root's multiplicity). Together with the
//! normalization this gives a square linear system in the unknowns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::characteristic::{describe, numerator_basis, w_matrix, CharacteristicRoots, RootInfo};
use super::kernels::KernelSet;
use super::termination::TerminationMap;
use crate::error::{Error, Result};
use crate::linalg::{adjugate, RRow, ONE, ZERO};

/// Nodes on the Cauchy circles used for derivatives.
const CAUCHY_NODES: usize = 32;

#[derive(Debug, Clone)]
pub struct BoundaryUnknowns {
    /// `xi+(n)` for `n < H`.
    pub xi_plus: Vec<RRow>,
    /// Condition number of the (row-scaled) real system.
    pub condition: f64,
    /// Relative residual of the least-squares solve.
    pub residual: f64,
    /// Largest difference against the solve with another component, if any.
    pub component_diff: Option<f64>,
    /// Entries in `[-1e-10, 0)` that were set to zero.
    pub clamped: usize,
}

/// `(K_u(z) adj W(z))` for every unknown block `u < H`.
fn condition_blocks(ks: &KernelSet, tm: &TerminationMap, z: Complex64) -> Result<Vec<DMatrix<Complex64>>> {
    let kv = ks.values(z)?;
    let adj = adjugate(&w_matrix(&kv, ks.big_h));
    Ok(numerator_basis(ks, tm, &kv).into_iter().map(|k| k * &adj).collect())
}

/// Row of coefficients (one per unknown) of `N_j` at `z`.
fn row_at(ks: &KernelSet, tm: &TerminationMap, z: Complex64, j: usize) -> Result<Vec<Complex64>> {
    let blocks = condition_blocks(ks, tm, z)?;
    let m = ks.m;
    let mut row = vec![ZERO; ks.big_h * m];
    for (n, b) in blocks.iter().enumerate() {
        for i in 0..m {
            row[n * m + i] = b[(i, j)];
        }
    }
    Ok(row)
}

/// Taylor coefficients `0..count` at `center` of a vector-valued function,
/// by the trapezoid rule on a circle of radius `r`.
fn taylor<F>(f: F, center: Complex64, r: f64, count: usize) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>>,
{
    let mut out: Vec<Vec<Complex64>> = Vec::new();
    for q in 0..CAUCHY_NODES {
        let u = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * q as f64 / CAUCHY_NODES as f64);
        let v = f(center + u * r)?;
        if out.is_empty() {
            out = vec![vec![ZERO; v.len()]; count];
        }
        for (k, acc) in out.iter_mut().enumerate() {
            let w = u.powi(-(k as i32)) / (CAUCHY_NODES as f64 * r.powi(k as i32));
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += x * w;
            }
        }
    }
    Ok(out)
}

fn spacing(roots: &[Complex64], z: Complex64) -> f64 {
    roots.iter().filter(|&&p| (p - z).norm() > 1e-9).map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min)
}

/// Solves the boundary system using component `j` of the numerator.
pub fn solve_with_component(ks: &KernelSet, tm: &TerminationMap, roots: &CharacteristicRoots, j: usize) -> Result<(Vec<f64>, f64, f64)> {
    let (h, big_h, m) = (ks.h, ks.big_h, ks.m);
    let nu = big_h * m;
    let mut all: Vec<Complex64> = roots.inside.iter().map(RootInfo::z).collect();
    all.push(ONE);
    let mut rows: Vec<(Vec<Complex64>, f64)> = Vec::new();
    for r in &roots.inside {
        let p = r.z();
        if r.multiplicity == 1 {
            rows.push((row_at(ks, tm, p, j)?, 0.0));
        } else {
            let rad = 0.3 * spacing(&all, p).min(0.1);
            for t in taylor(|z| row_at(ks, tm, z, j), p, rad, r.multiplicity)? {
                rows.push((t, 0.0));
            }
        }
    }
    // normalization: Psi+(1) e + O+(1) e = 1, Psi+(1)_i = N_i'(1) / (det W)'(1)
    let rad = (0.3 * spacing(&all, ONE)).min(1e-3);
    let det_w = |z: Complex64| -> Result<Vec<Complex64>> {
        let kv = ks.values(z)?;
        Ok(vec![w_matrix(&kv, big_h).determinant()])
    };
    let dw = taylor(det_w, ONE, rad, 2)?[1][0];
    let all_components = |z: Complex64| -> Result<Vec<Complex64>> {
        let blocks = condition_blocks(ks, tm, z)?;
        let mut row = vec![ZERO; nu];
        for (n, b) in blocks.iter().enumerate() {
            for i in 0..m {
                row[n * m + i] = b.row(i).iter().sum();
            }
        }
        Ok(row)
    };
    let dn = taylor(all_components, ONE, rad, 2)?.swap_remove(1);
    let mut norm_row: Vec<Complex64> = dn.iter().map(|v| v / dw).collect();
    for i in 0..h {
        for k in i..h {
            let s = tm.source_matrix(i, k);
            for a in 0..m {
                norm_row[i * m + a] += s.row(a).sum();
            }
        }
    }
    rows.push((norm_row, 1.0));

    // real least squares; every row scaled to unit length
    let nr = rows.len();
    let mut a = DMatrix::<f64>::zeros(2 * nr, nu);
    let mut b = DVector::<f64>::zeros(2 * nr);
    for (k, (row, rhs)) in rows.iter().enumerate() {
        let s = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let s = if s > 0.0 { s } else { 1.0 };
        for u in 0..nu {
            a[(2 * k, u)] = row[u].re / s;
            a[(2 * k + 1, u)] = row[u].im / s;
        }
        b[2 * k] = rhs / s;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < 1e12) {
        return Err(Error::IllConditioned { condition, roots: describe(&roots.inside) });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::Solver(e.to_string()))?;
    let residual = (&a * &x - &b).norm() / b.norm();
    Ok((x.iter().copied().collect(), condition, residual))
}

/// Solves with component 0 and, when `m >= 2`, checks against component 1.
pub fn solve_boundary(ks: &KernelSet, tm: &TerminationMap, roots: &CharacteristicRoots, tol: f64) -> Result<BoundaryUnknowns> {
    let m = ks.m;
    let (x, condition, residual) = solve_with_component(ks, tm, roots, 0)?;
    let mut component_diff = None;
    if m >= 2 {
        let (y, _, _) = solve_with_component(ks, tm, roots, 1)?;
        let diff = x.iter().zip(&y).fold(0.0_f64, |d, (a, b)| d.max((a - b).abs()));
        if diff > tol {
            return Err(Error::ComponentMismatch { a: 1, b: 2, diff });
        }
        component_diff = Some(diff);
    }
    let mut clamped = 0;
    let mut xi_plus = Vec::with_capacity(ks.big_h);
    for n in 0..ks.big_h {
        let mut row = RRow::zeros(m);
        for i in 0..m {
            let v = x[n * m + i];
            row[i] = if v < 0.0 {
                if v < -1e-10 {
                    return Err(Error::Negative { table: "boundary xi+(n), n < H", value: v });
                }
                clamped += 1;
                0.0
            } else {
                v
            };
        }
        xi_plus.push(row);
    }
    if clamped > 0 {
        log::warn!("{clamped} boundary entries in [-1e-10, 0) set to zero");
    }
    Ok(BoundaryUnknowns { xi_plus, condition, residual, component_diff, clamped })
}
