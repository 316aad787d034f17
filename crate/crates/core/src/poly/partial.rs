//! Partial-fraction expansion of (vector-valued) rational functions.
//!
//! Principal parts come from Laurent coefficients on small circles around
//! each pole; the polynomial part from a circle FFT of `f` minus those parts.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{interp::taylor_on_circle, Location, Polynomial, RootSet};
use crate::error::{Error, Result};
use crate::linalg::{c, ZERO};

/// Nodes per Laurent circle.
const LAURENT_NODES: usize = 64;
/// Laurent radius as a fraction of the distance to the nearest other singularity.
const LAURENT_FRACTION: f64 = 0.3;
/// Poles closer than this fraction of their distance to anything else share a contour.
const CLUSTER_RATIO: f64 = 0.25;

/// `residue / (z - pole)^order`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleTerm {
    pub pole: Complex64,
    pub order: usize,
    pub residue: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct PartialFractionExpansion {
    width: usize,
    /// `polynomial_part[d][w]`: coefficient of `z^d` in component `w`.
    polynomial_part: Vec<Vec<Complex64>>,
    terms: Vec<PoleTerm>,
}

impl PartialFractionExpansion {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }

    pub fn polynomial_part(&self) -> &[Vec<Complex64>] {
        &self.polynomial_part
    }

    pub fn has_polynomial_part(&self) -> bool {
        !self.polynomial_part.is_empty()
    }

    pub fn eval(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = self.principal(z);
        let mut zp = c(1.0);
        for row in &self.polynomial_part {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * zp;
            }
            zp *= z;
        }
        out
    }

    fn principal(&self, z: Complex64) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.width];
        for t in &self.terms {
            let f = (z - t.pole).powi(-(t.order as i32));
            for (o, a) in out.iter_mut().zip(&t.residue) {
                *o += a * f;
            }
        }
        out
    }

    /// Power-series coefficients `f_0..f_{n-1}` about the origin.
    pub fn coefficients(&self, n: usize) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![ZERO; self.width]; n];
        for t in &self.terms {
            // a/(z-b)^k = a (-1)^k sum_n C(n+k-1, k-1) b^{-(n+k)} z^n
            let k = t.order;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let inv = t.pole.inv();
            let mut w = inv.powi(k as i32) * sign;
            for (j, row) in out.iter_mut().enumerate() {
                if j > 0 {
                    w *= inv * ((j + k - 1) as f64 / j as f64);
                }
                for (o, a) in row.iter_mut().zip(&t.residue) {
                    *o += a * w;
                }
            }
        }
        for (d, row) in self.polynomial_part.iter().enumerate() {
            if d < n {
                for (o, a) in out[d].iter_mut().zip(row) {
                    *o += a;
                }
            }
        }
        out
    }

    /// Largest probe mismatch relative to the largest probe value of `f`.
    /// A pointwise ratio would blow up wherever `f` happens to be small.
    pub fn reconstruction_error<F>(&self, f: F, probes: &[Complex64]) -> Result<(f64, Complex64)>
    where
        F: Fn(Complex64) -> Result<Vec<Complex64>>,
    {
        let mut worst = (0.0, ZERO);
        let mut scale = 0.0_f64;
        for &z in probes {
            let want = f(z)?;
            let got = self.eval(z);
            scale = want.iter().fold(scale, |m, v| m.max(v.norm()));
            let err = want.iter().zip(&got).fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
            if err > worst.0 {
                worst = (err, z);
            }
        }
        Ok((worst.0 / scale.max(1e-300), worst.1))
    }
}

/// Groups poles that are close compared with everything else, so that their
/// (typically large and cancelling) residues come from one shared contour.
pub(crate) fn pole_clusters(poles: &[(Complex64, usize)], avoid: &[Complex64]) -> Vec<Vec<usize>> {
    let n = poles.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let gap = (poles[i].0 - poles[j].0).norm();
            let others = poles
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i && k != j)
                .map(|(_, p)| p.0)
                .chain(avoid.iter().copied())
                .map(|q| (q - poles[i].0).norm().min((q - poles[j].0).norm()))
                .fold(f64::INFINITY, f64::min);
            if gap <= CLUSTER_RATIO * others {
                let (a, b) = (label[i], label[j]);
                for l in label.iter_mut() {
                    if *l == b {
                        *l = a;
                    }
                }
            }
        }
    }
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i] == i {
            out.push((0..n).filter(|&k| label[k] == i).collect());
        }
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Principal parts of one cluster. The moments
/// `mu_k = (1/2 pi i) \oint f(z) (z - c)^k dz` over a circle around the cluster
/// centre `c` satisfy `mu_k = sum a_{w,i} C(k, i-1) (p_w - c)^{k-i+1}`, a small
/// confluent Vandermonde system in the residues.
fn cluster_terms<F>(
    f: &F,
    width: usize,
    poles: &[(Complex64, usize)],
    avoid: &[Complex64],
    members: &[usize],
) -> Result<Vec<PoleTerm>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>>,
{
    let centre = members.iter().map(|&i| poles[i].0).sum::<Complex64>() / members.len() as f64;
    let spread = members.iter().map(|&i| (poles[i].0 - centre).norm()).fold(0.0, f64::max);
    let d = poles
        .iter()
        .enumerate()
        .filter(|(k, _)| !members.contains(k))
        .map(|(_, p)| p.0)
        .chain(avoid.iter().copied())
        .map(|q| (q - centre).norm())
        .fold(f64::INFINITY, f64::min);
    let d = if d.is_finite() { d } else { centre.norm().max(1.0) };
    let r = if members.len() == 1 { LAURENT_FRACTION * d } else { (3.0 * spread).max(LAURENT_FRACTION * d).min(0.6 * d) };
    let size: usize = members.iter().map(|&i| poles[i].1).sum();
    let nodes: Vec<Complex64> = (0..LAURENT_NODES)
        .map(|j| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / LAURENT_NODES as f64))
        .collect();
    let vals = nodes.iter().map(|&u| f(centre + u)).collect::<Result<Vec<_>>>()?;
    // moments scaled by r^{-(k+1)} to keep the system balanced
    let mut mu = DMatrix::<Complex64>::zeros(size, width);
    for k in 0..size {
        for (u, v) in nodes.iter().zip(&vals) {
            let w = (u / r).powi(k as i32 + 1) / LAURENT_NODES as f64;
            for (o, x) in v.iter().enumerate() {
                mu[(k, o)] += x * w;
            }
        }
    }
    let mut sys = DMatrix::<Complex64>::zeros(size, size);
    let mut cols = Vec::with_capacity(size);
    for &w in members {
        let (p, order) = poles[w];
        let delta = (p - centre) / r;
        for i in 1..=order {
            let col = cols.len();
            for k in (i - 1)..size {
                sys[(k, col)] = delta.powi((k + 1 - i) as i32) * binom(k, i - 1);
            }
            cols.push((p, i));
        }
    }
    let a = sys.lu().solve(&mu).ok_or_else(|| Error::Solver("singular pole-cluster system".into()))?;
    Ok(cols
        .into_iter()
        .enumerate()
        .map(|(j, (pole, order))| PoleTerm {
            pole,
            order,
            // undo the r scaling: a / (z-p)^i with (z-p) measured in units of r
            residue: a.row(j).iter().map(|v| v * r.powi(order as i32)).collect(),
        })
        .collect())
}

/// Expands `f` given its poles (with order bounds) and a polynomial-part
/// degree bound. `avoid` lists further points where `f` must not be sampled
/// (cancelled zeros of a denominator, for example).
pub fn expand<F>(
    f: F,
    width: usize,
    poles: &[(Complex64, usize)],
    avoid: &[Complex64],
    poly_degree: Option<usize>,
) -> Result<PartialFractionExpansion>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>>,
{
    let mut terms = Vec::new();
    for members in pole_clusters(poles, avoid) {
        terms.extend(cluster_terms(&f, width, poles, avoid, &members)?);
    }
    let mut pfe = PartialFractionExpansion { width, polynomial_part: Vec::new(), terms };
    if let Some(deg) = poly_degree {
        // f minus principal parts is a polynomial; read it off a circle that
        // keeps clear of every listed point
        let rmin = poles.iter().map(|p| p.0.norm()).fold(f64::INFINITY, f64::min);
        let rmax = if rmin.is_finite() { 0.8 * rmin } else { 1.0 };
        let mut best = (0.5 * rmax, -1.0);
        for s in 1..=16 {
            let rho = rmax * s as f64 / 16.0;
            let gap = avoid
                .iter()
                .chain(poles.iter().map(|p| &p.0))
                .map(|a| (a.norm() - rho).abs())
                .fold(f64::INFINITY, f64::min);
            if gap > best.1 {
                best = (rho, gap);
            }
        }
        let k = (deg + 1).next_power_of_two().max(32);
        let base = &pfe;
        let coeffs = taylor_on_circle(
            |z| {
                let mut v = f(z)?;
                for (o, p) in v.iter_mut().zip(base.principal(z)) {
                    *o -= p;
                }
                Ok(v)
            },
            k,
            best.0,
            width,
        )?;
        pfe.polynomial_part = coeffs.into_iter().take(deg + 1).collect();
    }
    Ok(pfe)
}

/// Partial fractions of `num / den` over the Outside roots of `den`.
///
/// Roots of `den` in the closed unit disk must be cancelled by `num`; the
/// relative remainder is checked against `1e-6`.
pub fn partial_fractions(num: &Polynomial, den: &Polynomial, poles: &RootSet) -> Result<PartialFractionExpansion> {
    for r in poles.roots().iter().filter(|r| r.location != Location::Outside) {
        let t = num.taylor_at(r.value);
        let scale = num.scale_at(r.value).max(1e-300);
        for tj in t.iter().take(r.multiplicity) {
            let rel = tj.norm() / scale;
            if rel > 1e-6 {
                return Err(Error::NotDivisible { root: r.value, remainder: rel });
            }
        }
    }
    let outside: Vec<(Complex64, usize)> = poles.outside().map(|r| (r.value, r.multiplicity)).collect();
    let avoid: Vec<Complex64> = poles.closed_disk().map(|r| r.value).collect();
    let f = |z: Complex64| Ok(vec![num.eval(z) / den.eval(z)]);
    let mut pfe = expand(f, 1, &outside, &avoid, None)?;
    if num.degree() >= den.degree() {
        let (q, _) = num.div_rem(den);
        pfe.polynomial_part = q.coeffs().iter().map(|&v| vec![v]).collect();
    }
    Ok(pfe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::find_roots;

    #[test]
    fn simple_pole_geometric_coefficients() {
        let num = Polynomial::from_real(&[1.0]);
        let den = Polynomial::from_real(&[-2.0, 1.0]);
        let pfe = partial_fractions(&num, &den, &find_roots(&den)).unwrap();
        assert_eq!(pfe.terms().len(), 1);
        assert!(!pfe.has_polynomial_part());
        for (n, row) in pfe.coefficients(12).iter().enumerate() {
            let want = -0.5 * 0.5f64.powi(n as i32);
            assert!((row[0] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn inside_factor_cancels() {
        let num = Polynomial::from_real(&[-0.5, 1.0]);
        let den = Polynomial::from_roots(&[c(0.5), c(3.0)], c(1.0));
        let pfe = partial_fractions(&num, &den, &find_roots(&den)).unwrap();
        assert_eq!(pfe.terms().len(), 1);
        assert!((pfe.terms()[0].pole - 3.0).norm() < 1e-10);
        assert!((pfe.terms()[0].residue[0] - 1.0).norm() < 1e-10);
    }

    #[test]
    fn not_divisible_reported() {
        let num = Polynomial::from_real(&[1.0]);
        let den = Polynomial::from_roots(&[c(0.5), c(3.0)], c(1.0));
        assert!(matches!(partial_fractions(&num, &den, &find_roots(&den)), Err(Error::NotDivisible { .. })));
    }

    #[test]
    fn double_pole_and_polynomial_part() {
        // (z^3 + 1) / (z - 2)^2 = z + 4 + (12 z - 15)/(z-2)^2 = z + 4 + 12/(z-2) + 9/(z-2)^2
        let num = Polynomial::from_real(&[1.0, 0.0, 0.0, 1.0]);
        let den = Polynomial::from_roots(&[c(2.0), c(2.0)], c(1.0));
        let pfe = partial_fractions(&num, &den, &find_roots(&den)).unwrap();
        assert!(pfe.has_polynomial_part());
        let a1 = pfe.terms().iter().find(|t| t.order == 1).unwrap().residue[0];
        let a2 = pfe.terms().iter().find(|t| t.order == 2).unwrap().residue[0];
        assert!((a1 - 12.0).norm() < 1e-8, "{a1}");
        assert!((a2 - 9.0).norm() < 1e-8, "{a2}");
        let probes = [c(0.3), Complex64::new(-1.0, 0.7), c(5.0)];
        let (err, _) = pfe.reconstruction_error(|z| Ok(vec![num.eval(z) / den.eval(z)]), &probes).unwrap();
        assert!(err < 1e-8);
    }

    #[test]
    fn expand_finds_constant_part() {
        let f = |z: Complex64| Ok(vec![c(2.0) + c(1.0) / (z - 4.0), c(3.0) / (z - 4.0)]);
        let pfe = expand(f, 2, &[(c(4.0), 1)], &[], Some(0)).unwrap();
        assert!((pfe.polynomial_part()[0][0] - 2.0).norm() < 1e-12);
        assert!(pfe.polynomial_part()[0][1].norm() < 1e-12);
        let co = pfe.coefficients(3);
        assert!((co[0][0] - (2.0 - 0.25)).norm() < 1e-12);
        assert!((co[2][1] + 3.0 / 64.0).norm() < 1e-12);
    }
}
