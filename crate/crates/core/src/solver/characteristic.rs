//! The characteristic determinant and the numerator of `Psi+(z)`.
//!
//! `Psi+(z) (z^H I - A^(H)(z)) = Num(z)` with
//!
//! ```text
//! Num(z) = sum_{n<h} [ src_n (B^(n)(z) - I) A^(H)(z) z^n
//!                      + (1-eps) gamma+(n) (D̃^{h-n} A^(h)(z) z^H - A^(H)(z) z^n) ]
//!        + sum_{n=h}^{H-1} x(n) (A^(n)(z) z^H - A^(H)(z) z^n),   x(n) = xi+(n) + gamma+(n).
//! ```
//!
//! Roots are taken from `chi(z) = d_H(z) det(z^H I - A^(H)(z))`, which is a
//! polynomial of degree `m (H + n_H)`; `d_H` clears the poles of `A^(H)`.

use num_complex::Complex64;
use serde::Serialize;

use super::kernels::{KernelSet, KernelValues};
use super::termination::TerminationMap;
use crate::error::{Error, Result};
use crate::linalg::{c, complexify, row_complexify, CMat, CRow, RRow, ONE};
use crate::poly::{find_roots, pole_clusters, poly_from_circle, roots_from_values, Location, Polynomial, Root, RootSet, NODE_RADIUS};

/// `z^H I - A^(H)(z)`.
pub fn w_matrix(kv: &KernelValues, big_h: usize) -> CMat {
    let m = kv.top().nrows();
    CMat::identity(m, m) * kv.z.powu(big_h as u32) - kv.top()
}

/// Coefficient matrices of each kind of boundary term at one `z`.
struct Terms {
    /// coefficient of `src_n`, `n < h`
    src: Vec<CMat>,
    /// coefficient of `gamma+(n)`, `n < H`
    gamma: Vec<CMat>,
    /// coefficient of `xi+(n)` itself, `h <= n < H`
    xi: Vec<CMat>,
}

fn terms(ks: &KernelSet, kv: &KernelValues) -> Terms {
    let (h, big_h, m) = (ks.h, ks.big_h, ks.m);
    let z = kv.z;
    let eye = CMat::identity(m, m);
    let top = kv.top();
    let zh = z.powu(big_h as u32);
    let src = (0..h).map(|n| (&kv.vacation[n] - &eye) * top * z.powu(n as u32)).collect();
    let mut gamma = Vec::with_capacity(big_h);
    let mut xi = Vec::with_capacity(big_h);
    for n in 0..big_h {
        let zn = z.powu(n as u32);
        if n < h {
            let t = if ks.eps < 1.0 {
                (complexify(&ks.d_tilde_pow[h - n]) * kv.service(h, h) * zh - top * zn) * c(1.0 - ks.eps)
            } else {
                CMat::zeros(m, m)
            };
            gamma.push(t);
            xi.push(CMat::zeros(m, m));
        } else {
            let t = kv.service(h, n) * zh - top * zn;
            gamma.push(t.clone());
            xi.push(t);
        }
    }
    Terms { src, gamma, xi }
}

/// `Num(z)` from explicit `xi+(n)`, `gamma+(n)` (`n < H`) and sources `src_k`.
pub fn numerator_direct(ks: &KernelSet, kv: &KernelValues, xi: &[RRow], gamma: &[RRow], src: &[RRow]) -> CRow {
    let t = terms(ks, kv);
    let mut out = CRow::zeros(ks.m);
    for (n, s) in src.iter().enumerate() {
        out += row_complexify(s) * &t.src[n];
    }
    for n in 0..ks.big_h {
        out += row_complexify(&gamma[n]) * &t.gamma[n];
        if n >= ks.h {
            out += row_complexify(&xi[n]) * &t.xi[n];
        }
    }
    out
}

/// `K_j(z)` with `Num(z) = sum_{j<H} xi+(j) K_j(z)` once the vacation map is
/// substituted.
pub fn numerator_basis(ks: &KernelSet, tm: &TerminationMap, kv: &KernelValues) -> Vec<CMat> {
    let (h, big_h) = (ks.h, ks.big_h);
    let t = terms(ks, kv);
    (0..big_h)
        .map(|j| {
            let mut k = t.xi[j].clone();
            if j < h {
                for (n, ts) in t.src.iter().enumerate().skip(j) {
                    k += complexify(tm.source_matrix(j, n)) * ts;
                }
                for (n, tg) in t.gamma.iter().enumerate() {
                    k += complexify(tm.gamma_matrix(j, n)) * tg;
                }
            }
            k
        })
        .collect()
}

/// `chi(z)`.
pub fn chi(ks: &KernelSet, z: Complex64) -> Result<Complex64> {
    let top = ks.top();
    let a = top.eval(z)?;
    let m = ks.m;
    let w = CMat::identity(m, m) * z.powu(ks.big_h as u32) - a;
    Ok(top.denominator(z) * w.determinant())
}

/// `chi'(z) / chi(z)`, exact (no interpolation).
pub fn chi_log_derivative(ks: &KernelSet, z: Complex64) -> Result<Complex64> {
    let top = ks.top();
    let (a, da) = top.eval_with_derivative(z)?;
    let m = ks.m;
    let big_h = ks.big_h;
    let w = CMat::identity(m, m) * z.powu(big_h as u32) - a;
    let dw = CMat::identity(m, m) * (z.powu(big_h as u32 - 1) * big_h as f64) - da;
    let x = w.lu().solve(&dw).ok_or(Error::SingularKernel { z })?;
    Ok(top.denominator_log_derivative(z)? + x.trace())
}

/// The full determinant `d_H(z)^m det(z^H I - A^(H)(z))`, with `d_H`
/// repeated once per row; its extra roots sit at the poles of `A^(H)`.
pub fn full_determinant(ks: &KernelSet, z: Complex64) -> Result<Complex64> {
    let top = ks.top();
    let d = top.denominator(z);
    let a = top.eval(z)?;
    let w = CMat::identity(ks.m, ks.m) * z.powu(ks.big_h as u32) - a;
    Ok(d.powu(ks.m as u32) * w.determinant())
}

/// Roots beyond this are taken to be a degree deficit.
const FAR: f64 = 1e10;

pub fn chi_degree(ks: &KernelSet) -> usize {
    ks.m * ks.big_h + ks.top().denominator_degree()
}

pub fn full_degree(ks: &KernelSet) -> usize {
    ks.m * (ks.big_h + ks.m * ks.top().distribution().phases())
}

/// Root data of the characteristic determinant.
#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicRoots {
    pub degree: usize,
    /// Closed-disk roots other than `z = 1`.
    pub inside: Vec<RootInfo>,
    pub outside: Vec<RootInfo>,
    /// Closed-disk count of the full determinant (spurious roots included).
    pub full_degree: usize,
    pub full_closed_disk: usize,
    pub unit_root_derivative: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootInfo {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    pub location: Location,
}

impl RootInfo {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    fn from_root(r: &Root) -> Self {
        RootInfo { re: r.value.re, im: r.value.im, multiplicity: r.multiplicity, location: r.location }
    }
}

pub(crate) fn describe(roots: &[RootInfo]) -> String {
    roots
        .iter()
        .map(|r| format!("{:.6}{:+.6}i (x{})", r.re, r.im, r.multiplicity))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Aberth-Ehrlich iteration on the exact `chi'/chi`, started from the
/// roots of the interpolated polynomial. Far from the interpolation circle
/// those starts can be off by more than the root spacing, and plain Newton
/// then converges to a neighbour; the Aberth correction keeps the estimates
/// apart.
/// Returns each root with the relative size of its last step.
fn aberth(ks: &KernelSet, init: &[Complex64]) -> Vec<(Complex64, f64)> {
    let mut z = init.to_vec();
    let n = z.len();
    let mut last = vec![f64::INFINITY; n];
    for _ in 0..500 {
        let mut moved = 0.0_f64;
        for i in 0..n {
            if z[i].norm() > FAR {
                continue;
            }
            let ld = match chi_log_derivative(ks, z[i]) {
                Ok(v) if v.is_finite() => v,
                Ok(_) => continue,
                // singular W with a finite kernel: already on a root
                Err(_) if ks.top().eval(z[i]).is_ok() => {
                    last[i] = 0.0;
                    continue;
                }
                // a kernel pole: nudge and retry next sweep
                Err(_) => {
                    z[i] *= 1.0 + 1e-7;
                    moved = f64::INFINITY;
                    continue;
                }
            };
            let w = ld.inv();
            let repel: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = w / (ONE - w * repel);
            if step.is_finite() {
                z[i] -= step;
                last[i] = step.norm() / z[i].norm().max(1.0);
                moved = moved.max(last[i]);
            }
        }
        if moved <= 1e-15 {
            break;
        }
    }
    z.into_iter().zip(last).collect()
}

/// Close roots from the interpolated polynomial can be off by far more than
/// their separation, and Newton wanders between them. Each cluster is
/// recomputed from the power sums `(1/2 pi i) oint (z-c)^p chi'/chi dz`.
fn refine_clusters(ks: &KernelSet, roots: Vec<Root>) -> Result<Vec<Root>> {
    const NODES: usize = 64;
    let pts: Vec<(Complex64, usize)> = roots.iter().map(|r| (r.value, r.multiplicity)).collect();
    let mut out = Vec::with_capacity(roots.len());
    for members in pole_clusters(&pts, &[]) {
        let k: usize = members.iter().map(|&i| pts[i].1).sum();
        if members.len() < 2 {
            out.extend(members.iter().map(|&i| roots[i]));
            continue;
        }
        let centre = members.iter().map(|&i| pts[i].0).sum::<Complex64>() / members.len() as f64;
        let spread = members.iter().map(|&i| (pts[i].0 - centre).norm()).fold(0.0, f64::max);
        let d = (0..pts.len())
            .filter(|i| !members.contains(i))
            .map(|i| (pts[i].0 - centre).norm())
            .fold(f64::INFINITY, f64::min);
        let d = if d.is_finite() { d } else { 4.0 * spread.max(1e-3) };
        let r = (3.0 * spread).max(0.3 * d).min(0.6 * d);
        // s[p] = sum over the cluster of (z_i - c)^p, scaled by r^-p
        let mut s = vec![Complex64::new(0.0, 0.0); k + 1];
        for j in 0..NODES {
            let u = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / NODES as f64);
            let g = chi_log_derivative(ks, centre + u * r)? * r;
            let mut w = u;
            for sp in s.iter_mut() {
                *sp += g * w / NODES as f64;
                w *= u;
            }
        }
        if (s[0] - c(k as f64)).norm() > 1e-3 {
            log::debug!("root cluster near {centre:.6} not isolated (count {:.3})", s[0]);
            out.extend(members.iter().map(|&i| roots[i]));
            continue;
        }
        // Newton's identities: elementary symmetric functions from power sums
        let mut e = vec![c(1.0); k + 1];
        for j in 1..=k {
            let mut acc = c(0.0);
            for i in 1..=j {
                let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
                acc += e[j - i] * s[i] * sign;
            }
            e[j] = acc / j as f64;
        }
        let coeffs: Vec<Complex64> =
            (0..=k).map(|i| if (k - i) % 2 == 0 { e[k - i] } else { -e[k - i] }).collect();
        for root in find_roots(&Polynomial::exact(coeffs)).roots() {
            let value = centre + root.value * r;
            out.push(Root { value, multiplicity: root.multiplicity, location: Location::classify(value) });
        }
    }
    Ok(out)
}

/// Interpolates `chi`, finds and polishes its roots, and checks the count
/// `mH` in the closed disk with `z = 1` simple.
pub fn characteristic_roots(ks: &KernelSet) -> Result<(CharacteristicRoots, Polynomial)> {
    let degree = chi_degree(ks);
    let poly = poly_from_circle(|z| chi(ks, z), degree, NODE_RADIUS)?;
    // a fresh probe guards against a degree bound that is too small
    let probe = Complex64::new(0.37, 0.2);
    let direct = chi(ks, probe)?;
    let rel = (poly.eval(probe) - direct).norm() / poly.scale_at(probe);
    if rel > 1e-8 {
        return Err(Error::Solver(format!("characteristic interpolation mismatch {rel:.3e} at probe")));
    }
    let raw = find_roots(&poly);
    // multiple roots enter as separate, slightly spread starts
    let mut starts = Vec::with_capacity(raw.count());
    for r in raw.roots() {
        for j in 0..r.multiplicity {
            let spread = if r.multiplicity > 1 { 1e-4 * r.value.norm().max(1.0) } else { 0.0 };
            starts.push(r.value + Complex64::from_polar(spread, std::f64::consts::TAU * j as f64 / r.multiplicity as f64));
        }
    }
    // the interpolant drops leading coefficients that are tiny next to the
    // rest, and with them the largest roots; hunt for those from far away
    let known = starts.len();
    let missing = degree.saturating_sub(known);
    let far = starts.iter().map(|z| z.norm()).fold(NODE_RADIUS, f64::max) * 4.0;
    for j in 0..missing {
        starts.push(Complex64::from_polar(far, std::f64::consts::TAU * (j as f64 + 0.3) / missing as f64));
    }
    let polished = aberth(ks, &starts);
    let kept: Vec<Complex64> = polished
        .iter()
        .enumerate()
        .filter(|(i, (z, step))| *i < known || (z.norm() < FAR && *step < 1e-10))
        .map(|(_, (z, _))| *z)
        .collect();
    let roots = roots_from_values(&kept).roots().to_vec();
    let mut roots = refine_clusters(ks, roots)?;
    roots.sort_by(|a, b| a.value.norm().partial_cmp(&b.value.norm()).unwrap());
    let set = RootSet::from_roots(roots);

    let expected = ks.m * ks.big_h;
    let found = set.closed_disk_count();
    let all: Vec<RootInfo> = set.roots().iter().map(RootInfo::from_root).collect();
    if found != expected {
        return Err(Error::RootCount { expected, found, roots: describe(&all) });
    }
    let unit: Vec<&Root> = set.closed_disk().filter(|r| (r.value - ONE).norm() < 1e-6).collect();
    match unit.as_slice() {
        [r] if r.multiplicity == 1 => {}
        [r] => return Err(Error::UnitRootNotSimple(format!("multiplicity {}", r.multiplicity))),
        [] => return Err(Error::UnitRootNotSimple("z = 1 not found among the roots".into())),
        _ => return Err(Error::UnitRootNotSimple("several roots cluster at z = 1".into())),
    }
    let chi1 = chi(ks, ONE)?;
    let dchi1 = {
        // chi'(1) by a small Cauchy circle: chi(1) = 0 so the log-derivative is unusable
        let r = 1e-3;
        let k = 16;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..k {
            let u = Complex64::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / k as f64);
            acc += chi(ks, ONE + u)? / u;
        }
        acc / k as f64
    };
    if chi1.norm() > 1e-8 * poly.scale_at(ONE) || dchi1.norm() < 1e-10 * poly.scale_at(ONE) {
        return Err(Error::UnitRootNotSimple(format!("chi(1) = {chi1:.3e}, chi'(1) = {dchi1:.3e}")));
    }
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for r in set.roots() {
        match r.location {
            Location::Outside => outside.push(RootInfo::from_root(r)),
            Location::OnCircle if (r.value - ONE).norm() >= 1e-6 => {
                return Err(Error::RootOnCircle { root: r.value });
            }
            _ if (r.value - ONE).norm() < 1e-6 => {}
            _ => inside.push(RootInfo::from_root(r)),
        }
    }

    let full_deg = full_degree(ks);
    let full = poly_from_circle(|z| full_determinant(ks, z), full_deg, NODE_RADIUS)?;
    let full_closed = find_roots(&full).closed_disk_count();

    Ok((
        CharacteristicRoots {
            degree: set.count(),
            inside,
            outside,
            full_degree: full.degree(),
            full_closed_disk: full_closed,
            unit_root_derivative: dchi1.norm() / poly.scale_at(ONE),
        },
        poly,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Policy;
    use crate::presets::{example_model, mm1};

    #[test]
    fn mm1_characteristic_roots() {
        // h = H = 1, exponential: z(mu + lam - lam z) - mu has roots 1 and mu/lam
        let ks = KernelSet::new(&mm1(1.0, 2.5, 5.0, Policy::Sv).unwrap(), 4096, 1e-13).unwrap();
        let (roots, poly) = characteristic_roots(&ks).unwrap();
        assert_eq!(poly.degree(), 2);
        assert!(roots.inside.is_empty());
        assert_eq!(roots.outside.len(), 1);
        assert!((roots.outside[0].z() - c(2.5)).norm() < 1e-12);
    }

    #[test]
    fn example_root_structure() {
        for policy in [Policy::Sv, Policy::Mv] {
            let ks = KernelSet::new(&example_model(policy), 20_000, 1e-13).unwrap();
            let (roots, poly) = characteristic_roots(&ks).unwrap();
            assert_eq!(poly.degree(), 24);
            let inside: usize = roots.inside.iter().map(|r| r.multiplicity).sum();
            assert_eq!(inside + 1, 18);
            assert_eq!(roots.full_closed_disk, 18);
            assert!(roots.full_degree <= 30);
            let nearest = roots.outside.iter().map(|r| r.z().norm()).fold(f64::INFINITY, f64::min);
            assert!((nearest - 2.1196).abs() < 1e-3, "{nearest}");
        }
    }

    #[test]
    fn log_derivative_matches_difference() {
        let ks = KernelSet::new(&example_model(Policy::Sv), 20_000, 1e-13).unwrap();
        let z = Complex64::new(0.4, -0.1);
        let h = 1e-6;
        let fd = (chi(&ks, z + h).unwrap() - chi(&ks, z - h).unwrap()) / (2.0 * h) / chi(&ks, z).unwrap();
        let ld = chi_log_derivative(&ks, z).unwrap();
        assert!((fd - ld).norm() < 1e-6 * ld.norm());
    }
}
