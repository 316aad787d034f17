use num_complex::Complex64;
use serde::Serialize;

use super::Polynomial;
use crate::linalg::{CMat, ONE, ZERO};

/// Roots closer than this are merged into one multiple root.
pub const CLUSTER_TOL: f64 = 1e-6;
/// `||z| - 1|` below this counts as on the unit circle.
pub const CIRCLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Location {
    Inside,
    OnCircle,
    Outside,
}

impl Location {
    pub fn classify(z: Complex64) -> Location {
        let d = z.norm() - 1.0;
        if d.abs() <= CIRCLE_TOL {
            Location::OnCircle
        } else if d < 0.0 {
            Location::Inside
        } else {
            Location::Outside
        }
    }

    pub fn in_closed_disk(self) -> bool {
        self != Location::Outside
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
    pub location: Location,
}

#[derive(Debug, Clone, Default)]
pub struct RootSet {
    roots: Vec<Root>,
}

impl RootSet {
    pub fn from_roots(roots: Vec<Root>) -> Self {
        RootSet { roots }
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    /// Sum of multiplicities.
    pub fn count(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn closed_disk(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.location.in_closed_disk())
    }

    pub fn outside(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.location == Location::Outside)
    }

    pub fn closed_disk_count(&self) -> usize {
        self.closed_disk().map(|r| r.multiplicity).sum()
    }
}

/// All roots of `p` from the eigenvalues of its companion matrix, one Newton
/// step each, then clustering and unit-circle classification.
pub fn find_roots(p: &Polynomial) -> RootSet {
    let n = p.degree();
    if n == 0 {
        return RootSet::default();
    }
    let c = p.coeffs();
    let lead = p.leading();
    let mut comp = CMat::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    let raw: Vec<Complex64> = match comp.eigenvalues() {
        Some(ev) => ev.iter().copied().collect(),
        None => Vec::new(),
    };
    let mut polished: Vec<Complex64> = raw.into_iter().map(|z| newton_step(p, z)).collect();
    polished.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap().then(a.arg().partial_cmp(&b.arg()).unwrap()));
    RootSet { roots: cluster(&polished) }
}

/// Clusters and classifies already computed root values.
pub(crate) fn roots_from_values(zs: &[Complex64]) -> RootSet {
    let mut zs = zs.to_vec();
    zs.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap().then(a.arg().partial_cmp(&b.arg()).unwrap()));
    RootSet { roots: cluster(&zs) }
}

fn newton_step(p: &Polynomial, z: Complex64) -> Complex64 {
    let (f, df) = p.eval_with_derivative(z);
    if df == ZERO {
        return z;
    }
    let next = z - f / df;
    // a step that increases |p| is a sign of a multiple root; keep the eigenvalue
    if next.is_finite() && p.eval(next).norm() <= f.norm() {
        next
    } else {
        z
    }
}

/// Single-linkage grouping at `CLUSTER_TOL`; each group becomes its centroid.
fn cluster(zs: &[Complex64]) -> Vec<Root> {
    let n = zs.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn find(g: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while g[r] != r {
            r = g[r];
        }
        g[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (zs[i] - zs[j]).norm() <= CLUSTER_TOL {
                let (a, b) = (find(&mut group, i), find(&mut group, j));
                group[b] = a;
            }
        }
    }
    let mut out: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let g = find(&mut group, i);
        match out.iter_mut().find(|t| t.0 == g) {
            Some(t) => {
                t.1 += zs[i];
                t.2 += 1;
            }
            None => out.push((g, zs[i], 1)),
        }
    }
    out.into_iter()
        .map(|(_, s, k)| {
            let v = s / k as f64;
            Root { value: v, multiplicity: k, location: Location::classify(v) }
        })
        .collect()
}
