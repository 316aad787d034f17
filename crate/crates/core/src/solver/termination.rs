//! Vacation-termination probabilities as a linear map of the boundary unknowns.
//!
//! A vacation of type `k` starts from `src_k = xi+(k) + eps gamma+(k)` and ends
//! with `n` waiting with probability `gamma+(n, k) = src_k B^(k)_{n-k}`. Under MV
//! `gamma+(k)` itself depends on `src_k`, so the sources are resolved in `k`.

use crate::error::{Error, Result};
use crate::linalg::{RMat, RRow};

use super::kernels::KernelSet;

/// `src_k = sum_{i <= k} xi+(i) S[i][k]` and `gamma+(n) = sum_i xi+(i) G[i][n]`.
#[derive(Debug, Clone)]
pub struct TerminationMap {
    h: usize,
    /// `s[i][k]`, zero for `i > k`
    s: Vec<Vec<RMat>>,
    /// `g[i][n]` for `n < big_h`
    g: Vec<Vec<RMat>>,
}

impl TerminationMap {
    pub fn new(ks: &KernelSet) -> Result<Self> {
        let (h, big_h, m) = (ks.h, ks.big_h, ks.m);
        let zero = RMat::zeros(m, m);
        let eye = RMat::identity(m, m);
        let b = |k: usize, l: usize| ks.vacation_coeff(k, l).cloned().unwrap_or_else(|| zero.clone());
        let mut s = vec![vec![zero.clone(); h]; h];
        for k in 0..h {
            let solve = if ks.eps > 0.0 {
                (&eye - b(k, 0)).try_inverse().ok_or_else(|| {
                    Error::Solver(format!("I - B^({k})_0 is singular; vacation {k} never admits an arrival"))
                })?
            } else {
                eye.clone()
            };
            for i in 0..=k {
                let mut acc = if i == k { eye.clone() } else { zero.clone() };
                if ks.eps > 0.0 {
                    for j in i..k {
                        acc += &s[i][j] * b(j, k - j);
                    }
                }
                s[i][k] = acc * &solve;
            }
        }
        let mut g = vec![vec![zero.clone(); big_h]; h];
        for i in 0..h {
            for n in 0..big_h {
                let mut acc = zero.clone();
                for k in i..h.min(n + 1) {
                    acc += &s[i][k] * b(k, n - k);
                }
                g[i][n] = acc;
            }
        }
        Ok(TerminationMap { h, s, g })
    }

    pub fn source_matrix(&self, i: usize, k: usize) -> &RMat {
        &self.s[i][k]
    }

    /// `G[i][n]`: contribution of `xi+(i)` to `gamma+(n)`, `n < H`.
    pub fn gamma_matrix(&self, i: usize, n: usize) -> &RMat {
        &self.g[i][n]
    }

    /// Vacation sources `src_k` for given `xi+(i)`, `i < h`.
    pub fn sources(&self, xi: &[RRow]) -> Vec<RRow> {
        (0..self.h)
            .map(|k| (0..=k).fold(RRow::zeros(xi[0].len()), |acc, i| acc + &xi[i] * &self.s[i][k]))
            .collect()
    }
}

/// `gamma+(n, k)` for `n = 0..len` (zero for `n < k`).
pub fn gamma_joint(ks: &KernelSet, sources: &[RRow], len: usize) -> Vec<Vec<RRow>> {
    let m = ks.m;
    sources
        .iter()
        .enumerate()
        .map(|(k, src)| {
            (0..len)
                .map(|n| match n.checked_sub(k).and_then(|l| ks.vacation_coeff(k, l)) {
                    Some(b) => src * b,
                    None => RRow::zeros(m),
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Policy;
    use crate::presets::example_model;

    fn map_for(policy: Policy) -> (KernelSet, TerminationMap) {
        let ks = KernelSet::new(&example_model(policy), 20_000, 1e-13).unwrap();
        let t = TerminationMap::new(&ks).unwrap();
        (ks, t)
    }

    #[test]
    fn sv_sources_are_identity() {
        let (_, t) = map_for(Policy::Sv);
        for k in 0..5 {
            for i in 0..5 {
                let want = if i == k { 1.0 } else { 0.0 };
                assert_eq!(t.source_matrix(i, k)[(0, 0)], want);
            }
        }
    }

    #[test]
    fn mv_self_consistency() {
        // gamma+(k) must equal sum_j gamma+(k, j) with src_k = xi+(k) + gamma+(k)
        let (ks, t) = map_for(Policy::Mv);
        let xi: Vec<RRow> = (0..5).map(|i| RRow::from_row_slice(&[0.01 * (i + 1) as f64, 0.003])).collect();
        let src = t.sources(&xi);
        let joint = gamma_joint(&ks, &src, 5);
        for k in 0..5 {
            let gk: RRow = (0..=k).fold(RRow::zeros(2), |a, j| a + &joint[j][k]);
            let diff = &src[k] - (&xi[k] + &gk);
            assert!(diff.amax() < 1e-15);
            let via_map = (0..5).fold(RRow::zeros(2), |a, i| a + &xi[i] * t.gamma_matrix(i, k));
            assert!((via_map - gk).amax() < 1e-15);
        }
    }
}
