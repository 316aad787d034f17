//! Markovian arrival processes.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, RMat, RRow};

/// Row-sum tolerance, relative to the largest rate in (C, D).
const GENERATOR_TOL: f64 = 1e-10;

/// A validated MAP `(C, D)` with its stationary phase vector and rate.
#[derive(Debug, Clone)]
pub struct MarkovianArrivalProcess {
    c: RMat,
    d: RMat,
    xi: RRow,
    lambda: f64,
    neg_c_inv: RMat,
    d_tilde: RMat,
}

impl MarkovianArrivalProcess {
    pub fn new(c: RMat, d: RMat) -> Result<Self> {
        validate_map(c, d)
    }

    /// Poisson process of rate `rate` as a one-phase MAP.
    pub fn poisson(rate: f64) -> Result<Self> {
        validate_map(RMat::from_element(1, 1, -rate), RMat::from_element(1, 1, rate))
    }

    pub fn phases(&self) -> usize {
        self.c.nrows()
    }

    pub fn c(&self) -> &RMat {
        &self.c
    }

    pub fn d(&self) -> &RMat {
        &self.d
    }

    /// Stationary vector of the phase process, `xi (C + D) = 0`, `xi e = 1`.
    pub fn stationary(&self) -> &RRow {
        &self.xi
    }

    /// Fundamental arrival rate `xi D e`.
    pub fn rate(&self) -> f64 {
        self.lambda
    }

    /// `(-C)^{-1}`.
    pub fn neg_c_inv(&self) -> &RMat {
        &self.neg_c_inv
    }

    /// `(-C)^{-1} D`: phase transition matrix across one arrival.
    pub fn d_tilde(&self) -> &RMat {
        &self.d_tilde
    }

    /// The same process with every rate multiplied by `l`.
    pub fn scaled(&self, l: f64) -> Result<Self> {
        validate_map(&self.c * l, &self.d * l)
    }
}

pub fn validate_map(c: RMat, d: RMat) -> Result<MarkovianArrivalProcess> {
    let m = c.nrows();
    if m == 0 || c.ncols() != m || d.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "C is {}x{}, D is {}x{}; both must be square of equal size",
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
        return Err(Error::input("arrivals", "non-finite rate"));
    }
    for i in 0..m {
        if c[(i, i)] >= 0.0 {
            return Err(Error::input(format!("arrivals.C[{i}][{i}]"), "diagonal entries of C must be negative"));
        }
        for j in 0..m {
            if i != j && c[(i, j)] < 0.0 {
                return Err(Error::input(format!("arrivals.C[{i}][{j}]"), "off-diagonal entries of C must be >= 0"));
            }
            if d[(i, j)] < 0.0 {
                return Err(Error::input(format!("arrivals.D[{i}][{j}]"), "entries of D must be >= 0"));
            }
        }
    }
    let q = &c + &d;
    let scale = max_abs(&c).max(max_abs(&d));
    for i in 0..m {
        let s: f64 = q.row(i).iter().sum();
        if s.abs() > GENERATOR_TOL * scale {
            return Err(Error::input(
                format!("arrivals (row {i})"),
                format!("rows of C + D must sum to zero, got {s:.3e}"),
            ));
        }
    }
    if d.iter().all(|&v| v == 0.0) {
        return Err(Error::input("arrivals.D", "D is zero: the process never produces arrivals"));
    }
    if !irreducible(&q) {
        return Err(Error::input("arrivals", "C + D is reducible: no unique stationary vector"));
    }

    // xi [(C+D) | e] = [0 | 1], solved as an overdetermined least-squares system.
    let mut a = RMat::zeros(m + 1, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = q[(j, i)];
        }
        a[(m, i)] = 1.0;
    }
    let mut b = DVector::zeros(m + 1);
    b[m] = 1.0;
    let svd = a.svd(true, true);
    let xi_col = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Solver(format!("stationary vector: {e}")))?;
    let xi = xi_col.transpose();
    if xi.iter().any(|&v| v < -1e-12) {
        return Err(Error::Solver("stationary vector has negative entries".into()));
    }
    let xi = xi.map(|v| v.max(0.0));
    let lambda = (&xi * &d).sum();

    let neg_c = -&c;
    let neg_c_inv = neg_c
        .try_inverse()
        .ok_or_else(|| Error::input("arrivals.C", "C is singular"))?;
    let d_tilde = &neg_c_inv * &d;

    Ok(MarkovianArrivalProcess { c, d, xi, lambda, neg_c_inv, d_tilde })
}

fn irreducible(q: &RMat) -> bool {
    let m = q.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let w = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_matrices() -> (RMat, RMat) {
        (
            RMat::from_row_slice(2, 2, &[-91.8125, 14.125, 49.4375, -77.6875]),
            RMat::from_row_slice(2, 2, &[49.4375, 28.25, 7.0625, 21.1875]),
        )
    }

    #[test]
    fn example_stationary_vector_and_rate() {
        let (c, d) = example_matrices();
        let map = validate_map(c, d).unwrap();
        assert!((map.stationary()[0] - 4.0 / 7.0).abs() < 1e-12);
        assert!((map.stationary()[1] - 3.0 / 7.0).abs() < 1e-12);
        assert!((map.rate() - 56.5).abs() < 1e-10);
    }

    #[test]
    fn sweep_matrices() {
        let c = RMat::from_row_slice(2, 2, &[-4.657, 1.761, 1.128, -3.941]);
        let d = RMat::from_row_slice(2, 2, &[1.657, 1.239, 0.872, 1.941]);
        let map = validate_map(c, d).unwrap();
        assert!((map.stationary()[0] - 0.4).abs() < 1e-10);
        assert!((map.stationary()[1] - 0.6).abs() < 1e-10);
        assert!((map.rate() - 2.8462).abs() < 1e-10);
        let doubled = map.scaled(2.0).unwrap();
        assert!((doubled.rate() - 2.0 * 2.8462).abs() < 1e-10);
    }

    #[test]
    fn poisson_is_one_phase() {
        let map = MarkovianArrivalProcess::poisson(3.0).unwrap();
        assert_eq!(map.phases(), 1);
        assert!((map.stationary()[0] - 1.0).abs() < 1e-14);
        assert!((map.rate() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn d_tilde_is_stochastic() {
        let (c, d) = example_matrices();
        let map = validate_map(c, d).unwrap();
        for i in 0..2 {
            let s: f64 = map.d_tilde().row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_generators() {
        let (c, d) = example_matrices();
        let mut bad = c.clone();
        bad[(0, 1)] += 1.0;
        assert!(validate_map(bad, d.clone()).is_err());

        let mut neg = d.clone();
        neg[(0, 0)] = -1.0;
        let mut c2 = c.clone();
        c2[(0, 0)] -= -2.0 * 49.4375;
        assert!(validate_map(c2, neg).is_err());

        let mut negc = c.clone();
        negc[(0, 1)] = -14.125;
        negc[(0, 0)] = -91.8125 + 28.25;
        assert!(validate_map(negc, d.clone()).is_err());

        assert!(validate_map(RMat::from_element(1, 1, -1.0), RMat::zeros(1, 1)).is_err());
        assert!(validate_map(RMat::zeros(2, 3), RMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn rejects_reducible() {
        let c = RMat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let d = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let err = validate_map(c, d).unwrap_err();
        assert!(err.to_string().contains("reducible"));
    }
}
