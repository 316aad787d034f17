//! Phase-type distributions `(alpha, T)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, RMat, RRow};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: RRow,
    t: RMat,
}

impl PhaseType {
    pub fn new(alpha: RRow, t: RMat) -> Result<Self> {
        let n = alpha.len();
        if n == 0 || t.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "alpha has {} entries but T is {}x{}",
                n,
                t.nrows(),
                t.ncols()
            )));
        }
        if alpha.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("alpha/T", "non-finite entry"));
        }
        if alpha.iter().any(|&a| a < 0.0) {
            return Err(Error::input("alpha", "entries must be >= 0"));
        }
        let mass: f64 = alpha.iter().sum();
        if mass > 1.0 + 1e-12 || mass <= 0.0 {
            return Err(Error::input("alpha", format!("alpha e = {mass} must lie in (0, 1]")));
        }
        let tol = 1e-12 * max_abs(&t).max(1.0);
        for i in 0..n {
            if t[(i, i)] >= 0.0 {
                return Err(Error::input(format!("T[{i}][{i}]"), "diagonal entries must be negative"));
            }
            for j in 0..n {
                if i != j && t[(i, j)] < 0.0 {
                    return Err(Error::input(format!("T[{i}][{j}]"), "off-diagonal entries must be >= 0"));
                }
            }
            let s: f64 = t.row(i).iter().sum();
            if s > tol {
                return Err(Error::input(format!("T (row {i})"), "row sums must be <= 0"));
            }
        }
        let ph = PhaseType { alpha, t };
        let mean = ph.try_mean().ok_or_else(|| Error::input("T", "T is singular (absorption is not certain)"))?;
        if !(mean.is_finite() && mean >= 0.0) {
            return Err(Error::input("T", "mean is not finite"));
        }
        Ok(ph)
    }

    /// Erlang with `phases` stages, each of rate `rate` (mean `phases / rate`).
    pub fn erlang(phases: usize, rate: f64) -> Result<Self> {
        if phases == 0 {
            return Err(Error::input("phases", "must be >= 1"));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::input("rate", "must be positive"));
        }
        let mut t = RMat::zeros(phases, phases);
        for i in 0..phases {
            t[(i, i)] = -rate;
            if i + 1 < phases {
                t[(i, i + 1)] = rate;
            }
        }
        let mut alpha = RRow::zeros(phases);
        alpha[0] = 1.0;
        PhaseType::new(alpha, t)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        PhaseType::erlang(1, rate)
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &RRow {
        &self.alpha
    }

    pub fn t(&self) -> &RMat {
        &self.t
    }

    /// Exit-rate column `-T e`.
    pub fn exit(&self) -> nalgebra::DVector<f64> {
        -(&self.t * nalgebra::DVector::from_element(self.phases(), 1.0))
    }

    /// Probability mass at zero, `1 - alpha e`.
    pub fn atom(&self) -> f64 {
        (1.0 - self.alpha.iter().sum::<f64>()).max(0.0)
    }

    fn try_mean(&self) -> Option<f64> {
        let inv = (-&self.t).try_inverse()?;
        Some((&self.alpha * inv).sum())
    }

    /// `alpha (-T)^{-1} e`.
    pub fn mean(&self) -> f64 {
        self.try_mean().expect("validated at construction")
    }

    /// All rates multiplied by `f` (mean divided by `f`).
    pub fn scaled(&self, f: f64) -> Result<Self> {
        PhaseType::new(self.alpha.clone(), &self.t * f)
    }

    /// Distinct eigenvalues of `T` with algebraic multiplicities.
    pub fn eigenvalues(&self) -> Vec<(Complex64, usize)> {
        let n = self.phases();
        let upper = (0..n).all(|i| (0..i).all(|j| self.t[(i, j)] == 0.0));
        let lower = (0..n).all(|i| (i + 1..n).all(|j| self.t[(i, j)] == 0.0));
        let raw: Vec<Complex64> = if upper || lower {
            (0..n).map(|i| Complex64::new(self.t[(i, i)], 0.0)).collect()
        } else {
            self.t.complex_eigenvalues().iter().copied().collect()
        };
        let scale = max_abs(&self.t);
        // repeated eigenvalues of a non-triangular T split like eps^(1/q)
        let tol = 1e-5 * scale;
        let mut out: Vec<(Complex64, usize)> = Vec::new();
        for v in raw {
            match out.iter_mut().find(|(u, _)| (*u - v).norm() <= tol) {
                Some(slot) => slot.1 += 1,
                None => out.push((v, 1)),
            }
        }
        out
    }

    /// Draws a sample by walking the phases. Returns the holding time.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Distribution, Exp1};
        let n = self.phases();
        let mut phase = match pick(rng, self.alpha.iter().copied(), 1.0) {
            Some(i) => i,
            None => return 0.0,
        };
        let exit = self.exit();
        let mut time = 0.0;
        loop {
            let rate = -self.t[(phase, phase)];
            let e: f64 = Exp1.sample(rng);
            time += e / rate;
            let weights = (0..n).map(|j| if j == phase { 0.0 } else { self.t[(phase, j)] }).chain(std::iter::once(exit[phase]));
            match pick(rng, weights, rate) {
                Some(j) if j < n => phase = j,
                _ => return time,
            }
        }
    }
}

/// Index drawn with probability `w_i / total`; `None` when the draw falls past the listed weights.
pub(crate) fn pick<R: rand::Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64>, total: f64) -> Option<usize> {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if u < acc {
            return Some(i);
        }
    }
    // rounding in `acc` can leave u a hair above the final weight
    if total - acc <= 1e-12 * total { last } else { None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn erlang_mean_and_shape() {
        let e = PhaseType::erlang(3, 39.0).unwrap();
        assert_eq!(e.phases(), 3);
        assert!((e.mean() - 3.0 / 39.0).abs() < 1e-15);
        assert_eq!(e.exit()[2], 39.0);
        assert_eq!(e.exit()[0], 0.0);
        assert_eq!(e.atom(), 0.0);
    }

    #[test]
    fn erlang_eigenvalue_is_repeated() {
        let e = PhaseType::erlang(3, 7.0).unwrap();
        let ev = e.eigenvalues();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].1, 3);
        assert!((ev[0].0.re + 7.0).abs() < 1e-12);
    }

    #[test]
    fn hyperexponential_eigenvalues() {
        let alpha = RRow::from_row_slice(&[0.3, 0.7]);
        let t = RMat::from_row_slice(2, 2, &[-1.0, 0.5, 0.2, -3.0]);
        let ph = PhaseType::new(alpha, t).unwrap();
        let mut ev = ph.eigenvalues();
        ev.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap());
        assert_eq!(ev.len(), 2);
        let tr: f64 = ev.iter().map(|v| v.0.re).sum();
        assert!((tr + 4.0).abs() < 1e-10);
    }

    #[test]
    fn validation() {
        let bad_alpha = RRow::from_row_slice(&[0.8, 0.4]);
        let t = RMat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(PhaseType::new(bad_alpha, t.clone()).is_err());
        let pos_row = RMat::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -1.0]);
        assert!(PhaseType::new(RRow::from_row_slice(&[1.0, 0.0]), pos_row).is_err());
        // absorbing-free chain: T singular
        let closed = RMat::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        assert!(PhaseType::new(RRow::from_row_slice(&[1.0, 0.0]), closed).is_err());
        assert!(PhaseType::erlang(0, 1.0).is_err());
        assert!(PhaseType::erlang(2, -1.0).is_err());
    }

    #[test]
    fn atom_reduces_mean() {
        let ph = PhaseType::new(RRow::from_row_slice(&[0.5]), RMat::from_element(1, 1, -2.0)).unwrap();
        assert!((ph.atom() - 0.5).abs() < 1e-15);
        assert!((ph.mean() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_close() {
        let ph = PhaseType::erlang(2, 4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let s: f64 = (0..n).map(|_| ph.sample(&mut rng)).sum::<f64>() / n as f64;
        // var = 2/16, se = sqrt(var/n)
        assert!((s - 0.5).abs() < 4.0 * (0.125f64 / n as f64).sqrt());
    }
}
