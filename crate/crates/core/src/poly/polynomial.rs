use num_complex::Complex64;

use crate::linalg::ZERO;

/// Relative magnitude below which leading coefficients are dropped.
pub const DROP_TOL: f64 = 1e-10;

/// Complex polynomial, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds and trims leading coefficients below `DROP_TOL` times the largest one.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim(DROP_TOL);
        p
    }

    /// Keeps every coefficient as given (only exact zeros are trimmed).
    pub fn exact(coeffs: Vec<Complex64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim(0.0);
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Polynomial::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Polynomial::exact(vec![c])
    }

    /// `lead * prod (z - r)`.
    pub fn from_roots(roots: &[Complex64], lead: Complex64) -> Self {
        let mut c = vec![lead];
        for &r in roots {
            let mut next = vec![ZERO; c.len() + 1];
            for (i, &a) in c.iter().enumerate() {
                next[i + 1] += a;
                next[i] -= a * r;
            }
            c = next;
        }
        Polynomial::exact(c)
    }

    fn trim(&mut self, rel: f64) {
        let max = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.norm() <= rel * max) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(ZERO);
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// `(p(z), p'(z))` by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::constant(ZERO);
        }
        Polynomial::exact(self.coeffs.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect())
    }

    /// Taylor coefficients at `p`: `q(z) = sum_k t_k (z - p)^k`.
    pub fn taylor_at(&self, p: Complex64) -> Vec<Complex64> {
        // repeated synthetic division by (z - p)
        let mut c = self.coeffs.clone();
        let n = c.len();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            for i in (k..n - 1).rev() {
                let carry = c[i + 1];
                c[i] += carry * p;
            }
            out.push(c[k]);
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut c = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Polynomial::exact(c)
    }

    /// Quotient and remainder of long division.
    pub fn div_rem(&self, d: &Polynomial) -> (Polynomial, Polynomial) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dn = d.degree();
        if self.degree() < dn {
            return (Polynomial::constant(ZERO), self.clone());
        }
        let mut r = self.coeffs.clone();
        let lead = d.leading();
        let mut q = vec![ZERO; self.degree() - dn + 1];
        for k in (0..q.len()).rev() {
            let f = r[k + dn] / lead;
            q[k] = f;
            for (j, &dc) in d.coeffs.iter().enumerate() {
                r[k + j] -= f * dc;
            }
        }
        r.truncate(dn.max(1));
        (Polynomial::exact(q), Polynomial::exact(r))
    }

    /// Sum of coefficient moduli, times `max(1, |z|)^deg`: a scale for `|p(z)|`.
    pub fn scale_at(&self, z: Complex64) -> f64 {
        let r = z.norm().max(1.0);
        self.coeffs.iter().enumerate().map(|(i, c)| c.norm() * r.powi(i as i32)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn eval_and_derivative() {
        let p = Polynomial::from_real(&[-1.0, 0.0, 1.0]);
        assert_eq!(p.degree(), 2);
        let (v, d) = p.eval_with_derivative(c(3.0));
        assert_eq!(v, c(8.0));
        assert_eq!(d, c(6.0));
        assert_eq!(p.derivative().coeffs(), &[c(0.0), c(2.0)]);
    }

    #[test]
    fn trims_small_leading() {
        let p = Polynomial::from_real(&[5.0, 1.0, 1e-13]);
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn roots_round_trip() {
        let p = Polynomial::from_roots(&[c(1.0), c(-2.0)], c(3.0));
        assert_eq!(p.coeffs(), &[c(-6.0), c(3.0), c(3.0)]);
    }

    #[test]
    fn division() {
        let num = Polynomial::from_roots(&[c(0.5), c(3.0), c(-1.0)], c(2.0));
        let den = Polynomial::from_roots(&[c(0.5)], c(1.0));
        let (q, r) = num.div_rem(&den);
        assert!(r.coeffs().iter().all(|x| x.norm() < 1e-14));
        let want = Polynomial::from_roots(&[c(3.0), c(-1.0)], c(2.0));
        for (a, b) in q.coeffs().iter().zip(want.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn taylor_shift() {
        let p = Polynomial::from_real(&[1.0, 2.0, 3.0]);
        // 3(z-1)^2 + 8(z-1) + 6
        let t = p.taylor_at(c(1.0));
        assert_eq!(t, vec![c(6.0), c(8.0), c(3.0)]);
    }
}
