//! Arrival-counting kernels: `A(z) = (alpha ⊗ I)(-(T ⊕ (C + Dz)))^{-1}(t ⊗ I)`.
//!
//! `A(z)` is the matrix PGF of the number of MAP arrivals during one PH holding
//! time, with the phase of the arrival process tracked at both ends.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, complexify, kron, max_abs, CMat, RMat, ONE};
use crate::map::MarkovianArrivalProcess;
use crate::ph::PhaseType;
use crate::poly::{find_roots, poly_from_circle};

/// Default residual target for coefficient series.
pub const COEFF_TARGET: f64 = 1e-12;
/// Default cap on the number of coefficient matrices.
pub const COEFF_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct Kernel {
    m: usize,
    n: usize,
    /// -(T ⊗ I + I ⊗ C)
    g0: RMat,
    /// I ⊗ D
    id: RMat,
    left: RMat,
    right: RMat,
    atom: f64,
    ph: PhaseType,
    c: RMat,
    d: RMat,
}

/// Arrival-count coefficient matrices `K_0, K_1, ...` of one kernel.
#[derive(Debug, Clone)]
pub struct KernelCoefficients {
    mats: Vec<RMat>,
    residual: f64,
}

impl KernelCoefficients {
    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Coefficient `l`, or `None` past the truncation point (treated as zero).
    pub fn get(&self, l: usize) -> Option<&RMat> {
        self.mats.get(l)
    }

    pub fn mats(&self) -> &[RMat] {
        &self.mats
    }

    /// `max_i (e - sum_l K_l e)_i`: probability mass not yet covered.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn partial_sum(&self) -> RMat {
        let m = self.mats[0].nrows();
        self.mats.iter().fold(RMat::zeros(m, m), |acc, k| acc + k)
    }
}

impl Kernel {
    pub fn new(ph: &PhaseType, map: &MarkovianArrivalProcess) -> Self {
        let m = map.phases();
        let n = ph.phases();
        let im = RMat::identity(m, m);
        let inn = RMat::identity(n, n);
        let g0 = -(kron(ph.t(), &im) + kron(&inn, map.c()));
        let id = kron(&inn, map.d());
        let alpha = RMat::from_row_slice(1, n, ph.alpha().as_slice());
        let exit = ph.exit();
        let exit = RMat::from_column_slice(n, 1, exit.as_slice());
        Kernel {
            m,
            n,
            g0,
            id,
            left: kron(&alpha, &im),
            right: kron(&exit, &im),
            atom: ph.atom(),
            ph: ph.clone(),
            c: map.c().clone(),
            d: map.d().clone(),
        }
    }

    pub fn phases(&self) -> usize {
        self.m
    }

    pub fn distribution(&self) -> &PhaseType {
        &self.ph
    }

    fn g(&self, z: Complex64) -> CMat {
        complexify(&self.g0) - complexify(&self.id) * z
    }

    fn lu(&self, z: Complex64) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
        let lu = self.g(z).lu();
        if !lu.is_invertible() {
            return Err(Error::SingularKernel { z });
        }
        Ok(lu)
    }

    /// `A(z)`.
    pub fn eval(&self, z: Complex64) -> Result<CMat> {
        let lu = self.lu(z)?;
        let x = lu.solve(&complexify(&self.right)).ok_or(Error::SingularKernel { z })?;
        let mut a = complexify(&self.left) * x;
        if self.atom > 0.0 {
            for i in 0..self.m {
                a[(i, i)] += c(self.atom);
            }
        }
        Ok(a)
    }

    /// `(A(z), A'(z))`.
    pub fn eval_with_derivative(&self, z: Complex64) -> Result<(CMat, CMat)> {
        let lu = self.lu(z)?;
        let x = lu.solve(&complexify(&self.right)).ok_or(Error::SingularKernel { z })?;
        let left = complexify(&self.left);
        let mut a = &left * &x;
        for i in 0..self.m {
            a[(i, i)] += c(self.atom);
        }
        let y = lu.solve(&(complexify(&self.id) * &x)).ok_or(Error::SingularKernel { z })?;
        Ok((a, left * y))
    }

    /// `det(-(T ⊕ (C + Dz))) / det(-(T ⊕ C))`: clears every pole of `A(z)`.
    pub fn denominator(&self, z: Complex64) -> Complex64 {
        let g = self.g(z);
        let g0 = complexify(&self.g0);
        g.determinant() / g0.determinant()
    }

    /// `d'(z) / d(z)` for [`Kernel::denominator`].
    pub fn denominator_log_derivative(&self, z: Complex64) -> Result<Complex64> {
        let lu = self.lu(z)?;
        let y = lu.solve(&complexify(&self.id)).ok_or(Error::SingularKernel { z })?;
        Ok(-y.trace())
    }

    /// Degree of [`Kernel::denominator`] as a polynomial in `z` (upper bound).
    pub fn denominator_degree(&self) -> usize {
        self.n * self.m
    }

    /// Coefficients `K_l`, `l = 0, 1, ...` from the resolvent series
    /// `K_l = (alpha ⊗ I) U^l W (t ⊗ I)`, `W = (-(T ⊕ C))^{-1}`, `U = W (I ⊗ D)`.
    ///
    /// Stops once the uncovered mass drops to `target`; fails if `cap`
    /// matrices are not enough.
    pub fn coefficients(&self, cap: usize, target: f64) -> Result<KernelCoefficients> {
        let w = self
            .g0
            .clone()
            .try_inverse()
            .ok_or(Error::SingularKernel { z: Complex64::new(0.0, 0.0) })?;
        let u = &w * &self.id;
        let wr = &w * &self.right;
        let e = DVector::from_element(self.m, 1.0);
        let mut covered = DVector::zeros(self.m);
        let mut v = self.left.clone();
        let mut mats = Vec::new();
        let mut residual = f64::INFINITY;
        while mats.len() < cap.max(1) {
            let mut k = &v * &wr;
            if mats.is_empty() && self.atom > 0.0 {
                for i in 0..self.m {
                    k[(i, i)] += self.atom;
                }
            }
            covered += &k * &e;
            mats.push(k);
            residual = (&e - &covered).iter().fold(0.0_f64, |r, x| r.max(x.abs()));
            if residual <= target {
                break;
            }
            v = &v * &u;
        }
        if residual > target {
            return Err(Error::KernelTruncation { len: mats.len(), residual, target });
        }
        Ok(KernelCoefficients { mats, residual })
    }

    /// Poles of `A(z)` with an upper bound on their order.
    ///
    /// `G(z)` is singular exactly when `det(C + Dz + tau I) = 0` for an
    /// eigenvalue `tau` of `T`; the order is at most the multiplicity of `tau`
    /// times the multiplicity of the root in `z`.
    pub fn poles(&self) -> Result<Vec<(Complex64, usize)>> {
        let m = self.m;
        let mut out: Vec<(Complex64, usize)> = Vec::new();
        let cc = complexify(&self.c);
        let dd = complexify(&self.d);
        let scale = max_abs(&self.c).max(max_abs(&self.d)).max(1.0);
        for (tau, mult) in self.ph.eigenvalues() {
            let f = |z: Complex64| {
                let mut mat = &cc + &dd * z;
                for i in 0..m {
                    mat[(i, i)] += tau;
                }
                Ok((mat / c(scale)).determinant())
            };
            let p = poly_from_circle(f, m, 1.25)?;
            if p.degree() == 0 {
                continue;
            }
            for r in find_roots(&p).roots() {
                // interpolation on a small circle loses digits on large roots
                let mut z = r.value;
                for _ in 0..50 {
                    let mut mat = &cc + &dd * z;
                    for i in 0..m {
                        mat[(i, i)] += tau;
                    }
                    let Some(inv) = mat.try_inverse() else { break };
                    let step = c(r.multiplicity as f64) / (inv * &dd).trace();
                    if !step.is_finite() {
                        break;
                    }
                    z -= step;
                    if step.norm() <= 1e-15 * z.norm().max(1.0) {
                        break;
                    }
                }
                out.push((z, r.multiplicity * mult));
            }
        }
        Ok(out)
    }

    /// `A(1)`; rows sum to one.
    pub fn at_one(&self) -> CMat {
        self.eval(ONE).expect("-(T ⊕ (C + D)) is nonsingular for a validated model")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RRow;

    fn example_map() -> MarkovianArrivalProcess {
        MarkovianArrivalProcess::new(
            RMat::from_row_slice(2, 2, &[-91.8125, 14.125, 49.4375, -77.6875]),
            RMat::from_row_slice(2, 2, &[49.4375, 28.25, 7.0625, 21.1875]),
        )
        .unwrap()
    }

    #[test]
    fn stochastic_at_one() {
        let map = example_map();
        for ph in [PhaseType::erlang(3, 70.2).unwrap(), PhaseType::erlang(2, 1.0).unwrap()] {
            let a = Kernel::new(&ph, &map).at_one();
            for i in 0..2 {
                let s: Complex64 = a.row(i).iter().sum();
                assert!((s - ONE).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_exponential_poisson() {
        let map = MarkovianArrivalProcess::poisson(2.0).unwrap();
        let k = Kernel::new(&PhaseType::exponential(5.0).unwrap(), &map);
        let z = Complex64::new(0.3, -0.4);
        let want = c(5.0) / (c(7.0) - z * 2.0);
        assert!((k.eval(z).unwrap()[(0, 0)] - want).norm() < 1e-14);
        let co = k.coefficients(COEFF_CAP, 1e-14).unwrap();
        for l in 0..10 {
            let g = 5.0 / 7.0 * (2.0f64 / 7.0).powi(l as i32);
            assert!((co.get(l).unwrap()[(0, 0)] - g).abs() < 1e-15);
        }
    }

    #[test]
    fn series_matches_pointwise() {
        let map = example_map();
        let k = Kernel::new(&PhaseType::erlang(3, 70.2).unwrap(), &map);
        let co = k.coefficients(COEFF_CAP, COEFF_TARGET).unwrap();
        let z: f64 = 0.5;
        let mut sum = RMat::zeros(2, 2);
        for (l, a) in co.mats().iter().enumerate() {
            sum += a * z.powi(l as i32);
        }
        let a = k.eval(c(z)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)].re - sum[(i, j)]).abs() < 1e-10);
            }
        }
        assert!(co.residual() <= COEFF_TARGET);
    }

    #[test]
    fn truncation_error_reported() {
        let map = example_map();
        let k = Kernel::new(&PhaseType::erlang(2, 1.0).unwrap(), &map);
        match k.coefficients(5, 1e-12) {
            Err(Error::KernelTruncation { len, residual, .. }) => {
                assert_eq!(len, 5);
                assert!(residual > 0.5);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn derivative_gives_mean_arrivals() {
        let map = example_map();
        let ph = PhaseType::erlang(2, 9.0).unwrap();
        let k = Kernel::new(&ph, &map);
        let (_, da) = k.eval_with_derivative(ONE).unwrap();
        let xi = crate::linalg::row_complexify(map.stationary());
        let val: Complex64 = (xi * da).iter().sum();
        assert!((val.re - map.rate() * ph.mean()).abs() < 1e-8);
    }

    #[test]
    fn poles_are_singular_points() {
        let map = example_map();
        let k = Kernel::new(&PhaseType::erlang(2, 1.0).unwrap(), &map);
        let poles = k.poles().unwrap();
        assert!(!poles.is_empty());
        for (p, order) in poles {
            assert_eq!(order, 2);
            assert!(p.norm() > 1.0);
            assert!(k.denominator(p).norm() < 1e-8);
        }
    }

    #[test]
    fn atom_enters_as_identity() {
        let map = MarkovianArrivalProcess::poisson(1.0).unwrap();
        let ph = PhaseType::new(RRow::from_row_slice(&[0.25]), RMat::from_element(1, 1, -3.0)).unwrap();
        let k = Kernel::new(&ph, &map);
        let a = k.eval(c(0.0)).unwrap()[(0, 0)];
        assert!((a.re - (0.75 + 0.25 * 3.0 / 4.0)).abs() < 1e-14);
        let co = k.coefficients(COEFF_CAP, 1e-13).unwrap();
        assert!((co.get(0).unwrap()[(0, 0)] - a.re).abs() < 1e-14);
    }
}
