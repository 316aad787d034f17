use num_complex::Complex64;

use crate::error::Result;
use crate::kernel::{Kernel, KernelCoefficients};
use crate::linalg::{CMat, RMat, RRow};
use crate::model::QueueModel;

/// Every kernel of a model, with coefficient series.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub h: usize,
    pub big_h: usize,
    pub m: usize,
    pub eps: f64,
    /// `service[r - h]`
    pub service: Vec<Kernel>,
    pub vacation: Vec<Kernel>,
    pub service_coeffs: Vec<KernelCoefficients>,
    pub vacation_coeffs: Vec<KernelCoefficients>,
    /// `d_tilde_pow[j] = D̃^j`, `j = 0..=h`
    pub d_tilde_pow: Vec<RMat>,
    pub d: RMat,
    pub neg_c_inv: RMat,
    /// Phase seen by arrivals, `xi D / lambda`: the stationary vector of `D̃`.
    pub arrival_phase: RRow,
}

/// Point values of every kernel at one `z`.
pub struct KernelValues {
    pub z: Complex64,
    pub service: Vec<CMat>,
    pub vacation: Vec<CMat>,
}

impl KernelSet {
    pub fn new(model: &QueueModel, coeff_cap: usize, coeff_target: f64) -> Result<Self> {
        let map = model.arrivals();
        let service: Vec<Kernel> = model.services().iter().map(|s| Kernel::new(s, map)).collect();
        let vacation: Vec<Kernel> = model.vacations().iter().map(|v| Kernel::new(v, map)).collect();
        let service_coeffs = service.iter().map(|k| k.coefficients(coeff_cap, coeff_target)).collect::<Result<_>>()?;
        let vacation_coeffs = vacation.iter().map(|k| k.coefficients(coeff_cap, coeff_target)).collect::<Result<_>>()?;
        let m = model.phases();
        let mut d_tilde_pow = vec![RMat::identity(m, m)];
        for j in 1..=model.h() {
            let next = &d_tilde_pow[j - 1] * map.d_tilde();
            d_tilde_pow.push(next);
        }
        Ok(KernelSet {
            h: model.h(),
            big_h: model.H(),
            m,
            eps: model.epsilon(),
            service,
            vacation,
            service_coeffs,
            vacation_coeffs,
            d_tilde_pow,
            d: map.d().clone(),
            neg_c_inv: map.neg_c_inv().clone(),
            arrival_phase: map.stationary() * map.d() / map.rate(),
        })
    }

    pub fn service_kernel(&self, r: usize) -> &Kernel {
        &self.service[r - self.h]
    }

    pub fn top(&self) -> &Kernel {
        self.service.last().unwrap()
    }

    /// `A^(r)_l`, zero past the stored series.
    pub fn service_coeff(&self, r: usize, l: usize) -> Option<&RMat> {
        self.service_coeffs[r - self.h].get(l)
    }

    pub fn vacation_coeff(&self, k: usize, l: usize) -> Option<&RMat> {
        self.vacation_coeffs[k].get(l)
    }

    pub fn values(&self, z: Complex64) -> Result<KernelValues> {
        Ok(KernelValues {
            z,
            service: self.service.iter().map(|k| k.eval(z)).collect::<Result<_>>()?,
            vacation: self.vacation.iter().map(|k| k.eval(z)).collect::<Result<_>>()?,
        })
    }

    /// Candidate poles of every kernel, with order bounds.
    pub fn poles(&self) -> Result<Vec<(Complex64, usize)>> {
        let mut out = Vec::new();
        for k in self.service.iter().chain(&self.vacation) {
            out.extend(k.poles()?);
        }
        Ok(out)
    }

    /// Longest coefficient series among the vacation kernels.
    pub fn max_vacation_len(&self) -> usize {
        self.vacation_coeffs.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    pub fn max_service_len(&self) -> usize {
        self.service_coeffs.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

impl KernelValues {
    pub fn service(&self, h: usize, r: usize) -> &CMat {
        &self.service[r - h]
    }

    pub fn top(&self) -> &CMat {
        self.service.last().unwrap()
    }
}
