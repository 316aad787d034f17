//! Small dense helpers shared by the kernel, solver and simulator code.

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type RRow = RowDVector<f64>;
pub type CRow = RowDVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn kron(a: &RMat, b: &RMat) -> RMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = RMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for p in 0..br {
                for q in 0..bc {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

pub fn complexify(a: &RMat) -> CMat {
    a.map(c)
}

pub fn row_complexify(a: &RRow) -> CRow {
    a.map(c)
}

/// Adjugate by cofactors. Works at singular points, unlike `det * inverse`.
pub fn adjugate(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    match n {
        0 => CMat::zeros(0, 0),
        1 => CMat::from_element(1, 1, ONE),
        2 => CMat::from_row_slice(2, 2, &[a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]]),
        _ => {
            let mut adj = CMat::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let minor = a.clone().remove_row(i).remove_column(j);
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    // adj = transpose of the cofactor matrix
                    adj[(j, i)] = minor.determinant() * sign;
                }
            }
            adj
        }
    }
}

pub fn max_abs(a: &RMat) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn row_sum(v: &RRow) -> f64 {
    v.iter().sum()
}
