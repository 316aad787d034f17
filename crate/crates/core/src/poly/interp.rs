//! Coefficient recovery from point values.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Polynomial;
use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};

/// Default radius of the sampling circle.
pub const NODE_RADIUS: f64 = 1.25;

/// `degree_bound + 1` equispaced nodes on the circle of radius `radius`.
pub fn circle_nodes(degree_bound: usize, radius: f64) -> Vec<Complex64> {
    let k = degree_bound + 1;
    (0..k)
        .map(|j| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / k as f64))
        .collect()
}

/// Interpolating polynomial of degree `<= degree_bound` through `(nodes, values)`.
///
/// Nodes are arbitrary; with more nodes than `degree_bound + 1` the fit is
/// least squares.
pub fn poly_from_samples(nodes: &[Complex64], values: &[Complex64], degree_bound: usize) -> Result<Polynomial> {
    if nodes.len() != values.len() {
        return Err(Error::Dimension(format!("{} nodes but {} values", nodes.len(), values.len())));
    }
    let k = degree_bound + 1;
    let mut distinct: Vec<Complex64> = Vec::new();
    let scale = nodes.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    for &z in nodes {
        if !distinct.iter().any(|&d| (d - z).norm() <= 1e-14 * scale.max(1.0)) {
            distinct.push(z);
        }
    }
    if distinct.len() < k {
        return Err(Error::RankDeficient);
    }
    let s = if scale > 0.0 { scale } else { 1.0 };
    // Vandermonde in w = z / s keeps the columns comparable in size.
    let v = CMat::from_fn(nodes.len(), k, |i, j| (nodes[i] / s).powu(j as u32));
    let b = CMat::from_column_slice(values.len(), 1, values);
    let svd = v.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-13 * smax {
        return Err(Error::RankDeficient);
    }
    let x = svd.solve(&b, 0.0).map_err(|_| Error::RankDeficient)?;
    let coeffs = (0..k).map(|j| x[(j, 0)] / s.powi(j as i32)).collect();
    Ok(Polynomial::new(coeffs))
}

/// Interpolation on equispaced circle nodes via one FFT.
pub fn poly_from_circle<F>(f: F, degree_bound: usize, radius: f64) -> Result<Polynomial>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let nodes = circle_nodes(degree_bound, radius);
    let mut buf = nodes.iter().map(|&z| f(z)).collect::<Result<Vec<_>>>()?;
    let k = buf.len();
    FftPlanner::new().plan_fft_forward(k).process(&mut buf);
    let coeffs = buf
        .iter()
        .enumerate()
        .map(|(j, &v)| v / (k as f64 * radius.powi(j as i32)))
        .collect();
    Ok(Polynomial::new(coeffs))
}

/// Determinant of a polynomial matrix, recovered from pointwise determinants.
pub fn det_poly<F>(eval: F, size: usize, degree_bound: usize) -> Result<Polynomial>
where
    F: Fn(Complex64) -> Result<CMat>,
{
    poly_from_circle(
        |z| {
            let m = eval(z)?;
            if m.shape() != (size, size) {
                return Err(Error::Dimension(format!("evaluator returned {:?}, expected {size}x{size}", m.shape())));
            }
            Ok(if size == 0 { Complex64::new(1.0, 0.0) } else { m.determinant() })
        },
        degree_bound,
        NODE_RADIUS,
    )
}

/// Coefficient sequence `f_0..f_{k-1}` of a function analytic in `|z| < R`,
/// from `k` samples on the circle of radius `radius < R`.
pub fn taylor_on_circle<F>(f: F, k: usize, radius: f64, width: usize) -> Result<Vec<Vec<Complex64>>>
where
    F: Fn(Complex64) -> Result<Vec<Complex64>>,
{
    let nodes = circle_nodes(k - 1, radius);
    let samples = nodes.iter().map(|&z| f(z)).collect::<Result<Vec<_>>>()?;
    let fft = FftPlanner::new().plan_fft_forward(k);
    let mut out = vec![vec![ZERO; width]; k];
    for w in 0..width {
        let mut buf: Vec<Complex64> = samples.iter().map(|s| s[w]).collect();
        fft.process(&mut buf);
        for (j, v) in buf.into_iter().enumerate() {
            out[j][w] = v / (k as f64 * radius.powi(j as i32));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn quadratic_from_three_nodes() {
        let nodes = circle_nodes(2, NODE_RADIUS);
        let vals: Vec<_> = nodes.iter().map(|z| z * z - 1.0).collect();
        let p = poly_from_samples(&nodes, &vals, 2).unwrap();
        assert_eq!(p.degree(), 2);
        for (a, b) in p.coeffs().iter().zip([c(-1.0), c(0.0), c(1.0)]) {
            assert!((a - b).norm() < 1e-13);
        }
        let q = poly_from_circle(|z| Ok(z * z - 1.0), 2, NODE_RADIUS).unwrap();
        assert!((q.coeffs()[0] + 1.0).norm() < 1e-14);
    }

    #[test]
    fn constant_collapses_to_degree_zero() {
        let nodes = circle_nodes(3, NODE_RADIUS);
        let p = poly_from_samples(&nodes, &[c(5.0); 4], 3).unwrap();
        assert_eq!(p.degree(), 0);
        assert!((p.coeffs()[0] - 5.0).norm() < 1e-13);
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let nodes = vec![c(1.0), c(1.0), c(2.0)];
        let vals = vec![c(1.0), c(1.0), c(4.0)];
        assert!(matches!(poly_from_samples(&nodes, &vals, 2), Err(Error::RankDeficient)));
    }

    #[test]
    fn det_of_jordan_block() {
        let p = det_poly(|z| Ok(CMat::from_row_slice(2, 2, &[z, c(1.0), c(0.0), z])), 2, 4).unwrap();
        assert_eq!(p.degree(), 2);
        assert!((p.coeffs()[2] - 1.0).norm() < 1e-13);
        let one = det_poly(|z| Ok(CMat::from_element(1, 1, z * 3.0 + 1.0)), 1, 3).unwrap();
        assert_eq!(one.degree(), 1);
        assert!((one.coeffs()[1] - 3.0).norm() < 1e-13);
    }
}
