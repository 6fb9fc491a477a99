//! Rate fits and extrapolation for ε-sequences.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ln;

/// Least-squares slope of `ln y` against `ln x`.
///
/// Nonpositive or non-finite samples are rejected.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Domain {
            name: "sample count",
            value: xs.len() as f64,
            domain: "at least 2",
        });
    }
    for &v in xs.iter().chain(ys) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                name: "log-log sample",
                value: v,
                domain: "(0, inf)",
            });
        }
    }
    let lx: Vec<f64> = xs.iter().map(|&x| ln(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| ln(y)).collect();
    Ok(linear_slope(&lx, &ly))
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Polynomial extrapolation of `f(ε)` to `ε = 0` through all samples
/// (Neville's scheme). With a sample error of the form `c₁ε + c₂ε² + …`
/// this is Richardson extrapolation on a nonuniform ε ladder.
pub fn extrapolate_to_zero(eps: &[f64], values: &[f64]) -> Result<f64> {
    if eps.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: eps.len(),
            found: values.len(),
        });
    }
    if eps.is_empty() {
        return Err(Error::Domain {
            name: "sample count",
            value: 0.0,
            domain: "at least 1",
        });
    }
    let n = eps.len();
    for i in 0..n {
        for j in i + 1..n {
            if eps[i] == eps[j] {
                return Err(Error::Domain {
                    name: "epsilon",
                    value: eps[i],
                    domain: "distinct sample points",
                });
            }
        }
    }
    let mut p = values.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (eps[i + k] * p[i] - eps[i] * p[i + 1]) / (eps[i + k] - eps[i]);
        }
    }
    Ok(p[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_slope() {
        let xs = [0.1, 0.03, 0.01, 0.003];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powi(2)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        let inv: Vec<f64> = xs.iter().map(|x| 200.0 / (x * x)).collect();
        assert!((loglog_slope(&xs, &inv).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_rejects_bad_samples() {
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(loglog_slope(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn extrapolation_is_exact_for_polynomials() {
        let eps = [1e-2, 1e-3, 1e-4];
        let vals: Vec<f64> = eps.iter().map(|e| 0.75 - 3.0 * e + 11.0 * e * e).collect();
        assert!((extrapolate_to_zero(&eps, &vals).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_rejects_repeated_points() {
        assert!(extrapolate_to_zero(&[0.1, 0.1], &[1.0, 2.0]).is_err());
    }
}
