//! Weighted least squares through the normal equations.

use crate::error::{Error, Result};
use crate::linalg::{equilibrated_condition, inverse, solve, Matrix};

/// Gram matrices whose unit-diagonal condition number exceeds this are
/// treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A weighted regression problem. Rows stay in time order; rows with zero
/// weight (the transition window) are carried along so that lagged score
/// products in the HAC step see the true time spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsDesign {
    pub names: Vec<String>,
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    /// Unweighted residuals `y - x'b`, one per design row.
    pub residuals: Vec<f64>,
    pub weights: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// `sum_t w_t x_t x_t'`.
    pub gram: Matrix,
    pub gram_inv: Matrix,
}

impl WlsDesign {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_coef(&self) -> usize {
        self.names.len()
    }

    pub fn fit(&self) -> Result<WlsFit> {
        wls(self)
    }
}

impl WlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coef[i])
    }
}

pub fn wls(d: &WlsDesign) -> Result<WlsFit> {
    let k = d.n_coef();
    if d.x.len() != d.y.len() || d.weights.len() != d.y.len() {
        return Err(Error::Validation("regression design has inconsistent row counts".into()));
    }
    if d.x.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("regression row width does not match coefficient count".into()));
    }
    let mut gram = Matrix::zeros(k, k);
    let mut xty = vec![0.0; k];
    for ((row, &y), &w) in d.x.iter().zip(&d.y).zip(&d.weights) {
        if w == 0.0 {
            continue;
        }
        for i in 0..k {
            xty[i] += w * row[i] * y;
            for j in 0..=i {
                gram[(i, j)] += w * row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    let cond = equilibrated_condition(&gram);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::Numeric(format!(
            "weighted Gram matrix is singular or ill-conditioned (condition number {cond:.3e}); regressors [{}] are collinear",
            d.names.join(", ")
        )));
    }
    let coef = solve(&gram, &xty)?;
    let gram_inv = inverse(&gram)?;
    let residuals = d
        .x
        .iter()
        .zip(&d.y)
        .map(|(row, y)| y - row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok(WlsFit {
        names: d.names.clone(),
        coef,
        residuals,
        weights: d.weights.clone(),
        x: d.x.clone(),
        gram,
        gram_inv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x: Vec<Vec<f64>> = (0..6).map(|t| vec![1.0, t as f64]).collect();
        let y: Vec<f64> = (0..6).map(|t| 2.0 - 0.5 * t as f64).collect();
        let d = WlsDesign {
            names: vec!["a".into(), "b".into()],
            y,
            x,
            weights: vec![1.0, 2.0, 0.0, 1.0, 3.0, 1.0],
        };
        let f = d.fit().unwrap();
        assert!((f.coef[0] - 2.0).abs() < 1e-12 && (f.coef[1] + 0.5).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
        assert_eq!(f.coefficient("b"), Some(f.coef[1]));
    }

    #[test]
    fn collinear_design_is_numeric_error() {
        let x: Vec<Vec<f64>> = (0..5).map(|t| vec![1.0, 3.0, t as f64]).collect();
        let d = WlsDesign {
            names: vec!["a".into(), "b".into(), "c".into()],
            y: vec![0.0; 5],
            x,
            weights: vec![1.0; 5],
        };
        assert!(matches!(d.fit(), Err(Error::Numeric(_))));
    }
}
