use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{DenseMatrix, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMode {
    /// Worker `n` evaluates at `x = n`.
    Integer,
    /// Chebyshev nodes of the first kind on `[-1, 1]`.
    Chebyshev,
}

/// Distinct evaluation points, one per worker (or per subtask for sum-rate codes).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPointSet {
    points: Vec<f64>,
    mode: PointMode,
}

impl EvalPointSet {
    pub fn new(mode: PointMode, count: usize) -> Self {
        let points = match mode {
            PointMode::Integer => (1..=count).map(|n| n as f64).collect(),
            PointMode::Chebyshev => (1..=count)
                .map(|i| ((2 * i - 1) as f64 * PI / (2 * count) as f64).cos())
                .collect(),
        };
        Self { points, mode }
    }

    pub fn integer(count: usize) -> Self {
        Self::new(PointMode::Integer, count)
    }

    pub fn chebyshev(count: usize) -> Self {
        Self::new(PointMode::Chebyshev, count)
    }

    pub fn mode(&self) -> PointMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    /// Point for 1-based index `n`.
    pub fn point(&self, n: usize) -> f64 {
        self.points[n - 1]
    }

    /// Points converted into the backend scalar type (exact for rationals).
    pub fn values<T: Scalar>(&self) -> Vec<T> {
        self.points
            .iter()
            .map(|&p| T::from_f64(p).expect("evaluation points are finite"))
            .collect()
    }
}

fn check_distinct<T: Scalar>(points: &[T]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::DuplicatePoint(i, j));
            }
        }
    }
    Ok(())
}

/// Inverse Vandermonde matrix of `points`, row `m` giving the weights that
/// map evaluations to the coefficient of `x^m`.
///
/// Column `s` holds the monomial coefficients of the Lagrange basis
/// polynomial for `points[s]`.
pub fn interpolation_weights<T: Scalar>(points: &[T]) -> Result<Vec<Vec<T>>> {
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one point required".into(),
        ));
    }
    check_distinct(points)?;
    let k = points.len();
    let mut weights = vec![vec![T::zero(); k]; k];
    for (s, xs) in points.iter().enumerate() {
        // numerator prod_{t != s} (x - x_t), lowest degree first
        let mut poly = vec![T::one()];
        let mut denom = T::one();
        for (t, xt) in points.iter().enumerate() {
            if t == s {
                continue;
            }
            let mut next = vec![T::zero(); poly.len() + 1];
            for (d, c) in poly.iter().enumerate() {
                next[d + 1] = next[d + 1].clone() + c.clone();
                next[d] = next[d].clone() - c.clone() * xt.clone();
            }
            poly = next;
            denom = denom * (xs.clone() - xt.clone());
        }
        for (m, c) in poly.into_iter().enumerate() {
            weights[m][s] = c / denom.clone();
        }
    }
    Ok(weights)
}

/// Recover the `k` coefficient matrices of a degree-`(k-1)` matrix
/// polynomial from its evaluations.
///
/// Extra evaluations beyond `k` are dropped, keeping the `k` smallest points.
pub fn interpolate_matrix_poly<T: Scalar>(
    evals: &[(T, &DenseMatrix<T>)],
    k: usize,
) -> Result<Vec<DenseMatrix<T>>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "polynomial must have at least one coefficient".into(),
        ));
    }
    if evals.len() < k {
        return Err(Error::NotEnoughResults {
            have: evals.len(),
            need: k,
        });
    }
    let all_points: Vec<T> = evals.iter().map(|(p, _)| p.clone()).collect();
    check_distinct(&all_points)?;
    let shape = evals[0].1.shape();
    if let Some((_, m)) = evals.iter().find(|(_, m)| m.shape() != shape) {
        return Err(Error::DimensionMismatch(format!(
            "evaluation of shape {:?} differs from {:?}",
            m.shape(),
            shape
        )));
    }

    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&i, &j| {
        evals[i]
            .0
            .partial_cmp(&evals[j].0)
            .expect("finite points are ordered")
    });
    order.truncate(k);

    let points: Vec<T> = order.iter().map(|&i| evals[i].0.clone()).collect();
    let weights = interpolation_weights(&points)?;
    let coeffs = weights
        .iter()
        .map(|row| {
            let mut acc = DenseMatrix::zeros(shape.0, shape.1);
            for (w, &idx) in row.iter().zip(&order) {
                if !w.is_zero() {
                    acc.add_scaled(w, evals[idx].1).expect("shapes checked");
                }
            }
            acc
        })
        .collect();
    Ok(coeffs)
}
