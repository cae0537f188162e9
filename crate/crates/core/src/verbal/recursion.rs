//! Fitting the dialogue recursion `ωₙ = Ω(ω_{n−1}, vₙ; φ̄ₙ)` as an affine map,
//! and the verbalizability score derived from its residual.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::functionals::{DialogueState, Window};
use crate::error::{check_dim, GameError, Result};
use crate::linalg::min_norm_lstsq_multi;

pub const DEFAULT_VERBALIZABLE_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionModel {
    pub omega_dim: usize,
    pub v_dim: usize,
    pub phi_dim: usize,
    /// `omega_dim` rows over the inputs `[ω_{n−1}; vₙ; φ̄ₙ; 1]`.
    pub coefficients: Vec<Vec<f64>>,
    /// ‖ωₙ − Ω̂(…)‖ for n = 1, 2, …
    pub step_residuals: Vec<f64>,
    pub total_sq_residual: f64,
    pub nrmse: f64,
}

impl RecursionModel {
    fn block(&self, from: usize, width: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.omega_dim, width, |r, c| self.coefficients[r][from + c])
    }

    pub fn omega_gain(&self) -> DMatrix<f64> {
        self.block(0, self.omega_dim)
    }

    pub fn v_gain(&self) -> DMatrix<f64> {
        self.block(self.omega_dim, self.v_dim)
    }

    pub fn phi_gain(&self) -> DMatrix<f64> {
        self.block(self.omega_dim + self.v_dim, self.phi_dim)
    }

    pub fn intercept(&self) -> DVector<f64> {
        let last = self.omega_dim + self.v_dim + self.phi_dim;
        DVector::from_iterator(self.omega_dim, self.coefficients.iter().map(|r| r[last]))
    }

    pub fn predict(&self, prev_omega: &[f64], v: &[f64], mean_phi: &[f64]) -> Vec<f64> {
        let x = inputs(prev_omega, v, mean_phi);
        self.coefficients.iter().map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Total squared residual of `coefficients` on the given data.
    pub fn total_residual_with(coefficients: &[Vec<f64>], states: &[DialogueState], mean_phi: &[Vec<f64>]) -> f64 {
        (1..states.len())
            .map(|n| {
                let x = inputs(&states[n - 1].omega, &states[n].v, &mean_phi[n]);
                coefficients
                    .iter()
                    .zip(&states[n].omega)
                    .map(|(row, y)| (y - row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }
}

fn inputs(prev_omega: &[f64], v: &[f64], mean_phi: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(prev_omega.len() + v.len() + mean_phi.len() + 1);
    x.extend_from_slice(prev_omega);
    x.extend_from_slice(v);
    x.extend_from_slice(mean_phi);
    x.push(1.0);
    x
}

/// Least-squares affine fit of the recursion from states and window means of φ.
pub fn fit_recursion_with_context(states: &[DialogueState], mean_phi: &[Vec<f64>]) -> Result<RecursionModel> {
    check_dim("window φ means", states.len(), mean_phi.len())?;
    let first = states.first().ok_or_else(|| GameError::Empty("dialogue states".into()))?;
    let (dw, dv, dp) = (first.omega.len(), first.v.len(), mean_phi[0].len());
    for (s, m) in states.iter().zip(mean_phi) {
        check_dim("ω dimension", dw, s.omega.len())?;
        check_dim("v dimension", dv, s.v.len())?;
        check_dim("φ̄ dimension", dp, m.len())?;
    }
    let width = dw + dv + dp + 1;
    let required = width.max(2) + 1;
    let steps = states.len().saturating_sub(1);
    if steps < required.max(3) {
        return Err(GameError::UnderDetermined { required: required.max(3), available: steps });
    }

    let x = DMatrix::from_fn(steps, width, |r, c| inputs(&states[r].omega, &states[r + 1].v, &mean_phi[r + 1])[c]);
    let y = DMatrix::from_fn(steps, dw, |r, c| states[r + 1].omega[c]);
    let beta = min_norm_lstsq_multi(&x, &y);
    let coefficients: Vec<Vec<f64>> = (0..dw).map(|o| beta.column(o).iter().copied().collect()).collect();

    let fitted = &x * &beta;
    let step_residuals: Vec<f64> = (0..steps).map(|r| (y.row(r) - fitted.row(r)).norm()).collect();
    let total_sq_residual: f64 = step_residuals.iter().map(|r| r * r).sum();
    let target_mean = DVector::from_iterator(dw, (0..dw).map(|c| y.column(c).mean()));
    let spread: f64 = (0..steps).map(|r| (y.row(r).transpose() - &target_mean).norm_squared()).sum();
    let nrmse = if spread > 1e-24 {
        (total_sq_residual / spread).sqrt()
    } else if total_sq_residual <= 1e-24 {
        0.0
    } else {
        1.0
    };

    Ok(RecursionModel { omega_dim: dw, v_dim: dv, phi_dim: dp, coefficients, step_residuals, total_sq_residual, nrmse })
}

pub fn fit_recursion(states: &[DialogueState], windows: &[Window]) -> Result<RecursionModel> {
    check_dim("windows", states.len(), windows.len())?;
    let means: Vec<Vec<f64>> = windows.iter().map(Window::mean_phi).collect();
    fit_recursion_with_context(states, &means)
}

/// `clamp(1 − normalized RMSE, 0, 1)`.
pub fn verbalizability_score(model: &RecursionModel) -> f64 {
    (1.0 - model.nrmse).clamp(0.0, 1.0)
}
