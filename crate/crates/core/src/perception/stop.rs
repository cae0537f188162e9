//! Stop functionals and their affine recalibration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, GameError, Result};

/// Scalar functional `F(ω, φ)` evaluated with ω frozen at the set start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopFunctional {
    /// `−‖φ[indices] − target‖`; all components when `indices` is absent.
    NegDistance {
        target: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
    },
    /// `phi_weights·φ + omega_weights·ω + constant`.
    Linear {
        phi_weights: Vec<f64>,
        #[serde(default)]
        omega_weights: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    Constant { value: f64 },
}

impl StopFunctional {
    pub fn evaluate(&self, omega: &[f64], phi: &[f64]) -> Result<f64> {
        let value = match self {
            Self::NegDistance { target, indices } => {
                let picked: Vec<f64> = match indices {
                    Some(idx) => idx
                        .iter()
                        .map(|&i| phi.get(i).copied().ok_or_else(|| GameError::Invalid(format!("state index {i} out of range"))))
                        .collect::<Result<_>>()?,
                    None => phi.to_vec(),
                };
                check_dim("stop target", target.len(), picked.len())?;
                -picked.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            }
            Self::Linear { phi_weights, omega_weights, constant } => {
                check_dim("stop state weights", phi_weights.len(), phi.len())?;
                let omega_term = if omega_weights.is_empty() {
                    0.0
                } else {
                    check_dim("stop ω weights", omega_weights.len(), omega.len())?;
                    omega_weights.iter().zip(omega).map(|(a, b)| a * b).sum()
                };
                phi_weights.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>() + omega_term + constant
            }
            Self::Constant { value } => *value,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(GameError::NonFinite("stop functional".into()))
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Self::NegDistance { target, .. } => target.clone(),
            Self::Linear { phi_weights, omega_weights, constant } => {
                let mut p = phi_weights.clone();
                p.extend_from_slice(omega_weights);
                p.push(*constant);
                p
            }
            Self::Constant { value } => vec![*value],
        }
    }

    fn set_params(&mut self, p: &[f64]) {
        match self {
            Self::NegDistance { target, .. } => target.copy_from_slice(p),
            Self::Linear { phi_weights, omega_weights, constant } => {
                let (a, rest) = p.split_at(phi_weights.len());
                let (b, c) = rest.split_at(omega_weights.len());
                phi_weights.copy_from_slice(a);
                omega_weights.copy_from_slice(b);
                *constant = c[0];
            }
            Self::Constant { value } => *value = p[0],
        }
    }
}

/// Affine update `θ ← Aθ + Mω + c` of the parameter vector θ = [F₀, functional parameters…].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RecalibrationMap {
    #[default]
    Identity,
    Affine {
        /// Row-major `θ × θ`.
        params: Vec<Vec<f64>>,
        /// Row-major `θ × ω`.
        omega: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

fn to_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

impl RecalibrationMap {
    /// `F₀ ← F₀ + gain·mean(ω)`, everything else unchanged.
    pub fn threshold_shift(param_dim: usize, omega_dim: usize, gain: f64) -> Self {
        let params = to_rows(&DMatrix::identity(param_dim, param_dim));
        let mut omega = vec![vec![0.0; omega_dim]; param_dim];
        omega[0].iter_mut().for_each(|w| *w = gain / omega_dim as f64);
        Self::Affine { params, omega, offset: vec![0.0; param_dim] }
    }

    fn parts(&self, param_dim: usize, omega_dim: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        match self {
            Self::Identity => Ok((
                DMatrix::identity(param_dim, param_dim),
                DMatrix::zeros(param_dim, omega_dim),
                DVector::zeros(param_dim),
            )),
            Self::Affine { params, omega, offset } => {
                check_dim("recalibration rows", param_dim, params.len())?;
                check_dim("recalibration ω rows", param_dim, omega.len())?;
                check_dim("recalibration offset", param_dim, offset.len())?;
                for r in params {
                    check_dim("recalibration columns", param_dim, r.len())?;
                }
                for r in omega {
                    check_dim("recalibration ω columns", omega_dim, r.len())?;
                }
                Ok((to_matrix(params, param_dim), to_matrix(omega, omega_dim), DVector::from_column_slice(offset)))
            }
        }
    }

    pub fn apply(&self, theta: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
        if matches!(self, Self::Identity) {
            return Ok(theta.to_vec());
        }
        let (a, m, c) = self.parts(theta.len(), omega.len())?;
        let next = a * DVector::from_column_slice(theta) + m * DVector::from_column_slice(omega) + c;
        Ok(next.iter().copied().collect())
    }

    /// The map equal to applying `self` and then `next` with the same ω.
    pub fn then(&self, next: &Self, param_dim: usize, omega_dim: usize) -> Result<Self> {
        if matches!((self, next), (Self::Identity, Self::Identity)) {
            return Ok(Self::Identity);
        }
        let (a1, m1, c1) = self.parts(param_dim, omega_dim)?;
        let (a2, m2, c2) = next.parts(param_dim, omega_dim)?;
        Ok(Self::Affine {
            params: to_rows(&(&a2 * &a1)),
            omega: to_rows(&(&a2 * m1 + m2)),
            offset: (&a2 * c1 + c2).iter().copied().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCriterion {
    pub functional: StopFunctional,
    pub threshold: f64,
    #[serde(default)]
    pub recalibration: RecalibrationMap,
}

impl StopCriterion {
    pub fn new(functional: StopFunctional, threshold: f64) -> Self {
        Self { functional, threshold, recalibration: RecalibrationMap::Identity }
    }

    pub fn with_recalibration(mut self, map: RecalibrationMap) -> Self {
        self.recalibration = map;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(GameError::Invalid("stop threshold must be finite".into()));
        }
        if let StopFunctional::NegDistance { target, indices: Some(idx) } = &self.functional {
            check_dim("stop target", idx.len(), target.len())?;
        }
        Ok(())
    }

    pub fn evaluate(&self, omega: &[f64], phi: &[f64]) -> Result<f64> {
        self.functional.evaluate(omega, phi)
    }

    /// `θ = [F₀, functional parameters…]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = vec![self.threshold];
        p.extend(self.functional.params());
        p
    }

    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        check_dim("stop parameters", self.params().len(), theta.len())?;
        let mut out = self.clone();
        out.threshold = theta[0];
        out.functional.set_params(&theta[1..]);
        out.validate()?;
        Ok(out)
    }
}

/// Updates the criterion's parameters with the new ω; the map itself is kept.
pub fn recalibrate_stop(criterion: &StopCriterion, omega_new: &[f64]) -> Result<StopCriterion> {
    let theta = criterion.recalibration.apply(&criterion.params(), omega_new)?;
    criterion.with_params(&theta)
}
