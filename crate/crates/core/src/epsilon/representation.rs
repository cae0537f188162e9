//! ε-representations of feedback controls: a declared map
//! `(u°, jet; ε) ↦ u` whose unknowns are collapsed into the parameters ε.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, GameError, Result};
use crate::game::jet::Jet;
use crate::linalg::min_norm_lstsq;

/// Default evaluation budget for non-affine inversion, per sample.
pub const DEFAULT_EVAL_BUDGET: usize = 200;

/// One coordinate of the feature vector `z = [jet; u°; 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// Component `k` of the `order`-th derivative of φ.
    Jet { order: usize, k: usize },
    Pure(usize),
    One,
}

/// Basis functions affine in the features: column `c` of `B` is
/// `columns[c] · z`, and the offset is `offset · z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBasis {
    pub state_dim: usize,
    pub jet_order: usize,
    pub control_dim: usize,
    /// `epsilon_dim` matrices of shape `control_dim × feature_width`.
    pub columns: Vec<Vec<Vec<f64>>>,
    /// Optional ε-independent term, `control_dim × feature_width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<Vec<f64>>>,
}

impl AffineBasis {
    pub fn zeros(state_dim: usize, jet_order: usize, control_dim: usize, epsilon_dim: usize) -> Self {
        let width = state_dim * (jet_order + 1) + control_dim + 1;
        Self {
            state_dim,
            jet_order,
            control_dim,
            columns: vec![vec![vec![0.0; width]; control_dim]; epsilon_dim],
            offset: None,
        }
    }

    /// `u = u° + ε`, one parameter per control component.
    pub fn additive(state_dim: usize, jet_order: usize, control_dim: usize) -> Self {
        let mut basis = Self::zeros(state_dim, jet_order, control_dim, control_dim);
        for k in 0..control_dim {
            basis = basis.entry(k, k, Feature::One, 1.0);
        }
        basis
    }

    pub fn feature_width(&self) -> usize {
        self.state_dim * (self.jet_order + 1) + self.control_dim + 1
    }

    pub fn epsilon_dim(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_index(&self, feature: Feature) -> usize {
        match feature {
            Feature::Jet { order, k } => order * self.state_dim + k,
            Feature::Pure(k) => self.state_dim * (self.jet_order + 1) + k,
            Feature::One => self.feature_width() - 1,
        }
    }

    /// Adds `value · feature` to row `row` of basis column `column`.
    pub fn entry(mut self, column: usize, row: usize, feature: Feature, value: f64) -> Self {
        let f = self.feature_index(feature);
        self.columns[column][row][f] += value;
        self
    }

    /// Adds `value · feature` to row `row` of the offset term.
    pub fn offset_entry(mut self, row: usize, feature: Feature, value: f64) -> Self {
        let f = self.feature_index(feature);
        let width = self.feature_width();
        let offset = self
            .offset
            .get_or_insert_with(|| vec![vec![0.0; width]; self.control_dim]);
        offset[row][f] += value;
        self
    }

    fn features(&self, pure: &[f64], jet: &Jet) -> Result<Vec<f64>> {
        check_dim("pure control", self.control_dim, pure.len())?;
        check_dim("jet order", self.jet_order, jet.order)?;
        check_dim("jet state", self.state_dim, jet.state().len())?;
        let mut z = jet.stacked();
        z.extend_from_slice(pure);
        z.push(1.0);
        Ok(z)
    }

    /// Evaluates `(B, b₀)` at the given inputs.
    pub fn evaluate(&self, pure: &[f64], jet: &Jet) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let z = self.features(pure, jet)?;
        let dot = |row: &[f64]| row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let mut b = DMatrix::zeros(self.control_dim, self.epsilon_dim());
        for (c, col) in self.columns.iter().enumerate() {
            for (r, row) in col.iter().enumerate() {
                b[(r, c)] = dot(row);
            }
        }
        let offset = match &self.offset {
            Some(rows) => DVector::from_iterator(self.control_dim, rows.iter().map(|r| dot(r))),
            None => DVector::zeros(self.control_dim),
        };
        Ok((b, offset))
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(GameError::Invalid("ε dimension must be at least 1".into()));
        }
        let width = self.feature_width();
        for m in self.columns.iter().chain(self.offset.iter()) {
            check_dim("basis rows", self.control_dim, m.len())?;
            for row in m {
                check_dim("basis row width", width, row.len())?;
                check_finite("basis", row)?;
            }
        }
        Ok(())
    }
}

/// Interface shared by all ε-representations.
pub trait Representation {
    fn epsilon_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// `R(u°, jet; ε)`.
    fn apply(&self, pure: &[f64], jet: &Jet, epsilon: &[f64]) -> Result<Vec<f64>>;

    /// For representations affine in ε, the pair `(B, b₀)` with
    /// `u = u° + b₀ + B·ε`.
    fn affine_parts(&self, _pure: &[f64], _jet: &Jet) -> Option<Result<(DMatrix<f64>, DVector<f64>)>> {
        None
    }
}

/// Declared, serializable ε-representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EpsilonRepresentation {
    /// `u = u° + b₀(z) + B(z)·ε`.
    Affine { basis: AffineBasis },
    /// `u = u° + b₀(z) + s·tanh(B(z)·ε / s)`, a bounded non-affine coupling.
    Saturating { basis: AffineBasis, scale: f64 },
}

impl EpsilonRepresentation {
    pub fn affine(basis: AffineBasis) -> Self {
        Self::Affine { basis }
    }

    pub fn basis(&self) -> &AffineBasis {
        match self {
            Self::Affine { basis } | Self::Saturating { basis, .. } => basis,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Self::Affine { .. })
    }

    pub fn validate(&self) -> Result<()> {
        self.basis().validate()?;
        if let Self::Saturating { scale, .. } = self {
            if !(*scale > 0.0 && scale.is_finite()) {
                return Err(GameError::Invalid("saturation scale must be positive".into()));
            }
        }
        Ok(())
    }
}

impl Representation for EpsilonRepresentation {
    fn epsilon_dim(&self) -> usize {
        self.basis().epsilon_dim()
    }

    fn control_dim(&self) -> usize {
        self.basis().control_dim
    }

    fn apply(&self, pure: &[f64], jet: &Jet, epsilon: &[f64]) -> Result<Vec<f64>> {
        check_dim("ε", self.epsilon_dim(), epsilon.len())?;
        let (b, offset) = self.basis().evaluate(pure, jet)?;
        let coupling = &b * DVector::from_column_slice(epsilon);
        let coupling: Vec<f64> = match self {
            Self::Affine { .. } => coupling.iter().copied().collect(),
            Self::Saturating { scale, .. } => coupling.iter().map(|v| scale * (v / scale).tanh()).collect(),
        };
        Ok(pure
            .iter()
            .zip(offset.iter())
            .zip(coupling)
            .map(|((p, o), c)| p + o + c)
            .collect())
    }

    fn affine_parts(&self, pure: &[f64], jet: &Jet) -> Option<Result<(DMatrix<f64>, DVector<f64>)>> {
        match self {
            Self::Affine { basis } => Some(basis.evaluate(pure, jet)),
            Self::Saturating { .. } => None,
        }
    }
}

/// Outcome of inverting a representation at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonEstimate {
    pub epsilon: Vec<f64>,
    pub residual: f64,
    /// False when the evaluation budget ran out before convergence.
    pub converged: bool,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Recovers ε from an observed realized control.
///
/// Affine representations use the minimal-norm least-squares solution of
/// `B·ε = u − u° − b₀`. Other representations run a derivative-free
/// coordinate search from ε = 0 with `eval_budget` evaluations.
pub fn estimate_epsilon<R: Representation + ?Sized>(
    representation: &R,
    observed: &[f64],
    pure: &[f64],
    jet: &Jet,
    eval_budget: usize,
) -> Result<EpsilonEstimate> {
    check_dim("observed control", representation.control_dim(), observed.len())?;
    check_finite("observed control", observed)?;
    check_finite("pure control", pure)?;
    for v in &jet.values {
        check_finite("jet", v)?;
    }

    if let Some(parts) = representation.affine_parts(pure, jet) {
        let (b, offset) = parts?;
        let rhs = DVector::from_iterator(
            observed.len(),
            observed.iter().zip(pure).zip(offset.iter()).map(|((u, p), o)| u - p - o),
        );
        let eps = min_norm_lstsq(&b, &rhs);
        let epsilon: Vec<f64> = eps.iter().copied().collect();
        let fitted = representation.apply(pure, jet, &epsilon)?;
        return Ok(EpsilonEstimate { residual: distance(observed, &fitted), epsilon, converged: true });
    }

    coordinate_search(representation, observed, pure, jet, eval_budget)
}

fn coordinate_search<R: Representation + ?Sized>(
    representation: &R,
    observed: &[f64],
    pure: &[f64],
    jet: &Jet,
    eval_budget: usize,
) -> Result<EpsilonEstimate> {
    const MIN_STEP: f64 = 1e-12;
    const TARGET: f64 = 1e-13;

    let dim = representation.epsilon_dim();
    let mut best = vec![0.0; dim];
    let mut best_res = distance(observed, &representation.apply(pure, jet, &best)?);
    let mut evals = 1;
    let mut step = 1.0;
    let mut converged = best_res <= TARGET;

    while !converged && evals < eval_budget {
        let mut improved = false;
        'coords: for i in 0..dim {
            for sign in [1.0, -1.0] {
                if evals >= eval_budget {
                    break 'coords;
                }
                let mut trial = best.clone();
                trial[i] += sign * step;
                let res = distance(observed, &representation.apply(pure, jet, &trial)?);
                evals += 1;
                if res < best_res {
                    best = trial;
                    best_res = res;
                    improved = true;
                    break;
                }
            }
        }
        if best_res <= TARGET {
            converged = true;
        } else if !improved {
            step *= 0.5;
            if step < MIN_STEP {
                converged = true;
            }
        }
    }

    Ok(EpsilonEstimate { epsilon: best, residual: best_res, converged })
}
