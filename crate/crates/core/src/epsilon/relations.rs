//! Mining correlation integrals: polynomial relations among simultaneous
//! ε-parameters (and optional context features) that vanish along play.
//!
//! Every present tick contributes one row of basis-monomial evaluations. The
//! right singular vectors of that sample matrix whose RMS image stays under
//! the tolerance are reported as relations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::trace::EpsilonTrace;
use crate::error::{GameError, Result};
use crate::linalg::right_singular_vectors_ascending;

pub const DEFAULT_RELATION_TOLERANCE: f64 = 1e-6;

/// Product of variables raised to powers; the empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub factors: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn var(i: usize) -> Self {
        Self { factors: vec![(i, 1)] }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().map(|&(i, p)| x[i].powi(p as i32)).product()
    }

    fn label(&self, names: &[String]) -> String {
        if self.factors.is_empty() {
            return "1".to_string();
        }
        self.factors
            .iter()
            .map(|&(i, p)| {
                let n = names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
                if p == 1 { n } else { format!("{n}^{p}") }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Variables are numbered trace by trace, component by component, followed
/// by the context features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub monomials: Vec<Monomial>,
}

impl BasisSpec {
    pub fn linear(vars: usize) -> Self {
        Self { monomials: (0..vars).map(Monomial::var).collect() }
    }

    pub fn affine(vars: usize) -> Self {
        let mut m = vec![Monomial::one()];
        m.extend((0..vars).map(Monomial::var));
        Self { monomials: m }
    }

    /// Constant, linear and all degree-2 monomials.
    pub fn quadratic(vars: usize) -> Self {
        let mut b = Self::affine(vars);
        for i in 0..vars {
            for j in i..vars {
                let factors = if i == j { vec![(i, 2)] } else { vec![(i, 1), (j, 1)] };
                b.monomials.push(Monomial { factors });
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationIntegral {
    /// Unit-norm coefficients over the basis monomials.
    pub coefficients: Vec<f64>,
    pub terms: Vec<String>,
    pub residual_rms: f64,
}

/// Sample rows shared by all traces (and the context, when given).
fn sample_rows(traces: &[EpsilonTrace], context: Option<&[Vec<f64>]>) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let len = traces[0].len();
    if traces.iter().any(|t| t.len() != len) || context.is_some_and(|c| c.len() != len) {
        return Err(GameError::Invalid("traces and context must share the tick grid".into()));
    }
    let mut names = Vec::new();
    for (r, t) in traces.iter().enumerate() {
        for k in 0..t.dim().unwrap_or(0) {
            names.push(format!("eps{}_{}", r + 1, k));
        }
    }
    if let Some(c) = context {
        for k in 0..c.first().map_or(0, Vec::len) {
            names.push(format!("ctx{k}"));
        }
    }
    let mut rows = Vec::new();
    'ticks: for j in 0..len {
        let mut row = Vec::with_capacity(names.len());
        for t in traces {
            match &t.values[j] {
                Some(v) => row.extend_from_slice(v),
                None => continue 'ticks,
            }
        }
        if let Some(c) = context {
            row.extend_from_slice(&c[j]);
        }
        if row.len() != names.len() {
            return Err(GameError::Invalid(format!("ragged sample at tick {j}")));
        }
        rows.push(row);
    }
    Ok((rows, names))
}

/// Relations `Σ c_m · monomial_m ≡ 0` with residual RMS ≤ `tolerance`,
/// ordered by residual. Coefficients have unit norm and a positive leading
/// non-zero entry.
pub fn find_correlation_integrals(
    traces: &[EpsilonTrace],
    context: Option<&[Vec<f64>]>,
    basis: &BasisSpec,
    tolerance: f64,
) -> Result<Vec<CorrelationIntegral>> {
    if traces.is_empty() {
        return Err(GameError::Empty("no ε traces".into()));
    }
    if basis.is_empty() {
        return Err(GameError::Invalid("basis has no monomials".into()));
    }
    let (rows, names) = sample_rows(traces, context)?;
    for m in &basis.monomials {
        if let Some(&(i, _)) = m.factors.iter().find(|(i, _)| *i >= names.len()) {
            return Err(GameError::Invalid(format!("basis names unknown variable {i}")));
        }
    }
    if rows.len() < basis.len() {
        return Err(GameError::UnderDetermined { required: basis.len(), available: rows.len() });
    }

    let n = rows.len();
    let sample = DMatrix::from_fn(n, basis.len(), |r, c| basis.monomials[c].eval(&rows[r]));
    let terms: Vec<String> = basis.monomials.iter().map(|m| m.label(&names)).collect();

    let mut found = Vec::new();
    for (_, v) in right_singular_vectors_ascending(&sample) {
        let image = &sample * &v;
        let rms = (image.norm_squared() / n as f64).sqrt();
        if rms > tolerance {
            continue;
        }
        let mut coefficients: Vec<f64> = v.iter().copied().collect();
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        coefficients.iter_mut().for_each(|c| *c /= norm);
        if let Some(lead) = coefficients.iter().find(|c| c.abs() > 1e-9) {
            if *lead < 0.0 {
                coefficients.iter_mut().for_each(|c| *c = -*c);
            }
        }
        found.push(CorrelationIntegral { coefficients, terms: terms.clone(), residual_rms: rms });
    }
    found.sort_by(|a, b| a.residual_rms.total_cmp(&b.residual_rms));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(values: Vec<f64>) -> EpsilonTrace {
        EpsilonTrace::from_values(0.0, 0.01, values.into_iter().map(|v| Some(vec![v])).collect())
    }

    #[test]
    fn constant_trace_yields_constancy_relation() {
        let c = 0.7;
        let found = find_correlation_integrals(&[trace(vec![c; 50])], None, &BasisSpec::affine(1), 1e-6).unwrap();
        assert_eq!(found.len(), 1);
        let r = &found[0];
        // ε − c = 0, normalized.
        let norm = (1.0 + c * c).sqrt();
        assert!((r.coefficients[0] + c / norm).abs() < 1e-9 || (r.coefficients[0] - c / norm).abs() < 1e-9);
        assert!((r.coefficients[1] / r.coefficients[0] + 1.0 / c).abs() < 1e-9);
        assert_eq!(r.terms, vec!["1".to_string(), "eps1_0".to_string()]);
    }

    #[test]
    fn too_few_samples_is_under_determined() {
        let err = find_correlation_integrals(&[trace(vec![1.0])], None, &BasisSpec::affine(1), 1e-6).unwrap_err();
        assert_eq!(err, GameError::UnderDetermined { required: 2, available: 1 });
    }

    #[test]
    fn quadratic_basis_size() {
        assert_eq!(BasisSpec::quadratic(2).len(), 1 + 2 + 3);
    }
}
