//! Central finite-difference check of analytic parameter gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Parameter;
use crate::error::{Error, Result};

/// A scalar function of a parameter set.
pub trait Objective {
    fn parameters(&self) -> &[Parameter];
    fn parameters_mut(&mut self) -> &mut [Parameter];
    /// Returns the objective value. With `with_grad`, parameter gradients are
    /// reset and refilled with the analytic gradient at the current point.
    fn evaluate(&mut self, with_grad: bool) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub step: f64,
    /// Checks a seeded random subset of entries per parameter when set.
    pub max_entries_per_parameter: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_entries_per_parameter: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max over checked entries of `|analytic − numeric| / max(1, |numeric|)`
    pub max_error: f64,
    pub worst_parameter: String,
    pub worst_index: usize,
    pub entries_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error < tolerance
    }
}

pub fn grad_check<O: Objective + ?Sized>(objective: &mut O, config: &GradCheckConfig) -> Result<GradCheckReport> {
    objective.evaluate(true)?;
    let analytic: Vec<Vec<f64>> = objective
        .parameters()
        .iter()
        .map(|p| p.grad().data().to_vec())
        .collect();
    for (p, g) in objective.parameters().iter().zip(&analytic) {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "analytic gradient of '{}' is non-finite at index {i}",
                p.name()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        max_error: 0.0,
        worst_parameter: String::new(),
        worst_index: 0,
        entries_checked: 0,
    };
    let h = config.step;
    for (pi, grad) in analytic.iter().enumerate() {
        let n = grad.len();
        let mut indices: Vec<usize> = match config.max_entries_per_parameter {
            Some(k) if k < n => rand::seq::index::sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        indices.sort_unstable();
        for i in indices {
            let original = objective.parameters()[pi].value().data()[i];
            objective.parameters_mut()[pi].value_mut().data_mut()[i] = original + h;
            let plus = objective.evaluate(false);
            objective.parameters_mut()[pi].value_mut().data_mut()[i] = original - h;
            let minus = objective.evaluate(false);
            objective.parameters_mut()[pi].value_mut().data_mut()[i] = original;
            let (plus, minus) = (plus?, minus?);
            let numeric = (plus - minus) / (2.0 * h);
            if !numeric.is_finite() {
                return Err(Error::Numeric(format!(
                    "numeric gradient of '{}' is non-finite at index {i}",
                    objective.parameters()[pi].name()
                )));
            }
            let err = (grad[i] - numeric).abs() / numeric.abs().max(1.0);
            report.entries_checked += 1;
            if err > report.max_error || report.worst_parameter.is_empty() {
                report.max_error = err;
                report.worst_parameter = objective.parameters()[pi].name().to_string();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
