//! Finite-difference verification of analytic gradients.

use super::{Dataset, MlpModel};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]);
    fn loss(&self) -> f64;
    fn gradient(&self) -> Vec<f64>;
}

/// Mean cross-entropy of a model over a fixed batch.
pub struct MlpObjective<'a> {
    pub model: MlpModel,
    pub data: &'a Dataset,
    indices: Vec<usize>,
}

impl<'a> MlpObjective<'a> {
    pub fn new(model: MlpModel, data: &'a Dataset) -> Self {
        MlpObjective {
            model,
            indices: (0..data.len()).collect(),
            data,
        }
    }
}

impl Objective for MlpObjective<'_> {
    fn params(&self) -> Vec<f64> {
        self.model.params()
    }

    fn set_params(&mut self, params: &[f64]) {
        self.model.set_params(params);
    }

    fn loss(&self) -> f64 {
        self.model.loss(self.data, &self.indices)
    }

    fn gradient(&self) -> Vec<f64> {
        self.model.loss_and_grad(self.data, &self.indices).1.flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// max |a - n| / max(|a|, |n|, 1e-6) over all parameters
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub n_params: usize,
}

const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient against central differences with the
/// given step, parameter by parameter. Parameters are restored afterwards.
pub fn grad_check<O: Objective>(objective: &mut O, step: f64) -> GradCheckReport {
    let base = objective.params();
    let analytic = objective.gradient();
    let mut probe = base.clone();
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for i in 0..base.len() {
        probe[i] = base[i] + step;
        objective.set_params(&probe);
        let up = objective.loss();
        probe[i] = base[i] - step;
        objective.set_params(&probe);
        let down = objective.loss();
        probe[i] = base[i];

        let numeric = (up - down) / (2.0 * step);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(rel);
    }
    objective.set_params(&base);
    GradCheckReport {
        max_relative_error: max_rel,
        max_absolute_error: max_abs,
        n_params: base.len(),
    }
}
