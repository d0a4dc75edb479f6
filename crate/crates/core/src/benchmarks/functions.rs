//! Analytic test functions, negated so optimizers maximize.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::FitnessVector;
use crate::individual::{BoundSpec, Bounds, Individual, ParamLayout};
use crate::optimizee::{EvalContext, Evaluation, Optimizee};

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
            .sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

/// Negated standard value of a named test function.
pub fn analytic_fitness(name: &str, x: &[f64]) -> Result<f64> {
    match name {
        "sphere" => Ok(-sphere(x)),
        "rastrigin" => Ok(-rastrigin(x)),
        "rosenbrock" => Ok(-rosenbrock(x)),
        other => Err(Error::config(format!("unknown analytic function {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticParams {
    pub dim: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        AnalyticParams { dim: 2, lower: None, upper: None }
    }
}

pub struct AnalyticOptimizee {
    name: String,
    dim: usize,
    lower: f64,
    upper: f64,
}

impl AnalyticOptimizee {
    pub fn new(name: &str, params: &AnalyticParams) -> Result<Self> {
        let (default_lower, default_upper) = match name {
            "sphere" | "rastrigin" => (-5.12, 5.12),
            "rosenbrock" => (-5.0, 10.0),
            other => return Err(Error::config(format!("unknown analytic function {other:?}"))),
        };
        if params.dim == 0 {
            return Err(Error::config("analytic function dimension must be >= 1"));
        }
        Ok(AnalyticOptimizee {
            name: name.to_string(),
            dim: params.dim,
            lower: params.lower.unwrap_or(default_lower),
            upper: params.upper.unwrap_or(default_upper),
        })
    }
}

impl Optimizee for AnalyticOptimizee {
    fn id(&self) -> &str {
        &self.name
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::new(vec![("x".to_string(), self.dim)]).expect("static layout")
    }

    fn bounds(&self) -> Bounds {
        Bounds::new(vec![BoundSpec::uniform("x", self.dim, self.lower, self.upper)])
            .expect("static bounds")
    }

    fn fitness_len(&self) -> usize {
        1
    }

    fn evaluate(&self, individual: &Individual, _ctx: &mut EvalContext<'_>) -> Result<Evaluation> {
        let x = individual
            .param("x")
            .ok_or_else(|| Error::evaluation("missing parameter x"))?;
        let value = analytic_fitness(&self.name, x)?;
        Ok(Evaluation::fitness_only(FitnessVector::scalar(value)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima_are_zero() {
        assert_eq!(sphere(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(rastrigin(&[0.0, 0.0]), 0.0);
        assert_eq!(rosenbrock(&[1.0, 1.0]), 0.0);
    }

    #[test]
    fn fitness_is_negated() {
        assert_eq!(analytic_fitness("sphere", &[2.0]).unwrap(), -4.0);
        assert!(analytic_fitness("rastrigin", &[0.5, 0.5]).unwrap() < 0.0);
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(analytic_fitness("ackley", &[0.0]), Err(Error::Config(_))));
    }
}
