//! Fitness vectors, weights, and scalarization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome status of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Ok,
    Failed,
    Timeout,
}

impl EvalStatus {
    pub fn is_ok(self) -> bool {
        self == EvalStatus::Ok
    }
}

/// Possibly multi-objective evaluation result of fixed length per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessVector(pub Vec<f64>);

impl FitnessVector {
    pub fn scalar(value: f64) -> Self {
        FitnessVector(vec![value])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Scalarization weights; length must equal the run's fitness length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FitnessWeights(pub Vec<f64>);

impl FitnessWeights {
    pub fn uniform(len: usize) -> Self {
        FitnessWeights(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Scalarizes a fitness vector as the dot product with the weights.
pub fn weight_fitness(fitness: &FitnessVector, weights: &FitnessWeights) -> Result<f64> {
    if fitness.len() != weights.len() {
        return Err(Error::config(format!(
            "fitness length {} does not match weight length {}",
            fitness.len(),
            weights.len()
        )));
    }
    if !fitness.is_finite() {
        return Err(Error::evaluation("fitness vector has non-finite components"));
    }
    Ok(fitness
        .0
        .iter()
        .zip(&weights.0)
        .map(|(f, w)| f * w)
        .sum())
}
