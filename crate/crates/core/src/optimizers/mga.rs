//! Multi-gradient ascent over parameter ranges.
//!
//! Each individual is a set of per-axis [low, high] ranges. The optimizee
//! expands a range set into a grid of parameter combinations, evaluates all
//! of them, and returns one fitness per combination. The optimizer pairs
//! fitnesses back with their grid points, moves toward the best point with a
//! regression-estimated gradient step, and emits a narrowed range around it.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::gradient::estimate_gradient;
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgaParams {
    pub learning_rate: f64,
    /// Half-width multiplier applied each generation (the "compress" step).
    pub shrink: f64,
    /// Grid resolution per axis inside every range.
    pub resolution: usize,
}

impl Default for MgaParams {
    fn default() -> Self {
        MgaParams { learning_rate: 0.01, shrink: 0.5, resolution: 16 }
    }
}

/// One independently ascending batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgaBatch {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub best_point: Vec<f64>,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MgaState {
    pub batches: Vec<MgaBatch>,
}

/// Enumerates the grid spanned by per-axis (low, high) ranges in row-major
/// order of axis declaration (first axis slowest), endpoints included.
pub fn expand_range_grid(ranges: &[(f64, f64)], resolution: usize) -> Vec<Vec<f64>> {
    let axes = ranges.len();
    let total = resolution.pow(axes as u32);
    let axis_value = |axis: usize, k: usize| -> f64 {
        let (low, high) = ranges[axis];
        if resolution == 1 {
            low
        } else {
            low + k as f64 * (high - low) / (resolution - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(total);
    for i in 0..total {
        let mut point = vec![0.0; axes];
        let mut rem = i;
        for axis in (0..axes).rev() {
            point[axis] = axis_value(axis, rem % resolution);
            rem /= resolution;
        }
        points.push(point);
    }
    points
}

/// One multi-gradient ascent update across all batches. Each batch pairs a
/// grid of parameter combinations with one fitness per combination; the
/// result is the narrowed (center, half-width) range per batch.
pub fn mga_step(
    batches: &[(Vec<Vec<f64>>, Vec<f64>)],
    state: &mut MgaState,
    params: &MgaParams,
    lower: &[f64],
    upper: &[f64],
) -> Result<()> {
    if batches.len() != state.batches.len() {
        return Err(Error::step("batch count does not match optimizer state"));
    }
    for (b, (points, fitnesses)) in batches.iter().enumerate() {
        if points.is_empty() || points.len() != fitnesses.len() {
            return Err(Error::step("empty or mismatched fitness batch"));
        }
        let batch = &mut state.batches[b];

        let mut best = 0usize;
        for (k, f) in fitnesses.iter().enumerate() {
            if *f > fitnesses[best] {
                best = k;
            }
        }
        if fitnesses[best] >= batch.best_fitness || batch.best_point.is_empty() {
            batch.best_fitness = fitnesses[best];
            batch.best_point = points[best].clone();
        }

        // Single-point batches carry no slope information; recenter only.
        let gradient = if points.len() > points[0].len() {
            estimate_gradient(points, fitnesses).unwrap_or_else(|_| vec![0.0; points[0].len()])
        } else {
            vec![0.0; points[0].len()]
        };

        for d in 0..batch.center.len() {
            let moved = batch.best_point[d] + params.learning_rate * gradient[d];
            batch.center[d] = moved.clamp(lower[d], upper[d]);
            batch.half_width[d] *= params.shrink;
        }
    }
    Ok(())
}

pub struct MgaOptimizer {
    params: MgaParams,
    batches: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: MgaState,
}

impl MgaOptimizer {
    /// `lower`/`upper` are the bounds of the underlying axes (dimension =
    /// number of axes, i.e. half the flattened range-individual dimension).
    pub fn new(params: MgaParams, batches: usize, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if batches == 0 {
            return Err(Error::config("mga requires at least one batch"));
        }
        if params.resolution == 0 {
            return Err(Error::config("mga resolution must be >= 1"));
        }
        if !(params.shrink > 0.0 && params.shrink <= 1.0) {
            return Err(Error::config("mga shrink must be in (0, 1]"));
        }
        Ok(MgaOptimizer { params, batches, lower, upper, state: MgaState::default() })
    }

    pub fn state(&self) -> &MgaState {
        &self.state
    }

    pub fn resolution(&self) -> usize {
        self.params.resolution
    }

    fn range_vec(batch: &MgaBatch, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        let mut flat = Vec::with_capacity(batch.center.len() * 2);
        for d in 0..batch.center.len() {
            let low = (batch.center[d] - batch.half_width[d]).max(lower[d]);
            let high = (batch.center[d] + batch.half_width[d]).min(upper[d]);
            flat.push(low);
            flat.push(high);
        }
        flat
    }
}

impl Optimizer for MgaOptimizer {
    fn id(&self) -> &'static str {
        "mga"
    }

    fn initialize(&mut self, _init: &mut InitArgs<'_>) -> Result<()> {
        self.state.batches = (0..self.batches)
            .map(|_| {
                let (center, half_width): (Vec<f64>, Vec<f64>) = self
                    .lower
                    .iter()
                    .zip(&self.upper)
                    .map(|(&l, &u)| ((l + u) / 2.0, (u - l) / 2.0))
                    .unzip();
                MgaBatch { center, half_width, best_point: Vec::new(), best_fitness: f64::NEG_INFINITY }
            })
            .collect();
        Ok(())
    }

    fn ask(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.batches.is_empty() {
            return Err(Error::step("mga asked before initialization"));
        }
        // Secondary batches jitter their first range so they explore
        // different sub-regions from the start.
        let mut out = Vec::with_capacity(self.state.batches.len());
        for (b, batch) in self.state.batches.iter_mut().enumerate() {
            if b > 0 && batch.best_point.is_empty() {
                for d in 0..batch.center.len() {
                    let full = (self.upper[d] - self.lower[d]) / 2.0;
                    batch.half_width[d] = full / 2.0;
                    batch.center[d] = rng.random_range(
                        (self.lower[d] + batch.half_width[d])..=(self.upper[d] - batch.half_width[d]),
                    );
                }
            }
            out.push(Self::range_vec(batch, &self.lower, &self.upper));
        }
        Ok(out)
    }

    fn tell(&mut self, population: &EvaluatedPopulation, _rng: &mut dyn RngCore) -> Result<()> {
        population.require_ok()?;
        let expected = self.params.resolution.pow(self.lower.len() as u32);
        let mut batches = Vec::with_capacity(population.entries.len());
        for entry in &population.entries {
            if !entry.is_ok() {
                return Err(Error::step("mga requires every batch evaluation to succeed"));
            }
            let flat = entry.individual.flatten();
            let ranges: Vec<(f64, f64)> =
                flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
            if entry.fitness.len() != expected {
                return Err(Error::step(format!(
                    "batch fitness length {} does not match grid size {expected}",
                    entry.fitness.len()
                )));
            }
            batches.push((expand_range_grid(&ranges, self.params.resolution), entry.fitness.0.clone()));
        }
        mga_step(&batches, &mut self.state, &self.params, &self.lower, &self.upper)
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Mga(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Mga(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("mga")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_batch_recenters_on_that_point() {
        let mut state = MgaState {
            batches: vec![MgaBatch {
                center: vec![0.0],
                half_width: vec![1.0],
                best_point: Vec::new(),
                best_fitness: f64::NEG_INFINITY,
            }],
        };
        let params = MgaParams { resolution: 1, ..MgaParams::default() };
        let batches = vec![(vec![vec![0.7]], vec![0.9])];
        mga_step(&batches, &mut state, &params, &[-2.0], &[2.0]).unwrap();
        assert_abs_diff_eq!(state.batches[0].center[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(state.batches[0].half_width[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn batches_update_independently() {
        let mk = |c: f64| MgaBatch {
            center: vec![c],
            half_width: vec![1.0],
            best_point: Vec::new(),
            best_fitness: f64::NEG_INFINITY,
        };
        let mut state = MgaState { batches: vec![mk(0.0), mk(0.0), mk(0.0), mk(0.0)] };
        let params = MgaParams { resolution: 1, learning_rate: 0.0, ..MgaParams::default() };
        let batches: Vec<_> =
            (0..4).map(|b| (vec![vec![b as f64]], vec![b as f64])).collect();
        mga_step(&batches, &mut state, &params, &[-10.0], &[10.0]).unwrap();
        let centers: Vec<f64> = state.batches.iter().map(|b| b.center[0]).collect();
        assert_eq!(centers, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn quadratic_bowl_moves_center_toward_origin() {
        // f(x, y) = -(x^2 + y^2) on a 5x5 grid centered at (1.0, 0.8)
        let center = [1.0, 0.8];
        let half = [0.5, 0.5];
        let ranges: Vec<(f64, f64)> = center
            .iter()
            .zip(half)
            .map(|(c, h)| (c - h, c + h))
            .collect();
        let points = expand_range_grid(&ranges, 5);
        let fitnesses: Vec<f64> =
            points.iter().map(|p| -(p[0] * p[0] + p[1] * p[1])).collect();
        let mut state = MgaState {
            batches: vec![MgaBatch {
                center: center.to_vec(),
                half_width: half.to_vec(),
                best_point: Vec::new(),
                best_fitness: f64::NEG_INFINITY,
            }],
        };
        let params = MgaParams { resolution: 5, learning_rate: 0.05, shrink: 0.5 };
        mga_step(&[(points, fitnesses)], &mut state, &params, &[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let new_center = &state.batches[0].center;
        let old_norm = (center[0] * center[0] + center[1] * center[1]).sqrt();
        let new_norm = (new_center[0] * new_center[0] + new_center[1] * new_center[1]).sqrt();
        assert!(new_norm < old_norm, "center {new_center:?} did not move toward origin");
    }

    #[test]
    fn empty_batch_is_step_error() {
        let mut state = MgaState {
            batches: vec![MgaBatch {
                center: vec![0.0],
                half_width: vec![1.0],
                best_point: Vec::new(),
                best_fitness: f64::NEG_INFINITY,
            }],
        };
        let params = MgaParams::default();
        let err = mga_step(&[(vec![], vec![])], &mut state, &params, &[-1.0], &[1.0]);
        assert!(err.is_err());
    }

    #[test]
    fn grid_expansion_is_row_major_with_endpoints() {
        let points = expand_range_grid(&[(0.0, 1.0), (0.0, 10.0)], 3);
        assert_eq!(points.len(), 9);
        assert_eq!(points[0], vec![0.0, 0.0]);
        assert_eq!(points[1], vec![0.0, 5.0]);
        assert_eq!(points[2], vec![0.0, 10.0]);
        assert_eq!(points[3], vec![0.5, 0.0]);
        assert_eq!(points[8], vec![1.0, 10.0]);
    }
}
