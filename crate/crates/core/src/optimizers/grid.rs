//! Exhaustive grid search batched into generations.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::optimizers::{
    wrong_state, EvaluatedPopulation, InitArgs, Optimizer, OptimizerState,
};

pub const DEFAULT_POINT_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Points per axis, endpoint inclusive.
    pub resolution: usize,
    /// Per-parameter resolution overrides by name.
    pub resolutions: BTreeMap<String, usize>,
    /// Refuse to plan grids larger than this many points.
    pub point_cap: u64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { resolution: 10, resolutions: BTreeMap::new(), point_cap: DEFAULT_POINT_CAP }
    }
}

/// One scalar grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lower: f64,
    pub upper: f64,
    pub resolution: usize,
}

impl GridAxis {
    fn value(&self, k: usize) -> f64 {
        if self.resolution == 1 {
            self.lower
        } else {
            self.lower + k as f64 * (self.upper - self.lower) / (self.resolution - 1) as f64
        }
    }
}

/// Enumerates the full Cartesian product in row-major order of axis
/// declaration (first axis slowest), batched into populations.
pub fn grid_search_plan(
    axes: &[GridAxis],
    population_size: usize,
    point_cap: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let total = total_points(axes, point_cap)?;
    let mut batches = Vec::new();
    let mut cursor = 0u64;
    while cursor < total {
        let len = (total - cursor).min(population_size as u64);
        batches.push((cursor..cursor + len).map(|i| decode_point(axes, i)).collect());
        cursor += len;
    }
    Ok(batches)
}

fn total_points(axes: &[GridAxis], point_cap: u64) -> Result<u64> {
    if axes.is_empty() {
        return Err(Error::config("grid search needs at least one axis"));
    }
    let mut total: u64 = 1;
    for axis in axes {
        if axis.resolution == 0 {
            return Err(Error::config("grid axis resolution must be >= 1"));
        }
        total = total
            .checked_mul(axis.resolution as u64)
            .ok_or_else(|| Error::config("grid point count overflows u64"))?;
    }
    if total > point_cap {
        return Err(Error::config(format!(
            "grid would enumerate {total} points, above the cap of {point_cap}"
        )));
    }
    Ok(total)
}

fn decode_point(axes: &[GridAxis], mut index: u64) -> Vec<f64> {
    let mut point = vec![0.0; axes.len()];
    for (d, axis) in axes.iter().enumerate().rev() {
        point[d] = axis.value((index % axis.resolution as u64) as usize);
        index /= axis.resolution as u64;
    }
    point
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GridState {
    pub cursor: u64,
    pub total: u64,
}

pub struct GridOptimizer {
    axes: Vec<GridAxis>,
    population_size: usize,
    state: GridState,
}

impl GridOptimizer {
    pub fn new(axes: Vec<GridAxis>, population_size: usize, point_cap: u64) -> Result<Self> {
        let total = total_points(&axes, point_cap)?;
        if population_size == 0 {
            return Err(Error::config("grid requires population size >= 1"));
        }
        Ok(GridOptimizer { axes, population_size, state: GridState { cursor: 0, total } })
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    fn batch_len(&self) -> u64 {
        (self.state.total - self.state.cursor).min(self.population_size as u64)
    }
}

impl Optimizer for GridOptimizer {
    fn id(&self) -> &'static str {
        "grid"
    }

    fn initialize(&mut self, _init: &mut InitArgs<'_>) -> Result<()> {
        Ok(())
    }

    fn ask(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        if self.state.cursor >= self.state.total {
            return Err(Error::step("grid is exhausted"));
        }
        Ok((self.state.cursor..self.state.cursor + self.batch_len())
            .map(|i| decode_point(&self.axes, i))
            .collect())
    }

    fn tell(&mut self, _population: &EvaluatedPopulation, _rng: &mut dyn RngCore) -> Result<()> {
        self.state.cursor += self.batch_len();
        Ok(())
    }

    fn converged(&self) -> bool {
        self.state.cursor >= self.state.total
    }

    fn snapshot(&self) -> OptimizerState {
        OptimizerState::Grid(self.state.clone())
    }

    fn restore(&mut self, state: OptimizerState) -> Result<()> {
        match state {
            OptimizerState::Grid(s) => {
                self.state = s;
                Ok(())
            }
            _ => Err(wrong_state("grid")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_one_is_a_single_point_at_lower() {
        let axes = vec![GridAxis { lower: -3.0, upper: 5.0, resolution: 1 }];
        let batches = grid_search_plan(&axes, 4, DEFAULT_POINT_CAP).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0], vec![vec![-3.0]]);
    }

    #[test]
    fn two_axes_enumerate_endpoint_inclusive_product() {
        let axes = vec![
            GridAxis { lower: 0.0, upper: 1.0, resolution: 3 },
            GridAxis { lower: 0.0, upper: 1.0, resolution: 2 },
        ];
        let batches = grid_search_plan(&axes, 100, DEFAULT_POINT_CAP).unwrap();
        let points: Vec<Vec<f64>> = batches.into_iter().flatten().collect();
        assert_eq!(
            points,
            vec![
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![0.5, 0.0],
                vec![0.5, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ]
        );
    }

    #[test]
    fn enumerates_exactly_product_many_unique_points() {
        let axes = vec![
            GridAxis { lower: -1.0, upper: 1.0, resolution: 20 },
            GridAxis { lower: 0.0, upper: 4.0, resolution: 20 },
        ];
        let batches = grid_search_plan(&axes, 32, DEFAULT_POINT_CAP).unwrap();
        let mut points: Vec<Vec<f64>> = batches.into_iter().flatten().collect();
        assert_eq!(points.len(), 400);
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        assert_eq!(points.len(), 400, "grid points are not unique");
    }

    #[test]
    fn cap_refusal_reports_count() {
        let axes = vec![
            GridAxis { lower: 0.0, upper: 1.0, resolution: 4000 },
            GridAxis { lower: 0.0, upper: 1.0, resolution: 4000 },
        ];
        let err = grid_search_plan(&axes, 10, DEFAULT_POINT_CAP).unwrap_err();
        assert!(err.to_string().contains("16000000"), "{err}");
    }

    #[test]
    fn batching_respects_population_size() {
        let axes = vec![GridAxis { lower: 0.0, upper: 1.0, resolution: 10 }];
        let batches = grid_search_plan(&axes, 4, DEFAULT_POINT_CAP).unwrap();
        let sizes: Vec<usize> = batches.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
    }
}
