//! Test functions with known minima, used to exercise the optimizer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{optimize, CoaConfig, CoaResult};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Σ x², on [−5, 5].
    Sphere,
    /// 10n + Σ (x² − 10 cos 2πx), on [−5.12, 5.12].
    Rastrigin,
    /// (x − 3)² in one dimension, on [−10, 10].
    ShiftedQuadratic,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Sphere, Benchmark::Rastrigin, Benchmark::ShiftedQuadratic];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sphere => "sphere",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::ShiftedQuadratic => "shifted_quadratic",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Benchmark::Sphere => sphere(x),
            Benchmark::Rastrigin => rastrigin(x),
            Benchmark::ShiftedQuadratic => x.iter().map(|v| (v - 3.0) * (v - 3.0)).sum(),
        }
    }

    /// Box for the benchmark in `dim` dimensions (the shifted quadratic is
    /// always 1-D).
    pub fn bounds(self, dim: usize) -> Vec<(f64, f64)> {
        match self {
            Benchmark::Sphere => vec![(-5.0, 5.0); dim],
            Benchmark::Rastrigin => vec![(-5.12, 5.12); dim],
            Benchmark::ShiftedQuadratic => vec![(-10.0, 10.0)],
        }
    }

    pub fn run(self, dim: usize, cfg: &CoaConfig) -> Result<CoaResult> {
        optimize(|x| self.eval(x), &self.bounds(dim), cfg)
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}
