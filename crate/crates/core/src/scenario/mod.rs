//! Monte Carlo scenarios for the day-ahead horizon.
//!
//! A [`Scenario`] is one probability-weighted realization of hourly wind
//! speed, irradiance and load multipliers. [`generate_scenarios`] draws them
//! from an hourly [`ScenarioModel`]; [`reduce_scenarios`] shrinks a large set
//! by backward reduction; [`empirical_distribution`] turns weighted samples
//! into PDF/CDF tables for reporting.

mod csv_io;
mod histogram;
mod reduce;

pub use csv_io::{read_scenarios_csv, write_scenarios_csv};
pub use histogram::{empirical_distribution, Histogram};
pub use reduce::{reduce_scenarios, reduce_scenarios_indexed, ScenarioMetric};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stochastic::{
    sample_irradiance_fraction, sample_load, sample_wind_speed, BetaDist, NormalDist, WeibullDist,
};

const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub probability: f64,
    /// m/s, one entry per hour.
    pub wind_speed: Vec<f64>,
    /// W/m², one entry per hour.
    pub irradiance: Vec<f64>,
    /// Per hour: either a single system-wide factor or one factor per bus
    /// (in network bus order).
    pub load_multiplier: Vec<Vec<f64>>,
}

impl Scenario {
    /// Multiplier applied to the nominal load of the bus at `bus_index`.
    pub fn load_factor(&self, hour: usize, bus_index: usize) -> f64 {
        let row = &self.load_multiplier[hour];
        if row.len() == 1 {
            row[0]
        } else {
            row[bus_index]
        }
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.probability > 0.0 && self.probability <= 1.0 + PROBABILITY_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "scenario probability {} outside (0, 1]",
                self.probability
            )));
        }
        if self.wind_speed.len() != horizon
            || self.irradiance.len() != horizon
            || self.load_multiplier.len() != horizon
        {
            return Err(Error::InvalidInput(format!(
                "scenario series must have horizon length {horizon}"
            )));
        }
        let width = self.load_multiplier.first().map_or(1, Vec::len);
        let ok = |x: &f64| x.is_finite() && *x >= 0.0;
        if !self.wind_speed.iter().all(ok)
            || !self.irradiance.iter().all(ok)
            || !self
                .load_multiplier
                .iter()
                .all(|row| row.len() == width && !row.is_empty() && row.iter().all(ok))
        {
            return Err(Error::InvalidInput(
                "scenario entries must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Non-empty list of scenarios whose probabilities sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
    horizon: usize,
    master_seed: u64,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, horizon: usize, master_seed: u64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::InvalidInput("scenario set is empty".into()));
        }
        for s in &scenarios {
            s.validate(horizon)?;
        }
        let total: f64 = scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "scenario probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            scenarios,
            horizon,
            master_seed,
        })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scenario> {
        self.scenarios.iter()
    }

    /// Probability-weighted mean of the system-wide load factor at `hour`,
    /// averaged over buses when multipliers are per bus.
    pub fn expected_load_factor(&self, hour: usize) -> f64 {
        self.scenarios
            .iter()
            .map(|s| {
                let row = &s.load_multiplier[hour];
                s.probability * row.iter().sum::<f64>() / row.len() as f64
            })
            .sum()
    }
}

/// How load uncertainty is spread over buses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadMode {
    /// One multiplier per hour shared by every bus.
    #[default]
    SystemWide,
    /// An independent multiplier per hour and bus.
    PerBus,
}

/// Distributions for one hour of the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyModel {
    pub wind: WeibullDist,
    /// `None` at night: irradiance is zero.
    pub irradiance: Option<BetaDist>,
    pub load: NormalDist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioModel {
    pub hours: Vec<HourlyModel>,
    /// Irradiance at a Beta fraction of one, W/m².
    pub g_max: f64,
    pub load_mode: LoadMode,
    /// Bus count, used only in [`LoadMode::PerBus`].
    pub n_buses: usize,
}

impl ScenarioModel {
    fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R, probability: f64) -> Scenario {
        let horizon = self.hours.len();
        let mut wind_speed = Vec::with_capacity(horizon);
        let mut irradiance = Vec::with_capacity(horizon);
        let mut load_multiplier = Vec::with_capacity(horizon);
        let width = match self.load_mode {
            LoadMode::SystemWide => 1,
            LoadMode::PerBus => self.n_buses.max(1),
        };
        for h in &self.hours {
            wind_speed.push(sample_wind_speed(&h.wind, rng));
            irradiance.push(match &h.irradiance {
                Some(beta) => sample_irradiance_fraction(beta, rng) * self.g_max,
                None => 0.0,
            });
            load_multiplier.push((0..width).map(|_| sample_load(&h.load, rng)).collect());
        }
        Scenario {
            probability,
            wind_speed,
            irradiance,
            load_multiplier,
        }
    }
}

/// Draws `n` equiprobable scenarios. Scenario `i` uses its own stream derived
/// from `(seed, i)`, so the result is the same at any thread count.
pub fn generate_scenarios(model: &ScenarioModel, horizon: usize, n: usize, seed: u64) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("scenario count must be >= 1".into()));
    }
    if model.hours.len() != horizon {
        return Err(Error::InvalidParameter(format!(
            "model covers {} hours, horizon is {horizon}",
            model.hours.len()
        )));
    }
    if !(model.g_max > 0.0 && model.g_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("g_max must be > 0, got {}", model.g_max)));
    }
    let p = 1.0 / n as f64;
    let scenarios: Vec<Scenario> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            model.draw(&mut rng, p)
        })
        .collect();
    ScenarioSet::new(scenarios, horizon, seed)
}
