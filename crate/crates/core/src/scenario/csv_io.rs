//! Scenario sets as CSV, one row per scenario-hour:
//! `scenario_id,probability,hour,wind_speed,irradiance,load_multiplier`.
//!
//! Per-bus multipliers are written as `;`-separated values in the
//! `load_multiplier` column.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    scenario_id: usize,
    probability: f64,
    hour: usize,
    wind_speed: f64,
    irradiance: f64,
    load_multiplier: String,
}

pub fn write_scenarios_csv(set: &ScenarioSet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, s) in set.iter().enumerate() {
        for hour in 0..set.horizon() {
            let load_multiplier = s.load_multiplier[hour]
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";");
            w.serialize(Row {
                scenario_id: id,
                probability: s.probability,
                hour,
                wind_speed: s.wind_speed[hour],
                irradiance: s.irradiance[hour],
                load_multiplier,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a set written by [`write_scenarios_csv`]. The file does not carry
/// the master seed, so the caller supplies it.
pub fn read_scenarios_csv(path: &Path, master_seed: u64) -> Result<ScenarioSet> {
    let mut r = csv::Reader::from_path(path)?;
    let mut scenarios: Vec<Scenario> = Vec::new();
    let mut ids: Vec<usize> = Vec::new();
    for (k, row) in r.deserialize::<Row>().enumerate() {
        let line = k + 2;
        let schema = |message: String| Error::Schema {
            file: path.to_path_buf(),
            line,
            message,
        };
        let row = row.map_err(|e| schema(e.to_string()))?;
        let loads = row
            .load_multiplier
            .split(';')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(format!("load_multiplier: {e}")))?;
        if ids.last() != Some(&row.scenario_id) {
            if ids.contains(&row.scenario_id) {
                return Err(schema(format!("scenario {} is not contiguous", row.scenario_id)));
            }
            ids.push(row.scenario_id);
            scenarios.push(Scenario {
                probability: row.probability,
                wind_speed: Vec::new(),
                irradiance: Vec::new(),
                load_multiplier: Vec::new(),
            });
        }
        let s = scenarios.last_mut().expect("pushed above");
        if row.hour != s.wind_speed.len() {
            return Err(schema(format!("expected hour {}, found {}", s.wind_speed.len(), row.hour)));
        }
        if row.probability != s.probability {
            return Err(schema("probability changes within a scenario".into()));
        }
        s.wind_speed.push(row.wind_speed);
        s.irradiance.push(row.irradiance);
        s.load_multiplier.push(loads);
    }
    let horizon = scenarios.first().map_or(0, |s| s.wind_speed.len());
    ScenarioSet::new(scenarios, horizon, master_seed)
}
