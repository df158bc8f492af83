use serde::{Deserialize, Serialize};

use super::costs::{ChpParams, EmissionCoeffs, EssParams};
use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::stochastic::{pv_power, wt_power, PvParams, WtParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChpUnit {
    pub params: ChpParams,
    pub emission: EmissionCoeffs,
    /// O&M, $/kWh.
    pub k_om: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssUnit {
    pub params: EssParams,
    /// O&M per kWh throughput.
    pub k_om: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtUnit {
    pub params: WtParams,
    pub bus_id: u32,
    pub k_om: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvUnit {
    /// `t_cell` is overridden hour by hour from the fleet's temperature profile.
    pub params: PvParams,
    pub bus_id: u32,
    pub k_om: f64,
}

/// Every device on the feeder plus the hourly PV cell temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub chp: Vec<ChpUnit>,
    pub ess: Vec<EssUnit>,
    pub wt: Vec<WtUnit>,
    pub pv: Vec<PvUnit>,
    /// °C, one value per hour.
    pub cell_temperature: Vec<f64>,
    /// Power factor of every device; 1.0 means no reactive output.
    pub power_factor: f64,
}

/// Bus indices of each device class, resolved against a network.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Placement {
    pub chp: Vec<usize>,
    pub ess: Vec<usize>,
    pub wt: Vec<usize>,
    pub pv: Vec<usize>,
}

impl Fleet {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        for u in &self.chp {
            u.params.validate()?;
        }
        for u in &self.ess {
            u.params.validate()?;
        }
        if self.cell_temperature.len() != horizon {
            return Err(Error::InvalidParameter(format!(
                "cell temperature profile has {} entries, horizon is {horizon}",
                self.cell_temperature.len()
            )));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power factor must be in (0, 1], got {}",
                self.power_factor
            )));
        }
        Ok(())
    }

    pub(crate) fn place(&self, net: &NetworkModel) -> Result<Placement> {
        let find = |what: &str, k: usize, bus: u32| {
            net.bus_index(bus)
                .ok_or_else(|| Error::InvalidInput(format!("{what}[{k}] sits on unknown bus {bus}")))
        };
        Ok(Placement {
            chp: self.chp.iter().enumerate().map(|(k, u)| find("chp", k, u.params.bus_id)).collect::<Result<_>>()?,
            ess: self.ess.iter().enumerate().map(|(k, u)| find("ess", k, u.params.bus_id)).collect::<Result<_>>()?,
            wt: self.wt.iter().enumerate().map(|(k, u)| find("wt", k, u.bus_id)).collect::<Result<_>>()?,
            pv: self.pv.iter().enumerate().map(|(k, u)| find("pv", k, u.bus_id)).collect::<Result<_>>()?,
        })
    }

    /// Reactive output accompanying `p` kW at the fleet power factor.
    pub fn reactive(&self, p: f64) -> f64 {
        if self.power_factor >= 1.0 {
            0.0
        } else {
            p * (1.0 - self.power_factor * self.power_factor).sqrt() / self.power_factor
        }
    }

    /// Available output of every turbine at wind speed `v`.
    pub fn wt_output(&self, v: f64) -> Vec<f64> {
        self.wt
            .iter()
            .map(|u| wt_power(v, &u.params).expect("scenario wind speeds are non-negative"))
            .collect()
    }

    /// Available output of every PV unit at irradiance `g` during `hour`.
    pub fn pv_output(&self, g: f64, hour: usize) -> Vec<f64> {
        let t = self.cell_temperature[hour];
        self.pv
            .iter()
            .map(|u| pv_power(g, &u.params.with_cell_temperature(t)).expect("scenario irradiance is non-negative"))
            .collect()
    }
}
