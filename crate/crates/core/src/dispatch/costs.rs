//! Per-device cost and state relations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Combined heat and power unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChpParams {
    /// Fuel-curve coefficients: `theta·p² + varrho·p + gamma`.
    pub theta: f64,
    pub varrho: f64,
    pub gamma: f64,
    /// $ per kWh of fuel energy.
    pub gas_price: f64,
    /// Electrical efficiency.
    pub elec_eff: f64,
    /// $ per kWh of sold heat.
    pub thermal_price: f64,
    /// Heat-to-electric ratio.
    pub heat_to_electric: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub bus_id: u32,
}

impl ChpParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.theta,
            self.varrho,
            self.gamma,
            self.gas_price,
            self.thermal_price,
            self.heat_to_electric,
            self.p_min,
            self.p_max,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite
            || self.theta < 0.0
            || !(self.elec_eff > 0.0 && self.elec_eff <= 1.0)
            || !(0.0 <= self.p_min && self.p_min <= self.p_max)
        {
            return Err(Error::InvalidParameter(format!("invalid CHP parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssParams {
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// kWh.
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    /// kW.
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub bus_id: u32,
}

impl EssParams {
    pub fn validate(&self) -> Result<()> {
        let eff = |e: f64| e > 0.0 && e <= 1.0;
        if !(eff(self.eta_ch)
            && eff(self.eta_dis)
            && self.soc_min <= self.soc_init
            && self.soc_init <= self.soc_max
            && self.soc_min >= 0.0
            && self.p_ch_max >= 0.0
            && self.p_dis_max >= 0.0
            && self.soc_max.is_finite()
            && self.p_ch_max.is_finite()
            && self.p_dis_max.is_finite())
        {
            return Err(Error::InvalidParameter(format!("invalid ESS parameters {self:?}")));
        }
        Ok(())
    }
}

/// Emission cost curve `e_a + e_b·p + e_c·p² + e_zeta·exp(e_lambda·p)`, $/h.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmissionCoeffs {
    pub e_a: f64,
    pub e_b: f64,
    pub e_c: f64,
    pub e_zeta: f64,
    pub e_lambda: f64,
}

fn non_negative(p: f64) -> Result<()> {
    if p >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("power must be >= 0, got {p}")))
    }
}

/// Fuel consumption rate at output `p`.
pub fn chp_fuel_rate(p: f64, c: &ChpParams) -> Result<f64> {
    non_negative(p)?;
    Ok(c.theta * p * p + c.varrho * p + c.gamma)
}

/// Gas cost of producing `p` for `dt` hours, net of heat sales.
pub fn chp_fuel_cost(p: f64, c: &ChpParams, dt: f64) -> Result<f64> {
    non_negative(p)?;
    Ok((c.gas_price * p / c.elec_eff - c.thermal_price * c.heat_to_electric * p) * dt)
}

pub fn om_cost(p: f64, k_om: f64, dt: f64) -> f64 {
    k_om * p * dt
}

pub fn emission_cost(p: f64, e: &EmissionCoeffs) -> f64 {
    e.e_a + e.e_b * p + e.e_c * p * p + e.e_zeta * (e.e_lambda * p).exp()
}

/// Advances the state of charge by one step. At most one of `p_ch` and
/// `p_dis` may be non-zero.
pub fn ess_step(soc: f64, p_ch: f64, p_dis: f64, e: &EssParams, dt: f64) -> Result<f64> {
    if p_ch < 0.0 || p_dis < 0.0 {
        return Err(Error::InvalidInput(format!(
            "charge/discharge powers must be >= 0, got {p_ch}/{p_dis}"
        )));
    }
    if p_ch > 0.0 && p_dis > 0.0 {
        return Err(Error::InvalidInput("simultaneous charge and discharge".into()));
    }
    Ok(soc + e.eta_ch * p_ch * dt - p_dis * dt / e.eta_dis)
}

/// Splits a signed storage power (+ discharge, − charge) into
/// `(p_ch, p_dis)`.
pub fn split_signed(p: f64) -> (f64, f64) {
    if p >= 0.0 {
        (0.0, p)
    } else {
        (-p, 0.0)
    }
}
