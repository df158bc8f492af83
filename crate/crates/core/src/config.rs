//! Run configuration: a TOML file with a `config_version` key. Relative
//! paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coa::CoaConfig;
use crate::dispatch::{ChpParams, ChpUnit, EmissionCoeffs, EssParams, EssUnit, Fleet, Prices, PvUnit, Weights, WtUnit};
use crate::error::{Error, Result};
use crate::grid::NetworkModel;
use crate::reliability::ReliabilityParams;
use crate::scenario::{HourlyModel, LoadMode, ScenarioModel};
use crate::stochastic::{beta_params_from_moments, BetaMomentForm, NormalDist, PvParams, WeibullDist, WtParams};

pub const CONFIG_VERSION: u32 = 1;

/// A constant or one value per hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hourly {
    Constant(f64),
    PerHour(Vec<f64>),
}

impl Hourly {
    fn resolve(&self, key: &str, horizon: usize) -> Result<Vec<f64>> {
        let v = match self {
            Hourly::Constant(c) => vec![*c; horizon],
            Hourly::PerHour(v) if v.len() == horizon => v.clone(),
            Hourly::PerHour(v) => {
                return Err(Error::config(key, format!("expected {horizon} hourly values, got {}", v.len())));
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(key, "values must be finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_generate: usize,
    pub n_keep: usize,
    pub load_mode: LoadMode,
    pub histogram_bins: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            n_generate: 1000,
            n_keep: 30,
            load_mode: LoadMode::SystemWide,
            histogram_bins: 20,
        }
    }
}

/// Hourly distribution parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub wind_shape: Hourly,
    /// m/s.
    pub wind_scale: Hourly,
    /// Mean of the irradiance fraction `G/g_max`; 0 marks a dark hour.
    pub irradiance_mean: Hourly,
    pub irradiance_std: Hourly,
    /// W/m².
    pub g_max: f64,
    pub beta_form: BetaMomentForm,
    /// Mean of the load multiplier applied to nominal bus loads.
    pub load_mean: Hourly,
    pub load_std: Hourly,
    /// °C.
    pub cell_temperature: Hourly,
}

/// Clear-sky bell between 06:00 and 18:00, peak fraction 0.6 at noon.
fn default_irradiance() -> Vec<f64> {
    (0..24)
        .map(|t| {
            let mid = t as f64 + 0.5;
            if (6.0..18.0).contains(&mid) {
                let s = (std::f64::consts::PI * (mid - 6.0) / 12.0).sin();
                (0.6 * s * 1e4).round() / 1e4
            } else {
                0.0
            }
        })
        .collect()
}

const DEFAULT_LOAD: [f64; 24] = [
    0.64, 0.60, 0.58, 0.56, 0.56, 0.58, 0.64, 0.76, 0.87, 0.95, 0.99, 1.00, 0.99, 1.00, 1.00, 0.97, 0.96, 0.96,
    0.93, 0.92, 0.92, 0.93, 0.87, 0.72,
];

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            wind_shape: Hourly::Constant(3.0),
            wind_scale: Hourly::Constant(12.0),
            irradiance_mean: Hourly::PerHour(default_irradiance()),
            irradiance_std: Hourly::Constant(0.1),
            g_max: 1000.0,
            beta_form: BetaMomentForm::AsPrinted,
            load_mean: Hourly::PerHour(DEFAULT_LOAD.to_vec()),
            load_std: Hourly::Constant(0.05),
            cell_temperature: Hourly::Constant(25.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChpSection {
    pub bus: Option<u32>,
    pub p_min: f64,
    pub p_max: f64,
    pub theta: f64,
    pub varrho: f64,
    pub gamma: f64,
    pub gas_price: f64,
    pub elec_eff: f64,
    pub thermal_price: f64,
    pub heat_to_electric: f64,
    pub k_om: f64,
    pub emission: EmissionCoeffs,
}

impl Default for ChpSection {
    fn default() -> Self {
        Self {
            bus: None,
            p_min: 20.0,
            p_max: 120.0,
            theta: 1e-4,
            varrho: 0.25,
            gamma: 2.0,
            gas_price: 0.03,
            elec_eff: 0.35,
            thermal_price: 0.02,
            heat_to_electric: 1.0,
            k_om: 0.01,
            emission: EmissionCoeffs {
                e_a: 0.1,
                e_b: 0.01,
                e_c: 1e-5,
                e_zeta: 0.05,
                e_lambda: 0.01,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EssSection {
    pub bus: Option<u32>,
    pub eta_ch: f64,
    pub eta_dis: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    pub p_ch_max: f64,
    pub p_dis_max: f64,
    pub k_om: f64,
}

impl Default for EssSection {
    fn default() -> Self {
        Self {
            bus: None,
            eta_ch: 0.95,
            eta_dis: 0.95,
            soc_min: 20.0,
            soc_max: 200.0,
            soc_init: 100.0,
            p_ch_max: 60.0,
            p_dis_max: 60.0,
            k_om: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WtSection {
    pub bus: Option<u32>,
    pub p_rate: f64,
    pub v_ci: f64,
    pub v_r: f64,
    pub v_co: f64,
    pub k_om: f64,
}

impl Default for WtSection {
    fn default() -> Self {
        Self {
            bus: None,
            p_rate: 250.0,
            v_ci: 2.0,
            v_r: 14.0,
            v_co: 25.0,
            k_om: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PvSection {
    pub bus: Option<u32>,
    pub p_stc: f64,
    pub g_stc: f64,
    pub k: f64,
    pub t_ref: f64,
    pub k_om: f64,
}

impl Default for PvSection {
    fn default() -> Self {
        Self {
            bus: None,
            p_stc: 250.0,
            g_stc: 1000.0,
            k: 0.001,
            t_ref: 25.0,
            k_om: 0.005,
        }
    }
}

/// The file as written, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub config_version: u32,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub horizon: usize,
    pub period_len: usize,
    pub power_factor: f64,
    pub scenarios: ScenarioSection,
    pub profiles: ProfileSection,
    pub prices: Prices,
    pub weights: Weights,
    pub reliability: ReliabilityParams,
    /// `seed` here is ignored; the run seed drives the optimizer.
    pub coa: CoaConfig,
    pub chp: Vec<ChpSection>,
    pub ess: Vec<EssSection>,
    pub wt: Vec<WtSection>,
    pub pv: Vec<PvSection>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            config_version: 0,
            dataset: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            seed: 42,
            horizon: 24,
            period_len: 3,
            power_factor: 1.0,
            scenarios: ScenarioSection::default(),
            profiles: ProfileSection::default(),
            prices: Prices::default(),
            weights: Weights::default(),
            reliability: ReliabilityParams::default(),
            coa: CoaConfig::default(),
            chp: [61, 21, 50].map(|b| ChpSection { bus: Some(b), ..Default::default() }).to_vec(),
            ess: [64, 12, 40].map(|b| EssSection { bus: Some(b), ..Default::default() }).to_vec(),
            wt: [27, 35].map(|b| WtSection { bus: Some(b), ..Default::default() }).to_vec(),
            pv: [18, 46].map(|b| PvSection { bus: Some(b), ..Default::default() }).to_vec(),
        }
    }
}

/// Validated configuration with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    /// Absolute dataset path.
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    /// SHA-256 of the configuration file.
    pub digest: String,
    pub fleet: Fleet,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.raw.seed
    }

    pub fn horizon(&self) -> usize {
        self.raw.horizon
    }

    /// Hourly scenario model for a network with `n_buses` buses.
    pub fn scenario_model(&self, n_buses: usize) -> Result<ScenarioModel> {
        build_scenario_model(&self.raw, n_buses)
    }

    /// Fails with a config error naming the first device placed on a bus
    /// the network lacks.
    pub fn check_placement(&self, net: &NetworkModel) -> Result<()> {
        let r = &self.raw;
        let buses = r
            .chp
            .iter()
            .map(|d| ("chp", d.bus))
            .chain(r.ess.iter().map(|d| ("ess", d.bus)))
            .chain(r.wt.iter().map(|d| ("wt", d.bus)))
            .chain(r.pv.iter().map(|d| ("pv", d.bus)));
        let mut counts = std::collections::HashMap::new();
        for (kind, bus) in buses {
            let k = counts.entry(kind).or_insert(0usize);
            let bus = bus.expect("validated");
            if net.bus_index(bus).is_none() {
                return Err(Error::config(
                    format!("{kind}[{k}].bus"),
                    format!("bus {bus} does not exist in network '{}'", net.name),
                ));
            }
            *k += 1;
        }
        Ok(())
    }
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

/// Parses and validates configuration text. `base` is the directory that
/// relative paths are resolved against.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().message().to_string();
        let key = match (path.as_str(), unknown_field(&message)) {
            (".", Some(f)) => f.to_string(),
            (".", None) => "<document>".to_string(),
            (p, _) => p.to_string(),
        };
        Error::config(key, message)
    })?;
    validate(raw, text, base)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn validate(raw: RawConfig, text: &str, base: &Path) -> Result<RunConfig> {
    if raw.config_version != CONFIG_VERSION {
        return Err(Error::config(
            "config_version",
            format!("expected {CONFIG_VERSION}, got {}", raw.config_version),
        ));
    }
    if raw.dataset.as_os_str().is_empty() {
        return Err(Error::config("dataset", "missing dataset path"));
    }
    if raw.horizon == 0 {
        return Err(Error::config("horizon", "must be >= 1"));
    }
    if raw.period_len == 0 || raw.horizon % raw.period_len != 0 {
        return Err(Error::config("period_len", format!("must divide the horizon of {}", raw.horizon)));
    }
    let s = &raw.scenarios;
    if s.n_generate == 0 || s.n_keep == 0 || s.n_keep > s.n_generate {
        return Err(Error::config("scenarios.n_keep", "need 1 <= n_keep <= n_generate"));
    }
    if s.histogram_bins == 0 {
        return Err(Error::config("scenarios.histogram_bins", "must be >= 1"));
    }
    for (k, w) in [("weights.h1", raw.weights.h1), ("weights.h2", raw.weights.h2), ("weights.penalty", raw.weights.penalty)] {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::config(k, format!("must be >= 0, got {w}")));
        }
    }
    let p = &raw.prices;
    for (k, v) in [("prices.grid_buy", p.grid_buy), ("prices.grid_sell", p.grid_sell), ("prices.c_ploss", p.c_ploss)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::config(k, format!("must be >= 0, got {v}")));
        }
    }
    raw.reliability
        .validate()
        .map_err(|e| Error::config("reliability", e.to_string()))?;
    raw.coa.validate().map_err(|e| Error::config("coa", e.to_string()))?;
    if !(raw.power_factor > 0.0 && raw.power_factor <= 1.0) {
        return Err(Error::config("power_factor", "must be in (0, 1]"));
    }
    positive("profiles.g_max", raw.profiles.g_max)?;

    let fleet = build_fleet(&raw)?;
    // surfaces distribution errors now rather than mid-run
    build_scenario_model(&raw, 1)?;

    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(RunConfig {
        dataset: base.join(&raw.dataset),
        out_dir: base.join(&raw.out_dir),
        digest,
        fleet,
        raw,
    })
}

fn device_error(kind: &str, k: usize, e: Error) -> Error {
    Error::config(format!("{kind}[{k}]"), e.to_string())
}

fn bus_of(kind: &str, k: usize, bus: Option<u32>) -> Result<u32> {
    bus.ok_or_else(|| Error::config(format!("{kind}[{k}].bus"), "missing bus"))
}

fn build_fleet(raw: &RawConfig) -> Result<Fleet> {
    let cell_temperature = raw.profiles.cell_temperature.resolve("profiles.cell_temperature", raw.horizon)?;
    let chp = raw
        .chp
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let params = ChpParams {
                theta: c.theta,
                varrho: c.varrho,
                gamma: c.gamma,
                gas_price: c.gas_price,
                elec_eff: c.elec_eff,
                thermal_price: c.thermal_price,
                heat_to_electric: c.heat_to_electric,
                p_min: c.p_min,
                p_max: c.p_max,
                bus_id: bus_of("chp", k, c.bus)?,
            };
            params.validate().map_err(|e| device_error("chp", k, e))?;
            let e = &c.emission;
            if ![e.e_a, e.e_b, e.e_c, e.e_zeta, e.e_lambda].iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!("chp[{k}].emission"), "coefficients must be finite"));
            }
            Ok(ChpUnit {
                params,
                emission: c.emission,
                k_om: c.k_om,
            })
        })
        .collect::<Result<_>>()?;
    let ess = raw
        .ess
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let params = EssParams {
                eta_ch: c.eta_ch,
                eta_dis: c.eta_dis,
                soc_min: c.soc_min,
                soc_max: c.soc_max,
                soc_init: c.soc_init,
                p_ch_max: c.p_ch_max,
                p_dis_max: c.p_dis_max,
                bus_id: bus_of("ess", k, c.bus)?,
            };
            params.validate().map_err(|e| device_error("ess", k, e))?;
            Ok(EssUnit { params, k_om: c.k_om })
        })
        .collect::<Result<_>>()?;
    let wt = raw
        .wt
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Ok(WtUnit {
                params: WtParams::fitted(c.p_rate, c.v_ci, c.v_r, c.v_co).map_err(|e| device_error("wt", k, e))?,
                bus_id: bus_of("wt", k, c.bus)?,
                k_om: c.k_om,
            })
        })
        .collect::<Result<_>>()?;
    let pv = raw
        .pv
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Ok(PvUnit {
                params: PvParams::new(c.p_stc, c.g_stc, c.k, c.t_ref, c.t_ref).map_err(|e| device_error("pv", k, e))?,
                bus_id: bus_of("pv", k, c.bus)?,
                k_om: c.k_om,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Fleet {
        chp,
        ess,
        wt,
        pv,
        cell_temperature,
        power_factor: raw.power_factor,
    })
}

fn build_scenario_model(raw: &RawConfig, n_buses: usize) -> Result<ScenarioModel> {
    let p = &raw.profiles;
    let h = raw.horizon;
    let shape = p.wind_shape.resolve("profiles.wind_shape", h)?;
    let scale = p.wind_scale.resolve("profiles.wind_scale", h)?;
    let g_mean = p.irradiance_mean.resolve("profiles.irradiance_mean", h)?;
    let g_std = p.irradiance_std.resolve("profiles.irradiance_std", h)?;
    let l_mean = p.load_mean.resolve("profiles.load_mean", h)?;
    let l_std = p.load_std.resolve("profiles.load_std", h)?;
    let hours = (0..h)
        .map(|t| {
            let wind = WeibullDist::new(shape[t], scale[t])
                .map_err(|e| Error::config(format!("profiles.wind_shape[{t}]"), e.to_string()))?;
            let irradiance = if g_mean[t] > 0.0 {
                Some(
                    beta_params_from_moments(g_mean[t], g_std[t], p.beta_form)
                        .map_err(|e| Error::config(format!("profiles.irradiance_mean[{t}]"), e.to_string()))?,
                )
            } else {
                None
            };
            let load = NormalDist::new(l_mean[t], l_std[t])
                .map_err(|e| Error::config(format!("profiles.load_mean[{t}]"), e.to_string()))?;
            Ok(HourlyModel { wind, irradiance, load })
        })
        .collect::<Result<_>>()?;
    Ok(ScenarioModel {
        hours,
        g_max: p.g_max,
        load_mode: raw.scenarios.load_mode,
        n_buses,
    })
}
