//! Probability models for the uncertain inputs and the device curves that
//! turn a primitive draw (wind speed, irradiance, load) into electrical power.
//!
//! Every sampler takes the random stream explicitly, so a caller that hands
//! out seeded streams gets bit-identical draws across runs.

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {value}")))
    }
}

/// Wind turbine power curve parameters.
///
/// Below cut-in and above cut-out the turbine is idle; between cut-in and
/// rated speed the output follows `(a·v² + b·v + c)·p_rate`; between rated
/// and cut-out speed it delivers `p_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WtParams {
    pub p_rate: f64,
    pub v_ci: f64,
    pub v_r: f64,
    pub v_co: f64,
    pub quad_a: f64,
    pub quad_b: f64,
    pub quad_c: f64,
}

impl WtParams {
    /// Builds a turbine whose partial-load quadratic is fitted with
    /// [`fit_wt_quadratic`].
    pub fn fitted(p_rate: f64, v_ci: f64, v_r: f64, v_co: f64) -> Result<Self> {
        for (name, v) in [("p_rate", p_rate), ("v_co", v_co)] {
            ensure_finite(name, v)?;
        }
        if p_rate <= 0.0 {
            return Err(Error::InvalidParameter(format!("p_rate must be > 0, got {p_rate}")));
        }
        if v_co <= v_r {
            return Err(Error::InvalidParameter(format!(
                "cut-out speed {v_co} must exceed rated speed {v_r}"
            )));
        }
        let (quad_a, quad_b, quad_c) = fit_wt_quadratic(v_ci, v_r)?;
        Ok(Self {
            p_rate,
            v_ci,
            v_r,
            v_co,
            quad_a,
            quad_b,
            quad_c,
        })
    }

    /// Rated 250 kW turbine with 2 / 14 / 25 m/s cut-in, rated and cut-out speeds.
    pub fn reference() -> Self {
        Self::fitted(250.0, 2.0, 14.0, 25.0).expect("reference turbine is valid")
    }

    pub fn quadratic(&self, v: f64) -> f64 {
        (self.quad_a * v + self.quad_b) * v + self.quad_c
    }
}

/// Fits the partial-load quadratic through `(v_ci, 0)`, `(v_r, 1)` and the
/// midpoint `(v_m, (v_m / v_r)³)`, i.e. the cubic wind-power law at mid range.
///
/// Solved in Lagrange form, which is exact for three distinct abscissae.
pub fn fit_wt_quadratic(v_ci: f64, v_r: f64) -> Result<(f64, f64, f64)> {
    ensure_finite("v_ci", v_ci)?;
    ensure_finite("v_r", v_r)?;
    if !(v_ci > 0.0 && v_ci < v_r) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < v_ci < v_r, got v_ci={v_ci}, v_r={v_r}"
        )));
    }
    let v_m = 0.5 * (v_ci + v_r);
    let y_m = (v_m / v_r).powi(3);
    let anchors = [(v_ci, 0.0), (v_r, 1.0), (v_m, y_m)];

    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for (i, &(xi, yi)) in anchors.iter().enumerate() {
        let others: Vec<f64> = anchors
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &(xj, _))| xj)
            .collect();
        let (p, q) = (others[0], others[1]);
        let w = yi / ((xi - p) * (xi - q));
        // (v - p)(v - q) = v² - (p + q)v + pq
        a += w;
        b -= w * (p + q);
        c += w * p * q;
    }
    Ok((a, b, c))
}

/// Turbine output (kW) at wind speed `v` (m/s).
///
/// The fitted quadratic can dip below zero just above cut-in, so the
/// partial-load region is clamped to `[0, p_rate]`.
pub fn wt_power(v: f64, p: &WtParams) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::InvalidInput(format!("wind speed must be >= 0, got {v}")));
    }
    let out = if v < p.v_ci || v > p.v_co {
        0.0
    } else if v >= p.v_r {
        p.p_rate
    } else {
        (p.quadratic(v) * p.p_rate).clamp(0.0, p.p_rate)
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullDist {
    pub shape: f64,
    pub scale: f64,
}

impl WeibullDist {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Weibull needs shape > 0 and scale > 0, got shape={shape}, scale={scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// `scale·(−ln(1−u))^(1/shape)` for `u ∈ [0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.scale * (-(1.0 - u).ln()).powf(1.0 / self.shape)
    }
}

pub fn sample_wind_speed<R: Rng + ?Sized>(d: &WeibullDist, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    d.inverse_cdf(u)
}

/// How the Beta shape parameters are recovered from a mean and a standard
/// deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMomentForm {
    /// `β = (1−μ)(μ(1+μ)/σ² − 1)`. Preserves the mean exactly; the variance
    /// of the resulting Beta does not equal `σ²`.
    #[default]
    AsPrinted,
    /// `β = (1−μ)(μ(1−μ)/σ² − 1)`, the textbook method-of-moments inversion,
    /// which reproduces both moments.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDist {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaDist {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Beta needs alpha > 0 and beta > 0, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn std(&self) -> f64 {
        let s = self.alpha + self.beta;
        (self.alpha * self.beta / (s * s * (s + 1.0))).sqrt()
    }
}

pub fn beta_params_from_moments(mean: f64, std: f64, form: BetaMomentForm) -> Result<BetaDist> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::InvalidParameter(format!("mean must lie in (0, 1), got {mean}")));
    }
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidParameter(format!("std must be > 0, got {std}")));
    }
    let spread = match form {
        BetaMomentForm::AsPrinted => mean * (1.0 + mean),
        BetaMomentForm::Standard => mean * (1.0 - mean),
    };
    let beta = (1.0 - mean) * (spread / std / std - 1.0);
    let alpha = mean * beta / (1.0 - mean);
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InfeasibleMoments {
            mean,
            std,
            alpha,
            beta,
        });
    }
    Ok(BetaDist { alpha, beta })
}

/// Draws the irradiance fraction `s ∈ [0, 1]`.
pub fn sample_irradiance_fraction<R: Rng + ?Sized>(d: &BetaDist, rng: &mut R) -> f64 {
    let dist = Beta::new(d.alpha, d.beta).expect("BetaDist invariants hold");
    dist.sample(rng).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    pub p_stc: f64,
    pub g_stc: f64,
    /// Temperature coefficient, 1/°C.
    pub k: f64,
    pub t_ref: f64,
    pub t_cell: f64,
}

impl PvParams {
    pub fn new(p_stc: f64, g_stc: f64, k: f64, t_ref: f64, t_cell: f64) -> Result<Self> {
        if !(p_stc > 0.0 && g_stc > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "PV needs p_stc > 0 and g_stc > 0, got p_stc={p_stc}, g_stc={g_stc}"
            )));
        }
        for (name, v) in [("k", k), ("t_ref", t_ref), ("t_cell", t_cell)] {
            ensure_finite(name, v)?;
        }
        Ok(Self {
            p_stc,
            g_stc,
            k,
            t_ref,
            t_cell,
        })
    }

    /// 250 kW module string rated at 1000 W/m², k = 0.001, cell at 25 °C.
    pub fn reference() -> Self {
        Self::new(250.0, 1000.0, 0.001, 25.0, 25.0).expect("reference PV is valid")
    }

    pub fn with_cell_temperature(self, t_cell: f64) -> Self {
        Self { t_cell, ..self }
    }
}

/// Module output (kW) at incident irradiance `g` (W/m²), never negative.
pub fn pv_power(g: f64, p: &PvParams) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(Error::InvalidInput(format!("irradiance must be >= 0, got {g}")));
    }
    let raw = p.p_stc * (g / p.g_stc) * (1.0 + p.k * (p.t_cell - p.t_ref));
    Ok(raw.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDist {
    pub mean: f64,
    pub std: f64,
}

impl NormalDist {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std >= 0.0 && std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "normal needs finite mean and std >= 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self { mean, std })
    }
}

/// Gaussian load draw, clamped at zero.
pub fn sample_load<R: Rng + ?Sized>(d: &NormalDist, rng: &mut R) -> f64 {
    let dist = Normal::new(d.mean, d.std).expect("NormalDist invariants hold");
    dist.sample(rng).max(0.0)
}
