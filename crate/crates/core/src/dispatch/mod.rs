//! Device fleet, hourly schedules, the operating cost stack and constraint
//! checks.

mod costs;
mod evaluate;
mod fleet;

pub use costs::{
    chp_fuel_cost, chp_fuel_rate, emission_cost, ess_step, om_cost, split_signed, ChpParams, EmissionCoeffs,
    EssParams,
};
pub use evaluate::{
    evaluate_f1, fitness, renewable_penetration, CostBreakdown, DispatchProblem, Evaluation, F1Costs, HourDetail,
    Prices, Weights, DT,
};
pub use fleet::{ChpUnit, EssUnit, Fleet, PvUnit, WtUnit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PowerFlowSolution;

/// Hourly setpoints. ESS power is signed: positive discharges, negative
/// charges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSchedule {
    /// kW, `[hour][chp unit]`.
    pub chp_p: Vec<Vec<f64>>,
    /// kW, `[hour][ess unit]`.
    pub ess_p: Vec<Vec<f64>>,
}

impl DispatchSchedule {
    pub fn zeros(horizon: usize, n_chp: usize, n_ess: usize) -> Self {
        Self {
            chp_p: vec![vec![0.0; n_chp]; horizon],
            ess_p: vec![vec![0.0; n_ess]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.chp_p.len()
    }

    pub fn validate_shape(&self, fleet: &Fleet, horizon: usize) -> Result<()> {
        let ok = self.chp_p.len() == horizon
            && self.ess_p.len() == horizon
            && self.chp_p.iter().all(|r| r.len() == fleet.chp.len())
            && self.ess_p.iter().all(|r| r.len() == fleet.ess.len());
        if !ok {
            return Err(Error::InvalidInput(format!(
                "schedule shape does not match {horizon} hours × ({} CHP, {} ESS)",
                fleet.chp.len(),
                fleet.ess.len()
            )));
        }
        if self.chp_p.iter().chain(&self.ess_p).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("schedule contains non-finite setpoints".into()));
        }
        Ok(())
    }

    /// Hour-major decision vector: each hour lists CHP then ESS setpoints.
    pub fn to_vector(&self) -> Vec<f64> {
        self.chp_p
            .iter()
            .zip(&self.ess_p)
            .flat_map(|(c, e)| c.iter().chain(e).copied())
            .collect()
    }

    pub fn from_vector(x: &[f64], horizon: usize, n_chp: usize, n_ess: usize) -> Result<Self> {
        let width = n_chp + n_ess;
        if x.len() != horizon * width {
            return Err(Error::InvalidInput(format!(
                "decision vector has {} entries, expected {}",
                x.len(),
                horizon * width
            )));
        }
        let mut s = Self::zeros(horizon, n_chp, n_ess);
        for (t, row) in x.chunks(width.max(1)).enumerate().take(horizon) {
            s.chp_p[t].copy_from_slice(&row[..n_chp]);
            s.ess_p[t].copy_from_slice(&row[n_chp..]);
        }
        Ok(s)
    }

    /// Box bounds matching [`to_vector`](Self::to_vector).
    pub fn bounds(fleet: &Fleet, horizon: usize) -> Vec<(f64, f64)> {
        let hour: Vec<(f64, f64)> = fleet
            .chp
            .iter()
            .map(|u| (u.params.p_min, u.params.p_max))
            .chain(fleet.ess.iter().map(|u| (-u.params.p_ch_max, u.params.p_dis_max)))
            .collect();
        (0..horizon).flat_map(|_| hour.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    ChpBounds,
    EssPowerBounds,
    SocBounds,
    /// Slack injection disagreeing with loads, generation and losses.
    PowerBalance,
    PowerFlowDivergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ConstraintKind,
    pub hour: usize,
    /// Device index within its class; 0 for network-level checks.
    pub unit: usize,
    pub magnitude: f64,
}

/// Stored energy at the end of every hour, without clamping.
pub fn soc_trajectory(ess: &EssParams, power: impl IntoIterator<Item = f64>, dt: f64) -> Vec<f64> {
    let mut soc = ess.soc_init;
    power
        .into_iter()
        .map(|p| {
            let (ch, dis) = split_signed(p);
            soc = ess_step(soc, ch, dis, ess, dt).expect("split powers are one-sided");
            soc
        })
        .collect()
}

/// Device bound and storage trajectory violations of a schedule.
pub fn check_schedule(s: &DispatchSchedule, fleet: &Fleet, dt: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |kind, hour, unit, magnitude: f64| {
        if magnitude > 0.0 {
            out.push(Violation {
                kind,
                hour,
                unit,
                magnitude,
            });
        }
    };
    for (t, row) in s.chp_p.iter().enumerate() {
        for (k, (&p, u)) in row.iter().zip(&fleet.chp).enumerate() {
            push(ConstraintKind::ChpBounds, t, k, (u.params.p_min - p).max(p - u.params.p_max));
        }
    }
    for (k, u) in fleet.ess.iter().enumerate() {
        let e = &u.params;
        for (t, row) in s.ess_p.iter().enumerate() {
            let p = row[k];
            push(ConstraintKind::EssPowerBounds, t, k, (-e.p_ch_max - p).max(p - e.p_dis_max));
        }
        for (t, soc) in soc_trajectory(e, s.ess_p.iter().map(|r| r[k]), dt).into_iter().enumerate() {
            push(ConstraintKind::SocBounds, t, k, (e.soc_min - soc).max(soc - e.soc_max));
        }
    }
    out
}

/// Mismatch between the substation injection and the bus balance
/// `Σ injections + slack = losses`, in kW.
pub fn balance_residual(sol: &PowerFlowSolution) -> f64 {
    sol.slack_p_kw + sol.injection_p_kw.iter().sum::<f64>() - sol.losses_kw
}

/// Schedule checks plus, for each hourly power flow in `sols`, divergence
/// and the balance self-check.
pub fn check_constraints(s: &DispatchSchedule, fleet: &Fleet, sols: &[PowerFlowSolution], dt: f64) -> Vec<Violation> {
    let mut out = check_schedule(s, fleet, dt);
    out.extend(sols.iter().enumerate().filter_map(|(t, sol)| network_violation(t, sol)));
    out
}

pub(crate) fn network_violation(hour: usize, sol: &PowerFlowSolution) -> Option<Violation> {
    if !sol.converged {
        return Some(Violation {
            kind: ConstraintKind::PowerFlowDivergence,
            hour,
            unit: 0,
            magnitude: 1.0,
        });
    }
    let r = balance_residual(sol).abs();
    let scale = sol.injection_p_kw.iter().map(|p| p.abs()).sum::<f64>().max(1.0);
    (r > 1e-6 * scale).then_some(Violation {
        kind: ConstraintKind::PowerBalance,
        hour,
        unit: 0,
        magnitude: r,
    })
}

/// Means over consecutive blocks of `period_len` values.
pub fn aggregate_periods(values: &[f64], period_len: usize) -> Result<Vec<f64>> {
    if period_len == 0 || values.len() % period_len != 0 {
        return Err(Error::InvalidParameter(format!(
            "period length {period_len} does not divide {} hours",
            values.len()
        )));
    }
    Ok(values
        .chunks(period_len)
        .map(|c| c.iter().sum::<f64>() / period_len as f64)
        .collect())
}

/// Fraction of demand energy covered by renewables.
pub fn penetration_ratio(renewable_kwh: f64, demand_kwh: f64) -> Result<f64> {
    if demand_kwh <= 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "renewable penetration needs positive demand, got {demand_kwh} kWh"
        )));
    }
    Ok(renewable_kwh / demand_kwh)
}


#[cfg(test)]
mod tests {
    use super::test_fleet::one_of_each;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vector_round_trip_and_bounds() {
        let mut s = DispatchSchedule::zeros(3, 2, 1);
        s.chp_p[1][1] = 7.0;
        s.ess_p[2][0] = -3.0;
        let x = s.to_vector();
        assert_eq!(x, vec![0.0, 0.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0, -3.0]);
        assert_eq!(DispatchSchedule::from_vector(&x, 3, 2, 1).unwrap(), s);
        assert!(DispatchSchedule::from_vector(&x[1..], 3, 2, 1).is_err());

        let b = DispatchSchedule::bounds(&one_of_each(1), 2);
        assert_eq!(b, vec![(0.0, 200.0), (-30.0, 30.0), (0.0, 200.0), (-30.0, 30.0)]);
    }

    #[test]
    fn feasible_schedule_has_no_violations() {
        let f = one_of_each(1);
        let mut s = DispatchSchedule::zeros(24, 1, 1);
        s.chp_p.iter_mut().for_each(|r| r[0] = 100.0);
        assert!(check_schedule(&s, &f, 1.0).is_empty());
    }

    #[test]
    fn chp_overshoot_reports_magnitude() {
        let f = one_of_each(1);
        let mut s = DispatchSchedule::zeros(24, 1, 1);
        s.chp_p[3][0] = 210.0;
        let v = check_schedule(&s, &f, 1.0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ConstraintKind::ChpBounds);
        assert_eq!(v[0].hour, 3);
        assert!((v[0].magnitude - 10.0).abs() < 1e-12);
    }

    #[test]
    fn soc_overflow_traced() {
        // 30 kW of charging adds 27 kWh per hour
        let f = one_of_each(1);
        let mut s = DispatchSchedule::zeros(24, 1, 1);
        s.ess_p[4][0] = -30.0;
        s.ess_p[5][0] = -30.0;
        let v = check_schedule(&s, &f, 1.0);
        // 50 → 77 (hour 4) → 104 (hour 5) and stays there
        let soc: Vec<_> = v.iter().filter(|x| x.kind == ConstraintKind::SocBounds).collect();
        assert_eq!(soc[0].hour, 5);
        assert!((soc[0].magnitude - 4.0).abs() < 1e-12);
        assert_eq!(soc.len(), 19);
    }

    #[test]
    fn periods() {
        let series: Vec<f64> = (1..=24).map(f64::from).collect();
        assert_eq!(
            aggregate_periods(&series, 3).unwrap(),
            vec![2.0, 5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 23.0]
        );
        assert_eq!(aggregate_periods(&[4.0; 24], 3).unwrap(), vec![4.0; 8]);
        assert!(matches!(aggregate_periods(&series, 5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn penetration() {
        assert!((penetration_ratio(40.0, 100.0).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(penetration_ratio(0.0, 100.0).unwrap(), 0.0);
        assert_eq!(penetration_ratio(100.0, 100.0).unwrap(), 1.0);
        assert!(matches!(penetration_ratio(1.0, 0.0), Err(Error::UndefinedMetric(_))));
    }

    proptest! {
        #[test]
        fn idle_storage_keeps_charge(n in 1usize..48) {
            let e = one_of_each(1).ess[0].params;
            let traj = soc_trajectory(&e, std::iter::repeat_n(0.0, n), 1.0);
            prop_assert!(traj.iter().all(|&s| s == e.soc_init));
        }
    }
}
