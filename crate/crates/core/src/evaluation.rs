//! Objective value and KPI table computed from a finished simulation.
//!
//! The objective is access-charge revenue minus the monetized externality of
//! the freight left on the road. Revenue only counts trains that reached their
//! destination before the horizon.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{rail_cost_for, CostParams};
use crate::simulator::SimResult;

#[derive(Debug, Error, PartialEq)]
pub enum EvaluationError {
    #[error("OD `{0}` has no externality distance")]
    MissingDistance(String),
    #[error(transparent)]
    Demand(#[from] crate::demand::DemandError),
}

/// Carbon-credit policy: the value of CO2e avoided per ton-km moved by rail
/// instead of road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    pub name: String,
    pub truck_g_co2e_per_tkm: f64,
    pub train_g_co2e_per_tkm: f64,
    /// Price of one tonne of CO2e, €.
    pub credit_eur_per_t_co2e: f64,
}

/// Emission rate of a default diesel freight train, g CO2e per ton-km.
pub const TRAIN_G_CO2E_PER_TKM: f64 = 23.0;
/// Carbon credit price, € per tonne CO2e.
pub const CREDIT_EUR_PER_T_CO2E: f64 = 54.21;

impl Policy {
    /// Externality rate `η` in €/(t·km).
    pub fn eta_per_tkm(&self) -> f64 {
        (self.truck_g_co2e_per_tkm - self.train_g_co2e_per_tkm) * 1e-6 * self.credit_eur_per_t_co2e
    }

    fn with_truck(name: &str, truck: f64) -> Self {
        Self {
            name: name.to_string(),
            truck_g_co2e_per_tkm: truck,
            train_g_co2e_per_tkm: TRAIN_G_CO2E_PER_TKM,
            credit_eur_per_t_co2e: CREDIT_EUR_PER_T_CO2E,
        }
    }

    /// Trucks emitting 6.5 times the train rate.
    pub fn policy1() -> Self {
        Self::with_truck("policy1", 149.7)
    }

    /// Trucks emitting 2.4 times the train rate.
    pub fn policy2() -> Self {
        Self::with_truck("policy2", 54.0)
    }

    /// Externalities ignored: pure revenue maximization.
    pub fn policy3() -> Self {
        Self::with_truck("policy3", TRAIN_G_CO2E_PER_TKM)
    }

    pub fn presets() -> Vec<Self> {
        vec![Self::policy1(), Self::policy2(), Self::policy3()]
    }
}

/// Which travel time a train is billed for.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueBasis {
    /// The travel time the train actually took.
    #[default]
    Realized,
    /// The path estimate in force when the train departed.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRevenue {
    pub path: String,
    pub trains: usize,
    pub revenue_eur: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revenue {
    pub per_path: Vec<PathRevenue>,
    pub total_eur: f64,
}

/// Access-charge revenue per path.
///
/// A completed train pays `λ(departure) · τ · tons · length`: the hourly
/// intensity times the billed hours gives €/(t·km), scaled by the payload and
/// the path length.
pub fn revenue(result: &SimResult, basis: RevenueBasis) -> Revenue {
    let mut per_path: Vec<PathRevenue> = result
        .paths
        .iter()
        .map(|p| PathRevenue {
            path: p.id.clone(),
            trains: 0,
            revenue_eur: 0.0,
        })
        .collect();
    for trip in result.completed_trips() {
        let tau = match basis {
            RevenueBasis::Realized => trip.realized_travel_time_h().unwrap(),
            RevenueBasis::Estimate => trip.tau_estimate_h,
        };
        let entry = &mut per_path[trip.path];
        entry.trains += 1;
        entry.revenue_eur +=
            trip.lambda * tau * result.tons_per_packet * result.paths[trip.path].length_km;
    }
    let total_eur = per_path.iter().map(|p| p.revenue_eur).sum();
    Revenue {
        per_path,
        total_eur,
    }
}

/// Monetized externality of road freight: `Σ η · distance · road tons`.
pub fn externality_cost(result: &SimResult, policy: &Policy) -> Result<f64, EvaluationError> {
    let eta = policy.eta_per_tkm();
    result.ods.iter().try_fold(0.0, |acc, od| {
        let d = od
            .eta_distance_km
            .ok_or_else(|| EvaluationError::MissingDistance(od.id.clone()))?;
        Ok(acc + eta * d * od.road_tons)
    })
}

/// Table of indicators describing one simulated policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    /// Access charges collected, €.
    pub tac_revenue_eur: f64,
    /// Value of the CO2e avoided by rail freight, €.
    pub co2e_rights_eur: f64,
    /// Cost of moving the completed rail freight, €.
    pub transport_cost_eur: f64,
    /// Cost of running slower than the commercial reference, €. Negative
    /// values are savings from running faster.
    pub delay_cost_eur: f64,
    /// Mean speed of completed trains, km/h.
    pub avg_speed_kmh: f64,
    /// Freight loaded on rail, millions of tons.
    pub rail_mtons: f64,
    /// Rail share of total demand, %.
    pub rail_share_pct: f64,
    /// Ton-km of completed rail trips.
    pub rail_tkm: f64,
    pub completed_trains: usize,
    pub incomplete_trains: usize,
}

impl Kpis {
    /// Column names with units, in CSV order.
    pub const HEADER: [&'static str; 10] = [
        "tac_revenue_eur",
        "co2e_rights_eur",
        "transport_cost_eur",
        "delay_cost_eur",
        "avg_speed_kmh",
        "rail_mtons",
        "rail_share_pct",
        "rail_tkm",
        "completed_trains",
        "incomplete_trains",
    ];

    pub fn row(&self) -> Vec<String> {
        vec![
            self.tac_revenue_eur.to_string(),
            self.co2e_rights_eur.to_string(),
            self.transport_cost_eur.to_string(),
            self.delay_cost_eur.to_string(),
            self.avg_speed_kmh.to_string(),
            self.rail_mtons.to_string(),
            self.rail_share_pct.to_string(),
            self.rail_tkm.to_string(),
            self.completed_trains.to_string(),
            self.incomplete_trains.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub policy: String,
    pub revenue_eur: f64,
    pub externality_eur: f64,
    /// `revenue_eur - externality_eur`.
    pub z_eur: f64,
    pub per_path: Vec<PathRevenue>,
    pub kpis: Kpis,
}

/// Objective value and KPIs of a simulation under `policy`.
pub fn objective(
    result: &SimResult,
    policy: &Policy,
    costs: &CostParams,
    basis: RevenueBasis,
) -> Result<ObjectiveBreakdown, EvaluationError> {
    let rev = revenue(result, basis);
    let externality_eur = externality_cost(result, policy)?;
    let tons = result.tons_per_packet;

    let mut transport_cost_eur = 0.0;
    let mut delay_cost_eur = 0.0;
    let mut rail_tkm = 0.0;
    let mut speed_sum = 0.0;
    let mut completed = 0usize;
    for trip in result.completed_trips() {
        let info = &result.paths[trip.path];
        let tau = trip.realized_travel_time_h().unwrap();
        let cost = rail_cost_for(
            info.length_km,
            info.reference_time_h,
            tau,
            trip.lambda,
            costs,
        )?;
        transport_cost_eur += cost.total * tons * info.length_km;
        delay_cost_eur += costs.delay_cost_per_t_h * (tau - info.reference_time_h) * tons;
        rail_tkm += tons * info.length_km;
        speed_sum += info.length_km / tau;
        completed += 1;
    }

    let eta = policy.eta_per_tkm();
    let mut co2e_rights_eur = 0.0;
    let mut rail_tons = 0.0;
    let mut total_tons = 0.0;
    for od in &result.ods {
        let d = od
            .eta_distance_km
            .ok_or_else(|| EvaluationError::MissingDistance(od.id.clone()))?;
        co2e_rights_eur += eta * d * od.rail_tons;
        rail_tons += od.rail_tons;
        total_tons += od.total_tons;
    }

    let kpis = Kpis {
        tac_revenue_eur: rev.total_eur,
        co2e_rights_eur,
        transport_cost_eur,
        delay_cost_eur,
        avg_speed_kmh: if completed > 0 {
            speed_sum / completed as f64
        } else {
            0.0
        },
        rail_mtons: rail_tons / 1e6,
        rail_share_pct: if total_tons > 0.0 {
            100.0 * rail_tons / total_tons
        } else {
            0.0
        },
        rail_tkm,
        completed_trains: completed,
        incomplete_trains: result.incomplete_trips().count(),
    };
    Ok(ObjectiveBreakdown {
        policy: policy.name.clone(),
        revenue_eur: rev.total_eur,
        externality_eur,
        z_eur: rev.total_eur - externality_eur,
        per_path: rev.per_path,
        kpis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{OdOutcome, PathInfo, Trip};

    fn result(trips: Vec<Trip>, road_tons: f64) -> SimResult {
        SimResult {
            horizon_h: 100.0,
            tons_per_packet: 1.0,
            paths: vec![PathInfo {
                id: "r".into(),
                od: 0,
                length_km: 1.0,
                free_flow_time_h: 5.0,
                reference_time_h: 10.0,
            }],
            ods: vec![OdOutcome {
                id: "w".into(),
                total_tons: road_tons + trips.len() as f64,
                rail_tons: trips.len() as f64,
                road_tons,
                eta_distance_km: Some(200.0),
                road_cost_per_tkm: 0.385,
            }],
            trips,
            arc_entries: vec![],
            trace: vec![],
            processed_events: 0,
        }
    }

    fn trip(id: u64, dep: f64, tau: Option<f64>, lambda: f64) -> Trip {
        Trip {
            packet_id: id,
            path: 0,
            departure_h: dep,
            arrival_h: tau.map(|t| dep + t),
            tau_estimate_h: 10.0,
            lambda,
            exogenous: false,
        }
    }

    #[test]
    fn policy_rates() {
        assert!((Policy::policy1().eta_per_tkm() - 6.868407e-3).abs() < 1e-12);
        assert!((Policy::policy2().eta_per_tkm() - 1.68051e-3).abs() < 1e-12);
        assert_eq!(Policy::policy3().eta_per_tkm(), 0.0);
    }

    #[test]
    fn revenue_of_five_ten_hour_trains() {
        // unit payload and unit length: each train pays λ·τ
        let trips = (0..5).map(|i| trip(i, i as f64, Some(10.0), 2.0)).collect();
        let r = revenue(&result(trips, 0.0), RevenueBasis::Realized);
        assert!((r.total_eur - 100.0).abs() < 1e-12);
        assert_eq!(r.per_path[0].trains, 5);
    }

    #[test]
    fn zero_charge_and_empty_results_earn_nothing() {
        let trips = (0..3).map(|i| trip(i, 0.0, Some(12.0), 0.0)).collect();
        assert_eq!(
            revenue(&result(trips, 0.0), RevenueBasis::Realized).total_eur,
            0.0
        );
        assert_eq!(
            revenue(&result(vec![], 0.0), RevenueBasis::Realized).total_eur,
            0.0
        );
    }

    #[test]
    fn incomplete_trains_are_not_billed() {
        let trips = vec![trip(0, 0.0, Some(10.0), 1.0), trip(1, 95.0, None, 1.0)];
        let r = revenue(&result(trips, 0.0), RevenueBasis::Realized);
        assert!((r.total_eur - 10.0).abs() < 1e-12);
    }

    #[test]
    fn estimate_basis_bills_departure_estimate() {
        let trips = vec![trip(0, 0.0, Some(12.0), 1.0)];
        let r = revenue(&result(trips, 0.0), RevenueBasis::Estimate);
        assert!((r.total_eur - 10.0).abs() < 1e-12);
    }

    #[test]
    fn externality_scales_with_road_tons() {
        let r = result(vec![], 1000.0);
        let c = externality_cost(&r, &Policy::policy1()).unwrap();
        assert!((c - 6.868407e-3 * 200.0 * 1000.0).abs() < 1e-9);
        assert_eq!(externality_cost(&r, &Policy::policy3()).unwrap(), 0.0);
        let mut missing = r.clone();
        missing.ods[0].eta_distance_km = None;
        assert_eq!(
            externality_cost(&missing, &Policy::policy1()),
            Err(EvaluationError::MissingDistance("w".into()))
        );
    }

    #[test]
    fn objective_with_no_rail() {
        let r = result(vec![], 1000.0);
        let costs = CostParams::default();
        let o = objective(&r, &Policy::policy2(), &costs, RevenueBasis::Realized).unwrap();
        assert!(o.z_eur < 0.0);
        assert_eq!(o.z_eur, -o.externality_eur);
        let o = objective(&r, &Policy::policy3(), &costs, RevenueBasis::Realized).unwrap();
        assert_eq!(o.z_eur, 0.0);
        assert_eq!(o.kpis.avg_speed_kmh, 0.0);
    }

    #[test]
    fn delay_cost_is_negative_for_fast_trains() {
        let trips = vec![trip(0, 0.0, Some(8.0), 0.0)];
        let o = objective(
            &result(trips, 0.0),
            &Policy::policy3(),
            &CostParams::default(),
            RevenueBasis::Realized,
        )
        .unwrap();
        assert!((o.kpis.delay_cost_eur - 2.23 * -2.0).abs() < 1e-12);
        assert!((o.kpis.avg_speed_kmh - 1.0 / 8.0).abs() < 1e-12);
        assert_eq!(o.z_eur, o.revenue_eur);
    }
}
