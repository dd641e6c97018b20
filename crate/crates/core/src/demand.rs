//! Freight demand, rail cost structure and the road/rail logit split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Path;

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("travel time must be positive, got {0} h")]
    NonPositiveTime(f64),
    #[error("path length must be positive, got {0} km")]
    NonPositiveLength(f64),
    #[error("no logit constant for country tag `{0}`")]
    MissingAlpha(String),
    #[error("demand profile is invalid: {0}")]
    InvalidProfile(String),
    #[error("entry-time inputs out of range: {0}")]
    InvalidEntryInputs(String),
}

/// Piecewise-constant demand intensity in tons per hour.
///
/// Each breakpoint `(start_h, tons_per_h)` holds until the next one; the last
/// holds until the end of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DemandProfile {
    breakpoints: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for DemandProfile {
    type Error = DemandError;

    fn try_from(breakpoints: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        Self::new(breakpoints)
    }
}

impl From<DemandProfile> for Vec<(f64, f64)> {
    fn from(p: DemandProfile) -> Self {
        p.breakpoints
    }
}

impl DemandProfile {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self, DemandError> {
        let Some(first) = breakpoints.first() else {
            return Err(DemandError::InvalidProfile("no breakpoints".into()));
        };
        if first.0 != 0.0 {
            return Err(DemandError::InvalidProfile(format!(
                "first breakpoint starts at {} h, expected 0",
                first.0
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(DemandError::InvalidProfile(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
        }
        if let Some((t, r)) = breakpoints
            .iter()
            .find(|(_, r)| !(r.is_finite() && *r >= 0.0))
        {
            return Err(DemandError::InvalidProfile(format!(
                "rate {r} at {t} h must be finite and non-negative"
            )));
        }
        Ok(Self { breakpoints })
    }

    pub fn constant(tons_per_h: f64) -> Result<Self, DemandError> {
        Self::new(vec![(0.0, tons_per_h)])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .take_while(|(s, _)| *s <= t)
            .last()
            .map_or(0.0, |(_, r)| *r)
    }

    /// Pieces clipped to `[from, to)` as `(start, end, rate)`.
    fn pieces(&self, from: f64, to: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.breakpoints.len();
        (0..n).filter_map(move |i| {
            let (s, r) = self.breakpoints[i];
            let e = if i + 1 < n {
                self.breakpoints[i + 1].0
            } else {
                f64::INFINITY
            };
            let (s, e) = (s.max(from), e.min(to));
            (e > s).then_some((s, e, r))
        })
    }

    /// Tons generated over `[from, to]`.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        self.pieces(from, to).map(|(s, e, r)| (e - s) * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdPair {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub demand: DemandProfile,
    /// Falls back to [`CostParams::road_cost_per_tkm`] when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_cost_per_tkm: Option<f64>,
    /// Distance that scales per-ton-km externality rates. Defaults to the
    /// length of the OD's rail path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_distance_km: Option<f64>,
}

/// Unit costs of both modes. All per-ton-km figures are in euros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Cost of one hour of delay per ton, €/(t·h).
    pub delay_cost_per_t_h: f64,
    /// Rail fixed cost at commercial speed, €/(t·km).
    pub rail_fixed_cost_per_tkm: f64,
    /// Commercial reference speed used to derive each path's reference time.
    pub reference_speed_kmh: f64,
    /// Default road cost, €/(t·km).
    pub road_cost_per_tkm: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            delay_cost_per_t_h: 2.23,
            rail_fixed_cost_per_tkm: 0.045,
            reference_speed_kmh: 53.0,
            road_cost_per_tkm: 0.385,
        }
    }
}

impl CostParams {
    pub fn violations(&self) -> Vec<String> {
        let fields = [
            ("delay_cost_per_t_h", self.delay_cost_per_t_h),
            ("rail_fixed_cost_per_tkm", self.rail_fixed_cost_per_tkm),
            ("reference_speed_kmh", self.reference_speed_kmh),
            ("road_cost_per_tkm", self.road_cost_per_tkm),
        ];
        fields
            .iter()
            .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
            .map(|(n, v)| format!("cost parameter `{n}` must be positive, got {v}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitParams {
    pub beta_rail: f64,
    pub beta_road: f64,
    /// Node utility constants keyed by country tag.
    #[serde(default)]
    pub alpha: BTreeMap<String, f64>,
}

impl LogitParams {
    /// Estimates fitted on the Mediterranean corridor.
    pub fn mediterranean() -> Self {
        let alpha = [
            ("ES", 0.5520),
            ("FR", 0.4589),
            ("IT", 0.1356),
            ("SL", 0.3512),
            ("HK", 0.2220),
            ("HU", 0.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            beta_rail: -149.8372,
            beta_road: -13.5454,
            alpha,
        }
    }

    /// Constant for a node tag; untagged nodes contribute zero.
    pub fn alpha_for(&self, tag: Option<&str>) -> Result<f64, DemandError> {
        match tag {
            None => Ok(0.0),
            Some(t) => self
                .alpha
                .get(t)
                .copied()
                .ok_or_else(|| DemandError::MissingAlpha(t.to_string())),
        }
    }
}

/// Components of the rail generalized cost, each in €/(t·km).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RailCostBreakdown {
    pub delay_component: f64,
    pub access_component: f64,
    pub fixed_component: f64,
    pub total: f64,
}

/// Rail cost per ton-km on `path` for a trip lasting `tau_now` hours under
/// access-charge intensity `lambda_now` (€/(t·km·h)).
///
/// Delay is charged only for the time beyond the commercial reference; trips
/// faster than the reference get no credit here.
pub fn rail_cost(
    path: &Path,
    tau_now: f64,
    lambda_now: f64,
    params: &CostParams,
) -> Result<RailCostBreakdown, DemandError> {
    rail_cost_for(
        path.length_km,
        path.reference_time_h,
        tau_now,
        lambda_now,
        params,
    )
}

/// [`rail_cost`] for a route given only by its length and reference time.
pub fn rail_cost_for(
    length_km: f64,
    reference_time_h: f64,
    tau_now: f64,
    lambda_now: f64,
    params: &CostParams,
) -> Result<RailCostBreakdown, DemandError> {
    if !(tau_now > 0.0) {
        return Err(DemandError::NonPositiveTime(tau_now));
    }
    if !(length_km > 0.0) {
        return Err(DemandError::NonPositiveLength(length_km));
    }
    let delay_component =
        (params.delay_cost_per_t_h * (tau_now - reference_time_h) / length_km).max(0.0);
    let access_component = lambda_now * tau_now;
    let fixed_component = params.rail_fixed_cost_per_tkm;
    Ok(RailCostBreakdown {
        delay_component,
        access_component,
        fixed_component,
        total: delay_component + access_component + fixed_component,
    })
}

/// Binary logit probability of choosing rail.
pub fn rail_share(u_rail: f64, v_road: f64) -> f64 {
    let m = u_rail.max(v_road);
    let eu = (u_rail - m).exp();
    let ev = (v_road - m).exp();
    eu / (eu + ev)
}

/// `(rail, road)` shares of a binary split; the road share is the complement
/// so the pair sums to exactly one.
pub fn binary_shares(u_rail: f64, v_road: f64) -> (f64, f64) {
    let rail = rail_share(u_rail, v_road);
    (rail, 1.0 - rail)
}

/// Logit shares of each rail path against the road alternative. The road
/// share is `1 - sum`.
pub fn path_shares(u_paths: &[f64], v_road: f64) -> Vec<f64> {
    let m = u_paths.iter().copied().fold(v_road, f64::max);
    let ev = (v_road - m).exp();
    let eu: Vec<f64> = u_paths.iter().map(|u| (u - m).exp()).collect();
    let denom = ev + eu.iter().sum::<f64>();
    eu.into_iter().map(|e| e / denom).collect()
}

/// Linear utilities `(U_rail, V_road)` for an OD whose endpoints carry the
/// given country tags.
pub fn utilities(
    cost: &RailCostBreakdown,
    road_cost_per_tkm: f64,
    origin_tag: Option<&str>,
    destination_tag: Option<&str>,
    logit: &LogitParams,
) -> Result<(f64, f64), DemandError> {
    let u = logit.beta_rail * cost.total;
    let v = logit.beta_road * road_cost_per_tkm
        + logit.alpha_for(origin_tag)?
        + logit.alpha_for(destination_tag)?;
    Ok((u, v))
}

/// Outcome of the train-filling equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryTime {
    At(f64),
    BeyondHorizon,
}

/// Earliest time `t ≥ from` at which rail demand accumulated since `from`
/// fills one packet: `kappa * share * ∫ D(t) dt = delta_f`.
pub fn next_entry_time(
    profile: &DemandProfile,
    share: f64,
    from: f64,
    delta_f: f64,
    kappa: f64,
    horizon: f64,
) -> Result<EntryTime, DemandError> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(DemandError::InvalidEntryInputs(format!(
            "share {share} outside (0, 1]"
        )));
    }
    if !(delta_f > 0.0 && kappa > 0.0) {
        return Err(DemandError::InvalidEntryInputs(format!(
            "packet size {delta_f} and train factor {kappa} must be positive"
        )));
    }
    let mut needed = delta_f / (kappa * share);
    for (s, e, rate) in profile.pieces(from, horizon) {
        if rate <= 0.0 {
            continue;
        }
        let available = rate * (e - s);
        if available >= needed {
            return Ok(EntryTime::At(s + needed / rate));
        }
        needed -= available;
    }
    Ok(EntryTime::BeyondHorizon)
}
