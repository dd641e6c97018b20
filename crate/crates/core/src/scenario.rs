//! Scenario files: network, demand, parameters and policies in one JSON
//! document.
//!
//! Units are fixed: hours, kilometres, tons, trains and euros. Time zero is
//! midnight, so the daily capacity schedules line up with `t mod 24`.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{CostParams, LogitParams, OdPair};
use crate::evaluation::Policy;
use crate::network::{
    self, validate_network, Arc, ArcKind, Capacity, CapacityProfile, Network, Node, NodeKind,
    OdEndpoints, Violation,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scenario schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("scenario is invalid:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(
        "train factor {kappa} trains/t is inconsistent with a prototype train of {tons} t \
         (their product must be 1)"
    )]
    InconsistentTrainSize { kappa: f64, tons: f64 },
    #[error("no policy named `{0}`")]
    UnknownPolicy(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Packet and horizon settings of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Simulated period `T_max`, hours.
    pub horizon_h: f64,
    /// Packet size in trains (`1` = one train per packet).
    #[serde(default = "one")]
    pub packet_size: f64,
    /// Trains per ton of freight (`kappa`).
    pub trains_per_ton: f64,
}

fn one() -> f64 {
    1.0
}

impl SimParams {
    /// Tons carried by one packet.
    pub fn tons_per_packet(&self) -> f64 {
        self.packet_size / self.trains_per_ton
    }
}

// ---- file model ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub network: NetworkFile,
    pub demand: Vec<OdPair>,
    pub params: ParamsFile,
    /// Falls back to the three built-in CO2e policies when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: Vec<Node>,
    pub arcs: Vec<ArcFile>,
    /// Named daily schedules; `constant` and `passenger_priority` are built in.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capacity_profiles: BTreeMap<String, CapacityProfile>,
    /// Base capacity per track, trains/h.
    #[serde(default = "default_trains_per_track")]
    pub trains_per_track_per_h: f64,
    /// Running speed used when a regular arc omits `run_time_h`.
    #[serde(default = "default_running_speed")]
    pub running_speed_kmh: f64,
    /// Computed with the minimum-length rule for ODs not listed here.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathFile>,
}

fn default_trains_per_track() -> f64 {
    6.0
}

fn default_running_speed() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcFile {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: ArcKind,
    #[serde(default)]
    pub length_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_time_h: Option<f64>,
    #[serde(default = "one_track")]
    pub tracks_per_direction: u32,
    /// Schedule name for regular arcs; ignored for connectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Overrides `tracks_per_direction * trains_per_track_per_h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_capacity_trains_per_h: Option<f64>,
    /// Regular arc without a capacity limit.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unbounded: bool,
}

fn one_track() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub id: String,
    pub od: String,
    pub arcs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_speed_kmh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub costs: CostParams,
    pub logit: LogitParams,
    pub horizon_h: f64,
    #[serde(default = "one")]
    pub packet_size: f64,
    pub trains_per_ton: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototype_train_tons: Option<f64>,
}

// ---- resolved scenario ---------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    /// One entry per `network.od_pairs`, same order, with distances resolved.
    pub ods: Vec<OdPair>,
    pub costs: CostParams,
    pub logit: LogitParams,
    pub sim: SimParams,
    pub prototype_train_tons: Option<f64>,
    pub policies: Vec<Policy>,
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<FsPath>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    /// Four-node, single-OD corridor used in the guide and the tests.
    pub fn tutorial() -> Self {
        Self::from_json(include_str!("../scenarios/tutorial.json"))
            .expect("bundled tutorial scenario is valid")
    }

    /// Small three-OD corridor with passenger-priority capacity.
    pub fn corridor() -> Self {
        Self::from_json(include_str!("../scenarios/corridor.json"))
            .expect("bundled corridor scenario is valid")
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let ScenarioFile {
            network: nf,
            demand,
            params,
            policies,
        } = file;
        let sim = SimParams {
            horizon_h: params.horizon_h,
            packet_size: params.packet_size,
            trains_per_ton: params.trains_per_ton,
        };
        let mut violations = Vec::new();
        let mut flag = |entity: &str, message: String| {
            violations.push(Violation {
                entity: entity.to_string(),
                message,
            })
        };

        for (name, v) in [
            ("horizon_h", sim.horizon_h),
            ("packet_size", sim.packet_size),
            ("trains_per_ton", sim.trains_per_ton),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                flag("params", format!("`{name}` must be positive, got {v}"));
            }
        }
        for m in params.costs.violations() {
            flag("params.costs", m);
        }
        if let Some(tons) = params.prototype_train_tons {
            if (sim.trains_per_ton * tons - 1.0).abs() > 1e-9 {
                return Err(ScenarioError::InconsistentTrainSize {
                    kappa: sim.trains_per_ton,
                    tons,
                });
            }
        }

        let mut arcs = Vec::with_capacity(nf.arcs.len());
        for a in &nf.arcs {
            let capacity = match a.kind {
                ArcKind::Connector => Capacity::Unbounded,
                ArcKind::Regular if a.unbounded => Capacity::Unbounded,
                ArcKind::Regular => {
                    let name = a.profile.as_deref().unwrap_or("constant");
                    let profile = nf
                        .capacity_profiles
                        .get(name)
                        .cloned()
                        .or_else(|| CapacityProfile::preset(name));
                    match profile {
                        Some(profile) => Capacity::Scheduled {
                            base_trains_per_h: a.base_capacity_trains_per_h.unwrap_or(
                                f64::from(a.tracks_per_direction) * nf.trains_per_track_per_h,
                            ),
                            profile,
                        },
                        None => {
                            flag(
                                &format!("arc {}", a.id),
                                format!("unknown capacity profile `{name}`"),
                            );
                            Capacity::Unbounded
                        }
                    }
                }
            };
            let run_time_h = a.run_time_h.unwrap_or(match a.kind {
                ArcKind::Connector => 0.0,
                ArcKind::Regular => a.length_km / nf.running_speed_kmh,
            });
            arcs.push(Arc {
                id: a.id.clone(),
                from: a.from.clone(),
                to: a.to.clone(),
                kind: a.kind,
                length_km: a.length_km,
                run_time_h,
                tracks_per_direction: a.tracks_per_direction,
                capacity,
            });
        }

        let mut seen = std::collections::BTreeSet::new();
        for od in &demand {
            if !seen.insert(od.id.as_str()) {
                flag(&format!("od {}", od.id), "duplicate OD id".into());
            }
            if let Some(c) = od.road_cost_per_tkm {
                if !(c > 0.0) {
                    flag(
                        &format!("od {}", od.id),
                        format!("road cost {c} must be positive"),
                    );
                }
            }
        }
        let endpoints = demand
            .iter()
            .map(|o| OdEndpoints {
                id: o.id.clone(),
                origin: o.origin.clone(),
                destination: o.destination.clone(),
            })
            .collect();
        let mut net = Network::new(nf.nodes, arcs, endpoints);
        for n in &net.nodes {
            if let Err(e) = params.logit.alpha_for(n.country.as_deref()) {
                if n.kind == NodeKind::Centroid {
                    flag(&format!("node {}", n.id), e.to_string());
                }
            }
        }

        let ref_speed = params.costs.reference_speed_kmh;
        for p in &nf.paths {
            match net.make_path(
                p.id.clone(),
                p.od.clone(),
                p.arcs.clone(),
                p.reference_speed_kmh.unwrap_or(ref_speed),
            ) {
                Ok(path) => net.add_path(path),
                Err(e) => flag(&format!("path {}", p.id), e.to_string()),
            }
        }
        let structural = validate_network(&net);
        let structurally_sound = structural.is_empty();
        violations.extend(structural);

        if structurally_sound {
            for od in &demand {
                if net.paths.iter().any(|p| p.od == od.id) {
                    continue;
                }
                match network::min_cost_path(&net, &od.id, ref_speed) {
                    Ok(p) => net.add_path(p),
                    Err(e) => violations.push(Violation {
                        entity: format!("od {}", od.id),
                        message: e.to_string(),
                    }),
                }
            }
            for p in &net.paths {
                if !(p.length_km > 0.0) {
                    violations.push(Violation {
                        entity: format!("path {}", p.id),
                        message: "has no regular track".into(),
                    });
                }
            }
        }
        if !violations.is_empty() {
            return Err(ScenarioError::Invalid(violations));
        }

        let ods = demand
            .into_iter()
            .map(|mut od| {
                if od.eta_distance_km.is_none() {
                    od.eta_distance_km = net.paths_for(&od.id).next().map(|(_, p)| p.length_km);
                }
                od
            })
            .collect();

        Ok(Self {
            network: net,
            ods,
            costs: params.costs,
            logit: params.logit,
            sim,
            prototype_train_tons: params.prototype_train_tons,
            policies: if policies.is_empty() {
                Policy::presets()
            } else {
                policies
            },
        })
    }

    pub fn policy(&self, name: &str) -> Result<&Policy, ScenarioError> {
        self.policies
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ScenarioError::UnknownPolicy(name.to_string()))
    }

    /// Country tags of an OD's endpoints.
    pub fn od_tags(&self, od: &OdPair) -> (Option<&str>, Option<&str>) {
        let tag = |id: &str| self.network.node(id).and_then(|n| n.country.as_deref());
        (tag(&od.origin), tag(&od.destination))
    }

    pub fn road_cost(&self, od: &OdPair) -> f64 {
        od.road_cost_per_tkm.unwrap_or(self.costs.road_cost_per_tkm)
    }

    /// Path ids in sorted order, the coordinate order of path-based vectors.
    pub fn path_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.network.paths.iter().map(|p| p.id.clone()).collect();
        ids.sort();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tutorial_loads() {
        let s = Scenario::tutorial();
        assert_eq!(s.network.nodes.len(), 4);
        assert_eq!(s.ods.len(), 1);
        assert_eq!(s.network.paths.len(), 1);
        assert_eq!(s.ods[0].eta_distance_km, Some(s.network.paths[0].length_km));
        assert_eq!(s.policies.len(), 3);
    }

    #[test]
    fn corridor_loads_with_computed_paths() {
        let s = Scenario::corridor();
        assert_eq!(s.ods.len(), 3);
        assert!(s
            .ods
            .iter()
            .all(|o| s.network.paths_for(&o.id).count() == 1));
    }

    #[test]
    fn missing_logit_field_is_named() {
        let text =
            include_str!("../scenarios/tutorial.json").replace("\"beta_rail\"", "\"beta_x\"");
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("beta_rail"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn inconsistent_train_factor_is_rejected() {
        let mut file: ScenarioFile =
            serde_json::from_str(include_str!("../scenarios/tutorial.json")).unwrap();
        file.params.prototype_train_tons = Some(1500.0);
        assert!(matches!(
            Scenario::from_file(file),
            Err(ScenarioError::InconsistentTrainSize { .. })
        ));
    }

    #[test]
    fn validation_failures_are_aggregated() {
        let mut file: ScenarioFile =
            serde_json::from_str(include_str!("../scenarios/tutorial.json")).unwrap();
        file.network.arcs[0].run_time_h = Some(0.5);
        file.params.horizon_h = -1.0;
        let Err(ScenarioError::Invalid(v)) = Scenario::from_file(file) else {
            panic!("expected validation failure")
        };
        assert_eq!(v.len(), 2, "{v:?}");
    }
}
