//! Corridor graph: nodes, arcs with daily capacity schedules, and OD paths.
//!
//! Regular arcs carry a running time and a finite base capacity modulated by a
//! 24-hour [`CapacityProfile`]. Connectors are fictitious arcs that link
//! centroids to the physical graph; they have zero running time and no
//! capacity limit. Each direction of a double-track section is its own arc.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hours in one capacity cycle.
pub const DAY_H: f64 = 24.0;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("unknown arc `{0}`")]
    UnknownArc(String),
    #[error("unknown origin-destination pair `{0}`")]
    UnknownOd(String),
    #[error("no path connects `{origin}` to `{destination}` for OD `{od}`")]
    Disconnected {
        od: String,
        origin: String,
        destination: String,
    },
    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Regular,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// Label selecting the node's utility constant in the logit model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// One window of a daily capacity schedule, `[start_h, end_h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWindow {
    pub start_h: f64,
    pub end_h: f64,
    pub fraction: f64,
}

/// Piecewise-constant share of base capacity available to freight over a day.
///
/// The windows must partition `[0, 24)`; the schedule repeats every 24 h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityProfile {
    pub windows: Vec<DailyWindow>,
}

impl CapacityProfile {
    /// Full capacity all day.
    pub fn constant() -> Self {
        Self {
            windows: vec![DailyWindow {
                start_h: 0.0,
                end_h: DAY_H,
                fraction: 1.0,
            }],
        }
    }

    /// Residual freight capacity on lines shared with daytime passenger
    /// services: 15 % in `[10, 18)`, 30 % in `[7, 10)` and `[18, 24)`, full
    /// capacity at night.
    pub fn passenger_priority() -> Self {
        let w = |start_h, end_h, fraction| DailyWindow {
            start_h,
            end_h,
            fraction,
        };
        Self {
            windows: vec![
                w(0.0, 7.0, 1.0),
                w(7.0, 10.0, 0.30),
                w(10.0, 18.0, 0.15),
                w(18.0, 24.0, 0.30),
            ],
        }
    }

    /// Looks up a shipped preset by name.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(Self::constant()),
            "passenger_priority" => Some(Self::passenger_priority()),
            _ => None,
        }
    }

    /// Problems with the schedule, empty when it is a valid daily partition.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.windows.is_empty() {
            out.push("profile has no windows".to_string());
            return out;
        }
        let mut sorted = self.windows.clone();
        sorted.sort_by(|a, b| a.start_h.total_cmp(&b.start_h));
        let mut cursor = 0.0;
        for w in &sorted {
            if !(w.fraction > 0.0 && w.fraction <= 1.0) {
                out.push(format!(
                    "window [{}, {}) has fraction {} outside (0, 1]",
                    w.start_h, w.end_h, w.fraction
                ));
            }
            if w.end_h <= w.start_h {
                out.push(format!("window [{}, {}) is empty", w.start_h, w.end_h));
            }
            if w.start_h != cursor {
                out.push(format!(
                    "windows leave a gap or overlap at hour {cursor} (next window starts at {})",
                    w.start_h
                ));
            }
            cursor = w.end_h;
        }
        if cursor != DAY_H {
            out.push(format!("windows end at hour {cursor}, expected 24"));
        }
        out
    }

    /// Fraction in force at time `t` (hours since midnight of day 0).
    pub fn fraction_at(&self, t: f64) -> f64 {
        let h = t.rem_euclid(DAY_H);
        self.windows
            .iter()
            .find(|w| h >= w.start_h && h < w.end_h)
            .map(|w| w.fraction)
            // rem_euclid can round up to exactly 24.0 for tiny negative inputs
            .unwrap_or_else(|| self.windows[0].fraction)
    }

    /// Time at which the fraction next changes strictly after `t`.
    fn next_breakpoint(&self, t: f64) -> f64 {
        let day_start = (t / DAY_H).floor() * DAY_H;
        let h = t - day_start;
        let next = self
            .windows
            .iter()
            .map(|w| w.end_h)
            .filter(|&end| end > h)
            .fold(DAY_H, f64::min);
        day_start + next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    Regular,
    Connector,
}

/// Capacity of an arc's running section.
#[derive(Debug, Clone, PartialEq)]
pub enum Capacity {
    Unbounded,
    Scheduled {
        base_trains_per_h: f64,
        profile: CapacityProfile,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub kind: ArcKind,
    pub length_km: f64,
    pub run_time_h: f64,
    pub tracks_per_direction: u32,
    pub capacity: Capacity,
}

impl Arc {
    pub fn is_connector(&self) -> bool {
        self.kind == ArcKind::Connector
    }
}

/// Available freight capacity of `arc` at time `t`, in trains per hour.
///
/// Connectors and other unbounded arcs report `f64::INFINITY`.
pub fn capacity_at(arc: &Arc, t: f64) -> Result<f64, NetworkError> {
    if t < 0.0 || t.is_nan() {
        return Err(NetworkError::NegativeTime(t));
    }
    Ok(match &arc.capacity {
        Capacity::Unbounded => f64::INFINITY,
        Capacity::Scheduled {
            base_trains_per_h,
            profile,
        } => base_trains_per_h * profile.fraction_at(t),
    })
}

/// Number of trains the arc can admit over `[t0, t1]`, i.e. the integral of
/// [`capacity_at`] over the interval.
pub fn capacity_integral(arc: &Arc, t0: f64, t1: f64) -> Result<f64, NetworkError> {
    if t0 < 0.0 {
        return Err(NetworkError::NegativeTime(t0));
    }
    match &arc.capacity {
        Capacity::Unbounded => Ok(if t1 > t0 { f64::INFINITY } else { 0.0 }),
        Capacity::Scheduled {
            base_trains_per_h,
            profile,
        } => {
            let mut total = 0.0;
            let mut t = t0;
            while t < t1 {
                let next = profile.next_breakpoint(t).min(t1);
                total += base_trains_per_h * profile.fraction_at(t) * (next - t);
                t = next;
            }
            Ok(total)
        }
    }
}

/// Time needed from `start` for the arc to admit `volume` trains, integrating
/// the capacity schedule across any breakpoints. Zero for unbounded arcs.
pub fn time_to_admit(arc: &Arc, start: f64, volume: f64) -> Result<f64, NetworkError> {
    if start < 0.0 {
        return Err(NetworkError::NegativeTime(start));
    }
    match &arc.capacity {
        Capacity::Unbounded => Ok(0.0),
        Capacity::Scheduled {
            base_trains_per_h,
            profile,
        } => {
            if *base_trains_per_h <= 0.0 {
                return Err(NetworkError::NonPositiveCapacity(*base_trains_per_h));
            }
            let mut remaining = volume;
            let mut t = start;
            loop {
                let rate = base_trains_per_h * profile.fraction_at(t);
                let next = profile.next_breakpoint(t);
                let available = rate * (next - t);
                if available >= remaining {
                    return Ok(t + remaining / rate - start);
                }
                remaining -= available;
                t = next;
            }
        }
    }
}

/// Geometric endpoints of an origin-destination pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdEndpoints {
    pub id: String,
    pub origin: String,
    pub destination: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub id: String,
    pub od: String,
    /// Arc ids; first is the origin connector, last the destination connector.
    pub arcs: Vec<String>,
    /// Positions of `arcs` in [`Network::arcs`].
    pub arc_indices: Vec<usize>,
    pub length_km: f64,
    /// Sum of running times, the uncongested travel time.
    pub free_flow_time_h: f64,
    /// Commercial reference speed. Not required to be physically attainable.
    pub reference_speed_kmh: f64,
    /// `length_km / reference_speed_kmh`.
    pub reference_time_h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    pub paths: Vec<Path>,
    pub od_pairs: Vec<OdEndpoints>,
    arc_index: HashMap<String, usize>,
}

/// A broken invariant, naming the entity at fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

impl Network {
    /// Builds the network without validating it; see [`validate_network`].
    pub fn new(nodes: Vec<Node>, arcs: Vec<Arc>, od_pairs: Vec<OdEndpoints>) -> Self {
        let arc_index = arcs
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        Self {
            nodes,
            arcs,
            paths: Vec::new(),
            od_pairs,
            arc_index,
        }
    }

    pub fn arc(&self, id: &str) -> Option<&Arc> {
        self.arc_index.get(id).map(|&i| &self.arcs[i])
    }

    pub fn arc_position(&self, id: &str) -> Option<usize> {
        self.arc_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn od(&self, id: &str) -> Option<&OdEndpoints> {
        self.od_pairs.iter().find(|o| o.id == id)
    }

    /// Resolves an arc sequence into a [`Path`], computing its length and
    /// free-flow and reference times. Contiguity is checked separately by
    /// [`validate_network`].
    pub fn make_path(
        &self,
        id: impl Into<String>,
        od: impl Into<String>,
        arcs: Vec<String>,
        reference_speed_kmh: f64,
    ) -> Result<Path, NetworkError> {
        let mut arc_indices = Vec::with_capacity(arcs.len());
        let mut length_km = 0.0;
        let mut free_flow_time_h = 0.0;
        for a in &arcs {
            let idx = self
                .arc_position(a)
                .ok_or_else(|| NetworkError::UnknownArc(a.clone()))?;
            let arc = &self.arcs[idx];
            if !arc.is_connector() {
                length_km += arc.length_km;
            }
            free_flow_time_h += arc.run_time_h;
            arc_indices.push(idx);
        }
        Ok(Path {
            id: id.into(),
            od: od.into(),
            arcs,
            arc_indices,
            length_km,
            free_flow_time_h,
            reference_speed_kmh,
            reference_time_h: length_km / reference_speed_kmh,
        })
    }

    pub fn add_path(&mut self, path: Path) {
        self.paths.push(path);
    }

    pub fn paths_for<'a>(&'a self, od: &'a str) -> impl Iterator<Item = (usize, &'a Path)> + 'a {
        self.paths
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.od == od)
    }
}

/// Checks every structural invariant of the network and returns the breaches.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity: String, message: String| out.push(Violation { entity, message });

    let mut node_kinds: HashMap<&str, NodeKind> = HashMap::new();
    for n in &net.nodes {
        if node_kinds.insert(&n.id, n.kind).is_some() {
            push(format!("node {}", n.id), "duplicate node id".into());
        }
    }
    let mut arc_ids = BTreeSet::new();
    for a in &net.arcs {
        let entity = format!("arc {}", a.id);
        if !arc_ids.insert(a.id.as_str()) {
            push(entity.clone(), "duplicate arc id".into());
        }
        let from = node_kinds.get(a.from.as_str()).copied();
        let to = node_kinds.get(a.to.as_str()).copied();
        if from.is_none() {
            push(entity.clone(), format!("unknown tail node `{}`", a.from));
        }
        if to.is_none() {
            push(entity.clone(), format!("unknown head node `{}`", a.to));
        }
        if a.length_km < 0.0 || a.length_km.is_nan() {
            push(entity.clone(), format!("negative length {}", a.length_km));
        }
        match a.kind {
            ArcKind::Connector => {
                if a.run_time_h != 0.0 {
                    push(
                        entity.clone(),
                        format!("connector has run time {} h, expected 0", a.run_time_h),
                    );
                }
                if a.capacity != Capacity::Unbounded {
                    push(
                        entity.clone(),
                        "connector capacity must be unbounded".into(),
                    );
                }
            }
            ArcKind::Regular => {
                if !(a.run_time_h > 0.0) {
                    push(
                        entity.clone(),
                        format!("regular arc run time {} h must be positive", a.run_time_h),
                    );
                }
                if a.tracks_per_direction < 1 {
                    push(
                        entity.clone(),
                        "needs at least one track per direction".into(),
                    );
                }
                // An unbounded regular arc is an explicit opt-in for free-flow runs.
                if let Capacity::Scheduled {
                    base_trains_per_h,
                    profile,
                } = &a.capacity
                {
                    if !(*base_trains_per_h > 0.0 && base_trains_per_h.is_finite()) {
                        push(
                            entity.clone(),
                            format!("base capacity {base_trains_per_h} must be positive"),
                        );
                    }
                    for v in profile.violations() {
                        push(entity.clone(), v);
                    }
                }
                if from == Some(NodeKind::Centroid) || to == Some(NodeKind::Centroid) {
                    push(entity.clone(), "regular arc touches a centroid".into());
                }
            }
        }
    }

    for od in &net.od_pairs {
        for end in [&od.origin, &od.destination] {
            if !node_kinds.contains_key(end.as_str()) {
                push(format!("od {}", od.id), format!("unknown node `{end}`"));
            }
        }
    }

    for p in &net.paths {
        let entity = format!("path {}", p.id);
        let Some(od) = net.od(&p.od) else {
            push(entity, format!("unknown OD `{}`", p.od));
            continue;
        };
        if p.arcs.len() < 2 {
            push(
                entity,
                "needs at least an origin and a destination connector".into(),
            );
            continue;
        }
        let mut arcs = Vec::with_capacity(p.arcs.len());
        for id in &p.arcs {
            match net.arc(id) {
                Some(a) => arcs.push(a),
                None => push(entity.clone(), format!("unknown arc `{id}`")),
            }
        }
        if arcs.len() != p.arcs.len() {
            continue;
        }
        for pair in arcs.windows(2) {
            if pair[0].to != pair[1].from {
                push(
                    entity.clone(),
                    format!(
                        "arcs `{}` and `{}` are not contiguous ({} != {})",
                        pair[0].id, pair[1].id, pair[0].to, pair[1].from
                    ),
                );
            }
        }
        let (first, last) = (arcs[0], arcs[arcs.len() - 1]);
        if !first.is_connector() || !last.is_connector() {
            push(entity.clone(), "must start and end with connectors".into());
        }
        if arcs[1..arcs.len() - 1].iter().any(|a| a.is_connector()) {
            push(entity.clone(), "connector inside the path body".into());
        }
        if first.from != od.origin || last.to != od.destination {
            push(
                entity.clone(),
                format!("does not join {} to {}", od.origin, od.destination),
            );
        }
        if arcs.len() > 2 && !(p.free_flow_time_h > 0.0) {
            push(entity.clone(), "free-flow time must be positive".into());
        }
    }
    out
}

/// Minimum-length path for `od_id`, with ties broken by the lexicographic
/// order of the arc-id sequence.
///
/// The route leaves the origin through a connector, runs over regular arcs
/// only and enters the destination through a connector. Length is the metric
/// because the rail fixed cost is proportional to it.
pub fn min_cost_path(
    net: &Network,
    od_id: &str,
    reference_speed_kmh: f64,
) -> Result<Path, NetworkError> {
    let od = net
        .od(od_id)
        .ok_or_else(|| NetworkError::UnknownOd(od_id.to_string()))?;
    let disconnected = || NetworkError::Disconnected {
        od: od.id.clone(),
        origin: od.origin.clone(),
        destination: od.destination.clone(),
    };

    // Label-setting search over (length, arc sequence); ordered lexicographically.
    #[derive(Clone)]
    struct Label {
        length: f64,
        arcs: Vec<String>,
    }
    let better = |a: &Label, b: &Label| match a.length.total_cmp(&b.length) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.arcs < b.arcs,
    };

    let mut best: BTreeMap<String, Label> = BTreeMap::new();
    for a in net
        .arcs
        .iter()
        .filter(|a| a.is_connector() && a.from == od.origin)
    {
        let label = Label {
            length: 0.0,
            arcs: vec![a.id.clone()],
        };
        match best.get(&a.to) {
            Some(cur) if !better(&label, cur) => {}
            _ => {
                best.insert(a.to.clone(), label);
            }
        }
    }

    let mut settled: BTreeSet<String> = BTreeSet::new();
    let mut finish: Option<Label> = None;
    loop {
        let next = best
            .iter()
            .filter(|(n, _)| !settled.contains(*n))
            .fold(None::<(&String, &Label)>, |acc, (n, l)| match acc {
                Some((_, al)) if !better(l, al) => acc,
                _ => Some((n, l)),
            })
            .map(|(n, l)| (n.clone(), l.clone()));
        let Some((node, label)) = next else { break };
        settled.insert(node.clone());

        for a in net.arcs.iter().filter(|a| a.from == node) {
            let mut arcs = label.arcs.clone();
            arcs.push(a.id.clone());
            if a.is_connector() {
                if a.to == od.destination {
                    let cand = Label {
                        length: label.length,
                        arcs,
                    };
                    if finish.as_ref().is_none_or(|f| better(&cand, f)) {
                        finish = Some(cand);
                    }
                }
                continue;
            }
            if settled.contains(&a.to) {
                continue;
            }
            let cand = Label {
                length: label.length + a.length_km,
                arcs,
            };
            if best.get(&a.to).is_none_or(|cur| better(&cand, cur)) {
                best.insert(a.to.clone(), cand);
            }
        }
    }

    let finish = finish.ok_or_else(disconnected)?;
    net.make_path(
        format!("{}:min", od.id),
        od.id.clone(),
        finish.arcs,
        reference_speed_kmh,
    )
}
