//! Discrete-event engine that propagates freight packets through the corridor.
//!
//! Every packet is one event that is rescheduled as it moves. A latent packet
//! (`State0`) waits at its origin connector until enough rail demand has
//! accumulated to fill it; at that moment it is loaded, a new latent packet is
//! created for the same path, and the loaded packet (`State1`) joins the
//! vertical queue of its first regular arc. When a queued packet fires it
//! enters the arc's running section, holds the entry gate for the time the
//! arc needs to admit one packet, and reaches the next queue after the arc's
//! running time. Arriving at the destination connector completes the trip and
//! refreshes the path's travel-time estimate used by later mode choices.
//!
//! Events fire in nondecreasing time order, ties broken by creation order.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{self, next_entry_time, path_shares, EntryTime};
use crate::network::{self, time_to_admit, Capacity, DAY_H};
use crate::pricing::TacScheme;
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] network::NetworkError),
    #[error(transparent)]
    Demand(#[from] demand::DemandError),
    #[error(transparent)]
    Pricing(#[from] crate::pricing::PricingError),
    #[error("path `{0}` is malformed: {1}")]
    MalformedPath(String, String),
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("unknown path `{0}`")]
    UnknownPath(String),
    #[error("failed to write trace: {0}")]
    Trace(#[from] csv::Error),
}

/// How long a packet blocks the entry of an arc's running section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellRule {
    /// `packet_size / k(t)` with `k` read at the entry instant.
    SampleAtEntry,
    /// Smallest `dt` with `∫ k(t) dt = packet_size` over `[entry, entry + dt]`.
    /// Equal to `SampleAtEntry` while the schedule is constant over the dwell.
    #[default]
    IntegrateSchedule,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dwell_rule: DwellRule,
    /// Keep one record per processed event.
    pub record_trace: bool,
}

/// Minimum spacing between packets entering a running section of constant
/// capacity `capacity` trains/h.
pub fn dwell_time(packet_size: f64, capacity: f64) -> Result<f64, SimError> {
    if !(capacity > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "capacity must be positive, got {capacity}"
        )));
    }
    Ok(packet_size / capacity)
}

/// Which pending event fires next: the earliest, ties to the lowest id.
pub fn event_order(events: &[(u64, f64)]) -> Option<u64> {
    events
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|e| e.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PacketState {
    #[serde(rename = "STATE0")]
    Latent,
    #[serde(rename = "STATE1")]
    Moving,
}

impl PacketState {
    pub fn label(self) -> &'static str {
        match self {
            Self::Latent => "STATE0",
            Self::Moving => "STATE1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub event_id: u64,
    pub packet_id: Option<u64>,
    pub state: PacketState,
    pub arc: String,
    pub fire_time_h: f64,
}

/// One loaded train and how its trip went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub packet_id: u64,
    /// Index into [`SimResult::paths`].
    pub path: usize,
    pub departure_h: f64,
    pub arrival_h: Option<f64>,
    /// Path travel-time estimate in force when the train was loaded.
    pub tau_estimate_h: f64,
    /// Access-charge intensity at departure, €/(t·km·h).
    pub lambda: f64,
    /// Injected directly rather than generated from OD demand.
    pub exogenous: bool,
}

impl Trip {
    pub fn realized_travel_time_h(&self) -> Option<f64> {
        self.arrival_h.map(|a| a - self.departure_h)
    }

    pub fn is_completed(&self) -> bool {
        self.arrival_h.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInfo {
    pub id: String,
    pub od: usize,
    pub length_km: f64,
    pub free_flow_time_h: f64,
    pub reference_time_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdOutcome {
    pub id: String,
    pub total_tons: f64,
    pub rail_tons: f64,
    pub road_tons: f64,
    pub eta_distance_km: Option<f64>,
    pub road_cost_per_tkm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub horizon_h: f64,
    pub tons_per_packet: f64,
    pub paths: Vec<PathInfo>,
    pub ods: Vec<OdOutcome>,
    pub trips: Vec<Trip>,
    /// Running-section entry times per arc, in `Network::arcs` order.
    pub arc_entries: Vec<(String, Vec<f64>)>,
    pub trace: Vec<TraceRecord>,
    pub processed_events: u64,
}

impl SimResult {
    pub fn completed_trips(&self) -> impl Iterator<Item = &Trip> {
        self.trips.iter().filter(|t| t.is_completed())
    }

    pub fn incomplete_trips(&self) -> impl Iterator<Item = &Trip> {
        self.trips.iter().filter(|t| !t.is_completed())
    }

    /// Average speed of each completed trip, km/h.
    pub fn speed_samples(&self) -> Vec<f64> {
        self.completed_trips()
            .map(|t| self.paths[t.path].length_km / t.realized_travel_time_h().unwrap())
            .collect()
    }

    /// Running-section entries per 24 h period for each arc.
    pub fn daily_throughput(&self) -> Vec<(String, Vec<usize>)> {
        let days = (self.horizon_h / DAY_H).ceil().max(1.0) as usize;
        self.arc_entries
            .iter()
            .map(|(id, times)| {
                let mut counts = vec![0; days];
                for t in times {
                    let d = ((t / DAY_H).floor() as usize).min(days - 1);
                    counts[d] += 1;
                }
                (id.clone(), counts)
            })
            .collect()
    }

    /// Writes the event trace as CSV.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["event_id", "packet_id", "state", "arc", "fire_time_h"])?;
        for r in &self.trace {
            out.write_record([
                r.event_id.to_string(),
                r.packet_id.map(|p| p.to_string()).unwrap_or_default(),
                r.state.label().to_string(),
                r.arc.clone(),
                r.fire_time_h.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Runs the scenario under `scheme` with default options.
pub fn run(scenario: &Scenario, scheme: &TacScheme) -> Result<SimResult, SimError> {
    Engine::new(scenario, scheme, SimOptions::default())?.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    time: TimeKey,
    event: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TimeKey(f64);

impl Eq for TimeKey {}

impl PartialOrd for TimeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for TimeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
struct Packet {
    state: PacketState,
    path: usize,
    /// Position in the path's arc list.
    leg: usize,
    fire: f64,
    trip: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct ArcQueue {
    queued: BTreeSet<u64>,
    busy_until: f64,
}

/// Simulation state for one run. Build, optionally inject trains, then
/// [`run`](Engine::run).
pub struct Engine<'a> {
    scenario: &'a Scenario,
    scheme: &'a TacScheme,
    options: SimOptions,
    clock: f64,
    next_event: u64,
    next_packet: u64,
    packets: HashMap<u64, Packet>,
    pending: BTreeSet<Key>,
    queues: Vec<ArcQueue>,
    tau: Vec<f64>,
    road_tons: Vec<f64>,
    total_tons: Vec<f64>,
    paths_by_od: Vec<Vec<usize>>,
    path_od: Vec<usize>,
    trips: Vec<Trip>,
    entries: Vec<Vec<f64>>,
    trace: Vec<TraceRecord>,
    processed: u64,
}

impl<'a> Engine<'a> {
    pub fn new(
        scenario: &'a Scenario,
        scheme: &'a TacScheme,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        let sim = scenario.sim;
        if !(sim.horizon_h > 0.0 && sim.packet_size > 0.0 && sim.trains_per_ton > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "horizon, packet size and train factor must be positive: {sim:?}"
            )));
        }
        scheme.validate()?;
        let net = &scenario.network;
        let od_index: HashMap<&str, usize> = scenario
            .ods
            .iter()
            .enumerate()
            .map(|(i, o)| (o.id.as_str(), i))
            .collect();
        let mut paths_by_od = vec![Vec::new(); scenario.ods.len()];
        let mut path_od = Vec::with_capacity(net.paths.len());
        for (pi, p) in net.paths.iter().enumerate() {
            let oi = *od_index.get(p.od.as_str()).ok_or_else(|| {
                SimError::MalformedPath(p.id.clone(), format!("unknown OD `{}`", p.od))
            })?;
            if p.arc_indices.len() < 2 || p.arc_indices.len() != p.arcs.len() {
                return Err(SimError::MalformedPath(
                    p.id.clone(),
                    "needs resolved origin and destination connectors".into(),
                ));
            }
            if !net.arcs[p.arc_indices[0]].is_connector()
                || !net.arcs[*p.arc_indices.last().unwrap()].is_connector()
            {
                return Err(SimError::MalformedPath(
                    p.id.clone(),
                    "must start and end with connectors".into(),
                ));
            }
            if !(p.length_km > 0.0 && p.reference_time_h > 0.0) {
                return Err(SimError::MalformedPath(
                    p.id.clone(),
                    "length and reference time must be positive".into(),
                ));
            }
            paths_by_od[oi].push(pi);
            path_od.push(oi);
        }
        let total_tons: Vec<f64> = scenario
            .ods
            .iter()
            .map(|o| o.demand.integral(0.0, sim.horizon_h))
            .collect();

        let mut engine = Self {
            scenario,
            scheme,
            options,
            clock: 0.0,
            next_event: 0,
            next_packet: 0,
            packets: HashMap::new(),
            pending: BTreeSet::new(),
            queues: vec![ArcQueue::default(); net.arcs.len()],
            tau: net.paths.iter().map(|p| p.reference_time_h).collect(),
            road_tons: total_tons.clone(),
            total_tons,
            paths_by_od,
            path_od,
            trips: Vec::new(),
            entries: vec![Vec::new(); net.arcs.len()],
            trace: Vec::new(),
            processed: 0,
        };
        for pi in 0..net.paths.len() {
            engine.spawn_latent(pi, 0.0);
        }
        Ok(engine)
    }

    /// Adds an already-loaded train on `path_id` departing at `time`, outside
    /// of OD demand. Its tonnage is not taken from any OD.
    pub fn inject(&mut self, path_id: &str, time: f64) -> Result<u64, SimError> {
        if !(time >= 0.0 && time <= self.scenario.sim.horizon_h) {
            return Err(SimError::InvalidConfig(format!(
                "injection time {time} outside the horizon"
            )));
        }
        let pi = self
            .scenario
            .network
            .paths
            .iter()
            .position(|p| p.id == path_id)
            .ok_or_else(|| SimError::UnknownPath(path_id.to_string()))?;
        let id = self.new_event_id();
        let trip = self.open_trip(pi, time, true)?;
        let packet = Packet {
            state: PacketState::Moving,
            path: pi,
            leg: 0,
            fire: time,
            trip: Some(trip),
        };
        let arc = self.scenario.network.paths[pi].arc_indices[0];
        self.queues[arc].queued.insert(id);
        self.schedule(id, packet);
        Ok(id)
    }

    pub fn run(mut self) -> Result<SimResult, SimError> {
        let horizon = self.scenario.sim.horizon_h;
        while let Some(&key) = self.pending.first() {
            if key.time.0 > horizon {
                break;
            }
            self.pending.remove(&key);
            debug_assert!(key.time.0 >= self.clock);
            self.clock = key.time.0;
            self.processed += 1;
            self.process(key.event)?;
        }
        Ok(self.finish())
    }

    fn new_event_id(&mut self) -> u64 {
        let id = self.next_event;
        self.next_event += 1;
        id
    }

    fn schedule(&mut self, id: u64, packet: Packet) {
        self.pending.insert(Key {
            time: TimeKey(packet.fire),
            event: id,
        });
        self.packets.insert(id, packet);
    }

    fn reschedule(&mut self, id: u64, time: f64) {
        let p = self.packets.get_mut(&id).expect("queued packet exists");
        self.pending.remove(&Key {
            time: TimeKey(p.fire),
            event: id,
        });
        p.fire = time;
        self.pending.insert(Key {
            time: TimeKey(time),
            event: id,
        });
    }

    fn spawn_latent(&mut self, path: usize, time: f64) {
        let id = self.new_event_id();
        let arc = self.scenario.network.paths[path].arc_indices[0];
        self.queues[arc].queued.insert(id);
        self.schedule(
            id,
            Packet {
                state: PacketState::Latent,
                path,
                leg: 0,
                fire: time,
                trip: None,
            },
        );
    }

    fn open_trip(
        &mut self,
        path: usize,
        departure: f64,
        exogenous: bool,
    ) -> Result<usize, SimError> {
        let sc = self.scenario;
        let lambda = self.scheme.lambda_at(
            &sc.network.paths[path],
            departure,
            sc.costs.rail_fixed_cost_per_tkm,
            sc.sim.horizon_h,
        )?;
        let packet_id = self.next_packet;
        self.next_packet += 1;
        self.trips.push(Trip {
            packet_id,
            path,
            departure_h: departure,
            arrival_h: None,
            tau_estimate_h: self.tau[path],
            lambda,
            exogenous,
        });
        Ok(self.trips.len() - 1)
    }

    fn process(&mut self, id: u64) -> Result<(), SimError> {
        let packet = self.packets[&id].clone();
        let path = &self.scenario.network.paths[packet.path];
        if self.options.record_trace {
            self.trace.push(TraceRecord {
                event_id: id,
                packet_id: packet.trip.map(|t| self.trips[t].packet_id),
                state: packet.state,
                arc: path.arcs[packet.leg].clone(),
                fire_time_h: self.clock,
            });
        }
        if packet.state == PacketState::Latent && !self.load(id)? {
            return Ok(());
        }
        self.advance(id)
    }

    /// Fills and loads the latent packet `id`. Returns false when demand runs
    /// out before the horizon and the packet is discarded.
    fn load(&mut self, id: u64) -> Result<bool, SimError> {
        let sc = self.scenario;
        let now = self.clock;
        let pi = self.packets[&id].path;
        let oi = self.path_od[pi];
        let od = &sc.ods[oi];

        let mut u = Vec::with_capacity(self.paths_by_od[oi].len());
        for &r in &self.paths_by_od[oi] {
            let path = &sc.network.paths[r];
            let lambda = self.scheme.lambda_at(
                path,
                now,
                sc.costs.rail_fixed_cost_per_tkm,
                sc.sim.horizon_h,
            )?;
            let cost = demand::rail_cost(path, self.tau[r], lambda, &sc.costs)?;
            u.push(sc.logit.beta_rail * cost.total);
        }
        let (o_tag, d_tag) = sc.od_tags(od);
        let v = sc.logit.beta_road * sc.road_cost(od)
            + sc.logit.alpha_for(o_tag)?
            + sc.logit.alpha_for(d_tag)?;
        let shares = path_shares(&u, v);
        let pos = self.paths_by_od[oi].iter().position(|&r| r == pi).unwrap();
        let share = shares[pos];

        let entry = if share > 0.0 {
            next_entry_time(
                &od.demand,
                share,
                now,
                sc.sim.packet_size,
                sc.sim.trains_per_ton,
                sc.sim.horizon_h,
            )?
        } else {
            EntryTime::BeyondHorizon
        };
        let arc = sc.network.paths[pi].arc_indices[0];
        let EntryTime::At(t_load) = entry else {
            self.queues[arc].queued.remove(&id);
            self.packets.remove(&id);
            return Ok(false);
        };

        self.spawn_latent(pi, t_load);
        let trip = self.open_trip(pi, t_load, false)?;
        let p = self.packets.get_mut(&id).unwrap();
        p.state = PacketState::Moving;
        p.trip = Some(trip);
        p.fire = t_load;
        self.road_tons[oi] -= sc.sim.tons_per_packet();
        Ok(true)
    }

    /// Moves packet `id` through the running section of its current arc, or
    /// completes it at the destination connector.
    fn advance(&mut self, id: u64) -> Result<(), SimError> {
        let sc = self.scenario;
        let mut packet = self.packets[&id].clone();
        let path = &sc.network.paths[packet.path];
        let arc_idx = path.arc_indices[packet.leg];
        let t = packet.fire;

        if packet.leg + 1 == path.arc_indices.len() {
            self.queues[arc_idx].queued.remove(&id);
            self.packets.remove(&id);
            let trip = &mut self.trips[packet.trip.expect("moving packet has a trip")];
            trip.arrival_h = Some(t);
            self.tau[packet.path] = t - trip.departure_h;
            return Ok(());
        }

        let arc = &sc.network.arcs[arc_idx];
        let dwell = match (&arc.capacity, self.options.dwell_rule) {
            (Capacity::Unbounded, _) => 0.0,
            (Capacity::Scheduled { .. }, DwellRule::SampleAtEntry) => {
                dwell_time(sc.sim.packet_size, network::capacity_at(arc, t)?)?
            }
            (Capacity::Scheduled { .. }, DwellRule::IntegrateSchedule) => {
                time_to_admit(arc, t, sc.sim.packet_size)?
            }
        };
        let queue = &mut self.queues[arc_idx];
        queue.queued.remove(&id);
        if dwell > 0.0 {
            let gate = t + dwell;
            queue.busy_until = queue.busy_until.max(gate);
            let peers: Vec<u64> = queue.queued.iter().copied().collect();
            for j in peers {
                if self.packets[&j].fire < gate {
                    self.reschedule(j, gate);
                }
            }
        }
        if !arc.is_connector() {
            self.entries[arc_idx].push(t);
        }

        packet.leg += 1;
        let next = path.arc_indices[packet.leg];
        let arrival = t + arc.run_time_h;
        packet.fire = arrival.max(self.queues[next].busy_until);
        self.queues[next].queued.insert(id);
        self.schedule(id, packet);
        Ok(())
    }

    fn finish(self) -> SimResult {
        let sc = self.scenario;
        let tons = sc.sim.tons_per_packet();
        let paths = sc
            .network
            .paths
            .iter()
            .zip(&self.path_od)
            .map(|(p, &od)| PathInfo {
                id: p.id.clone(),
                od,
                length_km: p.length_km,
                free_flow_time_h: p.free_flow_time_h,
                reference_time_h: p.reference_time_h,
            })
            .collect();
        let ods = sc
            .ods
            .iter()
            .enumerate()
            .map(|(i, o)| OdOutcome {
                id: o.id.clone(),
                total_tons: self.total_tons[i],
                rail_tons: self.total_tons[i] - self.road_tons[i],
                road_tons: self.road_tons[i],
                eta_distance_km: o.eta_distance_km,
                road_cost_per_tkm: sc.road_cost(o),
            })
            .collect();
        SimResult {
            horizon_h: sc.sim.horizon_h,
            tons_per_packet: tons,
            paths,
            ods,
            trips: self.trips,
            arc_entries: sc
                .network
                .arcs
                .iter()
                .map(|a| a.id.clone())
                .zip(self.entries)
                .collect(),
            trace: self.trace,
            processed_events: self.processed,
        }
    }
}
