//! Random small scenarios shared by the integration and acceptance tests.
#![allow(dead_code)]

use railtac::scenario::Scenario;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const TAGS: [&str; 6] = ["ES", "FR", "IT", "SL", "HK", "HU"];

/// Logit and cost parameters of the Mediterranean corridor.
pub fn default_params(horizon_h: f64, packet_size: f64) -> Value {
    json!({
        "costs": {
            "delay_cost_per_t_h": 2.23,
            "rail_fixed_cost_per_tkm": 0.045,
            "reference_speed_kmh": 53.0,
            "road_cost_per_tkm": 0.385
        },
        "logit": {
            "beta_rail": -149.8372,
            "beta_road": -13.5454,
            "alpha": { "ES": 0.552, "FR": 0.4589, "IT": 0.1356, "SL": 0.3512, "HK": 0.222, "HU": 0.0 }
        },
        "horizon_h": horizon_h,
        "packet_size": packet_size,
        "trains_per_ton": 0.001
    })
}

/// At most 6 nodes, 4 ODs and a 240 h horizon. Regular nodes form a
/// bidirectional chain, sometimes with a shortcut; centroids hang off chain
/// nodes through connector pairs.
pub fn random_scenario_json(seed: u64, unbounded: bool) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_regular = rng.gen_range(2..=4);
    let n_centroid = rng.gen_range(2..=(6 - n_regular).max(2));

    let mut nodes = Vec::new();
    for i in 0..n_regular {
        nodes.push(json!({ "id": format!("N{i}"), "kind": "regular" }));
    }
    let mut attach = Vec::new();
    for c in 0..n_centroid {
        let at = match c {
            0 => 0,
            1 => n_regular - 1,
            _ => rng.gen_range(0..n_regular),
        };
        attach.push(at);
        nodes.push(json!({
            "id": format!("C{c}"),
            "kind": "centroid",
            "country": TAGS[rng.gen_range(0..TAGS.len())],
        }));
    }

    let mut arcs = Vec::new();
    let regular = |rng: &mut ChaCha8Rng, from: usize, to: usize, arcs: &mut Vec<Value>| {
        let mut a = json!({
            "id": format!("N{from}-N{to}-{}", arcs.len()),
            "from": format!("N{from}"),
            "to": format!("N{to}"),
            "kind": "regular",
            "length_km": rng.gen_range(50.0..400.0_f64).round(),
            "tracks_per_direction": rng.gen_range(1..=2),
            "profile": if rng.gen_bool(0.5) { "constant" } else { "passenger_priority" },
        });
        if unbounded {
            a["unbounded"] = json!(true);
        }
        arcs.push(a);
    };
    for i in 0..n_regular - 1 {
        regular(&mut rng, i, i + 1, &mut arcs);
        regular(&mut rng, i + 1, i, &mut arcs);
    }
    if n_regular >= 3 && rng.gen_bool(0.5) {
        regular(&mut rng, 0, n_regular - 1, &mut arcs);
    }
    for (c, &at) in attach.iter().enumerate() {
        arcs.push(json!({ "id": format!("C{c}-out"), "from": format!("C{c}"), "to": format!("N{at}"), "kind": "connector" }));
        arcs.push(json!({ "id": format!("C{c}-in"), "from": format!("N{at}"), "to": format!("C{c}"), "kind": "connector" }));
    }

    let horizon = f64::from(rng.gen_range(24..=240));
    let mut pairs: Vec<(usize, usize)> = (0..n_centroid)
        .flat_map(|a| (0..n_centroid).map(move |b| (a, b)))
        .filter(|&(a, b)| attach[a] != attach[b])
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(rng.gen_range(1..=4));
    let demand: Vec<Value> = pairs
        .iter()
        .map(|&(a, b)| {
            let mut starts = vec![0.0];
            for _ in 0..rng.gen_range(0..3) {
                starts.push(rng.gen_range(1.0..horizon).round());
            }
            starts.sort_by(f64::total_cmp);
            starts.dedup();
            let profile: Vec<(f64, f64)> = starts
                .into_iter()
                .map(|s| (s, rng.gen_range(500.0..25_000.0_f64).round()))
                .collect();
            json!({
                "id": format!("C{a}-C{b}"),
                "origin": format!("C{a}"),
                "destination": format!("C{b}"),
                "demand": profile,
            })
        })
        .collect();

    let packet_size = if rng.gen_bool(0.75) { 1.0 } else { 2.0 };
    json!({
        "network": { "nodes": nodes, "arcs": arcs },
        "demand": demand,
        "params": default_params(horizon, packet_size),
    })
}

pub fn random_scenario(seed: u64, unbounded: bool) -> Scenario {
    let text = random_scenario_json(seed, unbounded).to_string();
    Scenario::from_json(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}"))
}

/// Connector, one regular arc with a constant `k` trains/h and run time
/// `run_time_h`, connector. The OD carries no demand so that only injected
/// trains move.
pub fn single_arc_scenario(k: f64, run_time_h: f64, horizon_h: f64) -> Scenario {
    let v = json!({
        "network": {
            "nodes": [
                { "id": "O", "kind": "centroid" },
                { "id": "A", "kind": "regular" },
                { "id": "B", "kind": "regular" },
                { "id": "D", "kind": "centroid" }
            ],
            "arcs": [
                { "id": "in", "from": "O", "to": "A", "kind": "connector" },
                { "id": "line", "from": "A", "to": "B", "kind": "regular", "length_km": 100.0,
                  "run_time_h": run_time_h, "base_capacity_trains_per_h": k },
                { "id": "out", "from": "B", "to": "D", "kind": "connector" }
            ]
        },
        "demand": [ { "id": "od", "origin": "O", "destination": "D", "demand": [[0.0, 0.0]] } ],
        "params": default_params(horizon_h, 1.0),
    });
    Scenario::from_json(&v.to_string()).unwrap()
}
