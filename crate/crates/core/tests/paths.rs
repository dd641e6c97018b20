use railtac::network::{
    min_cost_path, Arc, ArcKind, Capacity, CapacityProfile, Network, Node, NodeKind, OdEndpoints,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn regular(id: String, from: usize, to: usize, length: f64) -> Arc {
    Arc {
        id,
        from: format!("N{from}"),
        to: format!("N{to}"),
        kind: ArcKind::Regular,
        length_km: length,
        run_time_h: length / 100.0,
        tracks_per_direction: 1,
        capacity: Capacity::Scheduled {
            base_trains_per_h: 6.0,
            profile: CapacityProfile::constant(),
        },
    }
}

fn connector(id: &str, from: String, to: String) -> Arc {
    Arc {
        id: id.into(),
        from,
        to,
        kind: ArcKind::Connector,
        length_km: 0.0,
        run_time_h: 0.0,
        tracks_per_direction: 1,
        capacity: Capacity::Unbounded,
    }
}

/// Every simple route origin connector -> regular arcs -> destination
/// connector, ranked by (length, arc-id sequence).
fn brute_force(net: &Network) -> Option<(f64, Vec<String>)> {
    fn walk(
        net: &Network,
        node: &str,
        visited: &mut Vec<String>,
        arcs: &mut Vec<String>,
        length: f64,
        best: &mut Option<(f64, Vec<String>)>,
    ) {
        for a in net.arcs.iter().filter(|a| a.from == node) {
            arcs.push(a.id.clone());
            if a.kind == ArcKind::Connector {
                if a.to == "D" {
                    let cand = (length, arcs.clone());
                    let better = match best {
                        None => true,
                        Some(b) => cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1),
                    };
                    if better {
                        *best = Some(cand);
                    }
                }
            } else if !visited.contains(&a.to) {
                visited.push(a.to.clone());
                walk(net, &a.to, visited, arcs, length + a.length_km, best);
                visited.pop();
            }
            arcs.pop();
        }
    }
    let mut best = None;
    for c in net.arcs.iter().filter(|a| a.from == "O") {
        let mut visited = vec![c.to.clone()];
        let mut arcs = vec![c.id.clone()];
        walk(net, &c.to, &mut visited, &mut arcs, 0.0, &mut best);
    }
    best
}

#[test]
fn min_cost_path_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..300 {
        let n = rng.gen_range(2..=6);
        let mut nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                id: format!("N{i}"),
                kind: NodeKind::Regular,
                country: None,
                name: None,
            })
            .collect();
        for c in ["O", "D"] {
            nodes.push(Node {
                id: c.into(),
                kind: NodeKind::Centroid,
                country: None,
                name: None,
            });
        }
        let mut arcs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.gen_bool(0.4) {
                    // Coarse lengths make ties common.
                    let len = f64::from(rng.gen_range(1..=4)) * 50.0;
                    arcs.push(regular(format!("a{}", arcs.len()), a, b, len));
                }
            }
        }
        arcs.push(connector("o0", "O".into(), "N0".into()));
        if n > 2 && rng.gen_bool(0.5) {
            arcs.push(connector("o1", "O".into(), "N1".into()));
        }
        arcs.push(connector("d0", format!("N{}", n - 1), "D".into()));
        let od = OdEndpoints {
            id: "w".into(),
            origin: "O".into(),
            destination: "D".into(),
        };
        let net = Network::new(nodes, arcs, vec![od]);

        match (brute_force(&net), min_cost_path(&net, "w", 53.0)) {
            (None, Err(_)) => {}
            (Some((len, seq)), Ok(p)) => {
                assert_eq!(p.length_km, len);
                assert_eq!(p.arcs, seq);
                checked += 1;
            }
            (b, p) => panic!("exhaustive {b:?} vs search {p:?}"),
        }
    }
    assert!(checked > 100);
}
