#![allow(dead_code)]

use tmest_core::dist::rng_from_seed;
use tmest_core::synth::{random_support, random_topology, synth_demands};
use tmest_core::{build_routing_matrix, simulate_loads, RoutingMatrix, RoutingMode, Topology, TrafficVector};

/// Random 30-node topology, 200-pair support, demands with normalized cdf
/// `y^0.5` peaking at 100 Mbps.
pub struct Synthetic {
    pub topo: Topology,
    pub routing: RoutingMatrix,
    pub truth: TrafficVector,
    pub loads: Vec<f64>,
}

pub fn synthetic(mode: RoutingMode, seed: u64) -> Synthetic {
    synthetic_with(30, 20, 200, 0.5, mode, seed)
}

pub fn synthetic_with(nodes: usize, chords: usize, p: usize, alpha: f64, mode: RoutingMode, seed: u64) -> Synthetic {
    let mut rng = rng_from_seed(seed);
    let topo = random_topology(nodes, chords, 4, &mut rng).unwrap();
    let support = random_support(&topo, p, &mut rng).unwrap();
    let routing = build_routing_matrix(&topo, &support, mode).unwrap();
    let truth = synth_demands(p, alpha, 100.0, &mut rng).unwrap();
    let loads = simulate_loads(&routing, &truth).unwrap().into_values();
    Synthetic {
        topo,
        routing,
        truth,
        loads,
    }
}
