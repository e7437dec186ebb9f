//! Shared fixtures for the benchmarks.

use tmest_core::dist::rng_from_seed;
use tmest_core::synth::{random_support, random_topology, synth_demands};
use tmest_core::{
    build_routing_matrix, simulate_loads, LinkLoadVector, RoutingMatrix, RoutingMode, SupportSet, Topology,
    TrafficVector,
};

/// A random network with one synthetic TM routed over it.
pub struct Problem {
    pub topo: Topology,
    pub support: SupportSet,
    pub routing: RoutingMatrix,
    pub truth: TrafficVector,
    pub loads: LinkLoadVector,
}

/// `nodes`-node ring with `chords` extra links, `pairs` random OD pairs and
/// demands drawn from `y^alpha`. Fails only on impossible sizes.
pub fn problem(nodes: usize, chords: usize, pairs: usize, alpha: f64, mode: RoutingMode, seed: u64) -> Problem {
    let mut rng = rng_from_seed(seed);
    let topo = random_topology(nodes, chords, 4, &mut rng).expect("topology");
    let support = random_support(&topo, pairs, &mut rng).expect("support");
    let routing = build_routing_matrix(&topo, &support, mode).expect("routing");
    let truth = synth_demands(pairs, alpha, 100.0, &mut rng).expect("demands");
    let loads = simulate_loads(&routing, &truth).expect("loads");
    Problem {
        topo,
        support,
        routing,
        truth,
        loads,
    }
}

/// Backbone-sized: 12 nodes,
/// 30 directed links and all 132 ordered pairs.
pub fn small(mode: RoutingMode) -> Problem {
    problem(12, 3, 132, 0.5, mode, 1)
}

/// A larger sparse instance: 82 nodes, a few hundred links, ~2000 pairs.
pub fn large(mode: RoutingMode) -> Problem {
    problem(82, 66, 1939, 0.5, mode, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_advertised_shape() {
        let p = small(RoutingMode::ShortestPath);
        assert_eq!((p.topo.link_count(), p.routing.cols()), (30, 132));
        let p = large(RoutingMode::Ecmp);
        assert_eq!((p.routing.rows(), p.routing.cols(), p.support.len()), (296, 1939, 1939));
        assert_eq!(p.loads.len(), p.routing.rows());
    }
}
