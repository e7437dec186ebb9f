//! Synthetic topologies, supports and power-law traffic for experiments.

use rand::seq::index::sample;
use rand::Rng;

use crate::dist::sample_normalized_power_law;
use crate::error::{Error, Result};
use crate::tm::TrafficVector;
use crate::topology::{LinkSpec, NodeId, SupportSet, Topology};

fn node_name(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("n{i:0width$}")
}

/// Strongly connected random topology: a bidirectional ring plus `chords`
/// random bidirectional shortcuts, integer weights in `1..=max_weight` (so
/// equal-cost ties occur).
pub fn random_topology(nodes: usize, chords: usize, max_weight: u32, rng: &mut impl Rng) -> Result<Topology> {
    if nodes < 3 {
        return Err(Error::InvalidConfig("random topology needs at least 3 nodes".into()));
    }
    let max_weight = max_weight.max(1);
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..nodes {
        let j = (i + 1) % nodes;
        edges.insert((i.min(j), i.max(j)));
    }
    let possible = nodes * (nodes - 1) / 2;
    let target = (nodes + chords).min(possible);
    while edges.len() < target {
        let (i, j) = (rng.random_range(0..nodes), rng.random_range(0..nodes));
        if i != j {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    let mut specs = Vec::with_capacity(2 * edges.len());
    for (i, j) in edges {
        for (s, d) in [(i, j), (j, i)] {
            let w = rng.random_range(1..=max_weight) as f64;
            specs.push(LinkSpec::new(node_name(s, nodes), node_name(d, nodes), w));
        }
    }
    Topology::new(specs)
}

/// `p` distinct OD pairs drawn uniformly, listed in source-major order.
pub fn random_support(topo: &Topology, p: usize, rng: &mut impl Rng) -> Result<SupportSet> {
    let n = topo.node_count();
    let total = n * (n - 1);
    if p == 0 || p > total {
        return Err(Error::InvalidConfig(format!("support size must be in 1..={total}, got {p}")));
    }
    let mut picked = sample(rng, total, p).into_vec();
    picked.sort_unstable();
    let pairs = picked
        .into_iter()
        .map(|k| {
            let (s, r) = (k / (n - 1), k % (n - 1));
            let d = if r >= s { r + 1 } else { r };
            (NodeId(s), NodeId(d))
        })
        .collect();
    SupportSet::new(topo, pairs)
}

/// `p` demands with normalized cdf `y^α`, scaled so the largest equals
/// `peak_mbps`.
pub fn synth_demands(p: usize, alpha: f64, peak_mbps: f64, rng: &mut impl Rng) -> Result<TrafficVector> {
    if p == 0 {
        return Err(Error::InvalidConfig("need at least one demand".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    if !(peak_mbps.is_finite() && peak_mbps > 0.0) {
        return Err(Error::InvalidConfig(format!("peak demand must be positive, got {peak_mbps}")));
    }
    TrafficVector::new(
        sample_normalized_power_law(p, alpha, rng)
            .into_iter()
            .map(|v| v * peak_mbps)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::rng_from_seed;
    use crate::topology::{build_routing_matrix, RoutingMode};

    #[test]
    fn random_topology_is_connected() {
        let mut rng = rng_from_seed(3);
        let t = random_topology(30, 20, 4, &mut rng).unwrap();
        assert_eq!(t.node_count(), 30);
        assert_eq!(t.link_count(), 2 * 50);
        let s = SupportSet::all_pairs(&t);
        build_routing_matrix(&t, &s, RoutingMode::Ecmp).unwrap();
    }

    #[test]
    fn support_pairs_are_distinct() {
        let mut rng = rng_from_seed(8);
        let t = random_topology(6, 2, 3, &mut rng).unwrap();
        let s = random_support(&t, 30, &mut rng).unwrap();
        assert_eq!(s, SupportSet::all_pairs(&t));
        assert!(random_support(&t, 31, &mut rng).is_err());
    }

    #[test]
    fn single_demand_equals_peak() {
        let x = synth_demands(1, 0.5, 250.0, &mut rng_from_seed(0)).unwrap();
        assert_eq!(x.values(), &[250.0]);
        assert!(synth_demands(3, -1.0, 1.0, &mut rng_from_seed(0)).is_err());
    }
}
