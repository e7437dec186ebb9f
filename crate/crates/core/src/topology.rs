//! Network graph, shortest-path / ECMP routing and routing-matrix construction.
//!
//! Node names are mapped to dense indices in sorted-name order, so the
//! resulting indices (and therefore every tie-break that depends on them) do
//! not depend on the order links appear in the input file. Matrix rows follow
//! link input order; columns follow support order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Dense node index into a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A directed link as read from a topology file.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub src: String,
    pub dst: String,
    pub weight: f64,
    pub capacity: Option<f64>,
}

impl LinkSpec {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, weight: f64) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            weight,
            capacity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: f64,
    /// Mbps.
    pub capacity: Option<f64>,
}

/// Directed weighted graph.
#[derive(Debug, Clone)]
pub struct Topology {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    links: Vec<Link>,
    out_links: Vec<Vec<usize>>,
    in_links: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(specs: impl IntoIterator<Item = LinkSpec>) -> Result<Self> {
        let specs: Vec<LinkSpec> = specs.into_iter().collect();
        if specs.is_empty() {
            return Err(Error::InvalidTopology("no links".into()));
        }
        let mut names: Vec<String> = specs
            .iter()
            .flat_map(|l| [l.src.clone(), l.dst.clone()])
            .collect();
        names.sort();
        names.dedup();
        if let Some(bad) = names.iter().find(|n| n.is_empty() || n.contains(',')) {
            return Err(Error::InvalidTopology(format!("invalid node name `{bad}`")));
        }
        if names.len() < 2 {
            return Err(Error::InvalidTopology("need at least two nodes".into()));
        }
        let index: HashMap<String, NodeId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NodeId(i)))
            .collect();

        let n = names.len();
        let mut links = Vec::with_capacity(specs.len());
        let mut seen = HashMap::new();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (k, spec) in specs.iter().enumerate() {
            let (src, dst) = (index[&spec.src], index[&spec.dst]);
            if src == dst {
                return Err(Error::InvalidTopology(format!("self-loop on `{}`", spec.src)));
            }
            if !(spec.weight.is_finite() && spec.weight > 0.0) {
                return Err(Error::InvalidTopology(format!(
                    "link {} -> {} has non-positive weight {}",
                    spec.src, spec.dst, spec.weight
                )));
            }
            if let Some(c) = spec.capacity {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::InvalidTopology(format!(
                        "link {} -> {} has invalid capacity {c}",
                        spec.src, spec.dst
                    )));
                }
            }
            if seen.insert((src, dst), k).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate link {} -> {}",
                    spec.src, spec.dst
                )));
            }
            out_links[src.0].push(k);
            in_links[dst.0].push(k);
            links.push(Link {
                src,
                dst,
                weight: spec.weight,
                capacity: spec.capacity,
            });
        }
        for adj in &mut out_links {
            adj.sort_by_key(|&k| links[k].dst);
        }
        Ok(Self {
            names,
            index,
            links,
            out_links,
            in_links,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, k: usize) -> &Link {
        &self.links[k]
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.names[v.0]
    }

    pub fn node(&self, name: &str) -> Result<NodeId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Outgoing link indices of `v`, ordered by destination index.
    pub fn out_links(&self, v: NodeId) -> &[usize] {
        &self.out_links[v.0]
    }

    pub fn in_links(&self, v: NodeId) -> &[usize] {
        &self.in_links[v.0]
    }

    /// Human-readable `src->dst` label for a link.
    pub fn link_label(&self, k: usize) -> String {
        let l = &self.links[k];
        format!("{}->{}", self.node_name(l.src), self.node_name(l.dst))
    }
}

/// Ordered list of OD pairs; position in the list is the column index of the
/// routing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pairs: Vec<(NodeId, NodeId)>,
    lookup: HashMap<(NodeId, NodeId), usize>,
}

impl SupportSet {
    pub fn new(topo: &Topology, pairs: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidSupport("empty support".into()));
        }
        let n = topo.node_count();
        let mut lookup = HashMap::with_capacity(pairs.len());
        for (j, &(s, d)) in pairs.iter().enumerate() {
            if s.0 >= n || d.0 >= n {
                return Err(Error::InvalidSupport(format!("pair {s} -> {d} references a missing node")));
            }
            if s == d {
                return Err(Error::InvalidSupport(format!(
                    "pair {} -> {} has identical endpoints",
                    topo.node_name(s),
                    topo.node_name(d)
                )));
            }
            if lookup.insert((s, d), j).is_some() {
                return Err(Error::InvalidSupport(format!(
                    "duplicate pair {} -> {}",
                    topo.node_name(s),
                    topo.node_name(d)
                )));
            }
        }
        Ok(Self { pairs, lookup })
    }

    /// Resolves pairs given by node name.
    pub fn from_names<S: AsRef<str>>(topo: &Topology, pairs: &[(S, S)]) -> Result<Self> {
        let resolved = pairs
            .iter()
            .map(|(s, d)| Ok((topo.node(s.as_ref())?, topo.node(d.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(topo, resolved)
    }

    /// Every ordered pair of distinct nodes, source-major.
    pub fn all_pairs(topo: &Topology) -> Self {
        let n = topo.node_count();
        let pairs = (0..n)
            .flat_map(|s| (0..n).filter(move |&d| d != s).map(move |d| (NodeId(s), NodeId(d))))
            .collect();
        Self::new(topo, pairs).expect("all-pairs support is valid")
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn pair(&self, j: usize) -> (NodeId, NodeId) {
        self.pairs[j]
    }

    pub fn column(&self, src: NodeId, dst: NodeId) -> Option<usize> {
        self.lookup.get(&(src, dst)).copied()
    }

    pub fn pair_label(&self, topo: &Topology, j: usize) -> String {
        let (s, d) = self.pairs[j];
        format!("{}->{}", topo.node_name(s), topo.node_name(d))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoutingMode {
    /// One shortest path per pair; ties go to the lexicographically smallest
    /// node sequence.
    ShortestPath,
    /// Equal split over every shortest-path next hop at every node.
    Ecmp,
}

impl std::str::FromStr for RoutingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" | "shortest-path" | "shortest_path" => Ok(Self::ShortestPath),
            "ecmp" => Ok(Self::Ecmp),
            other => Err(Error::InvalidConfig(format!("unknown routing mode `{other}`"))),
        }
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ShortestPath => "shortest-path",
            Self::Ecmp => "ecmp",
        })
    }
}

/// Distance labels and shortest-path predecessor DAG from a single source.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub source: NodeId,
    /// `f64::INFINITY` for unreachable nodes.
    pub dist: Vec<f64>,
    /// For each node, the incoming links lying on some shortest path from the
    /// source.
    pub pred_links: Vec<Vec<usize>>,
}

impl ShortestPaths {
    pub fn is_reachable(&self, v: NodeId) -> bool {
        self.dist[v.0].is_finite()
    }
}

/// Path lengths within this relative tolerance are treated as equal.
const TIE_TOLERANCE: f64 = 1e-9;

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn dijkstra(topo: &Topology, root: NodeId, reverse: bool) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; topo.node_count()];
    let mut heap = BinaryHeap::new();
    dist[root.0] = 0.0;
    heap.push(Reverse(HeapEntry(0.0, root.0)));
    while let Some(Reverse(HeapEntry(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let adj = if reverse {
            topo.in_links(NodeId(u))
        } else {
            topo.out_links(NodeId(u))
        };
        for &k in adj {
            let link = topo.link(k);
            let v = if reverse { link.src.0 } else { link.dst.0 };
            let nd = d + link.weight;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(HeapEntry(nd, v)));
            }
        }
    }
    dist
}

/// Single-source shortest paths (Dijkstra) with the full predecessor DAG.
pub fn shortest_paths(topo: &Topology, src: NodeId) -> ShortestPaths {
    let dist = dijkstra(topo, src, false);
    let mut pred_links = vec![Vec::new(); topo.node_count()];
    for (k, link) in topo.links().iter().enumerate() {
        let du = dist[link.src.0];
        if du.is_finite() && same_length(du + link.weight, dist[link.dst.0]) {
            pred_links[link.dst.0].push(k);
        }
    }
    ShortestPaths {
        source: src,
        dist,
        pred_links,
    }
}

/// The `m x p` routing matrix together with its row and column labelling.
#[derive(Debug, Clone)]
pub struct RoutingMatrix {
    matrix: CsrMatrix,
    row_links: Vec<usize>,
    support: SupportSet,
    mode: RoutingMode,
}

impl RoutingMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Topology link index of each row.
    pub fn row_links(&self) -> &[usize] {
        &self.row_links
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn mode(&self) -> RoutingMode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Columns routed over row `i` (the pair set `S(e)` of that link).
    pub fn pairs_on_row(&self, i: usize) -> &[usize] {
        self.matrix.row(i).cols
    }
}

impl AsRef<CsrMatrix> for RoutingMatrix {
    fn as_ref(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Builds the routing matrix for `support` over `topo`.
pub fn build_routing_matrix(
    topo: &Topology,
    support: &SupportSet,
    mode: RoutingMode,
) -> Result<RoutingMatrix> {
    let n = topo.node_count();
    let mut from: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut to: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); topo.link_count()];

    for (j, &(s, d)) in support.pairs().iter().enumerate() {
        let ds = from[s.0].get_or_insert_with(|| dijkstra(topo, s, false));
        let dd = to[d.0].get_or_insert_with(|| dijkstra(topo, d, true));
        let total = ds[d.0];
        if !total.is_finite() {
            return Err(Error::UnreachablePair {
                src: topo.node_name(s).to_string(),
                dst: topo.node_name(d).to_string(),
            });
        }
        let on_path = |k: usize| {
            let l = topo.link(k);
            let du = ds[l.src.0];
            let dv = dd[l.dst.0];
            du.is_finite() && dv.is_finite() && same_length(du + l.weight + dv, total)
        };
        match mode {
            RoutingMode::ShortestPath => {
                let mut u = s;
                let mut hops = 0;
                while u != d {
                    // out_links are ordered by destination index, so the first
                    // on-path link extends the lexicographically smallest path
                    let k = topo
                        .out_links(u)
                        .iter()
                        .copied()
                        .find(|&k| on_path(k))
                        .expect("a node on a shortest path has an on-path successor");
                    rows[k].push((j, 1.0));
                    u = topo.link(k).dst;
                    hops += 1;
                    debug_assert!(hops <= n);
                }
            }
            RoutingMode::Ecmp => {
                let mut flow = vec![0.0; n];
                flow[s.0] = 1.0;
                let mut order: Vec<usize> = (0..n)
                    .filter(|&v| ds[v].is_finite() && dd[v].is_finite() && same_length(ds[v] + dd[v], total))
                    .collect();
                order.sort_by(|&a, &b| ds[a].total_cmp(&ds[b]).then(a.cmp(&b)));
                for u in order {
                    if u == d.0 || flow[u] == 0.0 {
                        continue;
                    }
                    let next: Vec<usize> = topo
                        .out_links(NodeId(u))
                        .iter()
                        .copied()
                        .filter(|&k| on_path(k))
                        .collect();
                    let share = flow[u] / next.len() as f64;
                    for k in next {
                        rows[k].push((j, share));
                        flow[topo.link(k).dst.0] += share;
                    }
                }
            }
        }
    }

    Ok(RoutingMatrix {
        matrix: CsrMatrix::from_rows(support.len(), rows)?,
        row_links: (0..topo.link_count()).collect(),
        support: support.clone(),
        mode,
    })
}
