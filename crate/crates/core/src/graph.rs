//! Unweighted undirected graphs, random instance generation and the exact
//! brute-force Max-Cut oracle.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, stream};

/// Largest node count a [`Graph`] may carry (assignments are `u64` masks).
pub const MAX_NODES: usize = 63;

/// Largest node count accepted by [`brute_force_maxcut`].
pub const MAX_BRUTE_FORCE_NODES: usize = 24;

/// An undirected, unweighted simple graph.
///
/// Edges are stored canonically: each pair as `(i, j)` with `i < j`, the list
/// sorted lexicographically and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        let edges: Vec<(usize, usize)> = repr.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Graph::new(repr.n, edges.iter().copied())?;
        if g.edges != edges {
            return Err(Error::Invariant(
                "graph edges must be listed as sorted, unique (i, j) pairs with i < j".into(),
            ));
        }
        Ok(g)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl Graph {
    /// Build a graph from an arbitrary edge list. Pairs are canonicalized and
    /// sorted; self-loops, out-of-range endpoints and duplicates are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 || n > MAX_NODES {
            return Err(Error::Parameter(format!(
                "node count {n} outside 1..={MAX_NODES}"
            )));
        }
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Parameter(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Parameter(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        if canon.len() != before {
            return Err(Error::Parameter("duplicate edge".into()));
        }
        Ok(Graph { n, edges: canon })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Parameter("a cycle needs at least 3 nodes".into()));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Neighbour sets as bitmasks, one per node.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        let mut adj = vec![0u64; self.n];
        for &(i, j) in &self.edges {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        adj
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("graph JSON", e))
    }

    /// Cut size of the assignment packed into `mask` (bit `i` is node `i`).
    pub fn cut_value_mask(&self, mask: u64) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| ((mask >> i) ^ (mask >> j)) & 1 == 1)
            .count()
    }
}

/// Exact Max-Cut solution together with the matching ground energy of
/// `H = Σ_{(i,j)∈E} Z_i Z_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutResult {
    pub max_cut_value: usize,
    /// Side of each node; `witness[i] == true` puts node `i` in the second part.
    pub witness: Vec<bool>,
    pub ground_energy: i64,
}

/// Draw a `G(n, p)` graph. Empty draws are replaced with draws from derived
/// seeds until at least one edge exists.
pub fn generate_random_graph(n: usize, p_edge: f64, seed: u64) -> Result<Graph> {
    if !(2..=MAX_NODES).contains(&n) {
        return Err(Error::Parameter(format!(
            "node count {n} outside 2..={MAX_NODES}"
        )));
    }
    if !(p_edge > 0.0 && p_edge <= 1.0) {
        return Err(Error::Parameter(format!(
            "edge probability {p_edge} must lie in (0, 1]"
        )));
    }
    let mut attempt = 0u64;
    loop {
        let draw_seed = if attempt == 0 {
            seed
        } else {
            derive_seed(seed, stream::GRAPH_RETRY, attempt)
        };
        let mut rng = rng_from_seed(draw_seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p_edge {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::new(n, edges);
        }
        attempt += 1;
    }
}

/// Number of edges whose endpoints fall on different sides.
pub fn cut_value(g: &Graph, assignment: &[bool]) -> Result<usize> {
    if assignment.len() != g.n() {
        return Err(Error::Parameter(format!(
            "assignment has {} entries, graph has {} nodes",
            assignment.len(),
            g.n()
        )));
    }
    Ok(g.edges()
        .iter()
        .filter(|&&(i, j)| assignment[i] != assignment[j])
        .count())
}

/// Exhaustive Max-Cut over the `2^(n-1)` bipartitions with node 0 pinned to
/// the first side, walked in Gray-code order so each step is O(1).
pub fn brute_force_maxcut(g: &Graph) -> Result<CutResult> {
    let n = g.n();
    if n > MAX_BRUTE_FORCE_NODES {
        return Err(Error::Capacity(format!(
            "brute force limited to {MAX_BRUTE_FORCE_NODES} nodes, got {n}"
        )));
    }
    let adj = g.adjacency_masks();
    let free = n - 1;
    let mut side = 0u64;
    let mut cut: i64 = 0;
    let mut best_cut = 0i64;
    let mut best_side = 0u64;
    for step in 1u64..(1u64 << free) {
        // Node flipped by the Gray code: 1 + index of the lowest set bit.
        let v = step.trailing_zeros() as usize + 1;
        let on_one = (side >> v) & 1 == 1;
        let same = if on_one {
            adj[v] & side
        } else {
            adj[v] & !side
        };
        let opposite = adj[v] & !same;
        cut += same.count_ones() as i64 - opposite.count_ones() as i64;
        side ^= 1 << v;
        if cut > best_cut {
            best_cut = cut;
            best_side = side;
        }
    }
    let witness = (0..n).map(|i| (best_side >> i) & 1 == 1).collect();
    let max_cut_value = best_cut as usize;
    Ok(CutResult {
        max_cut_value,
        witness,
        ground_energy: g.num_edges() as i64 - 2 * best_cut,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> Graph {
        Graph::complete(3).unwrap()
    }

    fn full_enumeration_max(g: &Graph) -> usize {
        (0..1u64 << g.n())
            .map(|m| g.cut_value_mask(m))
            .max()
            .unwrap()
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
        assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(0, []).is_err());
    }

    #[test]
    fn edges_are_canonical() {
        let g = Graph::new(4, [(3, 1), (2, 0), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
        assert_eq!(g.to_json(), r#"{"n":4,"edges":[[0,1],[0,2],[1,3]]}"#);
    }

    #[test]
    fn non_canonical_json_is_rejected() {
        assert!(Graph::from_json(r#"{"n":3,"edges":[[1,0]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n":3,"edges":[[1,2],[0,1]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n":3,"edges":[[0,1]"#).is_err());
    }

    #[test]
    fn complete_graph_at_probability_one() {
        for seed in 0..5 {
            let g = generate_random_graph(4, 1.0, seed).unwrap();
            assert_eq!(g, Graph::complete(4).unwrap());
            assert_eq!(g.num_edges(), 6);
        }
    }

    #[test]
    fn zero_probability_and_bad_sizes_are_errors() {
        assert!(matches!(
            generate_random_graph(5, 0.0, 1),
            Err(Error::Parameter(_))
        ));
        assert!(generate_random_graph(5, 1.5, 1).is_err());
        assert!(generate_random_graph(5, f64::NAN, 1).is_err());
        assert!(generate_random_graph(1, 0.5, 1).is_err());
    }

    #[test]
    fn sparse_draws_are_regenerated_until_nonempty() {
        for seed in 0..200 {
            let g = generate_random_graph(2, 0.05, seed).unwrap();
            assert_eq!(g.num_edges(), 1);
        }
    }

    #[test]
    fn edge_count_follows_binomial() {
        // Binomial(28, 0.5): mean 14, sd of the 1000-seed mean is sqrt(7/1000).
        let seeds = 1000;
        let mut total = 0usize;
        for seed in 0..seeds {
            let g = generate_random_graph(8, 0.5, 42 + seed).unwrap();
            assert!(g.num_edges() > 0 && g.num_edges() <= 28);
            assert!(g.edges().windows(2).all(|w| w[0] < w[1]));
            total += g.num_edges();
        }
        let mean = total as f64 / seeds as f64;
        let sd_of_mean = (28.0 * 0.25 / seeds as f64).sqrt();
        assert!((mean - 14.0).abs() < 3.0 * sd_of_mean, "mean {mean}");
    }

    #[test]
    fn known_cuts() {
        let k3 = triangle();
        let r = brute_force_maxcut(&k3).unwrap();
        assert_eq!((r.max_cut_value, r.ground_energy), (2, -1));

        let edge = Graph::new(2, [(0, 1)]).unwrap();
        let r = brute_force_maxcut(&edge).unwrap();
        assert_eq!((r.max_cut_value, r.ground_energy), (1, -1));

        let c4 = Graph::cycle(4).unwrap();
        let r = brute_force_maxcut(&c4).unwrap();
        assert_eq!((r.max_cut_value, r.ground_energy), (4, -4));
        assert_eq!(cut_value(&c4, &r.witness).unwrap(), 4);
    }

    #[test]
    fn cut_value_examples() {
        let k3 = triangle();
        assert_eq!(cut_value(&k3, &[false, false, false]).unwrap(), 0);
        assert_eq!(cut_value(&k3, &[false, false, true]).unwrap(), 2);
        let c4 = Graph::cycle(4).unwrap();
        assert_eq!(cut_value(&c4, &[false, true, false, true]).unwrap(), 4);
        assert!(matches!(
            cut_value(&c4, &[false, true]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn capacity_limit() {
        let g = Graph::new(25, [(0, 24)]).unwrap();
        assert!(matches!(brute_force_maxcut(&g), Err(Error::Capacity(_))));
    }

    proptest! {
        #[test]
        fn brute_force_matches_full_enumeration(n in 2usize..=6, p in 0.2f64..=1.0, seed in any::<u64>()) {
            let g = generate_random_graph(n, p, seed).unwrap();
            let r = brute_force_maxcut(&g).unwrap();
            prop_assert_eq!(r.max_cut_value, full_enumeration_max(&g));
            prop_assert_eq!(cut_value(&g, &r.witness).unwrap(), r.max_cut_value);
            prop_assert_eq!(r.ground_energy, g.num_edges() as i64 - 2 * r.max_cut_value as i64);
        }

        #[test]
        fn energy_cut_identity_and_complement(n in 2usize..=8, p in 0.2f64..=1.0, seed in any::<u64>(), mask in any::<u64>()) {
            let g = generate_random_graph(n, p, seed).unwrap();
            let bits: Vec<bool> = (0..n).map(|i| (mask >> i) & 1 == 1).collect();
            let spins: Vec<i64> = bits.iter().map(|&b| if b { -1 } else { 1 }).collect();
            let energy: i64 = g.edges().iter().map(|&(i, j)| spins[i] * spins[j]).sum();
            let cut = cut_value(&g, &bits).unwrap();
            prop_assert_eq!(energy, g.num_edges() as i64 - 2 * cut as i64);
            let flipped: Vec<bool> = bits.iter().map(|b| !b).collect();
            prop_assert_eq!(cut_value(&g, &flipped).unwrap(), cut);
        }

        #[test]
        fn serialization_round_trip(n in 2usize..=16, p in 0.1f64..=1.0, seed in any::<u64>()) {
            let g = generate_random_graph(n, p, seed).unwrap();
            let text = g.to_json();
            let back = Graph::from_json(&text).unwrap();
            prop_assert_eq!(back.to_json(), text);
            prop_assert_eq!(back, g);
        }
    }
}
