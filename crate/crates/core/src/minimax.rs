//! Minimax (path-based) distances over a complete weighted graph.
//!
//! The Minimax distance between two nodes is the smallest achievable
//! largest edge weight over all paths joining them. It equals the largest
//! edge on the unique path joining them in any minimum spanning tree, so we
//! build the MST with Prim's algorithm and read all pairwise values off it
//! by merging components in ascending edge order.

use crate::error::{Error, Result};
use crate::trajectory::{squared_distance, Embedding, SymMatrix};

/// Complete graph over `0..K` with symmetric non-negative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: SymMatrix,
}

impl WeightedGraph {
    pub fn from_matrix(weights: SymMatrix) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &SymMatrix {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.weights.order()
    }
}

/// Graph with squared Euclidean edge weights between embedded points.
pub fn build_graph(v: &Embedding) -> Result<WeightedGraph> {
    let k = v.rows();
    if k < 2 {
        return Err(Error::invalid("graph needs at least 2 points"));
    }
    if v.coords().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("embedding coordinates".into()));
    }
    let weights = SymMatrix::from_pairs(k, |i, j| squared_distance(v.row(i), v.row(j)))?;
    Ok(WeightedGraph { weights })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mst {
    order: usize,
    edges: Vec<MstEdge>,
}

impl Mst {
    /// Validates that `edges` form a spanning tree over `0..order`.
    pub fn new(order: usize, edges: Vec<MstEdge>) -> Result<Self> {
        if order == 0 || edges.len() + 1 != order {
            return Err(Error::invalid(format!(
                "a spanning tree over {order} nodes needs {} edges, got {}",
                order.saturating_sub(1),
                edges.len()
            )));
        }
        let mut dsu = Components::new(order);
        for e in &edges {
            if e.a >= order || e.b >= order || !(e.weight >= 0.0) || !e.weight.is_finite() {
                return Err(Error::invalid(format!("bad edge {e:?}")));
            }
            if !dsu.union(e.a, e.b) {
                return Err(Error::invalid(format!("edge {e:?} closes a cycle")));
            }
        }
        Ok(Self { order, edges })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn edges(&self) -> &[MstEdge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Dense Prim's algorithm, O(K²).
///
/// Starts from node 0; the next node is the one with the lightest
/// connecting edge, ties going to the smaller node index. A node's parent
/// only changes on a strictly lighter edge.
pub fn prim_mst(g: &WeightedGraph) -> Result<Mst> {
    let k = g.order();
    if k < 2 {
        return Err(Error::invalid("spanning tree needs at least 2 nodes"));
    }
    let w = g.weights();
    let mut in_tree = vec![false; k];
    let mut best = vec![f64::INFINITY; k];
    let mut parent = vec![0usize; k];
    let mut edges = Vec::with_capacity(k - 1);
    in_tree[0] = true;
    for j in 1..k {
        best[j] = w.get(0, j);
    }
    for _ in 1..k {
        let mut next = usize::MAX;
        let mut next_w = f64::INFINITY;
        for j in 0..k {
            if !in_tree[j] && (next == usize::MAX || best[j] < next_w) {
                next = j;
                next_w = best[j];
            }
        }
        in_tree[next] = true;
        let p = parent[next];
        edges.push(MstEdge {
            a: p.min(next),
            b: p.max(next),
            weight: next_w,
        });
        for j in 0..k {
            if !in_tree[j] {
                let wj = w.get(next, j);
                if wj < best[j] {
                    best[j] = wj;
                    parent[j] = next;
                }
            }
        }
    }
    Mst::new(k, edges)
}

/// Union-find that also keeps the member list of every root.
struct Components {
    parent: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the components of `a` and `b`; false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        self.merge(a, b).is_some()
    }

    /// Merges and returns `(absorbed members, surviving root)`.
    fn merge(&mut self, a: usize, b: usize) -> Option<(Vec<usize>, usize)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (big, small) = if self.members[ra].len() >= self.members[rb].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        let moved = std::mem::take(&mut self.members[small]);
        Some((moved, big))
    }

    fn absorb(&mut self, root: usize, moved: &[usize]) {
        self.members[root].extend_from_slice(moved);
    }
}

/// All pairwise Minimax distances from a spanning tree.
///
/// Edges are processed in ascending weight; when an edge of weight `w` joins
/// two components, every pair across them gets distance `w`. O(K²) after
/// the edge sort.
pub fn minimax_distances(mst: &Mst) -> Result<SymMatrix> {
    let k = mst.order();
    let mut edges = mst.edges().to_vec();
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight).then((x.a, x.b).cmp(&(y.a, y.b))));
    let mut out = vec![0.0; k * k];
    let mut comps = Components::new(k);
    for e in &edges {
        let (ra, rb) = (comps.find(e.a), comps.find(e.b));
        let (moved, root) = comps
            .merge(ra, rb)
            .ok_or_else(|| Error::invalid("spanning tree contains a cycle"))?;
        for &x in &moved {
            for &y in &comps.members[root] {
                out[x * k + y] = e.weight;
                out[y * k + x] = e.weight;
            }
        }
        comps.absorb(root, &moved);
    }
    let root = comps.find(0);
    if comps.members[root].len() != k {
        return Err(Error::invalid("spanning tree is disconnected"));
    }
    SymMatrix::new(k, out)
}

/// Convenience: graph → MST → Minimax matrix.
pub fn minimax_matrix(g: &WeightedGraph) -> Result<SymMatrix> {
    minimax_distances(&prim_mst(g)?)
}
