//! Geometric graphs, k-hop neighborhoods, subset enumeration, Hausdorff
//! distance and the lattice bump features used for set recovery.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

/// Nodes with positions in ℝⁿ plus optional vector, scalar and edge features.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricGraph {
    dim: usize,
    nodes: usize,
    positions: Vec<f64>,
    vector_features: Vec<f64>,
    vector_count: usize,
    scalar_features: Vec<f64>,
    scalar_count: usize,
    edges: Vec<(usize, usize)>,
    edge_attrs: BTreeMap<(usize, usize), Vec<f64>>,
    edge_attr_dim: usize,
}

impl GeometricGraph {
    /// `positions` is row-major `M × n`. Edges are unordered; duplicates are
    /// merged and stored as `(min, max)`.
    pub fn new(dim: usize, positions: Vec<f64>, edges: &[(usize, usize)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionUnsupported(0));
        }
        if positions.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} position values do not split into points of dimension {dim}",
                positions.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Graph("non-finite position".into()));
        }
        let nodes = positions.len() / dim;
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= nodes || b >= nodes {
                return Err(Error::Graph(format!("edge ({a}, {b}) out of range for {nodes} nodes")));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop at node {a}")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Self {
            dim,
            nodes,
            positions,
            vector_features: Vec::new(),
            vector_count: 0,
            scalar_features: Vec::new(),
            scalar_count: 0,
            edges: norm,
            edge_attrs: BTreeMap::new(),
            edge_attr_dim: 0,
        })
    }

    /// Graph with every pair of nodes connected.
    pub fn complete(dim: usize, positions: Vec<f64>) -> Result<Self> {
        let m = if dim == 0 { 0 } else { positions.len() / dim };
        let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        Self::new(dim, positions, &edges)
    }

    /// `features` is row-major `M × r × n`.
    pub fn with_vector_features(mut self, count: usize, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.nodes * count * self.dim {
            return Err(Error::Shape(format!(
                "{} vector feature values for {} nodes × {count} × {}",
                features.len(),
                self.nodes,
                self.dim
            )));
        }
        self.vector_count = count;
        self.vector_features = features;
        Ok(self)
    }

    /// `features` is row-major `M × s`.
    pub fn with_scalar_features(mut self, count: usize, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.nodes * count {
            return Err(Error::Shape(format!(
                "{} scalar feature values for {} nodes × {count}",
                features.len(),
                self.nodes
            )));
        }
        self.scalar_count = count;
        self.scalar_features = features;
        Ok(self)
    }

    /// Attaches one attribute vector of length `attr_dim` to every edge, in
    /// the sorted edge order returned by [`GeometricGraph::edges`].
    pub fn with_edge_attrs(mut self, attr_dim: usize, attrs: Vec<f64>) -> Result<Self> {
        if attrs.len() != self.edges.len() * attr_dim {
            return Err(Error::Shape(format!(
                "{} edge attribute values for {} edges × {attr_dim}",
                attrs.len(),
                self.edges.len()
            )));
        }
        self.edge_attrs = self
            .edges
            .iter()
            .zip(attrs.chunks(attr_dim.max(1)))
            .map(|(&e, a)| (e, a.to_vec()))
            .collect();
        self.edge_attr_dim = attr_dim;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector_count(&self) -> usize {
        self.vector_count
    }

    pub fn vector_features(&self) -> &[f64] {
        &self.vector_features
    }

    pub fn scalar_count(&self) -> usize {
        self.scalar_count
    }

    pub fn scalar_features(&self) -> &[f64] {
        &self.scalar_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_attr_dim(&self) -> usize {
        self.edge_attr_dim
    }

    /// Attribute of the edge `{a, b}`, if the edge exists and attributes are set.
    pub fn edge_attr(&self, a: usize, b: usize) -> Option<&[f64]> {
        self.edge_attrs.get(&(a.min(b), a.max(b))).map(Vec::as_slice)
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Same graph with every position replaced by `f(position)`.
    pub fn map_positions(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = self.clone();
        out.positions = self.positions.chunks(self.dim).flat_map(f).collect();
        out
    }

    /// Same graph with every vector feature replaced by `f(v)`.
    pub fn map_vector_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = self.clone();
        out.vector_features = self.vector_features.chunks(self.dim).flat_map(f).collect();
        out
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let m = self.nodes;
        let mut seen = vec![false; m];
        if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Graph("relabeling is not a permutation".into()));
        }
        let move_rows = |data: &[f64], width: usize| {
            let mut out = vec![0.0; data.len()];
            for (i, &p) in perm.iter().enumerate() {
                out[p * width..(p + 1) * width].copy_from_slice(&data[i * width..(i + 1) * width]);
            }
            out
        };
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let mut out = GeometricGraph::new(self.dim, move_rows(&self.positions, self.dim), &edges)?;
        out.vector_count = self.vector_count;
        out.vector_features = move_rows(&self.vector_features, self.vector_count * self.dim);
        out.scalar_count = self.scalar_count;
        out.scalar_features = move_rows(&self.scalar_features, self.scalar_count);
        out.edge_attr_dim = self.edge_attr_dim;
        out.edge_attrs = self
            .edge_attrs
            .iter()
            .map(|(&(a, b), v)| {
                let (x, y) = (perm[a], perm[b]);
                ((x.min(y), x.max(y)), v.clone())
            })
            .collect();
        Ok(out)
    }
}

/// Per-node sorted lists of the nodes within graph distance `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborhoodIndex {
    hops: usize,
    lists: Vec<Vec<usize>>,
}

impl NeighborhoodIndex {
    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }
}

/// Breadth-first search from every node, truncated at depth `k`.
pub fn k_hop(graph: &GeometricGraph, k: usize) -> Result<NeighborhoodIndex> {
    if k < 1 {
        return Err(Error::Config("hop radius must be at least 1".into()));
    }
    let adj = graph.adjacency();
    let m = graph.node_count();
    let mut lists = Vec::with_capacity(m);
    let mut depth = vec![usize::MAX; m];
    for start in 0..m {
        depth.iter_mut().for_each(|d| *d = usize::MAX);
        depth[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut found = Vec::new();
        while let Some(u) = queue.pop_front() {
            if depth[u] == k {
                continue;
            }
            for &v in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    found.push(v);
                    queue.push_back(v);
                }
            }
        }
        found.sort_unstable();
        lists.push(found);
    }
    Ok(NeighborhoodIndex { hops: k, lists })
}

/// Lexicographic iterator over the `d`-element subsets of a sorted list.
#[derive(Clone, Debug)]
pub struct Subsets<'a> {
    items: &'a [usize],
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for Subsets<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&i| self.items[i]).collect();
        let n = self.items.len();
        let d = self.idx.len();
        // advance to the next combination
        let mut pos = d;
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            if self.idx[pos] < n - d + pos {
                self.idx[pos] += 1;
                for q in pos + 1..d {
                    self.idx[q] = self.idx[q - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// All `d`-subsets of `items` in lexicographic order (empty if `d` exceeds the
/// list length or is zero).
pub fn enumerate_subsets(items: &[usize], d: usize) -> Subsets<'_> {
    Subsets {
        items,
        idx: (0..d).collect(),
        done: d == 0 || d > items.len(),
    }
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Hausdorff distance between two finite point sets under the ∞-norm.
pub fn hausdorff_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|p| to.iter().map(|q| inf_dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// The lattice `{(2i − 1)/(2K) : i = 1..K}^d` in lexicographic index order.
pub fn lattice(resolution: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if resolution == 0 {
        return Err(Error::Config("lattice resolution must be at least 1".into()));
    }
    let total = resolution
        .checked_pow(d as u32)
        .ok_or_else(|| Error::Config("lattice too large".into()))?;
    let denom = (2 * resolution) as f64;
    Ok((0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for slot in p.iter_mut().rev() {
                *slot = (2 * (idx % resolution) + 1) as f64 / denom;
                idx /= resolution;
            }
            p
        })
        .collect())
}

/// Bump function centred at `center`: equal to 1 there, positive inside the
/// open ∞-ball of radius `1/(2K)` and 0 outside.
pub fn universality_bump(center: &[f64], resolution: usize, z: &[f64]) -> f64 {
    let radius = 1.0 / (2 * resolution) as f64;
    let depth = (radius - inf_dist(z, center)).max(0.0);
    (1.0 - (-depth).exp()) / (1.0 - (-radius).exp())
}

/// Stacks the bump values of `z` over every lattice point.
pub fn universality_features(z: &[f64], resolution: usize) -> Result<Vec<f64>> {
    Ok(lattice(resolution, z.len())?
        .iter()
        .map(|c| universality_bump(c, resolution, z))
        .collect())
}

/// Sum of [`universality_features`] over a point set.
pub fn universality_encode(points: &[Vec<f64>], resolution: usize, d: usize) -> Result<Vec<f64>> {
    let size = lattice(resolution, d)?.len();
    let mut acc = vec![0.0; size];
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch(d, p.len()));
        }
        for (a, v) in acc.iter_mut().zip(universality_features(p, resolution)?) {
            *a += v;
        }
    }
    Ok(acc)
}

/// Lattice points whose encoded value is strictly positive, sorted.
pub fn universality_decode(encoded: &[f64], resolution: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let points = lattice(resolution, d)?;
    if points.len() != encoded.len() {
        return Err(Error::Shape(format!(
            "encoding has {} entries, lattice has {}",
            encoded.len(),
            points.len()
        )));
    }
    let mut out: Vec<Vec<f64>> = points
        .into_iter()
        .zip(encoded)
        .filter(|(_, &e)| e > 0.0)
        .map(|(p, _)| p)
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("lattice coordinates are finite"));
    Ok(out)
}
