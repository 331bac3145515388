//! Static graphs, random per-step realizations and Laplacian spectra.

use std::collections::HashSet;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

/// A graph is treated as connected when its algebraic connectivity exceeds this.
pub const CONNECTIVITY_THRESHOLD: f64 = 1e-8;

/// Point sets drawn per radius before giving up on connectivity.
pub const MAX_RGG_RETRIES: usize = 1000;

/// Radius probes made while searching for a target algebraic connectivity.
pub const MAX_RADIUS_PROBES: usize = 400;

/// Undirected edge stored with `i < j`.
pub type Edge = (usize, usize);

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("radius {0} outside (0, sqrt(2)]")]
    InvalidRadius(f64),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({0}, {1}) is not in the base graph")]
    NotInBase(usize, usize),
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidDropout(f64),
    #[error("no connected random geometric graph on {n_nodes} nodes with radius {radius} after {attempts} attempts")]
    RetryLimit {
        n_nodes: usize,
        radius: f64,
        attempts: usize,
    },
    #[error("could not reach algebraic connectivity {target} +/- {tolerance} on {n_nodes} nodes")]
    TargetUnreachable {
        n_nodes: usize,
        target: f64,
        tolerance: f64,
    },
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Anything with a node count and an undirected edge list.
pub trait EdgeSet {
    fn n_nodes(&self) -> usize;
    fn edges(&self) -> &[Edge];
}

/// Undirected simple graph on nodes `0..n_nodes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
}

impl StaticGraph {
    /// Builds a graph, normalizing each pair to `(min, max)` and sorting.
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, TopologyError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            if a >= n_nodes || b >= n_nodes {
                return Err(TopologyError::NodeOutOfRange(a, b, n_nodes));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(TopologyError::DuplicateEdge(e.0, e.1));
            }
            out.push(e);
        }
        out.sort_unstable();
        Ok(Self { n_nodes, edges: out })
    }

    pub fn empty(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            edges: Vec::new(),
        }
    }

    pub fn path(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            edges: (1..n_nodes).map(|i| (i - 1, i)).collect(),
        }
    }

    pub fn complete(n_nodes: usize) -> Self {
        let edges = (0..n_nodes)
            .flat_map(|i| ((i + 1)..n_nodes).map(move |j| (i, j)))
            .collect();
        Self { n_nodes, edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Copy of this graph with one more edge.
    pub fn with_edge(&self, a: usize, b: usize) -> Result<Self, TopologyError> {
        Self::new(
            self.n_nodes,
            self.edges.iter().copied().chain(std::iter::once((a, b))),
        )
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        build_laplacian(self)
    }

    pub fn lambda2(&self) -> f64 {
        lambda2(&self.laplacian())
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes == 1 || self.lambda2() > CONNECTIVITY_THRESHOLD
    }

    /// Text form: a `n_nodes=<N>` header followed by one `i j` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n_nodes={}\n", self.n_nodes);
        for (i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Parses [`StaticGraph::to_edge_list`] output. Blank lines and `#`
    /// comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut n_nodes = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| TopologyError::Parse {
                line: line_no,
                message,
            };
            match n_nodes {
                None => {
                    let value = line
                        .strip_prefix("n_nodes=")
                        .ok_or_else(|| parse_err(format!("expected `n_nodes=<N>` header, got `{line}`")))?;
                    n_nodes = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|e| parse_err(format!("bad node count `{value}`: {e}")))?,
                    );
                }
                Some(_) => {
                    let mut parts = line.split_whitespace();
                    let mut next = || -> Result<usize, TopologyError> {
                        let tok = parts
                            .next()
                            .ok_or_else(|| parse_err(format!("expected `i j`, got `{line}`")))?;
                        tok.parse::<usize>()
                            .map_err(|e| parse_err(format!("bad node index `{tok}`: {e}")))
                    };
                    let a = next()?;
                    let b = next()?;
                    if parts.next().is_some() {
                        return Err(parse_err(format!("trailing tokens in `{line}`")));
                    }
                    edges.push((a, b));
                }
            }
        }
        let n_nodes = n_nodes.ok_or(TopologyError::Parse {
            line: 0,
            message: "missing `n_nodes=<N>` header".into(),
        })?;
        Self::new(n_nodes, edges)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_edge_list(&text)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<(), TopologyError> {
        std::fs::write(path, self.to_edge_list()).map_err(|source| TopologyError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl EdgeSet for StaticGraph {
    fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

/// The links of a base graph that are up at one time step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphRealization<'a> {
    base: &'a StaticGraph,
    active_edges: Vec<Edge>,
}

impl<'a> GraphRealization<'a> {
    /// Realization with every base link active.
    pub fn full(base: &'a StaticGraph) -> Self {
        Self {
            base,
            active_edges: base.edges.clone(),
        }
    }

    /// Realization with no active link.
    pub fn none(base: &'a StaticGraph) -> Self {
        Self {
            base,
            active_edges: Vec::new(),
        }
    }

    pub fn from_edges(
        base: &'a StaticGraph,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, TopologyError> {
        let sub = StaticGraph::new(base.n_nodes, edges)?;
        if let Some(&(a, b)) = sub.edges.iter().find(|&&(a, b)| !base.has_edge(a, b)) {
            return Err(TopologyError::NotInBase(a, b));
        }
        Ok(Self {
            base,
            active_edges: sub.edges,
        })
    }

    pub fn base(&self) -> &StaticGraph {
        self.base
    }
}

impl EdgeSet for GraphRealization<'_> {
    fn n_nodes(&self) -> usize {
        self.base.n_nodes
    }

    fn edges(&self) -> &[Edge] {
        &self.active_edges
    }
}

/// Dense symmetric graph Laplacian `D - A`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianMatrix(DMatrix<f64>);

impl LaplacianMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `factor * L`, e.g. the expected Laplacian `(1 - p) L` under link dropout.
    pub fn scaled(&self, factor: f64) -> Self {
        Self(&self.0 * factor)
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Laplacian of a graph or realization, using the active edges only.
pub fn build_laplacian<G: EdgeSet + ?Sized>(g: &G) -> LaplacianMatrix {
    let n = g.n_nodes();
    let mut m = DMatrix::zeros(n, n);
    for &(i, j) in g.edges() {
        m[(i, j)] = -1.0;
        m[(j, i)] = -1.0;
        m[(i, i)] += 1.0;
        m[(j, j)] += 1.0;
    }
    LaplacianMatrix(m)
}

/// Algebraic connectivity: the second-smallest Laplacian eigenvalue, clamped
/// at zero. Graphs with fewer than two nodes return 0.
pub fn lambda2(l: &LaplacianMatrix) -> f64 {
    l.eigenvalues().get(1).copied().unwrap_or(0.0).max(0.0)
}

/// Keeps each base link independently with probability `1 - p_drop`.
pub fn sample_dropout<'a, R: Rng + ?Sized>(
    g: &'a StaticGraph,
    p_drop: f64,
    rng: &mut R,
) -> Result<GraphRealization<'a>, TopologyError> {
    if !(0.0..1.0).contains(&p_drop) {
        return Err(TopologyError::InvalidDropout(p_drop));
    }
    let active_edges = g
        .edges
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() >= p_drop)
        .collect();
    Ok(GraphRealization {
        base: g,
        active_edges,
    })
}

/// Uniform points in the unit square joined when within `radius`; point sets
/// are redrawn until the graph is connected.
pub fn generate_random_geometric<R: Rng + ?Sized>(
    n_nodes: usize,
    radius: f64,
    rng: &mut R,
) -> Result<StaticGraph, TopologyError> {
    if n_nodes < 2 {
        return Err(TopologyError::TooFewNodes(n_nodes));
    }
    if !(radius > 0.0 && radius <= SQRT_2) {
        return Err(TopologyError::InvalidRadius(radius));
    }
    let r2 = radius * radius;
    for _ in 0..MAX_RGG_RETRIES {
        let pts: Vec<(f64, f64)> = (0..n_nodes)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n_nodes {
            for j in (i + 1)..n_nodes {
                let dx = pts[i].0 - pts[j].0;
                let dy = pts[i].1 - pts[j].1;
                if dx * dx + dy * dy <= r2 {
                    edges.push((i, j));
                }
            }
        }
        let g = StaticGraph { n_nodes, edges };
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(TopologyError::RetryLimit {
        n_nodes,
        radius,
        attempts: MAX_RGG_RETRIES,
    })
}

/// Connected random geometric graph whose algebraic connectivity is within
/// `tolerance` of `target`, found by bisection on the radius with a fresh
/// point set at every probe. Returns the graph and the radius used.
pub fn generate_with_target_lambda2<R: Rng + ?Sized>(
    n_nodes: usize,
    target: f64,
    tolerance: f64,
    rng: &mut R,
) -> Result<(StaticGraph, f64), TopologyError> {
    if n_nodes < 2 {
        return Err(TopologyError::TooFewNodes(n_nodes));
    }
    let (mut lo, mut hi) = (0.0_f64, SQRT_2);
    for _ in 0..MAX_RADIUS_PROBES {
        let radius = 0.5 * (lo + hi);
        match generate_random_geometric(n_nodes, radius, rng) {
            Ok(g) => {
                let l2 = g.lambda2();
                if (l2 - target).abs() <= tolerance {
                    return Ok((g, radius));
                }
                if l2 < target {
                    lo = radius;
                } else {
                    hi = radius;
                }
            }
            Err(TopologyError::RetryLimit { .. }) => lo = radius,
            Err(e) => return Err(e),
        }
        // A collapsed bracket means sampling noise misled the search.
        if hi - lo < 1e-9 {
            lo = 0.0;
            hi = SQRT_2;
        }
    }
    Err(TopologyError::TargetUnreachable {
        n_nodes,
        target,
        tolerance,
    })
}
