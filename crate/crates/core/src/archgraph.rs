//! MiLAC circuit topologies as simple undirected graphs.
//!
//! Ports are vertices; an edge `(m, n)` means a tunable admittance connects
//! ports `m` and `n`. Every port additionally has a tunable admittance to
//! ground, so the circuit complexity of a graph is `N_V + N_E`.
//!
//! The Rust API indexes ports from 0. The edge-list text format and the CLI
//! use 1-based port numbers.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{MilacError, Result};
use crate::linalg::RMat;

/// Default absolute tolerance for [`mask_membership`].
pub const MASK_TOL: f64 = 1e-12;

/// A simple undirected graph over `n_ports` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MilacGraph {
    n_ports: usize,
    /// Edges stored as `(i, j)` with `i < j`, 0-based.
    edges: BTreeSet<(usize, usize)>,
}

impl MilacGraph {
    /// Builds a graph from 0-based edges. Self-loops, duplicates (in either
    /// orientation) and out-of-range endpoints are rejected.
    pub fn new(n_ports: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_ports == 0 {
            return Err(MilacError::InvalidGraph("graph needs at least one port".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n_ports || b >= n_ports {
                return Err(MilacError::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {n_ports} ports"
                )));
            }
            if a == b {
                return Err(MilacError::InvalidGraph(format!("self-loop at port {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(MilacError::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self {
            n_ports,
            edges: set,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges as 0-based `(i, j)` pairs with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    /// Plain-text edge list: first line `N_V`, then one `i j` line per edge,
    /// 1-based with `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.n_ports);
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{} {}", a + 1, b + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n_ports: usize = lines
            .next()
            .ok_or_else(|| MilacError::Parse("empty edge list".into()))?
            .parse()
            .map_err(|e| MilacError::Parse(format!("port count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                let v: usize = tok
                    .ok_or_else(|| MilacError::Parse(format!("malformed edge line `{line}`")))?
                    .parse()
                    .map_err(|e| MilacError::Parse(format!("edge line `{line}`: {e}")))?;
                if v == 0 {
                    return Err(MilacError::Parse(format!(
                        "edge line `{line}`: ports are 1-based"
                    )));
                }
                Ok(v - 1)
            };
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(MilacError::Parse(format!("trailing tokens in `{line}`")));
            }
            edges.push((a, b));
        }
        Self::new(n_ports, edges)
    }
}

/// The complete graph: every port interconnected (fully-connected MiLAC).
pub fn complete_graph(n_ports: usize) -> Result<MilacGraph> {
    let edges = (0..n_ports).flat_map(|i| ((i + 1)..n_ports).map(move |j| (i, j)));
    MilacGraph::new(n_ports, edges)
}

/// Center graph: every central vertex is adjacent to all other vertices,
/// non-central vertices are adjacent only to central ones.
pub fn center_graph(n_ports: usize, central: &[usize]) -> Result<MilacGraph> {
    if central.is_empty() {
        return Err(MilacError::InvalidGraph("central set is empty".into()));
    }
    let mut is_central = vec![false; n_ports];
    for &c in central {
        if c >= n_ports {
            return Err(MilacError::InvalidGraph(format!(
                "central port {c} out of range for {n_ports} ports"
            )));
        }
        if std::mem::replace(&mut is_central[c], true) {
            return Err(MilacError::InvalidGraph(format!("duplicate central port {c}")));
        }
    }
    let edges: Vec<_> = (0..n_ports)
        .flat_map(|i| ((i + 1)..n_ports).map(move |j| (i, j)))
        .filter(|&(i, j)| is_central[i] || is_central[j])
        .collect();
    MilacGraph::new(n_ports, edges)
}

/// Canonical central set of the transmitter stem graph: the `N_S` input ports
/// followed by the first `N_S - 1` output ports (0-based).
pub fn tx_stem_central(n_streams: usize) -> Vec<usize> {
    (0..(2 * n_streams).saturating_sub(1)).collect()
}

/// Canonical central set of the receiver stem graph: the first `N_S - 1`
/// input ports and the `N_S` output ports (0-based).
pub fn rx_stem_central(n_streams: usize, n_rx: usize) -> Vec<usize> {
    (0..n_streams.saturating_sub(1))
        .chain(n_rx..n_rx + n_streams)
        .collect()
}

fn check_stem_dims(n_streams: usize, n_antennas: usize, side: &str) -> Result<()> {
    if n_streams == 0 {
        return Err(MilacError::Dimension("number of streams must be positive".into()));
    }
    if n_antennas < n_streams {
        return Err(MilacError::Dimension(format!(
            "{side}: {n_antennas} antennas cannot carry {n_streams} streams"
        )));
    }
    Ok(())
}

/// Capacity-achieving stem-connected graph at the transmitter, `N_V = N_S + N_T`.
pub fn tx_stem_graph(n_streams: usize, n_tx: usize) -> Result<MilacGraph> {
    check_stem_dims(n_streams, n_tx, "transmitter")?;
    center_graph(n_streams + n_tx, &tx_stem_central(n_streams))
}

/// Capacity-achieving stem-connected graph at the receiver, `N_V = N_R + N_S`.
pub fn rx_stem_graph(n_streams: usize, n_rx: usize) -> Result<MilacGraph> {
    check_stem_dims(n_streams, n_rx, "receiver")?;
    center_graph(n_rx + n_streams, &rx_stem_central(n_streams, n_rx))
}

/// Number of tunable admittance components, `N_V + N_E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircuitComplexity(pub usize);

pub fn circuit_complexity(g: &MilacGraph) -> CircuitComplexity {
    CircuitComplexity(g.n_ports() + g.n_edges())
}

/// `N_V (N_V + 1) / 2`.
pub fn complete_complexity(n_ports: usize) -> usize {
    n_ports * (n_ports + 1) / 2
}

/// `(Q + 1)(2 N_V - Q) / 2` for a center graph of center size `Q`.
pub fn center_complexity(n_ports: usize, center_size: usize) -> usize {
    (center_size + 1) * (2 * n_ports - center_size) / 2
}

/// `N_S (2N + 1)` for a stem-connected MiLAC with `N` antennas.
pub fn stem_complexity(n_streams: usize, n_antennas: usize) -> usize {
    n_streams * (2 * n_antennas + 1)
}

/// `(N_S + N)(N_S + N + 1) / 2` for a fully-connected MiLAC with `N` antennas.
pub fn fully_complexity(n_streams: usize, n_antennas: usize) -> usize {
    complete_complexity(n_streams + n_antennas)
}

/// Which susceptance entries may be nonzero. Symmetric, diagonal always tunable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureMask {
    n_ports: usize,
    tunable: Vec<bool>,
}

impl ArchitectureMask {
    pub fn from_graph(g: &MilacGraph) -> Self {
        let n = g.n_ports();
        let mut tunable = vec![false; n * n];
        for i in 0..n {
            tunable[i * n + i] = true;
        }
        for (a, b) in g.edges() {
            tunable[a * n + b] = true;
            tunable[b * n + a] = true;
        }
        Self {
            n_ports: n,
            tunable,
        }
    }

    /// Mask with every entry tunable.
    pub fn full(n_ports: usize) -> Self {
        Self {
            n_ports,
            tunable: vec![true; n_ports * n_ports],
        }
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn is_tunable(&self, m: usize, n: usize) -> bool {
        self.tunable[m * self.n_ports + n]
    }

    pub fn tunable_count(&self) -> usize {
        self.tunable.iter().filter(|&&t| t).count()
    }

    /// 0/1 matrix as CSV, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.tunable.chunks(self.n_ports) {
            let line: Vec<&str> = row.iter().map(|&t| if t { "1" } else { "0" }).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Entries `(m, n)` that are forbidden by the mask but exceed `tol` in `b`.
    pub fn violations(&self, b: &RMat, tol: f64) -> Result<Vec<(usize, usize)>> {
        if b.nrows() != self.n_ports || b.ncols() != self.n_ports {
            return Err(MilacError::Dimension(format!(
                "{}x{} matrix against a {}-port mask",
                b.nrows(),
                b.ncols(),
                self.n_ports
            )));
        }
        let mut out = Vec::new();
        for m in 0..self.n_ports {
            for n in 0..self.n_ports {
                if !self.is_tunable(m, n) && b[(m, n)].abs() > tol {
                    out.push((m, n));
                }
            }
        }
        Ok(out)
    }
}

/// True iff every entry of `b` outside the mask is within `tol` of zero.
pub fn mask_membership(b: &RMat, mask: &ArchitectureMask, tol: f64) -> Result<bool> {
    Ok(mask.violations(b, tol)?.is_empty())
}
