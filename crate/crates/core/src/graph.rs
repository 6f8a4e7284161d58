//! Weighted undirected graphs in Gset format.
//!
//! Files number vertices from 1; in memory they are 0-indexed. An edge is
//! stored canonically with `u < v`.
//!
//! ```text
//! n m
//! u v w      (m lines, 1 <= u, v <= n, integer w)
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: i64,
}

/// Immutable weighted graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    /// Validates and canonicalizes `(u, v, w)` triples given 0-indexed.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, i64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (u, v, w) in edges {
            let e = canonical(n, u, v, w)?;
            if !seen.insert((e.u, e.v)) {
                return Err(Error::InvalidGraph(format!("duplicate edge {} {}", e.u + 1, e.v + 1)));
            }
            out.push(e);
        }
        Ok(Self { n, edges: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Parses Gset text.
    pub fn parse_gset(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty input".into() })?;
        let nums = parse_ints(header, hl + 1, 2)?;
        let n = to_count(nums[0], hl + 1, "vertex count")?;
        let m = to_count(nums[1], hl + 1, "edge count")?;

        let mut seen = HashSet::new();
        let mut edges = Vec::with_capacity(m);
        for (idx, line) in lines {
            let lineno = idx + 1;
            if edges.len() == m {
                return Err(Error::Parse { line: lineno, message: format!("more than the declared {m} edges") });
            }
            let f = parse_ints(line, lineno, 3)?;
            let u = vertex(f[0], n, lineno)?;
            let v = vertex(f[1], n, lineno)?;
            let e = canonical(n, u, v, f[2]).map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            if !seen.insert((e.u, e.v)) {
                return Err(Error::Parse { line: lineno, message: format!("duplicate edge {} {}", e.u + 1, e.v + 1) });
            }
            edges.push(e);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                message: format!("declared {m} edges, found {}", edges.len()),
            });
        }
        Ok(Self { n, edges })
    }

    pub fn read(path: &Path) -> std::io::Result<Result<Self>> {
        Ok(Self::parse_gset(&std::fs::read_to_string(path)?))
    }

    /// Gset text with edges in canonical (sorted) order.
    pub fn to_gset(&self) -> String {
        let mut edges = self.edges.clone();
        edges.sort();
        let mut s = format!("{} {}\n", self.n, edges.len());
        for e in &edges {
            let _ = writeln!(s, "{} {} {}", e.u + 1, e.v + 1, e.w);
        }
        s
    }

    /// Edges sorted by `(u, v)`.
    pub fn canonicalized(&self) -> Graph {
        let mut edges = self.edges.clone();
        edges.sort();
        Graph { n: self.n, edges }
    }

    /// `C` with `c_uv = c_vu = w`, zero diagonal.
    pub fn weight_matrix(&self) -> SymMatrix<f64> {
        let mut c = SymMatrix::zeros_f64(self.n);
        for e in &self.edges {
            c.set_f64(e.u, e.v, e.w as f64);
        }
        c
    }

    /// `Σ_ij c_ij = 2 Σ_edges w`.
    pub fn total_weight(&self) -> i64 {
        2 * self.edges.iter().map(|e| e.w).sum::<i64>()
    }

    /// Each pair is an edge with probability `density`; weights are uniform
    /// integers in `[w_min, w_max]` with zeros dropped.
    pub fn random(n: usize, density: f64, w_min: i64, w_max: i64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidGraph(format!("density {density} outside [0, 1]")));
        }
        if w_min > w_max {
            return Err(Error::InvalidGraph(format!("empty weight range [{w_min}, {w_max}]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    let w = rng.gen_range(w_min..=w_max);
                    if w != 0 {
                        edges.push(Edge { u, v, w });
                    }
                }
            }
        }
        Ok(Self { n, edges })
    }
}

fn canonical(n: usize, u: usize, v: usize, w: i64) -> Result<Edge> {
    if u >= n || v >= n {
        return Err(Error::InvalidGraph(format!("edge {} {} out of range for n = {n}", u + 1, v + 1)));
    }
    if u == v {
        return Err(Error::InvalidGraph(format!("self-loop on vertex {}", u + 1)));
    }
    Ok(Edge { u: u.min(v), v: u.max(v), w })
}

fn parse_ints(line: &str, lineno: usize, want: usize) -> Result<Vec<i64>> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != want {
        return Err(Error::Parse { line: lineno, message: format!("expected {want} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| f.parse::<i64>().map_err(|e| Error::Parse { line: lineno, message: format!("{f:?}: {e}") }))
        .collect()
}

fn to_count(x: i64, lineno: usize, what: &str) -> Result<usize> {
    usize::try_from(x).map_err(|_| Error::Parse { line: lineno, message: format!("negative {what} {x}") })
}

fn vertex(x: i64, n: usize, lineno: usize) -> Result<usize> {
    if x < 1 || x as u64 > n as u64 {
        return Err(Error::Parse { line: lineno, message: format!("vertex {x} out of range 1..={n}") });
    }
    Ok(x as usize - 1)
}
