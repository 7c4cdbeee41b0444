//! Glued distance: the infimum over chains through shared DOFs of
//! intrinsic distances inside single pieces.
use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::glue::GluedComplex;
use super::mesh::{dist3, PieceMesh, PieceMetric};
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.partial_cmp(&self.dist).unwrap_or(Ordering::Equal).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra over an adjacency list with initial labels.
fn dijkstra(adjacency: &[Vec<(usize, f64)>], seeds: &[(usize, f64)]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    for &(s, d) in seeds {
        if d < dist[s] {
            dist[s] = d;
            heap.push(Entry { dist: d, node: s });
        }
    }
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, w) in &adjacency[node] {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Entry { dist: nd, node: next });
            }
        }
    }
    dist
}

fn local_adjacency(piece: &PieceMesh) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); piece.n_vertices()];
    for (a, b) in piece.edges() {
        let l = dist3(piece.vertices[a], piece.vertices[b]);
        adj[a].push((b, l));
        adj[b].push((a, l));
    }
    adj
}

/// Distance field inside one piece from labelled seeds (local indices).
pub(crate) fn piece_field(piece: &PieceMesh, seeds: &[(usize, f64)]) -> Vec<f64> {
    match piece.metric {
        PieceMetric::Euclidean => piece
            .vertices
            .iter()
            .map(|&x| seeds.iter().map(|&(s, d)| d + dist3(piece.vertices[s], x)).fold(f64::INFINITY, f64::min))
            .collect(),
        PieceMetric::EdgeGraph => dijkstra(&local_adjacency(piece), seeds),
    }
}

impl GluedComplex {
    fn check_dof(&self, d: usize) -> Result<()> {
        if d < self.dof_count() {
            Ok(())
        } else {
            Err(Error::input(format!("DOF {d} out of range 0..{}", self.dof_count())))
        }
    }

    /// Glued distance from every DOF to the nearest DOF of `sources`;
    /// `f64::INFINITY` marks DOFs in other components.
    pub fn distances_from_set(&self, sources: &[usize]) -> Vec<f64> {
        let n_pieces = self.pieces.len();
        let mut seeds: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_pieces];
        for &s in sources {
            for &(p, v) in &self.dof_owners[s] {
                seeds[p].push((v, 0.0));
            }
        }
        // labels of shared DOFs reached directly from the sources
        let mut portal_label = vec![f64::INFINITY; self.dof_count()];
        for p in 0..n_pieces {
            if seeds[p].is_empty() || self.portals[p].is_empty() {
                continue;
            }
            let field = piece_field(&self.pieces[p], &seeds[p]);
            for &v in &self.portals[p] {
                let g = self.global_dof[p][v];
                portal_label[g] = portal_label[g].min(field[v]);
            }
        }
        // Dijkstra over shared DOFs, edges are intrinsic distances in a
        // common piece
        let mut heap = BinaryHeap::new();
        for (g, &d) in portal_label.iter().enumerate() {
            if d.is_finite() {
                heap.push(Entry { dist: d, node: g });
            }
        }
        while let Some(Entry { dist: d, node: g }) = heap.pop() {
            if d > portal_label[g] {
                continue;
            }
            for &(p, v) in &self.dof_owners[g] {
                let field = piece_field(&self.pieces[p], &[(v, d)]);
                for &w in &self.portals[p] {
                    let h = self.global_dof[p][w];
                    if field[w] < portal_label[h] {
                        portal_label[h] = field[w];
                        heap.push(Entry { dist: field[w], node: h });
                    }
                }
            }
        }
        let mut out = vec![f64::INFINITY; self.dof_count()];
        for p in 0..n_pieces {
            let mut s = seeds[p].clone();
            for &v in &self.portals[p] {
                let d = portal_label[self.global_dof[p][v]];
                if d.is_finite() {
                    s.push((v, d));
                }
            }
            if s.is_empty() {
                continue;
            }
            let field = piece_field(&self.pieces[p], &s);
            for (v, &d) in field.iter().enumerate() {
                let g = self.global_dof[p][v];
                out[g] = out[g].min(d);
            }
        }
        out
    }

    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        self.distances_from_set(&[source])
    }

    /// Glued distance between two DOFs.
    pub fn glued_distance(&self, a: usize, b: usize) -> Result<f64> {
        self.check_dof(a)?;
        self.check_dof(b)?;
        if a == b {
            return Ok(0.0);
        }
        Ok(self.distances_from(a)[b])
    }

    /// DOFs at glued distance at most `r` from `center`, ascending.
    pub fn metric_ball(&self, center: usize, r: f64) -> Result<Vec<usize>> {
        self.check_dof(center)?;
        if !(r > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let d = self.distances_from(center);
        Ok((0..d.len()).filter(|&x| d[x] <= r).collect())
    }

    /// Shortest-path distances along mesh edges only.
    pub fn edge_graph_distances_from(&self, source: usize) -> Vec<f64> {
        dijkstra(&self.adjacency, &[(source, 0.0)])
    }
}
