//! Weights on pieces, the measure `mu = sum_i omega_i vol_i`, and
//! measures of metric balls and tubes.
mod diagnostics;
mod quadrature;

pub use diagnostics::{
    check_a2, check_l_muckenhoupt, check_n_doubling, A2Report, A2Sample, ComparisonRow, DoublingRow,
    LMuckenhouptReport, MeasureProfile, TubeRow, Verdict,
};
pub(crate) use quadrature::gauss_legendre;
pub use quadrature::{AnchorGeometry, CellMoments};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{GluedComplex, PieceMesh};
use quadrature::{cell_moments, Density};

/// Where a power weight is anchored.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    /// A declared intersection of the complex.
    Intersection(usize),
    /// Local vertex indices of the piece; edges between them belong to
    /// the anchor when the piece is at least two-dimensional.
    Vertices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Constant(f64),
    /// `omega = dist(x, anchor)^(-alpha)`
    Power {
        anchor: Anchor,
        alpha: f64,
    },
    /// Per-vertex values, interpolated linearly.
    Tabulated(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub piece: usize,
    pub kind: WeightKind,
}

impl WeightSpec {
    pub fn constant(piece: usize, c: f64) -> Self {
        WeightSpec { piece, kind: WeightKind::Constant(c) }
    }

    pub fn power(piece: usize, anchor: Anchor, alpha: f64) -> Self {
        WeightSpec { piece, kind: WeightKind::Power { anchor, alpha } }
    }

    pub fn tabulated(piece: usize, values: Vec<f64>) -> Self {
        WeightSpec { piece, kind: WeightKind::Tabulated(values) }
    }
}

/// Open interval of integrable exponents for a power weight on an
/// `n`-dimensional piece anchored on a `k`-dimensional set.
pub fn admissible_range(n: usize, k: usize) -> (f64, f64) {
    let c = n as f64 - k as f64;
    (-c, c)
}

/// A weight with its anchor resolved against a concrete piece.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedWeight {
    Constant(f64),
    Power { anchor: AnchorGeometry, vertices: Vec<usize>, alpha: f64, n: usize, k: usize },
    Tabulated(Vec<f64>),
}

impl ResolvedWeight {
    /// Resolves `spec` without checking integrability.
    pub fn resolve(complex: &GluedComplex, spec: &WeightSpec) -> Result<Self> {
        let piece = complex
            .pieces
            .get(spec.piece)
            .ok_or_else(|| Error::input(format!("weight refers to unknown piece {}", spec.piece)))?;
        match &spec.kind {
            WeightKind::Constant(c) => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::invalid(format!("constant weight must be positive, got {c}")));
                }
                Ok(ResolvedWeight::Constant(*c))
            }
            WeightKind::Tabulated(v) => {
                if v.len() != piece.n_vertices() {
                    return Err(Error::input(format!(
                        "tabulated weight has {} values, piece {} has {} vertices",
                        v.len(),
                        spec.piece,
                        piece.n_vertices()
                    )));
                }
                if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                    return Err(Error::invalid(format!("tabulated weight value {x} is not positive")));
                }
                Ok(ResolvedWeight::Tabulated(v.clone()))
            }
            WeightKind::Power { anchor, alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::invalid("weight exponent must be finite"));
                }
                if piece.dim > 2 {
                    return Err(Error::invalid("power weights are supported on pieces of dimension 1 and 2"));
                }
                let (vertices, k) = match anchor {
                    Anchor::Intersection(id) => {
                        let map = complex.intersection(*id)?;
                        if map.piece_a != spec.piece && map.piece_b != spec.piece {
                            return Err(Error::input(format!("intersection {id} does not touch piece {}", spec.piece)));
                        }
                        (map.local_vertices(spec.piece), map.k)
                    }
                    Anchor::Vertices(v) => {
                        if v.is_empty() {
                            return Err(Error::input("anchor vertex list is empty"));
                        }
                        if let Some(x) = v.iter().find(|&&x| x >= piece.n_vertices()) {
                            return Err(Error::input(format!("anchor vertex {x} out of range")));
                        }
                        let mut v = v.clone();
                        v.sort_unstable();
                        v.dedup();
                        let k = if anchor_segments(piece, &v).is_empty() { 0 } else { 1 };
                        (v, k)
                    }
                };
                if k >= piece.dim {
                    return Err(Error::hypothesis(format!(
                        "anchor of dimension {k} is not of lower dimension than piece {}",
                        spec.piece
                    )));
                }
                let segments = if k == 1 { anchor_segments(piece, &vertices) } else { Vec::new() };
                let geometry = AnchorGeometry {
                    points: vertices.iter().map(|&v| piece.vertices[v]).collect(),
                    segments: segments.iter().map(|&(a, b)| (piece.vertices[a], piece.vertices[b])).collect(),
                    k,
                };
                Ok(ResolvedWeight::Power { anchor: geometry, vertices, alpha: *alpha, n: piece.dim, k })
            }
        }
    }

    /// Errors unless the weight is locally integrable.
    pub fn check_admissible(&self) -> Result<()> {
        if let ResolvedWeight::Power { alpha, n, k, .. } = self {
            let (lo, hi) = admissible_range(*n, *k);
            if !(*alpha > lo && *alpha < hi) {
                return Err(Error::NonIntegrableWeight { alpha: *alpha, lo, hi });
            }
        }
        Ok(())
    }

    /// Per-cell integrals of `omega` (or `1/omega`) over a piece.
    pub fn integrate(&self, piece: &PieceMesh, reciprocal: bool) -> Vec<CellMoments> {
        let mut values = Vec::new();
        (0..piece.n_cells())
            .map(|c| {
                let pts = piece.cell_points(c);
                let density = match self {
                    ResolvedWeight::Constant(w) => Density::Constant(if reciprocal { 1.0 / w } else { *w }),
                    ResolvedWeight::Power { anchor, alpha, .. } => {
                        Density::Power { anchor, exponent: if reciprocal { -alpha } else { *alpha } }
                    }
                    ResolvedWeight::Tabulated(t) => {
                        values.clear();
                        values.extend(piece.cell(c).iter().map(|&v| t[v]));
                        if reciprocal {
                            Density::ReciprocalLinear
                        } else {
                            Density::Linear
                        }
                    }
                };
                cell_moments(&pts, &values, density)
            })
            .collect()
    }

    /// Pointwise value at a point of the piece carrying vertex `v`.
    pub fn value_at_vertex(&self, piece: &PieceMesh, v: usize) -> f64 {
        match self {
            ResolvedWeight::Constant(c) => *c,
            ResolvedWeight::Power { anchor, alpha, .. } => {
                let d = anchor.distance(piece.vertices[v]);
                if d == 0.0 {
                    if *alpha > 0.0 {
                        f64::INFINITY
                    } else if *alpha < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    num_traits::Float::powf(d, -alpha)
                }
            }
            ResolvedWeight::Tabulated(t) => t[v],
        }
    }
}

fn anchor_segments(piece: &PieceMesh, vertices: &[usize]) -> Vec<(usize, usize)> {
    if piece.dim < 2 {
        return Vec::new();
    }
    piece
        .edges()
        .into_iter()
        .filter(|&(a, b)| vertices.binary_search(&a).is_ok() && vertices.binary_search(&b).is_ok())
        .collect()
}

/// A glued complex with a weight on every piece and per-cell integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComplex {
    pub complex: GluedComplex,
    pub weights: Vec<ResolvedWeight>,
    cells: Vec<Vec<CellMoments>>,
}

impl WeightedComplex {
    /// Unit weight on every piece.
    pub fn unweighted(complex: GluedComplex) -> Self {
        let weights = vec![ResolvedWeight::Constant(1.0); complex.pieces.len()];
        let cells = complex.pieces.iter().map(|p| ResolvedWeight::Constant(1.0).integrate(p, false)).collect();
        WeightedComplex { complex, weights, cells }
    }

    /// Replaces the weight of `spec.piece`.
    pub fn attach(mut self, spec: &WeightSpec) -> Result<Self> {
        let w = ResolvedWeight::resolve(&self.complex, spec)?;
        w.check_admissible()?;
        let piece = &self.complex.pieces[spec.piece];
        let cells = w.integrate(piece, false);
        if let Some(c) = cells.iter().position(|m| !m.total.is_finite()) {
            return Err(Error::Numeric {
                what: format!("weight integral on cell {c} of piece {}", spec.piece),
                residual: f64::INFINITY,
            });
        }
        self.cells[spec.piece] = cells;
        self.weights[spec.piece] = w;
        Ok(self)
    }

    pub fn cell(&self, piece: usize, cell: usize) -> &CellMoments {
        &self.cells[piece][cell]
    }

    pub fn piece_mass(&self, piece: usize) -> f64 {
        self.cells[piece].iter().map(|m| m.total).sum()
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.complex.pieces.len()).map(|p| self.piece_mass(p)).sum()
    }

    /// Lumped mass per global DOF: `M_x = sum over cells of int lambda_x omega`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.complex.dof_count()];
        for (p, piece) in self.complex.pieces.iter().enumerate() {
            let map = &self.complex.global_dof[p];
            for c in 0..piece.n_cells() {
                for (i, &v) in piece.cell(c).iter().enumerate() {
                    m[map[v]] += self.cells[p][c].moments[i];
                }
            }
        }
        m
    }

    /// Measure of `{x : field(x) <= r}` per piece, where `field` holds
    /// values per global DOF, interpolated linearly on cells.
    pub fn sublevel_mass_by_piece(&self, field: &[f64], r: f64) -> Vec<f64> {
        let mut d = Vec::new();
        self.complex
            .pieces
            .iter()
            .enumerate()
            .map(|(p, piece)| {
                let map = &self.complex.global_dof[p];
                (0..piece.n_cells())
                    .map(|c| {
                        d.clear();
                        d.extend(piece.cell(c).iter().map(|&v| field[map[v]]));
                        let f = covered_fraction(&mut d, r);
                        if f > 0.0 {
                            f * self.cells[p][c].total
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect()
    }
}

/// Attaches `spec` to an otherwise unweighted complex.
pub fn attach_weight(complex: &GluedComplex, spec: &WeightSpec) -> Result<WeightedComplex> {
    WeightedComplex::unweighted(complex.clone()).attach(spec)
}

/// Fraction of a simplex on which the linear interpolant of the vertex
/// values `d` is at most `r`. Exact for segments and triangles; tetrahedra
/// use the fraction of covered vertices.
pub fn covered_fraction(d: &mut [f64], r: f64) -> f64 {
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = d.len();
    if r < d[0] {
        return 0.0;
    }
    if r >= d[n - 1] {
        return 1.0;
    }
    match n {
        1 => 1.0,
        2 => (r - d[0]) / (d[1] - d[0]),
        3 => {
            let (d0, d1, d2) = (d[0], d[1], d[2]);
            if r <= d1 {
                (r - d0) * (r - d0) / ((d1 - d0) * (d2 - d0))
            } else {
                1.0 - (d2 - r) * (d2 - r) / ((d2 - d0) * (d2 - d1))
            }
        }
        _ => d.iter().filter(|&&x| x <= r).count() as f64 / n as f64,
    }
}

/// `mu(B_r(center))` in the glued metric.
pub fn mu_ball(wc: &WeightedComplex, center: usize, r: f64) -> Result<f64> {
    Ok(mu_ball_by_piece(wc, center, r)?.iter().sum())
}

/// `mu_i(B_r(center))` for every piece `i`.
pub fn mu_ball_by_piece(wc: &WeightedComplex, center: usize, r: f64) -> Result<Vec<f64>> {
    if center >= wc.complex.dof_count() {
        return Err(Error::input(format!("center {center} out of range")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    let d = wc.complex.distances_from(center);
    Ok(wc.sublevel_mass_by_piece(&d, r))
}

/// `mu(L_R)` for the glued tube `{x : d(x, L) <= R}` around intersection `id`.
pub fn mu_tube(wc: &WeightedComplex, id: usize, radius: f64) -> Result<f64> {
    let map = wc.complex.intersection(id)?;
    let d = wc.complex.distances_from_set(&map.dofs);
    Ok(wc.sublevel_mass_by_piece(&d, radius).iter().sum())
}

#[cfg(test)]
mod tests;
