use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Point in the ambient space. Every piece lives in a common `R^3`.
pub type Point = [f64; 3];

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn dist3(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot3(d, d).sqrt()
}

fn normalize(v: Point) -> Option<Point> {
    let n = dot3(v, v).sqrt();
    (n > 0.0 && n.is_finite()).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Rigid motion `x -> R x + t` mapping local piece coordinates to the
/// ambient space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    /// Rows of `R`.
    pub rotation: [[f64; 3]; 3],
    pub translation: Point,
}

impl Default for Placement {
    fn default() -> Self {
        Placement::identity()
    }
}

impl Placement {
    pub fn identity() -> Self {
        Placement { rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation: [0.0; 3] }
    }

    pub fn translation(t: Point) -> Self {
        Placement { translation: t, ..Placement::identity() }
    }

    /// Local x axis goes to `x_axis`; local y to the component of `y_hint`
    /// orthogonal to it; local z completes a right-handed frame.
    pub fn from_frame(origin: Point, x_axis: Point, y_hint: Point) -> Result<Self> {
        let e1 = normalize(x_axis).ok_or_else(|| Error::invalid("placement axis must be non-zero"))?;
        let proj = dot3(y_hint, e1);
        let e2 = normalize([y_hint[0] - proj * e1[0], y_hint[1] - proj * e1[1], y_hint[2] - proj * e1[2]])
            .ok_or_else(|| Error::invalid("placement axes must not be parallel"))?;
        let e3 = cross(e1, e2);
        // columns of R are the images of the local axes
        Ok(Placement {
            rotation: [[e1[0], e2[0], e3[0]], [e1[1], e2[1], e3[1]], [e1[2], e2[2], e3[2]]],
            translation: origin,
        })
    }

    /// Placement whose local x axis points along `direction`.
    pub fn along(origin: Point, direction: Point) -> Result<Self> {
        let d = normalize(direction).ok_or_else(|| Error::invalid("direction must be non-zero"))?;
        let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        Placement::from_frame(origin, d, helper)
    }

    /// Placement whose local z axis (the normal of a planar piece) is `normal`.
    pub fn with_normal(origin: Point, normal: Point) -> Result<Self> {
        let n = normalize(normal).ok_or_else(|| Error::invalid("normal must be non-zero"))?;
        let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let proj = dot3(helper, n);
        let e1 = normalize([helper[0] - proj * n[0], helper[1] - proj * n[1], helper[2] - proj * n[2]]).unwrap();
        let e2 = cross(n, e1);
        Placement::from_frame(origin, e1, e2)
    }

    pub fn apply(&self, p: Point) -> Point {
        let r = &self.rotation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.translation[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.translation[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.translation[2],
        ]
    }

    fn is_rigid(&self) -> bool {
        let r = &self.rotation;
        (0..3).all(|i| {
            (0..3).all(|j| {
                let d: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                (d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9
            })
        })
    }
}

/// How intrinsic distances inside a piece are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceMetric {
    /// Flat and convex: the chord is the geodesic.
    Euclidean,
    /// Anything else: shortest paths along mesh edges.
    EdgeGraph,
}

/// A simplicial manifold piece with boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceMesh {
    pub id: usize,
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Flat list of cells, `dim + 1` vertex indices each.
    pub cells: Vec<usize>,
    pub boundary: Vec<bool>,
    pub metric: PieceMetric,
}

/// Measure, barycentric gradients and vertices of one simplex.
#[derive(Debug, Clone)]
pub struct SimplexGeom {
    pub volume: f64,
    pub grads: Vec<Point>,
    pub diameter: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Geometry of the simplex with the given vertices (`dim + 1` points).
pub fn simplex_geometry(points: &[Point]) -> Option<SimplexGeom> {
    let d = points.len() - 1;
    let e: Vec<Point> = points[1..].iter().map(|&p| sub(p, points[0])).collect();
    let mut g = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            g[i][j] = dot3(e[i], e[j]);
        }
    }
    let (inv, det) = invert_small(&g)?;
    let volume = det.max(0.0).sqrt() / factorial(d);
    let mut diameter: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            diameter = diameter.max(dist3(points[i], points[j]));
        }
    }
    let scale = diameter.powi(d as i32);
    if !(volume > 1e-12 * scale) || !volume.is_finite() {
        return None;
    }
    let mut grads = vec![[0.0; 3]; d + 1];
    for k in 0..d {
        let mut gk = [0.0; 3];
        for m in 0..d {
            for c in 0..3 {
                gk[c] += inv[k][m] * e[m][c];
            }
        }
        grads[k + 1] = gk;
        for c in 0..3 {
            grads[0][c] -= gk[c];
        }
    }
    Some(SimplexGeom { volume, grads, diameter })
}

/// Gauss-Jordan inverse and determinant of a small SPD matrix.
fn invert_small(a: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, f64)> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col] == 0.0 {
            return None;
        }
        if piv != col {
            m.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        let p = m[col][col];
        det *= p;
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                for j in 0..n {
                    m[i][j] -= f * m[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some((inv, det))
}

impl PieceMesh {
    /// Builds and validates a piece from raw data. Boundary flags are
    /// derived from cell incidence when `boundary` is `None`.
    pub fn new(
        id: usize,
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<usize>,
        boundary: Option<Vec<bool>>,
        metric: PieceMetric,
    ) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::invalid(format!("piece {id}: dimension {dim} not in 1..=3")));
        }
        if cells.is_empty() || !cells.len().is_multiple_of(dim + 1) {
            return Err(Error::input(format!(
                "piece {id}: cell list length {} not a multiple of {}",
                cells.len(),
                dim + 1
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::input(format!("piece {id}: cell references vertex {bad} of {}", vertices.len())));
        }
        let mut piece = PieceMesh { id, dim, vertices, cells, boundary: Vec::new(), metric };
        let derived = piece.boundary_from_cells();
        piece.boundary = match boundary {
            None => derived,
            Some(flags) => {
                if flags.len() != piece.vertices.len() {
                    return Err(Error::input(format!(
                        "piece {id}: {} boundary flags for {} vertices",
                        flags.len(),
                        piece.vertices.len()
                    )));
                }
                if let Some(v) = (0..flags.len()).find(|&v| flags[v] && !derived[v]) {
                    return Err(Error::input(format!(
                        "piece {id}: vertex {v} flagged boundary but lies on no boundary facet"
                    )));
                }
                flags
            }
        };
        piece.validate()?;
        Ok(piece)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 1;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cell(c).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_geometry(&self, c: usize) -> Result<SimplexGeom> {
        simplex_geometry(&self.cell_points(c)).ok_or(Error::DegenerateCell { piece: self.id, cell: c })
    }

    /// Unique undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for i in 0..cell.len() {
                for j in (i + 1)..cell.len() {
                    let (a, b) = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    set.insert((a, b));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Facets (sorted vertex tuples) with the cells containing them.
    pub fn facets(&self) -> BTreeMap<Vec<usize>, Vec<usize>> {
        let mut map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for skip in 0..cell.len() {
                let mut f: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                f.sort_unstable();
                map.entry(f).or_default().push(c);
            }
        }
        map
    }

    fn boundary_from_cells(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (facet, owners) in self.facets() {
            if owners.len() == 1 {
                for v in facet {
                    flags[v] = true;
                }
            }
        }
        flags
    }

    fn validate(&self) -> Result<()> {
        for c in 0..self.n_cells() {
            self.cell_geometry(c)?;
        }
        let mut used = vec![false; self.vertices.len()];
        self.cells.iter().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::input(format!("piece {}: vertex {v} belongs to no cell", self.id)));
        }
        let mut uf = UnionFind::new(self.vertices.len());
        for (a, b) in self.edges() {
            uf.union(a, b);
        }
        let root = uf.find(0);
        if (0..self.vertices.len()).any(|v| uf.find(v) != root) {
            return Err(Error::input(format!("piece {}: cell graph is not connected", self.id)));
        }
        Ok(())
    }

    /// Largest cell diameter.
    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.n_cells())
            .filter_map(|c| simplex_geometry(&self.cell_points(c)))
            .map(|g| g.diameter)
            .fold(0.0, f64::max)
    }

    /// Total `dim`-volume.
    pub fn volume(&self) -> f64 {
        (0..self.n_cells()).filter_map(|c| simplex_geometry(&self.cell_points(c))).map(|g| g.volume).sum()
    }

    /// Largest interior angle over all triangles, in radians. Zero for
    /// pieces that are not triangulated surfaces.
    pub fn max_angle(&self) -> f64 {
        if self.dim != 2 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for c in 0..self.n_cells() {
            let p = self.cell_points(c);
            for k in 0..3 {
                worst = worst.max(angle_at(p[k], p[(k + 1) % 3], p[(k + 2) % 3]));
            }
        }
        worst
    }
}

fn angle_at(apex: Point, a: Point, b: Point) -> f64 {
    let u = sub(a, apex);
    let v = sub(b, apex);
    let c = dot3(u, v) / (dot3(u, u).sqrt() * dot3(v, v).sqrt());
    c.clamp(-1.0, 1.0).acos()
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller index as root so numbering is order independent.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Uniform 1D mesh of `[0, length]` along the local x axis.
pub fn build_segment_piece(id: usize, length: f64, n_cells: usize, placement: Placement) -> Result<PieceMesh> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::invalid(format!("segment length must be positive, got {length}")));
    }
    if n_cells == 0 {
        return Err(Error::invalid("segment needs at least one cell"));
    }
    if !placement.is_rigid() {
        return Err(Error::invalid("placement rotation is not orthonormal"));
    }
    let h = length / n_cells as f64;
    let vertices: Vec<Point> = (0..=n_cells)
        .map(|i| {
            let x = if i == n_cells { length } else { i as f64 * h };
            placement.apply([x, 0.0, 0.0])
        })
        .collect();
    let cells: Vec<usize> = (0..n_cells).flat_map(|i| [i, i + 1]).collect();
    let mut boundary = vec![false; n_cells + 1];
    boundary[0] = true;
    boundary[n_cells] = true;
    PieceMesh::new(id, 1, vertices, cells, Some(boundary), PieceMetric::Euclidean)
}

/// Vertices per ring of the disk mesh: ring `j` carries `RING_FACTOR * j`
/// points.
const RING_FACTOR: usize = 8;

/// Documented bound: every triangle of `build_disk_piece(radius, r)` has
/// diameter at most `DISK_DIAMETER_CONSTANT * radius / r`.
pub const DISK_DIAMETER_CONSTANT: f64 = 2.0;

/// Concentric-ring triangulation of the disk of the given radius in the
/// local xy plane, centred at the local origin.
///
/// Ring `j = 1..=refinement` sits at radius `j * radius / refinement` and
/// carries `8 j` equally spaced vertices starting at angle 0. Neighbouring
/// rings are zipped together by angle and the result is made Delaunay by
/// edge flips, so every interior edge has opposite angles summing to at
/// most pi. The centre is vertex 0.
pub fn build_disk_piece(id: usize, radius: f64, refinement: usize, placement: Placement) -> Result<PieceMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("disk radius must be positive, got {radius}")));
    }
    if refinement == 0 {
        return Err(Error::invalid("disk refinement must be at least 1"));
    }
    if !placement.is_rigid() {
        return Err(Error::invalid("placement rotation is not orthonormal"));
    }
    let mut local: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for j in 1..=refinement {
        let rho = if j == refinement { radius } else { radius * j as f64 / refinement as f64 };
        let m = RING_FACTOR * j;
        ring_start.push(local.len());
        ring_len.push(m);
        for i in 0..m {
            let th = 2.0 * PI * i as f64 / m as f64;
            local.push([rho * th.cos(), rho * th.sin()]);
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for j in 1..=refinement {
        zip_rings(&local, ring_start[j - 1], ring_len[j - 1], ring_start[j], ring_len[j], &mut tris);
    }
    delaunay_flips(&local, &mut tris);
    let vertices: Vec<Point> = local.iter().map(|p| placement.apply([p[0], p[1], 0.0])).collect();
    let mut boundary = vec![false; local.len()];
    for v in ring_start[refinement]..local.len() {
        boundary[v] = true;
    }
    let cells: Vec<usize> = tris.iter().flat_map(|t| t.iter().copied()).collect();
    PieceMesh::new(id, 2, vertices, cells, Some(boundary), PieceMetric::Euclidean)
}

/// Log-polar triangulation of the annulus `inner <= |x| <= outer` in the
/// local xy plane. Every ring carries `m = max(8, ceil(2 pi refinement))`
/// vertices; ring radii grow geometrically so cells stay close to squares,
/// giving about `m ln(outer / inner) / 2 pi` rings. Both rims are flagged
/// boundary; the inner rim comes first in vertex order.
pub fn build_annulus_piece(
    id: usize,
    inner: f64,
    outer: f64,
    refinement: usize,
    placement: Placement,
) -> Result<PieceMesh> {
    if !(inner > 0.0 && outer > inner && outer.is_finite()) {
        return Err(Error::invalid(format!("annulus needs 0 < inner < outer, got {inner}, {outer}")));
    }
    if refinement == 0 {
        return Err(Error::invalid("annulus refinement must be at least 1"));
    }
    if !placement.is_rigid() {
        return Err(Error::invalid("placement rotation is not orthonormal"));
    }
    let m = ((2.0 * PI * refinement as f64).ceil() as usize).max(8);
    let ratio = (outer / inner).ln();
    let nr = ((m as f64 * ratio / (2.0 * PI)).round() as usize).max(1);
    let mut local: Vec<[f64; 2]> = Vec::with_capacity(m * (nr + 1));
    for j in 0..=nr {
        let rho = match j {
            0 => inner,
            _ if j == nr => outer,
            _ => inner * (ratio * j as f64 / nr as f64).exp(),
        };
        // stagger alternate rings by half a step so zipped triangles are
        // nearly equilateral
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..m {
            let th = 2.0 * PI * (i as f64 + shift) / m as f64;
            local.push([rho * th.cos(), rho * th.sin()]);
        }
    }
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for j in 0..nr {
        for i in 0..m {
            let (a, a1) = (j * m + i, j * m + (i + 1) % m);
            let (b, b1) = ((j + 1) * m + i, (j + 1) * m + (i + 1) % m);
            if j % 2 == 0 {
                tris.push([a, a1, b]);
                tris.push([a1, b1, b]);
            } else {
                tris.push([a, b1, b]);
                tris.push([a, a1, b1]);
            }
        }
    }
    delaunay_flips(&local, &mut tris);
    let vertices: Vec<Point> = local.iter().map(|p| placement.apply([p[0], p[1], 0.0])).collect();
    let boundary = (0..local.len()).map(|v| v < m || v >= nr * m).collect();
    let cells: Vec<usize> = tris.iter().flat_map(|t| t.iter().copied()).collect();
    PieceMesh::new(id, 2, vertices, cells, Some(boundary), PieceMetric::Euclidean)
}

fn zip_rings(pts: &[[f64; 2]], a0: usize, a: usize, b0: usize, b: usize, out: &mut Vec<[usize; 3]>) {
    if a == 1 {
        for k in 0..b {
            out.push([a0, b0 + k, b0 + (k + 1) % b]);
        }
        return;
    }
    let ang = |k: usize, n: usize| 2.0 * PI * k as f64 / n as f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a || j < b {
        let advance_outer = if i == a {
            true
        } else if j == b {
            false
        } else {
            let (na, nb) = (ang(i + 1, a), ang(j + 1, b));
            if (na - nb).abs() < 1e-12 {
                // tie: pick the shorter diagonal
                let d_outer = dist2(pts[a0 + i % a], pts[b0 + (j + 1) % b]);
                let d_inner = dist2(pts[a0 + (i + 1) % a], pts[b0 + j % b]);
                d_outer <= d_inner
            } else {
                nb < na
            }
        };
        if advance_outer {
            out.push([a0 + i % a, b0 + j % b, b0 + (j + 1) % b]);
            j += 1;
        } else {
            out.push([a0 + i % a, b0 + j % b, a0 + (i + 1) % a]);
            i += 1;
        }
    }
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn angle2(apex: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let u = [a[0] - apex[0], a[1] - apex[1]];
    let v = [b[0] - apex[0], b[1] - apex[1]];
    let c = (u[0] * v[0] + u[1] * v[1]) / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
    c.clamp(-1.0, 1.0).acos()
}

/// Lawson flips until every interior edge is locally Delaunay.
fn delaunay_flips(pts: &[[f64; 2]], tris: &mut [[usize; 3]]) {
    for _pass in 0..64 {
        let mut edge_map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edge_map.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut touched = vec![false; tris.len()];
        let mut flipped = 0;
        for ((a, b), owners) in edge_map {
            if owners.len() != 2 || touched[owners[0]] || touched[owners[1]] {
                continue;
            }
            let (t1, t2) = (owners[0], owners[1]);
            let opp = |t: &[usize; 3]| *t.iter().find(|&&v| v != a && v != b).unwrap();
            let (c, d) = (opp(&tris[t1]), opp(&tris[t2]));
            let sum = angle2(pts[c], pts[a], pts[b]) + angle2(pts[d], pts[a], pts[b]);
            if sum > PI + 1e-10 {
                tris[t1] = [c, d, a];
                tris[t2] = [d, c, b];
                touched[t1] = true;
                touched[t2] = true;
                flipped += 1;
            }
        }
        if flipped == 0 {
            return;
        }
    }
}

/// Structured mesh of `[0, width] x [0, height]` in the local xy plane:
/// `nx * ny` rectangles, each split along its (+,+) diagonal.
pub fn build_rectangle_piece(
    id: usize,
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    placement: Placement,
) -> Result<PieceMesh> {
    if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::invalid("rectangle needs positive extents and cell counts"));
    }
    if !placement.is_rigid() {
        return Err(Error::invalid("placement rotation is not orthonormal"));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { width } else { width * i as f64 / nx as f64 };
            let y = if j == ny { height } else { height * j as f64 / ny as f64 };
            vertices.push(placement.apply([x, y, 0.0]));
            boundary.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    PieceMesh::new(id, 2, vertices, cells, Some(boundary), PieceMetric::Euclidean)
}
