//! Per-cell integrals of a weight and of the weight times each barycentric
//! function. Cells touching the anchor of a power weight are integrated
//! exactly in the distance coordinate (collapsed coordinates at the
//! singular vertex or facet) and by Gauss rules in the angular one.
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use crate::geometry::{dist3, dot3, simplex_geometry, sub, Point};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Geometric realisation of an anchor set: points and segments.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGeometry {
    pub points: Vec<Point>,
    pub segments: Vec<(Point, Point)>,
    /// Intrinsic dimension of the anchor (0 or 1).
    pub k: usize,
}

impl AnchorGeometry {
    pub fn distance(&self, x: Point) -> f64 {
        let mut best = f64::INFINITY;
        for &p in &self.points {
            best = best.min(dist3(p, x));
        }
        for &(a, b) in &self.segments {
            let ab = sub(b, a);
            let t = (dot3(sub(x, a), ab) / dot3(ab, ab)).clamp(0.0, 1.0);
            best = best.min(dist3(x, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]]));
        }
        best
    }
}

/// A weight density to integrate over cells.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Density<'a> {
    Constant(f64),
    /// `dist(x, anchor)^(-exponent)`
    Power {
        anchor: &'a AnchorGeometry,
        exponent: f64,
    },
    /// P1 interpolant of per-vertex values (indexed like the cell).
    Linear,
    /// Reciprocal of the P1 interpolant.
    ReciprocalLinear,
}

/// `total = int_cell w`, `moments[i] = int_cell lambda_i w`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub total: f64,
    pub moments: Vec<f64>,
}

impl CellMoments {
    fn zero(n: usize) -> Self {
        CellMoments { total: 0.0, moments: vec![0.0; n] }
    }

    fn infinite(n: usize) -> Self {
        CellMoments { total: f64::INFINITY, moments: vec![f64::INFINITY; n] }
    }
}

const ANGULAR_NODES: usize = 16;
const SMOOTH_NODES: usize = 6;
const MAX_DEPTH: usize = 8;

/// Integrates `density` over the simplex `points`. `values` are per-vertex
/// values for the linear densities and ignored otherwise.
pub(crate) fn cell_moments(points: &[Point], values: &[f64], density: Density<'_>) -> CellMoments {
    let n = points.len();
    let geom = match simplex_geometry(points) {
        Some(g) => g,
        None => return CellMoments::zero(n),
    };
    let d = n - 1;
    match density {
        Density::Constant(c) => {
            let total = c * geom.volume;
            CellMoments { total, moments: vec![total / n as f64; n] }
        }
        Density::Linear => {
            // int lambda_i lambda_j = vol (1 + delta_ij) / ((d + 1)(d + 2))
            let sum: f64 = values.iter().sum();
            let c = geom.volume / ((d + 1) * (d + 2)) as f64;
            let moments: Vec<f64> = values.iter().map(|&v| c * (sum + v)).collect();
            CellMoments { total: geom.volume * sum / n as f64, moments }
        }
        Density::ReciprocalLinear => smooth_rule(points, geom.volume, &|bary: &[f64], _x: Point| {
            1.0 / bary.iter().zip(values).map(|(b, v)| b * v).sum::<f64>()
        }),
        Density::Power { anchor, exponent } => {
            let bary: Vec<Vec<f64>> = (0..n).map(|i| unit(n, i)).collect();
            power_cell(points, &bary, anchor, exponent, 0)
        }
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Tensor Gauss rule in collapsed coordinates. `f` receives barycentric
/// coordinates and the point.
fn smooth_rule(points: &[Point], volume: f64, f: &dyn Fn(&[f64], Point) -> f64) -> CellMoments {
    let n = points.len();
    let (gx, gw) = gauss_legendre(SMOOTH_NODES);
    let mut out = CellMoments::zero(n);
    match n {
        2 => {
            for (&s, &w) in gx.iter().zip(&gw) {
                let bary = [1.0 - s, s];
                let val = f(&bary, lerp(points[0], points[1], s)) * w * volume;
                out.total += val;
                out.moments[0] += bary[0] * val;
                out.moments[1] += bary[1] * val;
            }
        }
        3 => {
            for (&s, &ws) in gx.iter().zip(&gw) {
                for (&t, &wt) in gx.iter().zip(&gw) {
                    let bary = [1.0 - s, s * (1.0 - t), s * t];
                    let x = combo(points, &bary);
                    let val = f(&bary, x) * ws * wt * 2.0 * volume * s;
                    out.total += val;
                    for i in 0..3 {
                        out.moments[i] += bary[i] * val;
                    }
                }
            }
        }
        _ => {
            // tetrahedra: centroid-free degree-2 rule is enough for the
            // bounded densities allowed in three dimensions
            let a = 0.585_410_196_624_968_5;
            let b = 0.138_196_601_125_010_5;
            for q in 0..4 {
                let mut bary = [b; 4];
                bary[q] = a;
                let val = f(&bary, combo(points, &bary)) * 0.25 * volume;
                out.total += val;
                for i in 0..4 {
                    out.moments[i] += bary[i] * val;
                }
            }
        }
    }
    out
}

fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

fn combo(points: &[Point], bary: &[f64]) -> Point {
    let mut x = [0.0; 3];
    for (p, &b) in points.iter().zip(bary) {
        for c in 0..3 {
            x[c] += b * p[c];
        }
    }
    x
}

/// `int_0^1 s^(p-1) (1-s)^(q-1) ds`, infinite when `p <= 0`.
fn beta_int(p: f64, q: usize) -> f64 {
    if p <= 0.0 {
        return f64::INFINITY;
    }
    // B(p, q) = (q-1)! / (p (p+1) ... (p+q-1))
    let mut num = 1.0;
    let mut den = 1.0;
    for j in 0..q {
        den *= p + j as f64;
        if j > 0 {
            num *= j as f64;
        }
    }
    num / den
}

/// Accumulates sub-cell moments into parent barycentric moments.
fn accumulate(out: &mut CellMoments, sub: &CellMoments, sub_bary: &[Vec<f64>]) {
    out.total += sub.total;
    for (j, bj) in sub_bary.iter().enumerate() {
        for (i, &bij) in bj.iter().enumerate() {
            if bij != 0.0 {
                out.moments[i] += bij * sub.moments[j];
            }
        }
    }
}

fn power_cell(points: &[Point], bary: &[Vec<f64>], anchor: &AnchorGeometry, a: f64, depth: usize) -> CellMoments {
    let n = points.len();
    let parent_n = bary[0].len();
    let geom = match simplex_geometry(points) {
        Some(g) => g,
        None => return CellMoments::zero(parent_n),
    };
    let eps = 1e-12 * geom.diameter.max(1e-300);
    let dists: Vec<f64> = points.iter().map(|&p| anchor.distance(p)).collect();
    let on: Vec<bool> = dists.iter().map(|&d| d <= eps).collect();
    let n_on = on.iter().filter(|&&b| b).count();
    let mut out = CellMoments::zero(parent_n);

    let local = if n_on == 0 {
        let near = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        if near < geom.diameter && depth < 3 {
            None
        } else {
            Some(smooth_rule(points, geom.volume, &|_b, x| anchor.distance(x).powf(-a)))
        }
    } else if n == 2 && n_on == 1 {
        Some(segment_singular(points, &on, a))
    } else if n == 3 && n_on == 1 {
        Some(triangle_vertex_singular(points, &on, anchor, a))
    } else if n == 3 && n_on == 2 {
        let (i, j) = pair_on(&on);
        let mid = lerp(points[i], points[j], 0.5);
        if anchor.distance(mid) <= eps {
            Some(triangle_facet_singular(points, &on, a))
        } else {
            None
        }
    } else {
        None
    };
    if let Some(m) = local {
        if !m.total.is_finite() {
            return CellMoments::infinite(parent_n);
        }
        accumulate(&mut out, &m, bary);
        return out;
    }
    if depth >= MAX_DEPTH {
        let m = smooth_rule(points, geom.volume, &|_b, x| anchor.distance(x).max(eps).powf(-a));
        accumulate(&mut out, &m, bary);
        return out;
    }
    for (sub_pts, sub_bary) in subdivide(points, bary) {
        let m = power_cell(&sub_pts, &sub_bary, anchor, a, depth + 1);
        if !m.total.is_finite() {
            return CellMoments::infinite(parent_n);
        }
        out.total += m.total;
        for i in 0..parent_n {
            out.moments[i] += m.moments[i];
        }
    }
    out
}

fn pair_on(on: &[bool]) -> (usize, usize) {
    let idx: Vec<usize> = (0..on.len()).filter(|&i| on[i]).collect();
    (idx[0], idx[1])
}

/// Midpoint subdivision: 2 children for segments, 4 for triangles.
fn subdivide(points: &[Point], bary: &[Vec<f64>]) -> Vec<(Vec<Point>, Vec<Vec<f64>>)> {
    let mid = |i: usize, j: usize| -> (Point, Vec<f64>) {
        (lerp(points[i], points[j], 0.5), bary[i].iter().zip(&bary[j]).map(|(a, b)| 0.5 * (a + b)).collect())
    };
    match points.len() {
        2 => {
            let (m, mb) = mid(0, 1);
            vec![
                (vec![points[0], m], vec![bary[0].clone(), mb.clone()]),
                (vec![m, points[1]], vec![mb, bary[1].clone()]),
            ]
        }
        _ => {
            let (m01, b01) = mid(0, 1);
            let (m12, b12) = mid(1, 2);
            let (m20, b20) = mid(2, 0);
            vec![
                (vec![points[0], m01, m20], vec![bary[0].clone(), b01.clone(), b20.clone()]),
                (vec![m01, points[1], m12], vec![b01.clone(), bary[1].clone(), b12.clone()]),
                (vec![m20, m12, points[2]], vec![b20.clone(), b12.clone(), bary[2].clone()]),
                (vec![m01, m12, m20], vec![b01, b12, b20]),
            ]
        }
    }
}

/// Edge with the anchor at one end: `dist = s h`.
fn segment_singular(points: &[Point], on: &[bool], a: f64) -> CellMoments {
    let (v0, v1) = if on[0] { (0, 1) } else { (1, 0) };
    let h = dist3(points[0], points[1]);
    let scale = h.powf(1.0 - a);
    let near = scale * beta_int(1.0 - a, 2); // int s^-a (1 - s)
    let far = scale * beta_int(2.0 - a, 1); // int s^(1-a)
    let mut m = CellMoments::zero(2);
    m.total = near + far;
    m.moments[v0] = near;
    m.moments[v1] = far;
    m
}

/// Triangle touching a point of the anchor at one vertex. Collapsed
/// coordinates `x = v0 + s w(t)` with `dist(x) = s g(t)`.
fn triangle_vertex_singular(points: &[Point], on: &[bool], anchor: &AnchorGeometry, a: f64) -> CellMoments {
    let i0 = on.iter().position(|&b| b).unwrap();
    let (i1, i2) = ((i0 + 1) % 3, (i0 + 2) % 3);
    let (p1, p2) = (points[i1], points[i2]);
    let area = simplex_geometry(points).map(|g| g.volume).unwrap_or(0.0);
    let s_total = beta_int(2.0 - a, 1);
    let s_first = beta_int(3.0 - a, 1);
    if !s_total.is_finite() {
        return CellMoments::infinite(3);
    }
    let (gx, gw) = gauss_legendre(ANGULAR_NODES);
    let mut ang0 = 0.0;
    let mut ang1 = 0.0;
    let mut ang2 = 0.0;
    for (&t, &w) in gx.iter().zip(&gw) {
        let edge_pt = lerp(p1, p2, t);
        // dist(v0 + s w) = s dist(v0 + w) for anchors that are straight near v0
        let g = anchor.distance(edge_pt);
        let f = g.powf(-a) * w;
        ang0 += f;
        ang1 += f * (1.0 - t);
        ang2 += f * t;
    }
    let mut m = CellMoments::zero(3);
    m.total = 2.0 * area * s_total * ang0;
    m.moments[i0] = 2.0 * area * (s_total - s_first) * ang0;
    m.moments[i1] = 2.0 * area * s_first * ang1;
    m.moments[i2] = 2.0 * area * s_first * ang2;
    m
}

/// Triangle with a whole edge on a one-dimensional anchor:
/// `x = (1-s)[(1-t) v0 + t v1] + s v2`, `dist = s h`.
fn triangle_facet_singular(points: &[Point], on: &[bool], a: f64) -> CellMoments {
    let i2 = on.iter().position(|&b| !b).unwrap();
    let (i0, i1) = ((i2 + 1) % 3, (i2 + 2) % 3);
    let area = simplex_geometry(points).map(|g| g.volume).unwrap_or(0.0);
    let base = dist3(points[i0], points[i1]);
    let h = 2.0 * area / base;
    let c = 2.0 * area * h.powf(-a);
    let total = c * beta_int(1.0 - a, 2);
    if !total.is_finite() {
        return CellMoments::infinite(3);
    }
    let apex = c * beta_int(2.0 - a, 2);
    let side = c * beta_int(1.0 - a, 3) * 0.5;
    let mut m = CellMoments::zero(3);
    m.total = total;
    m.moments[i2] = apex;
    m.moments[i0] = side;
    m.moments[i1] = side;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_anchor() -> AnchorGeometry {
        AnchorGeometry { points: vec![[0.0; 3]], segments: vec![], k: 0 }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn constant_density_moments() {
        let tri = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = cell_moments(&tri, &[], Density::Constant(3.0));
        assert!((m.total - 3.0).abs() < 1e-14);
        assert!(m.moments.iter().all(|&x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn linear_density_moments_match_quadrature() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [0.3, 1.0, 0.5]];
        let vals = [1.0, 2.0, 5.0];
        let exact = cell_moments(&tri, &vals, Density::Linear);
        let area = simplex_geometry(&tri).unwrap().volume;
        let quad = smooth_rule(&tri, area, &|b, _| b.iter().zip(&vals).map(|(b, v)| b * v).sum());
        assert!((exact.total - quad.total).abs() < 1e-13);
        for i in 0..3 {
            assert!((exact.moments[i] - quad.moments[i]).abs() < 1e-13);
        }
    }

    /// Full disk of radius 1 as 64 fan triangles around the origin:
    /// int |x|^-a = 2 pi / (2 - a) times the polygon/circle ratio.
    #[test]
    fn point_singularity_on_fan() {
        let n = 64;
        for a in [-1.0, 0.5, 1.0, 1.5] {
            let mut total = 0.0;
            let mut centre_moment = 0.0;
            for k in 0..n {
                let t0 = 2.0 * PI * k as f64 / n as f64;
                let t1 = 2.0 * PI * (k + 1) as f64 / n as f64;
                let tri = [[0.0; 3], [t0.cos(), t0.sin(), 0.0], [t1.cos(), t1.sin(), 0.0]];
                let m = cell_moments(&tri, &[], Density::Power { anchor: &point_anchor(), exponent: a });
                total += m.total;
                centre_moment += m.moments[0];
            }
            // oracle: polar integral over the polygon, rho_max(theta) = c / cos(theta - mid)
            let half = PI / n as f64;
            let (gx, gw) = gauss_legendre(40);
            let per: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(&u, &w)| {
                    let th = -half + 2.0 * half * u;
                    let rmax = half.cos() / th.cos();
                    w * 2.0 * half * rmax.powf(2.0 - a) / (2.0 - a)
                })
                .sum();
            let oracle = per * n as f64;
            assert!((total - oracle).abs() < 1e-10 * oracle, "a={a}: {total} vs {oracle}");
            assert!(centre_moment > 0.0 && centre_moment < total);
        }
    }

    #[test]
    fn non_integrable_point_singularity() {
        let tri = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = cell_moments(&tri, &[], Density::Power { anchor: &point_anchor(), exponent: 2.0 });
        assert!(m.total.is_infinite());
    }

    #[test]
    fn line_singularity_facet() {
        // unit square split in two, anchor along y = 0:
        // int_0^1 int_0^1 y^-a = 1 / (1 - a)
        let anchor = AnchorGeometry { points: vec![], segments: vec![([0.0; 3], [1.0, 0.0, 0.0])], k: 1 };
        for a in [-0.5, 0.3, 0.7] {
            let t1 = [[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
            let t2 = [[0.0; 3], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
            let d = Density::Power { anchor: &anchor, exponent: a };
            let total = cell_moments(&t1, &[], d).total + cell_moments(&t2, &[], d).total;
            let exact = 1.0 / (1.0 - a);
            assert!((total - exact).abs() < 2e-3 * exact, "a={a}: {total} vs {exact}");
        }
    }

    #[test]
    fn segment_endpoint_singularity() {
        let seg = [[0.0; 3], [0.5, 0.0, 0.0]];
        let m = cell_moments(&seg, &[], Density::Power { anchor: &point_anchor(), exponent: 0.5 });
        // int_0^0.5 x^-0.5 = 2 sqrt(0.5)
        assert!((m.total - 2.0 * 0.5f64.sqrt()).abs() < 1e-14);
        // int_0^0.5 x^-0.5 (x / 0.5) = (2/3) 0.5^1.5 / 0.5
        assert!((m.moments[1] - (2.0 / 3.0) * 0.5f64.powf(1.5) / 0.5).abs() < 1e-14);
    }
}
