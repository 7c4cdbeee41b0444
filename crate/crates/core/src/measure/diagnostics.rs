//! Sampled diagnostics for the weight hypotheses: A2 constants on balls,
//! the N-doubling envelope, and the L-Muckenhoupt tube ratio. All
//! verdicts are heuristics drawn from finitely many samples.
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use super::{covered_fraction, CellMoments, ResolvedWeight, WeightSpec, WeightedComplex};
use crate::error::{Error, Result};
use crate::geometry::{piece_field, GluedComplex, PieceMesh, PieceMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Integrable,
    DivergentLooking,
    Violated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Sample {
    /// Local vertex of the piece.
    pub center: usize,
    pub r: f64,
    pub mean_weight: f64,
    pub mean_inverse: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub samples: Vec<A2Sample>,
    /// Maximum of `value` over the sample.
    pub estimate: f64,
    pub flagged: bool,
    pub flagged_centers: Vec<usize>,
}

fn sublevel(piece: &PieceMesh, field: &[f64], r: f64, cells: &[CellMoments]) -> f64 {
    let mut d = Vec::with_capacity(piece.dim + 1);
    (0..piece.n_cells())
        .map(|c| {
            d.clear();
            d.extend(piece.cell(c).iter().map(|&v| field[v]));
            let f = covered_fraction(&mut d, r);
            if f > 0.0 {
                f * cells[c].total
            } else {
                0.0
            }
        })
        .sum()
}

/// Growth factor along shrinking balls that raises the A2 flag.
const A2_GROWTH: f64 = 1.5;

/// `(mean of omega)(mean of 1/omega)` over intrinsic balls of one piece,
/// `sample` holding `(local vertex, r)` pairs. The weight need not be
/// admissible; non-integrable balls give an infinite value.
pub fn check_a2(complex: &GluedComplex, spec: &WeightSpec, sample: &[(usize, f64)]) -> Result<A2Report> {
    if sample.is_empty() {
        return Err(Error::invalid("A2 sample is empty"));
    }
    let w = ResolvedWeight::resolve(complex, spec)?;
    let piece = &complex.pieces[spec.piece];
    let direct = w.integrate(piece, false);
    let inverse = w.integrate(piece, true);
    let volume = ResolvedWeight::Constant(1.0).integrate(piece, false);
    let mut samples = Vec::with_capacity(sample.len());
    let mut field_cache: Option<(usize, Vec<f64>)> = None;
    for &(center, r) in sample {
        if center >= piece.n_vertices() {
            return Err(Error::input(format!("A2 center {center} out of range")));
        }
        if !(r > 0.0) {
            return Err(Error::invalid("A2 radius must be positive"));
        }
        if field_cache.as_ref().map(|(c, _)| *c) != Some(center) {
            field_cache = Some((center, piece_field(piece, &[(center, 0.0)])));
        }
        let field = &field_cache.as_ref().unwrap().1;
        let vol = sublevel(piece, field, r, &volume);
        let mean_weight = sublevel(piece, field, r, &direct) / vol;
        let mean_inverse = sublevel(piece, field, r, &inverse) / vol;
        samples.push(A2Sample { center, r, mean_weight, mean_inverse, value: mean_weight * mean_inverse });
    }
    let estimate = samples.iter().map(|s| s.value).fold(0.0, |a: f64, b| if b.is_nan() { a } else { a.max(b) });
    let mut centers: Vec<usize> = samples.iter().map(|s| s.center).collect();
    centers.sort_unstable();
    centers.dedup();
    let mut flagged_centers = Vec::new();
    for c in centers {
        let mut rows: Vec<&A2Sample> = samples.iter().filter(|s| s.center == c).collect();
        rows.sort_by(|a, b| b.r.partial_cmp(&a.r).unwrap());
        let unbounded = rows.iter().any(|s| !s.value.is_finite());
        let growing = rows.len() >= 3
            && rows.windows(2).all(|p| p[1].value >= p[0].value)
            && rows[rows.len() - 1].value > A2_GROWTH * rows[0].value;
        if unbounded || growing {
            flagged_centers.push(c);
        }
    }
    Ok(A2Report { samples, estimate, flagged: !flagged_centers.is_empty(), flagged_centers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingRow {
    pub center: usize,
    pub r: f64,
    pub mu_r: f64,
    pub mu_3r: f64,
    /// `mu(B_3r) / mu(B_r)`
    pub ratio: f64,
}

/// Comparison of piece measures on balls centred on an intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub center: usize,
    pub r: f64,
    /// `mu_i(B_r)` for the pieces owning the centre, in piece order.
    pub piece_measures: Vec<(usize, f64)>,
    /// Smallest over largest piece measure.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureProfile {
    /// `(center, r, mu(B_r))`, sorted by `r`.
    pub ball_table: Vec<(usize, f64, f64)>,
    pub doubling_table: Vec<DoublingRow>,
    /// `(rho, N(rho))` with `rho = 2 r`: max ratio over centres.
    pub n_fit: Vec<(f64, f64)>,
    /// Trapezoid integral of `N_fit` from 0 (constant extension) to the
    /// largest sampled `rho`.
    pub n_integral: f64,
    /// Log-log slope of `N_fit` over the smaller half of the radii.
    pub small_radius_slope: f64,
    pub verdict: Verdict,
    pub comparison: Vec<ComparisonRow>,
    /// True when a comparison ratio collapses as `r` shrinks.
    pub comparison_degenerate: bool,
}

/// Slope below which `N_fit` looks non-integrable at 0.
const DIVERGENT_SLOPE: f64 = -0.9;
/// A comparison ratio falling below this fraction of its large-radius
/// value counts as degenerate.
const COMPARISON_COLLAPSE: f64 = 0.5;

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).map(|&(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Samples `mu(B_3r)/mu(B_r)` at the given global DOFs and radii.
pub fn check_n_doubling(wc: &WeightedComplex, centers: &[usize], radii: &[f64]) -> Result<MeasureProfile> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::invalid("N-doubling needs at least one centre and one radius"));
    }
    let mut radii: Vec<f64> = radii.to_vec();
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let mut ball_table = Vec::new();
    let mut doubling_table = Vec::new();
    let mut comparison = Vec::new();
    let mut comparison_degenerate = false;
    for &c in centers {
        if c >= wc.complex.dof_count() {
            return Err(Error::input(format!("centre {c} out of range")));
        }
        let d = wc.complex.distances_from(c);
        let owners: Vec<usize> = wc.complex.pieces_of(c).collect();
        let mut ratios = Vec::new();
        for &r in &radii {
            let by_piece = wc.sublevel_mass_by_piece(&d, r);
            let mu_r: f64 = by_piece.iter().sum();
            let mu_3r: f64 = wc.sublevel_mass_by_piece(&d, 3.0 * r).iter().sum();
            ball_table.push((c, r, mu_r));
            ball_table.push((c, 3.0 * r, mu_3r));
            let ratio = if mu_r > 0.0 { mu_3r / mu_r } else { f64::INFINITY };
            doubling_table.push(DoublingRow { center: c, r, mu_r, mu_3r, ratio });
            if owners.len() > 1 {
                let pm: Vec<(usize, f64)> = owners.iter().map(|&p| (p, by_piece[p])).collect();
                let lo = pm.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                let hi = pm.iter().map(|x| x.1).fold(0.0, f64::max);
                let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
                ratios.push(ratio);
                comparison.push(ComparisonRow { center: c, r, piece_measures: pm, ratio });
            }
        }
        if ratios.len() >= 2 && ratios[0] < COMPARISON_COLLAPSE * ratios[ratios.len() - 1] {
            comparison_degenerate = true;
        }
    }
    ball_table.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    doubling_table.sort_by(|a, b| a.r.partial_cmp(&b.r).unwrap().then(a.center.cmp(&b.center)));
    let n_fit: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let n = doubling_table.iter().filter(|row| row.r == r).map(|row| row.ratio).fold(0.0, f64::max);
            (2.0 * r, n)
        })
        .collect();
    let mut n_integral = n_fit[0].0 * n_fit[0].1;
    for w in n_fit.windows(2) {
        n_integral += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
    }
    let half = n_fit.len().div_ceil(2);
    let small_radius_slope = loglog_slope(&n_fit[..half.max(2).min(n_fit.len())]);
    let verdict = if n_fit.iter().any(|p| !p.1.is_finite()) || small_radius_slope <= DIVERGENT_SLOPE {
        Verdict::DivergentLooking
    } else {
        Verdict::Integrable
    };
    Ok(MeasureProfile {
        ball_table,
        doubling_table,
        n_fit,
        n_integral,
        small_radius_slope,
        verdict,
        comparison,
        comparison_degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeRow {
    pub r: f64,
    pub weight_integral: f64,
    pub inverse_integral: f64,
    /// `int omega * int 1/omega / R^(2(n-k))`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LMuckenhouptReport {
    pub rows: Vec<TubeRow>,
    /// Largest over smallest finite ratio.
    pub spread: f64,
    pub verdict: Verdict,
}

/// Ratios confined to a band of this width count as bounded.
const TUBE_BAND: f64 = 10.0;

/// Tube ratios around intersection `id` inside the piece of `spec`.
pub fn check_l_muckenhoupt(
    complex: &GluedComplex,
    spec: &WeightSpec,
    id: usize,
    r_sweep: &[f64],
) -> Result<LMuckenhouptReport> {
    if r_sweep.is_empty() || r_sweep.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("tube radii must be positive and nonempty"));
    }
    let map = complex.intersection(id)?;
    if map.piece_a != spec.piece && map.piece_b != spec.piece {
        return Err(Error::input(format!("intersection {id} does not touch piece {}", spec.piece)));
    }
    let w = ResolvedWeight::resolve(complex, spec)?;
    let piece = &complex.pieces[spec.piece];
    let field = tube_field(complex, spec.piece, id)?;
    let direct = w.integrate(piece, false);
    let inverse = w.integrate(piece, true);
    let codim = (piece.dim - map.k) as i32;
    let mut sweep = r_sweep.to_vec();
    sweep.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rows: Vec<TubeRow> = sweep
        .iter()
        .map(|&r| {
            let a = sublevel(piece, &field, r, &direct);
            let b = sublevel(piece, &field, r, &inverse);
            TubeRow { r, weight_integral: a, inverse_integral: b, ratio: a * b / r.powi(2 * codim) }
        })
        .collect();
    let finite: Vec<f64> = rows.iter().map(|r| r.ratio).filter(|x| x.is_finite() && *x > 0.0).collect();
    let all_finite = finite.len() == rows.len();
    let spread = if all_finite {
        finite.iter().cloned().fold(0.0, f64::max) / finite.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let verdict = if all_finite && spread <= TUBE_BAND { Verdict::Satisfied } else { Verdict::Violated };
    Ok(LMuckenhouptReport { rows, spread, verdict })
}

/// Distance to the intersection inside one piece, per local vertex.
fn tube_field(complex: &GluedComplex, piece_id: usize, id: usize) -> Result<Vec<f64>> {
    let piece = &complex.pieces[piece_id];
    let spec = WeightSpec::power(piece_id, super::Anchor::Intersection(id), 0.0);
    let resolved = ResolvedWeight::resolve(complex, &spec)?;
    Ok(match (&resolved, piece.metric) {
        (ResolvedWeight::Power { anchor, .. }, PieceMetric::Euclidean) => {
            piece.vertices.iter().map(|&x| anchor.distance(x)).collect()
        }
        (ResolvedWeight::Power { vertices, .. }, _) => {
            let seeds: Vec<(usize, f64)> = vertices.iter().map(|&v| (v, 0.0)).collect();
            piece_field(piece, &seeds)
        }
        _ => vec![f64::INFINITY; piece.n_vertices()],
    })
}
