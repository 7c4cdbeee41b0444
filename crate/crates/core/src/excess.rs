//! Heat excess `E_h`, discrete perimeters and the small-time probe of
//! `E_h / sqrt(h)` against the perimeter.
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::DirichletSystem;
use crate::error::{Error, Result};
use crate::geometry::{dist3, simplex_geometry, PieceMesh};
use crate::measure::{gauss_legendre, ResolvedWeight, WeightedComplex};

/// Fewest implicit Euler substeps per heat solve.
pub const MIN_SUBSTEPS: usize = 16;

/// Flat-space limit of `E_h / sqrt(h)` per unit perimeter in the symmetric
/// convention with generator `Delta`.
pub fn flat_normalization() -> f64 {
    2.0 / PI.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcessConvention {
    /// `int int p_h(x, y) |f(x) - f(y)|`, i.e. `2 int chi_{U^c} S_h chi_U`.
    Symmetric,
    /// `int chi_{U^c} S_h chi_U`, half of the symmetric value.
    OneSided,
}

impl ExcessConvention {
    pub fn name(self) -> &'static str {
        match self {
            ExcessConvention::Symmetric => "symmetric",
            ExcessConvention::OneSided => "one-sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessValue {
    pub symmetric: f64,
    /// `int chi_{U^c} S_h chi_U`; only for characteristic functions.
    pub one_sided: Option<f64>,
    /// `int chi_U S_h chi_{U^c}`; equals `one_sided` up to solver error.
    pub one_sided_complement: Option<f64>,
}

impl ExcessValue {
    pub fn get(&self, convention: ExcessConvention) -> f64 {
        match convention {
            ExcessConvention::Symmetric => self.symmetric,
            ExcessConvention::OneSided => self.one_sided.unwrap_or(0.5 * self.symmetric),
        }
    }
}

fn check_time(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::input(format!("excess time must be positive, got {h}")));
    }
    Ok(())
}

fn is_characteristic(f: &[f64]) -> bool {
    f.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// `S_h u` by `steps` implicit Euler steps of `h / steps`.
pub fn heat_apply(system: &DirichletSystem, u: &[f64], h: f64, steps: usize) -> Result<Vec<f64>> {
    check_time(h)?;
    let steps = steps.max(1);
    let prop = system.propagator(h / steps as f64)?;
    let mut cur = u.to_vec();
    let mut next = vec![0.0; u.len()];
    for _ in 0..steps {
        prop.apply_into(&cur, &mut next)?;
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `E_h(f)`. Characteristic `f` costs one heat solve; any other `f` one
/// solve per DOF.
pub fn heat_excess(system: &DirichletSystem, f: &[f64], h: f64, substeps: usize) -> Result<ExcessValue> {
    check_time(h)?;
    if f.len() != system.dof_count() {
        return Err(Error::input("excess datum needs one value per DOF"));
    }
    let steps = substeps.max(MIN_SUBSTEPS);
    if is_characteristic(f) {
        // evolve the side not containing DOF 0, so that f and 1 - f run
        // the identical computation
        let flip = f[0] == 1.0;
        let g: Vec<f64> = if flip { f.iter().map(|v| 1.0 - v).collect() } else { f.to_vec() };
        let s = heat_apply(system, &g, h, steps)?;
        let mut out = 0.0;
        let mut inn = 0.0;
        for x in 0..g.len() {
            if g[x] == 0.0 {
                out += system.mass[x] * s[x];
            } else {
                // S_h chi_{V^c} = 1 - S_h chi_V
                inn += system.mass[x] * (1.0 - s[x]);
            }
        }
        let (one, other) = if flip { (inn, out) } else { (out, inn) };
        return Ok(ExcessValue { symmetric: out + inn, one_sided: Some(one), one_sided_complement: Some(other) });
    }
    let symmetric = (0..f.len()).map(|x| source_term(system, f, x, h, steps)).sum::<Result<f64>>()?;
    Ok(ExcessValue { symmetric, one_sided: None, one_sided_complement: None })
}

/// `M_x (S_h |f(x) - f|)(x)`, from the heat flow of the unit mass at `x`.
fn source_term(system: &DirichletSystem, f: &[f64], x: usize, h: f64, steps: usize) -> Result<f64> {
    let mut delta = vec![0.0; f.len()];
    delta[x] = 1.0 / system.mass[x];
    let s = heat_apply(system, &delta, h, steps)?;
    // by self-adjointness (S_h g)(x) = sum_y M_y (S_h delta_x)(y) g(y)
    let v: f64 = (0..f.len()).map(|y| system.mass[y] * s[y] * (f[x] - f[y]).abs()).sum();
    Ok(system.mass[x] * v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledExcess {
    pub estimate: f64,
    pub standard_error: f64,
    pub sources: usize,
}

/// Monte-Carlo `E_h(f)` from `sources` mu-distributed source DOFs.
pub fn heat_excess_sampled(
    system: &DirichletSystem,
    f: &[f64],
    h: f64,
    substeps: usize,
    sources: usize,
    seed: u64,
) -> Result<SampledExcess> {
    check_time(h)?;
    if f.len() != system.dof_count() || sources < 2 {
        return Err(Error::input("sampled excess needs one value per DOF and two sources"));
    }
    let total = system.measure();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(sources);
    for _ in 0..sources {
        let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * total;
        let mut acc = 0.0;
        let x = system
            .mass
            .iter()
            .position(|&m| {
                acc += m;
                u < acc
            })
            .unwrap_or(f.len() - 1);
        values.push(total * source_term(system, f, x, h, substeps.max(MIN_SUBSTEPS))? / system.mass[x]);
    }
    let n = sources as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SampledExcess { estimate: mean, standard_error: (var / n).sqrt(), sources })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterReport {
    pub value: f64,
    pub per_piece: Vec<f64>,
    /// DOFs of the set that belong to no cell of its cell union and were
    /// dropped by snapping.
    pub snapped: usize,
}

/// Weighted `(n-1)`-measure of the interface between the cells whose
/// vertices all lie in `set` and the remaining cells.
pub fn discrete_perimeter(wc: &WeightedComplex, set: &[bool]) -> Result<PerimeterReport> {
    let complex = &wc.complex;
    if set.len() != complex.dof_count() {
        return Err(Error::input("set needs one flag per DOF"));
    }
    let mut covered = vec![false; set.len()];
    let mut per_piece = Vec::with_capacity(complex.pieces.len());
    for (p, piece) in complex.pieces.iter().enumerate() {
        let map = &complex.global_dof[p];
        let inside: Vec<bool> = (0..piece.n_cells()).map(|c| piece.cell(c).iter().all(|&v| set[map[v]])).collect();
        for c in (0..piece.n_cells()).filter(|&c| inside[c]) {
            piece.cell(c).iter().for_each(|&v| covered[map[v]] = true);
        }
        let mut total = 0.0;
        for (facet, owners) in piece.facets() {
            if owners.len() == 2 && inside[owners[0]] != inside[owners[1]] {
                total += facet_measure(&wc.weights[p], piece, &facet);
            }
        }
        per_piece.push(total);
    }
    let snapped = (0..set.len()).filter(|&x| set[x] && !covered[x]).count();
    Ok(PerimeterReport { value: per_piece.iter().sum(), per_piece, snapped })
}

fn facet_measure(weight: &ResolvedWeight, piece: &PieceMesh, facet: &[usize]) -> f64 {
    match facet.len() {
        1 => weight.value_at_vertex(piece, facet[0]),
        2 => {
            let (a, b) = (piece.vertices[facet[0]], piece.vertices[facet[1]]);
            let len = dist3(a, b);
            let mean = match weight {
                ResolvedWeight::Constant(c) => *c,
                ResolvedWeight::Tabulated(t) => 0.5 * (t[facet[0]] + t[facet[1]]),
                ResolvedWeight::Power { anchor, alpha, .. } => {
                    let (gx, gw) = gauss_legendre(8);
                    gx.iter()
                        .zip(&gw)
                        .map(|(&s, &w)| {
                            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])];
                            w * anchor.distance(x).powf(-alpha)
                        })
                        .sum()
                }
            };
            len * mean
        }
        _ => {
            let pts: Vec<_> = facet.iter().map(|&v| piece.vertices[v]).collect();
            let area = simplex_geometry(&pts).map_or(0.0, |g| g.volume);
            let mean = facet.iter().map(|&v| weight.value_at_vertex(piece, v)).sum::<f64>() / facet.len() as f64;
            area * mean
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessSample {
    pub h: f64,
    pub symmetric: f64,
    pub one_sided: f64,
    /// `E_h / sqrt(h)` in the probe convention.
    pub ratio: f64,
    /// `ratio / normalization`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcessCurve {
    /// Descending in `h`.
    pub samples: Vec<ExcessSample>,
    /// Intercept `a` of `E_h / sqrt(h) = a + b sqrt(h)`.
    pub extrapolated_limit: f64,
    pub slope: f64,
    /// Root mean square residual of the fit.
    pub fit_residual: f64,
    pub reference_perimeter: f64,
    pub normalization: f64,
    pub convention: ExcessConvention,
    /// `|a / normalization - P| / P`, `None` for a zero perimeter.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub substeps: usize,
    /// Smallest admissible `sqrt(h_min) / mesh scale`.
    pub min_resolution: f64,
    pub convention: ExcessConvention,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { substeps: 32, min_resolution: 5.0, convention: ExcessConvention::Symmetric }
    }
}

/// Median edge length over all pieces.
pub fn mesh_scale(wc: &WeightedComplex) -> f64 {
    let mut lens: Vec<f64> = wc
        .complex
        .pieces
        .iter()
        .flat_map(|p| p.edges().into_iter().map(move |(a, b)| dist3(p.vertices[a], p.vertices[b])))
        .collect();
    if lens.is_empty() {
        return 0.0;
    }
    lens.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    lens[lens.len() / 2]
}

/// Checks the schedule: four times over two decades, resolved by the mesh.
pub fn check_schedule(h_schedule: &[f64], scale: f64, min_resolution: f64) -> Result<()> {
    if h_schedule.len() < 4 || h_schedule.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::invalid("excess probe needs at least four positive times"));
    }
    let lo = h_schedule.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = h_schedule.iter().cloned().fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("times span {:.3} decades, need two", (hi / lo).log10())));
    }
    let ratio = lo.sqrt() / scale;
    if ratio < min_resolution {
        return Err(Error::Resolution(format!("sqrt(h_min) / mesh scale = {ratio:.3} is below {min_resolution}")));
    }
    Ok(())
}

/// Least squares `y = a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let rms = (x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// `E_h(chi_U) / sqrt(h)` over `h_schedule`, extrapolated to `h = 0` and
/// compared with the discrete perimeter of `U`. Pointwise limits along a
/// fixed set only; no liminf or recovery sequence is checked.
pub fn gamma_probe(
    wc: &WeightedComplex,
    system: &DirichletSystem,
    set: &[bool],
    h_schedule: &[f64],
    opts: ProbeOptions,
) -> Result<ExcessCurve> {
    check_schedule(h_schedule, mesh_scale(wc), opts.min_resolution)?;
    let f: Vec<f64> = set.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut hs = h_schedule.to_vec();
    hs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let normalization = match opts.convention {
        ExcessConvention::Symmetric => flat_normalization(),
        ExcessConvention::OneSided => 0.5 * flat_normalization(),
    };
    let samples = hs
        .iter()
        .map(|&h| {
            let e = heat_excess(system, &f, h, opts.substeps)?;
            let ratio = e.get(opts.convention) / h.sqrt();
            Ok(ExcessSample {
                h,
                symmetric: e.symmetric,
                one_sided: e.get(ExcessConvention::OneSided),
                ratio,
                normalized: ratio / normalization,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = samples.iter().map(|s| s.h.sqrt()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    let (a, b, rms) = linear_fit(&x, &y);
    let perimeter = discrete_perimeter(wc, set)?.value;
    let deviation = if perimeter > 0.0 { Some((a / normalization - perimeter).abs() / perimeter) } else { None };
    Ok(ExcessCurve {
        samples,
        extrapolated_limit: a,
        slope: b,
        fit_residual: rms,
        reference_perimeter: perimeter,
        normalization,
        convention: opts.convention,
        deviation,
    })
}

/// Text recorded with every curve.
pub fn convention_note(convention: ExcessConvention) -> String {
    format!(
        "{} heat excess, generator Delta, implicit Euler with at least {MIN_SUBSTEPS} substeps; \
         normalised by 2/sqrt(pi) per unit perimeter (symmetric) or 1/sqrt(pi) (one-sided); \
         pointwise h -> 0 extrapolation only, not a Gamma-limit",
        convention.name()
    )
}
