//! Relative capacities of condensers `(K, Omega)` by the harmonic
//! equilibrium potential, and the tube-integral lower and dyadic-chain
//! upper bounds for the capacity of an intersection.
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use crate::dirichlet::DirichletSystem;
use crate::error::{Error, Result};
use crate::geometry::GluedComplex;
use crate::measure::{gauss_legendre, ResolvedWeight, WeightedComplex};
use crate::space::SpaceSpec;
use crate::sparse::{pcg, CsrMatrix, SolverOptions};

/// DOFs at glued distance at most `r` from intersection `id`.
pub fn tube(complex: &GluedComplex, id: usize, r: f64) -> Result<Vec<usize>> {
    if !(r > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    let map = complex.intersection(id)?;
    let d = complex.distances_from_set(&map.dofs);
    Ok((0..d.len()).filter(|&x| d[x] <= r).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub value: f64,
    pub potential: Vec<f64>,
    pub k_set: Vec<usize>,
    pub omega: Vec<usize>,
    /// Relative residual of the free-DOF solve.
    pub residual: f64,
    pub iterations: usize,
    /// `max |(K u)_x|` over free DOFs, relative to the largest diagonal.
    pub harmonic_defect: f64,
}

impl CapacityResult {
    /// Post-hoc obstacle certificate `0 <= u <= 1`.
    pub fn certified(&self) -> bool {
        let eps = 1e-9;
        self.potential.iter().all(|&u| u >= -eps && u <= 1.0 + eps)
    }
}

/// Discrete `Cap_2(K, Omega)` of `system`.
pub fn relative_capacity(system: &DirichletSystem, k_set: &[usize], omega: &[usize]) -> Result<CapacityResult> {
    condenser_capacity(&system.stiffness, k_set, omega, system.solver)
}

/// Minimises `u . A u` with `u = 1` on `k_set` and `u = 0` off `omega`.
///
/// Free DOFs whose stiffness component touches neither constraint carry
/// no energy and are set to 0.
pub fn condenser_capacity(
    stiffness: &CsrMatrix,
    k_set: &[usize],
    omega: &[usize],
    solver: SolverOptions,
) -> Result<CapacityResult> {
    let n = stiffness.dim();
    if k_set.is_empty() {
        return Err(Error::input("condenser has an empty compact set"));
    }
    if let Some(&x) = k_set.iter().chain(omega).find(|&&x| x >= n) {
        return Err(Error::input(format!("DOF {x} out of range 0..{n}")));
    }
    const FREE: u8 = 0;
    const ONE: u8 = 1;
    const ZERO: u8 = 2;
    let mut state = vec![ZERO; n];
    for &x in omega {
        state[x] = FREE;
    }
    for &x in k_set {
        if state[x] == ZERO {
            return Err(Error::input(format!("compact set DOF {x} lies outside Omega")));
        }
        state[x] = ONE;
    }
    // free components without contact to a constraint
    let mut anchored = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&x| state[x] != FREE).collect();
    for &x in &stack {
        anchored[x] = true;
    }
    while let Some(x) = stack.pop() {
        for (y, v) in stiffness.row(x) {
            if v != 0.0 && !anchored[y] {
                anchored[y] = true;
                stack.push(y);
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|&x| state[x] == FREE && anchored[x]).collect();
    let mut u: Vec<f64> = state.iter().map(|&s| if s == ONE { 1.0 } else { 0.0 }).collect();
    let (mut residual, mut iterations) = (0.0, 0);
    if !free.is_empty() {
        let a = stiffness.principal_submatrix(&free);
        let b: Vec<f64> = free
            .iter()
            .map(|&x| -stiffness.row(x).filter(|&(y, _)| state[y] == ONE).map(|(_, v)| v).sum::<f64>())
            .collect();
        let mut uf = vec![0.5; free.len()];
        let stats = pcg(&a, &b, &mut uf, solver)?;
        residual = stats.relative_residual;
        iterations = stats.iterations;
        for (&x, &v) in free.iter().zip(&uf) {
            u[x] = v;
        }
    }
    let ku = stiffness.mul_vec(&u);
    let scale = stiffness.diagonal().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let harmonic_defect = free.iter().map(|&x| ku[x].abs()).fold(0.0, f64::max) / scale;
    let value = u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    let mut k_sorted = k_set.to_vec();
    k_sorted.sort_unstable();
    k_sorted.dedup();
    let mut o_sorted = omega.to_vec();
    o_sorted.sort_unstable();
    o_sorted.dedup();
    Ok(CapacityResult { value, potential: u, k_set: k_sorted, omega: o_sorted, residual, iterations, harmonic_defect })
}

/// `rho -> mu_i(L_rho)` for one piece.
#[derive(Debug, Clone, PartialEq)]
pub enum TubeModel {
    /// `mu(L_rho) = scale * rho^(codim - alpha) / (codim - alpha)`, the
    /// tube measure of `dist(x, L)^(-alpha)` in codimension `codim`.
    Power { codim: usize, alpha: f64, scale: f64 },
    /// Measured `(rho, mu)` pairs, ascending in `rho`; interpolated in
    /// log-log and extended by the end slopes.
    Sampled(Vec<(f64, f64)>),
}

impl TubeModel {
    /// Power model normalised so that the constant weight on the unit
    /// tube has measure 1 per unit of `scale`.
    pub fn power(codim: usize, alpha: f64, scale: f64) -> Result<Self> {
        if codim == 0 || !(alpha < codim as f64) || !(scale > 0.0) {
            return Err(Error::invalid(format!("tube measure diverges for codimension {codim}, exponent {alpha}")));
        }
        Ok(TubeModel::Power { codim, alpha, scale })
    }

    pub fn sampled(mut rows: Vec<(f64, f64)>) -> Result<Self> {
        rows.retain(|&(r, m)| r > 0.0 && m > 0.0 && m.is_finite());
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        rows.dedup_by(|a, b| a.0 == b.0);
        if rows.len() < 2 {
            return Err(Error::input("sampled tube model needs two positive samples"));
        }
        Ok(TubeModel::Sampled(rows))
    }

    pub fn measure(&self, rho: f64) -> f64 {
        match self {
            TubeModel::Power { codim, alpha, scale } => {
                let e = *codim as f64 - alpha;
                scale * rho.powf(e) / e
            }
            TubeModel::Sampled(rows) => {
                let n = rows.len();
                let seg = if rho <= rows[0].0 {
                    0
                } else if rho >= rows[n - 1].0 {
                    n - 2
                } else {
                    rows.windows(2).position(|w| rho <= w[1].0).unwrap_or(n - 2)
                };
                let (a, b) = (rows[seg], rows[seg + 1]);
                let slope = (b.1 / a.1).ln() / (b.0 / a.0).ln();
                a.1 * (rho / a.0).powf(slope)
            }
        }
    }

    /// `N(rho) = mu(L_{3 rho / 2}) / mu(L_{rho / 2})`.
    pub fn doubling(&self, rho: f64) -> f64 {
        self.measure(1.5 * rho) / self.measure(0.5 * rho)
    }
}

/// Tube model of piece `piece` around intersection `id`. A power weight
/// anchored on that intersection gives the closed form, normalised to the
/// mesh measure at `radius`; any other weight is sampled at `samples`
/// geometrically spaced radii from twice the coarsest cell size up to
/// `1.5 radius`.
pub fn tube_model(wc: &WeightedComplex, id: usize, piece: usize, radius: f64, samples: usize) -> Result<TubeModel> {
    let complex = &wc.complex;
    let map = complex.intersection(id)?;
    if piece != map.piece_a && piece != map.piece_b {
        return Err(Error::input(format!("piece {piece} does not contain intersection {id}")));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    let d = complex.distances_from_set(&map.dofs);
    let mu = |r: f64| wc.sublevel_mass_by_piece(&d, r)[piece];
    let p = &complex.pieces[piece];
    let codim = p.dim.saturating_sub(map.k);
    if let ResolvedWeight::Power { vertices, alpha, .. } = &wc.weights[piece] {
        let mut anchor = vertices.clone();
        anchor.sort_unstable();
        let mut local = map.local_vertices(piece);
        local.sort_unstable();
        if anchor == local {
            let e = codim as f64 - alpha;
            return TubeModel::power(codim, *alpha, mu(radius) * e / radius.powf(e));
        }
    }
    let lo = (2.0 * p.max_cell_diameter()).min(0.5 * radius);
    let hi = 1.5 * radius;
    let samples = samples.max(2);
    let rows = (0..samples)
        .map(|i| {
            let r = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
            (r, mu(r))
        })
        .collect();
    TubeModel::sampled(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// Dyadic shells `[R 2^{-j-1}, R 2^{-j}]` integrated explicitly.
    pub levels: usize,
    /// Gauss nodes per shell in `log rho`.
    pub nodes: usize,
    /// Constant `c` in front of the tube integral.
    pub c: f64,
    /// Shell-to-shell decay above this ratio means the integral diverges.
    pub divergence_ratio: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { levels: 60, nodes: 8, c: 1.0, divergence_ratio: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVerdict {
    Finite,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrandRow {
    pub rho: f64,
    pub n: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundEvaluation {
    /// `(N(R) R^2 / mu(L_R) + c int_0^R N rho / mu(L_rho))^{-1}`, zero
    /// when the integral diverges.
    pub lower: f64,
    /// `(sum_j rho_j^2 / (4 mu(L_{rho_j} \ L_{rho_j / 2})))^{-1}` over the
    /// dyadic chain of linear competitors, zero when the sum diverges.
    pub upper: f64,
    pub boundary_term: f64,
    /// Tube integral including the geometric tail; infinite if divergent.
    pub integral: f64,
    pub chain_sum: f64,
    /// Mean shell-to-shell ratio over the finest shells.
    pub decay_ratio: f64,
    pub verdict: BoundVerdict,
    /// One row per shell end `rho_j = R 2^{-j}`.
    pub integrand_table: Vec<IntegrandRow>,
    pub c: f64,
}

/// Evaluates both capacity bounds for `L` inside a tube of radius `radius`.
pub fn capacity_bounds(model: &TubeModel, radius: f64, opts: BoundOptions) -> Result<BoundEvaluation> {
    if !(radius > 0.0) || opts.levels < 4 || opts.nodes == 0 {
        return Err(Error::invalid("capacity bounds need a positive radius, 4 shells and 1 node"));
    }
    let (gx, gw) = gauss_legendre(opts.nodes);
    let integrand = |rho: f64| model.doubling(rho) * rho / model.measure(rho);
    let mut shells = Vec::with_capacity(opts.levels);
    let mut chain = Vec::with_capacity(opts.levels);
    let mut table = Vec::with_capacity(opts.levels + 1);
    for j in 0..opts.levels {
        let hi = radius * 0.5.powi(j as i32);
        let (a, b) = ((0.5 * hi).ln(), hi.ln());
        let s: f64 = gx
            .iter()
            .zip(&gw)
            .map(|(&x, &w)| {
                let rho = (a + (b - a) * x).exp();
                w * (b - a) * integrand(rho) * rho
            })
            .sum();
        shells.push(s);
        chain.push(hi * hi / (4.0 * (model.measure(hi) - model.measure(0.5 * hi))));
        table.push(IntegrandRow { rho: hi, n: model.doubling(hi), mu: model.measure(hi) });
    }
    let tail = 5.min(opts.levels - 1);
    let ratios: Vec<f64> = shells[opts.levels - tail - 1..].windows(2).map(|w| w[1] / w[0]).collect();
    let decay_ratio = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
    let decay_ratio = decay_ratio.exp();
    let verdict = if decay_ratio.is_finite() && decay_ratio < opts.divergence_ratio {
        BoundVerdict::Finite
    } else {
        BoundVerdict::Divergent
    };
    let boundary_term = model.doubling(radius) * radius * radius / model.measure(radius);
    let with_tail = |v: &[f64]| {
        let last = v[v.len() - 1];
        let q = last / v[v.len() - 2];
        v.iter().sum::<f64>() + if q < 1.0 { last * q / (1.0 - q) } else { f64::INFINITY }
    };
    let (integral, chain_sum) = match verdict {
        BoundVerdict::Finite => (with_tail(&shells), with_tail(&chain)),
        BoundVerdict::Divergent => (f64::INFINITY, f64::INFINITY),
    };
    let lower = 1.0 / (boundary_term + opts.c * integral);
    let upper = 1.0 / chain_sum;
    Ok(BoundEvaluation {
        lower,
        upper,
        boundary_term,
        integral,
        chain_sum,
        decay_ratio,
        verdict,
        integrand_table: table,
        c: opts.c,
    })
}

/// Capacity of an intersection inside its tube, computed piece by piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceCapacity {
    pub piece: usize,
    pub value: f64,
    pub certified: bool,
}

/// `Cap_{2, mu_i}(L, L_R cap M_i)` for both pieces glued along `id`, with
/// the potential vanishing at glued distance `R` and beyond.
pub fn capacity_equivalence_check(
    complex: &GluedComplex,
    system: &DirichletSystem,
    id: usize,
    radius: f64,
) -> Result<Vec<PieceCapacity>> {
    let map = complex.intersection(id)?;
    if !(radius > 0.0) {
        return Err(Error::invalid("tube radius must be positive"));
    }
    let d = complex.distances_from_set(&map.dofs);
    let near: Vec<usize> = (0..d.len()).filter(|&x| d[x] < radius * (1.0 - 1e-12)).collect();
    [map.piece_a, map.piece_b]
        .iter()
        .map(|&p| {
            let mut owned = vec![false; complex.dof_count()];
            complex.piece_dofs(p).iter().for_each(|&x| owned[x] = true);
            let omega: Vec<usize> = near.iter().copied().filter(|&x| owned[x]).collect();
            let k = condenser_capacity(&system.piece_stiffness(p), &map.dofs, &omega, system.solver)?;
            Ok(PieceCapacity { piece: p, value: k.value, certified: k.certified() })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceLadder {
    pub levels: Vec<usize>,
    pub pieces: [usize; 2],
    /// `values[l][s]`: capacity on side `s` at level `levels[l]`.
    pub values: Vec<[f64; 2]>,
    /// Side stays bounded away from zero: last / first above `ratio`.
    pub stable: [bool; 2],
    pub ratio: f64,
    /// Exactly one side degenerates.
    pub mismatch: bool,
}

/// Runs [`capacity_equivalence_check`] along a refinement ladder.
pub fn capacity_equivalence_ladder(
    spec: &SpaceSpec,
    id: usize,
    radius: f64,
    levels: &[usize],
    ratio: f64,
) -> Result<EquivalenceLadder> {
    if levels.len() < 2 {
        return Err(Error::invalid("capacity ladder needs two levels"));
    }
    let mut values = Vec::with_capacity(levels.len());
    let mut pieces = [0; 2];
    for &level in levels {
        let wc = spec.instantiate(level)?;
        let system = crate::dirichlet::assemble(&wc)?;
        let caps = capacity_equivalence_check(&wc.complex, &system, id, radius)?;
        pieces = [caps[0].piece, caps[1].piece];
        values.push([caps[0].value, caps[1].value]);
    }
    Ok(classify_equivalence(levels.to_vec(), pieces, values, ratio))
}

/// Stability of both sides of a capacity ladder, `values` in level order.
pub fn classify_equivalence(
    levels: Vec<usize>,
    pieces: [usize; 2],
    values: Vec<[f64; 2]>,
    ratio: f64,
) -> EquivalenceLadder {
    let stable = match (values.first(), values.last()) {
        (Some(first), Some(last)) => [0, 1].map(|s| first[s] > 0.0 && last[s] / first[s] > ratio),
        _ => [false; 2],
    };
    EquivalenceLadder { levels, pieces, values, stable, ratio, mismatch: stable[0] != stable[1] }
}
