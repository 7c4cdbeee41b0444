//! Low spectrum of the pencil `K phi = lambda M phi`, kernel dimension,
//! spectral gap, ergodicity verdicts over refinement ladders, decay-rate
//! fits and support spreading of the heat flow.
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::symmetric_eigen;
use crate::dirichlet::{uniform_schedule, DirichletSystem};
use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, pcg, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Number of eigenpairs.
    pub count: usize,
    /// Kernel threshold; defaults to [`kernel_tolerance`].
    pub tol: Option<f64>,
    /// Shift `sigma` of `(K + sigma M)^{-1} M`; defaults to the smallest
    /// Rayleigh quotient of the coordinate functions.
    pub shift: Option<f64>,
    /// Block width of the Krylov iteration; eigenvalues of higher
    /// multiplicity are not resolved.
    pub block: usize,
    pub max_basis: usize,
    /// Problems up to this size are solved densely.
    pub dense_limit: usize,
}

impl EigenOptions {
    pub fn new(count: usize) -> Self {
        EigenOptions { count, tol: None, shift: None, block: 6, max_basis: 240, dense_limit: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    Dense,
    BlockKrylov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal.
    pub eigenvectors: Vec<Vec<f64>>,
    pub kernel_dim: usize,
    /// Smallest computed eigenvalue at or above `tol`.
    pub gap: Option<f64>,
    pub tol: f64,
    /// `|| K phi - lambda M phi ||` per pair.
    pub residuals: Vec<f64>,
    pub method: EigenMethod,
    /// Linear solves spent (zero for the dense path).
    pub solves: usize,
}

/// `1e-9 * max_i K_ii / M_ii`
pub fn kernel_tolerance(system: &DirichletSystem) -> f64 {
    let d = system.stiffness.diagonal();
    1e-9 * d.iter().zip(&system.mass).map(|(k, m)| k / m).fold(0.0, f64::max)
}

/// Lowest `opts.count` eigenpairs of `K phi = lambda M phi`.
pub fn eigen(system: &DirichletSystem, opts: EigenOptions) -> Result<SpectralReport> {
    let n = system.dof_count();
    if opts.count == 0 || opts.count >= n {
        return Err(Error::invalid(format!("eigenpair count {} must lie in 1..{n}", opts.count)));
    }
    let tol = opts.tol.unwrap_or_else(|| kernel_tolerance(system));
    let (values, vectors, method, solves) = if n <= opts.dense_limit {
        let (v, w) = dense_pairs(system, opts.count);
        (v, w, EigenMethod::Dense, 0)
    } else {
        let (v, w, s) = block_krylov(system, opts, tol)?;
        (v, w, EigenMethod::BlockKrylov, s)
    };
    let residuals: Vec<f64> = values.iter().zip(&vectors).map(|(&l, v)| pair_residual(system, l, v).0).collect();
    let kernel_dim = values.iter().filter(|&&l| l < tol).count();
    let gap = values.iter().copied().find(|&l| l >= tol);
    Ok(SpectralReport { eigenvalues: values, eigenvectors: vectors, kernel_dim, gap, tol, residuals, method, solves })
}

/// `(|| K phi - lambda M phi ||, || K phi ||, || M phi ||)`
fn pair_residual(system: &DirichletSystem, lambda: f64, phi: &[f64]) -> (f64, f64, f64) {
    let k = system.stiffness.mul_vec(phi);
    let m: Vec<f64> = phi.iter().zip(&system.mass).map(|(p, m)| p * m).collect();
    let r: Vec<f64> = k.iter().zip(&m).map(|(a, b)| a - lambda * b).collect();
    (norm2(&r), norm2(&k), norm2(&m))
}

fn dense_pairs(system: &DirichletSystem, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = system.dof_count();
    let s: Vec<f64> = system.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = vec![vec![0.0; n]; n];
    for (i, j, v) in system.stiffness.triplets() {
        a[i][j] = v * s[i] * s[j];
    }
    let eig = symmetric_eigen(&a);
    let values = eig.values[..count].to_vec();
    let vectors = eig.vectors[..count].iter().map(|y| y.iter().zip(&s).map(|(y, s)| y * s).collect()).collect();
    (values, vectors)
}

/// Smallest Rayleigh quotient of the nonconstant coordinate functions,
/// which is of the order of the first nonzero eigenvalue.
fn default_shift(system: &DirichletSystem) -> f64 {
    let mut best = f64::INFINITY;
    for c in 0..3 {
        let x: Vec<f64> = system.positions.iter().map(|p| p[c]).collect();
        let d = system.deviation(&x);
        if d > 1e-12 * system.norm_mu(&x).max(1.0) {
            best = best.min(system.energy(&x) / (d * d));
        }
    }
    if best.is_finite() && best > 0.0 {
        best
    } else {
        1.0
    }
}

struct Basis {
    vectors: Vec<Vec<f64>>,
    kv: Vec<Vec<f64>>,
    /// `h[i][j] = v_i . K v_j`
    h: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Basis { vectors: Vec::new(), kv: Vec::new(), h: Vec::new() }
    }

    /// M-orthonormalises `w` against the basis (two passes) and appends it
    /// unless it is numerically dependent.
    fn push(&mut self, system: &DirichletSystem, mut w: Vec<f64>) -> bool {
        let norm0 = system.norm_mu(&w);
        if !(norm0 > 0.0) || !norm0.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for v in &self.vectors {
                let c = system.inner_mu(v, &w);
                for (x, y) in w.iter_mut().zip(v) {
                    *x -= c * y;
                }
            }
        }
        let norm = system.norm_mu(&w);
        if norm < 1e-8 * norm0 {
            return false;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let kw = system.stiffness.mul_vec(&w);
        let m = self.vectors.len();
        let col: Vec<f64> = self.vectors.iter().map(|v| dot(v, &kw)).collect();
        for (i, row) in self.h.iter_mut().enumerate() {
            row.push(col[i]);
        }
        let mut last = col;
        last.push(dot(&w, &kw));
        self.h.push(last);
        debug_assert_eq!(self.h.len(), m + 1);
        self.vectors.push(w);
        self.kv.push(kw);
        true
    }

    /// Ritz pairs `(theta, coefficient vector)`, ascending.
    fn ritz(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.h.len();
        let sym: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|j| 0.5 * (self.h[i][j] + self.h[j][i])).collect()).collect();
        let e = symmetric_eigen(&sym);
        (e.values, e.vectors)
    }

    fn combine(&self, coeff: &[f64], of_k: bool) -> Vec<f64> {
        let src = if of_k { &self.kv } else { &self.vectors };
        let mut out = vec![0.0; src[0].len()];
        for (c, v) in coeff.iter().zip(src) {
            if *c != 0.0 {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += c * x;
                }
            }
        }
        out
    }
}

/// Block Krylov iteration on `(K + sigma M)^{-1} M` with Rayleigh-Ritz on
/// the pencil and thick restarts.
fn block_krylov(system: &DirichletSystem, opts: EigenOptions, tol: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let n = system.dof_count();
    let k = opts.count;
    let b = opts.block.max(1);
    let sigma = opts.shift.unwrap_or_else(|| default_shift(system));
    if !(sigma > 0.0) {
        return Err(Error::invalid("eigen shift must be positive"));
    }
    let shifted =
        system.stiffness.scaled_plus_diagonal(1.0, &system.mass.iter().map(|m| sigma * m).collect::<Vec<_>>());
    let max_basis = opts.max_basis.max(k + 2 * b).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut basis = Basis::new();
    basis.push(system, vec![1.0; n]);
    let mut block: Vec<Vec<f64>> = vec![basis.vectors[0].clone()];
    while block.len() < b {
        let r: Vec<f64> = (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect();
        if basis.push(system, r) {
            block.push(basis.vectors.last().unwrap().clone());
        }
    }
    let mut solves = 0;
    let mut worst = f64::INFINITY;
    for _restart in 0..20 {
        loop {
            let mut next = Vec::new();
            for v in &block {
                let rhs: Vec<f64> = v.iter().zip(&system.mass).map(|(x, m)| x * m).collect();
                let mut w = vec![0.0; n];
                solve(&shifted, &rhs, &mut w, system)?;
                solves += 1;
                if basis.push(system, w) {
                    next.push(basis.vectors.last().unwrap().clone());
                }
            }
            let exhausted = next.is_empty();
            if basis.vectors.len() >= k {
                let (theta, coeff) = basis.ritz();
                let mut done = true;
                worst = 0.0;
                for j in 0..k {
                    let phi = basis.combine(&coeff[j], false);
                    let kphi = basis.combine(&coeff[j], true);
                    let mphi: Vec<f64> = phi.iter().zip(&system.mass).map(|(p, m)| p * m).collect();
                    let r: Vec<f64> = kphi.iter().zip(&mphi).map(|(a, c)| a - theta[j] * c).collect();
                    let bound = 1e-9 * norm2(&kphi) + 1e-2 * tol * norm2(&mphi);
                    let res = norm2(&r);
                    worst = worst.max(res / bound.max(f64::MIN_POSITIVE));
                    if res > bound {
                        done = false;
                    }
                }
                if done || exhausted {
                    let values = theta[..k].to_vec();
                    let vectors = (0..k).map(|j| basis.combine(&coeff[j], false)).collect();
                    return Ok((values, vectors, solves));
                }
            }
            if exhausted {
                break;
            }
            if basis.vectors.len() + b > max_basis {
                break;
            }
            block = next;
        }
        // thick restart from the lowest Ritz vectors
        let (_, coeff) = basis.ritz();
        let keep = (k + b).min(coeff.len());
        let kept: Vec<Vec<f64>> = (0..keep).map(|j| basis.combine(&coeff[j], false)).collect();
        basis = Basis::new();
        block.clear();
        for v in kept {
            if basis.push(system, v) {
                block.push(basis.vectors.last().unwrap().clone());
            }
        }
        block = block.split_off(block.len().saturating_sub(b));
    }
    Err(Error::Numeric { what: format!("eigen iteration did not converge for {k} pairs"), residual: worst })
}

fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], system: &DirichletSystem) -> Result<()> {
    pcg(a, b, x, system.solver).map(|_| ())
}

/// Kernel dimension, computed with enough pairs to see the first
/// eigenvalue above the threshold.
pub fn kernel_dimension(system: &DirichletSystem) -> Result<SpectralReport> {
    let n = system.dof_count();
    let mut count = 4.min(n - 1).max(1);
    loop {
        let rep = eigen(system, EigenOptions::new(count))?;
        if rep.kernel_dim < count || count == n - 1 {
            return Ok(rep);
        }
        count = (2 * count).min(n - 1);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityThresholds {
    /// `last / first` above this is ergodic.
    pub ergodic_ratio: f64,
    /// Monotone decay with `last / first` below this is degenerate.
    pub degenerate_ratio: f64,
}

impl Default for ErgodicityThresholds {
    fn default() -> Self {
        ErgodicityThresholds { ergodic_ratio: 0.5, degenerate_ratio: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgodicityClass {
    Ergodic,
    Degenerate,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub level: usize,
    pub dofs: usize,
    /// Second smallest eigenvalue; zero up to `tol` when the kernel is
    /// degenerate.
    pub lambda1: f64,
    pub kernel_dim: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityVerdict {
    pub class: ErgodicityClass,
    /// `lambda1(last) / lambda1(first)`
    pub ratio: f64,
    pub monotone_decay: bool,
    pub gaps: Vec<GapPoint>,
    pub thresholds: ErgodicityThresholds,
}

/// Gap data of one assembled level.
pub fn gap_point(level: usize, system: &DirichletSystem) -> Result<GapPoint> {
    let rep = eigen(system, EigenOptions::new(3.min(system.dof_count() - 1)))?;
    let lambda1 = rep.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY).max(0.0);
    Ok(GapPoint { level, dofs: system.dof_count(), lambda1, kernel_dim: rep.kernel_dim, tol: rep.tol })
}

/// Classifies a gap-vs-refinement curve. Fewer than three levels are
/// always inconclusive.
pub fn ergodicity_verdict(gaps: Vec<GapPoint>, thresholds: ErgodicityThresholds) -> ErgodicityVerdict {
    if gaps.len() < 3 {
        return ErgodicityVerdict {
            class: ErgodicityClass::Inconclusive,
            ratio: f64::NAN,
            monotone_decay: false,
            gaps,
            thresholds,
        };
    }
    let first = gaps[0].lambda1;
    let last = gaps[gaps.len() - 1].lambda1;
    let ratio = if first > 0.0 { last / first } else { f64::NAN };
    let monotone_decay = gaps.windows(2).all(|w| w[1].lambda1 < w[0].lambda1);
    let connected = gaps.iter().all(|g| g.kernel_dim == 1);
    let class = if connected && ratio > thresholds.ergodic_ratio {
        ErgodicityClass::Ergodic
    } else if monotone_decay && ratio < thresholds.degenerate_ratio {
        ErgodicityClass::Degenerate
    } else {
        ErgodicityClass::Inconclusive
    };
    ErgodicityVerdict { class, ratio, monotone_decay, gaps, thresholds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    /// `(t, || u(t) - mean ||_mu)` samples.
    pub curve: Vec<(f64, f64)>,
    /// Time window `[t0, t1]` of the fit.
    pub window: (f64, f64),
    /// Set when the deviation underflowed before the horizon.
    pub early_stop: bool,
}

/// Relative deviation below which the decay curve is cut off.
const DECAY_FLOOR: f64 = 1e-12;

/// Least-squares slope of `-log || u(t) - mean ||_mu` over the second half
/// of the available window, with implicit Euler steps of length `tau`.
pub fn decay_fit(system: &DirichletSystem, f0: &[f64], horizon: f64, tau: f64) -> Result<DecayFit> {
    let d0 = system.deviation(f0);
    let scale = system.norm_mu(f0);
    if !(d0 > 1e-12 * scale) {
        return Err(Error::invalid("initial datum is constant"));
    }
    if !(horizon > 0.0 && tau > 0.0) {
        return Err(Error::invalid("horizon and time step must be positive"));
    }
    let steps = (horizon / tau).round().max(1.0) as usize;
    let prop = system.propagator(horizon / steps as f64)?;
    let mut u = f0.to_vec();
    let mut curve = vec![(0.0, d0)];
    let mut early_stop = false;
    for s in 1..=steps {
        let next = prop.apply(&u)?;
        u = next;
        let d = system.deviation(&u);
        if !(d > DECAY_FLOOR * d0) {
            early_stop = true;
            break;
        }
        curve.push((s as f64 * prop.tau, d));
    }
    let tail = &curve[curve.len() / 2..];
    if tail.len() < 2 {
        return Err(Error::Numeric { what: "decay curve too short to fit".into(), residual: d0 });
    }
    let n = tail.len() as f64;
    let mt = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = tail.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(DecayFit { rate: -sxy / sxx, window: (tail[0].0, tail[tail.len() - 1].0), curve, early_stop })
}

/// Relative positivity floor for supports.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// DOFs where `S_t chi_E` exceeds `SUPPORT_FLOOR * max`, after `steps`
/// implicit Euler steps.
pub fn support_spread(system: &DirichletSystem, set: &[usize], t: f64, steps: usize) -> Result<Vec<usize>> {
    let n = system.dof_count();
    if set.is_empty() {
        return Err(Error::invalid("support spread needs a nonempty set"));
    }
    if let Some(x) = set.iter().find(|&&x| x >= n) {
        return Err(Error::input(format!("DOF {x} out of range")));
    }
    let mut u = vec![0.0; n];
    for &x in set {
        u[x] = 1.0;
    }
    if t > 0.0 {
        let traj = system.evolve(&u, t, &uniform_schedule(t, steps.max(1)), false)?;
        u = traj.last().values.clone();
    }
    let max = u.iter().cloned().fold(0.0, f64::max);
    Ok((0..n).filter(|&x| u[x] > SUPPORT_FLOOR * max).collect())
}

#[cfg(test)]
mod tests;
