//! The reversible jump chain of `M^{-1} K`: exact continuous-time path
//! sampling, crossing statistics through intersections and occupation
//! diagnostics.
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dirichlet::DirichletSystem;
use crate::error::{Error, Result};

/// Continuous-time Markov chain with rates `q_xy = -K_xy / M_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChain {
    /// Outgoing `(y, q_xy)` per state, positive rates only.
    pub rates: Vec<Vec<(usize, f64)>>,
    /// `q_x = sum_y q_xy`
    pub total_rates: Vec<f64>,
    /// Proportional to `M`, summing to one.
    pub stationary: Vec<f64>,
    pub mass: Vec<f64>,
    /// Piece of every DOF, `None` for DOFs shared by several pieces.
    pub piece: Vec<Option<usize>>,
    pub seed: u64,
    cumulative: Vec<Vec<f64>>,
}

/// Builds the chain; any positive off-diagonal of `K` is rejected.
pub fn build_chain(system: &DirichletSystem, seed: u64) -> Result<JumpChain> {
    if !system.violations.is_empty() {
        return Err(Error::NonCompliantMesh { entries: system.violations.clone() });
    }
    let n = system.dof_count();
    let mut rates = Vec::with_capacity(n);
    let mut cumulative = Vec::with_capacity(n);
    let mut total_rates = Vec::with_capacity(n);
    for x in 0..n {
        let row: Vec<(usize, f64)> = system
            .stiffness
            .row(x)
            .filter(|&(y, v)| y != x && v < 0.0)
            .map(|(y, v)| (y, -v / system.mass[x]))
            .collect();
        let mut acc = 0.0;
        let cum: Vec<f64> = row
            .iter()
            .map(|&(_, q)| {
                acc += q;
                acc
            })
            .collect();
        total_rates.push(acc);
        rates.push(row);
        cumulative.push(cum);
    }
    let total: f64 = system.mass.iter().sum();
    let stationary = system.mass.iter().map(|m| m / total).collect();
    let piece = system.piece_membership.iter().map(|p| if p.len() == 1 { Some(p[0]) } else { None }).collect();
    Ok(JumpChain { rates, total_rates, stationary, mass: system.mass.clone(), piece, seed, cumulative })
}

impl JumpChain {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[x].iter().find(|&&(z, _)| z == y).map_or(0.0, |&(_, q)| q)
    }

    /// `max |M_x q_xy - M_y q_yx|` relative to the largest flux.
    pub fn detailed_balance_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (x, row) in self.rates.iter().enumerate() {
            for &(y, q) in row {
                let f = self.mass[x] * q;
                worst = worst.max((f - self.mass[y] * self.rate(y, x)).abs());
                scale = scale.max(f);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::input(format!("state {x} out of range 0..{}", self.len())))
        }
    }
}

/// Per-path generator: stream `stream` of ChaCha8 keyed by `seed`.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Crossing rule: a crossing is the first visit to a DOF of a piece other
/// than the last piece visited, among DOFs at glued distance at least
/// `exclusion` from every intersection. Zero exclusion counts every change
/// of single-piece membership.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossingRule {
    /// Per-DOF distance to the nearest intersection; required when
    /// `exclusion > 0`.
    pub distance: Option<Vec<f64>>,
    pub exclusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    /// `(jump time, state)`, starting with `(0, x0)`; empty unless
    /// requested.
    pub path: Vec<(f64, usize)>,
    /// `(state, holding time)`, ascending in state.
    pub occupation: Vec<(usize, f64)>,
    pub crossings: usize,
    pub horizon: f64,
    pub end: usize,
    pub jumps: usize,
    /// Directed jump counts `(x, y, n)`, only when requested.
    pub transitions: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceOptions {
    pub keep_path: bool,
    pub keep_transitions: bool,
}

/// Exact simulation on `[0, horizon]` from `x0`.
pub fn sample_path(
    chain: &JumpChain,
    x0: usize,
    horizon: f64,
    rng: &mut ChaCha8Rng,
    rule: &CrossingRule,
    opts: TraceOptions,
) -> Result<WalkTrace> {
    chain.check_state(x0)?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::invalid("horizon must be finite and nonnegative"));
    }
    if rule.exclusion > 0.0 && rule.distance.as_ref().is_none_or(|d| d.len() != chain.len()) {
        return Err(Error::input("crossing exclusion needs a distance per state"));
    }
    let label = |x: usize| -> Option<usize> {
        let p = chain.piece[x]?;
        match &rule.distance {
            Some(d) if rule.exclusion > 0.0 && d[x] < rule.exclusion => None,
            _ => Some(p),
        }
    };
    let mut occ: BTreeMap<usize, f64> = BTreeMap::new();
    let mut trans: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut path = Vec::new();
    if opts.keep_path {
        path.push((0.0, x0));
    }
    let (mut t, mut x) = (0.0, x0);
    let mut last = label(x0);
    let (mut crossings, mut jumps) = (0, 0);
    loop {
        let q = chain.total_rates[x];
        let hold = if q > 0.0 { -(1.0 - uniform(rng)).ln() / q } else { f64::INFINITY };
        if t + hold >= horizon {
            *occ.entry(x).or_insert(0.0) += horizon - t;
            break;
        }
        *occ.entry(x).or_insert(0.0) += hold;
        t += hold;
        let target = uniform(rng) * q;
        let cum = &chain.cumulative[x];
        let k = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        let y = chain.rates[x][k].0;
        if opts.keep_transitions {
            *trans.entry((x, y)).or_insert(0) += 1;
        }
        x = y;
        jumps += 1;
        if opts.keep_path {
            path.push((t, x));
        }
        if let Some(p) = label(x) {
            if last.is_some_and(|l| l != p) {
                crossings += 1;
            }
            last = Some(p);
        }
    }
    Ok(WalkTrace {
        path,
        occupation: occ.into_iter().collect(),
        crossings,
        horizon,
        end: x,
        jumps,
        transitions: trans.into_iter().map(|((a, b), n)| (a, b, n)).collect(),
    })
}

/// Position at `horizon` only; same random stream as [`sample_path`].
pub fn sample_endpoint(chain: &JumpChain, x0: usize, horizon: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
    chain.check_state(x0)?;
    let (mut t, mut x) = (0.0, x0);
    loop {
        let q = chain.total_rates[x];
        let hold = if q > 0.0 { -(1.0 - uniform(rng)).ln() / q } else { f64::INFINITY };
        if t + hold >= horizon {
            return Ok(x);
        }
        t += hold;
        let target = uniform(rng) * q;
        let cum = &chain.cumulative[x];
        let k = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        x = chain.rates[x][k].0;
    }
}

/// Draws a state from the stationary distribution.
pub fn sample_stationary(chain: &JumpChain, rng: &mut ChaCha8Rng) -> usize {
    let target = uniform(rng);
    let mut acc = 0.0;
    for (x, &p) in chain.stationary.iter().enumerate() {
        acc += p;
        if target < acc {
            return x;
        }
    }
    chain.len() - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingStatistics {
    /// Crossings per unit time, pooled over paths.
    pub rate: f64,
    /// Percentile bootstrap interval over paths.
    pub ci: (f64, f64),
    pub level: f64,
    pub crossings: usize,
    pub time: f64,
    pub paths: usize,
}

/// Pooled crossing rate with a bootstrap interval at `level` from
/// `resamples` path resamplings.
pub fn crossing_statistics(
    traces: &[WalkTrace],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<CrossingStatistics> {
    if traces.is_empty() {
        return Err(Error::input("no traces"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("confidence level must lie in (0, 1)"));
    }
    let pooled = |idx: &mut dyn Iterator<Item = usize>| {
        let (mut c, mut t) = (0.0, 0.0);
        for i in idx {
            c += traces[i].crossings as f64;
            t += traces[i].horizon;
        }
        if t > 0.0 {
            c / t
        } else {
            0.0
        }
    };
    let n = traces.len();
    let rate = pooled(&mut (0..n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            let picks: Vec<usize> = (0..n).map(|_| (rng.next_u64() % n as u64) as usize).collect();
            pooled(&mut picks.into_iter())
        })
        .collect();
    boot.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let q = |p: f64| boot[((p * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    let alpha = 0.5 * (1.0 - level);
    Ok(CrossingStatistics {
        rate,
        ci: (q(alpha), q(1.0 - alpha)),
        level,
        crossings: traces.iter().map(|t| t.crossings).sum(),
        time: traces.iter().map(|t| t.horizon).sum(),
        paths: n,
    })
}

/// Total variation between pooled occupation and `mu`, on the classes of
/// `partition` (one label per state).
pub fn occupation_tv(chain: &JumpChain, traces: &[WalkTrace], partition: &[usize]) -> Result<f64> {
    if partition.len() != chain.len() {
        return Err(Error::input("partition needs one label per state"));
    }
    let classes = partition.iter().copied().max().map_or(0, |m| m + 1);
    let mut occ = vec![0.0; classes];
    let mut target = vec![0.0; classes];
    for (x, &p) in chain.stationary.iter().enumerate() {
        target[partition[x]] += p;
    }
    let mut total = 0.0;
    for t in traces {
        for &(x, h) in &t.occupation {
            occ[partition[x]] += h;
            total += h;
        }
    }
    if !(total > 0.0) {
        return Err(Error::input("traces carry no occupation time"));
    }
    Ok(0.5 * occ.iter().zip(&target).map(|(o, p)| (o / total - p).abs()).sum::<f64>())
}

/// Labels states by their piece; shared states get label `pieces`.
pub fn piece_partition(chain: &JumpChain) -> Vec<usize> {
    let shared = chain.piece.iter().flatten().copied().max().map_or(0, |m| m + 1);
    chain.piece.iter().map(|p| p.unwrap_or(shared)).collect()
}

/// `sum |n_xy - n_yx| / sum (n_xy + n_yx)` over the pooled jump counts.
pub fn flow_asymmetry(traces: &[WalkTrace]) -> f64 {
    let mut counts: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    let mut total = 0i64;
    for t in traces {
        for &(x, y, n) in &t.transitions {
            let key = (x.min(y), x.max(y));
            let sign = if x < y { 1 } else { -1 };
            *counts.entry(key).or_insert(0) += sign * n as i64;
            total += n as i64;
        }
    }
    if total == 0 {
        return 0.0;
    }
    counts.values().map(|v| v.abs()).sum::<i64>() as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// Upper quantile at `level` (Wilson-Hilferty).
    pub critical: f64,
    pub level: f64,
    pub accepted: bool,
}

/// Pearson test of the classes of independent `endpoints` against `mu`.
pub fn stationarity_test(chain: &JumpChain, endpoints: &[usize], partition: &[usize], level: f64) -> Result<ChiSquare> {
    if partition.len() != chain.len() || endpoints.is_empty() {
        return Err(Error::input("stationarity test needs endpoints and one label per state"));
    }
    let classes = partition.iter().copied().max().map_or(0, |m| m + 1);
    let mut observed = vec![0.0; classes];
    let mut p = vec![0.0; classes];
    for (x, &s) in chain.stationary.iter().enumerate() {
        p[partition[x]] += s;
    }
    for &e in endpoints {
        observed[partition[e]] += 1.0;
    }
    let n = endpoints.len() as f64;
    let used: Vec<usize> = (0..classes).filter(|&c| p[c] > 0.0).collect();
    let statistic = used.iter().map(|&c| (observed[c] - n * p[c]).powi(2) / (n * p[c])).sum();
    let dof = used.len().saturating_sub(1).max(1);
    let critical = chi_square_quantile(dof, level);
    Ok(ChiSquare { statistic, dof, critical, level, accepted: statistic <= critical })
}

/// Wilson-Hilferty approximation of the `level` quantile of chi-square
/// with `k` degrees of freedom.
pub fn chi_square_quantile(k: usize, level: f64) -> f64 {
    let k = k as f64;
    let z = normal_quantile(level);
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Acklam's rational approximation of the standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -39.69683028665376,
        220.9460984245205,
        -275.9285104469687,
        138.357_751_867_269,
        -30.66479806614716,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-54.47609879822406, 161.5858368580409, -155.6989798598866, 66.80131188771972, -13.28068155288572];
    const C: [f64; 6] = [
        -0.007784894002430293,
        -0.3223964580411365,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [0.007784695709041462, 0.3224671290700398, 2.445134137142996, 3.754408661907416];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
