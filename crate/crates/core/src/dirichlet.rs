//! Weighted P1 Dirichlet form on the glued complex: stiffness `K`,
//! lumped mass `M`, resolvent `(M + K)^{-1} M` and implicit Euler heat
//! steps `(M + tau K)^{-1} M`.
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // unused when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{dot3, Point};
use crate::measure::WeightedComplex;
use crate::sparse::{pcg, CsrMatrix, SolveStats, SolverOptions};

/// One cell with its global DOFs, barycentric gradients and `int omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub piece: usize,
    pub dofs: Vec<usize>,
    pub grads: Vec<Point>,
    pub weight: f64,
}

/// Discrete Dirichlet form and measure over the global DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSystem {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    pub piece_membership: Vec<Vec<usize>>,
    /// Positive off-diagonal stiffness entries `(i, j, K_ij)`, `i < j`.
    /// Empty means `K` is an M-matrix and heat steps obey the maximum
    /// principle.
    pub violations: Vec<(usize, usize, f64)>,
    pub cells: Vec<CellRecord>,
    /// Ambient position of every DOF.
    pub positions: Vec<Point>,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub values: Vec<f64>,
    pub time: f64,
    /// Per-cell `int_T omega |grad u|^2`, in the order of `cells`.
    pub energy_density: Option<Vec<f64>>,
}

impl HeatState {
    pub fn new(values: Vec<f64>) -> Self {
        HeatState { values, time: 0.0, energy_density: None }
    }
}

/// Off-diagonals smaller than this fraction of the row diagonal are
/// treated as zero when looking for M-matrix violations.
const VIOLATION_FLOOR: f64 = 1e-12;

/// Assembles `K` and `M` with natural boundary conditions on every piece.
pub fn assemble(wc: &WeightedComplex) -> Result<DirichletSystem> {
    let complex = &wc.complex;
    let n = complex.dof_count();
    let mut cells = Vec::new();
    let mut off = Vec::new();
    for (p, piece) in complex.pieces.iter().enumerate() {
        let map = &complex.global_dof[p];
        for c in 0..piece.n_cells() {
            let geom = piece.cell_geometry(c).map_err(|_| Error::DegenerateCell { piece: p, cell: c })?;
            let weight = wc.cell(p, c).total;
            if !weight.is_finite() {
                return Err(Error::Numeric {
                    what: format!("weight integral on cell {c} of piece {p}"),
                    residual: weight,
                });
            }
            let dofs: Vec<usize> = piece.cell(c).iter().map(|&v| map[v]).collect();
            for i in 0..dofs.len() {
                for j in (i + 1)..dofs.len() {
                    let kij = weight * dot3(geom.grads[i], geom.grads[j]);
                    off.push((dofs[i], dofs[j], kij));
                    off.push((dofs[j], dofs[i], kij));
                }
            }
            cells.push(CellRecord { piece: p, dofs, grads: geom.grads, weight });
        }
    }
    // diagonal as minus the off-diagonal row sum: constants lie in the
    // kernel up to one rounding per row
    let mut diag = vec![0.0; n];
    for &(i, _, v) in &off {
        diag[i] -= v;
    }
    let mut triplets = off;
    triplets.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    let stiffness = CsrMatrix::from_triplets(n, &triplets);
    let mass = wc.lumped_mass();
    if let Some(x) = (0..n).find(|&x| !(mass[x] > 0.0) || !mass[x].is_finite()) {
        return Err(Error::Numeric { what: format!("lumped mass of DOF {x} is not positive"), residual: mass[x] });
    }
    let mut violations = Vec::new();
    for i in 0..n {
        let d = stiffness.get(i, i);
        for (j, v) in stiffness.row(i) {
            if j > i && v > VIOLATION_FLOOR * d {
                violations.push((i, j, v));
            }
        }
    }
    let piece_membership = complex.dof_owners.iter().map(|o| o.iter().map(|&(p, _)| p).collect()).collect();
    let positions = (0..n).map(|d| complex.position(d)).collect();
    let sys = DirichletSystem {
        stiffness,
        mass,
        piece_membership,
        violations,
        cells,
        positions,
        solver: SolverOptions::default(),
    };
    sys.check_invariants()?;
    Ok(sys)
}

impl DirichletSystem {
    pub fn dof_count(&self) -> usize {
        self.mass.len()
    }

    /// Symmetry, nonnegative diagonal and `K 1 = 0`.
    pub fn check_invariants(&self) -> Result<()> {
        let scale = self.stiffness.diagonal().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let asym = self.stiffness.asymmetry();
        if asym > 0.0 {
            return Err(Error::Numeric { what: "stiffness matrix is not symmetric".into(), residual: asym });
        }
        if let Some(d) = self.stiffness.diagonal().iter().find(|&&d| d < 0.0) {
            return Err(Error::Numeric { what: "negative stiffness diagonal".into(), residual: *d });
        }
        let ones = vec![1.0; self.dof_count()];
        let rows = self.stiffness.mul_vec(&ones);
        let worst = rows.iter().fold(0.0, |a: f64, &b| a.max(b.abs()));
        if worst > 1e-10 * scale {
            return Err(Error::Numeric { what: "constants are not in the kernel of K".into(), residual: worst });
        }
        Ok(())
    }

    /// Stiffness of the cells of one piece, over all global DOFs.
    pub fn piece_stiffness(&self, piece: usize) -> CsrMatrix {
        let mut trip = Vec::new();
        for c in self.cells.iter().filter(|c| c.piece == piece) {
            for i in 0..c.dofs.len() {
                for j in 0..c.dofs.len() {
                    if i != j {
                        let kij = c.weight * dot3(c.grads[i], c.grads[j]);
                        trip.push((c.dofs[i], c.dofs[j], kij));
                        trip.push((c.dofs[i], c.dofs[i], -kij));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.dof_count(), &trip)
    }

    pub fn is_m_matrix(&self) -> bool {
        self.violations.is_empty()
    }

    /// `E(u, u) = u . K u`
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.stiffness.quadratic(u)
    }

    pub fn inner_mu(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn norm_mu(&self, u: &[f64]) -> f64 {
        self.inner_mu(u, u).sqrt()
    }

    /// `sum_x M_x u_x`
    pub fn total(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.mass).map(|(a, m)| a * m).sum()
    }

    pub fn measure(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// mu-average of `u`.
    pub fn mean(&self, u: &[f64]) -> f64 {
        self.total(u) / self.measure()
    }

    /// `|| u - mean(u) ||_mu`
    pub fn deviation(&self, u: &[f64]) -> f64 {
        let m = self.mean(u);
        let c: Vec<f64> = u.iter().map(|x| x - m).collect();
        self.norm_mu(&c)
    }

    /// Per-cell `int_T omega |grad u|^2`; the entries sum to `u . K u`.
    pub fn energy_density(&self, u: &[f64]) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| {
                let mut g = [0.0; 3];
                for (&d, gr) in c.dofs.iter().zip(&c.grads) {
                    for k in 0..3 {
                        g[k] += u[d] * gr[k];
                    }
                }
                c.weight * dot3(g, g)
            })
            .collect()
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dof_count() {
            return Err(Error::input(format!("vector of length {} for {} DOFs", u.len(), self.dof_count())));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("vector has non-finite entries"));
        }
        Ok(())
    }

    /// Solves `(M + K) u = M f`.
    pub fn apply_resolvent(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let a = self.stiffness.scaled_plus_diagonal(1.0, &self.mass);
        let b: Vec<f64> = f.iter().zip(&self.mass).map(|(x, m)| x * m).collect();
        let mut u = f.to_vec();
        pcg(&a, &b, &mut u, self.solver)?;
        Ok(u)
    }

    /// Implicit Euler operator `(M + tau K)^{-1} M` for repeated steps.
    pub fn propagator(&self, tau: f64) -> Result<HeatPropagator<'_>> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {tau}")));
        }
        Ok(HeatPropagator { system: self, tau, matrix: self.stiffness.scaled_plus_diagonal(tau, &self.mass) })
    }

    pub fn heat_step(&self, state: &HeatState, tau: f64) -> Result<HeatState> {
        self.check_len(&state.values)?;
        let values = self.propagator(tau)?.apply(&state.values)?;
        Ok(HeatState { values, time: state.time + tau, energy_density: None })
    }

    /// Runs implicit Euler steps of lengths `schedule`, which must sum to
    /// `horizon`. With `keep_states` every intermediate state is returned.
    pub fn evolve(&self, f0: &[f64], horizon: f64, schedule: &[f64], keep_states: bool) -> Result<Trajectory> {
        self.check_len(f0)?;
        if !(horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        let sum: f64 = schedule.iter().sum();
        if (sum - horizon).abs() > 1e-9 * horizon {
            return Err(Error::invalid(format!("time steps sum to {sum}, expected {horizon}")));
        }
        let mut state = HeatState::new(f0.to_vec());
        let mut rows = vec![self.row(&state)];
        let mut states = Vec::new();
        let mut cached: Option<HeatPropagator<'_>> = None;
        for (step, &tau) in schedule.iter().enumerate() {
            if cached.as_ref().map(|p| p.tau) != Some(tau) {
                cached = Some(self.propagator(tau)?);
            }
            let values = cached.as_ref().unwrap().apply(&state.values)?;
            state = HeatState { values, time: state.time + tau, energy_density: None };
            rows.push(self.row(&state));
            if keep_states && step + 1 < schedule.len() {
                states.push(state.clone());
            }
        }
        state.energy_density = Some(self.energy_density(&state.values));
        states.push(state);
        Ok(Trajectory { rows, states })
    }

    fn row(&self, s: &HeatState) -> TrajectoryRow {
        let u = &s.values;
        TrajectoryRow {
            time: s.time,
            mass: self.total(u),
            energy: self.energy(u),
            min: u.iter().cloned().fold(f64::INFINITY, f64::min),
            max: u.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            deviation: self.deviation(u),
        }
    }
}

/// Equal steps covering `[0, horizon]`.
pub fn uniform_schedule(horizon: f64, steps: usize) -> Vec<f64> {
    vec![horizon / steps as f64; steps]
}

pub struct HeatPropagator<'a> {
    system: &'a DirichletSystem,
    pub tau: f64,
    matrix: CsrMatrix,
}

impl HeatPropagator<'_> {
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = u.to_vec();
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// Writes `(M + tau K)^{-1} M u` into `out`, using `out` as the initial
    /// guess.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<SolveStats> {
        let b: Vec<f64> = u.iter().zip(&self.system.mass).map(|(x, m)| x * m).collect();
        pcg(&self.matrix, &b, out, self.system.solver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub min: f64,
    pub max: f64,
    /// `|| u - mean(u) ||_mu`
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One row for the initial state and one per step.
    pub rows: Vec<TrajectoryRow>,
    /// All states after the initial one, or only the last; the last
    /// carries its energy density.
    pub states: Vec<HeatState>,
}

impl Trajectory {
    pub fn last(&self) -> &HeatState {
        self.states.last().unwrap()
    }
}
