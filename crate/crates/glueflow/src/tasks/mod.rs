//! One module per task. Each task writes its CSV tables through the
//! reporter and finishes with `report.json`.
mod build;
mod capacity;
mod ergodicity;
mod excess;
mod spectrum;
mod walk;
mod weights;

use glueflow_core::dirichlet::{assemble, DirichletSystem};
use glueflow_core::geometry::{GluedComplex, Point};
use glueflow_core::measure::WeightedComplex;
use glueflow_core::space::SpaceSpec;
use serde_json::Value;

use crate::config::{ExperimentConfig, Task};
use crate::error::RunError;
use crate::report::{envelope, InputFile, Reporter};

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub space: SpaceSpec,
    pub seed: u64,
    pub threads: usize,
    pub out: Reporter,
    pub config_json: Value,
    pub config_sha256: String,
    pub inputs: Vec<InputFile>,
}

impl Context<'_> {
    /// Builds the space at `level` and checks declared intersection
    /// dimensions.
    pub fn instantiate(&self, level: usize) -> Result<WeightedComplex, RunError> {
        let wc = self.space.instantiate(level)?;
        check_expected_k(&wc.complex, self.config.space.expected_k.as_deref())?;
        Ok(wc)
    }

    pub fn assemble(&self, level: usize) -> Result<(WeightedComplex, DirichletSystem), RunError> {
        let wc = self.instantiate(level)?;
        let system = assemble(&wc)?;
        Ok((wc, system))
    }

    /// Writes `report.json`.
    pub fn finish(&mut self, results: Value) -> Result<(), RunError> {
        let body = envelope(self.config.task.name(), &self.config_json, &self.config_sha256, &self.inputs, results);
        self.out.json("report.json", &body)
    }
}

fn check_expected_k(complex: &GluedComplex, expected: Option<&[usize]>) -> Result<(), RunError> {
    let Some(expected) = expected else { return Ok(()) };
    let found: Vec<usize> = complex.glue_maps.iter().map(|m| m.k).collect();
    if found != expected {
        return Err(RunError::Config(format!("declared intersection dimensions {expected:?}, inferred {found:?}")));
    }
    Ok(())
}

pub fn dispatch(ctx: &mut Context<'_>) -> Result<(), RunError> {
    match ctx.config.task {
        Task::Build => build::run(ctx),
        Task::CheckWeights => weights::run(ctx),
        Task::Spectrum => spectrum::run(ctx),
        Task::Ergodicity => ergodicity::run(ctx),
        Task::Capacity => capacity::run(ctx),
        Task::Walk => walk::run(ctx),
        Task::Excess => excess::run(ctx),
    }
}

/// Order-preserving map over at most `threads` scoped workers, each
/// taking one contiguous chunk.
pub fn par_map<T, R, F>(threads: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
    })
}

fn sq_dist(a: Point, b: Point) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// Global DOF nearest to `p`; the lowest index wins ties.
pub fn nearest_dof(complex: &GluedComplex, p: Point) -> usize {
    (0..complex.dof_count())
        .min_by(|&a, &b| sq_dist(complex.position(a), p).total_cmp(&sq_dist(complex.position(b), p)))
        .expect("complex has DOFs")
}

/// Local vertex of `piece` nearest to `p`.
pub fn nearest_vertex(complex: &GluedComplex, piece: usize, p: Point) -> usize {
    let verts = &complex.pieces[piece].vertices;
    (0..verts.len()).min_by(|&a, &b| sq_dist(verts[a], p).total_cmp(&sq_dist(verts[b], p))).expect("piece has vertices")
}

pub fn euclidean(a: Point, b: Point) -> f64 {
    sq_dist(a, b).sqrt()
}
