//! TOML experiment configs. One file drives one task; unknown keys are
//! rejected and every task section is filled with its defaults before a
//! run, so the resolved config fully determines the numbers.
use std::path::{Path, PathBuf};

use glueflow_core::geometry::{PieceMetric, Placement, Point};
use glueflow_core::measure::{Anchor, WeightSpec};
use glueflow_core::space::{PieceKind, PieceSpec, SpaceSpec};
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::mesh_io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Build,
    CheckWeights,
    Spectrum,
    Ergodicity,
    Capacity,
    Walk,
    Excess,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Build => "build",
            Task::CheckWeights => "check-weights",
            Task::Spectrum => "spectrum",
            Task::Ergodicity => "ergodicity",
            Task::Capacity => "capacity",
            Task::Walk => "walk",
            Task::Excess => "excess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory; `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub space: SpaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildTask>,
    #[serde(default, rename = "check-weights", skip_serializing_if = "Option::is_none")]
    pub check_weights: Option<CheckWeightsTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<ErgodicityTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacityTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess: Option<ExcessTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub pieces: Vec<PieceConfig>,
    #[serde(default)]
    pub weights: Vec<WeightConfig>,
    /// Glue tolerance; defaults to `1e-9` times the diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Declared intrinsic dimension of every intersection, in id order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_k: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PieceKindName {
    Segment,
    Disk,
    Annulus,
    Rectangle,
    MeshFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    Euclidean,
    EdgeGraph,
}

/// One piece. Placement: `origin` plus at most one of `direction`
/// (segments: image of the local x axis), `normal` (2D pieces: image of
/// the local z axis) or `x_axis` with optional `y_axis` hint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub kind: PieceKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Mesh file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_axis: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_axis: Option<Point>,
    /// Cells per unit length per refinement level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    /// Mesh files default to `edge-graph`, builders to `euclidean`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKindName {
    Constant,
    Power,
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub piece: usize,
    pub kind: WeightKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// `omega = dist(x, anchor)^(-alpha)`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<usize>,
    /// Local vertex indices of the piece.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<usize>>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildTask {
    #[serde(default = "BuildTask::default_level")]
    pub level: usize,
    /// Stiffness and mass as sparse triplets.
    #[serde(default = "default_true")]
    pub export_matrices: bool,
}

impl BuildTask {
    fn default_level() -> usize {
        16
    }
}

impl Default for BuildTask {
    fn default() -> Self {
        BuildTask { level: Self::default_level(), export_matrices: true }
    }
}

/// Centres are ambient points snapped to the nearest vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A2Probe {
    pub piece: usize,
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingProbe {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeProbe {
    pub piece: usize,
    pub intersection: usize,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckWeightsTask {
    #[serde(default = "CheckWeightsTask::default_level")]
    pub level: usize,
    #[serde(default)]
    pub a2: Vec<A2Probe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doubling: Option<DoublingProbe>,
    #[serde(default)]
    pub tube: Vec<TubeProbe>,
}

impl CheckWeightsTask {
    fn default_level() -> usize {
        32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDatum {
    /// First nonconstant eigenvector.
    Phi1,
    /// Ambient coordinate `axis`.
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub horizon: f64,
    pub tau: f64,
    #[serde(default = "FlowConfig::default_initial")]
    pub initial: InitialDatum,
    #[serde(default)]
    pub axis: usize,
}

impl FlowConfig {
    fn default_initial() -> InitialDatum {
        InitialDatum::Phi1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumTask {
    #[serde(default = "SpectrumTask::default_level")]
    pub level: usize,
    #[serde(default = "SpectrumTask::default_count")]
    pub count: usize,
    #[serde(default)]
    pub export_matrices: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowConfig>,
}

impl SpectrumTask {
    fn default_level() -> usize {
        64
    }
    fn default_count() -> usize {
        4
    }
}

impl Default for SpectrumTask {
    fn default() -> Self {
        SpectrumTask { level: Self::default_level(), count: Self::default_count(), export_matrices: false, flow: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicityTask {
    #[serde(default = "ErgodicityTask::default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "ErgodicityTask::default_ergodic")]
    pub ergodic_ratio: f64,
    #[serde(default = "ErgodicityTask::default_degenerate")]
    pub degenerate_ratio: f64,
}

impl ErgodicityTask {
    fn default_levels() -> Vec<usize> {
        vec![8, 16, 32]
    }
    fn default_ergodic() -> f64 {
        0.5
    }
    fn default_degenerate() -> f64 {
        0.2
    }
}

impl Default for ErgodicityTask {
    fn default() -> Self {
        ErgodicityTask {
            levels: Self::default_levels(),
            ergodic_ratio: Self::default_ergodic(),
            degenerate_ratio: Self::default_degenerate(),
        }
    }
}

/// DOF region: glued distance to an intersection, or Euclidean distance
/// to an ambient point. Closed when used as a condenser plate, open when
/// used as the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Point>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondenserConfig {
    pub k: Region,
    pub omega: Region,
    #[serde(default = "default_true")]
    pub export_potential: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub intersection: usize,
    pub piece: usize,
    pub radius: f64,
    /// Tube radii sampled when the weight has no closed form.
    #[serde(default = "BoundsConfig::default_samples")]
    pub samples: usize,
    #[serde(default = "BoundsConfig::default_levels")]
    pub levels: usize,
    #[serde(default = "BoundsConfig::default_nodes")]
    pub nodes: usize,
    #[serde(default = "BoundsConfig::default_c")]
    pub c: f64,
    #[serde(default = "BoundsConfig::default_divergence")]
    pub divergence_ratio: f64,
}

impl BoundsConfig {
    fn default_samples() -> usize {
        24
    }
    fn default_levels() -> usize {
        60
    }
    fn default_nodes() -> usize {
        8
    }
    fn default_c() -> f64 {
        1.0
    }
    fn default_divergence() -> f64 {
        0.95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub intersection: usize,
    pub radius: f64,
    pub levels: Vec<usize>,
    /// A side with last / first above this stays bounded away from 0.
    #[serde(default = "EquivalenceConfig::default_ratio")]
    pub ratio: f64,
}

impl EquivalenceConfig {
    fn default_ratio() -> f64 {
        0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityTask {
    #[serde(default = "CapacityTask::default_level")]
    pub level: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condenser: Option<CondenserConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceConfig>,
}

impl CapacityTask {
    fn default_level() -> usize {
        32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkTask {
    #[serde(default = "WalkTask::default_level")]
    pub level: usize,
    pub horizon: f64,
    #[serde(default = "WalkTask::default_paths")]
    pub paths: usize,
    /// Start at the vertex nearest to this point; stationary starts
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Point>,
    /// Glued distance from the intersections below which piece changes
    /// are not counted as crossings.
    #[serde(default)]
    pub exclusion: f64,
    #[serde(default = "WalkTask::default_resamples")]
    pub resamples: usize,
    #[serde(default = "WalkTask::default_confidence")]
    pub confidence: f64,
    #[serde(default = "WalkTask::default_chi2")]
    pub chi2_level: f64,
    /// Optional crossing-rate refinement ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    #[serde(default = "WalkTask::default_stable")]
    pub stable_ratio: f64,
    #[serde(default = "WalkTask::default_decay")]
    pub decay_ratio: f64,
    /// Number of full paths written as CSV.
    #[serde(default = "WalkTask::default_export")]
    pub export_traces: usize,
}

impl WalkTask {
    fn default_level() -> usize {
        16
    }
    fn default_paths() -> usize {
        1000
    }
    fn default_resamples() -> usize {
        1000
    }
    fn default_confidence() -> f64 {
        0.95
    }
    fn default_chi2() -> f64 {
        0.99
    }
    fn default_stable() -> f64 {
        0.5
    }
    fn default_decay() -> f64 {
        0.2
    }
    fn default_export() -> usize {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionName {
    Symmetric,
    OneSided,
}

/// `U`: DOFs of the listed pieces (all when absent) with
/// `normal . x <= offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    pub name: String,
    pub normal: Point,
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcessTask {
    #[serde(default = "ExcessTask::default_level")]
    pub level: usize,
    pub h: Vec<f64>,
    pub sets: Vec<SetConfig>,
    #[serde(default = "ExcessTask::default_convention")]
    pub convention: ConventionName,
    #[serde(default = "ExcessTask::default_substeps")]
    pub substeps: usize,
    /// Smallest admissible `sqrt(h_min) / median edge length`.
    #[serde(default = "ExcessTask::default_resolution")]
    pub min_resolution: f64,
    /// Pass band on the normalised limit for spaces without intersections.
    #[serde(default = "ExcessTask::default_tolerance")]
    pub tolerance: f64,
}

impl ExcessTask {
    fn default_level() -> usize {
        64
    }
    fn default_convention() -> ConventionName {
        ConventionName::Symmetric
    }
    fn default_substeps() -> usize {
        32
    }
    fn default_resolution() -> f64 {
        5.0
    }
    fn default_tolerance() -> f64 {
        0.05
    }
}

fn config_error(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

/// Parses and validates a config file.
pub fn load(path: &Path) -> Result<(ExperimentConfig, String), RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let cfg = parse(&text)?;
    Ok((cfg, text))
}

pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
    cfg.fill_defaults()?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(name: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be positive and finite, got {v}")))
    }
}

fn levels_ok(name: &str, levels: &[usize], min: usize) -> Result<(), RunError> {
    if levels.len() < min {
        return Err(config_error(format!("{name} needs at least {min} levels")));
    }
    if levels.contains(&0) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_error(format!("{name} must be positive and strictly increasing")));
    }
    Ok(())
}

fn ratio_ok(name: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(config_error(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl ExperimentConfig {
    fn sections(&self) -> [(Task, bool); 7] {
        [
            (Task::Build, self.build.is_some()),
            (Task::CheckWeights, self.check_weights.is_some()),
            (Task::Spectrum, self.spectrum.is_some()),
            (Task::Ergodicity, self.ergodicity.is_some()),
            (Task::Capacity, self.capacity.is_some()),
            (Task::Walk, self.walk.is_some()),
            (Task::Excess, self.excess.is_some()),
        ]
    }

    fn fill_defaults(&mut self) -> Result<(), RunError> {
        if let Some((other, _)) = self.sections().iter().find(|(t, present)| *present && *t != self.task) {
            return Err(config_error(format!(
                "section [{}] given but task is {}; one config drives one task",
                other.name(),
                self.task.name()
            )));
        }
        match self.task {
            Task::Build => {
                self.build.get_or_insert_with(BuildTask::default);
            }
            Task::CheckWeights => {
                self.check_weights.get_or_insert_with(|| CheckWeightsTask {
                    level: CheckWeightsTask::default_level(),
                    ..Default::default()
                });
            }
            Task::Spectrum => {
                self.spectrum.get_or_insert_with(SpectrumTask::default);
            }
            Task::Ergodicity => {
                self.ergodicity.get_or_insert_with(ErgodicityTask::default);
            }
            Task::Capacity | Task::Walk | Task::Excess => {
                if !self.sections().iter().any(|(t, p)| *p && *t == self.task) {
                    return Err(config_error(format!(
                        "task {} needs a [{}] section",
                        self.task.name(),
                        self.task.name()
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), RunError> {
        if self.space.pieces.is_empty() {
            return Err(config_error("space needs at least one piece"));
        }
        for (i, p) in self.space.pieces.iter().enumerate() {
            p.check(i)?;
        }
        let n = self.space.pieces.len();
        for w in &self.space.weights {
            if w.piece >= n {
                return Err(config_error(format!("weight refers to piece {} of {n}", w.piece)));
            }
            w.check()?;
        }
        if let Some(t) = self.space.tolerance {
            positive("space.tolerance", t)?;
        }
        let piece_ok = |p: usize, what: &str| {
            if p < n {
                Ok(())
            } else {
                Err(config_error(format!("{what} refers to piece {p} of {n}")))
            }
        };
        match self.task {
            Task::Build => {
                let b = self.build.as_ref().unwrap();
                levels_ok("build.level", &[b.level], 1)?;
            }
            Task::CheckWeights => {
                let c = self.check_weights.as_ref().unwrap();
                levels_ok("check-weights.level", &[c.level], 1)?;
                if c.a2.is_empty() && c.doubling.is_none() && c.tube.is_empty() {
                    return Err(config_error("check-weights needs at least one of a2, doubling, tube"));
                }
                for a in &c.a2 {
                    piece_ok(a.piece, "a2 probe")?;
                    if a.centers.is_empty() || a.radii.is_empty() {
                        return Err(config_error("a2 probe needs centers and radii"));
                    }
                    a.radii.iter().try_for_each(|&r| positive("a2 radius", r))?;
                }
                if let Some(d) = &c.doubling {
                    if d.centers.is_empty() || d.radii.is_empty() {
                        return Err(config_error("doubling probe needs centers and radii"));
                    }
                    d.radii.iter().try_for_each(|&r| positive("doubling radius", r))?;
                }
                for t in &c.tube {
                    piece_ok(t.piece, "tube probe")?;
                    if t.radii.is_empty() {
                        return Err(config_error("tube probe needs radii"));
                    }
                    t.radii.iter().try_for_each(|&r| positive("tube radius", r))?;
                }
            }
            Task::Spectrum => {
                let s = self.spectrum.as_ref().unwrap();
                levels_ok("spectrum.level", &[s.level], 1)?;
                if s.count < 2 {
                    return Err(config_error("spectrum.count must be at least 2"));
                }
                if let Some(f) = &s.flow {
                    positive("flow.horizon", f.horizon)?;
                    positive("flow.tau", f.tau)?;
                    if f.tau > f.horizon {
                        return Err(config_error("flow.tau exceeds flow.horizon"));
                    }
                    if f.axis > 2 {
                        return Err(config_error("flow.axis must be 0, 1 or 2"));
                    }
                }
            }
            Task::Ergodicity => {
                let e = self.ergodicity.as_ref().unwrap();
                levels_ok("ergodicity.levels", &e.levels, 3)?;
                ratio_ok("ergodicity.ergodic_ratio", e.ergodic_ratio)?;
                ratio_ok("ergodicity.degenerate_ratio", e.degenerate_ratio)?;
                if e.degenerate_ratio > e.ergodic_ratio {
                    return Err(config_error("degenerate_ratio exceeds ergodic_ratio"));
                }
            }
            Task::Capacity => {
                let c = self.capacity.as_ref().unwrap();
                levels_ok("capacity.level", &[c.level], 1)?;
                if c.condenser.is_none() && c.bounds.is_none() && c.equivalence.is_none() {
                    return Err(config_error("capacity needs at least one of condenser, bounds, equivalence"));
                }
                if let Some(k) = &c.condenser {
                    k.k.check("condenser.k", true)?;
                    k.omega.check("condenser.omega", false)?;
                }
                if let Some(b) = &c.bounds {
                    piece_ok(b.piece, "bounds")?;
                    positive("bounds.radius", b.radius)?;
                    positive("bounds.c", b.c)?;
                    ratio_ok("bounds.divergence_ratio", b.divergence_ratio)?;
                    if b.samples < 2 || b.levels < 4 || b.nodes == 0 {
                        return Err(config_error("bounds needs samples >= 2, levels >= 4, nodes >= 1"));
                    }
                }
                if let Some(q) = &c.equivalence {
                    positive("equivalence.radius", q.radius)?;
                    levels_ok("equivalence.levels", &q.levels, 2)?;
                    ratio_ok("equivalence.ratio", q.ratio)?;
                }
            }
            Task::Walk => {
                let w = self.walk.as_ref().unwrap();
                levels_ok("walk.level", &[w.level], 1)?;
                positive("walk.horizon", w.horizon)?;
                if w.paths < 2 {
                    return Err(config_error("walk.paths must be at least 2"));
                }
                if w.exclusion.is_nan() || w.exclusion < 0.0 {
                    return Err(config_error("walk.exclusion must be nonnegative"));
                }
                if w.resamples == 0 {
                    return Err(config_error("walk.resamples must be positive"));
                }
                ratio_ok("walk.confidence", w.confidence)?;
                ratio_ok("walk.chi2_level", w.chi2_level)?;
                ratio_ok("walk.stable_ratio", w.stable_ratio)?;
                ratio_ok("walk.decay_ratio", w.decay_ratio)?;
                if let Some(l) = &w.levels {
                    levels_ok("walk.levels", l, 2)?;
                }
            }
            Task::Excess => {
                let e = self.excess.as_ref().unwrap();
                levels_ok("excess.level", &[e.level], 1)?;
                e.h.iter().try_for_each(|&h| positive("excess.h", h))?;
                if e.sets.is_empty() {
                    return Err(config_error("excess needs at least one set"));
                }
                let mut names: Vec<&str> = e.sets.iter().map(|s| s.name.as_str()).collect();
                names.sort_unstable();
                if names.windows(2).any(|w| w[0] == w[1]) {
                    return Err(config_error("excess set names must be unique"));
                }
                for s in &e.sets {
                    if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                        return Err(config_error(format!("set name {:?} must be [A-Za-z0-9_-]+", s.name)));
                    }
                    if s.normal.iter().all(|&x| x == 0.0) {
                        return Err(config_error(format!("set {} has a zero normal", s.name)));
                    }
                    for &p in s.pieces.iter().flatten() {
                        piece_ok(p, "excess set")?;
                    }
                }
                if e.substeps == 0 {
                    return Err(config_error("excess.substeps must be positive"));
                }
                positive("excess.min_resolution", e.min_resolution)?;
                positive("excess.tolerance", e.tolerance)?;
            }
        }
        Ok(())
    }

    /// The config a run actually used: defaults filled, output directory
    /// dropped (it does not affect any number).
    pub fn resolved(&self) -> ExperimentConfig {
        ExperimentConfig { output: None, ..self.clone() }
    }

    /// Core description of the space; mesh files are read relative to
    /// `base`.
    pub fn space_spec(&self, base: &Path) -> Result<(SpaceSpec, Vec<PathBuf>), RunError> {
        let mut files = Vec::new();
        let pieces = self
            .space
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| p.to_spec(i, base, &mut files))
            .collect::<Result<Vec<_>, _>>()?;
        let weights = self.space.weights.iter().map(WeightConfig::to_spec).collect();
        Ok((SpaceSpec { pieces, weights, tolerance: self.space.tolerance }, files))
    }
}

impl Region {
    fn check(&self, name: &str, closed: bool) -> Result<(), RunError> {
        if self.intersection.is_some() == self.center.is_some() {
            return Err(config_error(format!("{name} needs exactly one of intersection, center")));
        }
        if closed {
            if !(self.radius >= 0.0 && self.radius.is_finite()) {
                return Err(config_error(format!("{name}.radius must be nonnegative")));
            }
            Ok(())
        } else {
            positive(&format!("{name}.radius"), self.radius)
        }
    }
}

impl PieceConfig {
    fn check(&self, i: usize) -> Result<(), RunError> {
        let given = [
            ("length", self.length),
            ("radius", self.radius),
            ("inner", self.inner),
            ("outer", self.outer),
            ("width", self.width),
            ("height", self.height),
        ];
        let needed: &[&str] = match self.kind {
            PieceKindName::Segment => &["length"],
            PieceKindName::Disk => &["radius"],
            PieceKindName::Annulus => &["inner", "outer"],
            PieceKindName::Rectangle => &["width", "height"],
            PieceKindName::MeshFile => &[],
        };
        for (name, v) in given {
            match (needed.contains(&name), v) {
                (true, None) => return Err(config_error(format!("piece {i}: missing {name}"))),
                (false, Some(_)) => return Err(config_error(format!("piece {i}: {name} does not apply"))),
                (true, Some(v)) => positive(&format!("piece {i}: {name}"), v)?,
                (false, None) => {}
            }
        }
        if (self.kind == PieceKindName::MeshFile) != self.path.is_some() {
            return Err(config_error(format!("piece {i}: path is required for, and only for, mesh-file pieces")));
        }
        if let (Some(a), Some(b)) = (self.inner, self.outer) {
            if a >= b {
                return Err(config_error(format!("piece {i}: inner radius must be below outer")));
            }
        }
        let frames = [self.direction.is_some(), self.normal.is_some(), self.x_axis.is_some()];
        if frames.iter().filter(|&&f| f).count() > 1 {
            return Err(config_error(format!("piece {i}: give at most one of direction, normal, x_axis")));
        }
        if self.y_axis.is_some() && self.x_axis.is_none() {
            return Err(config_error(format!("piece {i}: y_axis needs x_axis")));
        }
        if let Some(r) = self.resolution {
            positive(&format!("piece {i}: resolution"), r)?;
        }
        Ok(())
    }

    fn placement(&self) -> Result<Placement, RunError> {
        let origin = self.origin.unwrap_or([0.0; 3]);
        let p = if let Some(d) = self.direction {
            Placement::along(origin, d)
        } else if let Some(n) = self.normal {
            Placement::with_normal(origin, n)
        } else if let Some(x) = self.x_axis {
            let y = self.y_axis.unwrap_or(if x[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] });
            Placement::from_frame(origin, x, y)
        } else {
            Ok(Placement::translation(origin))
        };
        p.map_err(|e| config_error(e.to_string()))
    }

    fn to_spec(&self, i: usize, base: &Path, files: &mut Vec<PathBuf>) -> Result<PieceSpec, RunError> {
        let kind = match self.kind {
            PieceKindName::Segment => PieceKind::Segment { length: self.length.unwrap() },
            PieceKindName::Disk => PieceKind::Disk { radius: self.radius.unwrap() },
            PieceKindName::Annulus => PieceKind::Annulus { inner: self.inner.unwrap(), outer: self.outer.unwrap() },
            PieceKindName::Rectangle => {
                PieceKind::Rectangle { width: self.width.unwrap(), height: self.height.unwrap() }
            }
            PieceKindName::MeshFile => {
                let path = base.join(self.path.as_ref().unwrap());
                let mesh = mesh_io::read_mesh(&path, i).map_err(|e| config_error(format!("piece {i}: {e}")))?;
                files.push(path);
                PieceKind::Mesh(mesh)
            }
        };
        let mut spec = PieceSpec::new(kind, self.placement()?);
        spec.resolution = self.resolution.unwrap_or(1.0);
        spec.metric = match (self.metric, self.kind) {
            (Some(MetricName::Euclidean), _) => PieceMetric::Euclidean,
            (Some(MetricName::EdgeGraph), _) | (None, PieceKindName::MeshFile) => PieceMetric::EdgeGraph,
            (None, _) => PieceMetric::Euclidean,
        };
        Ok(spec)
    }
}

impl WeightConfig {
    fn check(&self) -> Result<(), RunError> {
        let p = self.piece;
        let fields = [self.value.is_some(), self.alpha.is_some(), self.anchor.is_some(), self.values.is_some()];
        let wanted = match self.kind {
            WeightKindName::Constant => [true, false, false, false],
            WeightKindName::Power => [false, true, true, false],
            WeightKindName::Tabulated => [false, false, false, true],
        };
        if fields != wanted {
            return Err(config_error(format!(
                "weight on piece {p}: {} weights take exactly {}",
                match self.kind {
                    WeightKindName::Constant => "constant",
                    WeightKindName::Power => "power",
                    WeightKindName::Tabulated => "tabulated",
                },
                match self.kind {
                    WeightKindName::Constant => "value",
                    WeightKindName::Power => "alpha and anchor",
                    WeightKindName::Tabulated => "values",
                }
            )));
        }
        if let Some(v) = self.value {
            positive(&format!("weight on piece {p}: value"), v)?;
        }
        if let Some(a) = self.alpha {
            if !a.is_finite() {
                return Err(config_error(format!("weight on piece {p}: alpha must be finite")));
            }
        }
        if let Some(a) = &self.anchor {
            if a.intersection.is_some() == a.vertices.is_some() {
                return Err(config_error(format!(
                    "weight on piece {p}: anchor needs exactly one of intersection, vertices"
                )));
            }
        }
        Ok(())
    }

    fn to_spec(&self) -> WeightSpec {
        match self.kind {
            WeightKindName::Constant => WeightSpec::constant(self.piece, self.value.unwrap()),
            WeightKindName::Power => {
                let a = self.anchor.as_ref().unwrap();
                let anchor = match (a.intersection, &a.vertices) {
                    (Some(id), _) => Anchor::Intersection(id),
                    (None, Some(v)) => Anchor::Vertices(v.clone()),
                    (None, None) => unreachable!("checked"),
                };
                WeightSpec::power(self.piece, anchor, self.alpha.unwrap())
            }
            WeightKindName::Tabulated => WeightSpec::tabulated(self.piece, self.values.clone().unwrap()),
        }
    }
}
