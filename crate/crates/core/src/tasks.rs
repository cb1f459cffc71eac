//! Synthetic classification tasks.
//!
//! Five episode generators over the input square `[-1, 1]^2`, all emitting
//! two-channel episodes of `episode_steps` frames:
//!
//! * **line** — class 1 where `x0 + x1 > 0` (linearly separable);
//! * **circle** — class 1 inside the origin-centered disk of radius
//!   `sqrt(2 / pi)`, which covers exactly half the square's area;
//! * **xor** — class 1 where `x0 * x1 > 0` (equal signs);
//! * **patches** — a `grid x grid` checkerboard whose cells are assigned to
//!   `classes` classes by a seeded, count-balanced shuffle;
//! * **spatiotemporal** — three ternary prototype sequences plus uniform
//!   noise; the only task whose frames actually vary in time.
//!
//! The four spatial tasks draw a point per episode and repeat it for every
//! frame, so class frequencies are balanced *statistically* (the boundary
//! geometries split the square's area evenly). Patches with cell counts not
//! divisible by the class count, and the spatiotemporal task, instead draw a
//! count-balanced shuffled label list and generate episodes to match, so
//! their class counts are exact to within one episode.
//!
//! Tasks with sampled structure (patch layout, prototypes) are split into
//! [`TaskKind::instantiate`], which fixes the structure from one stream, and
//! [`TaskInstance::generate`], which draws episodes from another. Training
//! and test sets generated from the same instance therefore share their
//! geometry while remaining independent draws — generating them from two
//! unrelated streams directly would hand the classifier two different tasks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prng::{RngStream, STREAM_EPISODES, STREAM_TASK_STRUCTURE};

/// Episodes produced by a single dataset draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `episode_steps x channels` frame matrix; row `t` is the frame fed to
    /// the network at relative step `t`.
    pub frames: DMatrix<f64>,
    /// Class index in `0..class_count`.
    pub label: usize,
}

/// A labeled set of episodes from one generator call.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub kind: TaskKind,
    pub class_count: usize,
    pub channel_count: usize,
    pub episode_steps: usize,
}

impl Dataset {
    /// Number of episodes.
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    /// True when the dataset holds no episodes.
    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Episode labels in order.
    pub fn labels(&self) -> Vec<usize> {
        self.episodes.iter().map(|e| e.label).collect()
    }

    /// All frames concatenated in episode order: `(episodes * steps) x channels`.
    pub fn concat_frames(&self) -> DMatrix<f64> {
        let rows = self.len() * self.episode_steps;
        let mut out = DMatrix::zeros(rows, self.channel_count);
        for (e, ep) in self.episodes.iter().enumerate() {
            out.rows_mut(e * self.episode_steps, self.episode_steps).copy_from(&ep.frames);
        }
        out
    }

    /// Fraction of episodes carrying each label.
    pub fn class_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.class_count];
        for e in &self.episodes {
            counts[e.label] += 1;
        }
        counts.iter().map(|&c| c as f64 / self.len().max(1) as f64).collect()
    }

    /// One input point per episode (`episodes x channels`) for tasks whose
    /// frames are constant in time; rejects time-varying tasks, where no
    /// single point represents an episode.
    pub fn episode_points(&self) -> Result<DMatrix<f64>> {
        if !self.kind.is_spatial() {
            return Err(Error::invalid(format!(
                "{} episodes vary over time and cannot be reduced to points",
                self.kind.name()
            )));
        }
        let mut out = DMatrix::zeros(self.len(), self.channel_count);
        for (e, ep) in self.episodes.iter().enumerate() {
            out.row_mut(e).copy_from(&ep.frames.row(0));
        }
        Ok(out)
    }
}

/// Task family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Line,
    Circle,
    Xor,
    Patches { grid: usize, classes: usize },
    Spatiotemporal { eta: f64, zero_tail: usize },
}

/// Shared parameters of the spatiotemporal task: number of prototype
/// classes and input channels.
pub const SPATIOTEMPORAL_CLASSES: usize = 3;
/// Input channels of every task.
pub const TASK_CHANNELS: usize = 2;
/// Retry budget when sampling mutually distinct prototypes.
const PROTOTYPE_RETRIES: usize = 1000;
/// Retry budget per episode when rejection-matching a target patch class.
const PATCH_POSITION_RETRIES: usize = 10_000;

impl TaskKind {
    /// Canonical lowercase name (matches the CLI's `--task` values).
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Line => "line",
            TaskKind::Circle => "circle",
            TaskKind::Xor => "xor",
            TaskKind::Patches { .. } => "patches",
            TaskKind::Spatiotemporal { .. } => "spatiotemporal",
        }
    }

    /// Number of classes this task distinguishes.
    pub fn class_count(&self) -> usize {
        match self {
            TaskKind::Line | TaskKind::Circle | TaskKind::Xor => 2,
            TaskKind::Patches { classes, .. } => *classes,
            TaskKind::Spatiotemporal { .. } => SPATIOTEMPORAL_CLASSES,
        }
    }

    /// Number of input channels (two for every task).
    pub fn channel_count(&self) -> usize {
        TASK_CHANNELS
    }

    /// True for tasks whose episodes are a constant point in the square.
    pub fn is_spatial(&self) -> bool {
        !matches!(self, TaskKind::Spatiotemporal { .. })
    }

    /// Checks the task parameters.
    pub fn validate(&self, episode_steps: usize) -> Result<()> {
        if episode_steps == 0 {
            return Err(Error::invalid("episode length must be positive"));
        }
        match *self {
            TaskKind::Patches { grid, classes } => {
                if grid < 2 {
                    return Err(Error::invalid(format!("patches grid must be >= 2, got {grid}")));
                }
                if !(2..=3).contains(&classes) {
                    return Err(Error::invalid(format!("patches supports 2 or 3 classes, got {classes}")));
                }
                Ok(())
            }
            TaskKind::Spatiotemporal { eta, zero_tail } => {
                if !(eta.is_finite() && eta >= 0.0) {
                    return Err(Error::invalid(format!("noise amplitude must be finite and >= 0, got {eta}")));
                }
                if zero_tail >= episode_steps {
                    return Err(Error::invalid(format!(
                        "zero tail of {zero_tail} frames leaves no free frames in episodes of {episode_steps}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Fixes the task's sampled structure from the stream's `task-structure`
    /// sub-stream. The boundary tasks have fixed geometry and consume no
    /// draws.
    pub fn instantiate(&self, episode_steps: usize, stream: &RngStream) -> Result<TaskInstance> {
        self.validate(episode_steps)?;
        let mut structure = stream.derive(STREAM_TASK_STRUCTURE);
        let detail = match *self {
            TaskKind::Line => InstanceDetail::Boundary,
            TaskKind::Circle => InstanceDetail::Boundary,
            TaskKind::Xor => InstanceDetail::Boundary,
            TaskKind::Patches { grid, classes } => {
                InstanceDetail::Patches(PatchLayout::sample(grid, classes, &mut structure)?)
            }
            TaskKind::Spatiotemporal { eta, zero_tail } => InstanceDetail::Prototypes(
                PrototypeSet::sample(episode_steps, eta, zero_tail, &mut structure)?,
            ),
        };
        Ok(TaskInstance { kind: *self, episode_steps, detail })
    }
}

/// Class assignment of a sampled patches layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLayout {
    pub grid: usize,
    pub classes: usize,
    /// Row-major cell classes: cell `(i, j)` (cell `i` along `x0`, `j` along
    /// `x1`) is entry `i * grid + j`.
    pub cell_class: Vec<usize>,
}

impl PatchLayout {
    /// Count-balanced random assignment: every class gets `floor(g^2 / K)`
    /// or `ceil(g^2 / K)` cells, placement decided by one seeded shuffle.
    fn sample(grid: usize, classes: usize, stream: &mut RngStream) -> Result<Self> {
        let cells = grid * grid;
        let mut cell_class: Vec<usize> = (0..cells).map(|c| c % classes).collect();
        stream.shuffle(&mut cell_class)?;
        Ok(PatchLayout { grid, classes, cell_class })
    }

    /// Cell class at a point; cell boundaries belong to the lower-index cell.
    pub fn class_at(&self, x0: f64, x1: f64) -> usize {
        let i = cell_index(x0, self.grid);
        let j = cell_index(x1, self.grid);
        self.cell_class[i * self.grid + j]
    }

    /// True when the cell counts divide evenly among the classes, making
    /// uniform position sampling area-balanced.
    fn area_balanced(&self) -> bool {
        (self.grid * self.grid) % self.classes == 0
    }
}

/// Grid cell along one axis; boundary values resolve toward the lower index.
fn cell_index(x: f64, grid: usize) -> usize {
    let v = (x + 1.0) / 2.0 * grid as f64;
    let cell = (v.ceil() as isize - 1).max(0) as usize;
    cell.min(grid - 1)
}

/// Sampled prototype sequences of the spatiotemporal task.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    /// One `episode_steps x channels` ternary matrix per class.
    pub prototypes: Vec<DMatrix<f64>>,
    /// Half-width of the uniform noise added around a prototype.
    pub eta: f64,
    /// Number of trailing frames pinned to zero in every prototype.
    pub zero_tail: usize,
}

impl PrototypeSet {
    /// Samples ternary prototypes until every pair differs in at least
    /// `ceil(steps * channels / 3)` entries; gives up after a fixed retry
    /// budget when the constraint is unreachable.
    fn sample(episode_steps: usize, eta: f64, zero_tail: usize, stream: &mut RngStream) -> Result<Self> {
        let required = (episode_steps * TASK_CHANNELS).div_ceil(3);
        for _ in 0..PROTOTYPE_RETRIES {
            let mut prototypes = Vec::with_capacity(SPATIOTEMPORAL_CLASSES);
            for _ in 0..SPATIOTEMPORAL_CLASSES {
                let mut p = DMatrix::zeros(episode_steps, TASK_CHANNELS);
                for t in 0..episode_steps - zero_tail {
                    for c in 0..TASK_CHANNELS {
                        p[(t, c)] = stream.next_index(3)? as f64 - 1.0;
                    }
                }
                prototypes.push(p);
            }
            let distinct = (0..prototypes.len()).all(|a| {
                (a + 1..prototypes.len()).all(|b| {
                    let differing = prototypes[a]
                        .iter()
                        .zip(prototypes[b].iter())
                        .filter(|(x, y)| x != y)
                        .count();
                    differing >= required
                })
            });
            if distinct {
                return Ok(PrototypeSet { prototypes, eta, zero_tail });
            }
        }
        Err(Error::Generation(format!(
            "no prototype set with pairwise distance >= {required} found in {PROTOTYPE_RETRIES} attempts"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum InstanceDetail {
    /// Fixed analytic boundary (line, circle, xor).
    Boundary,
    Patches(PatchLayout),
    Prototypes(PrototypeSet),
}

/// A task with its structure fixed, ready to emit any number of datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    kind: TaskKind,
    episode_steps: usize,
    detail: InstanceDetail,
}

/// Squared radius of the area-balanced circle boundary: the disk covers half
/// of the `[-1, 1]^2` square, so `pi r^2 = 2`.
pub const CIRCLE_RADIUS_SQUARED: f64 = 2.0 / std::f64::consts::PI;

impl TaskInstance {
    /// Task family this instance realizes.
    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    /// Sampled patch layout, when this is a patches instance.
    pub fn patch_layout(&self) -> Option<&PatchLayout> {
        match &self.detail {
            InstanceDetail::Patches(l) => Some(l),
            _ => None,
        }
    }

    /// Sampled prototypes, when this is a spatiotemporal instance.
    pub fn prototype_set(&self) -> Option<&PrototypeSet> {
        match &self.detail {
            InstanceDetail::Prototypes(p) => Some(p),
            _ => None,
        }
    }

    /// Draws `n_episodes` labeled episodes from the stream's `episodes`
    /// sub-stream. Pure in `(self, n_episodes, stream)`.
    pub fn generate(&self, n_episodes: usize, stream: &RngStream) -> Result<Dataset> {
        if n_episodes == 0 {
            return Err(Error::invalid("datasets need at least one episode"));
        }
        let mut draws = stream.derive(STREAM_EPISODES);
        let episodes = match &self.detail {
            InstanceDetail::Boundary => self.generate_boundary(n_episodes, &mut draws)?,
            InstanceDetail::Patches(layout) => {
                if layout.area_balanced() {
                    self.generate_patches_uniform(layout, n_episodes, &mut draws)?
                } else {
                    self.generate_patches_matched(layout, n_episodes, &mut draws)?
                }
            }
            InstanceDetail::Prototypes(set) => self.generate_prototype_episodes(set, n_episodes, &mut draws)?,
        };
        Ok(Dataset {
            episodes,
            kind: self.kind,
            class_count: self.kind.class_count(),
            channel_count: TASK_CHANNELS,
            episode_steps: self.episode_steps,
        })
    }

    fn constant_episode(&self, x0: f64, x1: f64, label: usize) -> Episode {
        let frames = DMatrix::from_fn(self.episode_steps, TASK_CHANNELS, |_, c| if c == 0 { x0 } else { x1 });
        Episode { frames, label }
    }

    fn generate_boundary(&self, n_episodes: usize, draws: &mut RngStream) -> Result<Vec<Episode>> {
        let mut episodes = Vec::with_capacity(n_episodes);
        for _ in 0..n_episodes {
            let x0 = draws.uniform(-1.0, 1.0)?;
            let x1 = draws.uniform(-1.0, 1.0)?;
            let label = match self.kind {
                TaskKind::Line => (x0 + x1 > 0.0) as usize,
                TaskKind::Circle => (x0 * x0 + x1 * x1 < CIRCLE_RADIUS_SQUARED) as usize,
                TaskKind::Xor => (x0 * x1 > 0.0) as usize,
                _ => unreachable!("boundary generation is only used for line/circle/xor"),
            };
            episodes.push(self.constant_episode(x0, x1, label));
        }
        Ok(episodes)
    }

    fn generate_patches_uniform(
        &self,
        layout: &PatchLayout,
        n_episodes: usize,
        draws: &mut RngStream,
    ) -> Result<Vec<Episode>> {
        let mut episodes = Vec::with_capacity(n_episodes);
        for _ in 0..n_episodes {
            let x0 = draws.uniform(-1.0, 1.0)?;
            let x1 = draws.uniform(-1.0, 1.0)?;
            episodes.push(self.constant_episode(x0, x1, layout.class_at(x0, x1)));
        }
        Ok(episodes)
    }

    /// Unequal cell counts: draw a count-balanced shuffled label list, then
    /// rejection-sample each episode's position inside its target class.
    fn generate_patches_matched(
        &self,
        layout: &PatchLayout,
        n_episodes: usize,
        draws: &mut RngStream,
    ) -> Result<Vec<Episode>> {
        let labels = balanced_labels(n_episodes, layout.classes, draws)?;
        let mut episodes = Vec::with_capacity(n_episodes);
        for label in labels {
            let mut placed = false;
            for _ in 0..PATCH_POSITION_RETRIES {
                let x0 = draws.uniform(-1.0, 1.0)?;
                let x1 = draws.uniform(-1.0, 1.0)?;
                if layout.class_at(x0, x1) == label {
                    episodes.push(self.constant_episode(x0, x1, label));
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!(
                    "failed to place a class-{label} episode in {PATCH_POSITION_RETRIES} position draws"
                )));
            }
        }
        Ok(episodes)
    }

    fn generate_prototype_episodes(
        &self,
        set: &PrototypeSet,
        n_episodes: usize,
        draws: &mut RngStream,
    ) -> Result<Vec<Episode>> {
        let labels = balanced_labels(n_episodes, SPATIOTEMPORAL_CLASSES, draws)?;
        let mut episodes = Vec::with_capacity(n_episodes);
        for label in labels {
            let mut frames = set.prototypes[label].clone();
            if set.eta > 0.0 {
                for v in frames.iter_mut() {
                    *v = (*v + draws.uniform(-set.eta, set.eta)?).clamp(-1.0, 1.0);
                }
            }
            episodes.push(Episode { frames, label });
        }
        Ok(episodes)
    }
}

/// Label list with exact per-class counts (within one episode), in seeded
/// shuffled order so the label sequence carries no positional information.
fn balanced_labels(n_episodes: usize, classes: usize, draws: &mut RngStream) -> Result<Vec<usize>> {
    let mut labels: Vec<usize> = (0..n_episodes).map(|e| e % classes).collect();
    draws.shuffle(&mut labels)?;
    Ok(labels)
}

/// Line task: class 1 above the anti-diagonal `x0 + x1 = 0`.
pub fn gen_line(n_episodes: usize, episode_steps: usize, stream: &RngStream) -> Result<Dataset> {
    TaskKind::Line.instantiate(episode_steps, stream)?.generate(n_episodes, stream)
}

/// Circle task: class 1 inside the half-area disk around the origin.
pub fn gen_circle(n_episodes: usize, episode_steps: usize, stream: &RngStream) -> Result<Dataset> {
    TaskKind::Circle.instantiate(episode_steps, stream)?.generate(n_episodes, stream)
}

/// XOR task: class 1 in the quadrants where both coordinates share a sign.
pub fn gen_xor(n_episodes: usize, episode_steps: usize, stream: &RngStream) -> Result<Dataset> {
    TaskKind::Xor.instantiate(episode_steps, stream)?.generate(n_episodes, stream)
}

/// Patches task with a freshly sampled layout. For a train/test pair sharing
/// one layout, use [`TaskKind::instantiate`] and generate twice.
pub fn gen_patches(
    n_episodes: usize,
    episode_steps: usize,
    grid: usize,
    classes: usize,
    stream: &RngStream,
) -> Result<Dataset> {
    TaskKind::Patches { grid, classes }.instantiate(episode_steps, stream)?.generate(n_episodes, stream)
}

/// Spatiotemporal task with freshly sampled prototypes. For a train/test
/// pair sharing prototypes, use [`TaskKind::instantiate`] and generate twice.
pub fn gen_spatiotemporal(
    n_episodes: usize,
    episode_steps: usize,
    eta: f64,
    zero_tail: usize,
    stream: &RngStream,
) -> Result<Dataset> {
    TaskKind::Spatiotemporal { eta, zero_tail }
        .instantiate(episode_steps, stream)?
        .generate(n_episodes, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T: usize = 6;

    #[test]
    fn generation_is_deterministic() {
        let stream = RngStream::new(101).derive("task-train");
        assert_eq!(gen_line(50, T, &stream).unwrap(), gen_line(50, T, &stream).unwrap());
        assert_eq!(
            gen_spatiotemporal(50, T, 0.4, 1, &stream).unwrap(),
            gen_spatiotemporal(50, T, 0.4, 1, &stream).unwrap()
        );
    }

    #[test]
    fn spatial_tasks_emit_constant_frames() {
        let stream = RngStream::new(7);
        for data in [
            gen_line(20, T, &stream).unwrap(),
            gen_circle(20, T, &stream).unwrap(),
            gen_xor(20, T, &stream).unwrap(),
            gen_patches(20, T, 3, 3, &stream).unwrap(),
        ] {
            for ep in &data.episodes {
                for t in 1..T {
                    assert_eq!(ep.frames.row(t), ep.frames.row(0));
                }
            }
            let points = data.episode_points().unwrap();
            assert_eq!(points.shape(), (20, 2));
        }
    }

    #[test]
    fn labels_match_the_boundary_definitions() {
        let stream = RngStream::new(8);
        for data in [gen_line(200, T, &stream).unwrap(), gen_circle(200, T, &stream).unwrap(), gen_xor(200, T, &stream).unwrap()] {
            for ep in &data.episodes {
                let (x0, x1) = (ep.frames[(0, 0)], ep.frames[(0, 1)]);
                let expected = match data.kind {
                    TaskKind::Line => (x0 + x1 > 0.0) as usize,
                    TaskKind::Circle => ((x0 * x0 + x1 * x1) < CIRCLE_RADIUS_SQUARED) as usize,
                    TaskKind::Xor => (x0 * x1 > 0.0) as usize,
                    _ => unreachable!(),
                };
                assert_eq!(ep.label, expected);
            }
        }
    }

    #[test]
    fn area_balanced_tasks_hit_half_frequency() {
        let stream = RngStream::new(9).derive("task-train");
        for (name, data) in [
            ("line", gen_line(10_000, 1, &stream).unwrap()),
            ("circle", gen_circle(10_000, 1, &stream).unwrap()),
            ("xor", gen_xor(10_000, 1, &stream).unwrap()),
        ] {
            let f = data.class_frequencies();
            assert!((f[1] - 0.5).abs() < 0.015, "{name} class-1 frequency {}", f[1]);
        }
    }

    #[test]
    fn patch_layouts_are_count_balanced_and_shared() {
        let kind = TaskKind::Patches { grid: 3, classes: 3 };
        let base = RngStream::new(10);
        let instance = kind.instantiate(T, &base).unwrap();
        let layout = instance.patch_layout().unwrap();
        let mut counts = [0usize; 3];
        for &c in &layout.cell_class {
            counts[c] += 1;
        }
        assert_eq!(counts, [3, 3, 3]);
        // Same structure stream, same layout; episode stream does not matter.
        let again = kind.instantiate(T, &base).unwrap();
        assert_eq!(layout, again.patch_layout().unwrap());
        let train = instance.generate(100, &base.derive("task-train")).unwrap();
        let test = instance.generate(100, &base.derive("task-test")).unwrap();
        assert_ne!(train, test, "train and test must be independent draws");
        for data in [&train, &test] {
            for ep in &data.episodes {
                assert_eq!(ep.label, layout.class_at(ep.frames[(0, 0)], ep.frames[(0, 1)]));
            }
        }
    }

    #[test]
    fn divisible_patches_balance_statistically() {
        let data = gen_patches(10_000, 1, 3, 3, &RngStream::new(11)).unwrap();
        for (k, f) in data.class_frequencies().iter().enumerate() {
            assert!((f - 1.0 / 3.0).abs() < 0.02, "class {k} frequency {f}");
        }
    }

    #[test]
    fn indivisible_patches_balance_exactly() {
        // 9 cells over 2 classes cannot balance by area (5 vs 4 cells), so
        // episode labels are drawn balanced and positions matched to them.
        let data = gen_patches(1001, 1, 3, 2, &RngStream::new(12)).unwrap();
        let mut counts = [0usize; 2];
        for ep in &data.episodes {
            counts[ep.label] += 1;
        }
        assert_eq!(counts[0] + counts[1], 1001);
        assert!(counts[0].abs_diff(counts[1]) <= 1, "counts {counts:?}");
        // Labels still agree with the layout geometry.
        let layout = TaskKind::Patches { grid: 3, classes: 2 }
            .instantiate(1, &RngStream::new(12))
            .unwrap()
            .patch_layout()
            .unwrap()
            .clone();
        for ep in &data.episodes {
            assert_eq!(ep.label, layout.class_at(ep.frames[(0, 0)], ep.frames[(0, 1)]));
        }
    }

    #[test]
    fn cell_boundaries_resolve_to_the_lower_cell() {
        assert_eq!(cell_index(-1.0, 3), 0);
        assert_eq!(cell_index(1.0, 3), 2);
        // -1/3 lies exactly between cells 0 and 1 of a 3-grid.
        assert_eq!(cell_index(-1.0 / 3.0, 3), 0);
        assert_eq!(cell_index(0.0, 2), 0);
        assert_eq!(cell_index(f64::EPSILON, 2), 1);
    }

    #[test]
    fn prototypes_are_ternary_distinct_and_zero_tailed() {
        let instance = TaskKind::Spatiotemporal { eta: 0.4, zero_tail: 1 }
            .instantiate(T, &RngStream::new(13))
            .unwrap();
        let set = instance.prototype_set().unwrap();
        assert_eq!(set.prototypes.len(), 3);
        let required = (T * 2).div_ceil(3);
        for (a, p) in set.prototypes.iter().enumerate() {
            assert!(p.iter().all(|v| [-1.0, 0.0, 1.0].contains(v)));
            assert!(p.row(T - 1).iter().all(|&v| v == 0.0), "terminal frame must be zero");
            for q in set.prototypes.iter().skip(a + 1) {
                let d = p.iter().zip(q.iter()).filter(|(x, y)| x != y).count();
                assert!(d >= required, "prototype distance {d} below {required}");
            }
        }
    }

    #[test]
    fn spatiotemporal_episodes_are_noisy_clipped_prototypes() {
        let base = RngStream::new(14);
        let kind = TaskKind::Spatiotemporal { eta: 0.4, zero_tail: 1 };
        let instance = kind.instantiate(T, &base).unwrap();
        let set = instance.prototype_set().unwrap().clone();
        let data = instance.generate(600, &base.derive("task-train")).unwrap();
        let mut counts = [0usize; 3];
        for ep in &data.episodes {
            counts[ep.label] += 1;
            assert!(ep.frames.iter().all(|v| (-1.0..=1.0).contains(v)));
            for (v, p) in ep.frames.iter().zip(set.prototypes[ep.label].iter()) {
                assert!((v - p).abs() <= 0.4 + 1e-12, "noise exceeded eta: {v} vs {p}");
            }
        }
        assert_eq!(counts, [200, 200, 200], "balanced label draw");
        // Terminal-frame entries fluctuate around the prototype zero.
        let big = instance.generate(9_999, &base.derive("task-test")).unwrap();
        for class in 0..3 {
            for c in 0..2 {
                let (mut sum, mut n) = (0.0, 0);
                for ep in big.episodes.iter().filter(|e| e.label == class) {
                    sum += ep.frames[(T - 1, c)];
                    n += 1;
                }
                let mean = sum / n as f64;
                assert!(mean.abs() < 0.01, "class {class} channel {c} terminal mean {mean}");
            }
        }
    }

    #[test]
    fn zero_noise_reproduces_prototypes_exactly() {
        let base = RngStream::new(15);
        let instance = TaskKind::Spatiotemporal { eta: 0.0, zero_tail: 1 }.instantiate(T, &base).unwrap();
        let set = instance.prototype_set().unwrap().clone();
        let data = instance.generate(30, &base).unwrap();
        for ep in &data.episodes {
            assert_eq!(ep.frames, set.prototypes[ep.label]);
        }
    }

    #[test]
    fn impossible_prototype_distance_fails_cleanly() {
        // One free frame gives at most 2 differing entries, below the
        // required ceil(12 / 3) = 4: the retry budget must run out.
        let result = TaskKind::Spatiotemporal { eta: 0.4, zero_tail: 5 }.instantiate(6, &RngStream::new(16));
        assert!(matches!(result, Err(Error::Generation(_))), "got {result:?}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let s = RngStream::new(0);
        assert!(gen_patches(10, 1, 1, 2, &s).is_err(), "grid 1");
        assert!(gen_patches(10, 1, 3, 4, &s).is_err(), "4 classes");
        assert!(gen_spatiotemporal(10, 6, -0.1, 1, &s).is_err(), "negative eta");
        assert!(gen_spatiotemporal(10, 6, 0.4, 6, &s).is_err(), "tail fills episode");
        assert!(gen_line(0, 6, &s).is_err(), "empty dataset");
        assert!(gen_line(10, 0, &s).is_err(), "empty episodes");
        assert!(
            gen_spatiotemporal(10, 6, 0.4, 1, &s).unwrap().episode_points().is_err(),
            "time-varying task has no point representation"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn all_task_values_stay_in_the_unit_square(
            seed in any::<u64>(),
            pick in 0usize..5,
            n in 1usize..40,
        ) {
            let stream = RngStream::new(seed);
            let kind = match pick {
                0 => TaskKind::Line,
                1 => TaskKind::Circle,
                2 => TaskKind::Xor,
                3 => TaskKind::Patches { grid: 3, classes: 3 },
                _ => TaskKind::Spatiotemporal { eta: 0.4, zero_tail: 1 },
            };
            let data = kind.instantiate(T, &stream).unwrap().generate(n, &stream).unwrap();
            prop_assert_eq!(data.len(), n);
            for ep in &data.episodes {
                prop_assert!(ep.label < kind.class_count());
                prop_assert!(ep.frames.iter().all(|v| (-1.0..=1.0).contains(v)));
            }
        }
    }
}
