//! Stimulus protocols: the sequence of targets a participant is asked to
//! fixate, which doubles as ground truth for scoring and simulation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_at_origin, Aabb, SceneGeometry, Sphere, Vec3};

/// Eye height of a seated participant; targets are centered on it.
pub const DEFAULT_VIEWER_ORIGIN: Vec3 = Vec3::new(0.0, 1.2, 0.0);
pub const DEFAULT_CUBE_CENTER: Vec3 = Vec3::new(0.0, 1.2, 2.2);
pub const DEFAULT_CUBE_SIDE: f64 = 1.6;
pub const DEFAULT_DWELL_MS: f64 = 1500.0;
pub const DEFAULT_TARGET_MOVES: usize = 20;
/// Distance from the viewer to every wall of the default room.
pub const DEFAULT_ROOM_HALF_EXTENT: f64 = 4.9;
pub const DEFAULT_SPHERE_RADIUS: f64 = 0.01;

/// Tolerance for the contiguity of consecutive dwell windows.
const ONSET_TOLERANCE_MS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// One sphere visible at a time, jumping to a new random position.
    SingleTarget,
    /// All spheres visible; one at a time is highlighted as the target.
    MultiTarget,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::SingleTarget => "single-target",
            TaskKind::MultiTarget => "multi-target",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-target" => Ok(TaskKind::SingleTarget),
            "multi" | "multi-target" => Ok(TaskKind::MultiTarget),
            other => Err(Error::InvalidArgument(format!("unknown task kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusTarget {
    pub position: Vec3,
    pub onset_ms: f64,
    pub dwell_ms: f64,
}

impl StimulusTarget {
    pub fn end_ms(&self) -> f64 {
        self.onset_ms + self.dwell_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusProtocol {
    pub task_kind: TaskKind,
    pub viewer_origin: Vec3,
    #[serde(flatten)]
    pub scene: SceneGeometry,
    pub targets: Vec<StimulusTarget>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusSaccade {
    pub from_index: usize,
    pub to_index: usize,
    /// Degrees, measured at the viewer origin.
    pub amplitude: f64,
    /// Set when the two targets coincide and the amplitude is zero.
    pub degenerate: bool,
}

impl StimulusProtocol {
    /// Checks the structural invariants: ordered contiguous dwell windows,
    /// positive dwell, everything inside the room.
    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidConfiguration("protocol has no targets".into()));
        }
        if !self.scene.room.contains(self.viewer_origin) {
            return Err(Error::InvalidConfiguration(
                "viewer origin lies outside the room".into(),
            ));
        }
        for (k, target) in self.targets.iter().enumerate() {
            if !(target.dwell_ms > 0.0) || !target.onset_ms.is_finite() {
                return Err(Error::InvalidConfiguration(format!(
                    "target {k} has non-positive dwell or non-finite onset"
                )));
            }
            if !self.scene.room.contains(target.position) {
                return Err(Error::InvalidConfiguration(format!(
                    "target {k} at {:?} lies outside the room",
                    target.position
                )));
            }
            if k > 0 {
                let expected = self.targets[k - 1].end_ms();
                if (target.onset_ms - expected).abs() > ONSET_TOLERANCE_MS {
                    return Err(Error::InvalidConfiguration(format!(
                        "target {k} onset {} does not follow the previous dwell ending at {expected}",
                        target.onset_ms
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn start_ms(&self) -> f64 {
        self.targets.first().map_or(0.0, |t| t.onset_ms)
    }

    pub fn end_ms(&self) -> f64 {
        self.targets.last().map_or(0.0, StimulusTarget::end_ms)
    }

    pub fn total_dwell_ms(&self) -> f64 {
        self.targets.iter().map(|t| t.dwell_ms).sum()
    }

    /// Index of the target on display at `time_ms`. Times before the first
    /// onset map to the first target and times after the end to the last.
    pub fn target_at(&self, time_ms: f64) -> usize {
        let after = self.targets.partition_point(|t| t.onset_ms <= time_ms);
        after.saturating_sub(1).min(self.targets.len().saturating_sub(1))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let protocol: StimulusProtocol = serde_json::from_str(text)?;
        protocol.validate()?;
        Ok(protocol)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One stimulus saccade per consecutive target pair, amplitudes in degrees
/// at the viewer origin.
pub fn stimulus_saccades(protocol: &StimulusProtocol) -> Result<Vec<StimulusSaccade>> {
    protocol
        .targets
        .windows(2)
        .enumerate()
        .map(|(k, pair)| {
            let amplitude = angle_at_origin(protocol.viewer_origin, pair[0].position, pair[1].position)?;
            Ok(StimulusSaccade {
                from_index: k,
                to_index: k + 1,
                amplitude,
                degenerate: amplitude == 0.0,
            })
        })
        .collect()
}

/// Parameters for [`generate_protocol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub task_kind: TaskKind,
    pub seed: u64,
    /// Number of random positions after the central start target.
    pub n_targets: usize,
    pub dwell_ms: f64,
    pub cube_center: Vec3,
    pub cube_side: f64,
    pub sphere_radius: f64,
    pub viewer_origin: Vec3,
    /// Defaults to a cube of half-side 4.9 m centered on the viewer.
    pub room: Option<Aabb>,
}

impl ProtocolConfig {
    pub fn new(task_kind: TaskKind, seed: u64) -> Self {
        ProtocolConfig {
            task_kind,
            seed,
            n_targets: DEFAULT_TARGET_MOVES,
            dwell_ms: DEFAULT_DWELL_MS,
            cube_center: DEFAULT_CUBE_CENTER,
            cube_side: DEFAULT_CUBE_SIDE,
            sphere_radius: DEFAULT_SPHERE_RADIUS,
            viewer_origin: DEFAULT_VIEWER_ORIGIN,
            room: None,
        }
    }
}

pub fn default_room(viewer_origin: Vec3) -> Aabb {
    Aabb::cube(viewer_origin, DEFAULT_ROOM_HALF_EXTENT)
}

/// Random-target protocol: a start target at the cube center followed by
/// `n_targets` positions drawn uniformly inside the cube.
///
/// Single-target sessions visit the positions in draw order. Multi-target
/// sessions show every sphere at once and highlight them in a seeded random
/// order that starts from the central sphere.
pub fn generate_protocol(config: &ProtocolConfig) -> Result<StimulusProtocol> {
    if config.n_targets < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "at least 2 targets are required, got {}",
            config.n_targets
        )));
    }
    if !(config.dwell_ms > 0.0) || !(config.cube_side > 0.0) || !(config.sphere_radius > 0.0) {
        return Err(Error::InvalidConfiguration(
            "dwell, cube side and sphere radius must be positive".into(),
        ));
    }
    let room = config.room.unwrap_or_else(|| default_room(config.viewer_origin));
    let half = Vec3::new(config.cube_side, config.cube_side, config.cube_side) * 0.5;
    if !room.contains(config.cube_center - half) || !room.contains(config.cube_center + half) {
        return Err(Error::InvalidConfiguration(
            "stimulus cube extends outside the room".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut positions = Vec::with_capacity(config.n_targets + 1);
    positions.push(config.cube_center);
    for _ in 0..config.n_targets {
        let mut draw = || -> f64 { Open01.sample(&mut rng) };
        let offset = Vec3::new(draw() - 0.5, draw() - 0.5, draw() - 0.5) * config.cube_side;
        positions.push(config.cube_center + offset);
    }

    let order: Vec<usize> = match config.task_kind {
        TaskKind::SingleTarget => (0..positions.len()).collect(),
        TaskKind::MultiTarget => {
            let mut rest: Vec<usize> = (1..positions.len()).collect();
            rest.shuffle(&mut rng);
            std::iter::once(0).chain(rest).collect()
        }
    };

    let targets = order
        .iter()
        .enumerate()
        .map(|(k, &i)| StimulusTarget {
            position: positions[i],
            onset_ms: k as f64 * config.dwell_ms,
            dwell_ms: config.dwell_ms,
        })
        .collect();
    let spheres = positions
        .iter()
        .map(|&center| Sphere {
            center,
            radius: config.sphere_radius,
        })
        .collect();

    let protocol = StimulusProtocol {
        task_kind: config.task_kind,
        viewer_origin: config.viewer_origin,
        scene: SceneGeometry { room, spheres },
        targets,
    };
    protocol.validate()?;
    Ok(protocol)
}
