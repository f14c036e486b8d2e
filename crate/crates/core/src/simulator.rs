//! Synthetic gaze sessions with known ground truth.
//!
//! A simulated observer looks at each stimulus target, waits out the
//! saccadic latency after the next target appears, then moves to it along a
//! smoothstep great-circle path whose duration follows the main sequence.
//! Output samples use the raw tracker conventions (right-handed, eye-local
//! origin), so they exercise the full ingest path.

use std::io::{Read, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Fixation, Label, LabeledStream};
use crate::error::{Error, Result};
use crate::geometry::{ray_scene_intersection, Ray, Vec3};
use crate::ingest::GazeSample;
use crate::metrics::saccade_duration_ms;
use crate::protocol::{generate_protocol, stimulus_saccades, ProtocolConfig, StimulusProtocol, TaskKind};

const PUPIL_MM: f64 = 3.5;
/// Attempts at finding a miss direction that reaches the far wall.
const FAR_MISS_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Hz.
    pub sample_rate: f64,
    /// Each interval is the nominal period scaled by `1 ± rate_jitter`.
    pub rate_jitter: f64,
    /// RMS angular error of fixation samples, degrees.
    pub angular_noise_sigma: f64,
    /// ms.
    pub saccadic_latency: f64,
    /// Blinks per minute.
    pub blink_rate: f64,
    /// ms.
    pub blink_duration: f64,
    /// Probability that a fixation sample misses the target and hits the far wall.
    pub far_miss_rate: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            sample_rate: 120.0,
            rate_jitter: 0.1,
            angular_noise_sigma: 0.5,
            saccadic_latency: 200.0,
            blink_rate: 10.0,
            blink_duration: 150.0,
            far_miss_rate: 0.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    /// No angular noise, blinks or far misses; sampling jitter is kept.
    pub fn noise_free(seed: u64) -> Self {
        SimulationConfig {
            angular_noise_sigma: 0.0,
            blink_rate: 0.0,
            far_miss_rate: 0.0,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfiguration(what.to_string()));
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad("sample rate must be positive");
        }
        if !(0.0..1.0).contains(&self.rate_jitter) {
            return bad("rate jitter must lie in [0, 1)");
        }
        if !(self.angular_noise_sigma.is_finite() && self.angular_noise_sigma >= 0.0) {
            return bad("angular noise sigma must be non-negative");
        }
        if !(self.saccadic_latency.is_finite() && self.saccadic_latency >= 0.0) {
            return bad("saccadic latency must be non-negative");
        }
        if !(self.blink_rate.is_finite() && self.blink_rate >= 0.0) {
            return bad("blink rate must be non-negative");
        }
        if !(self.blink_duration.is_finite() && self.blink_duration >= 0.0) {
            return bad("blink duration must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.far_miss_rate) {
            return bad("far miss rate must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthLabel {
    Fixation,
    Saccade,
    Blink,
}

impl TruthLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Fixation => "fixation",
            TruthLabel::Saccade => "saccade",
            TruthLabel::Blink => "blink",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Eye movement phase of every sample, blinks ignored.
    pub phase: Vec<Label>,
    pub blink: Vec<bool>,
    /// Target fixated, or being moved to during a saccade.
    pub target_index: Vec<usize>,
    /// One per target, positioned at the target center.
    pub fixations: Vec<Fixation>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    pub fn labels(&self) -> Vec<TruthLabel> {
        self.phase
            .iter()
            .zip(&self.blink)
            .map(|(&p, &b)| match (b, p) {
                (true, _) => TruthLabel::Blink,
                (false, Label::Fixation) => TruthLabel::Fixation,
                (false, Label::Saccade) => TruthLabel::Saccade,
            })
            .collect()
    }

    pub fn saccade_count(&self) -> usize {
        LabeledStream {
            labels: self.phase.clone(),
            fixations: Vec::new(),
        }
        .runs(Label::Saccade)
        .len()
    }

    /// Writes `index,label,target_index`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["index", "label", "target_index"])?;
        for (i, label) in self.labels().into_iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                label.as_str().to_string(),
                self.target_index[i].to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<ground truth writer>", e))?;
        Ok(())
    }

    /// Reads the CSV written by [`GroundTruth::write_csv`]. Fixation tuples
    /// are not stored in the file and come back empty.
    pub fn read_csv<R: Read>(reader: R) -> Result<Vec<(TruthLabel, usize)>> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut out = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let label = match record.get(1) {
                Some("fixation") => TruthLabel::Fixation,
                Some("saccade") => TruthLabel::Saccade,
                Some("blink") => TruthLabel::Blink,
                other => {
                    return Err(Error::Row {
                        line,
                        message: format!("unknown label {other:?}"),
                    })
                }
            };
            let target = record.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Row {
                line,
                message: "bad target index".into(),
            })?;
            out.push((label, target));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub samples: Vec<GazeSample>,
    pub truth: GroundTruth,
}

/// Gaze schedule: fixation on target k over `[fix_start[k], sacc_start[k])`,
/// saccade to k + 1 over `[sacc_start[k], sacc_end[k])`.
struct Schedule {
    fix_start: Vec<f64>,
    sacc_start: Vec<f64>,
    sacc_end: Vec<f64>,
}

impl Schedule {
    fn new(protocol: &StimulusProtocol, latency: f64) -> Result<Self> {
        let saccades = stimulus_saccades(protocol)?;
        let mut fix_start = vec![protocol.start_ms()];
        let mut sacc_start = Vec::with_capacity(saccades.len());
        let mut sacc_end = Vec::with_capacity(saccades.len());
        for (j, s) in saccades.iter().enumerate() {
            let start = protocol.targets[j + 1].onset_ms + latency;
            let end = start + saccade_duration_ms(s.amplitude);
            if start <= fix_start[j] {
                return Err(Error::InfeasibleProtocol(format!(
                    "saccade into target {} starts before the previous one ends",
                    j + 1
                )));
            }
            sacc_start.push(start);
            sacc_end.push(end);
            fix_start.push(end);
        }
        if fix_start[fix_start.len() - 1] >= protocol.end_ms() {
            return Err(Error::InfeasibleProtocol(
                "the last saccade does not finish before the protocol ends".into(),
            ));
        }
        Ok(Schedule {
            fix_start,
            sacc_start,
            sacc_end,
        })
    }

    /// Phase at time `t`: fixation on `k`, or saccade from `k` with progress in [0, 1).
    fn at(&self, t: f64) -> (Label, usize, f64) {
        let k = self.fix_start.partition_point(|&s| s <= t).saturating_sub(1);
        if k < self.sacc_start.len() && t >= self.sacc_start[k] {
            let u = (t - self.sacc_start[k]) / (self.sacc_end[k] - self.sacc_start[k]);
            (Label::Saccade, k, u)
        } else {
            (Label::Fixation, k, 0.0)
        }
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Spherical interpolation between unit vectors.
pub fn slerp(a: Vec3, b: Vec3, s: f64) -> Vec3 {
    let theta = a.dot(b).clamp(-1.0, 1.0).acos();
    if theta < 1e-12 {
        return a;
    }
    let sin = theta.sin();
    a * (((1.0 - s) * theta).sin() / sin) + b * ((s * theta).sin() / sin)
}

/// Two unit vectors completing `d` to an orthonormal basis.
fn tangent_basis(d: Vec3) -> (Vec3, Vec3) {
    let helper = if d.y.abs() < 0.9 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(1.0, 0.0, 0.0)
    };
    let u = d.cross(helper).normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0));
    (u, d.cross(u))
}

/// Rotates unit vector `d` by `angle` radians toward tangent azimuth `phi`.
fn rotate(d: Vec3, angle: f64, phi: f64) -> Vec3 {
    let (u, v) = tangent_basis(d);
    let t = u * phi.cos() + v * phi.sin();
    (d * angle.cos() + t * angle.sin()).normalized().unwrap_or(d)
}

/// Independent normal angular errors on two tangent axes; sigma is the total
/// RMS angle, so each axis gets sigma/√2.
fn jitter<R: Rng>(d: Vec3, sigma_deg: f64, rng: &mut R) -> Vec3 {
    if sigma_deg == 0.0 {
        return d;
    }
    let axis_sigma = sigma_deg.to_radians() / std::f64::consts::SQRT_2;
    let a: f64 = rng.sample::<f64, _>(StandardNormal) * axis_sigma;
    let b: f64 = rng.sample::<f64, _>(StandardNormal) * axis_sigma;
    let angle = a.hypot(b);
    if angle == 0.0 {
        return d;
    }
    rotate(d, angle, b.atan2(a))
}

/// A direction near `d` whose ray passes the target sphere and ends on the far
/// wall, or `None` if no tried azimuth gets there.
fn far_miss<R: Rng>(protocol: &StimulusProtocol, eye: Vec3, target: usize, d: Vec3, rng: &mut R) -> Option<Vec3> {
    let center = protocol.targets[target].position;
    let range = center.distance(eye);
    let radius = protocol
        .scene
        .spheres
        .iter()
        .find(|s| s.center == center)
        .map_or(0.0, |s| s.radius);
    let angular_radius = (radius / range).clamp(0.0, 1.0).asin();
    let far_z = protocol.scene.room.max.z;
    for _ in 0..FAR_MISS_ATTEMPTS {
        let margin = rng.random_range(0.05f64..0.3).to_radians();
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let candidate = rotate(d, angular_radius + margin, phi);
        let ray = Ray::new(eye, candidate).ok()?;
        if ray_scene_intersection(&ray, &protocol.scene).is_ok_and(|p| p.z == far_z) {
            return Some(candidate);
        }
    }
    None
}

fn blink_mask<R: Rng>(times: &[f64], config: &SimulationConfig, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![false; times.len()];
    if config.blink_rate == 0.0 || config.blink_duration == 0.0 || times.is_empty() {
        return mask;
    }
    let gap = Exp::new(config.blink_rate / 60_000.0).expect("positive blink rate");
    let end = times[times.len() - 1];
    let mut t = times[0] + gap.sample(rng);
    while t <= end {
        let stop = t + config.blink_duration;
        let from = times.partition_point(|&s| s < t).max(1);
        let to = times.partition_point(|&s| s < stop);
        for m in mask.iter_mut().take(to).skip(from) {
            *m = true;
        }
        t = stop + gap.sample(rng);
    }
    mask
}

/// Right-handed tracker convention: x negated.
fn to_tracker(v: Vec3) -> Vec3 {
    Vec3::new(0.0 - v.x, v.y, v.z)
}

/// Renders one session for `protocol`. The viewer's head stays at the
/// protocol's viewer origin.
pub fn simulate_session(protocol: &StimulusProtocol, config: &SimulationConfig) -> Result<SimulatedSession> {
    config.validate()?;
    protocol.validate()?;
    let schedule = Schedule::new(protocol, config.saccadic_latency)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let eye = protocol.viewer_origin;
    let directions: Vec<Vec3> = protocol
        .targets
        .iter()
        .map(|t| (t.position - eye).normalized())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InfeasibleProtocol("a target coincides with the viewer origin".into()))?;

    let period = 1000.0 / config.sample_rate;
    let mut times = Vec::new();
    let mut t = protocol.start_ms();
    while t < protocol.end_ms() {
        times.push(t);
        t += period * (1.0 + config.rate_jitter * rng.random_range(-1.0..=1.0));
    }
    let blink = blink_mask(&times, config, &mut rng);

    let n = times.len();
    let mut samples = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut target_index = Vec::with_capacity(n);
    let mut fixation_ranges: Vec<Option<(usize, usize)>> = vec![None; protocol.targets.len()];
    for (i, &t) in times.iter().enumerate() {
        let (label, k, u) = schedule.at(t);
        let direction = match label {
            Label::Saccade => slerp(directions[k], directions[k + 1], smoothstep(u)),
            Label::Fixation => {
                let d = jitter(directions[k], config.angular_noise_sigma, &mut rng);
                if config.far_miss_rate > 0.0 && rng.random::<f64>() < config.far_miss_rate {
                    far_miss(protocol, eye, k, directions[k], &mut rng).unwrap_or(d)
                } else {
                    d
                }
            }
        };
        let target = if label == Label::Saccade { k + 1 } else { k };
        if label == Label::Fixation {
            let range = fixation_ranges[k].get_or_insert((i, i));
            range.1 = i;
        }
        phase.push(label);
        target_index.push(target);
        samples.push(if blink[i] {
            GazeSample {
                headset_position: Some(eye),
                openness_left: Some(0.0),
                openness_right: Some(0.0),
                ..GazeSample::blank(t)
            }
        } else {
            GazeSample {
                pupil_left_mm: Some(PUPIL_MM),
                pupil_right_mm: Some(PUPIL_MM),
                openness_left: Some(1.0),
                openness_right: Some(1.0),
                ..GazeSample::new(t, Vec3::ZERO, to_tracker(direction), eye)
            }
        });
    }

    let fixations = fixation_ranges
        .iter()
        .enumerate()
        .filter_map(|(k, r)| {
            r.map(|(first, last)| Fixation {
                position: protocol.targets[k].position,
                t_start_ms: times[first],
                duration_ms: times[last] - times[first],
                first_index: first,
                last_index: last,
                corrected: false,
                uncorrectable: false,
            })
        })
        .collect();
    Ok(SimulatedSession {
        samples,
        truth: GroundTruth {
            phase,
            blink,
            target_index,
            fixations,
        },
    })
}

/// The ground truth as a classification, with fixations at the target centers.
pub fn oracle_stream(truth: &GroundTruth) -> LabeledStream {
    LabeledStream {
        labels: truth.phase.clone(),
        fixations: truth.fixations.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Matching fixation/saccade labels over non-blink samples.
    pub sample_accuracy: f64,
    /// True fixations at least half covered in time by one detected fixation.
    pub fixation_recall: f64,
}

pub fn label_agreement(truth: &GroundTruth, stream: &LabeledStream) -> Result<Agreement> {
    if truth.len() != stream.labels.len() {
        return Err(Error::Contract(format!(
            "ground truth has {} samples but the stream has {}",
            truth.len(),
            stream.labels.len()
        )));
    }
    let mut matched = 0usize;
    let mut counted = 0usize;
    for i in 0..truth.len() {
        if truth.blink[i] {
            continue;
        }
        counted += 1;
        matched += (truth.phase[i] == stream.labels[i]) as usize;
    }
    let recalled = truth
        .fixations
        .iter()
        .filter(|tf| {
            stream.fixations.iter().any(|df| {
                let overlap = tf.end_ms().min(df.end_ms()) - tf.t_start_ms.max(df.t_start_ms);
                overlap >= 0.5 * tf.duration_ms && overlap > 0.0
            })
        })
        .count();
    Ok(Agreement {
        sample_accuracy: if counted == 0 {
            1.0
        } else {
            matched as f64 / counted as f64
        },
        fixation_recall: if truth.fixations.is_empty() {
            1.0
        } else {
            recalled as f64 / truth.fixations.len() as f64
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub task_kind: TaskKind,
    pub sessions: usize,
    pub seed: u64,
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSession {
    pub id: String,
    pub protocol: StimulusProtocol,
    pub session: SimulatedSession,
}

pub fn session_id(index: usize) -> String {
    format!("session_{index:03}")
}

/// Generates `sessions` protocols and renders each. Session `i` draws its
/// protocol and simulation seeds from the corpus seed, so any session can be
/// regenerated alone.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<CorpusSession>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<(u64, u64)> = (0..config.sessions).map(|_| (rng.next_u64(), rng.next_u64())).collect();
    seeds
        .into_par_iter()
        .enumerate()
        .map(|(i, (protocol_seed, sim_seed))| {
            let protocol = generate_protocol(&ProtocolConfig::new(config.task_kind, protocol_seed))?;
            let session = simulate_session(
                &protocol,
                &SimulationConfig {
                    seed: sim_seed,
                    ..config.simulation
                },
            )?;
            Ok(CorpusSession {
                id: session_id(i),
                protocol,
                session,
            })
        })
        .collect()
}
