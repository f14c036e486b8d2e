//! Fixation/saccade classification.
//!
//! All four algorithms consume preprocessed [`GazePoint`]s and return a
//! [`LabeledStream`]. I-DT, I-VDT and m-IVDT share one grouping engine that
//! keeps a previous fixation group (PFG) and a current fixation group (CFG);
//! they differ only in how a sample joins the CFG and in how a group's
//! representative position is computed.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_at_origin, centroid, ray_plane_intersection, Plane, Ray, Vec3};
use crate::ingest::GazePoint;

/// Default depth (meters) at and beyond which m-IVDT treats a sample as a
/// far-wall miss.
pub const DEFAULT_Z_OUTLIER_THRESHOLD: f64 = 4.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "ivt")]
    Ivt,
    #[serde(rename = "idt")]
    Idt,
    #[serde(rename = "ivdt")]
    Ivdt,
    #[serde(rename = "m-ivdt")]
    Mivdt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ivt, Algorithm::Idt, Algorithm::Ivdt, Algorithm::Mivdt];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Ivt => "ivt",
            Algorithm::Idt => "idt",
            Algorithm::Ivdt => "ivdt",
            Algorithm::Mivdt => "m-ivdt",
        }
    }

    pub fn uses_velocity(self) -> bool {
        self != Algorithm::Idt
    }

    pub fn uses_dispersion(self) -> bool {
        self != Algorithm::Ivt
    }

    pub fn uses_duration(self) -> bool {
        self != Algorithm::Ivt
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ivt" | "i-vt" => Ok(Algorithm::Ivt),
            "idt" | "i-dt" => Ok(Algorithm::Idt),
            "ivdt" | "i-vdt" => Ok(Algorithm::Ivdt),
            "m-ivdt" | "mivdt" => Ok(Algorithm::Mivdt),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// How adjacent surviving groups are compared before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeMode {
    /// First point of the current group against last point of the previous one.
    #[default]
    Boundary,
    /// Centroid against centroid.
    Centroid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// Degrees per second.
    pub velocity_threshold: Option<f64>,
    /// Degrees.
    pub dispersion_threshold: Option<f64>,
    /// Milliseconds.
    pub min_fixation_duration: Option<f64>,
    /// Meters; m-IVDT only.
    pub z_outlier_threshold: f64,
    #[serde(default)]
    pub merge_mode: MergeMode,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            velocity_threshold: None,
            dispersion_threshold: None,
            min_fixation_duration: None,
            z_outlier_threshold: DEFAULT_Z_OUTLIER_THRESHOLD,
            merge_mode: MergeMode::Boundary,
        }
    }
}

impl ClassifierParams {
    pub fn ivt(velocity: f64) -> Self {
        ClassifierParams {
            velocity_threshold: Some(velocity),
            ..Default::default()
        }
    }

    pub fn idt(duration: f64, dispersion: f64) -> Self {
        ClassifierParams {
            dispersion_threshold: Some(dispersion),
            min_fixation_duration: Some(duration),
            ..Default::default()
        }
    }

    /// Parameters for I-VDT and m-IVDT.
    pub fn ivdt(velocity: f64, duration: f64, dispersion: f64) -> Self {
        ClassifierParams {
            velocity_threshold: Some(velocity),
            dispersion_threshold: Some(dispersion),
            min_fixation_duration: Some(duration),
            ..Default::default()
        }
    }

    /// The best-performing thresholds reported for each algorithm on the
    /// reference VR dataset.
    pub fn paper_optimal(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Ivt => Self::ivt(150.0),
            Algorithm::Idt => Self::idt(150.0, 5.75),
            Algorithm::Ivdt => Self::ivdt(140.0, 110.0, 5.75),
            Algorithm::Mivdt => Self::ivdt(140.0, 130.0, 5.75),
        }
    }

    pub fn with_merge_mode(mut self, mode: MergeMode) -> Self {
        self.merge_mode = mode;
        self
    }

    pub fn with_z_threshold(mut self, z: f64) -> Self {
        self.z_outlier_threshold = z;
        self
    }

    /// Checks that every threshold the algorithm reads is set, finite and positive.
    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        fn positive(name: &str, value: Option<f64>) -> Result<f64> {
            match value {
                Some(v) if v.is_finite() && v > 0.0 => Ok(v),
                Some(v) => Err(Error::InvalidConfiguration(format!(
                    "{name} must be finite and positive, got {v}"
                ))),
                None => Err(Error::InvalidConfiguration(format!("{name} is required"))),
            }
        }
        if algorithm.uses_velocity() {
            positive("velocity threshold", self.velocity_threshold)?;
        }
        if algorithm.uses_dispersion() {
            positive("dispersion threshold", self.dispersion_threshold)?;
        }
        if algorithm.uses_duration() {
            positive("minimum fixation duration", self.min_fixation_duration)?;
        }
        if algorithm == Algorithm::Mivdt {
            positive("z outlier threshold", Some(self.z_outlier_threshold))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fixation,
    Saccade,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fixation => "fixation",
            Label::Saccade => "saccade",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    /// Representative position (group centroid), meters.
    pub position: Vec3,
    pub t_start_ms: f64,
    /// Last member timestamp minus first member timestamp.
    pub duration_ms: f64,
    pub first_index: usize,
    pub last_index: usize,
    /// m-IVDT replaced at least one far-wall member before averaging.
    #[serde(default)]
    pub corrected: bool,
    /// m-IVDT found only far-wall members and kept the raw centroid.
    #[serde(default)]
    pub uncorrectable: bool,
}

impl Fixation {
    pub fn end_ms(&self) -> f64 {
        self.t_start_ms + self.duration_ms
    }

    pub fn contains_index(&self, index: usize) -> bool {
        (self.first_index..=self.last_index).contains(&index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub labels: Vec<Label>,
    pub fixations: Vec<Fixation>,
}

impl LabeledStream {
    fn from_fixations(n: usize, fixations: Vec<Fixation>) -> Self {
        let mut labels = vec![Label::Saccade; n];
        for f in &fixations {
            labels[f.first_index..=f.last_index].fill(Label::Fixation);
        }
        LabeledStream { labels, fixations }
    }

    /// Maximal runs of `label` as inclusive index ranges.
    pub fn runs(&self, label: Label) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &l) in self.labels.iter().enumerate() {
            match (l == label, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    out.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.labels.len() - 1));
        }
        out
    }

    pub fn fixation_sample_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Label::Fixation).count()
    }

    /// Index of the fixation containing each sample, if any.
    pub fn fixation_membership(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.labels.len()];
        for (k, f) in self.fixations.iter().enumerate() {
            out[f.first_index..=f.last_index].fill(Some(k));
        }
        out
    }
}

fn non_empty(points: &[GazePoint]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptySession("no gaze points to classify".into()));
    }
    Ok(())
}

fn velocity(points: &[GazePoint], i: usize) -> Result<f64> {
    points[i]
        .velocity
        .ok_or_else(|| Error::Contract(format!("velocity of sample {i} has not been computed")))
}

fn fold_positions(points: &[GazePoint], members: &[usize]) -> Result<Vec3> {
    let positions: Vec<Vec3> = members.iter().map(|&i| points[i].position).collect();
    centroid(&positions)
}

/// Velocity-threshold identification: every maximal run of samples below the
/// threshold is one fixation, however short.
pub fn classify_ivt(points: &[GazePoint], params: &ClassifierParams) -> Result<LabeledStream> {
    non_empty(points)?;
    params.validate(Algorithm::Ivt)?;
    let vel = params.velocity_threshold.unwrap_or_default();
    let mut fixations = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=points.len() {
        let below = i < points.len() && velocity(points, i)? < vel;
        match (below, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let members: Vec<usize> = (s..i).collect();
                fixations.push(Fixation {
                    position: fold_positions(points, &members)?,
                    t_start_ms: points[s].timestamp_ms,
                    duration_ms: points[i - 1].timestamp_ms - points[s].timestamp_ms,
                    first_index: s,
                    last_index: i - 1,
                    corrected: false,
                    uncorrectable: false,
                });
                start = None;
            }
            _ => {}
        }
    }
    Ok(LabeledStream::from_fixations(points.len(), fixations))
}

/// A fixation group. Members are kept in insertion order; the running sum is
/// accumulated in the same order as [`centroid`] so both agree bit for bit.
#[derive(Debug, Clone, Default)]
struct Group {
    members: Vec<usize>,
    sum: Vec3,
}

impl Group {
    fn with(i: usize, points: &[GazePoint]) -> Self {
        let mut g = Group::default();
        g.push(i, points);
        g
    }

    fn push(&mut self, i: usize, points: &[GazePoint]) {
        self.members.push(i);
        self.sum += points[i].position;
    }

    fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn first(&self) -> usize {
        self.members[0]
    }

    fn last(&self) -> usize {
        self.members[self.members.len() - 1]
    }

    fn centroid(&self) -> Vec3 {
        self.sum / self.members.len() as f64
    }

    fn duration(&self, points: &[GazePoint]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        points[self.last()].timestamp_ms - points[self.first()].timestamp_ms
    }

    fn absorb(&mut self, other: Group, points: &[GazePoint]) {
        for i in other.members {
            self.push(i, points);
        }
    }
}

enum Membership {
    Dispersion(f64),
    Velocity(f64),
}

enum Representative {
    Centroid,
    Corrected { z_threshold: f64 },
}

struct GroupingRules {
    membership: Membership,
    dispersion: f64,
    min_duration: f64,
    merge_mode: MergeMode,
    representative: Representative,
}

impl GroupingRules {
    fn joins(&self, points: &[GazePoint], cfg: &Group, i: usize) -> Result<bool> {
        match self.membership {
            Membership::Dispersion(dd) => {
                if cfg.is_empty() {
                    return Ok(true);
                }
                Ok(angle_at_origin(points[i].origin, cfg.centroid(), points[i].position)? < dd)
            }
            Membership::Velocity(vel) => Ok(velocity(points, i)? < vel),
        }
    }

    fn mergeable(&self, points: &[GazePoint], origin: Vec3, pfg: &Group, cfg: &Group) -> Result<bool> {
        let angle = match self.merge_mode {
            MergeMode::Boundary => angle_at_origin(origin, points[cfg.first()].position, points[pfg.last()].position)?,
            MergeMode::Centroid => angle_at_origin(
                origin,
                fold_positions(points, &cfg.members)?,
                fold_positions(points, &pfg.members)?,
            )?,
        };
        Ok(angle < self.dispersion)
    }

    fn emit(&self, points: &[GazePoint], group: &Group, out: &mut Vec<Fixation>) -> Result<()> {
        if group.is_empty() || !(group.duration(points) > self.min_duration) {
            return Ok(());
        }
        let mut fixation = Fixation {
            position: fold_positions(points, &group.members)?,
            t_start_ms: points[group.first()].timestamp_ms,
            duration_ms: group.duration(points),
            first_index: group.first(),
            last_index: group.last(),
            corrected: false,
            uncorrectable: false,
        };
        if let Representative::Corrected { z_threshold } = self.representative {
            let positions: Vec<Vec3> = group.members.iter().map(|&i| points[i].position).collect();
            let inliers: Vec<Vec3> = positions.iter().copied().filter(|p| p.z < z_threshold).collect();
            if inliers.len() < positions.len() {
                if inliers.is_empty() {
                    fixation.uncorrectable = true;
                } else {
                    let origins: Vec<Vec3> = group.members.iter().map(|&i| points[i].origin).collect();
                    let reference = centroid(&inliers)?;
                    let corrected = correct_samples(&positions, &origins, reference, z_threshold)?;
                    fixation.position = centroid(&corrected)?;
                    fixation.corrected = true;
                }
            }
        }
        out.push(fixation);
        Ok(())
    }

    fn run(&self, points: &[GazePoint]) -> Result<LabeledStream> {
        non_empty(points)?;
        let n = points.len();
        let mut fixations = Vec::new();
        let mut pfg = Group::with(0, points);
        let mut cfg = if n > 1 {
            Group::with(1, points)
        } else {
            Group::default()
        };
        for i in 2..n {
            if self.joins(points, &cfg, i)? {
                cfg.push(i, points);
                continue;
            }
            if cfg.is_empty() {
                continue;
            }
            if cfg.duration(points) > self.min_duration {
                if self.mergeable(points, points[i].origin, &pfg, &cfg)? {
                    pfg.absorb(std::mem::take(&mut cfg), points);
                } else {
                    self.emit(points, &pfg, &mut fixations)?;
                    pfg = std::mem::replace(&mut cfg, Group::with(i, points));
                }
            } else {
                cfg = Group::with(i, points);
            }
        }
        // Flush both groups under the same survival and merge rules.
        if !cfg.is_empty() && cfg.duration(points) > self.min_duration {
            if self.mergeable(points, points[n - 1].origin, &pfg, &cfg)? {
                pfg.absorb(cfg, points);
                self.emit(points, &pfg, &mut fixations)?;
            } else {
                self.emit(points, &pfg, &mut fixations)?;
                self.emit(points, &cfg, &mut fixations)?;
            }
        } else {
            self.emit(points, &pfg, &mut fixations)?;
        }
        Ok(LabeledStream::from_fixations(n, fixations))
    }
}

/// Dispersion-threshold identification without an initial window: groups
/// grow while each new point stays within the dispersion angle of the group
/// centroid, and the duration filter is applied once a group closes.
pub fn classify_idt(points: &[GazePoint], params: &ClassifierParams) -> Result<LabeledStream> {
    params.validate(Algorithm::Idt)?;
    let dd = params.dispersion_threshold.unwrap_or_default();
    GroupingRules {
        membership: Membership::Dispersion(dd),
        dispersion: dd,
        min_duration: params.min_fixation_duration.unwrap_or_default(),
        merge_mode: params.merge_mode,
        representative: Representative::Centroid,
    }
    .run(points)
}

fn velocity_rules(params: &ClassifierParams, representative: Representative) -> GroupingRules {
    GroupingRules {
        membership: Membership::Velocity(params.velocity_threshold.unwrap_or_default()),
        dispersion: params.dispersion_threshold.unwrap_or_default(),
        min_duration: params.min_fixation_duration.unwrap_or_default(),
        merge_mode: params.merge_mode,
        representative,
    }
}

/// Velocity-and-dispersion identification: velocity decides membership,
/// duration decides survival, dispersion decides merging.
pub fn classify_ivdt(points: &[GazePoint], params: &ClassifierParams) -> Result<LabeledStream> {
    params.validate(Algorithm::Ivdt)?;
    velocity_rules(params, Representative::Centroid).run(points)
}

/// I-VDT with far-wall correction: members at or beyond the depth threshold
/// are projected onto a plane through the centroid of the remaining members
/// before the fixation centroid is computed.
pub fn classify_mivdt(points: &[GazePoint], params: &ClassifierParams) -> Result<LabeledStream> {
    params.validate(Algorithm::Mivdt)?;
    velocity_rules(
        params,
        Representative::Corrected {
            z_threshold: params.z_outlier_threshold,
        },
    )
    .run(points)
}

pub fn classify(algorithm: Algorithm, points: &[GazePoint], params: &ClassifierParams) -> Result<LabeledStream> {
    match algorithm {
        Algorithm::Ivt => classify_ivt(points, params),
        Algorithm::Idt => classify_idt(points, params),
        Algorithm::Ivdt => classify_ivdt(points, params),
        Algorithm::Mivdt => classify_mivdt(points, params),
    }
}

/// Replaces every point with `z >= z_threshold` by the intersection of its
/// gaze ray with the plane through `reference` facing that point's origin.
///
/// Points below the threshold, and points whose ray misses the plane, are
/// returned unchanged.
pub fn correct_samples(points: &[Vec3], origins: &[Vec3], reference: Vec3, z_threshold: f64) -> Result<Vec<Vec3>> {
    if points.len() != origins.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} origins",
            points.len(),
            origins.len()
        )));
    }
    let mut out = Vec::with_capacity(points.len());
    for (k, (&p, &origin)) in points.iter().zip(origins).enumerate() {
        if p.z < z_threshold {
            out.push(p);
            continue;
        }
        let (Ok(plane), Ok(ray)) = (Plane::new(reference, reference - origin), Ray::through(origin, p)) else {
            tracing::warn!(
                point = k,
                "reference fixation coincides with the gaze origin; correction skipped"
            );
            out.push(p);
            continue;
        };
        out.push(ray_plane_intersection(&ray, &plane).unwrap_or(p));
    }
    Ok(out)
}

// ── Files ───────────────────────────────────────────────────

pub const FIXATION_COLUMNS: [&str; 8] = [
    "x_f",
    "y_f",
    "z_f",
    "t_start_ms",
    "duration_ms",
    "first_index",
    "last_index",
    "corrected",
];

#[derive(Serialize, Deserialize)]
struct FixationRow {
    x_f: f64,
    y_f: f64,
    z_f: f64,
    t_start_ms: f64,
    duration_ms: f64,
    first_index: usize,
    last_index: usize,
    corrected: u8,
}

pub fn write_fixations<W: Write>(writer: W, fixations: &[Fixation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if fixations.is_empty() {
        wtr.write_record(FIXATION_COLUMNS)?;
    }
    for f in fixations {
        wtr.serialize(FixationRow {
            x_f: f.position.x,
            y_f: f.position.y,
            z_f: f.position.z,
            t_start_ms: f.t_start_ms,
            duration_ms: f.duration_ms,
            first_index: f.first_index,
            last_index: f.last_index,
            corrected: f.corrected as u8,
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<fixation writer>", e))?;
    Ok(())
}

pub fn read_fixations<R: Read>(reader: R) -> Result<Vec<Fixation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for column in FIXATION_COLUMNS {
        if !headers.iter().any(|h| h == column) {
            return Err(Error::MissingColumn {
                column: column.to_string(),
            });
        }
    }
    rdr.deserialize::<FixationRow>()
        .map(|row| {
            let r = row?;
            Ok(Fixation {
                position: Vec3::new(r.x_f, r.y_f, r.z_f),
                t_start_ms: r.t_start_ms,
                duration_ms: r.duration_ms,
                first_index: r.first_index,
                last_index: r.last_index,
                corrected: r.corrected != 0,
                uncorrectable: false,
            })
        })
        .collect()
}

pub fn write_fixations_file(path: &Path, fixations: &[Fixation]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_fixations(std::io::BufWriter::new(file), fixations)
}

/// Per-sample labels as `index,label`.
pub fn write_labels<W: Write>(writer: W, labels: &[Label]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["index", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        wtr.write_record([i.to_string().as_str(), l.as_str()])?;
    }
    wtr.flush().map_err(|e| Error::io("<label writer>", e))?;
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<Label>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let label = match record.get(1) {
            Some("fixation") => Label::Fixation,
            Some("saccade") => Label::Saccade,
            other => {
                return Err(Error::Row {
                    line,
                    message: format!("unknown label {other:?}"),
                })
            }
        };
        if record.get(0).and_then(|s| s.parse::<usize>().ok()) != Some(k) {
            return Err(Error::Row {
                line,
                message: "label indices must be consecutive from 0".into(),
            });
        }
        out.push(label);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{compute_velocities, VelocityConstant};
    use proptest::prelude::*;

    const EYE: Vec3 = Vec3::new(0.0, 1.2, 0.0);

    /// Gaze point at `range` meters along azimuth `deg` from the eye.
    fn at(t: f64, deg: f64, range: f64) -> GazePoint {
        let r = deg.to_radians();
        let direction = Vec3::new(r.sin(), 0.0, r.cos());
        GazePoint {
            position: EYE + direction * range,
            timestamp_ms: t,
            origin: EYE,
            direction,
            velocity: None,
        }
    }

    fn with_velocity(mut points: Vec<GazePoint>) -> Vec<GazePoint> {
        compute_velocities(&mut points, VelocityConstant::Precise).unwrap();
        points
    }

    fn with_fixed_velocity(points: &[GazePoint], v: &[f64]) -> Vec<GazePoint> {
        points
            .iter()
            .zip(v)
            .map(|(p, &v)| GazePoint {
                velocity: Some(v),
                ..*p
            })
            .collect()
    }

    #[test]
    fn ivt_all_slow_is_one_fixation() {
        let pts: Vec<_> = (0..10).map(|i| at(i as f64 * 10.0, 0.0, 2.0)).collect();
        let s = classify_ivt(&with_velocity(pts), &ClassifierParams::ivt(100.0)).unwrap();
        assert_eq!(s.fixations.len(), 1);
        assert_eq!((s.fixations[0].first_index, s.fixations[0].last_index), (0, 9));
        assert_eq!(s.fixations[0].duration_ms, 90.0);
        assert_eq!(s.fixations[0].t_start_ms, 0.0);
    }

    #[test]
    fn ivt_all_fast_is_all_saccade() {
        let pts: Vec<_> = (0..10).map(|i| at(i as f64 * 10.0, i as f64 * 5.0, 2.0)).collect();
        let s = classify_ivt(&with_velocity(pts), &ClassifierParams::ivt(100.0)).unwrap();
        assert!(s.fixations.is_empty());
        assert!(s.labels.iter().all(|&l| l == Label::Saccade));
    }

    #[test]
    fn ivt_threshold_tie_is_saccade_and_single_samples_survive() {
        let pts: Vec<_> = (0..5).map(|i| at(i as f64, 0.0, 2.0)).collect();
        let pts = with_fixed_velocity(&pts, &[10.0, 150.0, 20.0, 150.0, 150.0]);
        let s = classify_ivt(&pts, &ClassifierParams::ivt(150.0)).unwrap();
        assert_eq!(
            s.labels,
            vec![
                Label::Fixation,
                Label::Saccade,
                Label::Fixation,
                Label::Saccade,
                Label::Saccade
            ]
        );
        assert_eq!(s.fixations.len(), 2);
        assert_eq!(s.fixations[1].duration_ms, 0.0);
    }

    #[test]
    fn idt_identical_points_is_one_fixation() {
        let pts: Vec<_> = (0..30).map(|i| at(i as f64 * 10.0, 3.0, 2.0)).collect();
        let s = classify_idt(&pts, &ClassifierParams::idt(100.0, 1.0)).unwrap();
        assert_eq!(s.fixations.len(), 1);
        let f = s.fixations[0];
        assert!(f.position.distance(pts[0].position) < 1e-12);
        assert_eq!((f.first_index, f.last_index, f.duration_ms), (0, 29, 290.0));
    }

    #[test]
    fn idt_two_clusters_ten_degrees_apart() {
        let pts: Vec<_> = (0..60)
            .map(|i| at(i as f64 * 10.0, if i < 30 { 0.0 } else { 10.0 }, 2.0))
            .collect();
        let s = classify_idt(&pts, &ClassifierParams::idt(100.0, 5.75)).unwrap();
        assert_eq!(s.fixations.len(), 2);
        assert_eq!((s.fixations[0].first_index, s.fixations[0].last_index), (0, 29));
        // The first group absorbs the seed point on the break, which drops
        // the breaking sample.
        assert_eq!((s.fixations[1].first_index, s.fixations[1].last_index), (31, 59));
        assert_eq!(s.labels[30], Label::Saccade);
    }

    #[test]
    fn idt_short_cluster_is_filtered() {
        let pts: Vec<_> = (0..5).map(|i| at(i as f64 * 10.0, 0.0, 2.0)).collect();
        let s = classify_idt(&pts, &ClassifierParams::idt(50.0, 5.75)).unwrap();
        assert!(s.fixations.is_empty());
        assert!(s.labels.iter().all(|&l| l == Label::Saccade));
    }

    #[test]
    fn ivdt_stationary_is_one_fixation() {
        let pts: Vec<_> = (0..100).map(|i| at(i as f64 * 8.0, 1.0, 3.0)).collect();
        let s = classify_ivdt(&with_velocity(pts), &ClassifierParams::ivdt(140.0, 110.0, 5.75)).unwrap();
        assert_eq!(s.fixations.len(), 1);
        assert_eq!(s.fixations[0].duration_ms, 99.0 * 8.0);
    }

    /// Long dwell at 0°, a 40 ms dwell at `mid`, a long dwell at `end`, with
    /// fast single-sample transitions between them.
    fn micro_dwell_trace(mid: f64, end: f64) -> Vec<GazePoint> {
        let mut angles = vec![0.0; 50];
        angles.push(mid / 2.0);
        angles.extend([mid; 5]);
        angles.push((mid + end) / 2.0);
        angles.extend([end; 50]);
        let pts: Vec<_> = angles
            .iter()
            .enumerate()
            .map(|(i, &a)| at(i as f64 * 10.0, a, 2.0))
            .collect();
        let v: Vec<f64> = angles
            .windows(2)
            .map(|w| if w[0] == w[1] { 5.0 } else { 400.0 })
            .chain([5.0])
            .collect();
        with_fixed_velocity(&pts, &v)
    }

    #[test]
    fn ivdt_micro_dwell_adds_no_fixation() {
        let params = ClassifierParams::ivdt(140.0, 110.0, 5.75);
        let near = classify_ivdt(&micro_dwell_trace(1.0, 2.0), &params).unwrap();
        assert_eq!(near.fixations.len(), 1);
        let far = classify_ivdt(&micro_dwell_trace(5.0, 10.0), &params).unwrap();
        assert_eq!(far.fixations.len(), 2);
        assert!(far.fixations.iter().all(|f| f.duration_ms > 110.0));
    }

    #[test]
    fn merge_modes_can_disagree() {
        // Drift: a group spanning 0..8 degrees followed by one at 9..12.
        let mut angles: Vec<f64> = (0..40).map(|i| i as f64 * 0.2).collect();
        angles.push(8.5);
        angles.extend((0..30).map(|i| 9.0 + i as f64 * 0.1));
        let pts: Vec<_> = angles
            .iter()
            .enumerate()
            .map(|(i, &a)| at(i as f64 * 10.0, a, 2.0))
            .collect();
        let v: Vec<f64> = (0..pts.len())
            .map(|i| if i == 39 || i == 40 { 400.0 } else { 5.0 })
            .collect();
        let pts = with_fixed_velocity(&pts, &v);
        let params = ClassifierParams::ivdt(140.0, 100.0, 3.0);
        let boundary = classify_ivdt(&pts, &params).unwrap();
        let centroid = classify_ivdt(&pts, &params.with_merge_mode(MergeMode::Centroid)).unwrap();
        assert_eq!(boundary.fixations.len(), 1);
        assert_eq!(centroid.fixations.len(), 2);
    }

    #[test]
    fn correct_samples_noop_without_outliers() {
        let pts = [Vec3::new(0.0, 1.2, 2.2), Vec3::new(0.01, 1.2, 2.2)];
        let out = correct_samples(&pts, &[EYE, EYE], Vec3::new(0.005, 1.2, 2.2), 4.9).unwrap();
        assert_eq!(out, pts.to_vec());
    }

    #[test]
    fn corrected_point_on_ray_and_plane() {
        let reference = Vec3::new(0.1, 1.3, 2.2);
        let miss = Vec3::new(0.3, 1.5, 4.9);
        let out = correct_samples(&[miss], &[EYE], reference, 4.9).unwrap()[0];
        let normal = (reference - EYE).normalized().unwrap();
        assert!((out - reference).dot(normal).abs() < 1e-6);
        let along = (miss - EYE).normalized().unwrap();
        assert!((out - EYE).cross(along).norm() < 1e-6);
        assert!((out.z - 2.2).abs() < 0.2);
    }

    #[test]
    fn corrected_far_miss_returns_to_dwell_depth() {
        let dwell: Vec<Vec3> = (0..9).map(|k| Vec3::new(0.001 * k as f64, 1.2, 2.2)).collect();
        let reference = centroid(&dwell).unwrap();
        let mut pts = dwell.clone();
        pts.push(EYE + (reference - EYE).normalized().unwrap() * 4.9 / ((reference - EYE).normalized().unwrap().z));
        let origins = vec![EYE; pts.len()];
        let out = correct_samples(&pts, &origins, reference, 4.9).unwrap();
        assert!((2.0..=2.4).contains(&out[9].z));
        assert_eq!(&out[..9], &dwell[..]);
    }

    #[test]
    fn coincident_reference_skips_point() {
        let miss = Vec3::new(0.0, 1.2, 4.9);
        assert_eq!(correct_samples(&[miss], &[EYE], EYE, 4.9).unwrap(), vec![miss]);
    }

    #[test]
    fn mivdt_pulls_far_misses_forward() {
        let mut pts: Vec<_> = (0..60).map(|i| at(i as f64 * 8.0, 2.0, 2.2)).collect();
        for k in [10, 25, 40] {
            pts[k] = at(k as f64 * 8.0, 2.3, 4.9 / 2.3f64.to_radians().cos());
        }
        let pts = with_fixed_velocity(&pts, &[1.0; 60]);
        let params = ClassifierParams::ivdt(140.0, 130.0, 5.75);
        let plain = classify_ivdt(&pts, &params).unwrap();
        let modified = classify_mivdt(&pts, &params).unwrap();
        assert_eq!(plain.labels, modified.labels);
        assert!(plain.fixations[0].position.z > 2.3);
        assert!(modified.fixations[0].position.z < 2.3);
        assert!(modified.fixations[0].corrected);
    }

    #[test]
    fn mivdt_all_outliers_keeps_raw_centroid() {
        let pts: Vec<_> = (0..30).map(|i| at(i as f64 * 8.0, 0.0, 4.9)).collect();
        let pts = with_fixed_velocity(&pts, &[1.0; 30]);
        let params = ClassifierParams::ivdt(140.0, 130.0, 5.75);
        let s = classify_mivdt(&pts, &params).unwrap();
        let f = s.fixations[0];
        assert!(f.uncorrectable && !f.corrected);
        assert_eq!(f.position, classify_ivdt(&pts, &params).unwrap().fixations[0].position);
    }

    #[test]
    fn empty_input_and_missing_params_are_rejected() {
        assert!(matches!(
            classify_ivt(&[], &ClassifierParams::ivt(100.0)),
            Err(Error::EmptySession(_))
        ));
        assert!(matches!(
            classify_idt(&[], &ClassifierParams::idt(100.0, 1.0)),
            Err(Error::EmptySession(_))
        ));
        let pts = with_velocity(vec![at(0.0, 0.0, 2.0), at(1.0, 0.0, 2.0)]);
        assert!(matches!(
            classify_ivdt(&pts, &ClassifierParams::ivt(100.0)),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(classify_ivt(&pts, &ClassifierParams::ivt(-1.0)).is_err());
    }

    #[test]
    fn presets_match_reported_optima() {
        let p = ClassifierParams::paper_optimal(Algorithm::Mivdt);
        assert_eq!(
            (p.velocity_threshold, p.min_fixation_duration, p.dispersion_threshold),
            (Some(140.0), Some(130.0), Some(5.75))
        );
        assert_eq!(
            ClassifierParams::paper_optimal(Algorithm::Ivdt).min_fixation_duration,
            Some(110.0)
        );
        assert_eq!(
            ClassifierParams::paper_optimal(Algorithm::Ivt).velocity_threshold,
            Some(150.0)
        );
        for a in Algorithm::ALL {
            ClassifierParams::paper_optimal(a).validate(a).unwrap();
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
    }

    #[test]
    fn fixation_and_label_files_round_trip() {
        let f = Fixation {
            position: Vec3::new(0.1, 1.25, 2.2),
            t_start_ms: 12.5,
            duration_ms: 300.0,
            first_index: 3,
            last_index: 40,
            corrected: true,
            uncorrectable: false,
        };
        let mut buf = Vec::new();
        write_fixations(&mut buf, &[f]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_f,y_f,z_f,t_start_ms,duration_ms,first_index,last_index,corrected\n"));
        assert_eq!(read_fixations(buf.as_slice()).unwrap(), vec![f]);

        let mut empty = Vec::new();
        write_fixations(&mut empty, &[]).unwrap();
        assert!(read_fixations(empty.as_slice()).unwrap().is_empty());

        let labels = vec![Label::Fixation, Label::Saccade, Label::Fixation];
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).unwrap();
        assert_eq!(read_labels(buf.as_slice()).unwrap(), labels);
    }

    fn trace() -> impl Strategy<Value = Vec<GazePoint>> {
        let step = prop_oneof![
            4 => -0.3f64..0.3,
            1 => -12.0f64..12.0,
        ];
        (
            proptest::collection::vec((step, 6.0f64..12.0, prop::bool::weighted(0.1)), 2..120),
            1.0f64..4.0,
        )
            .prop_map(|(steps, range)| {
                let mut angle = 0.0;
                let mut t = 0.0;
                let pts = steps
                    .into_iter()
                    .map(|(da, dt, far)| {
                        angle += da;
                        t += dt;
                        at(t, angle, if far { 4.5 } else { range })
                    })
                    .collect();
                with_velocity(pts)
            })
    }

    fn assert_well_formed(s: &LabeledStream, n: usize) {
        assert_eq!(s.labels.len(), n);
        for w in s.fixations.windows(2) {
            assert!(w[0].last_index < w[1].first_index);
        }
        for (i, &l) in s.labels.iter().enumerate() {
            assert_eq!(l == Label::Fixation, s.fixations.iter().any(|f| f.contains_index(i)));
        }
    }

    fn inside_member_box(f: &Fixation, pts: &[GazePoint]) -> bool {
        (0..3).all(|axis| {
            let vals = pts[f.first_index..=f.last_index]
                .iter()
                .map(|p| p.position.component(axis));
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let c = f.position.component(axis);
            c >= lo - 1e-12 && c <= hi + 1e-12
        })
    }

    proptest! {
        #[test]
        fn ivt_monotone_in_threshold(pts in trace(), lo in 5.0f64..300.0, extra in 0.0f64..300.0) {
            let a = classify_ivt(&pts, &ClassifierParams::ivt(lo)).unwrap();
            let b = classify_ivt(&pts, &ClassifierParams::ivt(lo + extra)).unwrap();
            prop_assert!(b.fixation_sample_count() >= a.fixation_sample_count());
            assert_well_formed(&a, pts.len());
            prop_assert!(a.fixations.iter().all(|f| inside_member_box(f, &pts)));
        }

        #[test]
        fn grouping_postconditions(
            pts in trace(),
            vel in 20.0f64..300.0,
            dur in 10.0f64..150.0,
            dd in 0.5f64..8.0,
        ) {
            let params = ClassifierParams::ivdt(vel, dur, dd);
            for s in [classify_idt(&pts, &params).unwrap(), classify_ivdt(&pts, &params).unwrap()] {
                assert_well_formed(&s, pts.len());
                for f in &s.fixations {
                    prop_assert!(f.duration_ms > dur);
                    prop_assert!(inside_member_box(f, &pts));
                }
                for w in s.fixations.windows(2) {
                    let gap = angle_at_origin(EYE, pts[w[0].last_index].position, pts[w[1].first_index].position).unwrap();
                    prop_assert!(gap >= dd);
                }
            }
        }

        #[test]
        fn mivdt_equals_ivdt_below_depth_threshold(pts in trace(), vel in 20.0f64..300.0, dur in 10.0f64..150.0, dd in 0.5f64..8.0) {
            let params = ClassifierParams::ivdt(vel, dur, dd);
            prop_assert_eq!(classify_mivdt(&pts, &params).unwrap(), classify_ivdt(&pts, &params).unwrap());
            let m = classify_mivdt(&pts, &params.with_z_threshold(4.0)).unwrap();
            assert_well_formed(&m, pts.len());
            prop_assert!(m.fixations.iter().all(|f| f.duration_ms > dur));
        }
    }
}
