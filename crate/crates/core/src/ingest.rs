//! Raw tracker sessions to classifier-ready gaze points.
//!
//! The preprocessing chain is [`fill_missing`] → [`convert_handedness`] →
//! [`offset_origin`] → [`raycast_points`] → [`compute_velocities`];
//! [`preprocess`] runs all of it.
//!
//! Timestamps are milliseconds. The velocity conversion factor turns
//! radians per millisecond into degrees per second, so feeding timestamps in
//! any other unit silently scales every velocity.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between_rad, ray_scene_intersection, Ray, SceneGeometry, Vec3};
use crate::protocol::{StimulusProtocol, TaskKind};

/// Column names of the session CSV, in file order.
pub const SESSION_COLUMNS: [&str; 14] = [
    "timestamp_ms",
    "gaze_origin_x",
    "gaze_origin_y",
    "gaze_origin_z",
    "gaze_dir_x",
    "gaze_dir_y",
    "gaze_dir_z",
    "headset_x",
    "headset_y",
    "headset_z",
    "pupil_left_mm",
    "pupil_right_mm",
    "openness_left",
    "openness_right",
];

/// One raw tracker record. `None` marks a missing (invalid) field group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub timestamp_ms: f64,
    pub gaze_origin: Option<Vec3>,
    pub gaze_direction: Option<Vec3>,
    pub headset_position: Option<Vec3>,
    pub pupil_left_mm: Option<f64>,
    pub pupil_right_mm: Option<f64>,
    pub openness_left: Option<f64>,
    pub openness_right: Option<f64>,
}

impl GazeSample {
    pub fn new(timestamp_ms: f64, origin: Vec3, direction: Vec3, headset: Vec3) -> Self {
        GazeSample {
            timestamp_ms,
            gaze_origin: Some(origin),
            gaze_direction: Some(direction),
            headset_position: Some(headset),
            pupil_left_mm: None,
            pupil_right_mm: None,
            openness_left: None,
            openness_right: None,
        }
    }

    /// A sample with the same timestamp and every gaze field missing.
    pub fn blank(timestamp_ms: f64) -> Self {
        GazeSample {
            timestamp_ms,
            gaze_origin: None,
            gaze_direction: None,
            headset_position: None,
            pupil_left_mm: None,
            pupil_right_mm: None,
            openness_left: None,
            openness_right: None,
        }
    }

    fn direction_usable(&self) -> bool {
        self.gaze_direction.is_some_and(|d| d.normalized().is_some())
    }

    /// Gaze origin, a usable gaze direction and headset position are all present.
    pub fn is_valid(&self) -> bool {
        self.gaze_origin.is_some() && self.direction_usable() && self.headset_position.is_some()
    }
}

/// A ray-cast gaze point; the classifier input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazePoint {
    /// Scene intersection, meters.
    pub position: Vec3,
    pub timestamp_ms: f64,
    /// World-space eye position.
    pub origin: Vec3,
    /// Unit gaze direction.
    pub direction: Vec3,
    /// Degrees per second, once computed.
    pub velocity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FillReport {
    /// Invalid samples at the start of the stream that had no predecessor.
    pub dropped_leading: usize,
    /// Samples that received at least one copied field.
    pub filled: usize,
}

// ── CSV ─────────────────────────────────────────────────────

fn column_indices(headers: &csv::StringRecord) -> Result<[usize; 14]> {
    let mut indices = [0usize; 14];
    for (slot, name) in indices.iter_mut().zip(SESSION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })?;
    }
    Ok(indices)
}

fn cell(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<Option<f64>> {
    let raw = record.get(idx).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::Row {
            line,
            message: format!("column `{name}` holds non-numeric value `{raw}`"),
        })
}

/// Parses the session CSV. Rows keep file order; empty cells become `None`.
pub fn parse_session<R: Read>(reader: R) -> Result<Vec<GazeSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let cols = column_indices(rdr.headers()?)?;
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = [None; 14];
        for (k, name) in SESSION_COLUMNS.iter().enumerate() {
            values[k] = cell(&record, cols[k], name, line)?;
        }
        let timestamp_ms = values[0].ok_or_else(|| Error::Row {
            line,
            message: "missing timestamp".into(),
        })?;
        let vec3 = |k: usize| match (values[k], values[k + 1], values[k + 2]) {
            (Some(x), Some(y), Some(z)) => Some(Vec3::new(x, y, z)),
            _ => None,
        };
        samples.push(GazeSample {
            timestamp_ms,
            gaze_origin: vec3(1),
            gaze_direction: vec3(4),
            headset_position: vec3(7),
            pupil_left_mm: values[10],
            pupil_right_mm: values[11],
            openness_left: values[12],
            openness_right: values[13],
        });
    }
    Ok(samples)
}

pub fn read_session_csv(path: &Path) -> Result<Vec<GazeSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_session(std::io::BufReader::new(file))
}

/// Writes samples in the session CSV format.
pub fn write_session<W: Write>(writer: W, samples: &[GazeSample]) -> Result<()> {
    fn push(row: &mut Vec<String>, v: Option<f64>) {
        row.push(v.map(|v| v.to_string()).unwrap_or_default());
    }
    fn push3(row: &mut Vec<String>, v: Option<Vec3>) {
        push(row, v.map(|v| v.x));
        push(row, v.map(|v| v.y));
        push(row, v.map(|v| v.z));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SESSION_COLUMNS)?;
    let mut row = Vec::with_capacity(14);
    for s in samples {
        row.clear();
        row.push(s.timestamp_ms.to_string());
        push3(&mut row, s.gaze_origin);
        push3(&mut row, s.gaze_direction);
        push3(&mut row, s.headset_position);
        push(&mut row, s.pupil_left_mm);
        push(&mut row, s.pupil_right_mm);
        push(&mut row, s.openness_left);
        push(&mut row, s.openness_right);
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<session writer>", e))?;
    Ok(())
}

// ── Preprocessing ───────────────────────────────────────────

/// Replaces missing gaze origin, direction and headset position with the most
/// recent valid value of the same field. Samples before the first fully valid
/// one are dropped since nothing precedes them.
pub fn fill_missing(samples: &[GazeSample]) -> Result<(Vec<GazeSample>, FillReport)> {
    let first = samples
        .iter()
        .position(GazeSample::is_valid)
        .ok_or_else(|| Error::EmptySession("no valid gaze sample in session".into()))?;
    let mut report = FillReport {
        dropped_leading: first,
        filled: 0,
    };
    let mut last = samples[first];
    let mut out = Vec::with_capacity(samples.len() - first);
    for s in &samples[first..] {
        let mut s = *s;
        let mut filled = false;
        if s.gaze_origin.is_none() {
            s.gaze_origin = last.gaze_origin;
            filled = true;
        }
        if !s.direction_usable() {
            s.gaze_direction = last.gaze_direction;
            filled = true;
        }
        if s.headset_position.is_none() {
            s.headset_position = last.headset_position;
            filled = true;
        }
        report.filled += filled as usize;
        last = s;
        out.push(s);
    }
    Ok((out, report))
}

/// Right-handed tracker frame to left-handed engine frame: negates the x
/// component of gaze origin and direction. Applying it twice is the identity.
pub fn convert_handedness(samples: &[GazeSample]) -> Vec<GazeSample> {
    let flip = |v: Vec3| Vec3::new(-v.x, v.y, v.z);
    samples
        .iter()
        .map(|s| GazeSample {
            gaze_origin: s.gaze_origin.map(flip),
            gaze_direction: s.gaze_direction.map(flip),
            ..*s
        })
        .collect()
}

/// Eye-local gaze origin to world space by adding the headset position.
pub fn offset_origin(samples: &[GazeSample]) -> Vec<GazeSample> {
    samples
        .iter()
        .map(|s| GazeSample {
            gaze_origin: match (s.gaze_origin, s.headset_position) {
                (Some(o), Some(h)) => Some(o + h),
                (o, _) => o,
            },
            ..*s
        })
        .collect()
}

/// Casts each sample's gaze ray into the scene.
pub fn raycast_points(samples: &[GazeSample], scene: &SceneGeometry) -> Result<Vec<GazePoint>> {
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (Some(origin), Some(direction)) = (s.gaze_origin, s.gaze_direction) else {
                return Err(Error::Contract(format!(
                    "sample {i} has no gaze ray; fill missing data before ray casting"
                )));
            };
            let ray = Ray::new(origin, direction)?;
            Ok(GazePoint {
                position: ray_scene_intersection(&ray, scene)?,
                timestamp_ms: s.timestamp_ms,
                origin,
                direction: ray.direction,
                velocity: None,
            })
        })
        .collect()
}

/// Factor converting radians per millisecond to degrees per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityConstant {
    /// `180/π × 10³`.
    #[default]
    Precise,
    /// The rounded `5.73 × 10⁴` found in older I-VT descriptions.
    Literal,
}

impl VelocityConstant {
    pub fn value(self) -> f64 {
        match self {
            VelocityConstant::Precise => 180.0e3 / std::f64::consts::PI,
            VelocityConstant::Literal => 5.73e4,
        }
    }
}

/// Point-to-point angular velocity in degrees per second.
///
/// `v[i]` is the angle between directions `i` and `i + 1` divided by the time
/// step; the last point repeats its predecessor's value.
pub fn compute_velocities(points: &mut [GazePoint], constant: VelocityConstant) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::EmptySession(format!(
            "velocity needs at least two samples, got {}",
            points.len()
        )));
    }
    let k = constant.value();
    for i in 0..points.len() - 1 {
        let dt = points[i + 1].timestamp_ms - points[i].timestamp_ms;
        if !(dt > 0.0) {
            return Err(Error::DegenerateTimestep { index: i, next: i + 1 });
        }
        let angle = angle_between_rad(points[i].direction, points[i + 1].direction)?;
        points[i].velocity = Some(angle / dt.abs() * k);
    }
    let n = points.len();
    points[n - 1].velocity = points[n - 2].velocity;
    Ok(())
}

// ── Sessions ────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub velocity_constant: VelocityConstant,
    /// Input is in a right-handed frame and needs the x flip.
    pub right_handed_input: bool,
    /// Gaze origins are eye-local and need the headset offset.
    pub eye_local_origin: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            velocity_constant: VelocityConstant::Precise,
            right_handed_input: true,
            eye_local_origin: true,
        }
    }
}

/// A preprocessed recording: one gaze point per retained sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub samples: Vec<GazeSample>,
    pub points: Vec<GazePoint>,
    pub scene: SceneGeometry,
    pub protocol_id: String,
    pub task_kind: TaskKind,
    pub fill: FillReport,
}

/// Runs the whole preprocessing chain against the protocol's scene.
pub fn preprocess(
    id: &str,
    raw: &[GazeSample],
    protocol: &StimulusProtocol,
    options: &PreprocessOptions,
) -> Result<Session> {
    let (mut samples, fill) = fill_missing(raw)?;
    if options.right_handed_input {
        samples = convert_handedness(&samples);
    }
    if options.eye_local_origin {
        samples = offset_origin(&samples);
    }
    let mut points = raycast_points(&samples, &protocol.scene)?;
    compute_velocities(&mut points, options.velocity_constant)?;
    Ok(Session {
        id: id.to_string(),
        samples,
        points,
        scene: protocol.scene.clone(),
        protocol_id: id.to_string(),
        task_kind: protocol.task_kind,
        fill,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;
    use proptest::prelude::*;

    const HEADER: &str = "timestamp_ms,gaze_origin_x,gaze_origin_y,gaze_origin_z,gaze_dir_x,gaze_dir_y,gaze_dir_z,headset_x,headset_y,headset_z,pupil_left_mm,pupil_right_mm,openness_left,openness_right";

    fn sample(t: f64, dir: Vec3) -> GazeSample {
        GazeSample::new(t, Vec3::ZERO, dir, Vec3::new(0.0, 1.2, 0.0))
    }

    fn point(t: f64, dir: Vec3) -> GazePoint {
        GazePoint {
            position: dir,
            timestamp_ms: t,
            origin: Vec3::ZERO,
            direction: dir.normalized().unwrap(),
            velocity: None,
        }
    }

    fn dir_deg(deg: f64) -> Vec3 {
        let r = deg.to_radians();
        Vec3::new(r.sin(), 0.0, r.cos())
    }

    #[test]
    fn parses_well_formed_rows() {
        let text = format!(
            "{HEADER}\n0,0,0,0,0,0,1,0,1.2,0,3.1,3.2,1,1\n8.3,0,0,0,0,0,1,0,1.2,0,3.1,3.2,1,1\n16.6,0,0,0,0.01,0,1,0,1.2,0,,,,\n"
        );
        let samples = parse_session(text.as_bytes()).unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[1].timestamp_ms, 8.3);
        assert_eq!(samples[0].pupil_left_mm, Some(3.1));
        assert_eq!(samples[2].openness_right, None);
        assert!(samples.iter().all(GazeSample::is_valid));
    }

    #[test]
    fn empty_direction_cells_flag_invalid() {
        let text = format!("{HEADER}\n0,0,0,0,,,,0,1.2,0,,,,\n");
        let samples = parse_session(text.as_bytes()).unwrap();
        assert_eq!(samples.len(), 1);
        assert!(samples[0].gaze_direction.is_none());
        assert!(!samples[0].is_valid());
    }

    #[test]
    fn missing_timestamp_column_is_a_format_error() {
        let header = HEADER.replacen("timestamp_ms,", "", 1);
        let text = format!("{header}\n0,0,0,0,0,1,0,1.2,0,,,,\n");
        match parse_session(text.as_bytes()) {
            Err(Error::MissingColumn { column }) => assert_eq!(column, "timestamp_ms"),
            other => panic!("expected missing column, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let text = format!("{HEADER}\n0,0,0,0,0,0,1,0,1.2,0,,,,\n8,0,0,abc,0,0,1,0,1.2,0,,,,\n");
        match parse_session(text.as_bytes()) {
            Err(Error::Row { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("gaze_origin_z"));
            }
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn fill_copies_last_valid() {
        let a = sample(0.0, dir_deg(0.0));
        let b = sample(20.0, dir_deg(3.0));
        let (out, report) = fill_missing(&[a, GazeSample::blank(10.0), b]).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[1].gaze_direction, a.gaze_direction);
        assert_eq!(out[1].gaze_origin, a.gaze_origin);
        assert_eq!(out[1].timestamp_ms, 10.0);
        assert_eq!(out[2], b);
        assert_eq!(
            report,
            FillReport {
                dropped_leading: 0,
                filled: 1
            }
        );
    }

    #[test]
    fn fill_drops_leading_invalid() {
        let a = sample(10.0, dir_deg(0.0));
        let (out, report) = fill_missing(&[GazeSample::blank(0.0), a]).unwrap();
        assert_eq!(out, vec![a]);
        assert_eq!(report.dropped_leading, 1);
    }

    #[test]
    fn fill_is_identity_on_valid_stream() {
        let s: Vec<_> = (0..5).map(|i| sample(i as f64, dir_deg(i as f64))).collect();
        let (out, report) = fill_missing(&s).unwrap();
        assert_eq!(out, s);
        assert_eq!(report.filled, 0);
    }

    #[test]
    fn fill_rejects_all_invalid() {
        let s = [GazeSample::blank(0.0), GazeSample::blank(1.0)];
        assert!(matches!(fill_missing(&s), Err(Error::EmptySession(_))));
    }

    #[test]
    fn handedness_flips_x_only() {
        let s = GazeSample::new(0.0, Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.6, 0.0, 0.8), Vec3::ZERO);
        let out = convert_handedness(&[s]);
        assert_eq!(out[0].gaze_origin, Some(Vec3::new(-1.0, 2.0, 3.0)));
        assert_eq!(out[0].gaze_direction, Some(Vec3::new(-0.6, 0.0, 0.8)));
        let zero_x = GazeSample::new(0.0, Vec3::new(0.0, 2.0, 3.0), Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO);
        assert_eq!(
            convert_handedness(&[zero_x])[0].gaze_origin,
            Some(Vec3::new(0.0, 2.0, 3.0))
        );
        assert_eq!(convert_handedness(&out)[0], s);
    }

    #[test]
    fn offset_adds_headset() {
        let h = Vec3::new(0.0, 1.2, 0.0);
        let s = GazeSample::new(0.0, Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), h);
        assert_eq!(offset_origin(&[s])[0].gaze_origin, Some(h));
        let s = GazeSample::new(0.0, Vec3::new(0.03, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0), h);
        assert_eq!(offset_origin(&[s])[0].gaze_origin, Some(Vec3::new(0.03, 1.2, 0.0)));
        let s = GazeSample::new(0.0, Vec3::new(0.5, 0.1, 0.2), Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO);
        assert_eq!(offset_origin(&[s])[0].gaze_origin, s.gaze_origin);
    }

    #[test]
    fn raycast_forward_hits_far_wall() {
        let scene = SceneGeometry::empty_room(Aabb::cube(Vec3::new(0.0, 1.2, 0.0), 4.9));
        let s: Vec<_> = (0..4)
            .map(|i| GazeSample::new(i as f64, Vec3::new(0.0, 1.2, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::ZERO))
            .collect();
        let pts = raycast_points(&s, &scene).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.position.z == 4.9));
        assert_eq!(pts[2].timestamp_ms, 2.0);
    }

    #[test]
    fn velocity_examples() {
        let mut pts = vec![point(0.0, dir_deg(0.0)), point(10.0, dir_deg(0.0))];
        compute_velocities(&mut pts, VelocityConstant::Precise).unwrap();
        assert_eq!(pts[0].velocity, Some(0.0));

        // 1 degree over 10 ms is 100 deg/s
        let mut pts = vec![
            point(0.0, dir_deg(0.0)),
            point(10.0, dir_deg(1.0)),
            point(20.0, dir_deg(1.0)),
        ];
        compute_velocities(&mut pts, VelocityConstant::Precise).unwrap();
        assert!((pts[0].velocity.unwrap() - 100.0).abs() < 0.1);
        assert_eq!(pts[1].velocity, Some(0.0));
        assert_eq!(pts[2].velocity, pts[1].velocity);

        // 0.5 degree over one 120 Hz period
        let mut pts = vec![point(0.0, dir_deg(0.0)), point(8.33, dir_deg(0.5))];
        compute_velocities(&mut pts, VelocityConstant::Precise).unwrap();
        assert!((pts[0].velocity.unwrap() - 0.5 / 8.33e-3).abs() < 1e-6);
        assert_eq!(pts[1].velocity, pts[0].velocity);
    }

    #[test]
    fn literal_constant_scales_velocity() {
        let mut a = vec![point(0.0, dir_deg(0.0)), point(10.0, dir_deg(1.0))];
        let mut b = a.clone();
        compute_velocities(&mut a, VelocityConstant::Precise).unwrap();
        compute_velocities(&mut b, VelocityConstant::Literal).unwrap();
        let ratio = b[0].velocity.unwrap() / a[0].velocity.unwrap();
        assert!((ratio - 5.73e4 / (180.0e3 / std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn duplicate_timestamp_is_degenerate() {
        let mut pts = vec![
            point(0.0, dir_deg(0.0)),
            point(5.0, dir_deg(1.0)),
            point(5.0, dir_deg(2.0)),
        ];
        match compute_velocities(&mut pts, VelocityConstant::Precise) {
            Err(Error::DegenerateTimestep { index, next }) => assert_eq!((index, next), (1, 2)),
            other => panic!("expected degenerate timestep, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_preserves_samples() {
        let mut a = sample(0.125, Vec3::new(0.1, -0.2, 0.97));
        a.pupil_left_mm = Some(3.25);
        let b = GazeSample::blank(8.5);
        let mut buf = Vec::new();
        write_session(&mut buf, &[a, b]).unwrap();
        assert_eq!(parse_session(buf.as_slice()).unwrap(), vec![a, b]);
    }

    fn maybe_sample() -> impl Strategy<Value = Option<(f64, f64)>> {
        prop::option::weighted(0.8, (-0.3f64..0.3, -0.3f64..0.3))
    }

    proptest! {
        #[test]
        fn fill_only_copies_earlier_values(cells in proptest::collection::vec(maybe_sample(), 1..80)) {
            let raw: Vec<GazeSample> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| match c {
                    Some((x, y)) => sample(i as f64, Vec3::new(*x, *y, 1.0)),
                    None => GazeSample::blank(i as f64),
                })
                .collect();
            match fill_missing(&raw) {
                Err(_) => prop_assert!(raw.iter().all(|s| !s.is_valid())),
                Ok((out, report)) => {
                    prop_assert_eq!(out.len() + report.dropped_leading, raw.len());
                    for (k, s) in out.iter().enumerate() {
                        let idx = k + report.dropped_leading;
                        prop_assert_eq!(s.timestamp_ms, raw[idx].timestamp_ms);
                        let d = s.gaze_direction.unwrap();
                        prop_assert!(raw[..=idx].iter().any(|r| r.gaze_direction.map(|v| v.x.to_bits() == d.x.to_bits() && v.y.to_bits() == d.y.to_bits() && v.z.to_bits() == d.z.to_bits()).unwrap_or(false)));
                    }
                }
            }
        }

        #[test]
        fn handedness_is_an_involution(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let s = GazeSample::new(1.0, Vec3::new(x, y, z), Vec3::new(z, x, y), Vec3::new(y, z, x));
            prop_assert_eq!(convert_handedness(&convert_handedness(&[s])), vec![s]);
        }

        #[test]
        fn velocities_finite_and_non_negative(angles in proptest::collection::vec(-40.0f64..40.0, 2..60), dt in 1.0f64..20.0) {
            let mut pts: Vec<_> = angles.iter().enumerate().map(|(i, a)| point(i as f64 * dt, dir_deg(*a))).collect();
            compute_velocities(&mut pts, VelocityConstant::Precise).unwrap();
            for p in &pts {
                let v = p.velocity.unwrap();
                prop_assert!(v.is_finite() && v >= 0.0);
            }
        }
    }
}
