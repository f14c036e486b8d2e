//! Evaluation metrics, their ideal values and the Overall score.
//!
//! The seven metrics always appear in the order of [`METRIC_NAMES`]:
//! FQnS, FQlS, FN, AFD, SN, ASA, SQnS. Lower Overall is better.

use serde::{Deserialize, Serialize};

use crate::classifiers::{Label, LabeledStream};
use crate::error::{Error, Result};
use crate::geometry::{angle_at_origin, Vec3};
use crate::ingest::GazePoint;
use crate::protocol::{stimulus_saccades, StimulusProtocol};

pub const METRIC_COUNT: usize = 7;
pub const METRIC_NAMES: [&str; METRIC_COUNT] = ["fqns", "fqls", "fn", "afd", "sn", "asa", "sqns"];

/// Delay between stimulus onset and saccade launch, ms.
pub const SACCADIC_LATENCY_MS: f64 = 200.0;
/// Target FQlS, in the same unit as scene distances.
pub const IDEAL_FQLS: f64 = 0.5;
pub const IDEAL_SQNS: f64 = 100.0;
/// Slack allowed between the session's time span and the protocol's, ms.
pub const ALIGNMENT_TOLERANCE_MS: f64 = 100.0;

/// Main-sequence saccade duration in ms for an amplitude in degrees.
pub fn saccade_duration_ms(amplitude_deg: f64) -> f64 {
    2.2 * amplitude_deg + 21.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealValues {
    pub afn: f64,
    pub afd: f64,
    pub ans: f64,
    pub asa: f64,
    pub fqns: f64,
    pub fqls: f64,
    pub sqns: f64,
}

impl IdealValues {
    /// In [`METRIC_NAMES`] order.
    pub fn as_array(&self) -> [f64; METRIC_COUNT] {
        [self.fqns, self.fqls, self.afn, self.afd, self.ans, self.asa, self.sqns]
    }
}

/// Expected FQnS for a perfect observer: every saccade costs the saccadic
/// latency plus its main-sequence duration of fixation time.
pub fn ideal_fqns(protocol: &StimulusProtocol) -> Result<f64> {
    let saccades = stimulus_saccades(protocol)?;
    let lost: f64 = saccades
        .iter()
        .map(|s| SACCADIC_LATENCY_MS + saccade_duration_ms(s.amplitude))
        .sum();
    Ok(100.0 * (1.0 - lost / protocol.total_dwell_ms()))
}

pub fn ideal_values(protocol: &StimulusProtocol) -> Result<IdealValues> {
    let saccades = stimulus_saccades(protocol)?;
    let n = protocol.targets.len() as f64;
    Ok(IdealValues {
        afn: n,
        afd: protocol.total_dwell_ms() / n,
        ans: saccades.len() as f64,
        asa: saccades.iter().map(|s| s.amplitude).sum::<f64>() / saccades.len() as f64,
        fqns: ideal_fqns(protocol)?,
        fqls: IDEAL_FQLS,
        sqns: IDEAL_SQNS,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub fn_count: f64,
    /// Mean fixation duration, ms; 0 when there are no fixations.
    pub afd: f64,
    pub sn_count: f64,
    /// Mean detected saccade amplitude, degrees; 0 when there are no saccades.
    pub asa: f64,
    pub afd_degenerate: bool,
    pub asa_degenerate: bool,
}

/// Saccade runs with a sample on both sides; runs touching either end of the
/// session have no flanking positions and are not counted.
pub fn interior_saccade_runs(stream: &LabeledStream) -> Vec<(usize, usize)> {
    let n = stream.labels.len();
    stream
        .runs(Label::Saccade)
        .into_iter()
        .filter(|&(s, e)| s > 0 && e + 1 < n)
        .collect()
}

/// Visual angle between the positions flanking a saccade run, measured from
/// the run's first-sample origin.
pub fn saccade_run_amplitude(points: &[GazePoint], run: (usize, usize)) -> Result<f64> {
    let (s, e) = run;
    angle_at_origin(points[s].origin, points[s - 1].position, points[e + 1].position)
}

fn check_lengths(points: &[GazePoint], stream: &LabeledStream) -> Result<()> {
    if points.len() != stream.labels.len() {
        return Err(Error::Contract(format!(
            "{} points but {} labels",
            points.len(),
            stream.labels.len()
        )));
    }
    Ok(())
}

pub fn basic_metrics(stream: &LabeledStream, points: &[GazePoint]) -> Result<BasicMetrics> {
    check_lengths(points, stream)?;
    let fn_count = stream.fixations.len();
    let afd = if fn_count == 0 {
        0.0
    } else {
        stream.fixations.iter().map(|f| f.duration_ms).sum::<f64>() / fn_count as f64
    };
    let runs = interior_saccade_runs(stream);
    let mut total = 0.0;
    for &run in &runs {
        total += saccade_run_amplitude(points, run)?;
    }
    let asa = if runs.is_empty() {
        0.0
    } else {
        total / runs.len() as f64
    };
    Ok(BasicMetrics {
        fn_count: fn_count as f64,
        afd,
        sn_count: runs.len() as f64,
        asa,
        afd_degenerate: fn_count == 0,
        asa_degenerate: runs.is_empty(),
    })
}

/// Fails when the session's time span is not covered by the protocol.
pub fn check_alignment(points: &[GazePoint], protocol: &StimulusProtocol) -> Result<()> {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return Err(Error::EmptySession("no gaze points to evaluate".into()));
    };
    let lo = protocol.start_ms() - ALIGNMENT_TOLERANCE_MS;
    let hi = protocol.end_ms() + ALIGNMENT_TOLERANCE_MS;
    if first.timestamp_ms < lo || last.timestamp_ms > hi {
        return Err(Error::Alignment(format!(
            "session spans {:.1}..{:.1} ms but the protocol covers {:.1}..{:.1} ms",
            first.timestamp_ms,
            last.timestamp_ms,
            protocol.start_ms(),
            protocol.end_ms()
        )));
    }
    Ok(())
}

/// Positional tolerance around target `k`: the chord subtending a third of
/// the saccade into `k` at the target's range from the viewer. The first
/// target uses the first saccade.
pub fn proximity_radius(protocol: &StimulusProtocol, k: usize) -> Result<f64> {
    let saccades = stimulus_saccades(protocol)?;
    let amplitude = saccades[k.max(1) - 1].amplitude;
    let range = protocol.targets[k].position.distance(protocol.viewer_origin);
    Ok(2.0 * range * (amplitude / 6.0).to_radians().sin())
}

/// How a fixation near its target is credited in FQnS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FqnsCredit {
    /// Only the part of the fixation inside each target's dwell window counts,
    /// and only for targets the centroid is near.
    #[default]
    Overlap,
    /// The whole fixation duration counts if the centroid is near the target
    /// shown at fixation onset.
    FullDuration,
}

pub fn fqns(
    stream: &LabeledStream,
    points: &[GazePoint],
    protocol: &StimulusProtocol,
    credit: FqnsCredit,
) -> Result<f64> {
    check_lengths(points, stream)?;
    check_alignment(points, protocol)?;
    let radii: Vec<f64> = (0..protocol.targets.len())
        .map(|k| proximity_radius(protocol, k))
        .collect::<Result<_>>()?;
    let near = |k: usize, p: Vec3| p.distance(protocol.targets[k].position) <= radii[k];
    let mut total = 0.0;
    for f in &stream.fixations {
        match credit {
            FqnsCredit::FullDuration => {
                let k = protocol.target_at(f.t_start_ms);
                if near(k, f.position) {
                    total += f.duration_ms;
                }
            }
            FqnsCredit::Overlap => {
                let (start, end) = (f.t_start_ms, f.end_ms());
                for (k, t) in protocol.targets.iter().enumerate() {
                    let overlap = end.min(t.end_ms()) - start.max(t.onset_ms);
                    if overlap > 0.0 && near(k, f.position) {
                        total += overlap;
                    }
                }
            }
        }
        tracing::trace!(t_start = f.t_start_ms, "fqns fixation scored");
    }
    Ok(100.0 * total / protocol.total_dwell_ms())
}

/// Mean distance from each fixation-labeled sample's group centroid to the
/// target shown when that fixation began. `None` when no sample is a fixation.
pub fn fqls(stream: &LabeledStream, points: &[GazePoint], protocol: &StimulusProtocol) -> Result<Option<f64>> {
    check_lengths(points, stream)?;
    check_alignment(points, protocol)?;
    let mut total = 0.0;
    let mut samples = 0usize;
    for f in &stream.fixations {
        let target = protocol.targets[protocol.target_at(f.t_start_ms)].position;
        let members = f.last_index - f.first_index + 1;
        total += members as f64 * f.position.distance(target);
        samples += members;
    }
    Ok((samples > 0).then(|| total / samples as f64))
}

/// Detected saccade amplitude as a percentage of stimulus saccade amplitude.
pub fn sqns(stream: &LabeledStream, points: &[GazePoint], protocol: &StimulusProtocol) -> Result<f64> {
    check_lengths(points, stream)?;
    let stimulus: f64 = stimulus_saccades(protocol)?.iter().map(|s| s.amplitude).sum();
    if !(stimulus > 0.0) {
        return Err(Error::UndefinedMetric(
            "SQnS is undefined when the stimulus has no saccade amplitude".into(),
        ));
    }
    let mut detected = 0.0;
    for run in interior_saccade_runs(stream) {
        detected += saccade_run_amplitude(points, run)?;
    }
    Ok(100.0 * detected / stimulus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMetrics {
    pub fqns: f64,
    pub fqls: Option<f64>,
    pub fn_count: f64,
    pub afd: f64,
    pub sn_count: f64,
    pub asa: f64,
    pub sqns: f64,
}

impl RawMetrics {
    pub fn as_array(&self) -> [Option<f64>; METRIC_COUNT] {
        [
            Some(self.fqns),
            self.fqls,
            Some(self.fn_count),
            Some(self.afd),
            Some(self.sn_count),
            Some(self.asa),
            Some(self.sqns),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub normalization_min: [f64; METRIC_COUNT],
    pub normalization_max: [f64; METRIC_COUNT],
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub raw: RawMetrics,
    pub ideals: IdealValues,
    /// `|actual − ideal|`; `None` where the metric is undefined.
    pub deviations: [Option<f64>; METRIC_COUNT],
    /// Filled in by [`Normalization::apply`].
    pub normalized: Option<[f64; METRIC_COUNT]>,
    pub overall: Option<f64>,
    /// Degenerate cases encountered, e.g. `afd-no-fixations`.
    pub flags: Vec<String>,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    pub fqns_credit: FqnsCredit,
}

/// All seven metrics and their deviations for one classified session.
pub fn evaluate(
    stream: &LabeledStream,
    points: &[GazePoint],
    protocol: &StimulusProtocol,
    options: &MetricOptions,
) -> Result<MetricReport> {
    let basic = basic_metrics(stream, points)?;
    let raw = RawMetrics {
        fqns: fqns(stream, points, protocol, options.fqns_credit)?,
        fqls: fqls(stream, points, protocol)?,
        fn_count: basic.fn_count,
        afd: basic.afd,
        sn_count: basic.sn_count,
        asa: basic.asa,
        sqns: sqns(stream, points, protocol)?,
    };
    let ideals = ideal_values(protocol)?;
    let ideal = ideals.as_array();
    let mut deviations = [None; METRIC_COUNT];
    for (k, value) in raw.as_array().into_iter().enumerate() {
        deviations[k] = value.map(|v| (v - ideal[k]).abs());
    }
    let mut flags = Vec::new();
    if basic.afd_degenerate {
        flags.push("afd-no-fixations".to_string());
    }
    if basic.asa_degenerate {
        flags.push("asa-no-saccades".to_string());
    }
    if raw.fqls.is_none() {
        flags.push("fqls-undefined".to_string());
    }
    Ok(MetricReport {
        raw,
        ideals,
        deviations,
        normalized: None,
        overall: None,
        flags,
        provenance: None,
    })
}

/// Min-max normalization of a single metric over a comparison set.
///
/// Returns the normalized values and whether the metric was constant, in
/// which case every output is 0.
///
/// ```
/// use gaze_events::metrics::normalize_deviations;
/// let (y, constant) = normalize_deviations(&[2.0, 4.0, 3.0]);
/// assert_eq!(y, vec![0.0, 1.0, 0.5]);
/// assert!(!constant);
/// ```
pub fn normalize_deviations(values: &[f64]) -> (Vec<f64>, bool) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|&y| (y - min) / (max - min)).collect(), false)
}

/// Arithmetic mean of the seven normalized deviations.
pub fn overall_score(normalized: &[f64]) -> Result<f64> {
    if normalized.len() != METRIC_COUNT {
        return Err(Error::Contract(format!(
            "overall score needs {METRIC_COUNT} normalized metrics, got {}",
            normalized.len()
        )));
    }
    Ok(normalized.iter().sum::<f64>() / METRIC_COUNT as f64)
}

/// Per-metric minima and maxima of the deviations in one comparison set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: [f64; METRIC_COUNT],
    pub max: [f64; METRIC_COUNT],
}

impl Normalization {
    /// Undefined deviations are left out of the fit.
    pub fn fit<'a>(deviations: impl IntoIterator<Item = &'a [Option<f64>; METRIC_COUNT]>) -> Self {
        let mut min = [f64::INFINITY; METRIC_COUNT];
        let mut max = [f64::NEG_INFINITY; METRIC_COUNT];
        for d in deviations {
            for k in 0..METRIC_COUNT {
                if let Some(v) = d[k] {
                    min[k] = min[k].min(v);
                    max[k] = max[k].max(v);
                }
            }
        }
        for k in 0..METRIC_COUNT {
            if !min[k].is_finite() {
                min[k] = 0.0;
                max[k] = 0.0;
            }
        }
        Normalization { min, max }
    }

    /// Metrics whose deviation did not vary across the set.
    pub fn constant(&self) -> [bool; METRIC_COUNT] {
        std::array::from_fn(|k| !(self.max[k] > self.min[k]))
    }

    /// Undefined deviations normalize to 1 (worst); constant metrics to 0.
    pub fn normalize(&self, deviations: &[Option<f64>; METRIC_COUNT]) -> [f64; METRIC_COUNT] {
        std::array::from_fn(|k| match deviations[k] {
            None => 1.0,
            Some(_) if !(self.max[k] > self.min[k]) => 0.0,
            Some(y) => ((y - self.min[k]) / (self.max[k] - self.min[k])).clamp(0.0, 1.0),
        })
    }

    pub fn apply(&self, report: &mut MetricReport, run_id: &str) {
        let normalized = self.normalize(&report.deviations);
        report.overall = Some(normalized.iter().sum::<f64>() / METRIC_COUNT as f64);
        report.normalized = Some(normalized);
        for (k, constant) in self.constant().into_iter().enumerate() {
            let flag = format!("{}-constant", METRIC_NAMES[k]);
            if constant && !report.flags.contains(&flag) {
                report.flags.push(flag);
            }
        }
        report.provenance = Some(Provenance {
            normalization_min: self.min,
            normalization_max: self.max,
            run_id: run_id.to_string(),
        });
    }
}

/// Normalizes every report against the whole set and fills in Overall.
pub fn normalize_reports(reports: &mut [MetricReport], run_id: &str) -> Normalization {
    let norm = Normalization::fit(reports.iter().map(|r| &r.deviations));
    for r in reports.iter_mut() {
        norm.apply(r, run_id);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::Fixation;
    use crate::geometry::{Aabb, SceneGeometry};
    use crate::protocol::{StimulusTarget, TaskKind};
    use proptest::prelude::*;

    const EYE: Vec3 = Vec3::new(0.0, 1.2, 0.0);

    fn azimuth(deg: f64, range: f64) -> Vec3 {
        let r = deg.to_radians();
        EYE + Vec3::new(r.sin(), 0.0, r.cos()) * range
    }

    /// `n` targets alternating between ±amplitude/2 azimuth at 2.2 m.
    fn zigzag(n: usize, amplitude: f64, dwell: f64) -> StimulusProtocol {
        StimulusProtocol {
            task_kind: TaskKind::SingleTarget,
            viewer_origin: EYE,
            scene: SceneGeometry::empty_room(Aabb::cube(EYE, 4.9)),
            targets: (0..n)
                .map(|k| StimulusTarget {
                    position: azimuth(if k % 2 == 0 { -amplitude / 2.0 } else { amplitude / 2.0 }, 2.2),
                    onset_ms: k as f64 * dwell,
                    dwell_ms: dwell,
                })
                .collect(),
        }
    }

    fn fixation(position: Vec3, t: f64, d: f64, first: usize, last: usize) -> Fixation {
        Fixation {
            position,
            t_start_ms: t,
            duration_ms: d,
            first_index: first,
            last_index: last,
            corrected: false,
            uncorrectable: false,
        }
    }

    fn points_at(times: &[f64], positions: &[Vec3]) -> Vec<GazePoint> {
        times
            .iter()
            .zip(positions)
            .map(|(&t, &p)| GazePoint {
                position: p,
                timestamp_ms: t,
                origin: EYE,
                direction: (p - EYE).normalized().unwrap(),
                velocity: Some(0.0),
            })
            .collect()
    }

    fn stream(n: usize, fixations: Vec<Fixation>) -> LabeledStream {
        let mut labels = vec![Label::Saccade; n];
        for f in &fixations {
            labels[f.first_index..=f.last_index].fill(Label::Fixation);
        }
        LabeledStream { labels, fixations }
    }

    #[test]
    fn ideal_fqns_for_ten_degree_zigzag() {
        let p = zigzag(21, 10.0, 1500.0);
        let expected = 100.0 * (1.0 - (20.0 * 200.0 + 20.0 * 43.0) / 31500.0);
        assert!((ideal_fqns(&p).unwrap() - expected).abs() < 1e-9);
        assert!((ideal_fqns(&p).unwrap() - 84.57).abs() < 0.01);
        assert_eq!(saccade_duration_ms(10.0), 43.0);
    }

    #[test]
    fn ideal_fqns_zero_amplitude_limit() {
        let mut p = zigzag(3, 10.0, 1500.0);
        for t in &mut p.targets {
            t.position = azimuth(0.0, 2.2);
        }
        let expected = 100.0 * (1.0 - (2.0 * 200.0 + 2.0 * 21.0) / 4500.0);
        assert!((ideal_fqns(&p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ideal_values_follow_protocol() {
        let p = zigzag(21, 10.0, 1500.0);
        let ideal = ideal_values(&p).unwrap();
        assert_eq!((ideal.afn, ideal.ans, ideal.afd), (21.0, 20.0, 1500.0));
        assert!((ideal.asa - 10.0).abs() < 1e-9);
        assert_eq!((ideal.fqls, ideal.sqns), (0.5, 100.0));
    }

    #[test]
    fn basic_metrics_examples() {
        let times: Vec<f64> = (0..16).map(|i| i as f64 * 100.0).collect();
        let pts = points_at(&times, &vec![azimuth(0.0, 2.0); 16]);
        let s = stream(16, vec![fixation(azimuth(0.0, 2.0), 0.0, 1500.0, 0, 15)]);
        let m = basic_metrics(&s, &pts).unwrap();
        assert_eq!((m.fn_count, m.afd, m.sn_count, m.asa), (1.0, 1500.0, 0.0, 0.0));
        assert!(m.asa_degenerate && !m.afd_degenerate);

        let s = stream(
            6,
            vec![
                fixation(azimuth(0.0, 2.0), 0.0, 1000.0, 0, 1),
                fixation(azimuth(0.0, 2.0), 3000.0, 2000.0, 4, 5),
            ],
        );
        let m = basic_metrics(&s, &pts[..6]).unwrap();
        assert_eq!(m.afd, 1500.0);
        assert_eq!(m.sn_count, 1.0);

        let empty = stream(6, vec![]);
        let m = basic_metrics(&empty, &pts[..6]).unwrap();
        assert_eq!((m.fn_count, m.afd, m.sn_count), (0.0, 0.0, 0.0));
        assert!(m.afd_degenerate && m.asa_degenerate);
    }

    #[test]
    fn asa_uses_flanking_positions() {
        let positions = [
            azimuth(0.0, 2.0),
            azimuth(3.0, 2.0),
            azimuth(7.0, 2.0),
            azimuth(10.0, 2.0),
        ];
        let pts = points_at(&[0.0, 10.0, 20.0, 30.0], &positions);
        let s = stream(
            4,
            vec![
                fixation(positions[0], 0.0, 0.0, 0, 0),
                fixation(positions[3], 30.0, 0.0, 3, 3),
            ],
        );
        let m = basic_metrics(&s, &pts).unwrap();
        assert_eq!(m.sn_count, 1.0);
        assert!((m.asa - 10.0).abs() < 1e-9);
    }

    #[test]
    fn fqls_examples() {
        let p = zigzag(2, 10.0, 1500.0);
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 100.0).collect();
        let pts = points_at(&times, &vec![azimuth(0.0, 2.0); 30]);
        let exact = stream(
            30,
            vec![
                fixation(p.targets[0].position, 0.0, 1400.0, 0, 14),
                fixation(p.targets[1].position, 1500.0, 1400.0, 15, 29),
            ],
        );
        assert_eq!(fqls(&exact, &pts, &p).unwrap(), Some(0.0));

        let offset = p.targets[0].position + Vec3::new(0.0, 0.1, 0.0);
        let off = stream(30, vec![fixation(offset, 0.0, 1400.0, 0, 14)]);
        assert!((fqls(&off, &pts, &p).unwrap().unwrap() - 0.1).abs() < 1e-12);

        assert_eq!(fqls(&stream(30, vec![]), &pts, &p).unwrap(), None);
    }

    #[test]
    fn fqns_examples() {
        let p = zigzag(2, 10.0, 1500.0);
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 100.0).collect();
        let pts = points_at(&times, &vec![azimuth(0.0, 2.0); 30]);
        let far = stream(30, vec![fixation(azimuth(40.0, 2.2), 0.0, 1400.0, 0, 14)]);
        assert_eq!(fqns(&far, &pts, &p, FqnsCredit::Overlap).unwrap(), 0.0);

        let one = stream(30, vec![fixation(p.targets[0].position, 0.0, 700.0, 0, 7)]);
        let two = stream(
            30,
            vec![
                fixation(p.targets[0].position, 0.0, 700.0, 0, 7),
                fixation(p.targets[0].position, 750.0, 700.0, 8, 14),
            ],
        );
        let a = fqns(&one, &pts, &p, FqnsCredit::Overlap).unwrap();
        let b = fqns(&two, &pts, &p, FqnsCredit::Overlap).unwrap();
        assert!((a - 100.0 * 700.0 / 3000.0).abs() < 1e-12);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn fqns_credit_modes_differ_across_target_change() {
        let p = zigzag(2, 10.0, 1500.0);
        let times: Vec<f64> = (0..30).map(|i| i as f64 * 100.0).collect();
        let pts = points_at(&times, &vec![azimuth(0.0, 2.0); 30]);
        // Lingers on the first target 200 ms past its window.
        let s = stream(30, vec![fixation(p.targets[0].position, 300.0, 1400.0, 3, 17)]);
        let overlap = fqns(&s, &pts, &p, FqnsCredit::Overlap).unwrap();
        let full = fqns(&s, &pts, &p, FqnsCredit::FullDuration).unwrap();
        assert!((overlap - 100.0 * 1200.0 / 3000.0).abs() < 1e-12);
        assert!((full - 100.0 * 1400.0 / 3000.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_session_is_rejected() {
        let p = zigzag(2, 10.0, 1500.0);
        let pts = points_at(&[0.0, 5000.0], &[azimuth(0.0, 2.0); 2]);
        let s = stream(2, vec![]);
        assert!(matches!(
            fqns(&s, &pts, &p, FqnsCredit::Overlap),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(fqls(&s, &pts, &p), Err(Error::Alignment(_))));
    }

    #[test]
    fn sqns_examples() {
        let p = zigzag(2, 10.0, 1500.0);
        let positions = [p.targets[0].position, azimuth(0.0, 2.2), p.targets[1].position];
        let pts = points_at(&[0.0, 1500.0, 2900.0], &positions);
        let s = stream(
            3,
            vec![
                fixation(positions[0], 0.0, 0.0, 0, 0),
                fixation(positions[2], 2900.0, 0.0, 2, 2),
            ],
        );
        assert!((sqns(&s, &pts, &p).unwrap() - 100.0).abs() < 1e-9);
        let all_fix = stream(3, vec![fixation(positions[1], 0.0, 2900.0, 0, 2)]);
        assert_eq!(sqns(&all_fix, &pts, &p).unwrap(), 0.0);

        let mut flat = p.clone();
        flat.targets[1].position = flat.targets[0].position;
        assert!(matches!(sqns(&s, &pts, &flat), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn normalization_examples() {
        let (y, constant) = normalize_deviations(&[1.0, 3.0, 2.0]);
        assert_eq!(y, vec![0.0, 1.0, 0.5]);
        assert!(!constant);
        let (y, constant) = normalize_deviations(&[4.0, 4.0]);
        assert_eq!(y, vec![0.0, 0.0]);
        assert!(constant);
    }

    #[test]
    fn overall_examples() {
        assert_eq!(overall_score(&[0.0; 7]).unwrap(), 0.0);
        assert_eq!(overall_score(&[1.0; 7]).unwrap(), 1.0);
        assert!((overall_score(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(overall_score(&[0.0; 6]), Err(Error::Contract(_))));
    }

    #[test]
    fn undefined_fqls_normalizes_to_worst() {
        let a = [Some(1.0), None, Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(1.0)];
        let b = [
            Some(2.0),
            Some(0.3),
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
        ];
        let norm = Normalization::fit([&a, &b]);
        assert_eq!(norm.normalize(&a), [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(norm.normalize(&b), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(norm.constant(), [false, true, true, true, true, true, true]);
    }

    fn deviation_set() -> impl Strategy<Value = Vec<[Option<f64>; METRIC_COUNT]>> {
        proptest::collection::vec(
            proptest::array::uniform7(prop::option::weighted(0.95, 0.0f64..50.0)),
            2..40,
        )
    }

    proptest! {
        #[test]
        fn normalized_in_unit_interval_and_overall_is_mean(set in deviation_set()) {
            let norm = Normalization::fit(set.iter());
            for d in &set {
                let y = norm.normalize(d);
                prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
                let overall = overall_score(&y).unwrap();
                let mean = y.iter().sum::<f64>() / 7.0;
                prop_assert!((overall - mean).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalization_is_monotone(values in proptest::collection::vec(0.0f64..100.0, 2..50)) {
            let (y, _) = normalize_deviations(&values);
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if values[i] <= values[j] {
                        prop_assert!(y[i] <= y[j]);
                    }
                }
            }
        }

        #[test]
        fn overall_permutation_invariant_and_monotone(mut y in proptest::array::uniform7(0.0f64..1.0), k in 0usize..7, bump in 0.0f64..1.0) {
            let base = overall_score(&y).unwrap();
            let mut rev = y;
            rev.reverse();
            prop_assert!((overall_score(&rev).unwrap() - base).abs() < 1e-15);
            y[k] = (y[k] + bump).min(1.0);
            prop_assert!(overall_score(&y).unwrap() >= base);
        }

        #[test]
        fn fqls_translation_invariant(dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0, jitter in 0.0f64..0.2) {
            let p = zigzag(2, 10.0, 1500.0);
            let shift = Vec3::new(dx, dy, dz);
            let times: Vec<f64> = (0..30).map(|i| i as f64 * 100.0).collect();
            let pts = points_at(&times, &vec![azimuth(0.0, 2.0); 30]);
            let c0 = p.targets[0].position + Vec3::new(jitter, 0.0, 0.0);
            let c1 = p.targets[1].position + Vec3::new(0.0, jitter, 0.0);
            let s = stream(30, vec![fixation(c0, 0.0, 1000.0, 0, 10), fixation(c1, 1500.0, 1000.0, 15, 25)]);
            let mut moved_p = p.clone();
            for t in &mut moved_p.targets {
                t.position += shift;
            }
            let mut moved_s = s.clone();
            for f in &mut moved_s.fixations {
                f.position += shift;
            }
            let a = fqls(&s, &pts, &p).unwrap().unwrap();
            let b = fqls(&moved_s, &pts, &moved_p).unwrap().unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
