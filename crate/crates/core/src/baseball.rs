//! Pitch-location analysis: every pitch of one type is an observation
//! against a fixed strike-zone reward.

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cov::Cov2;
use crate::darts::{ActionGrid, RewardGrid};
use crate::experiment::EstimatorSpec;
use crate::jeeds::JeedsConfig;
use crate::mcse::{FilterConfig, NeffMode};
use crate::metrics::{generalized_variance, strike_zone_probability, Rect};
use crate::noise::{ParamRange, SkillRanges};
use crate::rng::{SeedStreams, METRICS};
use crate::value_field::ValueFieldEngine;
use crate::{Error, Result};

/// Statcast pitch type codes.
pub const KNOWN_PITCH_TYPES: &[&str] = &[
    "FF", "FT", "SI", "FC", "SL", "ST", "SV", "CU", "KC", "CS", "CH", "FS", "FO", "SC", "KN", "EP", "FA", "PO",
];

pub const DEFAULT_MIN_PITCHES: usize = 100;
pub const ZONE_SAMPLES: usize = 1_000_000;
pub const GV_UNIT: &str = "ft^4";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchRecord {
    pub pitcher: String,
    pub pitch_type: String,
    /// Feet, horizontal, catcher's view.
    pub plate_x: f64,
    /// Feet above the ground.
    pub plate_z: f64,
}

impl PitchRecord {
    pub fn location(&self) -> [f64; 2] {
        [self.plate_x, self.plate_z]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub pitcher: String,
    pub pitch_type: String,
    pub plate_x: String,
    pub plate_z: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            pitcher: "pitcher".into(),
            pitch_type: "pitch_type".into(),
            plate_x: "plate_x".into(),
            plate_z: "plate_z".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub delimiter: u8,
    pub pitcher: Option<String>,
    pub pitch_type: Option<String>,
    pub min_count: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            columns: ColumnMap::default(),
            delimiter: b',',
            pitcher: None,
            pitch_type: Some("FF".into()),
            min_count: DEFAULT_MIN_PITCHES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub records: Vec<PitchRecord>,
    /// Rows that matched the filters but had unusable coordinates.
    pub dropped: usize,
}

fn parse_coord(field: Option<&str>) -> Option<f64> {
    let v: f64 = field?.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Reads delimited pitch data in one pass, keeping rows that match the
/// filters and have finite coordinates.
pub fn ingest_pitches<R: Read>(input: R, options: &IngestOptions) -> Result<Ingested> {
    if let Some(t) = &options.pitch_type {
        if !KNOWN_PITCH_TYPES.contains(&t.as_str()) {
            return Err(Error::Config(format!("unknown pitch type {t:?}")));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let c = &options.columns;
    let (ci, ti, xi, zi) = (
        column(&c.pitcher)?,
        column(&c.pitch_type)?,
        column(&c.plate_x)?,
        column(&c.plate_z)?,
    );

    let mut records = Vec::new();
    let mut dropped = 0;
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let pitcher = row.get(ci).unwrap_or("").trim();
        let pitch_type = row.get(ti).unwrap_or("").trim();
        if options.pitcher.as_deref().is_some_and(|p| p != pitcher) {
            continue;
        }
        if options.pitch_type.as_deref().is_some_and(|t| t != pitch_type) {
            continue;
        }
        match (parse_coord(row.get(xi)), parse_coord(row.get(zi))) {
            (Some(plate_x), Some(plate_z)) if !pitcher.is_empty() => records.push(PitchRecord {
                pitcher: pitcher.to_string(),
                pitch_type: pitch_type.to_string(),
                plate_x,
                plate_z,
            }),
            _ => {
                // Data row `line` is line `line + 2` of the file.
                log::warn!("dropping pitch on line {}: missing or invalid location", line + 2);
                dropped += 1;
            }
        }
    }
    if records.len() < options.min_count {
        let subject = match (&options.pitcher, &options.pitch_type) {
            (Some(p), Some(t)) => format!("pitcher {p} ({t})"),
            (Some(p), None) => format!("pitcher {p}"),
            (None, Some(t)) => format!("{t} pitches"),
            (None, None) => "pitch file".into(),
        };
        return Err(Error::InsufficientData {
            subject,
            count: records.len(),
            required: options.min_count,
        });
    }
    Ok(Ingested { records, dropped })
}

/// Splits records by pitcher, dropping pitchers below `min_count`.
pub fn group_by_pitcher(records: Vec<PitchRecord>, min_count: usize) -> BTreeMap<String, Vec<PitchRecord>> {
    let mut groups: BTreeMap<String, Vec<PitchRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.pitcher.clone()).or_default().push(r);
    }
    groups.retain(|pitcher, pitches| {
        let keep = pitches.len() >= min_count;
        if !keep {
            log::info!("skipping pitcher {pitcher}: {} pitches < {min_count}", pitches.len());
        }
        keep
    });
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrikeZone {
    pub x_half_width: f64,
    pub z_low: f64,
    pub z_high: f64,
}

impl Default for StrikeZone {
    fn default() -> Self {
        Self {
            x_half_width: 0.83,
            z_low: 1.5,
            z_high: 3.5,
        }
    }
}

impl StrikeZone {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_half_width > 0.0 && self.z_low < self.z_high) {
            return Err(Error::InvalidParameter(format!("invalid strike zone {self:?}")));
        }
        Ok(())
    }

    pub fn rect(&self) -> Rect {
        Rect {
            x_lo: -self.x_half_width,
            x_hi: self.x_half_width,
            y_lo: self.z_low,
            y_hi: self.z_high,
        }
    }

    pub fn center(&self) -> [f64; 2] {
        self.rect().center()
    }
}

/// Skill ranges for pitch locations, sigma in feet. Pitches only
/// concentrate on the middle of a 0/1 zone for rationalities in the
/// hundreds, hence the wide lambda range.
pub const fn pitch_ranges() -> SkillRanges {
    SkillRanges {
        sigma: ParamRange::new(0.05, 1.0),
        rho: ParamRange::new(-0.75, 0.75),
        lambda: ParamRange::new(0.001, 1000.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchModel {
    pub zone: StrikeZone,
    /// Grid spacing in feet.
    pub resolution: f64,
    /// Grid extent beyond the zone on every side, in feet.
    pub margin: f64,
}

impl Default for PitchModel {
    fn default() -> Self {
        Self {
            zone: StrikeZone::default(),
            resolution: 0.05,
            margin: 4.0 * pitch_ranges().sigma.hi,
        }
    }
}

impl PitchModel {
    pub fn reward(&self) -> Result<RewardGrid> {
        build_pitch_reward(&self.zone, self.resolution, self.margin)
    }
}

/// 1 inside the zone, 0 outside, on a grid centred on the zone and
/// reaching at least `margin` past it.
pub fn build_pitch_reward(zone: &StrikeZone, resolution: f64, margin: f64) -> Result<RewardGrid> {
    zone.validate()?;
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin must be non-negative, got {margin}"
        )));
    }
    let half = |extent: f64| ((extent + margin) / resolution - 1e-9).ceil() as usize;
    let rect = zone.rect();
    let grid = ActionGrid::new(
        resolution,
        rect.center(),
        half(zone.x_half_width),
        half(0.5 * (zone.z_high - zone.z_low)),
    )?;
    let values = grid.cells().map(|c| if rect.contains(c) { 1.0 } else { 0.0 }).collect();
    RewardGrid::new(0, grid, values)
}

/// Baseball defaults for each estimator family. The filter resamples on
/// the normalised effective sample size: a pitcher is one stationary agent
/// seen hundreds of times, and resampling with fresh particles after every
/// pitch leaves the final estimate about as noisy as the last few pitches.
pub fn pitch_estimator(method: &str) -> Result<EstimatorSpec> {
    let r = pitch_ranges();
    match method {
        "mcse" => Ok(EstimatorSpec::mcse(FilterConfig {
            ranges: r,
            neff_mode: NeffMode::NormalizedEss,
            ..FilterConfig::default()
        })),
        "jeeds" => Ok(EstimatorSpec::jeeds(JeedsConfig {
            sigma_range: r.sigma,
            lambda_range: r.lambda,
            ..JeedsConfig::default()
        })),
        other => Err(Error::Config(format!("unknown estimator {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitcherReport {
    pub pitcher: String,
    pub n_pitches: usize,
    pub estimator: String,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub lambda: f64,
    pub gv: f64,
    pub gv_unit: String,
    pub strike_zone_prob: f64,
    pub strike_zone_prob_se: f64,
    /// Mean pitch location, where ellipse plots are centred.
    pub mean_location: [f64; 2],
}

impl PitcherReport {
    pub fn covariance(&self) -> Cov2 {
        let (sx, sy) = (self.sigma_x, self.sigma_y);
        Cov2::new(sx * sx, self.rho * sx * sy, sy * sy)
    }
}

/// Runs one estimator over a pitcher's pitches in order. Randomness comes
/// from `seed` and the pitcher id only.
pub fn estimate_pitcher(
    records: &[PitchRecord],
    estimator: &EstimatorSpec,
    model: &PitchModel,
    seed: u64,
) -> Result<PitcherReport> {
    let pitcher = records.first().map(|r| r.pitcher.clone()).unwrap_or_default();
    if records.is_empty() {
        return Err(Error::InsufficientData {
            subject: "pitcher".into(),
            count: 0,
            required: 1,
        });
    }
    let streams = SeedStreams::new(seed).child(&format!("pitcher:{pitcher}"), 0);
    let engine = ValueFieldEngine::new(model.reward()?);
    let mut est = estimator.build(&streams)?;
    let with_pitcher = |e: Error| match e {
        Error::DegenerateFilter(msg) => Error::DegenerateFilter(format!("pitcher {pitcher}: {msg}")),
        Error::InvalidObservation(msg) => Error::InvalidObservation(format!("pitcher {pitcher}: {msg}")),
        other => other,
    };
    for r in records {
        est.observe(&engine, r.location()).map_err(with_pitcher)?;
    }
    let e = est.estimate();
    let cov = e.covariance();
    let zone = strike_zone_probability(
        &cov,
        model.zone.center(),
        &model.zone.rect(),
        ZONE_SAMPLES,
        &mut streams.stream(METRICS),
    )?;
    let n = records.len() as f64;
    let mean_location = [
        records.iter().map(|r| r.plate_x).sum::<f64>() / n,
        records.iter().map(|r| r.plate_z).sum::<f64>() / n,
    ];
    Ok(PitcherReport {
        pitcher,
        n_pitches: records.len(),
        estimator: estimator.label(),
        sigma_x: e.sigma_x,
        sigma_y: e.sigma_y,
        rho: e.rho,
        lambda: e.lambda,
        gv: generalized_variance(&cov),
        gv_unit: GV_UNIT.into(),
        strike_zone_prob: zone.probability,
        strike_zone_prob_se: zone.std_error,
        mean_location,
    })
}

/// Every pitcher under every estimator, in parallel. Output is ordered by
/// pitcher, then estimator.
pub fn estimate_pitchers(
    groups: &BTreeMap<String, Vec<PitchRecord>>,
    estimators: &[EstimatorSpec],
    model: &PitchModel,
    seed: u64,
) -> Result<Vec<PitcherReport>> {
    let jobs: Vec<(&Vec<PitchRecord>, &EstimatorSpec)> = groups
        .values()
        .flat_map(|g| estimators.iter().map(move |e| (g, e)))
        .collect();
    jobs.into_par_iter()
        .map(|(g, e)| estimate_pitcher(g, e, model, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from +x, radians.
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        let (s, c) = self.angle.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.semi_major).powi(2) + (v / self.semi_minor).powi(2) <= 1.0
    }
}

/// Region holding `mass` of `N(center, cov)`. For two dimensions the
/// chi-square quantile is `-2 ln(1 - mass)`.
pub fn confidence_ellipse(cov: &Cov2, mass: f64, center: [f64; 2]) -> Result<Ellipse> {
    cov.check_spd()?;
    if !(mass > 0.0 && mass < 1.0) {
        return Err(Error::InvalidParameter(format!("mass must lie in (0, 1), got {mass}")));
    }
    let q = -2.0 * (1.0 - mass).ln();
    let eig = cov.eigen();
    Ok(Ellipse {
        center,
        semi_major: (q * eig.major).sqrt(),
        semi_minor: (q * eig.minor).sqrt(),
        angle: eig.angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::standard_normal_pair;
    use std::fmt::Write as _;

    fn csv_with(rows: &[(&str, &str, &str, &str)]) -> String {
        let mut s = String::from("game,pitcher,pitch_type,plate_x,plate_z\n");
        for (p, t, x, z) in rows {
            writeln!(s, "g,{p},{t},{x},{z}").unwrap();
        }
        s
    }

    fn many(n: usize, pitcher: &str, kind: &str) -> Vec<(String, String, String, String)> {
        (0..n)
            .map(|i| {
                (
                    pitcher.to_string(),
                    kind.to_string(),
                    format!("{}", (i as f64 * 0.01) - 0.5),
                    "2.5".to_string(),
                )
            })
            .collect()
    }

    fn text(rows: &[(String, String, String, String)]) -> String {
        let refs: Vec<(&str, &str, &str, &str)> = rows
            .iter()
            .map(|(a, b, c, d)| (a.as_str(), b.as_str(), c.as_str(), d.as_str()))
            .collect();
        csv_with(&refs)
    }

    #[test]
    fn keeps_matching_rows() {
        let mut rows = many(150, "ace", "FF");
        rows.extend(many(40, "ace", "SL"));
        rows.extend(many(30, "other", "FF"));
        let opts = IngestOptions {
            pitcher: Some("ace".into()),
            ..IngestOptions::default()
        };
        let got = ingest_pitches(text(&rows).as_bytes(), &opts).unwrap();
        assert_eq!(got.records.len(), 150);
        assert_eq!(got.dropped, 0);
        assert!(got.records.iter().all(|r| r.pitcher == "ace" && r.pitch_type == "FF"));
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let rows = many(80, "ace", "FF");
        let err = ingest_pitches(text(&rows).as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(err.to_string().contains("80"), "{err}");
        match err {
            Error::InsufficientData { count, required, .. } => assert_eq!((count, required), (80, 100)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rows_without_coordinates_are_dropped() {
        let mut rows = many(100, "ace", "FF");
        rows.push(("ace".into(), "FF".into(), "".into(), "2.0".into()));
        rows.push(("ace".into(), "FF".into(), "0.1".into(), "NaN".into()));
        let got = ingest_pitches(text(&rows).as_bytes(), &IngestOptions::default()).unwrap();
        assert_eq!(got.records.len(), 100);
        assert_eq!(got.dropped, 2);
    }

    #[test]
    fn missing_and_renamed_columns() {
        let data = "pitcher,pitch_type,px\nace,FF,0.1\n";
        let err = ingest_pitches(data.as_bytes(), &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "plate_x"));

        let data = "who\ttype\tpx\tpz\nace\tFF\t0.1\t2.0\n";
        let opts = IngestOptions {
            columns: ColumnMap {
                pitcher: "who".into(),
                pitch_type: "type".into(),
                plate_x: "px".into(),
                plate_z: "pz".into(),
            },
            delimiter: b'\t',
            min_count: 1,
            ..IngestOptions::default()
        };
        let got = ingest_pitches(data.as_bytes(), &opts).unwrap();
        assert_eq!(got.records[0].location(), [0.1, 2.0]);
    }

    #[test]
    fn unknown_pitch_type_filter_is_rejected() {
        let opts = IngestOptions {
            pitch_type: Some("ZZ".into()),
            ..IngestOptions::default()
        };
        assert!(ingest_pitches("pitcher,pitch_type,plate_x,plate_z\n".as_bytes(), &opts).is_err());
    }

    #[test]
    fn grouping_drops_small_pitchers() {
        let mut rows = many(120, "b", "FF");
        rows.extend(many(50, "a", "FF"));
        let opts = IngestOptions::default();
        let got = ingest_pitches(text(&rows).as_bytes(), &opts).unwrap();
        let groups = group_by_pitcher(got.records, 100);
        assert_eq!(groups.keys().collect::<Vec<_>>(), ["b"]);
    }

    #[test]
    fn reward_grid_examples() {
        let zone = StrikeZone::default();
        let reward = build_pitch_reward(&zone, 0.05, 4.0).unwrap();
        let g = reward.grid;
        let center = g.nearest_index(zone.center()).unwrap();
        assert_eq!(reward.values[center], 1.0);
        let outside = g.nearest_index([zone.x_half_width + 3.0, 2.5]).unwrap();
        assert_eq!(reward.values[outside], 0.0);
        // Grid reaches the margin on every side.
        assert!(g.half_x as f64 * g.resolution >= zone.x_half_width + 4.0);
        assert!(g.half_y as f64 * g.resolution >= 1.0 + 4.0);
    }

    #[test]
    fn reward_fraction_matches_area() {
        for res in [0.05, 0.1, 0.07] {
            let zone = StrikeZone::default();
            let reward = build_pitch_reward(&zone, res, 2.0).unwrap();
            let g = reward.grid;
            let ones = reward.values.iter().filter(|&&v| v == 1.0).count() as f64;
            let counted = ones * g.cell_area();
            let grid_area = g.len() as f64 * g.cell_area();
            let (w, h) = (2.0 * zone.x_half_width, zone.z_high - zone.z_low);
            // Within one cell row/column on each side.
            let slack = 2.0 * res * (w + h) + 4.0 * res * res;
            assert!((counted - w * h).abs() <= slack, "res {res}: {counted} vs {}", w * h);
            assert!(((counted - w * h) / grid_area).abs() <= slack / grid_area);
        }
    }

    #[test]
    fn isotropic_ellipse_is_a_circle() {
        let s: f64 = 0.7;
        let e = confidence_ellipse(&Cov2::diag(s * s, s * s), 0.5, [0.0, 2.5]).unwrap();
        let want = s * (2.0 * 2f64.ln()).sqrt();
        assert!((e.semi_major - want).abs() < 1e-12);
        assert!((e.semi_minor - want).abs() < 1e-12);
    }

    #[test]
    fn ellipse_axes_are_ordered() {
        let e = confidence_ellipse(&Cov2::diag(1.0, 4.0), 0.5, [0.0, 0.0]).unwrap();
        assert!(e.semi_major >= e.semi_minor);
        assert!((e.angle.abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(confidence_ellipse(&Cov2::diag(1.0, 4.0), 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn ellipse_containment_small_sample() {
        let cov = Cov2::new(0.36, 0.1, 0.81);
        let e = confidence_ellipse(&cov, 0.5, [0.3, 2.0]).unwrap();
        let l = cov.cholesky().unwrap();
        let mut rng = SeedStreams::new(4).stream("ellipse");
        let n = 100_000;
        let inside = (0..n)
            .filter(|_| {
                let z = standard_normal_pair(&mut rng);
                let p = [0.3 + l[0][0] * z[0], 2.0 + l[1][0] * z[0] + l[1][1] * z[1]];
                e.contains(p)
            })
            .count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.006, "{frac}");
    }

    #[test]
    fn pitcher_order_does_not_matter() {
        let mut rng = SeedStreams::new(9).stream("pitches");
        let mut groups = BTreeMap::new();
        for name in ["p1", "p2"] {
            let pitches: Vec<PitchRecord> = (0..20)
                .map(|_| {
                    let z = standard_normal_pair(&mut rng);
                    PitchRecord {
                        pitcher: name.into(),
                        pitch_type: "FF".into(),
                        plate_x: 0.5 * z[0],
                        plate_z: 2.5 + 0.6 * z[1],
                    }
                })
                .collect();
            groups.insert(name.to_string(), pitches);
        }
        let model = PitchModel {
            resolution: 0.2,
            ..PitchModel::default()
        };
        let spec = EstimatorSpec::mcse(FilterConfig {
            m: 50,
            ranges: pitch_ranges(),
            ..FilterConfig::default()
        });
        let all = estimate_pitchers(&groups, std::slice::from_ref(&spec), &model, 3).unwrap();
        let alone = estimate_pitcher(&groups["p2"], &spec, &model, 3).unwrap();
        assert_eq!(all[1], alone);
        assert_eq!(all[0].gv_unit, "ft^4");
        assert!((all[0].gv - all[0].covariance().det()).abs() < 1e-15);
    }
}
