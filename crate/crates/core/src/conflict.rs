//! Dyadic interstate-conflict data: schema, CSV ingestion, one-year lagging
//! of panels, min-max normalisation and a seeded synthetic generator.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::expectations::{logistic, LabeledDataset};

pub const N_FEATURES: usize = 7;

/// The seven dyadic explanatory variables, in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Allies,
    /// Written "Contingency" in some sources.
    Contiguity,
    Distance,
    MajorPower,
    Democracy,
    Dependency,
    Capability,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::Allies,
        Feature::Contiguity,
        Feature::Distance,
        Feature::MajorPower,
        Feature::Democracy,
        Feature::Dependency,
        Feature::Capability,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Allies => "allies",
            Feature::Contiguity => "contiguity",
            Feature::Distance => "distance",
            Feature::MajorPower => "major_power",
            Feature::Democracy => "democracy",
            Feature::Dependency => "dependency",
            Feature::Capability => "capability",
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Feature::Allies | Feature::Contiguity | Feature::MajorPower)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == lower)
            .or_else(|| (lower == "contingency").then_some(Feature::Contiguity))
            .ok_or_else(|| Error::Config(format!("unknown variable `{s}`")))
    }
}

pub const DEMOCRACY_RANGE: (f64, f64) = (-10.0, 10.0);

/// One country pair in one year.
///
/// `capability` is the base-10 log of the stronger-to-weaker composite
/// capability ratio and so is never negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dyad {
    pub allies: bool,
    pub contiguity: bool,
    pub distance: f64,
    pub major_power: bool,
    pub democracy: f64,
    pub dependency: f64,
    pub capability: f64,
    pub conflict: bool,
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Dyad {
    pub fn features(&self) -> [f64; N_FEATURES] {
        [
            flag(self.allies),
            flag(self.contiguity),
            self.distance,
            flag(self.major_power),
            self.democracy,
            self.dependency,
            self.capability,
        ]
    }

    pub fn get(&self, feature: Feature) -> f64 {
        self.features()[feature.index()]
    }

    /// Sets one field. Binary fields take `value != 0`.
    pub fn set(&mut self, feature: Feature, value: f64) {
        match feature {
            Feature::Allies => self.allies = value != 0.0,
            Feature::Contiguity => self.contiguity = value != 0.0,
            Feature::Distance => self.distance = value,
            Feature::MajorPower => self.major_power = value != 0.0,
            Feature::Democracy => self.democracy = value,
            Feature::Dependency => self.dependency = value,
            Feature::Capability => self.capability = value,
        }
    }

    pub fn outcome(&self) -> f64 {
        flag(self.conflict)
    }

    /// Checks field invariants; the error names the offending field.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("distance", self.distance),
            ("democracy", self.democracy),
            ("dependency", self.dependency),
            ("capability", self.capability),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if self.distance < 0.0 {
            return Err(format!("distance must be non-negative ({})", self.distance));
        }
        if !(DEMOCRACY_RANGE.0..=DEMOCRACY_RANGE.1).contains(&self.democracy) {
            return Err(format!("democracy out of range [-10, 10] ({})", self.democracy));
        }
        if self.dependency < 0.0 {
            return Err(format!("dependency must be non-negative ({})", self.dependency));
        }
        if self.capability < 0.0 {
            return Err(format!("capability must be non-negative ({})", self.capability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub dyad_id: String,
    pub year: i32,
    pub dyad: Dyad,
}

/// Yearly observations keyed by `(dyad_id, year)`, kept sorted by that key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DyadPanel {
    rows: Vec<PanelRow>,
}

impl DyadPanel {
    pub fn new(mut rows: Vec<PanelRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.dyad_id.cmp(&b.dyad_id).then(a.year.cmp(&b.year)));
        if let Some(w) = rows.windows(2).find(|w| w[0].dyad_id == w[1].dyad_id && w[0].year == w[1].year) {
            return Err(Error::Load(format!("duplicate panel key ({}, {})", w[0].dyad_id, w[0].year)));
        }
        Ok(DyadPanel { rows })
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lagged {
    pub rows: Vec<Dyad>,
    /// Observations with no record for the previous year.
    pub dropped: usize,
}

/// Pairs each observation with the same dyad's previous year: features come
/// from year − 1, the outcome from the year itself.
pub fn lag_panel(panel: &DyadPanel) -> Lagged {
    let mut rows = Vec::new();
    let mut dropped = 0;
    let mut prev: Option<&PanelRow> = None;
    for row in &panel.rows {
        match prev {
            Some(p) if p.dyad_id == row.dyad_id && p.year + 1 == row.year => {
                rows.push(Dyad { conflict: row.dyad.conflict, ..p.dyad });
            }
            _ => dropped += 1,
        }
        prev = Some(row);
    }
    Lagged { rows, dropped }
}

/// Contents of a dyad CSV: a keyed panel when `dyad_id,year` are present,
/// otherwise already-lagged rows.
#[derive(Debug, Clone, PartialEq)]
pub enum DyadSet {
    Flat(Vec<Dyad>),
    Panel(DyadPanel),
}

impl DyadSet {
    pub fn dyads(&self) -> Vec<Dyad> {
        match self {
            DyadSet::Flat(rows) => rows.clone(),
            DyadSet::Panel(p) => p.rows.iter().map(|r| r.dyad).collect(),
        }
    }

    /// Rows ready for training: panels are lagged, flat files pass through.
    pub fn training_rows(&self) -> Lagged {
        match self {
            DyadSet::Flat(rows) => Lagged { rows: rows.clone(), dropped: 0 },
            DyadSet::Panel(p) => lag_panel(p),
        }
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "dyad_id",
    "year",
    "allies",
    "contiguity",
    "distance",
    "major_power",
    "democracy",
    "dependency",
    "capability",
    "outcome",
];

fn parse_cell(row: usize, field: &str, cell: &str) -> Result<f64> {
    cell.trim()
        .parse::<f64>()
        .map_err(|_| Error::row(row, format!("{field}: cannot parse `{cell}`")))
}

fn parse_binary(row: usize, field: &str, cell: &str) -> Result<bool> {
    let v = parse_cell(row, field, cell)?;
    if v == 0.0 {
        Ok(false)
    } else if v == 1.0 {
        Ok(true)
    } else {
        Err(Error::row(row, format!("{field} must be 0 or 1 ({cell})")))
    }
}

/// Parses a dyad CSV. Row numbers in errors count data rows from 1.
pub fn read_dyads<R: Read>(reader: R) -> Result<DyadSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(&CSV_HEADER[2..]) {
        let found = column(name).or_else(|| (*name == "contiguity").then(|| column("contingency")).flatten());
        *slot = found.ok_or_else(|| Error::Load(format!("missing column `{name}`")))?;
    }
    let keys = match (column("dyad_id"), column("year")) {
        (Some(i), Some(y)) => Some((i, y)),
        (None, None) => None,
        (Some(_), None) => return Err(Error::Load("missing column `year`".into())),
        (None, Some(_)) => return Err(Error::Load("missing column `dyad_id`".into())),
    };

    let mut flat = Vec::new();
    let mut panel = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(row, e.to_string()))?;
        let cell = |k: usize| rec.get(idx[k]).unwrap_or("");
        let dyad = Dyad {
            allies: parse_binary(row, "allies", cell(0))?,
            contiguity: parse_binary(row, "contiguity", cell(1))?,
            distance: parse_cell(row, "distance", cell(2))?,
            major_power: parse_binary(row, "major_power", cell(3))?,
            democracy: parse_cell(row, "democracy", cell(4))?,
            dependency: parse_cell(row, "dependency", cell(5))?,
            capability: parse_cell(row, "capability", cell(6))?,
            conflict: parse_binary(row, "outcome", cell(7))?,
        };
        dyad.validate().map_err(|m| Error::row(row, m))?;
        match keys {
            Some((id_col, year_col)) => {
                let dyad_id = rec.get(id_col).unwrap_or("").to_string();
                if dyad_id.is_empty() {
                    return Err(Error::row(row, "dyad_id is empty"));
                }
                let year_cell = rec.get(year_col).unwrap_or("");
                let year = year_cell
                    .parse::<i32>()
                    .map_err(|_| Error::row(row, format!("year: cannot parse `{year_cell}`")))?;
                panel.push(PanelRow { dyad_id, year, dyad });
            }
            None => flat.push(dyad),
        }
    }
    Ok(match keys {
        Some(_) => DyadSet::Panel(DyadPanel::new(panel)?),
        None => DyadSet::Flat(flat),
    })
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<DyadSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dyads(file)
}

fn dyad_cells(d: &Dyad) -> [String; 8] {
    let b = |v: bool| if v { "1".to_string() } else { "0".to_string() };
    [
        b(d.allies),
        b(d.contiguity),
        d.distance.to_string(),
        b(d.major_power),
        d.democracy.to_string(),
        d.dependency.to_string(),
        d.capability.to_string(),
        b(d.conflict),
    ]
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Writes un-keyed rows (no `dyad_id,year` columns).
pub fn write_dyads<W: Write>(w: W, dyads: &[Dyad]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(&CSV_HEADER[2..])?;
    for d in dyads {
        wtr.write_record(dyad_cells(d))?;
    }
    wtr.flush().map_err(|e| Error::io("<dyad output>", e))
}

pub fn write_panel<W: Write>(w: W, panel: &DyadPanel) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in &panel.rows {
        let mut rec = vec![r.dyad_id.clone(), r.year.to_string()];
        rec.extend(dyad_cells(&r.dyad));
        wtr.write_record(rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<dyad output>", e))
}

/// Per-feature min-max scaling fitted on a training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl NormParams {
    pub fn fit(dyads: &[Dyad]) -> Result<Self> {
        if dyads.is_empty() {
            return Err(Error::EmptyInput("normalisation set"));
        }
        let mut min = [f64::INFINITY; N_FEATURES];
        let mut max = [f64::NEG_INFINITY; N_FEATURES];
        for d in dyads {
            for (j, v) in d.features().into_iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(NormParams { min, max })
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.max[j] <= self.min[j]
    }

    /// Maps raw features through the fitted affine map. Constant features go
    /// to 0. Values outside the fitted range land outside [0, 1].
    pub fn apply(&self, raw: &[f64]) -> Result<[f64; N_FEATURES]> {
        if raw.len() != N_FEATURES {
            return Err(Error::Shape(format!("expected {N_FEATURES} features, got {}", raw.len())));
        }
        let mut out = [0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            if !self.is_constant(j) {
                out[j] = (raw[j] - self.min[j]) / (self.max[j] - self.min[j]);
            }
        }
        Ok(out)
    }

    /// Inverse of [`apply`](Self::apply); constant features map back to
    /// their single observed value.
    pub fn invert(&self, scaled: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            out[j] = if self.is_constant(j) {
                self.min[j]
            } else {
                self.min[j] + scaled[j] * (self.max[j] - self.min[j])
            };
        }
        out
    }

    /// One `feature min max` line per feature, 17 significant digits.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for f in Feature::ALL {
            let j = f.index();
            writeln!(w, "{} {:.16e} {:.16e}", f.name(), self.min[j], self.max[j])?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut min = [f64::NAN; N_FEATURES];
        let mut max = [f64::NAN; N_FEATURES];
        let mut seen = [false; N_FEATURES];
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::io("<norm params>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Load(format!("norm params line {}: expected `feature min max`", i + 1));
            if parts.len() != 3 {
                return Err(bad());
            }
            let f: Feature = parts[0].parse()?;
            let lo: f64 = parts[1].parse().map_err(|_| bad())?;
            let hi: f64 = parts[2].parse().map_err(|_| bad())?;
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(bad());
            }
            min[f.index()] = lo;
            max[f.index()] = hi;
            seen[f.index()] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Shape(format!("norm params missing feature `{}`", Feature::ALL[j])));
        }
        Ok(NormParams { min, max })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }
}

/// Fits [`NormParams`] on `dyads` and returns the scaled feature rows.
pub fn normalize(dyads: &[Dyad]) -> Result<(Vec<[f64; N_FEATURES]>, NormParams)> {
    let params = NormParams::fit(dyads)?;
    let rows = dyads.iter().map(|d| params.apply(&d.features())).collect::<Result<Vec<_>>>()?;
    Ok((rows, params))
}

/// Normalised features with conflict outcomes as targets.
pub fn to_dataset(dyads: &[Dyad], norm: &NormParams) -> Result<LabeledDataset> {
    let rows = dyads
        .iter()
        .map(|d| norm.apply(&d.features()).map(|r| r.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let targets = dyads.iter().map(Dyad::outcome).collect();
    LabeledDataset::new(rows, targets, Feature::ALL.iter().map(|f| f.name().to_string()).collect())
}

/// Scales the generator uses to bring its raw draws into [0, 1] before the
/// logistic link. Values beyond a scale saturate at 1.
pub const SYNTH_SCALES: SynthScales = SynthScales { distance: 20.0, dependency: 0.2, capability: 3.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthScales {
    pub distance: f64,
    pub dependency: f64,
    pub capability: f64,
}

/// Intercept followed by one weight per feature in schema order. Contiguous,
/// non-allied, autocratic, economically independent dyads are the most
/// conflict-prone; the intercept puts the conflict base rate near 0.29.
pub const DEFAULT_COEFFICIENTS: [f64; N_FEATURES + 1] = [9.9, -5.0, 5.0, -4.0, 3.0, -14.0, -16.0, -10.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub coefficients: [f64; N_FEATURES + 1],
    /// Standard deviation of measurement noise on the continuous features,
    /// in units of each feature's generator scale.
    pub noise_sd: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { n: 1000, seed: 1, coefficients: DEFAULT_COEFFICIENTS, noise_sd: 0.0 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::Config(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Features of a dyad scaled the way the generator's logistic model sees
/// them.
pub fn synth_scaled(d: &Dyad) -> [f64; N_FEATURES] {
    [
        flag(d.allies),
        flag(d.contiguity),
        (d.distance / SYNTH_SCALES.distance).min(1.0),
        flag(d.major_power),
        (d.democracy - DEMOCRACY_RANGE.0) / (DEMOCRACY_RANGE.1 - DEMOCRACY_RANGE.0),
        (d.dependency / SYNTH_SCALES.dependency).min(1.0),
        (d.capability / SYNTH_SCALES.capability).min(1.0),
    ]
}

/// Conflict probability under the generating model.
pub fn synth_probability(coefficients: &[f64; N_FEATURES + 1], d: &Dyad) -> f64 {
    let x = synth_scaled(d);
    let z = coefficients[0] + coefficients[1..].iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    logistic(z)
}

/// Draws `n` dyads from one seeded stream.
///
/// Binaries are Bernoulli (allies 0.35, contiguity 0.3, major power 0.2),
/// democracy is uniform on [-10, 10], distance log-normal around 4, dependency
/// and capability exponential with means 0.04 and 1. The outcome is drawn
/// from the logistic model, after which optional noise perturbs the
/// continuous features (clamped back into their legal ranges).
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<Dyad>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let distance = LogNormal::new(4f64.ln(), 0.7).expect("valid log-normal");
    let dependency = Exp::new(25.0).expect("valid rate");
    let capability = Exp::new(1.0).expect("valid rate");
    let mut out = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let mut d = Dyad {
            allies: rng.gen_bool(0.35),
            contiguity: rng.gen_bool(0.3),
            distance: distance.sample(&mut rng),
            major_power: rng.gen_bool(0.2),
            democracy: rng.gen_range(DEMOCRACY_RANGE.0..=DEMOCRACY_RANGE.1),
            dependency: dependency.sample(&mut rng),
            capability: capability.sample(&mut rng),
            conflict: false,
        };
        let p = synth_probability(&cfg.coefficients, &d);
        d.conflict = rng.gen::<f64>() < p;
        out.push(d);
    }
    // noise comes after every clean draw so it never shifts them
    if cfg.noise_sd > 0.0 {
        let mut noise = || -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.noise_sd * z
        };
        for d in &mut out {
            d.distance = (d.distance + noise() * SYNTH_SCALES.distance).max(0.0);
            d.democracy = (d.democracy + noise() * (DEMOCRACY_RANGE.1 - DEMOCRACY_RANGE.0))
                .clamp(DEMOCRACY_RANGE.0, DEMOCRACY_RANGE.1);
            d.dependency = (d.dependency + noise() * SYNTH_SCALES.dependency).max(0.0);
            d.capability = (d.capability + noise() * SYNTH_SCALES.capability).max(0.0);
        }
    }
    Ok(out)
}
