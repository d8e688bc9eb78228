//! Feedback control over a trained risk model.
//!
//! For each conflict dyad the controllable inputs are tuned to push the
//! predicted risk down: one variable at a time with golden section search,
//! or several at once with multi-start simulated annealing. Uncontrolled
//! fields never change and a dyad is only modified when the risk strictly
//! drops, so `risk_after <= risk_before` always holds.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::conflict::{Dyad, Feature, NormParams, DEMOCRACY_RANGE, N_FEATURES};
use crate::error::{Error, Result};
use crate::expectations::Predictor;
use crate::optimizers::{golden_section, simulated_annealing_from, AnnealingSchedule, Bounds, GoldenConfig};

/// A dyad counts as avoided once its controlled risk is below this.
pub const AVOIDANCE_THRESHOLD: f64 = 0.5;
/// Evenly spaced points scanned before golden section refinement.
pub const PRESCAN_POINTS: usize = 32;
/// Coordinate line-search sweeps run after annealing.
pub const POLISH_SWEEPS: usize = 2;

/// The four inputs a policy maker can act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Controllable {
    Democracy,
    Allies,
    Capability,
    Dependency,
}

impl Controllable {
    /// Column order used in reports.
    pub const ALL: [Controllable; 4] =
        [Controllable::Democracy, Controllable::Allies, Controllable::Capability, Controllable::Dependency];

    /// Bar order of the avoidance summary.
    pub const FIGURE_ORDER: [Controllable; 4] =
        [Controllable::Democracy, Controllable::Allies, Controllable::Dependency, Controllable::Capability];

    pub fn feature(self) -> Feature {
        match self {
            Controllable::Democracy => Feature::Democracy,
            Controllable::Allies => Feature::Allies,
            Controllable::Capability => Feature::Capability,
            Controllable::Dependency => Feature::Dependency,
        }
    }

    pub fn name(self) -> &'static str {
        self.feature().name()
    }

    pub fn label(self) -> &'static str {
        match self {
            Controllable::Democracy => "Democracy",
            Controllable::Allies => "Allies",
            Controllable::Capability => "Capability",
            Controllable::Dependency => "Dependency",
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Controllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Controllable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let feature: Feature = s.parse()?;
        Controllable::ALL
            .into_iter()
            .find(|c| c.feature() == feature)
            .ok_or_else(|| Error::Config(format!("`{s}` is not controllable")))
    }
}

/// Legal ranges for controlled values, in original units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlBounds {
    pub democracy: (f64, f64),
    pub capability: (f64, f64),
    pub dependency: (f64, f64),
}

impl ControlBounds {
    /// Democracy keeps its scale of [-10, 10]; capability and dependency
    /// range from 0 to their training-set maximum.
    pub fn from_norm(norm: &NormParams) -> Self {
        ControlBounds {
            democracy: DEMOCRACY_RANGE,
            capability: (0.0, norm.max[Feature::Capability.index()].max(0.0)),
            dependency: (0.0, norm.max[Feature::Dependency.index()].max(0.0)),
        }
    }

    /// Range for `var` around a dyad. A value already beyond the upper
    /// limit widens it so the original stays reachable.
    pub fn range(&self, var: Controllable, dyad: &Dyad) -> (f64, f64) {
        let (lo, hi) = match var {
            Controllable::Democracy => self.democracy,
            Controllable::Allies => (0.0, 1.0),
            Controllable::Capability => self.capability,
            Controllable::Dependency => self.dependency,
        };
        let v = dyad.get(var.feature());
        (lo.min(v), hi.max(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStartAnnealing {
    pub schedule: AnnealingSchedule,
    /// Independent annealing runs; the first starts from the observed values.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MultiStartAnnealing {
    fn default() -> Self {
        MultiStartAnnealing {
            schedule: AnnealingSchedule { t0: None, alpha: 0.9, steps_per_temp: 30, t_min: 1e-6 },
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlStrategy {
    Single { variable: Controllable, gss: GoldenConfig },
    Multiple { variables: Vec<Controllable>, sa: MultiStartAnnealing },
}

impl ControlStrategy {
    pub fn single(variable: Controllable) -> Self {
        ControlStrategy::Single { variable, gss: GoldenConfig::default() }
    }

    pub fn multiple(variables: Vec<Controllable>, seed: u64) -> Self {
        ControlStrategy::Multiple { variables, sa: MultiStartAnnealing { seed, ..Default::default() } }
    }

    pub fn variables(&self) -> Vec<Controllable> {
        match self {
            ControlStrategy::Single { variable, .. } => vec![*variable],
            ControlStrategy::Multiple { variables, .. } => canonical(variables),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ControlStrategy::Single { .. } => "single",
            ControlStrategy::Multiple { .. } => "multiple",
        }
    }

    /// Variable names joined with `+` in report column order.
    pub fn variable_set(&self) -> String {
        self.variables().iter().map(|v| v.name()).collect::<Vec<_>>().join("+")
    }

    /// Parses `single:<variable>` or `multiple:<v1>+<v2>...` (`multiple:all`
    /// for all four).
    pub fn parse(spec: &str, gss: GoldenConfig, sa: MultiStartAnnealing) -> Result<Self> {
        let (kind, vars) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("strategy `{spec}` should look like single:<var> or multiple:<vars>")))?;
        match kind.trim() {
            "single" => Ok(ControlStrategy::Single { variable: vars.parse()?, gss }),
            "multiple" => {
                let variables = if vars.trim() == "all" {
                    Controllable::ALL.to_vec()
                } else {
                    vars.split('+').map(str::parse).collect::<Result<Vec<_>>>()?
                };
                if variables.is_empty() {
                    return Err(Error::Config("multiple strategy needs at least one variable".into()));
                }
                Ok(ControlStrategy::Multiple { variables, sa })
            }
            other => Err(Error::Config(format!("unknown strategy kind `{other}`"))),
        }
    }
}

fn canonical(vars: &[Controllable]) -> Vec<Controllable> {
    let mut v = vars.to_vec();
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlledDyad {
    pub original: Dyad,
    pub controlled: Dyad,
    pub risk_before: f64,
    pub risk_after: f64,
    /// Signed change per controlled variable, original units.
    pub deltas: Vec<(Controllable, f64)>,
    pub avoided: bool,
}

impl ControlledDyad {
    pub fn delta(&self, var: Controllable) -> Option<f64> {
        self.deltas.iter().find(|(v, _)| *v == var).map(|(_, d)| *d)
    }
}

fn check_width<M: Predictor + ?Sized>(model: &M) -> Result<()> {
    if model.input_width() != N_FEATURES {
        return Err(Error::Shape(format!(
            "risk model takes {} inputs, dyads have {N_FEATURES}",
            model.input_width()
        )));
    }
    Ok(())
}

fn risk_of_features<M: Predictor + ?Sized>(model: &M, norm: &NormParams, raw: &[f64; N_FEATURES]) -> Result<f64> {
    model.predict(&norm.apply(raw)?)
}

/// Predicted conflict risk of a dyad.
pub fn risk<M: Predictor + ?Sized>(model: &M, dyad: &Dyad, norm: &NormParams) -> Result<f64> {
    check_width(model)?;
    risk_of_features(model, norm, &dyad.features())
}

fn require_conflict(dyad: &Dyad) -> Result<()> {
    if !dyad.conflict {
        return Err(Error::Config("only conflict dyads (outcome 1) are controlled".into()));
    }
    Ok(())
}

/// Objective over the chosen variables with the rest of the dyad frozen.
/// Prediction errors surface as NaN, which the optimisers reject.
fn slice_objective<'a, M: Predictor + ?Sized>(
    model: &'a M,
    norm: &'a NormParams,
    base: [f64; N_FEATURES],
    vars: &'a [Controllable],
) -> impl FnMut(&[f64]) -> f64 + 'a {
    move |x: &[f64]| {
        let mut raw = base;
        for (v, value) in vars.iter().zip(x) {
            raw[v.feature().index()] = *value;
        }
        risk_of_features(model, norm, &raw).unwrap_or(f64::NAN)
    }
}

fn finish<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    original: &Dyad,
    risk_before: f64,
    candidate: Option<(Dyad, f64)>,
    vars: &[Controllable],
) -> Result<ControlledDyad> {
    let (controlled, risk_after) = match candidate {
        Some((d, r)) if r < risk_before => (d, r),
        _ => (*original, risk_before),
    };
    debug_assert_eq!(risk_after, risk(model, &controlled, norm)?);
    let deltas = vars
        .iter()
        .map(|v| (*v, controlled.get(v.feature()) - original.get(v.feature())))
        .collect();
    Ok(ControlledDyad {
        original: *original,
        controlled,
        risk_before,
        risk_after,
        deltas,
        avoided: risk_after < AVOIDANCE_THRESHOLD,
    })
}

/// Best of the binary endpoints nearest the relaxed optimum first: the
/// rounded endpoint if it lowers the risk, else the other one if it does,
/// else `None`.
fn round_binary<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    mut dyad: Dyad,
    var: Controllable,
    relaxed: f64,
    risk_before: f64,
) -> Result<Option<(Dyad, f64)>> {
    let nearer = if relaxed >= 0.5 { 1.0 } else { 0.0 };
    for value in [nearer, 1.0 - nearer] {
        dyad.set(var.feature(), value);
        let r = risk(model, &dyad, norm)?;
        if r < risk_before {
            return Ok(Some((dyad, r)));
        }
    }
    Ok(None)
}

/// Minimises a univariate function on `[lo, hi]`: a 32-point scan picks
/// the best grid point, then golden section search refines between its
/// neighbours. Returns the better of the scan and refinement results.
fn line_search<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, gss: &GoldenConfig) -> Result<(f64, f64)> {
    let step = (hi - lo) / (PRESCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|i| if i == PRESCAN_POINTS - 1 { hi } else { lo + step * i as f64 })
        .collect();
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for (i, x) in grid.iter().enumerate() {
        let v = f(*x);
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { point: vec![*x] });
        }
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(PRESCAN_POINTS - 1)];
    let refined = golden_section(&mut f, a, b, gss.tol, gss.max_iter)?;
    if refined.best_value < best_v {
        Ok((refined.best_point[0], refined.best_value))
    } else {
        Ok((grid[best_i], best_v))
    }
}

/// Tunes one variable with golden section search over its legal range (see
/// [`line_search`]). Allies is searched as a continuous value in [0, 1] and
/// rounded afterwards.
pub fn control_single<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    dyad: &Dyad,
    variable: Controllable,
    gss: &GoldenConfig,
) -> Result<ControlledDyad> {
    require_conflict(dyad)?;
    check_width(model)?;
    let risk_before = risk(model, dyad, norm)?;
    let bounds = ControlBounds::from_norm(norm);
    let (lo, hi) = bounds.range(variable, dyad);
    let vars = [variable];
    if hi <= lo {
        return finish(model, norm, dyad, risk_before, None, &vars);
    }

    let mut objective = slice_objective(model, norm, dyad.features(), &vars);
    let (x_star, v_star) = line_search(|x| objective(&[x]), lo, hi, gss)?;

    let candidate = if variable.feature().is_binary() {
        round_binary(model, norm, *dyad, variable, x_star, risk_before)?
    } else {
        let mut d = *dyad;
        d.set(variable.feature(), x_star);
        Some((d, v_star))
    };
    finish(model, norm, dyad, risk_before, candidate, &vars)
}

/// Coordinate-wise line searches over the dimensions in `dims`, keeping
/// only improvements.
#[allow(clippy::too_many_arguments)]
fn polish<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    dyad: &Dyad,
    searched: &[Controllable],
    bounds: &Bounds,
    dims: &[usize],
    point: &mut [f64],
    value: &mut f64,
) -> Result<()> {
    let gss = GoldenConfig::default();
    let mut objective = slice_objective(model, norm, dyad.features(), searched);
    for _ in 0..POLISH_SWEEPS {
        for &i in dims {
            let (lo, hi) = bounds.ranges()[i];
            let mut probe = point.to_vec();
            let (x, v) = line_search(
                |xi| {
                    probe[i] = xi;
                    objective(&probe)
                },
                lo,
                hi,
                &gss,
            )?;
            if v < *value {
                point[i] = x;
                *value = v;
            }
        }
    }
    Ok(())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Tunes several variables jointly with multi-start simulated annealing over
/// the box of their legal ranges, then polishes the best point with
/// coordinate-wise line searches.
pub fn control_multiple<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    dyad: &Dyad,
    variables: &[Controllable],
    sa: &MultiStartAnnealing,
) -> Result<ControlledDyad> {
    if variables.is_empty() {
        return Err(Error::Config("multiple strategy needs at least one variable".into()));
    }
    if sa.restarts == 0 {
        return Err(Error::Config("annealing needs at least one restart".into()));
    }
    require_conflict(dyad)?;
    check_width(model)?;
    let vars = canonical(variables);
    let risk_before = risk(model, dyad, norm)?;
    let control_bounds = ControlBounds::from_norm(norm);

    // variables with an empty legal range stay put
    let searched: Vec<Controllable> = vars
        .iter()
        .copied()
        .filter(|v| {
            let (lo, hi) = control_bounds.range(*v, dyad);
            hi > lo
        })
        .collect();
    if searched.is_empty() {
        return finish(model, norm, dyad, risk_before, None, &vars);
    }
    let bounds = Bounds::new(searched.iter().map(|v| control_bounds.range(*v, dyad)).collect())?;
    let start: Vec<f64> = searched.iter().map(|v| dyad.get(v.feature())).collect();

    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..sa.restarts {
        let seed = splitmix64(sa.seed.wrapping_add(restart as u64));
        let from = (restart == 0).then_some(start.as_slice());
        let objective = slice_objective(model, norm, dyad.features(), &searched);
        let run = simulated_annealing_from(objective, &bounds, &sa.schedule, seed, from)?;
        if best.as_ref().map_or(true, |(_, v)| run.best_value < *v) {
            best = Some((run.best_point, run.best_value));
        }
    }
    let (mut point, mut value) = best.expect("at least one restart");

    // annealing proposals are coarse; finish with coordinate line searches
    let all: Vec<usize> = (0..searched.len()).collect();
    polish(model, norm, dyad, &searched, &bounds, &all, &mut point, &mut value)?;

    // a relaxed binary is pinned to each endpoint in turn, the rest
    // re-polished, and the lower risk kept (the nearer endpoint on ties)
    if let Some(k) = searched.iter().position(|v| v.feature().is_binary()) {
        let nearer = if point[k] >= 0.5 { 1.0 } else { 0.0 };
        let others: Vec<usize> = all.iter().copied().filter(|&i| i != k).collect();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for endpoint in [nearer, 1.0 - nearer] {
            let mut p = point.clone();
            p[k] = endpoint;
            let mut v = slice_objective(model, norm, dyad.features(), &searched)(&p);
            polish(model, norm, dyad, &searched, &bounds, &others, &mut p, &mut v)?;
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((p, v));
            }
        }
        (point, value) = best.expect("two endpoints");
    }

    let mut controlled = *dyad;
    for (v, x) in searched.iter().zip(&point) {
        controlled.set(v.feature(), *x);
    }
    let candidate = Some((controlled, value));
    finish(model, norm, dyad, risk_before, candidate, &vars)
}

/// Applies a strategy to a single conflict dyad. `stream` decorrelates the
/// annealing seeds of different dyads.
pub fn control_dyad<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    dyad: &Dyad,
    strategy: &ControlStrategy,
    stream: u64,
) -> Result<ControlledDyad> {
    match strategy {
        ControlStrategy::Single { variable, gss } => control_single(model, norm, dyad, *variable, gss),
        ControlStrategy::Multiple { variables, sa } => {
            let sa = MultiStartAnnealing { seed: splitmix64(sa.seed ^ splitmix64(stream)), ..*sa };
            control_multiple(model, norm, dyad, variables, &sa)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvoidanceReport {
    pub strategy: ControlStrategy,
    pub n_conflicts: usize,
    pub n_avoided: usize,
    pub percent_avoided: f64,
    /// Mean |change| per variable over all controlled dyads, indexed in
    /// [`Controllable::ALL`] order; zero for variables the strategy leaves alone.
    pub mean_abs_delta: [f64; 4],
}

impl AvoidanceReport {
    pub fn mean_abs_delta(&self, var: Controllable) -> f64 {
        self.mean_abs_delta[var.column()]
    }
}

/// A control run: the aggregate report plus every controlled dyad with its
/// row index in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRun {
    pub report: AvoidanceReport,
    pub details: Vec<(usize, ControlledDyad)>,
}

/// Controls every conflict dyad (peaceful rows are skipped) and aggregates
/// how many fall below the avoidance threshold. Dyads are processed in
/// parallel; results stay in input order.
pub fn avoidance_report<M: Predictor + ?Sized>(
    model: &M,
    norm: &NormParams,
    dyads: &[Dyad],
    strategy: &ControlStrategy,
) -> Result<ControlRun> {
    check_width(model)?;
    let conflicts: Vec<usize> = (0..dyads.len()).filter(|&i| dyads[i].conflict).collect();
    if conflicts.is_empty() {
        return Err(Error::NoConflicts);
    }
    let details = conflicts
        .par_iter()
        .map(|&i| control_dyad(model, norm, &dyads[i], strategy, i as u64).map(|c| (i, c)))
        .collect::<Result<Vec<_>>>()?;

    let n_conflicts = details.len();
    let n_avoided = details.iter().filter(|(_, c)| c.avoided).count();
    let mut mean_abs_delta = [0.0; 4];
    for (_, c) in &details {
        for (v, d) in &c.deltas {
            mean_abs_delta[v.column()] += d.abs();
        }
    }
    for m in &mut mean_abs_delta {
        *m /= n_conflicts as f64;
    }
    Ok(ControlRun {
        report: AvoidanceReport {
            strategy: strategy.clone(),
            n_conflicts,
            n_avoided,
            percent_avoided: 100.0 * n_avoided as f64 / n_conflicts as f64,
            mean_abs_delta,
        },
        details,
    })
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "strategy",
    "variable_set",
    "n_conflicts",
    "n_avoided",
    "percent_avoided",
    "mean_abs_delta_democracy",
    "mean_abs_delta_allies",
    "mean_abs_delta_capability",
    "mean_abs_delta_dependency",
];

pub const DETAIL_HEADER: [&str; 14] = [
    "row",
    "strategy",
    "variable_set",
    "risk_before",
    "risk_after",
    "avoided",
    "democracy_before",
    "democracy_after",
    "allies_before",
    "allies_after",
    "capability_before",
    "capability_after",
    "dependency_before",
    "dependency_after",
];

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_summary<W: Write>(w: W, reports: &[AvoidanceReport]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(SUMMARY_HEADER)?;
    for r in reports {
        let mut rec = vec![
            r.strategy.kind().to_string(),
            r.strategy.variable_set(),
            r.n_conflicts.to_string(),
            r.n_avoided.to_string(),
            r.percent_avoided.to_string(),
        ];
        rec.extend(r.mean_abs_delta.iter().map(|d| d.to_string()));
        wtr.write_record(rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<summary output>", e))
}

/// Per-dyad before/after values. `row` counts data rows of the input from 1.
pub fn write_details<W: Write>(w: W, runs: &[ControlRun]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(DETAIL_HEADER)?;
    for run in runs {
        let kind = run.report.strategy.kind();
        let set = run.report.strategy.variable_set();
        for (i, c) in &run.details {
            let mut rec = vec![
                (i + 1).to_string(),
                kind.to_string(),
                set.clone(),
                c.risk_before.to_string(),
                c.risk_after.to_string(),
                (c.avoided as u8).to_string(),
            ];
            for v in Controllable::ALL {
                rec.push(c.original.get(v.feature()).to_string());
                rec.push(c.controlled.get(v.feature()).to_string());
            }
            wtr.write_record(rec)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<detail output>", e))
}

/// One row of a summary CSV as read back for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub variable_set: String,
    pub n_conflicts: usize,
    pub n_avoided: usize,
    pub percent_avoided: f64,
    pub mean_abs_delta: [f64; 4],
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SUMMARY_HEADER.iter().copied()) {
        return Err(Error::Load(format!("summary header should be `{}`", SUMMARY_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(row, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|_| Error::row(row, format!("{}: cannot parse `{}`", SUMMARY_HEADER[k], &rec[k])))
        };
        let count = |k: usize| -> Result<usize> {
            rec[k].parse::<usize>().map_err(|_| Error::row(row, format!("{}: cannot parse `{}`", SUMMARY_HEADER[k], &rec[k])))
        };
        let strategy = rec[0].to_string();
        if strategy != "single" && strategy != "multiple" {
            return Err(Error::row(row, format!("unknown strategy `{strategy}`")));
        }
        let variable_set = rec[1].to_string();
        for v in variable_set.split('+') {
            v.parse::<Controllable>().map_err(|e| Error::row(row, e.to_string()))?;
        }
        let percent_avoided = num(4)?;
        if !(0.0..=100.0).contains(&percent_avoided) {
            return Err(Error::row(row, "percent_avoided outside [0, 100]"));
        }
        rows.push(SummaryRow {
            strategy,
            variable_set,
            n_conflicts: count(2)?,
            n_avoided: count(3)?,
            percent_avoided,
            mean_abs_delta: [num(5)?, num(6)?, num(7)?, num(8)?],
        });
    }
    Ok(rows)
}

/// Plot-ready `(label, percent_avoided)` pairs: single strategies in the
/// order Democracy, Allies, Dependency, Capability, then multiple strategies
/// in input order. A multiple strategy over all four variables is labelled
/// `Multiple`.
pub fn plot_rows(summary: &[SummaryRow]) -> Result<Vec<(String, f64)>> {
    if summary.is_empty() {
        return Err(Error::EmptyInput("summary"));
    }
    let mut out = Vec::new();
    for var in Controllable::FIGURE_ORDER {
        for row in summary.iter().filter(|r| r.strategy == "single") {
            if row.variable_set.parse::<Controllable>()? == var {
                out.push((var.label().to_string(), row.percent_avoided));
            }
        }
    }
    for row in summary.iter().filter(|r| r.strategy == "multiple") {
        let vars = canonical(&row.variable_set.split('+').map(str::parse).collect::<Result<Vec<Controllable>>>()?);
        let label = if vars == Controllable::ALL {
            "Multiple".to_string()
        } else {
            format!("Multiple({})", row.variable_set)
        };
        out.push((label, row.percent_avoided));
    }
    Ok(out)
}

pub fn write_plot<W: Write>(w: W, rows: &[(String, f64)]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["strategy_label", "percent_avoided"])?;
    for (label, pct) in rows {
        wtr.write_record([label.as_str(), &pct.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<plot output>", e))
}
