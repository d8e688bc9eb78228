//! Utilities over a set of alternatives: computing them, ranking them,
//! picking the best one, and checking that the induced preferences are
//! complete and transitive.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Default tolerance below which two utilities are considered equal.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// A choosable option. `cost` is a generic positive cost measure such as
/// travel time in hours.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub id: String,
    pub label: String,
    cost: f64,
    pub attributes: BTreeMap<String, f64>,
}

impl Alternative {
    pub fn new(id: impl Into<String>, label: impl Into<String>, cost: f64) -> Result<Self> {
        let id = id.into();
        check_cost(&id, cost)?;
        Ok(Alternative { id, label: label.into(), cost, attributes: BTreeMap::new() })
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: f64) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }
}

fn check_cost(id: &str, cost: f64) -> Result<()> {
    if !cost.is_finite() || cost <= 0.0 {
        return Err(Error::Domain {
            id: id.to_string(),
            reason: format!("cost must be positive and finite, got {cost}"),
        });
    }
    Ok(())
}

/// A finite, unitless utility.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct UtilityValue(f64);

impl UtilityValue {
    pub fn new(value: f64) -> Option<Self> {
        value.is_finite().then_some(UtilityValue(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for UtilityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// How the first of two options relates to the second.
///
/// Weak preference is `StrictlyPreferred` or `Indifferent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preference {
    StrictlyPreferred,
    StrictlyDispreferred,
    Indifferent,
}

impl Preference {
    pub fn is_weakly_preferred(self) -> bool {
        matches!(self, Preference::StrictlyPreferred | Preference::Indifferent)
    }
}

/// Utility as the inverse of cost: the shorter the trip, the better.
pub fn inverse_cost_utility(cost: f64) -> Result<UtilityValue> {
    check_cost("<anonymous>", cost)?;
    finite_utility("<anonymous>", 1.0 / cost)
}

/// [`inverse_cost_utility`] applied to an alternative; errors name it.
pub fn inverse_cost(alt: &Alternative) -> Result<UtilityValue> {
    check_cost(&alt.id, alt.cost)?;
    finite_utility(&alt.id, 1.0 / alt.cost)
}

fn finite_utility(id: &str, value: f64) -> Result<UtilityValue> {
    UtilityValue::new(value).ok_or_else(|| Error::Domain {
        id: id.to_string(),
        reason: format!("utility is not finite ({value})"),
    })
}

/// Orders alternatives by descending utility, ties by ascending id.
pub fn rank_alternatives<'a, F>(
    alts: &'a [Alternative],
    utility: F,
) -> Result<Vec<(&'a Alternative, UtilityValue)>>
where
    F: Fn(&Alternative) -> Result<UtilityValue>,
{
    if alts.is_empty() {
        return Err(Error::EmptyInput("alternative set"));
    }
    let mut seen = HashSet::with_capacity(alts.len());
    for alt in alts {
        if !seen.insert(alt.id.as_str()) {
            return Err(Error::DuplicateId(alt.id.clone()));
        }
    }
    let mut ranked = alts
        .iter()
        .map(|alt| {
            let u = utility(alt)?;
            // a handle may construct a UtilityValue through a path we don't control
            finite_utility(&alt.id, u.value())?;
            Ok((alt, u))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|(a, ua), (b, ub)| {
        ub.value().total_cmp(&ua.value()).then_with(|| a.id.cmp(&b.id))
    });
    Ok(ranked)
}

/// The alternative with the highest utility.
pub fn select_best<'a, F>(alts: &'a [Alternative], utility: F) -> Result<(&'a Alternative, UtilityValue)>
where
    F: Fn(&Alternative) -> Result<UtilityValue>,
{
    Ok(rank_alternatives(alts, utility)?[0])
}

pub fn classify_preference(a: UtilityValue, b: UtilityValue, epsilon: f64) -> Preference {
    let (a, b) = (a.value(), b.value());
    if (a - b).abs() <= epsilon {
        Preference::Indifferent
    } else if a > b + epsilon {
        Preference::StrictlyPreferred
    } else {
        Preference::StrictlyDispreferred
    }
}

/// Builds the comparator induced by a utility function.
pub fn utility_comparator<F>(
    utility: F,
    epsilon: f64,
) -> impl Fn(&Alternative, &Alternative) -> Option<Preference>
where
    F: Fn(&Alternative) -> Result<UtilityValue>,
{
    move |a, b| {
        let ua = utility(a).ok()?;
        let ub = utility(b).ok()?;
        Some(classify_preference(ua, ub, epsilon))
    }
}

/// Unordered pairs `(id, id)` the comparator cannot order. Empty means the
/// relation is complete.
pub fn check_completeness<C>(alts: &[Alternative], comparator: C) -> Vec<(String, String)>
where
    C: Fn(&Alternative, &Alternative) -> Option<Preference>,
{
    let mut violations = Vec::new();
    for (i, a) in alts.iter().enumerate() {
        for b in &alts[i + 1..] {
            if comparator(a, b).is_none() {
                violations.push((a.id.clone(), b.id.clone()));
            }
        }
    }
    violations
}

/// Outcome of a transitivity scan.
///
/// `violations` holds strict cycles `a ≻ b ≻ c ≻ a`. `warnings` holds chains
/// that mix strict and indifferent links and still end up reversed, or a
/// strict chain whose ends come out indifferent. Each set of three
/// alternatives is reported at most once, in the order it was first found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitivityReport {
    pub violations: Vec<(String, String, String)>,
    pub warnings: Vec<(String, String, String)>,
}

impl TransitivityReport {
    pub fn is_transitive(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_transitivity<C>(alts: &[Alternative], comparator: C) -> Result<TransitivityReport>
where
    C: Fn(&Alternative, &Alternative) -> Option<Preference>,
{
    let n = alts.len();
    let mut relation = vec![Preference::Indifferent; n * n];
    let mut missing = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            match comparator(&alts[i], &alts[j]) {
                Some(p) => relation[i * n + j] = p,
                None => missing += 1,
            }
        }
    }
    if missing > 0 {
        return Err(Error::Incomplete(missing));
    }

    use Preference::*;
    let rel = |i: usize, j: usize| relation[i * n + j];
    let mut report = TransitivityReport::default();
    let mut seen_violation = BTreeSet::new();
    let mut seen_warning = BTreeSet::new();
    let key = |a: usize, b: usize, c: usize| {
        let mut k = [a, b, c];
        k.sort_unstable();
        k
    };
    let ids = |a: usize, b: usize, c: usize| {
        (alts[a].id.clone(), alts[b].id.clone(), alts[c].id.clone())
    };
    for a in 0..n {
        for b in 0..n {
            if b == a {
                continue;
            }
            for c in 0..n {
                if c == a || c == b {
                    continue;
                }
                let (ab, bc, ac) = (rel(a, b), rel(b, c), rel(a, c));
                match (ab, bc) {
                    (StrictlyPreferred, StrictlyPreferred) => match ac {
                        StrictlyPreferred => {}
                        StrictlyDispreferred => {
                            if seen_violation.insert(key(a, b, c)) {
                                report.violations.push(ids(a, b, c));
                            }
                        }
                        Indifferent => {
                            if seen_warning.insert(key(a, b, c)) {
                                report.warnings.push(ids(a, b, c));
                            }
                        }
                    },
                    (StrictlyPreferred, Indifferent) | (Indifferent, StrictlyPreferred)
                        if ac == StrictlyDispreferred =>
                    {
                        if seen_warning.insert(key(a, b, c)) {
                            report.warnings.push(ids(a, b, c));
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(report)
}

/// Utility of the best alternative given up by taking the best one.
///
/// When the top two tie this equals the chosen utility, which is the
/// "rational" opportunity cost of having several optima.
pub fn opportunity_cost<F>(alts: &[Alternative], utility: F) -> Result<UtilityValue>
where
    F: Fn(&Alternative) -> Result<UtilityValue>,
{
    if alts.len() < 2 {
        return Err(Error::InsufficientOptions(alts.len()));
    }
    Ok(rank_alternatives(alts, utility)?[1].1)
}

/// True when the best and the best forgone alternative are within epsilon,
/// i.e. more than one optimal choice exists.
pub fn has_multiple_optima<F>(alts: &[Alternative], utility: F, epsilon: f64) -> Result<bool>
where
    F: Fn(&Alternative) -> Result<UtilityValue>,
{
    let ranked = rank_alternatives(alts, utility)?;
    Ok(ranked.len() >= 2
        && classify_preference(ranked[0].1, ranked[1].1, epsilon) == Preference::Indifferent)
}

#[derive(Deserialize)]
struct AlternativeRow {
    id: String,
    label: String,
    cost: String,
}

/// Reads `id,label,cost` rows. Row numbers in errors count data rows from 1.
pub fn read_alternatives<R: Read>(reader: R) -> Result<Vec<Alternative>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["id", "label", "cost"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Load(format!("missing column `{required}`")));
        }
    }
    let mut alts = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.deserialize::<AlternativeRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::row(row, e.to_string()))?;
        let cost: f64 = rec
            .cost
            .parse()
            .map_err(|_| Error::row(row, format!("cost `{}` is not a number", rec.cost)))?;
        let alt = Alternative::new(rec.id, rec.label, cost)
            .map_err(|e| Error::row(row, e.to_string()))?;
        if !seen.insert(alt.id.clone()) {
            return Err(Error::row(row, format!("duplicate id `{}`", alt.id)));
        }
        alts.push(alt);
    }
    Ok(alts)
}

pub fn load_alternatives(path: impl AsRef<Path>) -> Result<Vec<Alternative>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_alternatives(file)
}

/// Writes `id,label,cost,utility` rows in the given order.
pub fn write_ranking<W: Write>(writer: W, ranked: &[(&Alternative, UtilityValue)]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    wtr.write_record(["id", "label", "cost", "utility"])?;
    for (alt, u) in ranked {
        wtr.write_record([
            alt.id.as_str(),
            alt.label.as_str(),
            &alt.cost.to_string(),
            &u.value().to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<ranking output>", e))?;
    Ok(())
}
