//! Template database and minimum-distance classification.
//!
//! For a probe `b`, each enrolled row `a_i` gets the row sum
//! `S_i = sum_j sqrt((a_ij - b_j)^2)`, i.e. the L1 distance. A subject's score
//! is the mean of `S_i` over its K rows and the recognized class is the
//! subject with the smallest score.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{format_feature_row, parse_feature_row, FeatureVector, FEATURE_COUNT};
use crate::normalize::HandType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    /// Row sum of per-feature absolute differences.
    #[default]
    L1,
    /// Euclidean norm, kept for comparison runs.
    L2,
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Distance::L1),
            "l2" => Ok(Distance::L2),
            other => Err(Error::Parameter(format!("unknown distance {other:?}"))),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::FeatureDimension { expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// `sum_j sqrt((a_j - b_j)^2)`, which is the L1 distance.
pub fn row_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

pub fn distance(metric: Distance, a: &[f64], b: &[f64]) -> Result<f64> {
    match metric {
        Distance::L1 => row_distance(a, b),
        Distance::L2 => {
            check_dims(a, b)?;
            Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        }
    }
}

/// Which enrolled rows a search considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandScope {
    Only(HandType),
    Any,
}

impl HandScope {
    pub fn admits(self, hand: HandType) -> bool {
        match self {
            HandScope::Only(h) => h == hand,
            HandScope::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRow {
    pub subject: String,
    pub hand: HandType,
    pub features: FeatureVector,
}

fn check_subject_id(id: &str) -> Result<()> {
    if id.trim().is_empty() || id.contains([',', '\n', '\r']) || id != id.trim() {
        return Err(Error::Format(format!("invalid subject id {id:?}")));
    }
    Ok(())
}

const DB_MAGIC: &str = "handgeom-db v1";

/// Immutable set of enrolled rows with K rows per subject and hand.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateDb {
    k: usize,
    rows: Vec<TemplateRow>,
}

impl TemplateDb {
    pub fn new(k: usize, rows: Vec<TemplateRow>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Parameter("enrollment size K must be at least 1".into()));
        }
        let mut counts: BTreeMap<(&str, HandType), usize> = BTreeMap::new();
        for row in &rows {
            check_subject_id(&row.subject)?;
            if row.features.len() != FEATURE_COUNT {
                return Err(Error::FeatureDimension { expected: FEATURE_COUNT, got: row.features.len() });
            }
            *counts.entry((row.subject.as_str(), row.hand)).or_default() += 1;
        }
        if let Some(((id, hand), n)) = counts.iter().find(|(_, &n)| n != k) {
            return Err(Error::Format(format!("subject {id} ({hand}) has {n} rows, expected K={k}")));
        }
        Ok(TemplateDb { k, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> &[TemplateRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, subject: &str, hand: HandType) -> bool {
        self.rows.iter().any(|r| r.subject == subject && r.hand == hand)
    }

    /// Distinct subject ids, sorted.
    pub fn subjects(&self, scope: HandScope) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .rows
            .iter()
            .filter(|r| scope.admits(r.hand))
            .map(|r| r.subject.as_str())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// New database with `rows` appended; rejects subjects already enrolled for that hand.
    pub fn enroll(&self, rows: Vec<TemplateRow>) -> Result<TemplateDb> {
        for r in &rows {
            if self.contains(&r.subject, r.hand) {
                return Err(Error::DuplicateIdentity(format!("{} ({})", r.subject, r.hand)));
            }
        }
        let mut all = self.rows.clone();
        all.extend(rows);
        TemplateDb::new(self.k, all)
    }

    /// Per-subject mean row distance over the rows admitted by `scope`.
    pub fn subject_scores(&self, scope: HandScope, probe: &[f64], metric: Distance) -> Result<BTreeMap<String, f64>> {
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| scope.admits(r.hand)) {
            let s = distance(metric, &row.features, probe)?;
            let e = sums.entry(row.subject.as_str()).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
        Ok(sums
            .into_iter()
            .map(|(id, (sum, n))| (id.to_string(), sum / n as f64))
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{DB_MAGIC} n={FEATURE_COUNT} K={}\n", self.k);
        for r in &self.rows {
            out.push_str(&format_feature_row(&r.subject, r.hand, &r.features));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<TemplateDb> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty database file".into()))?;
        let rest = header
            .strip_prefix(DB_MAGIC)
            .ok_or_else(|| Error::Format(format!("bad database header {header:?}")))?;
        let mut n = None;
        let mut k = None;
        for tok in rest.split_whitespace() {
            if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("K=") {
                k = v.parse::<usize>().ok();
            } else {
                return Err(Error::Format(format!("unexpected header token {tok:?}")));
            }
        }
        match n {
            Some(FEATURE_COUNT) => {}
            Some(other) => return Err(Error::FeatureDimension { expected: FEATURE_COUNT, got: other }),
            None => return Err(Error::Format("header lacks n=".into())),
        }
        let k = k.ok_or_else(|| Error::Format("header lacks K=".into()))?;
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (subject, hand, features) = parse_feature_row(l)?;
                Ok(TemplateRow { subject, hand, features })
            })
            .collect::<Result<Vec<_>>>()?;
        TemplateDb::new(k, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn at(score: f64, threshold: f64) -> Decision {
        if score <= threshold {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub best_subject: String,
    pub score: f64,
    pub per_subject_scores: BTreeMap<String, f64>,
}

impl MatchResult {
    pub fn decision(&self, threshold: f64) -> Decision {
        Decision::at(self.score, threshold)
    }
}

/// One-to-many search. Equal scores resolve to the lexicographically smallest id.
pub fn identify(db: &TemplateDb, scope: HandScope, probe: &[f64], metric: Distance) -> Result<MatchResult> {
    let scores = db.subject_scores(scope, probe, metric)?;
    // BTreeMap iterates ids in order, so a strict `<` keeps the smallest id on ties.
    let (best, score) = scores
        .iter()
        .fold(None::<(&String, f64)>, |acc, (id, &s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((id, s)),
        })
        .ok_or(Error::EmptyDatabase)?;
    Ok(MatchResult { best_subject: best.clone(), score, per_subject_scores: scores.clone() })
}

/// One-to-one check of a claimed identity.
pub fn verify(
    db: &TemplateDb,
    claimed: &str,
    scope: HandScope,
    probe: &[f64],
    threshold: f64,
    metric: Distance,
) -> Result<(Decision, f64)> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in db.rows.iter().filter(|r| r.subject == claimed && scope.admits(r.hand)) {
        sum += distance(metric, &row.features, probe)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::UnknownIdentity(claimed.to_string()));
    }
    let score = sum / n as f64;
    Ok((Decision::at(score, threshold), score))
}

/// A probe with its true identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProbe {
    pub subject: String,
    pub hand: HandType,
    pub features: FeatureVector,
}

/// Percentage of probes identified as their true subject with score `<= threshold`.
/// Each probe searches only its own hand type.
pub fn recognition_rate(db: &TemplateDb, probes: &[LabeledProbe], threshold: f64, metric: Distance) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::Parameter("empty probe set".into()));
    }
    let mut hits = 0usize;
    for p in probes {
        if !db.contains(&p.subject, p.hand) {
            return Err(Error::UnknownIdentity(format!("{} ({})", p.subject, p.hand)));
        }
        let m = identify(db, HandScope::Only(p.hand), &p.features, metric)?;
        if m.best_subject == p.subject && m.score <= threshold {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / probes.len() as f64)
}
