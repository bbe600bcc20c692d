//! Error rates and the enrollment-size / population-size protocols.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::matching::{identify, Distance, HandScope, TemplateDb, TemplateRow};
use crate::normalize::HandType;

/// A comparison score labelled genuine (probe vs own identity) or impostor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSample {
    pub score: f64,
    pub genuine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn class_counts(samples: &[ScoreSample]) -> Result<(usize, usize)> {
    let genuine = samples.iter().filter(|s| s.genuine).count();
    let impostor = samples.len() - genuine;
    if genuine == 0 || impostor == 0 {
        return Err(Error::InsufficientSamples(format!(
            "need genuine and impostor scores, have {genuine} and {impostor}"
        )));
    }
    Ok((genuine, impostor))
}

/// FAR = impostors accepted (`score <= t`), FRR = genuines rejected (`score > t`).
pub fn rates_at(samples: &[ScoreSample], t: f64) -> Result<RatePoint> {
    let (g, i) = class_counts(samples)?;
    let fa = samples.iter().filter(|s| !s.genuine && s.score <= t).count();
    let fr = samples.iter().filter(|s| s.genuine && s.score > t).count();
    Ok(RatePoint { threshold: t, far: fa as f64 / i as f64, frr: fr as f64 / g as f64 })
}

/// Rate points at every distinct score, ascending.
pub fn roc(samples: &[ScoreSample]) -> Result<Vec<RatePoint>> {
    let (g, i) = class_counts(samples)?;
    let mut sorted: Vec<ScoreSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut out = Vec::new();
    let (mut fa, mut ga) = (0usize, 0usize);
    let mut k = 0;
    while k < sorted.len() {
        let t = sorted[k].score;
        while k < sorted.len() && sorted[k].score == t {
            if sorted[k].genuine {
                ga += 1;
            } else {
                fa += 1;
            }
            k += 1;
        }
        out.push(RatePoint { threshold: t, far: fa as f64 / i as f64, frr: (g - ga) as f64 / g as f64 });
    }
    Ok(out)
}

/// `points` evenly spaced thresholds from the lowest to the highest score.
pub fn threshold_sweep(samples: &[ScoreSample], points: usize) -> Result<Vec<RatePoint>> {
    class_counts(samples)?;
    let lo = samples.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.score).fold(f64::NEG_INFINITY, f64::max);
    (0..points)
        .map(|k| {
            let t = if points == 1 { lo } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 };
            rates_at(samples, t)
        })
        .collect()
}

/// Equal error rate over the distinct-score sweep: the threshold minimizing
/// `|FAR - FRR|` (smallest on ties) and `(FAR + FRR) / 2` there.
pub fn eer(samples: &[ScoreSample]) -> Result<(f64, f64)> {
    let curve = roc(samples)?;
    let best = curve
        .iter()
        .fold(None::<&RatePoint>, |acc, p| match acc {
            Some(b) if (b.far - b.frr).abs() <= (p.far - p.frr).abs() => acc,
            _ => Some(p),
        })
        .expect("non-empty curve");
    Ok((best.threshold, (best.far + best.frr) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Left,
    Right,
    Combined,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Left, Partition::Right, Partition::Combined];

    pub fn admits(self, hand: HandType) -> bool {
        match self {
            Partition::Left => hand == HandType::Left,
            Partition::Right => hand == HandType::Right,
            Partition::Combined => true,
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Left => "left",
            Partition::Right => "right",
            Partition::Combined => "combined",
        })
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Partition::Left),
            "right" => Ok(Partition::Right),
            "combined" => Ok(Partition::Combined),
            other => Err(Error::Parameter(format!("unknown partition {other:?}"))),
        }
    }
}

/// Ordered feature vectors of one subject's hand.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSamples {
    pub subject: String,
    pub hand: HandType,
    pub samples: Vec<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub population: usize,
    /// Smallest threshold on the genuine-score grid reaching the best rate.
    pub min_threshold: f64,
    /// Percentage.
    pub recognition_rate: f64,
    pub probes: usize,
    pub correct: usize,
    pub scores: Vec<ScoreSample>,
}

impl ProtocolResult {
    /// Threshold divided by the feature count.
    pub fn min_threshold_per_feature(&self) -> f64 {
        self.min_threshold / crate::features::FEATURE_COUNT as f64
    }
}

/// Enrolls the first `k` samples of every subject in the partition and
/// probes with the last sample. Probes search only their own hand type.
pub fn table2_protocol(
    corpus: &[SubjectSamples],
    k: usize,
    partition: Partition,
    metric: Distance,
) -> Result<ProtocolResult> {
    if k == 0 {
        return Err(Error::Parameter("enrollment size K must be at least 1".into()));
    }
    let members: Vec<&SubjectSamples> = corpus.iter().filter(|s| partition.admits(s.hand)).collect();
    if members.is_empty() {
        return Err(Error::InsufficientSamples(format!("no subjects in partition {partition}")));
    }
    let mut rows = Vec::new();
    for s in &members {
        if s.samples.len() < k + 1 {
            return Err(Error::InsufficientSamples(format!(
                "subject {} ({}) has {} images, needs {}",
                s.subject,
                s.hand,
                s.samples.len(),
                k + 1
            )));
        }
        rows.extend(s.samples[..k].iter().map(|f| TemplateRow {
            subject: s.subject.clone(),
            hand: s.hand,
            features: f.clone(),
        }));
    }
    let db = TemplateDb::new(k, rows)?;

    let mut correct_scores = Vec::new();
    let mut scores = Vec::new();
    for s in &members {
        let probe = s.samples.last().expect("checked length");
        let m = identify(&db, HandScope::Only(s.hand), probe, metric)?;
        if m.best_subject == s.subject {
            correct_scores.push(m.score);
        }
        for (id, &score) in &m.per_subject_scores {
            scores.push(ScoreSample { score, genuine: *id == s.subject });
        }
    }
    let probes = members.len();
    let correct = correct_scores.len();
    Ok(ProtocolResult {
        population: probes,
        min_threshold: correct_scores.iter().copied().fold(0.0, f64::max),
        recognition_rate: 100.0 * correct as f64 / probes as f64,
        probes,
        correct,
        scores,
    })
}

/// How the population sweep picks its subjects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubjectOrder {
    /// Sorted by subject id.
    Sorted,
    /// Sorted, then shuffled with the given seed.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub partition: Partition,
    pub k: usize,
    pub population: usize,
    pub result: Result<ProtocolResult>,
}

/// Runs the protocol on the first `size` subjects for each size and each K.
pub fn population_sweep(
    corpus: &[SubjectSamples],
    sizes: &[usize],
    ks: &[usize],
    partition: Partition,
    metric: Distance,
    order: SubjectOrder,
) -> Vec<SweepRow> {
    let mut members: Vec<&SubjectSamples> = corpus.iter().filter(|s| partition.admits(s.hand)).collect();
    members.sort_by(|a, b| (&a.subject, a.hand).cmp(&(&b.subject, b.hand)));
    if let SubjectOrder::Shuffled(seed) = order {
        members.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut out = Vec::new();
    for &size in sizes {
        for &k in ks {
            let result = if size > members.len() {
                Err(Error::InsufficientSamples(format!(
                    "population {size} exceeds the {} available subjects",
                    members.len()
                )))
            } else {
                let subset: Vec<SubjectSamples> = members[..size].iter().map(|s| (*s).clone()).collect();
                table2_protocol(&subset, k, partition, metric)
            };
            out.push(SweepRow { partition, k, population: size, result });
        }
    }
    out
}

pub const RESULT_CSV_HEADER: &str = "partition,K,population,threshold,rate";

/// One `partition,K,population,threshold,rate` line; failed cells carry `error` markers.
pub fn result_csv_line(partition: Partition, k: usize, population: usize, result: &Result<ProtocolResult>) -> String {
    match result {
        Ok(r) => format!("{partition},{k},{population},{:.6},{:.2}", r.min_threshold, r.recognition_rate),
        Err(_) => format!("{partition},{k},{population},error,error"),
    }
}

pub fn roc_csv(points: &[RatePoint]) -> String {
    let mut out = String::from("threshold,far,frr\n");
    for p in points {
        out.push_str(&format!("{:.6},{:.6},{:.6}\n", p.threshold, p.far, p.frr));
    }
    out
}
