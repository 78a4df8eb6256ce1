//! Per-redditor splits, macro F1 and cohort aggregation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Judgment};
use crate::error::{Error, Result};
use crate::inference::PredictionRecord;
use crate::util::sha256_hex;

pub const DEFAULT_FOLDS: usize = 5;
pub const TRAIN_FRACTION: f64 = 0.6;
pub const VALIDATION_FRACTION: f64 = 0.1;
pub const TEST_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub redditor_id: String,
    pub fold: usize,
    pub seed: u64,
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

fn class_seed(seed: u64, redditor: &str, label: Judgment) -> u64 {
    let h = sha256_hex(format!("{seed}:{redditor}:{label}"));
    u64::from_str_radix(&h[..16], 16).expect("hex digest")
}

/// Stratified 60/10/30 splits of a redditor's judged instances. Each class
/// is shuffled once; fold `f` rotates it by `f/folds` of its length before
/// cutting test, validation and train in that order.
pub fn make_splits(corpus: &Corpus, redditor: &str, seed: u64, folds: usize) -> Result<Vec<Split>> {
    if !corpus.redditors.contains(redditor) {
        return Err(Error::UnknownRedditor(redditor.to_string()));
    }
    if folds == 0 {
        return Err(Error::InvalidInput("folds must be positive".into()));
    }
    let mut by_class: BTreeMap<Judgment, Vec<String>> = BTreeMap::new();
    for inst in corpus.instances_of(redditor) {
        if let Some(j) = inst.judgment {
            by_class.entry(j).or_default().push(inst.instance_id.clone());
        }
    }
    let total: usize = by_class.values().map(Vec::len).sum();
    if total < folds * 2 {
        return Err(Error::InvalidInput(format!(
            "redditor {redditor} has {total} judged instances, need at least {}",
            folds * 2
        )));
    }
    for (label, ids) in by_class.iter_mut() {
        ids.sort();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(class_seed(seed, redditor, *label)));
    }
    let mut splits = Vec::with_capacity(folds);
    for fold in 0..folds {
        let mut split = Split {
            redditor_id: redditor.to_string(),
            fold,
            seed,
            train: BTreeSet::new(),
            validation: BTreeSet::new(),
            test: BTreeSet::new(),
        };
        for ids in by_class.values() {
            let n = ids.len();
            let mut rotated = ids.clone();
            rotated.rotate_left(fold * n / folds);
            let n_test = (n as f64 * TEST_FRACTION).round() as usize;
            let n_val = ((n as f64 * VALIDATION_FRACTION).round() as usize).min(n - n_test);
            split.test.extend(rotated[..n_test].iter().cloned());
            split.validation.extend(rotated[n_test..n_test + n_val].iter().cloned());
            split.train.extend(rotated[n_test + n_val..].iter().cloned());
        }
        splits.push(split);
    }
    Ok(splits)
}

/// Unweighted mean of per-class F1 over the classes present in `gold`.
/// Pairs are `(predicted, gold)`.
pub fn macro_f1(pairs: &[(Judgment, Judgment)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let mut total = 0.0;
    let mut classes = 0;
    for class in [Judgment::Acceptable, Judgment::Unacceptable] {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for &(p, g) in pairs {
            match (p == class, g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fn_ == 0 {
            continue;
        }
        total += 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        classes += 1;
    }
    Ok(total / classes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cohort {
    All,
    Top50,
    Bottom50,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CohortScores {
    pub all: Option<f64>,
    pub contro: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_redditor_f1: BTreeMap<String, f64>,
    /// F1 over controversial test instances, for redditors that have any.
    pub per_redditor_contro_f1: BTreeMap<String, f64>,
    pub overall: f64,
    pub cohort_scores: BTreeMap<Cohort, CohortScores>,
    /// Lowest and highest overall score among the individual sample runs.
    pub run_spread: Option<(f64, f64)>,
    pub scored_predictions: usize,
    pub failed_predictions: usize,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Splits redditors by instance count: those at or above the median form Top50.
pub fn cohorts(counts: &BTreeMap<String, usize>) -> BTreeMap<String, Cohort> {
    let mut sorted: Vec<usize> = counts.values().copied().collect();
    sorted.sort_unstable();
    let n = sorted.len();
    if n == 0 {
        return BTreeMap::new();
    }
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    };
    counts
        .iter()
        .map(|(id, &c)| {
            let cohort = if c as f64 >= median { Cohort::Top50 } else { Cohort::Bottom50 };
            (id.clone(), cohort)
        })
        .collect()
}

fn build_report(
    per_redditor: &BTreeMap<String, f64>,
    contro: &BTreeMap<String, f64>,
    corpus: &Corpus,
) -> Result<EvalReport> {
    if per_redditor.is_empty() {
        return Err(Error::Empty("no per-redditor scores".into()));
    }
    let all_counts = corpus.instance_counts();
    let mut counts = BTreeMap::new();
    for id in per_redditor.keys() {
        let c = all_counts
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownRedditor(id.clone()))?;
        counts.insert(id.clone(), *c);
    }
    let membership = cohorts(&counts);
    let mut cohort_scores = BTreeMap::new();
    for cohort in [Cohort::All, Cohort::Top50, Cohort::Bottom50] {
        let member = |id: &String| cohort == Cohort::All || membership.get(id) == Some(&cohort);
        cohort_scores.insert(
            cohort,
            CohortScores {
                all: mean(per_redditor.iter().filter(|(id, _)| member(id)).map(|(_, v)| *v)),
                contro: mean(contro.iter().filter(|(id, _)| member(id)).map(|(_, v)| *v)),
            },
        );
    }
    Ok(EvalReport {
        per_redditor_f1: per_redditor.clone(),
        per_redditor_contro_f1: contro.clone(),
        overall: mean(per_redditor.values().copied()).expect("non-empty"),
        cohort_scores,
        run_spread: None,
        scored_predictions: 0,
        failed_predictions: 0,
    })
}

/// Unweighted mean over redditors with Top/Bottom 50% cohort means.
pub fn aggregate(per_redditor: &BTreeMap<String, f64>, corpus: &Corpus) -> Result<EvalReport> {
    build_report(per_redditor, &BTreeMap::new(), corpus)
}

/// Macro F1 per (redditor, fold), averaged over folds per redditor.
fn per_redditor_f1<'a>(
    records: impl Iterator<Item = &'a PredictionRecord>,
    pick: impl Fn(&PredictionRecord) -> Option<Judgment>,
) -> Result<BTreeMap<String, f64>> {
    let mut pairs: BTreeMap<(String, usize), Vec<(Judgment, Judgment)>> = BTreeMap::new();
    for r in records {
        if let (Some(p), Some(g)) = (pick(r), r.gold) {
            pairs.entry((r.redditor_id.clone(), r.fold)).or_default().push((p, g));
        }
    }
    let mut folds: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((id, _), p) in pairs {
        folds.entry(id).or_default().push(macro_f1(&p)?);
    }
    Ok(folds
        .into_iter()
        .map(|(id, f)| (id, mean(f).expect("at least one fold")))
        .collect())
}

/// Scores prediction records. Failed records and records without a gold
/// label are left out of every F1 and counted in `failed_predictions`.
pub fn evaluate(records: &[PredictionRecord], corpus: &Corpus) -> Result<EvalReport> {
    let ok = || records.iter().filter(|r| !r.failed && r.gold.is_some());
    let per = per_redditor_f1(ok(), |r| r.final_judgment)?;
    let contro = per_redditor_f1(ok().filter(|r| r.controversial), |r| r.final_judgment)?;
    let mut report = build_report(&per, &contro, corpus)?;

    let runs = ok().map(|r| r.parsed.len()).min().unwrap_or(0);
    let overalls: Vec<f64> = (0..runs)
        .map(|s| {
            let f1 = per_redditor_f1(ok(), |r| r.parsed.get(s).copied())?;
            Ok(mean(f1.values().copied()).unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    report.run_spread = overalls
        .iter()
        .fold(None, |acc: Option<(f64, f64)>, &v| Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v)))));
    report.scored_predictions = ok().count();
    report.failed_predictions = records.len() - report.scored_predictions;
    Ok(report)
}
