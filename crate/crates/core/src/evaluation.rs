//! Scoring predictors against gold labels and synthetic truth.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::consensus::{
    posterior, predict, predict_high_recall, predictive_pmf, BetaBelief, Prediction,
    PredictorConfig, VoteCount, TAU_CEIL, TAU_FLOOR,
};
use crate::dataset::{Dataset, PairKey};
use crate::error::{Error, Result};

/// Precision, recall and F1 with the underlying counts.
///
/// Abstentions never enter precision. A gold-positive abstention is a miss
/// for recall, so `recall = tp / (tp + fn + abstained_positive)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    /// Gold 1 predicted No.
    pub fn_: usize,
    pub tn: usize,
    pub abstained: usize,
    pub abstained_positive: usize,
    /// No Yes predictions at all; precision is reported as 0.
    pub empty_decisions: bool,
    /// Predictions whose pair has no gold label.
    pub ignored: usize,
}

impl Prf {
    pub fn cohort(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn + self.abstained
    }

    fn finish(mut self) -> Self {
        self.empty_decisions = self.tp + self.fp == 0;
        self.precision = ratio(self.tp, self.tp + self.fp);
        self.recall = ratio(self.tp, self.tp + self.fn_ + self.abstained_positive);
        self.f1 = f1(self.precision, self.recall);
        self
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score<'a>(
    predictions: impl IntoIterator<Item = (&'a PairKey, &'a Prediction)>,
    gold: &BTreeMap<PairKey, bool>,
) -> Prf {
    let mut prf = Prf::default();
    for (k, p) in predictions {
        let Some(&g) = gold.get(k) else {
            prf.ignored += 1;
            continue;
        };
        match (p, g) {
            (Prediction::Yes, true) => prf.tp += 1,
            (Prediction::Yes, false) => prf.fp += 1,
            (Prediction::No, true) => prf.fn_ += 1,
            (Prediction::No, false) => prf.tn += 1,
            (Prediction::NoPrediction, g) => {
                prf.abstained += 1;
                prf.abstained_positive += g as usize;
            }
        }
    }
    prf.finish()
}

/// Vote-only baseline: abstain below `max(min_votes, 1)` votes, otherwise
/// Yes iff the observed yes fraction exceeds `mu_min`.
pub fn empirical_baseline(votes: VoteCount, cfg: &PredictorConfig, min_votes: u32) -> Prediction {
    let k = votes.total();
    if k == 0 || k < min_votes {
        return Prediction::NoPrediction;
    }
    if votes.yes as f64 / k as f64 > cfg.mu_min() {
        Prediction::Yes
    } else {
        Prediction::No
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_predicted: f64,
    pub empirical: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    pub n: u32,
    pub yes: u32,
    /// Non-empty bins only, in ascending order.
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationTable {
    pub fn cohort(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Contract(format!("writing calibration csv: {e}"));
        w.write_record(["lower", "upper", "mean_predicted", "empirical", "count"])
            .map_err(err)?;
        for b in &self.bins {
            w.write_record([
                b.lower.to_string(),
                b.upper.to_string(),
                b.mean_predicted.to_string(),
                b.empirical.to_string(),
                b.count.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| err(e.into()))
    }
}

/// Q-Q data for the cohort of pairs with exactly `n` votes: each pair's
/// predicted probability of exactly `yes` yes votes, binned into `bins`
/// equal-width bins, against the fraction that actually had `yes`.
pub fn calibration(
    pairs: impl IntoIterator<Item = (BetaBelief, VoteCount)>,
    n: u32,
    yes: u32,
    bins: usize,
) -> Result<CalibrationTable> {
    if bins < 2 {
        return Err(Error::config("bins", "must be at least 2"));
    }
    if yes > n {
        return Err(Error::config("yes", "must not exceed n"));
    }
    let mut sum_p = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for (belief, votes) in pairs {
        if votes.total() != n {
            continue;
        }
        let p = predictive_pmf(&belief, n, yes)?;
        let b = ((p * bins as f64) as usize).min(bins - 1);
        sum_p[b] += p;
        count[b] += 1;
        hits[b] += (votes.yes == yes) as usize;
    }
    let width = 1.0 / bins as f64;
    let bins = (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| CalibrationBin {
            lower: b as f64 * width,
            upper: (b + 1) as f64 * width,
            mean_predicted: sum_p[b] / count[b] as f64,
            empirical: hits[b] as f64 / count[b] as f64,
            count: count[b],
        })
        .collect();
    Ok(CalibrationTable { n, yes, bins })
}

/// Counts of τ over log-spaced bins spanning the clamp range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl TauHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Fraction of mass at or below each upper edge.
    pub fn cdf(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        let mut acc = 0;
        self.counts
            .iter()
            .map(|c| {
                acc += c;
                acc as f64 / total
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Contract(format!("writing histogram csv: {e}"));
        w.write_record(["lower", "upper", "count"]).map_err(err)?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                c.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| err(e.into()))
    }
}

/// Two bins per decade over `[1e-3, 1e4]`.
pub const TAU_BINS: usize = 14;

pub fn tau_histogram(taus: impl IntoIterator<Item = f64>) -> TauHistogram {
    let (lo, hi) = (TAU_FLOOR.log10(), TAU_CEIL.log10());
    let step = (hi - lo) / TAU_BINS as f64;
    let edges = (0..=TAU_BINS)
        .map(|i| 10f64.powf(lo + step * i as f64))
        .collect();
    let mut counts = vec![0; TAU_BINS];
    for t in taus {
        let x = (t.log10() - lo) / step;
        let b = if x.is_nan() {
            0
        } else {
            (x.max(0.0) as usize).min(TAU_BINS - 1)
        };
        counts[b] += 1;
    }
    TauHistogram { edges, counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FprAudit {
    /// Fraction of Yes predictions whose true θ is below `mu_min`.
    pub rate: f64,
    pub yes_count: usize,
    pub false_positives: usize,
    pub empty: bool,
}

impl FprAudit {
    /// `target + 3σ` of a binomial proportion at `target` over `yes_count` trials.
    pub fn bound(&self, target: f64) -> f64 {
        if self.yes_count == 0 {
            return target;
        }
        target + 3.0 * (target * (1.0 - target) / self.yes_count as f64).sqrt()
    }
}

pub fn fpr_audit(
    predictions: impl IntoIterator<Item = (Prediction, f64)>,
    mu_min: f64,
) -> FprAudit {
    let (mut yes, mut fp) = (0, 0);
    for (p, theta) in predictions {
        if p == Prediction::Yes {
            yes += 1;
            fp += (theta < mu_min) as usize;
        }
    }
    FprAudit {
        rate: ratio(fp, yes),
        yes_count: yes,
        false_positives: fp,
        empty: yes == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Prior,
    Posterior,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prior" => Ok(Mode::Prior),
            "posterior" => Ok(Mode::Posterior),
            other => Err(Error::config("mode", format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    Confidence,
    HighRecall,
    Empirical,
    EmpiricalP,
}

impl PredictorKind {
    pub fn uses_beliefs(self) -> bool {
        matches!(self, PredictorKind::Confidence | PredictorKind::HighRecall)
    }
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(PredictorKind::Confidence),
            "high-recall" => Ok(PredictorKind::HighRecall),
            "empirical" => Ok(PredictorKind::Empirical),
            "empirical-p" => Ok(PredictorKind::EmpiricalP),
            other => Err(Error::config(
                "predictor",
                format!("unknown predictor `{other}`"),
            )),
        }
    }
}

/// Belief used for `mode`: the prior as given, or its posterior under the
/// pair's observed votes.
pub fn mode_belief(prior: &BetaBelief, votes: VoteCount, mode: Mode) -> BetaBelief {
    match mode {
        Mode::Prior => *prior,
        Mode::Posterior => posterior(prior, votes),
    }
}

/// Predictions on the gold pairs of `data`. `beliefs` holds one prior per
/// pair in [`Dataset::pairs`] order and is required by the belief-based
/// predictors.
pub fn predict_gold(
    data: &Dataset,
    beliefs: Option<&[BetaBelief]>,
    mode: Mode,
    kind: PredictorKind,
    cfg: &PredictorConfig,
) -> Result<BTreeMap<PairKey, Prediction>> {
    if !kind.uses_beliefs() && mode == Mode::Prior {
        return Err(Error::config(
            "mode",
            "vote-only baselines have no prior mode",
        ));
    }
    let beliefs = match (kind.uses_beliefs(), beliefs) {
        (true, Some(b)) if b.len() == data.num_pairs() => Some(b),
        (true, Some(b)) => {
            return Err(Error::Contract(format!(
                "{} beliefs for {} pairs",
                b.len(),
                data.num_pairs()
            )))
        }
        (true, None) => {
            return Err(Error::Contract(
                "belief-based predictor needs beliefs".into(),
            ))
        }
        (false, _) => None,
    };
    let a = data.num_attributes();
    let mut out = BTreeMap::new();
    for &k in data.gold().keys() {
        let votes = data.votes(k);
        let p = match kind {
            PredictorKind::Empirical => empirical_baseline(votes, cfg, 1),
            PredictorKind::EmpiricalP => empirical_baseline(votes, cfg, 3),
            PredictorKind::Confidence | PredictorKind::HighRecall => {
                let prior = &beliefs.expect("checked")[k.location * a + k.attribute];
                let b = mode_belief(prior, votes, mode);
                if kind == PredictorKind::Confidence {
                    predict(&b, cfg)?
                } else {
                    predict_high_recall(&b, cfg)
                }
            }
        };
        out.insert(k, p);
    }
    Ok(out)
}

/// One model/mode/predictor row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub mode: Mode,
    pub predictor: PredictorKind,
    pub prf: Prf,
    /// Present when the dataset carries true θ.
    pub fpr: Option<FprAudit>,
    /// Mean τ of the beliefs behind the predictions, when there are any.
    pub mean_tau: Option<f64>,
}

pub fn evaluate(
    model: &str,
    data: &Dataset,
    beliefs: Option<&[BetaBelief]>,
    mode: Mode,
    kind: PredictorKind,
    cfg: &PredictorConfig,
) -> Result<EvalReport> {
    let preds = predict_gold(data, beliefs, mode, kind, cfg)?;
    let prf = score(&preds, data.gold());
    let fpr = data.true_theta_matrix().map(|_| {
        fpr_audit(
            preds
                .iter()
                .map(|(k, p)| (*p, data.true_theta(*k).expect("theta present"))),
            cfg.mu_min(),
        )
    });
    let mean_tau = beliefs
        .filter(|_| kind.uses_beliefs() && !preds.is_empty())
        .map(|b| {
            let a = data.num_attributes();
            let sum: f64 = preds
                .keys()
                .map(|k| mode_belief(&b[k.location * a + k.attribute], data.votes(*k), mode).tau())
                .sum();
            sum / preds.len() as f64
        });
    Ok(EvalReport {
        model: model.to_owned(),
        mode,
        predictor: kind,
        prf,
        fpr,
        mean_tau,
    })
}
