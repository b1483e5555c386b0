//! Racing selection of balancing techniques.
//!
//! Candidates are evaluated fold by fold over a stratified cross-validation
//! of the training window. After each fold (from the second on) a Friedman
//! rank test gates paired one-sided tests against the current best, and
//! candidates that prove significantly worse are dropped. The race stops at
//! one survivor, exhausted folds, or an exhausted evaluation budget.

use crate::forest::{fit, ForestParams};
use crate::frame::{Frame, Label, Provenance};
use crate::metrics::{auc, f1};
use crate::resampling::{apply, BalancerSpec};
use crate::seed::SeedPolicy;
use crate::stats::{average_ranks, friedman_test, paired_t_pvalue, wilcoxon_signed_rank_pvalue};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Which metric the race optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    Auc,
    F1,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Auc => "AUC",
            MetricKind::F1 => "F1",
        })
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<MetricKind, String> {
        match s.to_ascii_lowercase().as_str() {
            "auc" => Ok(MetricKind::Auc),
            "f1" => Ok(MetricKind::F1),
            other => Err(format!("unknown metric '{other}' (expected auc or f1)")),
        }
    }
}

/// Post-hoc paired test used after the Friedman gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosthocTest {
    PairedT,
    WilcoxonSignedRank,
}

impl PosthocTest {
    fn pvalue(&self, diffs: &[f64]) -> f64 {
        match self {
            PosthocTest::PairedT => paired_t_pvalue(diffs),
            PosthocTest::WilcoxonSignedRank => wilcoxon_signed_rank_pvalue(diffs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    pub candidates: Vec<BalancerSpec>,
    pub metric: MetricKind,
    pub folds: usize,
    /// Evaluation budget in candidate-fold evaluations.
    pub max_experiments: usize,
    pub alpha: f64,
    pub forest: ForestParams,
    pub posthoc: PosthocTest,
    pub seed: u64,
}

impl Default for RaceConfig {
    fn default() -> Self {
        RaceConfig {
            candidates: BalancerSpec::candidate_set(),
            metric: MetricKind::Auc,
            folds: 10,
            max_experiments: 90,
            alpha: 0.05,
            forest: ForestParams::default(),
            posthoc: PosthocTest::PairedT,
            seed: 0,
        }
    }
}

impl RaceConfig {
    pub fn validate(&self) -> Result<(), RaceError> {
        if self.candidates.is_empty() {
            return Err(RaceError::NoCandidates);
        }
        for (i, a) in self.candidates.iter().enumerate() {
            if self.candidates[i + 1..].contains(a) {
                return Err(RaceError::DuplicateCandidate(a.to_string()));
            }
        }
        if self.max_experiments < self.candidates.len() {
            return Err(RaceError::BudgetTooSmall {
                budget: self.max_experiments,
                need: self.candidates.len(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RaceError::BadAlpha(self.alpha));
        }
        if self.folds == 0 {
            return Err(RaceError::ZeroFolds);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RaceError {
    #[error("race needs at least one candidate")]
    NoCandidates,
    #[error("duplicate candidate {0}")]
    DuplicateCandidate(String),
    #[error("budget {budget} is smaller than one full block of {need} evaluations")]
    BudgetTooSmall { budget: usize, need: usize },
    #[error("alpha must be in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("fold count must be at least 1")]
    ZeroFolds,
    #[error("training window has a single class")]
    SingleClassTrain,
    #[error("too few minority instances ({minority}) for cross-validation")]
    TooFewMinority { minority: usize },
    #[error("every surviving candidate failed at fold {fold}")]
    AllCandidatesFailed { fold: usize },
}

/// One cross-validation fold: the balancers see `fit`, never `val`.
#[derive(Debug, Clone)]
pub struct Fold {
    pub fit: Frame,
    pub val: Frame,
}

#[derive(Debug, Clone)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    /// True when the requested fold count exceeded the minority count and
    /// was reduced.
    pub reduced: bool,
}

/// Class-stratified k-fold partition of `train`. Each instance lands in
/// exactly one validation fold. A fold count above the minority count is
/// reduced to it (flagged); fewer than two minority instances is an error.
pub fn make_folds(train: &Frame, folds: usize, seed: u64) -> Result<FoldPlan, RaceError> {
    if folds == 0 {
        return Err(RaceError::ZeroFolds);
    }
    let n_min = train.count_label(Label::Fraud).min(train.count_label(Label::Legit));
    if train.count_label(Label::Fraud) == 0 || train.count_label(Label::Legit) == 0 {
        return Err(RaceError::SingleClassTrain);
    }
    if n_min < 2 {
        return Err(RaceError::TooFewMinority { minority: n_min });
    }
    let reduced = folds > n_min;
    let k = folds.min(n_min);

    let mut rng = crate::seed::rng_from_seed(seed);
    let mut assignment = vec![0usize; train.len()];
    for label in [Label::Fraud, Label::Legit] {
        let mut idx = train.indices_of(label);
        idx.shuffle(&mut rng);
        // Deal near-equal contiguous groups; the first (len % k) folds get
        // one extra.
        let base = idx.len() / k;
        let extra = idx.len() % k;
        let mut at = 0;
        for fold in 0..k {
            let take = base + usize::from(fold < extra);
            for &i in &idx[at..at + take] {
                assignment[i] = fold;
            }
            at += take;
        }
    }

    let folds_vec = (0..k)
        .map(|fold| {
            let val_idx: Vec<usize> = (0..train.len())
                .filter(|&i| assignment[i] == fold)
                .collect();
            let fit_idx: Vec<usize> = (0..train.len())
                .filter(|&i| assignment[i] != fold)
                .collect();
            Fold {
                fit: train.select(&fit_idx, Provenance::Raw),
                val: train.select(&val_idx, Provenance::Raw),
            }
        })
        .collect();
    Ok(FoldPlan {
        folds: folds_vec,
        reduced,
    })
}

/// Balance the fold's fit part with `spec`, train a forest, score the
/// untouched validation part. Returns the metric value.
pub fn evaluate_candidate(
    spec: &BalancerSpec,
    fold: &Fold,
    metric: MetricKind,
    forest_params: &ForestParams,
    seed: u64,
) -> Result<f64, String> {
    let policy = SeedPolicy::new(seed);
    let balanced = apply(spec, &fold.fit, policy.derive("balance", 0))
        .map_err(|e| e.to_string())?
        .balanced;
    let params = forest_params.with_seed(policy.derive("forest", 0));
    let model = fit(&balanced, &params).map_err(|e| e.to_string())?;
    let scores = model.score_frame(&fold.val).map_err(|e| e.to_string())?;
    let labels: Vec<Label> = fold.val.instances().iter().map(|i| i.label).collect();
    match metric {
        MetricKind::Auc => auc(&scores, &labels).map_err(|e| e.to_string()),
        MetricKind::F1 => {
            let preds: Vec<Label> = scores
                .iter()
                .map(|&s| if s >= 0.5 { Label::Fraud } else { Label::Legit })
                .collect();
            f1(&preds, &labels).map_err(|e| e.to_string())
        }
    }
}

/// Friedman rank test over `scores[block][candidate]`; see
/// [`crate::stats::friedman_test`].
pub fn friedman_statistic(scores: &[Vec<f64>]) -> (f64, f64) {
    friedman_test(scores)
}

/// Scoring seam: the production evaluator runs balance+fit+score on real
/// folds; tests inject synthetic score distributions through the same race
/// machinery.
pub trait CandidateEvaluator: Sync {
    fn evaluate(&self, candidate: usize, spec: &BalancerSpec, fold: usize) -> Result<f64, String>;
}

struct FoldEvaluator<'a> {
    folds: &'a [Fold],
    config: &'a RaceConfig,
    policy: SeedPolicy,
}

impl CandidateEvaluator for FoldEvaluator<'_> {
    fn evaluate(&self, candidate: usize, spec: &BalancerSpec, fold: usize) -> Result<f64, String> {
        let key = (candidate as u64) << 24 | fold as u64;
        evaluate_candidate(
            spec,
            &self.folds[fold],
            self.config.metric,
            &self.config.forest,
            self.policy.derive("race-eval", key),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    /// Fold index after which the candidate was dropped.
    pub fold: usize,
    pub candidate: usize,
    /// Test p-value, or NaN when the candidate failed to evaluate.
    pub p_value: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaceOutcome {
    pub winner: BalancerSpec,
    pub winner_index: usize,
    pub candidates: Vec<BalancerSpec>,
    /// Per-candidate metric values; rows of eliminated candidates end at
    /// their elimination fold.
    pub scores: Vec<Vec<f64>>,
    pub eliminations: Vec<Elimination>,
    pub evaluations_used: usize,
    pub folds_run: usize,
    pub folds_reduced: bool,
}

impl RaceOutcome {
    pub fn winner_mean_score(&self) -> f64 {
        let row = &self.scores[self.winner_index];
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Elimination trace as CSV (fold, candidate, score, status, p_value).
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("fold,candidate,score,status,p_value\n");
        for (c, row) in self.scores.iter().enumerate() {
            for (fold, score) in row.iter().enumerate() {
                let elim = self
                    .eliminations
                    .iter()
                    .find(|e| e.candidate == c && e.fold == fold);
                let (status, p) = match elim {
                    Some(e) if e.failed => ("failed", String::new()),
                    Some(e) => ("eliminated", format!("{}", e.p_value)),
                    None if fold + 1 == row.len() && c == self.winner_index => {
                        ("winner", String::new())
                    }
                    None => ("active", String::new()),
                };
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fold, self.candidates[c], score, status, p
                ));
            }
        }
        out
    }
}

/// Run the race over `available_folds` with a custom evaluator. Fold-level
/// loop: evaluate survivors (in parallel), then after two or more completed
/// folds test for eliminations; stop on a single survivor, exhausted folds,
/// or when the next fold would exceed the budget.
pub fn race_with(
    config: &RaceConfig,
    available_folds: usize,
    evaluator: &dyn CandidateEvaluator,
) -> Result<RaceOutcome, RaceError> {
    config.validate()?;
    let k = config.candidates.len();
    let mut survivors: Vec<usize> = (0..k).collect();
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut eliminations: Vec<Elimination> = Vec::new();
    let mut evaluations_used = 0usize;
    let mut folds_run = 0usize;

    for fold in 0..available_folds {
        if evaluations_used + survivors.len() > config.max_experiments {
            break;
        }
        let results: Vec<(usize, Result<f64, String>)> = survivors
            .par_iter()
            .map(|&c| (c, evaluator.evaluate(c, &config.candidates[c], fold)))
            .collect();
        evaluations_used += survivors.len();
        folds_run = fold + 1;

        let mut failed_now = Vec::new();
        for (c, res) in results {
            match res {
                Ok(v) => scores[c].push(v),
                Err(_) => failed_now.push(c),
            }
        }
        survivors.retain(|c| !failed_now.contains(c));
        for c in failed_now {
            eliminations.push(Elimination {
                fold,
                candidate: c,
                p_value: f64::NAN,
                failed: true,
            });
        }
        if survivors.is_empty() {
            return Err(RaceError::AllCandidatesFailed { fold });
        }

        if fold >= 1 && survivors.len() > 1 {
            let dropped = test_eliminations(config, &survivors, &scores, fold);
            for (c, p) in dropped {
                survivors.retain(|&s| s != c);
                eliminations.push(Elimination {
                    fold,
                    candidate: c,
                    p_value: p,
                    failed: false,
                });
            }
        }
        if survivors.len() == 1 {
            break;
        }
    }

    // Winner: best mean metric among survivors; ties keep the lowest index.
    let mut winner_index = survivors[0];
    let mut best_mean = f64::NEG_INFINITY;
    for &c in &survivors {
        let mean = scores[c].iter().sum::<f64>() / scores[c].len() as f64;
        if mean > best_mean {
            best_mean = mean;
            winner_index = c;
        }
    }

    Ok(RaceOutcome {
        winner: config.candidates[winner_index],
        winner_index,
        candidates: config.candidates.clone(),
        scores,
        eliminations,
        evaluations_used,
        folds_run,
        folds_reduced: false,
    })
}

/// Candidates to drop after `fold` completed, as `(index, p_value)`.
fn test_eliminations(
    config: &RaceConfig,
    survivors: &[usize],
    scores: &[Vec<f64>],
    fold: usize,
) -> Vec<(usize, f64)> {
    let blocks: Vec<Vec<f64>> = (0..=fold)
        .map(|b| survivors.iter().map(|&c| scores[c][b]).collect())
        .collect();

    if survivors.len() > 2 {
        let (_, gate_p) = friedman_test(&blocks);
        if gate_p >= config.alpha {
            return Vec::new();
        }
        // Best survivor = highest within-block mean rank.
        let mut rank_sums = vec![0.0; survivors.len()];
        for block in &blocks {
            for (j, r) in average_ranks(block).into_iter().enumerate() {
                rank_sums[j] += r;
            }
        }
        let mut best_pos = 0;
        for (pos, rs) in rank_sums.iter().enumerate() {
            if *rs > rank_sums[best_pos] {
                best_pos = pos;
            }
        }
        let best = survivors[best_pos];
        let mut dropped = Vec::new();
        for (pos, &c) in survivors.iter().enumerate() {
            if pos == best_pos {
                continue;
            }
            let diffs: Vec<f64> = (0..=fold).map(|b| scores[best][b] - scores[c][b]).collect();
            let p = config.posthoc.pvalue(&diffs);
            if p < config.alpha {
                dropped.push((c, p));
            }
        }
        dropped
    } else {
        // Two survivors: direct paired test, better mean on the "first" side.
        let (a, b) = (survivors[0], survivors[1]);
        let mean = |c: usize| scores[c][..=fold].iter().sum::<f64>() / (fold + 1) as f64;
        let (better, worse) = if mean(a) >= mean(b) { (a, b) } else { (b, a) };
        let diffs: Vec<f64> = (0..=fold)
            .map(|i| scores[better][i] - scores[worse][i])
            .collect();
        let p = config.posthoc.pvalue(&diffs);
        if p < config.alpha {
            vec![(worse, p)]
        } else {
            Vec::new()
        }
    }
}

/// Full production race: stratified folds over `train`, then the fold loop.
pub fn race(train: &Frame, config: &RaceConfig) -> Result<RaceOutcome, RaceError> {
    config.validate()?;
    let policy = SeedPolicy::new(config.seed);
    let plan = make_folds(train, config.folds, policy.derive("race-folds", 0))?;
    let evaluator = FoldEvaluator {
        folds: &plan.folds,
        config,
        policy,
    };
    let mut outcome = race_with(config, plan.folds.len(), &evaluator)?;
    outcome.folds_reduced = plan.reduced;
    Ok(outcome)
}
