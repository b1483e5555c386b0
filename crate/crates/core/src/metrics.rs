//! Ranking and threshold metrics: AUC (Mann-Whitney rank form), F1 of the
//! fraud class, and the confusion counts behind them.

use crate::frame::Label;
use crate::stats::average_ranks;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("AUC undefined: labels contain a single class")]
    SingleClass,
    #[error("score/label lengths differ: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
}

/// Rank-based (Mann-Whitney) AUC with average ranks for tied scores.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|l| **l == Label::Fraud).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, l)| **l == Label::Fraud)
        .map(|(r, _)| r)
        .sum();
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// F1 of the positive (fraud) class; 0 when there are no true positives.
pub fn f1(predictions: &[Label], labels: &[Label]) -> Result<f64, MetricError> {
    Ok(Evaluation::from_predictions(predictions, labels)?.f1)
}

/// Full evaluation of a scored test set at a decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub auc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Evaluation {
    /// Evaluate scores against labels; predictions are `score >= threshold`.
    pub fn from_scores(
        scores: &[f64],
        labels: &[Label],
        threshold: f64,
    ) -> Result<Evaluation, MetricError> {
        let auc = auc(scores, labels)?;
        let predictions: Vec<Label> = scores
            .iter()
            .map(|&s| if s >= threshold { Label::Fraud } else { Label::Legit })
            .collect();
        let mut eval = Evaluation::from_predictions(&predictions, labels)?;
        eval.auc = auc;
        Ok(eval)
    }

    fn from_predictions(predictions: &[Label], labels: &[Label]) -> Result<Evaluation, MetricError> {
        if predictions.len() != labels.len() {
            return Err(MetricError::LengthMismatch {
                scores: predictions.len(),
                labels: labels.len(),
            });
        }
        let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
        for (pred, actual) in predictions.iter().zip(labels) {
            match (pred, actual) {
                (Label::Fraud, Label::Fraud) => tp += 1,
                (Label::Fraud, Label::Legit) => fp += 1,
                (Label::Legit, Label::Legit) => tn += 1,
                (Label::Legit, Label::Fraud) => fn_ += 1,
            }
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(Evaluation {
            auc: f64::NAN,
            f1,
            precision,
            recall,
            tp,
            fp,
            tn,
            fn_,
            n_pos: tp + fn_,
            n_neg: fp + tn,
        })
    }
}
