//! Window protocols over a chunked stream: batch, accumulative, and
//! piece-wise incremental data balancing (PWIDB).
//!
//! The stream is cut into chunks; every chunk is split 90/10 into train and
//! test parts, and test parts always accumulate across windows. Training
//! windows differ per protocol: batch sees one window, accumulative grows the
//! raw train window, and PWIDB carries the previous window's *balanced*
//! output into the next window (`W_{j+1} = S_j + D_{j+1}`).

use crate::forest::{fit, ForestParams};
use crate::frame::{Frame, ImbalanceRatio, Label};
use crate::metrics::Evaluation;
use crate::racing::{race, MetricKind, RaceConfig, RaceOutcome};
use crate::resampling::{apply, BalancerSpec, Technique};
use crate::seed::SeedPolicy;
use crate::split::split_train_test;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The eight ECC chunk sizes (cumulative 50000..284807).
pub const ECC_CHUNK_SIZES: [usize; 8] =
    [50000, 50000, 40000, 40000, 20000, 20000, 30000, 34807];

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("dataset of {total} rows is smaller than the {chunks} chunks requested")]
    TooFewRows { total: usize, chunks: usize },
    #[error("chunk plan is empty")]
    EmptyPlan,
    #[error(transparent)]
    Split(#[from] crate::split::SplitError),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
    #[error(transparent)]
    Balance(#[from] crate::resampling::BalanceError),
    #[error(transparent)]
    Forest(#[from] crate::forest::ForestError),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
    #[error("window {window} failed: {source}")]
    Halted {
        window: usize,
        source: Box<StreamError>,
        checkpoint: Box<Checkpoint>,
    },
    #[error(transparent)]
    Race(#[from] crate::racing::RaceError),
}

/// How the stream is cut into chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    /// The eight-window ECC layout.
    EccEight,
    /// `m` near-equal chunks covering the whole dataset.
    Equal(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub sizes: Vec<usize>,
    pub train_fraction: f64,
    /// True when the dataset was smaller than the canonical layout and the
    /// final chunk was truncated.
    pub truncated: bool,
}

impl ChunkPlan {
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn windows(&self) -> usize {
        self.sizes.len()
    }
}

/// Cut `total` rows into chunks. The ECC layout truncates (and flags) when
/// the dataset is short; `Equal(m)` spreads the remainder over the first
/// chunks.
pub fn plan_chunks(total: usize, mode: PlanMode) -> Result<ChunkPlan, StreamError> {
    let (sizes, truncated) = match mode {
        PlanMode::EccEight => {
            if total < ECC_CHUNK_SIZES.len() {
                return Err(StreamError::TooFewRows {
                    total,
                    chunks: ECC_CHUNK_SIZES.len(),
                });
            }
            let mut sizes = Vec::new();
            let mut left = total;
            let mut truncated = false;
            for &s in &ECC_CHUNK_SIZES {
                if left == 0 {
                    truncated = true;
                    break;
                }
                if left < s {
                    sizes.push(left);
                    left = 0;
                    truncated = true;
                } else {
                    sizes.push(s);
                    left -= s;
                }
            }
            (sizes, truncated)
        }
        PlanMode::Equal(m) => {
            if m == 0 {
                return Err(StreamError::EmptyPlan);
            }
            if total < m {
                return Err(StreamError::TooFewRows { total, chunks: m });
            }
            let base = total / m;
            let extra = total % m;
            (
                (0..m).map(|i| base + usize::from(i < extra)).collect(),
                false,
            )
        }
    };
    Ok(ChunkPlan {
        sizes,
        train_fraction: DEFAULT_TRAIN_FRACTION,
        truncated,
    })
}

/// One chunk's stratified train/test parts.
#[derive(Debug, Clone)]
pub struct ChunkSplit {
    pub train: Frame,
    pub test: Frame,
}

/// Cut `dataset` along the plan (in row order) and split every chunk.
/// Window `j` uses the split seed derived for index `j`.
pub fn split_stream(
    dataset: &Frame,
    plan: &ChunkPlan,
    policy: &SeedPolicy,
) -> Result<Vec<ChunkSplit>, StreamError> {
    let mut splits = Vec::with_capacity(plan.sizes.len());
    let mut start = 0;
    for (j, &size) in plan.sizes.iter().enumerate() {
        let indices: Vec<usize> = (start..start + size).collect();
        let chunk = dataset.select(&indices, dataset.provenance());
        let split = split_train_test(
            &chunk,
            plan.train_fraction,
            policy.derive("window-split", j as u64),
        )?;
        splits.push(ChunkSplit {
            train: split.train,
            test: split.test,
        });
        start += size;
    }
    Ok(splits)
}

/// One active window: the training window under the current protocol plus
/// the accumulated test set.
#[derive(Debug, Clone)]
pub struct WindowState {
    /// 1-based window index.
    pub window: usize,
    pub train: Frame,
    pub test: Frame,
    /// Rows the new chunk contributed to `train`.
    pub chunk_train_len: usize,
    /// Imbalance ratio of `train` before any balancing, when both classes
    /// are present.
    pub ir: Option<ImbalanceRatio>,
}

/// Sequencer for the window recurrences.
///
/// `next_window` concatenates the pending carry with the next chunk's train
/// part and accumulates the chunk's test part. Without an intervening
/// `carry` call the pending value is the previous training window itself
/// (identity carry — the accumulative protocol); `carry(S_j)` replaces it
/// with a balanced frame (the PWIDB recurrence).
pub struct WindowDriver {
    splits: Vec<ChunkSplit>,
    at: usize,
    pending: Option<Frame>,
    test_acc: Frame,
}

impl WindowDriver {
    pub fn new(splits: Vec<ChunkSplit>) -> WindowDriver {
        let p = splits
            .first()
            .map(|s| s.train.feature_count())
            .unwrap_or(0);
        WindowDriver {
            splits,
            at: 0,
            pending: None,
            test_acc: Frame::empty(p),
        }
    }

    pub fn windows(&self) -> usize {
        self.splits.len()
    }

    /// Carry value the next window will extend (None before window 1).
    pub fn pending(&self) -> Option<&Frame> {
        self.pending.as_ref()
    }

    /// Replace the pending carry with a balanced frame.
    pub fn carry(&mut self, balanced: Frame) {
        self.pending = Some(balanced);
    }

    /// Fast-forward to `window` (1-based) with an explicit carry state, for
    /// resuming a halted run. Test parts of the skipped chunks accumulate.
    pub fn skip_to(&mut self, window: usize, carry: Option<Frame>) -> Result<(), StreamError> {
        while self.at + 1 < window {
            self.test_acc = self.test_acc.concat(&self.splits[self.at].test)?;
            self.at += 1;
        }
        self.pending = carry;
        Ok(())
    }

    pub fn next_window(&mut self) -> Result<Option<WindowState>, StreamError> {
        if self.at >= self.splits.len() {
            return Ok(None);
        }
        let chunk = &self.splits[self.at];
        self.at += 1;
        let train = match &self.pending {
            None => chunk.train.clone(),
            Some(carry) => carry.concat(&chunk.train)?,
        };
        self.test_acc = self.test_acc.concat(&chunk.test)?;
        self.pending = Some(train.clone());
        Ok(Some(WindowState {
            window: self.at,
            train,
            test: self.test_acc.clone(),
            chunk_train_len: chunk.train.len(),
            ir: None,
        }))
    }
}

/// One report line per window, mirroring the experiment tables. `size` is
/// the training-window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub window: usize,
    pub size: usize,
    pub train_minority: usize,
    pub train_majority: usize,
    pub technique: String,
    pub bal_minority: usize,
    pub bal_majority: usize,
    pub test_minority: usize,
    pub test_majority: usize,
    pub auc: f64,
    pub f1: f64,
}

impl ReportRow {
    pub fn train_ir(&self) -> ImbalanceRatio {
        ImbalanceRatio {
            majority: self.train_majority,
            minority: self.train_minority,
        }
    }

    pub fn bal_ir(&self) -> ImbalanceRatio {
        ImbalanceRatio {
            majority: self.bal_majority,
            minority: self.bal_minority,
        }
    }
}

/// Per-window hypothesis record: the selected balancer, the carried frame
/// size, metric, classifier parameters, post-balance class counts, and the
/// window's evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub window: usize,
    pub technique: BalancerSpec,
    pub carried_size: usize,
    pub metric: MetricKind,
    pub forest: ForestParams,
    pub post_minority: usize,
    pub post_majority: usize,
    pub auc: f64,
    pub f1: f64,
}

impl Hypothesis {
    pub fn post_ir(&self) -> ImbalanceRatio {
        ImbalanceRatio {
            majority: self.post_majority,
            minority: self.post_minority,
        }
    }
}

/// Assemble the hypothesis record for a finished window; post-balance counts
/// are recomputed from the carried frame itself.
pub fn emit_hypothesis(
    state: &WindowState,
    outcome: &RaceOutcome,
    carried: &Frame,
    metric: MetricKind,
    forest: &ForestParams,
    eval: &Evaluation,
) -> Hypothesis {
    Hypothesis {
        window: state.window,
        technique: outcome.winner,
        carried_size: carried.len(),
        metric,
        forest: *forest,
        post_minority: carried.minority_count(),
        post_majority: carried.majority_count(),
        auc: eval.auc,
        f1: eval.f1,
    }
}

/// Whether the PWIDB carry is unconditional or gated on the window metric
/// reaching a threshold (below it the raw window carries instead).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CarryPolicy {
    Always,
    ImproveThreshold(f64),
}

impl Default for CarryPolicy {
    fn default() -> Self {
        CarryPolicy::Always
    }
}

fn labels_of(frame: &Frame) -> Vec<Label> {
    frame.instances().iter().map(|i| i.label).collect()
}

fn evaluate_on(model: &crate::forest::ForestModel, test: &Frame) -> Result<Evaluation, StreamError> {
    let scores = model.score_frame(test)?;
    Ok(Evaluation::from_scores(&scores, &labels_of(test), 0.5)?)
}

fn window_row(
    state: &WindowState,
    technique: String,
    fitted: &Frame,
    eval: &Evaluation,
) -> ReportRow {
    ReportRow {
        window: state.window,
        size: state.train.len(),
        train_minority: state.train.minority_count(),
        train_majority: state.train.majority_count(),
        technique,
        bal_minority: fitted.minority_count(),
        bal_majority: fitted.majority_count(),
        test_minority: state.test.minority_count(),
        test_majority: state.test.majority_count(),
        auc: eval.auc,
        f1: eval.f1,
    }
}

/// Result of one protocol run: report rows, hypothesis records (PWIDB
/// only), and the per-window race outcomes where racing ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub rows: Vec<ReportRow>,
    pub hypotheses: Vec<Hypothesis>,
    pub races: Vec<(usize, RaceOutcome)>,
}

/// Batch protocol: one 90/10 split of the whole frame, an optional race on
/// the train part, fit, evaluate.
pub fn run_batch(
    frame: &Frame,
    race_config: Option<&RaceConfig>,
    forest_params: &ForestParams,
    seed: u64,
) -> Result<ProtocolRun, StreamError> {
    let policy = SeedPolicy::new(seed);
    let split = split_train_test(frame, DEFAULT_TRAIN_FRACTION, policy.derive("batch-split", 0))?;
    let state = WindowState {
        window: 1,
        chunk_train_len: split.train.len(),
        ir: split.train.imbalance_ratio().ok(),
        train: split.train,
        test: split.test,
    };
    let mut races = Vec::new();
    let (technique, fitted) = match race_config {
        None => ("unbal".to_string(), state.train.clone()),
        Some(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = policy.derive("race", 0);
            let outcome = race(&state.train, &cfg)?;
            let balanced = apply(&outcome.winner, &state.train, policy.derive("balance", 0))?;
            let technique = outcome.winner.technique.to_string();
            races.push((1, outcome));
            (technique, balanced.balanced)
        }
    };
    let params = forest_params.with_seed(policy.derive("fit", 0));
    let model = fit(&fitted, &params)?;
    let eval = evaluate_on(&model, &state.test)?;
    Ok(ProtocolRun {
        rows: vec![window_row(&state, technique, &fitted, &eval)],
        hypotheses: Vec::new(),
        races,
    })
}

/// Accumulative protocol: raw train and test data both accumulate window by
/// window. With a race config the window is rebalanced for model fitting
/// only; the raw window is what accumulates.
pub fn run_accumulative(
    dataset: &Frame,
    plan: &ChunkPlan,
    race_config: Option<&RaceConfig>,
    forest_params: &ForestParams,
    seed: u64,
) -> Result<ProtocolRun, StreamError> {
    let policy = SeedPolicy::new(seed);
    let splits = split_stream(dataset, plan, &policy)?;
    let mut driver = WindowDriver::new(splits);
    let mut rows = Vec::new();
    let mut races = Vec::new();
    while let Some(state) = driver.next_window()? {
        let j = state.window as u64;
        let (technique, fitted) = match race_config {
            None => ("unbal".to_string(), state.train.clone()),
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.seed = policy.derive("race", j);
                let outcome = race(&state.train, &cfg)?;
                let balanced = apply(&outcome.winner, &state.train, policy.derive("balance", j))?;
                let technique = outcome.winner.technique.to_string();
                races.push((state.window, outcome));
                (technique, balanced.balanced)
            }
        };
        let params = forest_params.with_seed(policy.derive("fit", j));
        let model = fit(&fitted, &params)?;
        let eval = evaluate_on(&model, &state.test)?;
        rows.push(window_row(&state, technique, &fitted, &eval));
    }
    Ok(ProtocolRun {
        rows,
        hypotheses: Vec::new(),
        races,
    })
}

/// State needed to resume a halted PWIDB run at the failed window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    /// 1-based window that did not complete.
    pub window: usize,
    /// Pending carry going INTO that window (None when it is window 1).
    pub carry: Option<Frame>,
    /// Everything completed before the failure.
    pub done: ProtocolRun,
}

/// PWIDB protocol: race every window, fit on the balanced output `S_j`, and
/// carry `S_j` into the next window (`W_{j+1} = S_j + D_{j+1}`). A window
/// failure halts the run with a resumable [`Checkpoint`].
pub fn run_pwidb(
    dataset: &Frame,
    plan: &ChunkPlan,
    race_config: &RaceConfig,
    forest_params: &ForestParams,
    seed: u64,
    carry_policy: CarryPolicy,
) -> Result<ProtocolRun, StreamError> {
    let policy = SeedPolicy::new(seed);
    let splits = split_stream(dataset, plan, &policy)?;
    let driver = WindowDriver::new(splits);
    let done = ProtocolRun {
        rows: Vec::new(),
        hypotheses: Vec::new(),
        races: Vec::new(),
    };
    run_pwidb_windows(driver, race_config, forest_params, &policy, carry_policy, done)
}

/// Resume a halted PWIDB run from its checkpoint. The dataset, plan and seed
/// must match the original run.
pub fn resume_pwidb(
    dataset: &Frame,
    plan: &ChunkPlan,
    race_config: &RaceConfig,
    forest_params: &ForestParams,
    seed: u64,
    carry_policy: CarryPolicy,
    checkpoint: Checkpoint,
) -> Result<ProtocolRun, StreamError> {
    let policy = SeedPolicy::new(seed);
    let splits = split_stream(dataset, plan, &policy)?;
    let mut driver = WindowDriver::new(splits);
    driver.skip_to(checkpoint.window, checkpoint.carry)?;
    run_pwidb_windows(
        driver,
        race_config,
        forest_params,
        &policy,
        carry_policy,
        checkpoint.done,
    )
}

fn run_pwidb_windows(
    mut driver: WindowDriver,
    race_config: &RaceConfig,
    forest_params: &ForestParams,
    policy: &SeedPolicy,
    carry_policy: CarryPolicy,
    mut done: ProtocolRun,
) -> Result<ProtocolRun, StreamError> {
    loop {
        let prev_carry = driver.pending().cloned();
        let state = match driver.next_window()? {
            None => break,
            Some(s) => s,
        };
        let j = state.window as u64;
        match pwidb_window(&state, race_config, forest_params, policy, j) {
            Ok((row, hypothesis, outcome, carried)) => {
                let carry_it = match carry_policy {
                    CarryPolicy::Always => true,
                    CarryPolicy::ImproveThreshold(tau) => {
                        let value = match race_config.metric {
                            MetricKind::Auc => row.auc,
                            MetricKind::F1 => row.f1,
                        };
                        value >= tau
                    }
                };
                done.rows.push(row);
                done.hypotheses.push(hypothesis);
                done.races.push((state.window, outcome));
                if carry_it {
                    driver.carry(carried);
                }
            }
            Err(source) => {
                return Err(StreamError::Halted {
                    window: state.window,
                    source: Box::new(source),
                    checkpoint: Box::new(Checkpoint {
                        window: state.window,
                        carry: prev_carry,
                        done,
                    }),
                });
            }
        }
    }
    Ok(done)
}

fn pwidb_window(
    state: &WindowState,
    race_config: &RaceConfig,
    forest_params: &ForestParams,
    policy: &SeedPolicy,
    j: u64,
) -> Result<(ReportRow, Hypothesis, RaceOutcome, Frame), StreamError> {
    let mut cfg = race_config.clone();
    cfg.seed = policy.derive("race", j);
    let outcome = race(&state.train, &cfg)?;
    let carried = if outcome.winner.technique == Technique::Unbal {
        state.train.clone()
    } else {
        apply(&outcome.winner, &state.train, policy.derive("balance", j))?.balanced
    };
    let params = forest_params.with_seed(policy.derive("fit", j));
    let model = fit(&carried, &params)?;
    let eval = evaluate_on(&model, &state.test)?;
    let row = window_row(state, outcome.winner.technique.to_string(), &carried, &eval);
    let hypothesis = emit_hypothesis(state, &outcome, &carried, cfg.metric, forest_params, &eval);
    Ok((row, hypothesis, outcome, carried))
}
