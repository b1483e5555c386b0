//! The balancing techniques: random over/under sampling, SMOTE, Tomek-link
//! removal, CNN condensation, one-side selection, ENN and NCL cleaning, plus
//! the `unbal` identity.
//!
//! All techniques are pure, seed-deterministic functions of their input
//! frame. "Minority" inside a technique means the less frequent label of the
//! input frame (ties resolve to label 1); cleaning techniques never remove a
//! minority instance.

use crate::frame::{Frame, Instance, Label, Provenance};
use crate::neighbors::{knn, squared_distance};
use crate::seed::{rng_from_seed, shuffled_indices};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// The selectable balancing techniques.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technique {
    Unbal,
    Rus,
    Ros,
    Smote,
    Tomek,
    Cnn,
    Oss,
    Enn,
    Ncl,
}

impl Technique {
    pub const ALL: [Technique; 9] = [
        Technique::Unbal,
        Technique::Rus,
        Technique::Ros,
        Technique::Smote,
        Technique::Tomek,
        Technique::Cnn,
        Technique::Oss,
        Technique::Enn,
        Technique::Ncl,
    ];
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Technique::Unbal => "unbal",
            Technique::Rus => "RUS",
            Technique::Ros => "ROS",
            Technique::Smote => "SMOTE",
            Technique::Tomek => "Tomek",
            Technique::Cnn => "CNN",
            Technique::Oss => "OSS",
            Technique::Enn => "ENN",
            Technique::Ncl => "NCL",
        };
        f.write_str(name)
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Technique, String> {
        match s.to_ascii_lowercase().as_str() {
            "unbal" => Ok(Technique::Unbal),
            "rus" => Ok(Technique::Rus),
            "ros" => Ok(Technique::Ros),
            "smote" => Ok(Technique::Smote),
            "tomek" => Ok(Technique::Tomek),
            "cnn" => Ok(Technique::Cnn),
            "oss" => Ok(Technique::Oss),
            "enn" => Ok(Technique::Enn),
            "ncl" => Ok(Technique::Ncl),
            other => Err(format!("unknown balancing technique '{other}'")),
        }
    }
}

/// One candidate rebalancing configuration: technique plus hyper-parameters.
///
/// `perc_over` applies to ROS/SMOTE, `perc_under` to RUS/SMOTE, `k` to
/// SMOTE/ENN/NCL; unused fields keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancerSpec {
    pub technique: Technique,
    pub perc_over: f64,
    pub perc_under: f64,
    pub k: usize,
}

impl BalancerSpec {
    pub fn new(technique: Technique) -> BalancerSpec {
        BalancerSpec {
            technique,
            perc_over: 200.0,
            perc_under: 200.0,
            k: 5,
        }
    }

    /// The default race field: all eight techniques plus the identity, with
    /// the conventional neighbor counts (k=5 for SMOTE, k=3 for ENN/NCL).
    pub fn candidate_set() -> Vec<BalancerSpec> {
        Technique::ALL
            .iter()
            .map(|&technique| {
                let mut spec = BalancerSpec::new(technique);
                if matches!(technique, Technique::Enn | Technique::Ncl) {
                    spec.k = 3;
                }
                spec
            })
            .collect()
    }
}

impl fmt::Display for BalancerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.technique {
            Technique::Unbal | Technique::Tomek | Technique::Cnn | Technique::Oss => {
                write!(f, "{}", self.technique)
            }
            Technique::Rus => write!(f, "{}(percUnder={})", self.technique, self.perc_under),
            Technique::Ros => write!(f, "{}(percOver={})", self.technique, self.perc_over),
            Technique::Smote => write!(
                f,
                "{}(percOver={},percUnder={},k={})",
                self.technique, self.perc_over, self.perc_under, self.k
            ),
            Technique::Enn | Technique::Ncl => write!(f, "{}(k={})", self.technique, self.k),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("cannot balance single-class data")]
    SingleClass,
    #[error("SMOTE needs at least 2 minority instances, found {found}")]
    TooFewMinority { found: usize },
    #[error("undersampling target is zero")]
    ZeroTarget,
    #[error("neighbor count k must be at least 1")]
    ZeroK,
    #[error("percentage must be non-negative, got {0}")]
    NegativePercentage(f64),
}

/// Output of one balancing run: the new frame plus bookkeeping.
#[derive(Debug, Clone)]
pub struct BalanceResult {
    pub balanced: Frame,
    pub spec: BalancerSpec,
    /// Label-1 / label-0 counts of the input frame.
    pub before: ClassCounts,
    /// Label-1 / label-0 counts of the balanced frame.
    pub after: ClassCounts,
    pub synthetic_count: usize,
    /// For SMOTE: per synthetic point, the input-frame indices of its parent
    /// and the chosen neighbor, in generation order.
    pub synthetic_parents: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub minority: usize,
    pub majority: usize,
}

impl ClassCounts {
    pub fn of(frame: &Frame) -> ClassCounts {
        ClassCounts {
            minority: frame.minority_count(),
            majority: frame.majority_count(),
        }
    }

    pub fn total(&self) -> usize {
        self.minority + self.majority
    }
}

fn result(frame: &Frame, balanced: Frame, spec: BalancerSpec) -> BalanceResult {
    BalanceResult {
        before: ClassCounts::of(frame),
        after: ClassCounts::of(&balanced),
        balanced,
        spec,
        synthetic_count: 0,
        synthetic_parents: Vec::new(),
    }
}

fn require_both_classes(frame: &Frame) -> Result<(), BalanceError> {
    if frame.count_label(Label::Fraud) == 0 || frame.count_label(Label::Legit) == 0 {
        return Err(BalanceError::SingleClass);
    }
    Ok(())
}

/// Apply `spec` to `frame`. `Unbal` returns the input unchanged; every other
/// technique requires both classes and emits a `Balanced` frame.
pub fn apply(spec: &BalancerSpec, frame: &Frame, seed: u64) -> Result<BalanceResult, BalanceError> {
    if spec.technique == Technique::Unbal {
        return Ok(result(frame, frame.clone(), *spec));
    }
    require_both_classes(frame)?;
    let mut r = match spec.technique {
        Technique::Unbal => unreachable!("handled above"),
        Technique::Ros => random_resample(frame, ResampleMode::Over, spec.perc_over, seed)?,
        Technique::Rus => random_resample(frame, ResampleMode::Under, spec.perc_under, seed)?,
        Technique::Smote => smote(frame, spec.perc_over, spec.perc_under, spec.k, seed)?,
        Technique::Tomek => tomek_links(frame).1,
        Technique::Cnn => cnn_condense(frame, seed),
        Technique::Oss => oss(frame, seed),
        Technique::Enn => enn_filter(frame, spec.k)?,
        Technique::Ncl => ncl_filter(frame, spec.k)?,
    };
    r.spec = *spec;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Over,
    Under,
}

/// ROS replicates minority instances (with replacement) until the minority
/// count reaches `round(n_min * (1 + perc/100))`; RUS keeps a without-
/// replacement sample of `round(n_min * perc/100)` majority instances.
pub fn random_resample(
    frame: &Frame,
    mode: ResampleMode,
    perc: f64,
    seed: u64,
) -> Result<BalanceResult, BalanceError> {
    if perc < 0.0 {
        return Err(BalanceError::NegativePercentage(perc));
    }
    require_both_classes(frame)?;
    let min_label = frame.minority_label();
    let minority = frame.indices_of(min_label);
    let majority = frame.indices_of(min_label.opposite());
    let mut rng = rng_from_seed(seed);

    let technique = match mode {
        ResampleMode::Over => Technique::Ros,
        ResampleMode::Under => Technique::Rus,
    };
    let mut spec = BalancerSpec::new(technique);

    let balanced = match mode {
        ResampleMode::Over => {
            spec.perc_over = perc;
            let target = (minority.len() as f64 * (1.0 + perc / 100.0)).round() as usize;
            let mut indices: Vec<usize> = (0..frame.len()).collect();
            for _ in minority.len()..target {
                indices.push(minority[rng.gen_range(0..minority.len())]);
            }
            frame.select(&indices, Provenance::Balanced)
        }
        ResampleMode::Under => {
            spec.perc_under = perc;
            let target = ((minority.len() as f64 * perc / 100.0).round() as usize)
                .min(majority.len());
            if target == 0 {
                return Err(BalanceError::ZeroTarget);
            }
            let mut kept = sample_without_replacement(&majority, target, &mut rng);
            kept.extend_from_slice(&minority);
            kept.sort_unstable();
            frame.select(&kept, Provenance::Balanced)
        }
    };
    Ok(result(frame, balanced, spec))
}

fn sample_without_replacement(pool: &[usize], take: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut shuffled = pool.to_vec();
    shuffled.shuffle(rng);
    shuffled.truncate(take);
    shuffled
}

/// SMOTE: for each minority instance generate `floor(perc_over/100)`
/// synthetic points (plus one more with the fractional probability), each on
/// the segment toward a uniformly chosen one of the instance's `k` minority
/// nearest neighbors. The majority is then sampled without replacement down
/// to `round(perc_under/100 * synthetic_count)`; `perc_under = 0` keeps the
/// majority whole, as does a zero synthetic count.
pub fn smote(
    frame: &Frame,
    perc_over: f64,
    perc_under: f64,
    k: usize,
    seed: u64,
) -> Result<BalanceResult, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    if perc_over < 0.0 {
        return Err(BalanceError::NegativePercentage(perc_over));
    }
    if perc_under < 0.0 {
        return Err(BalanceError::NegativePercentage(perc_under));
    }
    let min_label = frame.minority_label();
    let minority = frame.indices_of(min_label);
    if minority.len() < 2 {
        return Err(BalanceError::TooFewMinority {
            found: minority.len(),
        });
    }
    let majority = frame.indices_of(min_label.opposite());

    // Neighbor lists are pure; compute them up front (in parallel) so the
    // sequential RNG consumption below stays schedule-independent.
    let neighbor_lists: Vec<Vec<usize>> = minority
        .par_iter()
        .map(|&idx| {
            knn(frame, idx, k, true, Some(min_label))
                .expect("k >= 1")
                .neighbors
                .into_iter()
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let whole = (perc_over / 100.0).floor();
    let frac = perc_over / 100.0 - whole;
    let per_instance = whole as usize;

    let mut rng = rng_from_seed(seed);
    let mut synthetic = Vec::new();
    let mut parents = Vec::new();
    for (mi, &idx) in minority.iter().enumerate() {
        let mut count = per_instance;
        if frac > 0.0 && rng.gen_bool(frac) {
            count += 1;
        }
        let base = &frame.get(idx).features;
        for _ in 0..count {
            let nn_idx = neighbor_lists[mi][rng.gen_range(0..neighbor_lists[mi].len())];
            let u: f64 = rng.gen();
            let nn = &frame.get(nn_idx).features;
            let features: Vec<f64> = base
                .iter()
                .zip(nn)
                .map(|(x, y)| x + u * (y - x))
                .collect();
            synthetic.push(Instance::synthetic(features, min_label));
            parents.push((idx, nn_idx));
        }
    }

    let kept_majority: Vec<usize> = if perc_under == 0.0 || synthetic.is_empty() {
        majority.clone()
    } else {
        let target = (perc_under / 100.0 * synthetic.len() as f64).round() as usize;
        if target >= majority.len() {
            majority.clone()
        } else {
            let mut kept = sample_without_replacement(&majority, target, &mut rng);
            kept.sort_unstable();
            kept
        }
    };

    let mut instances: Vec<Instance> = minority
        .iter()
        .map(|&i| frame.get(i).clone())
        .collect();
    instances.extend(synthetic);
    instances.extend(kept_majority.iter().map(|&i| frame.get(i).clone()));
    let balanced = Frame::new(instances, frame.feature_count(), Provenance::Balanced)
        .expect("balanced instances share the input feature count");

    let mut r = result(frame, balanced, BalancerSpec {
        technique: Technique::Smote,
        perc_over,
        perc_under,
        k,
    });
    r.synthetic_count = parents.len();
    r.synthetic_parents = parents;
    Ok(r)
}

/// 1-NN index of every instance (self excluded), tie-broken by ascending
/// index.
fn all_nearest(frame: &Frame) -> Vec<usize> {
    (0..frame.len())
        .into_par_iter()
        .map(|i| {
            crate::neighbors::nearest_index(frame, i).expect("frame has at least two instances")
        })
        .collect()
}

/// Tomek links: mutual-1-NN pairs of opposite class, as `(low, high)` index
/// pairs. The filtered frame drops the majority member of each link.
pub fn tomek_links(frame: &Frame) -> (Vec<(usize, usize)>, BalanceResult) {
    tomek_links_for(frame, frame.minority_label())
}

/// Tomek removal with an explicit protected label. OSS condenses first, and
/// condensation can leave the original majority less frequent than the
/// minority; the cleanup must still protect the original minority.
fn tomek_links_for(frame: &Frame, min_label: Label) -> (Vec<(usize, usize)>, BalanceResult) {
    let maj_label = min_label.opposite();
    if frame.len() < 2 {
        let balanced = frame.clone().with_provenance(Provenance::Balanced);
        return (
            Vec::new(),
            result(frame, balanced, BalancerSpec::new(Technique::Tomek)),
        );
    }
    let nn = all_nearest(frame);
    let mut pairs = Vec::new();
    let mut removed = vec![false; frame.len()];
    for a in 0..frame.len() {
        let b = nn[a];
        if a < b && nn[b] == a && frame.get(a).label != frame.get(b).label {
            pairs.push((a, b));
            let maj_member = if frame.get(a).label == maj_label { a } else { b };
            removed[maj_member] = true;
        }
    }
    let kept: Vec<usize> = (0..frame.len()).filter(|&i| !removed[i]).collect();
    let balanced = frame.select(&kept, Provenance::Balanced);
    (
        pairs,
        result(frame, balanced, BalancerSpec::new(Technique::Tomek)),
    )
}

fn nn1_label_over_subset(frame: &Frame, subset: &[usize], query_idx: usize) -> Label {
    let q = &frame.get(query_idx).features;
    let mut best = (f64::INFINITY, usize::MAX);
    for &i in subset {
        let d2 = squared_distance(q, &frame.get(i).features);
        if (d2, i) < best {
            best = (d2, i);
        }
    }
    frame.get(best.1).label
}

/// One CNN scan: majority instances are visited in seeded random order and
/// added to the store when the store's 1-NN rule misclassifies them. The
/// first instance of the shuffled order seeds the store. Returns the store
/// indices (sorted) and the leftover scan order.
fn cnn_pass(frame: &Frame, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let min_label = frame.minority_label();
    let majority = frame.indices_of(min_label.opposite());
    let order: Vec<usize> = shuffled_indices(majority.len(), seed)
        .into_iter()
        .map(|i| majority[i])
        .collect();

    let mut store = frame.indices_of(min_label);
    store.push(order[0]);
    let mut remaining = Vec::new();
    for &idx in &order[1..] {
        if nn1_label_over_subset(frame, &store, idx) != frame.get(idx).label {
            store.push(idx);
        } else {
            remaining.push(idx);
        }
    }
    store.sort_unstable();
    (store, remaining)
}

/// Single-scan CNN condensation, the building block of one-side selection.
pub fn cnn_single_pass(frame: &Frame, seed: u64) -> BalanceResult {
    let (store, _) = cnn_pass(frame, seed);
    let balanced = frame.select(&store, Provenance::Balanced);
    result(frame, balanced, BalancerSpec::new(Technique::Cnn))
}

/// Full CNN condensation: scans repeat over the leftovers until a pass adds
/// nothing to the store.
pub fn cnn_condense(frame: &Frame, seed: u64) -> BalanceResult {
    let (mut store, mut remaining) = cnn_pass(frame, seed);
    loop {
        let mut added = false;
        let mut next_remaining = Vec::new();
        for &idx in &remaining {
            if nn1_label_over_subset(frame, &store, idx) != frame.get(idx).label {
                store.push(idx);
                added = true;
            } else {
                next_remaining.push(idx);
            }
        }
        remaining = next_remaining;
        if !added || remaining.is_empty() {
            break;
        }
    }
    store.sort_unstable();
    let balanced = frame.select(&store, Provenance::Balanced);
    result(frame, balanced, BalancerSpec::new(Technique::Cnn))
}

/// One-side selection: a single CNN scan followed by Tomek-link removal of
/// majority members from the condensed frame.
pub fn oss(frame: &Frame, seed: u64) -> BalanceResult {
    let min_label = frame.minority_label();
    let condensed = cnn_single_pass(frame, seed);
    let (_, cleaned) = tomek_links_for(&condensed.balanced, min_label);
    result(frame, cleaned.balanced, BalancerSpec::new(Technique::Oss))
}

/// Vote of the k nearest neighbors (self excluded, both classes eligible).
/// Returns true when the vote strictly disagrees with the instance's label;
/// an exact tie counts as agreement.
fn knn_vote_disagrees(frame: &Frame, idx: usize, k: usize) -> bool {
    let own = frame.get(idx).label;
    let list = knn(frame, idx, k, true, None).expect("k >= 1");
    let against = list
        .neighbors
        .iter()
        .filter(|(i, _)| frame.get(*i).label != own)
        .count();
    2 * against > list.neighbors.len()
}

/// ENN: remove every majority instance whose k-NN vote disagrees with its
/// label. Minority instances always pass through.
pub fn enn_filter(frame: &Frame, k: usize) -> Result<BalanceResult, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    let maj_label = frame.minority_label().opposite();
    let flagged: Vec<bool> = (0..frame.len())
        .into_par_iter()
        .map(|i| frame.get(i).label == maj_label && knn_vote_disagrees(frame, i, k))
        .collect();
    let kept: Vec<usize> = (0..frame.len()).filter(|&i| !flagged[i]).collect();
    let balanced = frame.select(&kept, Provenance::Balanced);
    let mut r = result(frame, balanced, BalancerSpec::new(Technique::Enn));
    r.spec.k = k;
    Ok(r)
}

/// NCL: the ENN removals plus every majority instance that appears among the
/// k nearest neighbors of a misclassified minority instance.
pub fn ncl_filter(frame: &Frame, k: usize) -> Result<BalanceResult, BalanceError> {
    if k == 0 {
        return Err(BalanceError::ZeroK);
    }
    let min_label = frame.minority_label();
    let maj_label = min_label.opposite();

    let mut removed = vec![false; frame.len()];
    let flagged: Vec<(bool, Vec<usize>)> = (0..frame.len())
        .into_par_iter()
        .map(|i| {
            let own = frame.get(i).label;
            if own == maj_label {
                (knn_vote_disagrees(frame, i, k), Vec::new())
            } else if knn_vote_disagrees(frame, i, k) {
                // Misclassified minority: its majority neighbors get removed.
                let list = knn(frame, i, k, true, None).expect("k >= 1");
                let culprits = list
                    .neighbors
                    .iter()
                    .map(|&(j, _)| j)
                    .filter(|&j| frame.get(j).label == maj_label)
                    .collect();
                (false, culprits)
            } else {
                (false, Vec::new())
            }
        })
        .collect();
    for (i, (self_removed, culprits)) in flagged.iter().enumerate() {
        if *self_removed {
            removed[i] = true;
        }
        for &j in culprits {
            removed[j] = true;
        }
    }
    let kept: Vec<usize> = (0..frame.len()).filter(|&i| !removed[i]).collect();
    let balanced = frame.select(&kept, Provenance::Balanced);
    let mut r = result(frame, balanced, BalancerSpec::new(Technique::Ncl));
    r.spec.k = k;
    Ok(r)
}
