//! Random-forest classifier producing probability scores.
//!
//! Trees are grown on bootstrap samples with per-node feature subsampling
//! and best-Gini threshold splits. Every tree draws its own seed from the
//! forest seed, so construction parallelism never changes the model.

use crate::frame::{Frame, Instance, Label};
use crate::seed::{rng_from_seed, SeedPolicy};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("cannot fit a forest on an empty frame")]
    EmptyTrainingSet,
    #[error("ntree must be at least 1")]
    ZeroTrees,
    #[error("mtry {mtry} outside 1..={p}")]
    BadMtry { mtry: usize, p: usize },
    #[error("instance has {got} features, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("model deserialization failed: {0}")]
    Decode(String),
}

/// Forest hyper-parameters. `mtry = None` defaults to `round(sqrt(p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub ntree: usize,
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            ntree: 100,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn resolve_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().round() as usize).max(1))
            .min(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        // label-0 / label-1 training counts reaching this leaf
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Vote of this tree for `features`: ties in leaf counts prefer label 0.
    fn vote(&self, features: &[f64]) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { counts } => {
                    return if counts[1] > counts[0] {
                        Label::Fraud
                    } else {
                        Label::Legit
                    };
                }
            }
        }
    }
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    pub params: ForestParams,
    pub p: usize,
    pub class_counts: [usize; 2],
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct TreeBuilder<'a> {
    frame: &'a Frame,
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
    feature_pool: Vec<usize>,
}

impl<'a> TreeBuilder<'a> {
    fn label_counts(&self, indices: &[usize]) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for &i in indices {
            counts[self.frame.get(i).label.as_u8() as usize] += 1;
        }
        counts
    }

    /// Best split among `mtry` sampled features: maximal Gini decrease,
    /// ties broken by lowest feature index then lowest threshold.
    fn best_split(
        &mut self,
        indices: &[usize],
        counts: [usize; 2],
        rng: &mut impl Rng,
    ) -> Option<(usize, f64)> {
        let total = indices.len() as f64;
        let parent_gini = gini(counts);

        self.feature_pool.shuffle(rng);
        let sampled: Vec<usize> = self.feature_pool[..self.mtry].to_vec();

        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = indices.to_vec();
        for &feature in &sampled {
            sorted.sort_by(|&a, &b| {
                self.frame.get(a).features[feature]
                    .total_cmp(&self.frame.get(b).features[feature])
            });
            let mut left = [0usize; 2];
            for w in 0..sorted.len() - 1 {
                let inst = self.frame.get(sorted[w]);
                left[inst.label.as_u8() as usize] += 1;
                let v = inst.features[feature];
                let next = self.frame.get(sorted[w + 1]).features[feature];
                if v == next {
                    continue;
                }
                let n_left = w + 1;
                let n_right = sorted.len() - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let weighted = (n_left as f64 * gini(left) + n_right as f64 * gini(right)) / total;
                let decrease = parent_gini - weighted;
                if decrease <= 0.0 {
                    continue;
                }
                let threshold = v + (next - v) / 2.0;
                let candidate = (decrease, feature, threshold);
                let better = match best {
                    None => true,
                    Some((bd, bf, bt)) => {
                        decrease > bd
                            || (decrease == bd && (feature < bf || (feature == bf && threshold < bt)))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }

    /// Depth-first growth with an explicit stack; worker-thread stacks stay
    /// shallow even on pathologically deep trees. Node expansion order is
    /// fixed (left before right), keeping RNG consumption deterministic.
    fn grow(&mut self, root_indices: Vec<usize>, rng: &mut impl Rng) {
        let root_slot = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: [0, 0] }); // placeholder
        let mut stack = vec![(root_indices, 0usize, root_slot)];
        while let Some((indices, depth, slot)) = stack.pop() {
            let counts = self.label_counts(&indices);
            let pure = counts[0] == 0 || counts[1] == 0;
            let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
            if pure || depth_capped || indices.len() < 2 * self.min_leaf || indices.len() < 2 {
                self.nodes[slot] = Node::Leaf { counts };
                continue;
            }
            let Some((feature, threshold)) = self.best_split(&indices, counts, rng) else {
                self.nodes[slot] = Node::Leaf { counts };
                continue;
            };
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| self.frame.get(i).features[feature] <= threshold);
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: [0, 0] });
            let right = self.nodes.len();
            self.nodes.push(Node::Leaf { counts: [0, 0] });
            self.nodes[slot] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            // Popped in left-right order.
            stack.push((right_idx, depth + 1, right));
            stack.push((left_idx, depth + 1, left));
        }
    }
}

fn fit_tree(frame: &Frame, params: &ForestParams, tree_seed: u64) -> Tree {
    let mut rng = rng_from_seed(tree_seed);
    let n = frame.len();
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut builder = TreeBuilder {
        frame,
        mtry: params.resolve_mtry(frame.feature_count()),
        min_leaf: params.min_leaf.max(1),
        max_depth: params.max_depth,
        nodes: Vec::new(),
        feature_pool: (0..frame.feature_count()).collect(),
    };
    builder.grow(bootstrap, &mut rng);
    Tree {
        nodes: builder.nodes,
    }
}

/// Fit a forest of `params.ntree` bootstrap trees. Trees are built in
/// parallel; per-tree seeds keep the result identical at any thread count.
pub fn fit(train: &Frame, params: &ForestParams) -> Result<ForestModel, ForestError> {
    if train.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    if params.ntree == 0 {
        return Err(ForestError::ZeroTrees);
    }
    let p = train.feature_count();
    if let Some(mtry) = params.mtry {
        if mtry == 0 || mtry > p {
            return Err(ForestError::BadMtry { mtry, p });
        }
    }
    let policy = SeedPolicy::new(params.seed);
    let trees: Vec<Tree> = (0..params.ntree)
        .into_par_iter()
        .map(|t| fit_tree(train, params, policy.derive("tree", t as u64)))
        .collect();
    Ok(ForestModel {
        trees,
        params: *params,
        p,
        class_counts: [train.majority_count(), train.minority_count()],
    })
}

impl ForestModel {
    /// Fraction of trees voting fraud, in `[0, 1]`.
    pub fn predict_score(&self, instance: &Instance) -> Result<f64, ForestError> {
        if instance.features.len() != self.p {
            return Err(ForestError::DimensionMismatch {
                got: instance.features.len(),
                expected: self.p,
            });
        }
        let votes = self
            .trees
            .iter()
            .filter(|t| t.vote(&instance.features) == Label::Fraud)
            .count();
        Ok(votes as f64 / self.trees.len() as f64)
    }

    /// Label 1 iff `predict_score >= threshold`.
    pub fn predict_label(&self, instance: &Instance, threshold: f64) -> Result<Label, ForestError> {
        Ok(if self.predict_score(instance)? >= threshold {
            Label::Fraud
        } else {
            Label::Legit
        })
    }

    /// Scores for a whole frame, in frame order.
    pub fn score_frame(&self, frame: &Frame) -> Result<Vec<f64>, ForestError> {
        frame
            .instances()
            .par_iter()
            .map(|inst| self.predict_score(inst))
            .collect()
    }

    pub fn ntree(&self) -> usize {
        self.trees.len()
    }

    /// Self-describing text serialization; round-trips exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<ForestModel, ForestError> {
        serde_json::from_str(text).map_err(|e| ForestError::Decode(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Provenance;
    use crate::metrics::auc;

    fn gaussian_pair(n_per_class: usize, p: usize, separation: f64, seed: u64) -> Frame {
        use rand_distr::{Distribution, Normal};
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut instances = Vec::new();
        for i in 0..2 * n_per_class {
            let label = if i % 2 == 0 { Label::Legit } else { Label::Fraud };
            let shift = if label == Label::Fraud { separation } else { 0.0 };
            let features: Vec<f64> = (0..p)
                .map(|d| normal.sample(&mut rng) + if d == 0 { shift } else { 0.0 })
                .collect();
            instances.push(Instance::new(i as u64, features, label));
        }
        Frame::new(instances, p, Provenance::Synthetic).unwrap()
    }

    #[test]
    fn single_class_constant_score() {
        let instances = (0..20)
            .map(|i| Instance::new(i, vec![i as f64], Label::Legit))
            .collect();
        let f = Frame::new(instances, 1, Provenance::Raw).unwrap();
        let model = fit(&f, &ForestParams::default().with_seed(1)).unwrap();
        let probe = Instance::new(99, vec![3.5], Label::Fraud);
        assert_eq!(model.predict_score(&probe).unwrap(), 0.0);
    }

    #[test]
    fn separated_gaussians_fit_training_set() {
        let f = gaussian_pair(1000, 10, 6.0, 7);
        let model = fit(&f, &ForestParams::default().with_seed(7)).unwrap();
        let correct = f
            .instances()
            .iter()
            .filter(|inst| model.predict_label(inst, 0.5).unwrap() == inst.label)
            .count();
        assert_eq!(correct, f.len(), "training accuracy should be 1.0");
    }

    #[test]
    fn perfectly_separating_feature_gives_auc_one() {
        let instances: Vec<Instance> = (0..100)
            .map(|i| {
                let label = if i < 50 { Label::Legit } else { Label::Fraud };
                Instance::new(i, vec![i as f64, 0.0], label)
            })
            .collect();
        let f = Frame::new(instances, 2, Provenance::Raw).unwrap();
        let model = fit(&f, &ForestParams::default().with_seed(3)).unwrap();
        let scores = model.score_frame(&f).unwrap();
        let labels: Vec<Label> = f.instances().iter().map(|i| i.label).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn score_is_vote_fraction() {
        let f = gaussian_pair(50, 4, 2.0, 11);
        let model = fit(&f, &ForestParams::default().with_seed(11)).unwrap();
        for inst in f.instances().iter().take(10) {
            let s = model.predict_score(inst).unwrap();
            assert!((0.0..=1.0).contains(&s));
            let votes = (s * model.ntree() as f64).round();
            assert!((votes / model.ntree() as f64 - s).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_boundary_is_inclusive() {
        let f = gaussian_pair(30, 2, 4.0, 5);
        let model = fit(&f, &ForestParams::default().with_seed(5)).unwrap();
        let inst = &f.instances()[0];
        let s = model.predict_score(inst).unwrap();
        assert_eq!(model.predict_label(inst, s).unwrap(), Label::Fraud);
        assert_eq!(model.predict_label(inst, 0.0).unwrap(), Label::Fraud);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let f = gaussian_pair(200, 6, 1.0, 13);
        let params = ForestParams {
            ntree: 30,
            ..ForestParams::default()
        }
        .with_seed(13);
        let base = fit(&f, &params).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool.install(|| fit(&f, &params).unwrap());
        assert_eq!(base, serial);
    }

    #[test]
    fn json_round_trip_exact() {
        let f = gaussian_pair(100, 5, 2.0, 17);
        let params = ForestParams {
            ntree: 10,
            ..ForestParams::default()
        }
        .with_seed(17);
        let model = fit(&f, &params).unwrap();
        let restored = ForestModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, restored);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let f = gaussian_pair(20, 3, 2.0, 19);
        let model = fit(&f, &ForestParams::default().with_seed(19)).unwrap();
        let bad = Instance::new(0, vec![1.0], Label::Legit);
        assert!(matches!(
            model.predict_score(&bad),
            Err(ForestError::DimensionMismatch { got: 1, expected: 3 })
        ));
    }

    #[test]
    fn empty_frame_errors() {
        assert_eq!(
            fit(&Frame::empty(2), &ForestParams::default()).unwrap_err(),
            ForestError::EmptyTrainingSet
        );
    }
}
