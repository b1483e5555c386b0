//! Labeled feature vectors and the frames that hold them.
//!
//! A [`Frame`] is an ordered, immutable collection of [`Instance`]s with a
//! fixed feature count. All resampling and learning operates on frames;
//! mutation happens only by constructing new frames, so shared references are
//! safe to read concurrently.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Binary class tag. Fraud (the minority class in the credit-card setting) is
/// label 1, legitimate traffic label 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Legit,
    Fraud,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Legit),
            1 => Some(Label::Fraud),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Legit => 0,
            Label::Fraud => 1,
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Legit => Label::Fraud,
            Label::Fraud => Label::Legit,
        }
    }
}

/// Identity tag carried by every instance so tests can verify that no test
/// instance ever leaks into a training window. Synthetic points (SMOTE
/// output) share the reserved [`InstanceId::SYNTHETIC`] tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceId(pub u64);

impl InstanceId {
    pub const SYNTHETIC: InstanceId = InstanceId(u64::MAX);

    pub fn is_synthetic(self) -> bool {
        self == InstanceId::SYNTHETIC
    }
}

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: InstanceId,
    pub features: Vec<f64>,
    pub label: Label,
}

impl Instance {
    pub fn new(id: u64, features: Vec<f64>, label: Label) -> Instance {
        Instance {
            id: InstanceId(id),
            features,
            label,
        }
    }

    pub fn synthetic(features: Vec<f64>, label: Label) -> Instance {
        Instance {
            id: InstanceId::SYNTHETIC,
            features,
            label,
        }
    }
}

/// Where a frame's contents came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Loaded or sliced from source data, untouched by any resampler.
    Raw,
    /// Output of a balancing technique (possibly containing synthetic points).
    Balanced,
    /// Produced by the synthetic dataset generator.
    Synthetic,
}

/// Exact imbalance ratio, kept as the count pair so no precision is lost
/// before rendering. Reports round to one decimal, matching table formatting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImbalanceRatio {
    pub majority: usize,
    pub minority: usize,
}

impl ImbalanceRatio {
    pub fn value(&self) -> f64 {
        self.majority as f64 / self.minority as f64
    }
}

impl fmt::Display for ImbalanceRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("instance {index} has {got} features, frame declares {expected}")]
    FeatureCountMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("instance {index} has a non-finite feature value")]
    NonFiniteFeature { index: usize },
    #[error("feature counts differ: {left} vs {right}")]
    ConcatMismatch { left: usize, right: usize },
    #[error("no minority class present")]
    NoMinorityClass,
}

/// Ordered collection of instances with a fixed feature count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    instances: Vec<Instance>,
    p: usize,
    provenance: Provenance,
}

impl Frame {
    /// Build a frame, validating uniform feature length and finite values.
    pub fn new(
        instances: Vec<Instance>,
        p: usize,
        provenance: Provenance,
    ) -> Result<Frame, FrameError> {
        for (index, inst) in instances.iter().enumerate() {
            if inst.features.len() != p {
                return Err(FrameError::FeatureCountMismatch {
                    index,
                    got: inst.features.len(),
                    expected: p,
                });
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(FrameError::NonFiniteFeature { index });
            }
        }
        Ok(Frame {
            instances,
            p,
            provenance,
        })
    }

    /// Empty frame with a declared feature count.
    pub fn empty(p: usize) -> Frame {
        Frame {
            instances: Vec::new(),
            p,
            provenance: Provenance::Raw,
        }
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, index: usize) -> &Instance {
        &self.instances[index]
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.p
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Frame {
        self.provenance = provenance;
        self
    }

    /// Count of label-1 (fraud) instances.
    pub fn minority_count(&self) -> usize {
        self.count_label(Label::Fraud)
    }

    /// Count of label-0 (legitimate) instances.
    pub fn majority_count(&self) -> usize {
        self.count_label(Label::Legit)
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.instances.iter().filter(|i| i.label == label).count()
    }

    /// The less frequent label in this frame; ties resolve to label 1.
    pub fn minority_label(&self) -> Label {
        if self.count_label(Label::Legit) < self.count_label(Label::Fraud) {
            Label::Legit
        } else {
            Label::Fraud
        }
    }

    /// Majority count over minority count (counted by label, fraud = 1),
    /// kept exact as the count pair.
    pub fn imbalance_ratio(&self) -> Result<ImbalanceRatio, FrameError> {
        let minority = self.minority_count();
        if minority == 0 {
            return Err(FrameError::NoMinorityClass);
        }
        Ok(ImbalanceRatio {
            majority: self.majority_count(),
            minority,
        })
    }

    /// Order-preserving concatenation; `self` first, then `other`.
    pub fn concat(&self, other: &Frame) -> Result<Frame, FrameError> {
        if self.p != other.p {
            return Err(FrameError::ConcatMismatch {
                left: self.p,
                right: other.p,
            });
        }
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        let provenance = if self.provenance == other.provenance {
            self.provenance
        } else {
            // Mixing a balanced carry with raw chunks: the union contains
            // resampled content.
            Provenance::Balanced
        };
        let mut instances = Vec::with_capacity(self.len() + other.len());
        instances.extend_from_slice(&self.instances);
        instances.extend_from_slice(&other.instances);
        Ok(Frame {
            instances,
            p: self.p,
            provenance,
        })
    }

    /// New frame from the instances at `indices`, in the given order.
    pub fn select(&self, indices: &[usize], provenance: Provenance) -> Frame {
        let instances = indices
            .iter()
            .map(|&i| self.instances[i].clone())
            .collect();
        Frame {
            instances,
            p: self.p,
            provenance,
        }
    }

    /// Indices of instances carrying `label`.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        self.instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.label == label)
            .map(|(i, _)| i)
            .collect()
    }
}
