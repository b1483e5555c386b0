//! Dataset loading, synthetic stream generation, and run-artifact
//! persistence.
//!
//! Report CSVs come in two flavors: the table-formatted file (IR to one
//! decimal, metrics to four) and a full-precision sidecar that makes the
//! round trip lossless.

use crate::frame::{Frame, Instance, Label, Provenance};
use crate::racing::MetricKind;
use crate::resampling::{BalancerSpec, Technique};
use crate::seed::rng_from_seed;
use crate::streaming::{Hypothesis, ReportRow};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: header mismatch, expected [{expected}], got [{got}]")]
    HeaderMismatch {
        path: PathBuf,
        expected: String,
        got: String,
    },
    #[error("{path}: row {row}, column '{column}': cannot parse '{value}' as a number")]
    BadCell {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, field '{field}': bad value '{value}'")]
    BadField {
        path: PathBuf,
        row: usize,
        field: String,
        value: String,
    },
    #[error("schema has no label column '{0}'")]
    MissingLabelColumn(String),
    #[error("invalid synthetic config: {0}")]
    BadSynthConfig(String),
    #[error(transparent)]
    Frame(#[from] crate::frame::FrameError),
}

/// Column layout of a dataset CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Full ordered header, label column included.
    pub columns: Vec<String>,
    pub label_column: String,
    /// Cell value marking the positive (fraud) class; anything else is
    /// legitimate.
    pub positive_label: String,
}

impl CsvSchema {
    /// The ECC layout: `Time,V1..V28,Amount,Class` with fraud encoded as 1.
    pub fn ecc() -> CsvSchema {
        let mut columns = vec!["Time".to_string()];
        columns.extend((1..=28).map(|i| format!("V{i}")));
        columns.push("Amount".to_string());
        columns.push("Class".to_string());
        CsvSchema {
            columns,
            label_column: "Class".to_string(),
            positive_label: "1".to_string(),
        }
    }

    /// `V1..Vp,Class` — the layout the synthetic generator writes.
    pub fn generic(p: usize) -> CsvSchema {
        let mut columns: Vec<String> = (1..=p).map(|i| format!("V{i}")).collect();
        columns.push("Class".to_string());
        CsvSchema {
            columns,
            label_column: "Class".to_string(),
            positive_label: "1".to_string(),
        }
    }

    /// Schema taken from an actual header row.
    pub fn from_header(
        header: &[String],
        label_column: &str,
        positive_label: &str,
    ) -> Result<CsvSchema, IngestError> {
        if !header.iter().any(|c| c == label_column) {
            return Err(IngestError::MissingLabelColumn(label_column.to_string()));
        }
        Ok(CsvSchema {
            columns: header.to_vec(),
            label_column: label_column.to_string(),
            positive_label: positive_label.to_string(),
        })
    }

    pub fn feature_count(&self) -> usize {
        self.columns.len() - 1
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IngestError + '_ {
    move |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Read the header row of a CSV file.
pub fn peek_header(path: &Path) -> Result<Vec<String>, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = reader.headers().map_err(csv_err(path))?;
    Ok(header.iter().map(str::to_string).collect())
}

/// Load a dataset CSV in file (arrival) order. The header must match the
/// schema exactly; every non-label cell must parse as a real number.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Frame, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != schema.columns {
        return Err(IngestError::HeaderMismatch {
            path: path.to_path_buf(),
            expected: schema.columns.join(","),
            got: header.join(","),
        });
    }
    let label_at = schema
        .columns
        .iter()
        .position(|c| c == &schema.label_column)
        .ok_or_else(|| IngestError::MissingLabelColumn(schema.label_column.clone()))?;

    let p = schema.feature_count();
    let mut instances = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let mut features = Vec::with_capacity(p);
        let mut label = Label::Legit;
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if col == label_at {
                if cell == schema.positive_label {
                    label = Label::Fraud;
                }
            } else {
                let v: f64 = cell.parse().map_err(|_| IngestError::BadCell {
                    path: path.to_path_buf(),
                    row: row_idx + 2, // 1-based, after the header
                    column: schema.columns[col].clone(),
                    value: cell.to_string(),
                })?;
                features.push(v);
            }
        }
        if record.len() != schema.columns.len() {
            return Err(IngestError::BadField {
                path: path.to_path_buf(),
                row: row_idx + 2,
                field: "record".into(),
                value: format!("{} cells, expected {}", record.len(), schema.columns.len()),
            });
        }
        instances.push(Instance::new(row_idx as u64, features, label));
    }
    Ok(Frame::new(instances, p, Provenance::Raw)?)
}

/// Write a frame as a dataset CSV under `schema` (full-precision floats, so
/// `load_csv` restores it exactly).
pub fn write_dataset_csv(frame: &Frame, path: &Path, schema: &CsvSchema) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    writer
        .write_record(&schema.columns)
        .map_err(csv_err(path))?;
    let label_at = schema
        .columns
        .iter()
        .position(|c| c == &schema.label_column)
        .ok_or_else(|| IngestError::MissingLabelColumn(schema.label_column.clone()))?;
    for inst in frame.instances() {
        let mut record: Vec<String> = Vec::with_capacity(schema.columns.len());
        let mut feat = inst.features.iter();
        for col in 0..schema.columns.len() {
            if col == label_at {
                record.push(if inst.label == Label::Fraud {
                    schema.positive_label.clone()
                } else {
                    "0".to_string()
                });
            } else {
                record.push(feat.next().expect("feature count matches schema").to_string());
            }
        }
        writer.write_record(&record).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Shuffle a frame's row order (the stream chunker consumes row order).
pub fn shuffle_frame(frame: &Frame, seed: u64) -> Frame {
    let mut indices: Vec<usize> = (0..frame.len()).collect();
    indices.shuffle(&mut rng_from_seed(seed));
    frame.select(&indices, frame.provenance())
}

/// One Gaussian component of a synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCluster {
    pub mean: Vec<f64>,
    pub scale: f64,
}

/// Synthetic imbalanced-stream generator configuration.
///
/// With empty cluster lists a two-clusters-per-class layout is derived: the
/// classes sit on opposite corners of a square of side
/// `10 * (1 - overlap)` standard deviations, so `overlap = 0` gives
/// trivially separable data and `overlap` near 1 makes the classes coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    /// Target majority/minority ratio (>= 1).
    pub imbalance_ratio: f64,
    pub p: usize,
    pub overlap: f64,
    pub minority_clusters: Vec<GaussianCluster>,
    pub majority_clusters: Vec<GaussianCluster>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n: usize, imbalance_ratio: f64, p: usize, overlap: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n,
            imbalance_ratio,
            p,
            overlap,
            minority_clusters: Vec::new(),
            majority_clusters: Vec::new(),
            seed,
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        if self.imbalance_ratio < 1.0 {
            return Err(IngestError::BadSynthConfig(format!(
                "imbalance_ratio must be >= 1, got {}",
                self.imbalance_ratio
            )));
        }
        if self.p == 0 {
            return Err(IngestError::BadSynthConfig("p must be >= 1".into()));
        }
        if self.overlap < 0.0 {
            return Err(IngestError::BadSynthConfig(format!(
                "overlap must be >= 0, got {}",
                self.overlap
            )));
        }
        for (name, clusters) in [
            ("minority", &self.minority_clusters),
            ("majority", &self.majority_clusters),
        ] {
            for c in clusters.iter() {
                if c.mean.len() != self.p {
                    return Err(IngestError::BadSynthConfig(format!(
                        "{name} cluster mean has {} dims, expected {}",
                        c.mean.len(),
                        self.p
                    )));
                }
            }
        }
        Ok(())
    }

    fn resolved_clusters(&self) -> (Vec<GaussianCluster>, Vec<GaussianCluster>) {
        if !self.minority_clusters.is_empty() && !self.majority_clusters.is_empty() {
            return (self.minority_clusters.clone(), self.majority_clusters.clone());
        }
        let s = (10.0 * (1.0 - self.overlap)).max(0.0);
        let corner = |a: f64, b: f64| -> Vec<f64> {
            let mut m = vec![0.0; self.p];
            m[0] = a;
            if self.p > 1 {
                m[1] = b;
            }
            m
        };
        let majority = vec![
            GaussianCluster { mean: corner(0.0, 0.0), scale: 1.0 },
            GaussianCluster { mean: corner(s, s), scale: 1.0 },
        ];
        let minority = vec![
            GaussianCluster { mean: corner(s, 0.0), scale: 1.0 },
            GaussianCluster { mean: corner(0.0, s), scale: 1.0 },
        ];
        (minority, majority)
    }
}

/// Generate a synthetic imbalanced stream: class labels are interleaved
/// uniformly through the row order (so every stream chunk carries minority
/// instances), features drawn from the class's Gaussian mixture.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<Frame, IngestError> {
    cfg.validate()?;
    let n_min = (cfg.n as f64 / (1.0 + cfg.imbalance_ratio)).round() as usize;
    let n_maj = cfg.n - n_min;
    let (minority_clusters, majority_clusters) = cfg.resolved_clusters();

    let mut rng = rng_from_seed(cfg.seed);
    let mut labels = vec![Label::Legit; n_maj];
    labels.extend(std::iter::repeat(Label::Fraud).take(n_min));
    labels.shuffle(&mut rng);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let instances: Vec<Instance> = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let clusters = match label {
                Label::Fraud => &minority_clusters,
                Label::Legit => &majority_clusters,
            };
            let c = &clusters[rng.gen_range(0..clusters.len())];
            let features: Vec<f64> = (0..cfg.p)
                .map(|d| c.mean[d] + c.scale * normal.sample(&mut rng))
                .collect();
            Instance::new(i as u64, features, label)
        })
        .collect();
    Ok(Frame::new(instances, cfg.p, Provenance::Synthetic)?)
}

pub const REPORT_FILE: &str = "report.csv";
pub const REPORT_FULL_FILE: &str = "report_full.csv";
pub const HYPOTHESES_FILE: &str = "hypotheses.csv";

const REPORT_HEADER: [&str; 13] = [
    "window",
    "size",
    "train_minority",
    "train_majority",
    "train_IR",
    "technique",
    "bal_minority",
    "bal_majority",
    "bal_IR",
    "test_minority",
    "test_majority",
    "AUC",
    "F1",
];

const HYPOTHESES_HEADER: [&str; 12] = [
    "j",
    "technique",
    "carried_size",
    "metric",
    "post_IR",
    "post_minority",
    "post_majority",
    "perc_over",
    "perc_under",
    "k",
    "AUC",
    "F1",
];

fn report_record(row: &ReportRow, full_precision: bool) -> Vec<String> {
    let (train_ir, bal_ir, auc, f1) = if full_precision {
        (
            row.train_ir().value().to_string(),
            row.bal_ir().value().to_string(),
            row.auc.to_string(),
            row.f1.to_string(),
        )
    } else {
        (
            row.train_ir().to_string(),
            row.bal_ir().to_string(),
            format!("{:.4}", row.auc),
            format!("{:.4}", row.f1),
        )
    };
    vec![
        row.window.to_string(),
        row.size.to_string(),
        row.train_minority.to_string(),
        row.train_majority.to_string(),
        train_ir,
        row.technique.clone(),
        row.bal_minority.to_string(),
        row.bal_majority.to_string(),
        bal_ir,
        row.test_minority.to_string(),
        row.test_majority.to_string(),
        auc,
        f1,
    ]
}

fn write_csv(path: &Path, header: &[&str], records: Vec<Vec<String>>) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err(path))?;
    writer.write_record(header).map_err(csv_err(path))?;
    for record in records {
        writer.write_record(&record).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Write the window report and hypothesis records under `dir`:
/// `report.csv` (table precision), `report_full.csv` (lossless sidecar),
/// and `hypotheses.csv`.
pub fn write_reports(
    rows: &[ReportRow],
    hypotheses: &[Hypothesis],
    dir: &Path,
) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(
        &dir.join(REPORT_FILE),
        &REPORT_HEADER,
        rows.iter().map(|r| report_record(r, false)).collect(),
    )?;
    write_csv(
        &dir.join(REPORT_FULL_FILE),
        &REPORT_HEADER,
        rows.iter().map(|r| report_record(r, true)).collect(),
    )?;
    let hyp_records = hypotheses
        .iter()
        .map(|h| {
            vec![
                h.window.to_string(),
                h.technique.technique.to_string(),
                h.carried_size.to_string(),
                h.metric.to_string(),
                h.post_ir().to_string(),
                h.post_minority.to_string(),
                h.post_majority.to_string(),
                h.technique.perc_over.to_string(),
                h.technique.perc_under.to_string(),
                h.technique.k.to_string(),
                h.auc.to_string(),
                h.f1.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join(HYPOTHESES_FILE), &HYPOTHESES_HEADER, hyp_records)?;
    Ok(())
}

fn parse_field<T: FromStr>(
    path: &Path,
    row: usize,
    field: &str,
    value: &str,
) -> Result<T, IngestError> {
    value.parse().map_err(|_| IngestError::BadField {
        path: path.to_path_buf(),
        row,
        field: field.to_string(),
        value: value.to_string(),
    })
}

/// Read back what [`write_reports`] wrote (from the lossless files).
pub fn read_reports(dir: &Path) -> Result<(Vec<ReportRow>, Vec<Hypothesis>), IngestError> {
    let report_path = dir.join(REPORT_FULL_FILE);
    let mut reader = csv::Reader::from_path(&report_path).map_err(csv_err(&report_path))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let r = record.map_err(csv_err(&report_path))?;
        let row = i + 2;
        let p = &report_path;
        rows.push(ReportRow {
            window: parse_field(p, row, "window", &r[0])?,
            size: parse_field(p, row, "size", &r[1])?,
            train_minority: parse_field(p, row, "train_minority", &r[2])?,
            train_majority: parse_field(p, row, "train_majority", &r[3])?,
            technique: r[5].to_string(),
            bal_minority: parse_field(p, row, "bal_minority", &r[6])?,
            bal_majority: parse_field(p, row, "bal_majority", &r[7])?,
            test_minority: parse_field(p, row, "test_minority", &r[9])?,
            test_majority: parse_field(p, row, "test_majority", &r[10])?,
            auc: parse_field(p, row, "AUC", &r[11])?,
            f1: parse_field(p, row, "F1", &r[12])?,
        });
    }

    let hyp_path = dir.join(HYPOTHESES_FILE);
    let mut reader = csv::Reader::from_path(&hyp_path).map_err(csv_err(&hyp_path))?;
    let mut hypotheses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let r = record.map_err(csv_err(&hyp_path))?;
        let row = i + 2;
        let p = &hyp_path;
        let technique = Technique::from_str(&r[1]).map_err(|_| IngestError::BadField {
            path: p.clone(),
            row,
            field: "technique".into(),
            value: r[1].to_string(),
        })?;
        let metric = MetricKind::from_str(&r[3]).map_err(|_| IngestError::BadField {
            path: p.clone(),
            row,
            field: "metric".into(),
            value: r[3].to_string(),
        })?;
        hypotheses.push(Hypothesis {
            window: parse_field(p, row, "j", &r[0])?,
            technique: BalancerSpec {
                technique,
                perc_over: parse_field(p, row, "perc_over", &r[7])?,
                perc_under: parse_field(p, row, "perc_under", &r[8])?,
                k: parse_field(p, row, "k", &r[9])?,
            },
            carried_size: parse_field(p, row, "carried_size", &r[2])?,
            metric,
            forest: Default::default(),
            post_minority: parse_field(p, row, "post_minority", &r[5])?,
            post_majority: parse_field(p, row, "post_majority", &r[6])?,
            auc: parse_field(p, row, "AUC", &r[10])?,
            f1: parse_field(p, row, "F1", &r[11])?,
        });
    }
    Ok((rows, hypotheses))
}
