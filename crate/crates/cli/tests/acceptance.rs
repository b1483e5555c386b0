//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `cargo test --test acceptance -- --nocapture`).
//!
//! 1. Oracle equivalence (AUC, k-NN, cleaning resamplers vs brute force)
//! 2. SMOTE segment geometry over 1000 seeded invocations
//! 3. Window-carry bookkeeping replay of the published 8-window trajectory
//! 4. Racing behavior: budget, dominant winner, spurious-elimination rate
//! 5. Forest sanity on separable data
//! 6. Desk-scale protocol ordering over 5 seeds
//! 7. Full ECC reproduction (optional; needs ECC_CSV pointing at the data)
//! 8. Byte-identical reports across reruns and thread counts

use pwidb_core::forest::{fit, ForestParams};
use pwidb_core::frame::{Frame, Instance, Label, Provenance};
use pwidb_core::ingest::{gen_synthetic, CsvSchema, SynthConfig};
use pwidb_core::metrics::auc;
use pwidb_core::neighbors::knn;
use pwidb_core::racing::{race_with, CandidateEvaluator, MetricKind, PosthocTest, RaceConfig};
use pwidb_core::resampling::{
    cnn_single_pass, enn_filter, ncl_filter, smote, tomek_links, BalancerSpec, Technique,
};
use pwidb_core::seed::{rng_from_seed, shuffled_indices, SeedPolicy};
use pwidb_core::streaming::{
    plan_chunks, run_accumulative, run_batch, run_pwidb, ChunkSplit, PlanMode, WindowDriver,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

// ---------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------

fn random_frame(n: usize, p: usize, grid: bool, minority_frac: f64, seed: u64) -> Frame {
    let mut rng = rng_from_seed(seed);
    let instances = (0..n)
        .map(|i| {
            let features: Vec<f64> = (0..p)
                .map(|_| {
                    if grid {
                        rng.gen_range(0..6) as f64
                    } else {
                        rng.gen::<f64>() * 10.0
                    }
                })
                .collect();
            let label = if rng.gen::<f64>() < minority_frac {
                Label::Fraud
            } else {
                Label::Legit
            };
            Instance::new(i as u64, features, label)
        })
        .collect();
    Frame::new(instances, p, Provenance::Raw).unwrap()
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn knn_oracle(
    frame: &Frame,
    query: usize,
    k: usize,
    exclude_self: bool,
    filter: Option<Label>,
) -> Vec<(usize, f64)> {
    let q = &frame.get(query).features;
    let mut all: Vec<(f64, usize)> = frame
        .instances()
        .iter()
        .enumerate()
        .filter(|(i, inst)| {
            (!exclude_self || *i != query) && filter.map_or(true, |l| inst.label == l)
        })
        .map(|(i, inst)| (d2(q, &inst.features), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
}

fn ids(frame: &Frame) -> BTreeSet<u64> {
    frame.instances().iter().map(|i| i.id.0).collect()
}

fn removal_set(input: &Frame, output: &Frame) -> BTreeSet<u64> {
    ids(input).difference(&ids(output)).copied().collect()
}

// ---------------------------------------------------------------------
// criterion 1 — oracle equivalence
// ---------------------------------------------------------------------

fn auc_pair_oracle(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != Label::Fraud {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != Label::Legit {
                continue;
            }
            pairs += 1.0;
            wins += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn vote_disagrees_oracle(frame: &Frame, i: usize, k: usize) -> bool {
    let own = frame.get(i).label;
    let neighbors = knn_oracle(frame, i, k, true, None);
    let against = neighbors
        .iter()
        .filter(|(j, _)| frame.get(*j).label != own)
        .count();
    2 * against > neighbors.len()
}

#[test]
fn criterion_1_oracle_equivalence() {
    // AUC: 200 random score/label sets, n <= 500.
    let mut auc_checked = 0;
    for seed in 0..260u64 {
        let mut rng = rng_from_seed(seed);
        let n = rng.gen_range(2..=500);
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            scores.push(if seed % 3 == 0 {
                (rng.gen_range(0..25) as f64) / 25.0
            } else {
                rng.gen::<f64>()
            });
            labels.push(if rng.gen_bool(0.3) {
                Label::Fraud
            } else {
                Label::Legit
            });
        }
        if !labels.contains(&Label::Fraud) || !labels.contains(&Label::Legit) {
            continue;
        }
        let delta = (auc(&scores, &labels).unwrap() - auc_pair_oracle(&scores, &labels)).abs();
        assert!(delta <= 1e-12, "AUC delta {delta} at seed {seed}");
        auc_checked += 1;
    }
    assert!(auc_checked >= 200, "only {auc_checked} AUC sets checked");

    // k-NN vs linear scan.
    for seed in 0..30u64 {
        let frame = random_frame(30 + (seed as usize * 17) % 470, 2, seed % 2 == 0, 0.3, seed);
        let mut rng = rng_from_seed(seed + 999);
        for _ in 0..8 {
            let q = rng.gen_range(0..frame.len());
            let k = rng.gen_range(1..=6);
            let got = knn(&frame, q, k, true, None).unwrap();
            assert_eq!(got.neighbors, knn_oracle(&frame, q, k, true, None));
        }
    }

    // Cleaning resamplers: 100 random frames, n <= 200.
    let mut frames_checked = 0;
    let mut seed = 0u64;
    while frames_checked < 100 {
        seed += 1;
        let mut rng = rng_from_seed(seed + 31_000);
        let n = rng.gen_range(12..=200);
        let frame = random_frame(n, 2, seed % 2 == 0, 0.3, seed);
        if frame.minority_count() < 2 || frame.majority_count() < 2 {
            continue;
        }
        frames_checked += 1;
        let k = rng.gen_range(1..=5);
        let maj = frame.minority_label().opposite();

        // Tomek oracle.
        let mut tomek_expect = BTreeSet::new();
        for a in 0..frame.len() {
            let b = knn_oracle(&frame, a, 1, true, None)[0].0;
            if knn_oracle(&frame, b, 1, true, None)[0].0 == a
                && frame.get(a).label != frame.get(b).label
            {
                let victim = if frame.get(a).label == maj { a } else { b };
                tomek_expect.insert(frame.get(victim).id.0);
            }
        }
        assert_eq!(removal_set(&frame, &tomek_links(&frame).1.balanced), tomek_expect);

        // ENN oracle.
        let enn_expect: BTreeSet<u64> = (0..frame.len())
            .filter(|&i| frame.get(i).label == maj && vote_disagrees_oracle(&frame, i, k))
            .map(|i| frame.get(i).id.0)
            .collect();
        assert_eq!(
            removal_set(&frame, &enn_filter(&frame, k).unwrap().balanced),
            enn_expect
        );

        // NCL oracle: ENN plus majority neighbors of misclassified minority.
        let mut ncl_expect = enn_expect.clone();
        for i in 0..frame.len() {
            if frame.get(i).label == maj || !vote_disagrees_oracle(&frame, i, k) {
                continue;
            }
            for (j, _) in knn_oracle(&frame, i, k, true, None) {
                if frame.get(j).label == maj {
                    ncl_expect.insert(frame.get(j).id.0);
                }
            }
        }
        assert_eq!(
            removal_set(&frame, &ncl_filter(&frame, k).unwrap().balanced),
            ncl_expect
        );

        // CNN single pass oracle (same seeded scan order, independent logic).
        let min_label = frame.minority_label();
        let majority: Vec<usize> = frame.indices_of(maj);
        let order: Vec<usize> = shuffled_indices(majority.len(), seed)
            .into_iter()
            .map(|i| majority[i])
            .collect();
        let mut store: Vec<usize> = frame.indices_of(min_label);
        store.push(order[0]);
        for &idx in &order[1..] {
            let q = &frame.get(idx).features;
            let mut best = (f64::INFINITY, usize::MAX);
            for &s in &store {
                let dd = d2(q, &frame.get(s).features);
                if (dd, s) < best {
                    best = (dd, s);
                }
            }
            if frame.get(best.1).label != frame.get(idx).label {
                store.push(idx);
            }
        }
        let kept: BTreeSet<usize> = store.into_iter().collect();
        let cnn_expect: BTreeSet<u64> = (0..frame.len())
            .filter(|i| !kept.contains(i))
            .map(|i| frame.get(i).id.0)
            .collect();
        assert_eq!(
            removal_set(&frame, &cnn_single_pass(&frame, seed).balanced),
            cnn_expect
        );
    }
    println!("criterion 1 (oracle equivalence): PASS");
}

// ---------------------------------------------------------------------
// criterion 2 — SMOTE geometry
// ---------------------------------------------------------------------

#[test]
fn criterion_2_smote_geometry() {
    let mut invocations = 0;
    let mut points = 0usize;
    for seed in 0..1000u64 {
        let mut rng = rng_from_seed(seed + 77_000);
        let n_min = rng.gen_range(2..=20);
        let n_maj = rng.gen_range(n_min + 1..=60);
        let p = rng.gen_range(1..=8);
        let frame = random_frame_counts(n_min, n_maj, p, seed);
        let perc_over = [60.0, 100.0, 200.0, 275.0][seed as usize % 4];
        let k = rng.gen_range(1..=5);
        let r = smote(&frame, perc_over, 0.0, k, seed).unwrap();
        invocations += 1;

        for (s, &(parent, nn)) in r
            .balanced
            .instances()
            .iter()
            .filter(|i| i.id.is_synthetic())
            .zip(&r.synthetic_parents)
        {
            let x = &frame.get(parent).features;
            let y = &frame.get(nn).features;
            let mut u: Option<f64> = None;
            for c in 0..p {
                let span = y[c] - x[c];
                if span == 0.0 {
                    assert_eq!(s.features[c], x[c], "seed {seed}: off-segment component");
                    continue;
                }
                let uc = (s.features[c] - x[c]) / span;
                match u {
                    None => u = Some(uc),
                    Some(prev) => assert!(
                        (prev - uc).abs() <= 1e-9,
                        "seed {seed}: components disagree on u ({prev} vs {uc})"
                    ),
                }
            }
            let u = u.unwrap_or(0.0);
            assert!(
                (-1e-12..=1.0 + 1e-12).contains(&u),
                "seed {seed}: u = {u} off the segment"
            );
            points += 1;
        }
    }
    assert_eq!(invocations, 1000);
    println!("criterion 2 (SMOTE geometry): PASS ({points} synthetic points checked)");
}

fn random_frame_counts(n_min: usize, n_maj: usize, p: usize, seed: u64) -> Frame {
    let mut rng = rng_from_seed(seed);
    let mut instances = Vec::new();
    for i in 0..n_maj {
        let features = (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect();
        instances.push(Instance::new(i as u64, features, Label::Legit));
    }
    for i in 0..n_min {
        let features = (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect();
        instances.push(Instance::new((n_maj + i) as u64, features, Label::Fraud));
    }
    Frame::new(instances, p, Provenance::Raw).unwrap()
}

// ---------------------------------------------------------------------
// criterion 3 — window-carry bookkeeping replay
// ---------------------------------------------------------------------

#[test]
fn criterion_3_window_bookkeeping_replay() {
    fn filled(n_min: usize, n_maj: usize, tag: u64) -> Frame {
        let mut instances = Vec::with_capacity(n_min + n_maj);
        for i in 0..n_maj {
            instances.push(Instance::new(tag << 32 | i as u64, vec![0.0], Label::Legit));
        }
        for i in 0..n_min {
            instances.push(Instance::new(
                tag << 32 | (n_maj + i) as u64,
                vec![1.0],
                Label::Fraud,
            ));
        }
        Frame::new(instances, 1, Provenance::Raw).unwrap()
    }

    // Train chunk sizes come from the eight-window plan at fraction 0.9.
    let plan = plan_chunks(284_807, PlanMode::EccEight).unwrap();
    let train_sizes: Vec<usize> = plan
        .sizes
        .iter()
        .map(|&s| (plan.train_fraction * s as f64).round() as usize)
        .collect();
    assert_eq!(
        train_sizes,
        vec![45000, 45000, 36000, 36000, 18000, 18000, 27000, 31326]
    );

    // Stubbed post-balance counts carried window to window.
    let carries: [(usize, usize); 7] = [
        (548, 1027),
        (4312, 18480),
        (30464, 130560),
        (91668, 183336),
        (91688, 201316),
        (91707, 219047),
        (91755, 245871),
    ];
    let exact_expect = [45000, 46575, 58792, 197024, 293004, 311004, 368952];

    let splits: Vec<ChunkSplit> = train_sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| ChunkSplit {
            train: filled(n / 50, n - n / 50, j as u64),
            test: filled(1, 9, (100 + j) as u64),
        })
        .collect();
    let mut driver = WindowDriver::new(splits);
    let mut sizes = Vec::new();
    for j in 0..8 {
        let w = driver.next_window().unwrap().unwrap();
        sizes.push(w.train.len());
        if j < 7 {
            let (n_min, n_maj) = carries[j];
            driver.carry(filled(n_min, n_maj, (200 + j) as u64));
        }
    }

    let got_exact = [
        sizes[0], sizes[1], sizes[2], sizes[3], sizes[4], sizes[5], sizes[7],
    ];
    assert_eq!(got_exact, exact_expect, "exact window sizes");
    let window7 = sizes[6] as i64;
    assert!(
        (window7 - 337_909).abs() <= 200,
        "window 7 size {window7} outside published +/- 200"
    );
    println!("criterion 3 (window bookkeeping replay): PASS (sizes {sizes:?})");
}

// ---------------------------------------------------------------------
// criterion 4 — racing behavior with injected scores
// ---------------------------------------------------------------------

struct InjectedScores {
    means: Vec<f64>,
    sigma: f64,
    seed: u64,
}

impl CandidateEvaluator for InjectedScores {
    fn evaluate(&self, candidate: usize, _spec: &BalancerSpec, fold: usize) -> Result<f64, String> {
        let policy = SeedPolicy::new(self.seed);
        let mut rng = rng_from_seed(
            policy.derive("inject", (candidate as u64) << 24 | fold as u64),
        );
        Ok(Normal::new(self.means[candidate], self.sigma)
            .unwrap()
            .sample(&mut rng))
    }
}

fn distinct_specs(n: usize) -> Vec<BalancerSpec> {
    (0..n)
        .map(|i| {
            let mut s = BalancerSpec::new(Technique::Smote);
            s.perc_over = 100.0 + i as f64;
            s
        })
        .collect()
}

fn injected_config(n: usize, folds: usize, budget: usize, seed: u64) -> RaceConfig {
    RaceConfig {
        candidates: distinct_specs(n),
        metric: MetricKind::Auc,
        folds,
        max_experiments: budget,
        alpha: 0.05,
        forest: ForestParams::default(),
        posthoc: PosthocTest::PairedT,
        seed,
    }
}

#[test]
fn criterion_4_racing_behavior() {
    // (a) budget never exceeded over 1000 randomized configurations.
    let mut rng = rng_from_seed(4_000);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let folds = rng.gen_range(1..=12);
        let budget = rng.gen_range(n..=n * 14);
        let config = injected_config(n, folds, budget, rng.gen());
        let means: Vec<f64> = (0..n).map(|_| rng.gen_range(0.4..1.0)).collect();
        let outcome = race_with(
            &config,
            folds,
            &InjectedScores {
                means,
                sigma: rng.gen_range(0.001..0.1),
                seed: rng.gen(),
            },
        )
        .unwrap();
        assert!(
            outcome.evaluations_used <= budget,
            "budget {budget} exceeded: {}",
            outcome.evaluations_used
        );
    }

    // (b) a candidate dominating by 0.2 at sigma 0.01 wins >= 95/100 races.
    let mut wins = 0;
    for seed in 0..100u64 {
        let config = injected_config(9, 10, 90, seed);
        let mut means = vec![0.7; 9];
        means[3] = 0.9;
        let outcome = race_with(
            &config,
            10,
            &InjectedScores {
                means,
                sigma: 0.01,
                seed,
            },
        )
        .unwrap();
        if outcome.winner_index == 3 {
            wins += 1;
        }
    }
    assert!(wins >= 95, "dominant candidate won only {wins}/100 races");

    // (c) five identical candidates: spurious eliminations in <= 20/100.
    let mut spurious = 0;
    for seed in 0..100u64 {
        let config = injected_config(5, 10, 50, seed);
        let outcome = race_with(
            &config,
            10,
            &InjectedScores {
                means: vec![0.8; 5],
                sigma: 0.01,
                seed: seed + 10_000,
            },
        )
        .unwrap();
        if !outcome.eliminations.is_empty() {
            spurious += 1;
        }
    }
    assert!(spurious <= 20, "spurious eliminations in {spurious}/100 races");
    println!(
        "criterion 4 (racing behavior): PASS (wins {wins}/100, spurious {spurious}/100)"
    );
}

// ---------------------------------------------------------------------
// criterion 5 — forest sanity
// ---------------------------------------------------------------------

#[test]
fn criterion_5_forest_sanity() {
    // Two Gaussians, 6 sigma apart, n = 2000, p = 10: holdout AUC >= 0.99.
    let mut cfg = SynthConfig::new(2000, 1.0, 10, 0.0, 55);
    cfg.minority_clusters = vec![pwidb_core::ingest::GaussianCluster {
        mean: {
            let mut m = vec![0.0; 10];
            m[0] = 6.0;
            m
        },
        scale: 1.0,
    }];
    cfg.majority_clusters = vec![pwidb_core::ingest::GaussianCluster {
        mean: vec![0.0; 10],
        scale: 1.0,
    }];
    let frame = gen_synthetic(&cfg).unwrap();
    let split = pwidb_core::split::split_train_test(&frame, 0.8, 55).unwrap();
    let model = fit(&split.train, &ForestParams::default().with_seed(55)).unwrap();
    let scores = model.score_frame(&split.test).unwrap();
    let labels: Vec<Label> = split.test.instances().iter().map(|i| i.label).collect();
    let holdout_auc = auc(&scores, &labels).unwrap();
    assert!(holdout_auc >= 0.99, "holdout AUC {holdout_auc} < 0.99");

    // A single perfectly separating feature: training AUC = 1.0.
    let instances: Vec<Instance> = (0..300)
        .map(|i| {
            let label = if i < 150 { Label::Legit } else { Label::Fraud };
            Instance::new(i as u64, vec![i as f64, ((i * 7) % 13) as f64], label)
        })
        .collect();
    let sep = Frame::new(instances, 2, Provenance::Raw).unwrap();
    let model = fit(&sep, &ForestParams::default().with_seed(7)).unwrap();
    let scores = model.score_frame(&sep).unwrap();
    let labels: Vec<Label> = sep.instances().iter().map(|i| i.label).collect();
    let train_auc = auc(&scores, &labels).unwrap();
    assert_eq!(train_auc, 1.0, "training AUC {train_auc} != 1.0");
    println!("criterion 5 (forest sanity): PASS (holdout AUC {holdout_auc:.4})");
}

// ---------------------------------------------------------------------
// criterion 6 — desk-scale protocol ordering
// ---------------------------------------------------------------------

fn desk_race_config() -> RaceConfig {
    RaceConfig {
        candidates: BalancerSpec::candidate_set(),
        metric: MetricKind::Auc,
        folds: 4,
        max_experiments: 24,
        alpha: 0.05,
        forest: ForestParams {
            ntree: 25,
            max_depth: Some(14),
            ..ForestParams::default()
        },
        posthoc: PosthocTest::PairedT,
        seed: 0,
    }
}

#[test]
fn criterion_6_protocol_ordering() {
    let forest = ForestParams {
        ntree: 25,
        max_depth: Some(14),
        ..ForestParams::default()
    };
    let mut batch_aucs = Vec::new();
    let mut acc_aucs = Vec::new();
    let mut pwidb_aucs = Vec::new();

    for seed in 1..=5u64 {
        let cfg = SynthConfig::new(40_000, 100.0, 10, 0.65, seed);
        let dataset = gen_synthetic(&cfg).unwrap();
        let plan = plan_chunks(dataset.len(), PlanMode::Equal(8)).unwrap();

        // Batch on window 1 only: the first chunk of the same stream.
        let chunk1: Vec<usize> = (0..plan.sizes[0]).collect();
        let first = dataset.select(&chunk1, Provenance::Synthetic);
        let batch = run_batch(&first, None, &forest, seed).unwrap();
        batch_aucs.push(batch.rows[0].auc);

        let acc = run_accumulative(&dataset, &plan, None, &forest, seed).unwrap();
        acc_aucs.push(acc.rows.iter().map(|r| r.auc).sum::<f64>() / acc.rows.len() as f64);

        let race = desk_race_config();
        let pwidb = run_pwidb(&dataset, &plan, &race, &forest, seed, Default::default()).unwrap();
        pwidb_aucs.push(pwidb.rows.iter().map(|r| r.auc).sum::<f64>() / pwidb.rows.len() as f64);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (batch_m, acc_m, pwidb_m) = (mean(&batch_aucs), mean(&acc_aucs), mean(&pwidb_aucs));
    assert!(
        acc_m >= batch_m - 0.02,
        "accumulative mean {acc_m:.4} below batch-window-1 {batch_m:.4} - 0.02"
    );
    assert!(
        pwidb_m >= acc_m - 0.01,
        "pwidb mean {pwidb_m:.4} below accumulative (unbal) {acc_m:.4} - 0.01"
    );
    println!(
        "criterion 6 (protocol ordering): PASS (batch-w1 {batch_m:.4}, accumulative {acc_m:.4}, pwidb {pwidb_m:.4})"
    );
}

// ---------------------------------------------------------------------
// criterion 7 — full ECC reproduction (optional)
// ---------------------------------------------------------------------

#[test]
fn criterion_7_full_ecc_reproduction() {
    let Some(path) = std::env::var_os("ECC_CSV") else {
        println!("criterion 7 (full ECC): SKIP (set ECC_CSV to the creditcard.csv path to run)");
        return;
    };
    let path = std::path::PathBuf::from(path);
    let frame = pwidb_core::ingest::load_csv(&path, &CsvSchema::ecc()).expect("load ECC csv");
    assert_eq!(frame.len(), 284_807);
    assert_eq!(frame.minority_count(), 492);

    let forest = ForestParams {
        ntree: 100,
        ..ForestParams::default()
    };

    // Unbalanced batch RF.
    let unbal = run_batch(&frame, None, &forest, 42).unwrap();
    let unbal_auc = unbal.rows[0].auc;
    assert!(unbal_auc >= 0.93, "unbal batch AUC {unbal_auc} < 0.93");

    // Raced batch: an oversampling technique should win with AUC >= 0.95.
    let race = RaceConfig {
        candidates: BalancerSpec::candidate_set(),
        metric: MetricKind::Auc,
        folds: 10,
        max_experiments: 90,
        alpha: 0.05,
        forest,
        posthoc: PosthocTest::PairedT,
        seed: 0,
    };
    let raced = run_batch(&frame, Some(&race), &forest, 42).unwrap();
    let raced_auc = raced.rows[0].auc;
    let winner = &raced.rows[0].technique;
    assert!(
        winner == "SMOTE" || winner == "ROS",
        "expected an oversampling winner, got {winner}"
    );
    assert!(raced_auc >= 0.95, "raced batch AUC {raced_auc} < 0.95");

    // PWIDB over the eight-window plan.
    let plan = plan_chunks(frame.len(), PlanMode::EccEight).unwrap();
    let pwidb = run_pwidb(&frame, &plan, &race, &forest, 42, Default::default()).unwrap();
    let avg = pwidb.rows.iter().map(|r| r.auc).sum::<f64>() / pwidb.rows.len() as f64;
    assert!(avg >= 0.95, "pwidb average AUC {avg} < 0.95");
    println!(
        "criterion 7 (full ECC): PASS (unbal {unbal_auc:.4}, raced {raced_auc:.4} via {winner}, pwidb avg {avg:.4})"
    );
}

// ---------------------------------------------------------------------
// criterion 8 — determinism of report bytes
// ---------------------------------------------------------------------

#[test]
fn criterion_8_determinism() {
    let bin = env!("CARGO_BIN_EXE_pwidb");
    let base = tempfile::tempdir().unwrap();
    let config_path = base.path().join("run.toml");
    std::fs::write(
        &config_path,
        r#"
protocol = "pwidb"
synth = true
synth_n = 6000
synth_ir = 50.0
synth_p = 6
synth_overlap = 0.6
plan = "equal"
windows = 3
seed = 21
folds = 3
max_experiments = 18
ntree = 15
max_depth = 12
"#,
    )
    .unwrap();

    let run = |out: &Path, threads: &str| {
        let status = Command::new(bin)
            .arg("run")
            .arg(&config_path)
            .arg("--out")
            .arg(out)
            .arg("--threads")
            .arg(threads)
            .status()
            .expect("binary runs");
        assert!(status.success(), "run failed");
    };

    let out1 = base.path().join("a");
    let out2 = base.path().join("b");
    let out4 = base.path().join("c");
    run(&out1, "1");
    run(&out2, "1");
    run(&out4, "4");

    for file in ["report.csv", "report_full.csv", "hypotheses.csv", "summary.csv", "plot.csv"] {
        let a = std::fs::read(out1.join(file)).unwrap();
        let b = std::fs::read(out2.join(file)).unwrap();
        let c = std::fs::read(out4.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical reruns");
        assert_eq!(a, c, "{file} differs across thread counts");
    }
    println!("criterion 8 (determinism): PASS");
}
