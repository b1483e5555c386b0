//! Run configuration: a flat TOML key-value file, with CLI flags overriding
//! file values. Every field is validated with a field-level message before a
//! run starts.

use anyhow::{bail, Context, Result};
use pwidb_core::forest::ForestParams;
use pwidb_core::ingest::SynthConfig;
use pwidb_core::racing::{MetricKind, PosthocTest, RaceConfig};
use pwidb_core::resampling::{BalancerSpec, Technique};
use pwidb_core::streaming::{CarryPolicy, PlanMode};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Raw file keys. All fields are optional here; defaults and validation are
/// applied when resolving into a [`RunConfig`].
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    // run
    pub protocol: Option<String>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,

    // dataset (exactly one of csv / synth)
    pub csv: Option<PathBuf>,
    pub label_column: Option<String>,
    pub positive_label: Option<String>,
    pub shuffle: Option<bool>,
    pub shuffle_seed: Option<u64>,
    pub synth: Option<bool>,
    pub synth_n: Option<usize>,
    pub synth_ir: Option<f64>,
    pub synth_p: Option<usize>,
    pub synth_overlap: Option<f64>,

    // windows
    pub plan: Option<String>,
    pub windows: Option<usize>,

    // racing
    pub racing: Option<bool>,
    pub metric: Option<String>,
    pub folds: Option<usize>,
    pub max_experiments: Option<usize>,
    pub alpha: Option<f64>,
    pub posthoc: Option<String>,
    pub candidates: Option<String>,
    pub perc_over: Option<f64>,
    pub perc_under: Option<f64>,
    pub smote_k: Option<usize>,
    pub clean_k: Option<usize>,
    pub carry: Option<String>,

    // forest
    pub ntree: Option<usize>,
    pub mtry: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
    }

    /// Fields set in `over` win over `self`.
    pub fn overridden_by(mut self, over: &RawConfig) -> RawConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f.clone(); } )* };
        }
        take!(
            protocol, seed, out_dir, threads, csv, label_column, positive_label, shuffle,
            shuffle_seed, synth, synth_n, synth_ir, synth_p, synth_overlap, plan, windows, racing,
            metric, folds, max_experiments, alpha, posthoc, candidates, perc_over, perc_under,
            smote_k, clean_k, carry, ntree, mtry, min_leaf, max_depth
        );
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    Batch,
    Accumulative,
    Pwidb,
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Protocol, String> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(Protocol::Batch),
            "accumulative" => Ok(Protocol::Accumulative),
            "pwidb" => Ok(Protocol::Pwidb),
            other => Err(format!(
                "unknown protocol '{other}' (expected batch, accumulative, or pwidb)"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
        shuffle_seed: Option<u64>,
    },
    Synthetic(SynthConfig),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub protocol: Protocol,
    pub source: DatasetSource,
    pub plan_mode: PlanMode,
    pub race: Option<RaceConfig>,
    pub forest: ForestParams,
    pub carry: CarryPolicy,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
}

fn parse_candidates(
    list: &str,
    perc_over: f64,
    perc_under: f64,
    smote_k: usize,
    clean_k: usize,
) -> Result<Vec<BalancerSpec>> {
    let techniques: Vec<Technique> = if list.trim().eq_ignore_ascii_case("all") {
        Technique::ALL.to_vec()
    } else {
        list.split(',')
            .map(|t| Technique::from_str(t.trim()).map_err(|e| anyhow::anyhow!("candidates: {e}")))
            .collect::<Result<_>>()?
    };
    Ok(techniques
        .into_iter()
        .map(|technique| BalancerSpec {
            technique,
            perc_over,
            perc_under,
            k: match technique {
                Technique::Enn | Technique::Ncl => clean_k,
                _ => smote_k,
            },
        })
        .collect())
}

impl RunConfig {
    /// Resolve raw keys into a validated configuration. `default_out` (from
    /// the environment) applies when neither file nor flags name one.
    pub fn resolve(raw: &RawConfig, default_out: Option<PathBuf>) -> Result<RunConfig> {
        let protocol: Protocol = raw
            .protocol
            .as_deref()
            .unwrap_or("pwidb")
            .parse()
            .map_err(|e: String| anyhow::anyhow!("protocol: {e}"))?;

        let use_synth = raw.synth.unwrap_or(false);
        if use_synth && raw.csv.is_some() {
            bail!("csv / synth: exactly one dataset source must be set, found both");
        }
        let source = if use_synth {
            let n = raw.synth_n.unwrap_or(40_000);
            let ir = raw.synth_ir.unwrap_or(100.0);
            let p = raw.synth_p.unwrap_or(10);
            let overlap = raw.synth_overlap.unwrap_or(0.5);
            if ir < 1.0 {
                bail!("synth_ir: must be >= 1, got {ir}");
            }
            if p == 0 {
                bail!("synth_p: must be >= 1");
            }
            if !(0.0..=1.0).contains(&overlap) {
                bail!("synth_overlap: must be in [0, 1], got {overlap}");
            }
            DatasetSource::Synthetic(SynthConfig::new(
                n,
                ir,
                p,
                overlap,
                raw.seed.unwrap_or(0),
            ))
        } else {
            let path = raw
                .csv
                .clone()
                .ok_or_else(|| anyhow::anyhow!("csv: no dataset source (set csv = \"...\" or synth = true)"))?;
            DatasetSource::Csv {
                path,
                label_column: raw.label_column.clone().unwrap_or_else(|| "Class".into()),
                positive_label: raw.positive_label.clone().unwrap_or_else(|| "1".into()),
                shuffle_seed: if raw.shuffle.unwrap_or(false) {
                    Some(raw.shuffle_seed.unwrap_or_else(|| raw.seed.unwrap_or(0)))
                } else {
                    None
                },
            }
        };

        let plan_mode = match raw.plan.as_deref().unwrap_or("equal") {
            "ecc8" => PlanMode::EccEight,
            "equal" => {
                let m = raw.windows.unwrap_or(8);
                if m == 0 {
                    bail!("windows: must be >= 1");
                }
                PlanMode::Equal(m)
            }
            other => bail!("plan: unknown mode '{other}' (expected ecc8 or equal)"),
        };

        let forest = ForestParams {
            ntree: raw.ntree.unwrap_or(100),
            mtry: match raw.mtry {
                None | Some(0) => None,
                Some(m) => Some(m),
            },
            min_leaf: raw.min_leaf.unwrap_or(1).max(1),
            max_depth: match raw.max_depth {
                None | Some(0) => None,
                Some(d) => Some(d),
            },
            seed: 0,
        };
        if forest.ntree == 0 {
            bail!("ntree: must be >= 1");
        }

        let racing_on = raw.racing.unwrap_or(true);
        if protocol == Protocol::Pwidb && !racing_on {
            bail!("racing: the pwidb protocol requires racing = true");
        }
        let race = if racing_on {
            let metric: MetricKind = raw
                .metric
                .as_deref()
                .unwrap_or("auc")
                .parse()
                .map_err(|e: String| anyhow::anyhow!("metric: {e}"))?;
            let posthoc = match raw.posthoc.as_deref().unwrap_or("t") {
                "t" => PosthocTest::PairedT,
                "wilcoxon" => PosthocTest::WilcoxonSignedRank,
                other => bail!("posthoc: unknown test '{other}' (expected t or wilcoxon)"),
            };
            let candidates = parse_candidates(
                raw.candidates.as_deref().unwrap_or("all"),
                raw.perc_over.unwrap_or(200.0),
                raw.perc_under.unwrap_or(200.0),
                raw.smote_k.unwrap_or(5),
                raw.clean_k.unwrap_or(3),
            )?;
            let folds = raw.folds.unwrap_or(10);
            let config = RaceConfig {
                max_experiments: raw.max_experiments.unwrap_or(candidates.len() * folds),
                candidates,
                metric,
                folds,
                alpha: raw.alpha.unwrap_or(0.05),
                forest,
                posthoc,
                seed: 0,
            };
            config
                .validate()
                .map_err(|e| anyhow::anyhow!("racing config: {e}"))?;
            Some(config)
        } else {
            None
        };

        let carry = match raw.carry.as_deref().unwrap_or("always") {
            "always" => CarryPolicy::Always,
            other => match other.strip_prefix("improve:") {
                Some(tau) => {
                    let tau: f64 = tau
                        .parse()
                        .map_err(|_| anyhow::anyhow!("carry: bad threshold '{tau}'"))?;
                    CarryPolicy::ImproveThreshold(tau)
                }
                None => bail!("carry: unknown policy '{other}' (expected always or improve:<tau>)"),
            },
        };

        let out_dir = raw
            .out_dir
            .clone()
            .or(default_out)
            .ok_or_else(|| anyhow::anyhow!("out_dir: not set (config key, --out flag, or PWIDB_OUT_DIR)"))?;

        Ok(RunConfig {
            protocol,
            source,
            plan_mode,
            race,
            forest,
            carry,
            seed: raw.seed.unwrap_or(0),
            out_dir,
            threads: raw.threads.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> RawConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn minimal_synth_config_resolves() {
        let cfg = RunConfig::resolve(
            &raw("synth = true\nout_dir = \"out\"\n"),
            None,
        )
        .unwrap();
        assert_eq!(cfg.protocol, Protocol::Pwidb);
        assert!(cfg.race.is_some());
        assert!(matches!(cfg.source, DatasetSource::Synthetic(_)));
    }

    #[test]
    fn pwidb_without_racing_is_rejected() {
        let err = RunConfig::resolve(
            &raw("synth = true\nracing = false\nout_dir = \"out\"\n"),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("racing"), "{err}");
    }

    #[test]
    fn both_sources_rejected() {
        let err = RunConfig::resolve(
            &raw("synth = true\ncsv = \"x.csv\"\nout_dir = \"out\"\n"),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one dataset source"), "{err}");
    }

    #[test]
    fn candidate_list_parses() {
        let cfg = RunConfig::resolve(
            &raw("synth = true\ncandidates = \"unbal, SMOTE, ros\"\nout_dir = \"o\"\n"),
            None,
        )
        .unwrap();
        let specs = cfg.race.unwrap().candidates;
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[1].technique, Technique::Smote);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RawConfig>("nonsense_key = 3\n").is_err());
    }

    #[test]
    fn overrides_win() {
        let base = raw("synth = true\nseed = 1\nout_dir = \"a\"\n");
        let over = raw("seed = 9\n");
        let merged = base.overridden_by(&over);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.out_dir, Some(PathBuf::from("a")));
    }

    #[test]
    fn carry_policy_parses() {
        let cfg = RunConfig::resolve(
            &raw("synth = true\ncarry = \"improve:0.9\"\nout_dir = \"o\"\n"),
            None,
        )
        .unwrap();
        assert_eq!(cfg.carry, CarryPolicy::ImproveThreshold(0.9));
    }
}
