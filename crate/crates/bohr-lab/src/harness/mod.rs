//! Experiment orchestration: configuration, seeding, execution,
//! persistence, and SVG plots.
//!
//! A run is fully determined by `(config, master_seed)`: per-trial seeds
//! come from [`seed_stream`], parallel aggregation is order-independent,
//! and wall-clock time is excluded from the serialized envelope, so a
//! rerun reproduces every output file byte for byte.

mod runner;
mod svg;

pub use svg::{plot, PlotKind};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bohr::NamedIrrational;
use crate::fourier::ArcInterval;
use crate::sampler::Source;
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BOHR_LAB_OUT";

/// Injective (trial → seed) map shared by every experiment.
pub fn seed_stream(master_seed: u64, trial_index: u64) -> u64 {
    crate::rng::seed_for_trial(master_seed, trial_index)
}

fn default_c() -> f64 {
    0.3
}

fn default_big_c() -> f64 {
    4.0
}

fn default_keep() -> usize {
    10
}

/// Phase assignment on the block `F` for concentration experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "psi", rename_all = "snake_case")]
pub enum PsiSpec {
    /// ψ ≡ 0 (and r = 0).
    Zero,
    /// `ψ(n) = φ(n/|F|)` for the lacunary phase `φ` with these
    /// parameters; carries `r = m·a`.
    DilatedLacunary { a: f64, m: u32, q: u64 },
}

impl PsiSpec {
    pub fn r(&self) -> f64 {
        match *self {
            PsiSpec::Zero => 0.0,
            PsiSpec::DilatedLacunary { a, m, .. } => m as f64 * a,
        }
    }
}

/// One experiment with its full parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    /// Draw one realization and emit it as JSON + CSV.
    Sample {
        weights: WeightSpec,
        source: Source,
    },
    /// Relation search, greedy decomposition, and the Sidon verdict on
    /// one realization.
    Qi {
        weights: WeightSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoints: Option<Vec<u64>>,
    },
    /// `|Λ_N|` and `|Λ_N|/ln N` per seed across checkpoints.
    Counting {
        weights: WeightSpec,
        checkpoints: Vec<u64>,
        seeds: u64,
    },
    /// Per-seed `Y_N` values and the mean-identity report.
    Martingale {
        alpha: f64,
        eps: f64,
        interval: ArcInterval,
        n: u64,
        seeds: u64,
    },
    /// Exact `E[Y_N²]` across an N ladder plus the closed-form bound.
    SecondMoment {
        alpha: f64,
        eps: f64,
        interval: ArcInterval,
        ladder: Vec<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
        /// Envelope constant; measured when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_sine_constant: Option<f64>,
    },
    /// Grid t-points whose orbits concentrate `Λt` in `[−ε, ε]`.
    Witness {
        weights: WeightSpec,
        eps: f64,
        n: u64,
        t_grid_size: u64,
        #[serde(default = "default_keep")]
        keep: usize,
    },
    /// One orbit scan against a named irrational.
    Orbit {
        weights: WeightSpec,
        irrational: NamedIrrational,
        min_denominator: u64,
        interval: ArcInterval,
        n: u64,
    },
    /// `P(Λ_N t ∩ I ≠ ∅)` across an N ladder with Wilson intervals.
    HitLadder {
        weights: WeightSpec,
        irrational: NamedIrrational,
        min_denominator: u64,
        interval: ArcInterval,
        ladder: Vec<u64>,
        trials: u64,
    },
    /// The 6-step grid procedure with the β̂ decay fit.
    DensityGrid {
        alpha: f64,
        interval: ArcInterval,
        d: f64,
        k: u64,
        delta: f64,
        ladder: Vec<u64>,
        trials: u64,
        grid_sum_n: u64,
    },
    /// Pseudomeasure decay of `μ e^{−iφ_m}` across block counts.
    PmDecay {
        a: f64,
        q: u64,
        m_range: Vec<u32>,
    },
    /// The τ/σ concentration inequality on a block.
    Concentration {
        weights: WeightSpec,
        f_lo: u64,
        f_hi: u64,
        #[serde(flatten)]
        psi: PsiSpec,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_big_c")]
        big_c: f64,
        trials: u64,
    },
    /// Chi-square comparison of |Λ_N| under direct sampling vs the union
    /// of a θ-split.
    SplittingLaw {
        weights: WeightSpec,
        seeds: u64,
        theta: f64,
    },
}

/// Every experiment name, in CLI order.
pub const EXPERIMENT_NAMES: [&str; 12] = [
    "sample",
    "qi",
    "counting",
    "martingale",
    "second-moment",
    "witness",
    "orbit",
    "hit-ladder",
    "density-grid",
    "pm-decay",
    "concentration",
    "splitting-law",
];

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Sample { .. } => "sample",
            ExperimentSpec::Qi { .. } => "qi",
            ExperimentSpec::Counting { .. } => "counting",
            ExperimentSpec::Martingale { .. } => "martingale",
            ExperimentSpec::SecondMoment { .. } => "second-moment",
            ExperimentSpec::Witness { .. } => "witness",
            ExperimentSpec::Orbit { .. } => "orbit",
            ExperimentSpec::HitLadder { .. } => "hit-ladder",
            ExperimentSpec::DensityGrid { .. } => "density-grid",
            ExperimentSpec::PmDecay { .. } => "pm-decay",
            ExperimentSpec::Concentration { .. } => "concentration",
            ExperimentSpec::SplittingLaw { .. } => "splitting-law",
        }
    }
}

/// A run configuration: experiment parameters plus seeding and output
/// location. CLI flags override the file's `master_seed` and `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub spec: ExperimentSpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

/// The results of one run: named CSV tables and a JSON summary, plus the
/// provenance needed to regenerate them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub experiment: String,
    pub tool_version: String,
    /// SHA-256 of the canonical JSON of the producing config.
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub tables: BTreeMap<String, String>,
    pub summary: serde_json::Value,
    /// Excluded from serialization so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock_ms: u128,
}

pub fn config_digest(config: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Execute the configured experiment. `workers` pins the size of a local
/// thread pool; `None` uses the global default.
pub fn run(config: &ExperimentConfig, workers: Option<usize>) -> Result<ResultEnvelope> {
    let start = Instant::now();
    let outcome = match workers {
        Some(k) => {
            if k == 0 {
                return Err(Error::invalid("workers must be >= 1".to_string()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| runner::execute(&config.spec, config.master_seed))
        }
        None => runner::execute(&config.spec, config.master_seed),
    }?;
    Ok(ResultEnvelope {
        experiment: config.spec.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: config_digest(config)?,
        config: config.clone(),
        tables: outcome.0,
        summary: outcome.1,
        wall_clock_ms: start.elapsed().as_millis(),
    })
}

/// Persist the envelope: `envelope.json` plus one `<table>.csv` per
/// table. Returns the written paths.
pub fn write_envelope(envelope: &ResultEnvelope, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut json = serde_json::to_string_pretty(envelope)?;
    json.push('\n');
    let path = out_dir.join("envelope.json");
    std::fs::write(&path, json)?;
    written.push(path);
    for (name, csv) in &envelope.tables {
        let path = out_dir.join(format!("{name}.csv"));
        std::fs::write(&path, csv)?;
        written.push(path);
    }
    Ok(written)
}

/// Emit one SVG per table next to the envelope, choosing the plot kind
/// per experiment.
pub fn write_plots(envelope: &ResultEnvelope, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let kind = match envelope.experiment.as_str() {
        "pm-decay" | "density-grid" => PlotKind::LogLog,
        "witness" | "sample" => PlotKind::Scatter,
        _ => PlotKind::Line,
    };
    let mut written = Vec::new();
    for name in envelope.tables.keys() {
        let doc = plot(envelope, name, kind)?;
        let path = out_dir.join(format!("{name}.svg"));
        std::fs::write(&path, doc)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightKind;

    fn sample_config() -> ExperimentConfig {
        ExperimentConfig {
            spec: ExperimentSpec::Sample {
                weights: WeightSpec {
                    kind: WeightKind::Harmonic { alpha: 1.0 },
                    horizon: 200,
                },
                source: Source::Poisson,
            },
            master_seed: 42,
            out_dir: None,
        }
    }

    #[test]
    fn config_round_trips_and_digest_is_stable() {
        let cfg = sample_config();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_digest(&cfg).unwrap(), config_digest(&back).unwrap());
        assert_ne!(
            config_digest(&cfg).unwrap(),
            config_digest(&ExperimentConfig {
                master_seed: 43,
                ..cfg
            })
            .unwrap()
        );
    }

    #[test]
    fn config_json_shape() {
        let cfg = sample_config();
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["experiment"], "sample");
        assert_eq!(v["weights"]["kind"], "harmonic");
        assert_eq!(v["weights"]["N"], 200);
        assert_eq!(v["master_seed"], 42);
    }

    #[test]
    fn seed_stream_is_injective_over_a_million_trials() {
        let mut seen = std::collections::HashSet::with_capacity(1_000_000);
        for trial in 0..1_000_000u64 {
            assert!(seen.insert(seed_stream(0, trial)), "collision at {trial}");
        }
        assert_ne!(seed_stream(0, 0), seed_stream(0, 1));
        assert_eq!(seed_stream(9, 9), seed_stream(9, 9));
    }

    #[test]
    fn run_rerun_is_identical() {
        let cfg = sample_config();
        let a = run(&cfg, None).unwrap();
        let b = run(&cfg, Some(2)).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.config_digest, b.config_digest);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn write_envelope_outputs_files() {
        let dir = tempfile::tempdir().unwrap();
        let envelope = run(&sample_config(), None).unwrap();
        let written = write_envelope(&envelope, dir.path()).unwrap();
        assert!(written.iter().any(|p| p.ends_with("envelope.json")));
        assert!(written.len() >= 2);
        for p in &written {
            assert!(p.exists());
        }
    }

    #[test]
    fn psi_spec_r_values() {
        assert_eq!(PsiSpec::Zero.r(), 0.0);
        assert_eq!(PsiSpec::DilatedLacunary { a: 2.0, m: 3, q: 3 }.r(), 6.0);
    }
}
