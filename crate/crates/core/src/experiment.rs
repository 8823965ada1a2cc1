//! Monte Carlo sweep over the per-user bit budget `B`.
//!
//! Every trial draws one channel instance from its own seed and evaluates all
//! requested schemes at every `B` of the sweep on that instance, so scheme
//! comparisons are paired. Trials run on a worker pool; results are reduced in
//! trial order, so the output does not depend on the number of workers.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{trial_seed, SEED_RULE};
use crate::schemes::{SchemeContext, SchemeId};
use crate::system::{sample_instance, Topology};

pub const ARTIFACT_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Header of the CSV results file.
pub const CSV_HEADER: [&str; 5] = ["scheme", "bits_per_user", "mean_distortion", "std_distortion", "n_trials"];

const ALLOCATION_RULE: &str = "SR and IR use the best per-RRU split on the same cumulative-load grid \
(grid_steps levels per link, last link at capacity) or the uniform split, whichever is lower";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FronthaulProfile {
    /// `R_l = U·B` on every link.
    Balanced,
    /// `R_l = l·U·B`.
    Increasing,
}

impl FronthaulProfile {
    /// Link rates in bits per sample for `n_users` users at `bits_per_user`.
    pub fn rates(self, n_users: usize, n_rrus: usize, bits_per_user: f64) -> Vec<f64> {
        let base = n_users as f64 * bits_per_user;
        (1..=n_rrus)
            .map(|l| match self {
                FronthaulProfile::Balanced => base,
                FronthaulProfile::Increasing => l as f64 * base,
            })
            .collect()
    }
}

impl fmt::Display for FronthaulProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FronthaulProfile::Balanced => "BALANCED",
            FronthaulProfile::Increasing => "INCREASING",
        })
    }
}

impl FromStr for FronthaulProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "balanced" => Ok(FronthaulProfile::Balanced),
            "increasing" => Ok(FronthaulProfile::Increasing),
            other => Err(Error::Parse(format!("unknown fronthaul profile '{other}'"))),
        }
    }
}

/// Config files carry the array layout only; the SNR comes from `snr_db`.
mod layout {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::system::Topology;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Layout {
        n_users: usize,
        n_rrus: usize,
        antennas_per_rru: usize,
    }

    pub fn serialize<S: Serializer>(t: &Topology, s: S) -> Result<S::Ok, S::Error> {
        Layout {
            n_users: t.n_users,
            n_rrus: t.n_rrus,
            antennas_per_rru: t.antennas_per_rru,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Topology, D::Error> {
        let l = Layout::deserialize(d)?;
        Ok(Topology {
            n_users: l.n_users,
            n_rrus: l.n_rrus,
            antennas_per_rru: l.antennas_per_rru,
            snr: f64::NAN,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Array layout; its `snr` always mirrors `snr_db`.
    #[serde(with = "layout")]
    pub topology: Topology,
    pub snr_db: f64,
    pub fh_profile: FronthaulProfile,
    pub bits_per_user_sweep: Vec<f64>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub schemes: Vec<SchemeId>,
    pub grid_steps: usize,
}

impl Default for ExperimentConfig {
    /// 15 users, 4 RRUs with 7 antennas each, 10 dB, balanced links,
    /// `B = 0..15`, 200 trials.
    fn default() -> Self {
        let snr_db = 10.0;
        Self {
            topology: Topology {
                n_users: 15,
                n_rrus: 4,
                antennas_per_rru: 7,
                snr: db_to_linear(snr_db),
            },
            snr_db,
            fh_profile: FronthaulProfile::Balanced,
            bits_per_user_sweep: (0..=15).map(f64::from).collect(),
            n_trials: 200,
            base_seed: 42,
            schemes: SchemeId::ALL.to_vec(),
            grid_steps: 32,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ExperimentConfig {
    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text)?;
        cfg.sync_snr();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sets `topology.snr` from `snr_db`.
    pub fn sync_snr(&mut self) {
        self.topology.snr = db_to_linear(self.snr_db);
    }

    pub fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig(format!("snr_db {} is not finite", self.snr_db)));
        }
        let topology = Topology {
            snr: db_to_linear(self.snr_db),
            ..self.topology
        };
        topology.validate()?;
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be positive".into()));
        }
        if self.grid_steps == 0 {
            return Err(Error::InvalidConfig("grid_steps must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("scheme {s} listed twice")));
            }
        }
        if let Some(b) = self.bits_per_user_sweep.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidConfig(format!("bit budget {b} must be finite and nonnegative")));
        }
        if self.bits_per_user_sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "bits_per_user_sweep must be strictly ascending".into(),
            ));
        }
        Ok(())
    }

    /// Topology with the SNR taken from `snr_db`.
    pub fn effective_topology(&self) -> Topology {
        Topology {
            snr: db_to_linear(self.snr_db),
            ..self.topology
        }
    }
}

/// Sum-distortions of one trial, indexed `[scheme][bit budget]` in config order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub zero_rate_distortion: f64,
    pub distortions: Vec<Vec<f64>>,
}

/// Called with `(completed, total)` after every finished trial.
pub type ProgressSink<'a> = &'a (dyn Fn(usize, usize) + Sync);

fn run_trial(cfg: &ExperimentConfig, topology: &Topology, trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.base_seed, trial as u64);
    let inst = sample_instance(topology, seed)?;
    let ctx = SchemeContext::new(&inst)?;
    let mut distortions = vec![Vec::with_capacity(cfg.bits_per_user_sweep.len()); cfg.schemes.len()];
    for &b in &cfg.bits_per_user_sweep {
        let rates = cfg.fh_profile.rates(topology.n_users, topology.n_rrus, b);
        for (row, scheme) in distortions.iter_mut().zip(&cfg.schemes) {
            let eval = match scheme {
                SchemeId::StandardRouting => ctx.optimize_sr_allocation(&rates, cfg.grid_steps)?,
                SchemeId::ImprovedRouting => ctx.optimize_ir_allocation(&rates, cfg.grid_steps)?,
                SchemeId::InNetworkProcessing => ctx.eval_ip(&rates)?,
                SchemeId::LowerBound => ctx.eval_lower_bound(&rates)?,
            };
            row.push(eval.sum_distortion);
        }
    }
    Ok(TrialRecord {
        trial,
        seed,
        zero_rate_distortion: ctx.zero_rate_distortion(),
        distortions,
    })
}

/// Runs every trial on `workers` threads (0 = available parallelism) and
/// returns the records in trial order.
pub fn run_trials(cfg: &ExperimentConfig, workers: usize, progress: Option<ProgressSink<'_>>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let topology = cfg.effective_topology();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let done = AtomicUsize::new(0);
    pool.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| {
                let rec = run_trial(cfg, &topology, t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })?;
                if let Some(sink) = progress {
                    sink(done.fetch_add(1, Ordering::Relaxed) + 1, cfg.n_trials);
                }
                Ok(rec)
            })
            .collect()
    })
}

/// Runs the experiment on all available cores.
pub fn run_experiment(cfg: &ExperimentConfig, progress: Option<ProgressSink<'_>>) -> Result<ResultTable> {
    run_experiment_with(cfg, 0, progress)
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    workers: usize,
    progress: Option<ProgressSink<'_>>,
) -> Result<ResultTable> {
    let records = run_trials(cfg, workers, progress)?;
    Ok(aggregate(cfg, &records))
}

/// Mean and sample standard deviation per (scheme, B), summed in trial order.
pub fn aggregate(cfg: &ExperimentConfig, records: &[TrialRecord]) -> ResultTable {
    let n = records.len();
    let mut rows = Vec::with_capacity(cfg.schemes.len() * cfg.bits_per_user_sweep.len());
    for (s, &scheme) in cfg.schemes.iter().enumerate() {
        for (b, &bits) in cfg.bits_per_user_sweep.iter().enumerate() {
            let values = records.iter().map(|r| r.distortions[s][b]);
            let mean = values.clone().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(ResultRow {
                scheme,
                bits_per_user: bits,
                mean_distortion: mean,
                std_distortion: std,
                n_trials: n,
            });
        }
    }
    ResultTable {
        rows,
        metadata: Metadata::new(cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub bits_per_user: f64,
    pub mean_distortion: f64,
    pub std_distortion: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub artifact_version: String,
    pub seed_rule: String,
    pub fronthaul_rule: String,
    pub allocation_rule: String,
}

impl Metadata {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            config: cfg.clone(),
            artifact_version: ARTIFACT_VERSION.into(),
            seed_rule: SEED_RULE.into(),
            fronthaul_rule: match cfg.fh_profile {
                FronthaulProfile::Balanced => "R_l = n_users * B".into(),
                FronthaulProfile::Increasing => "R_l = l * n_users * B".into(),
            },
            allocation_rule: ALLOCATION_RULE.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl FromStr for ResultFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ResultFormat::Csv),
            "json" => Ok(ResultFormat::Json),
            other => Err(Error::Parse(format!("unknown result format '{other}'"))),
        }
    }
}

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn format_sig12(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim_fraction(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scheme.as_str().to_string(),
                format_sig12(r.bits_per_user),
                format_sig12(r.mean_distortion),
                format_sig12(r.std_distortion),
                r.n_trials.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut table: Self = serde_json::from_str(text)?;
        table.metadata.config.sync_snr();
        Ok(table)
    }
}

pub fn write_results(table: &ResultTable, path: impl AsRef<Path>, format: ResultFormat) -> Result<()> {
    let text = match format {
        ResultFormat::Csv => table.to_csv()?,
        ResultFormat::Json => table.to_json()?,
    };
    fs::write(path, text)?;
    Ok(())
}

/// Reads a table written with [`ResultFormat::Json`].
pub fn read_results(path: impl AsRef<Path>) -> Result<ResultTable> {
    ResultTable::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_trials: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            topology: Topology::new(2, 2, 2, 1.0).unwrap(),
            snr_db: 10.0,
            bits_per_user_sweep: vec![0.0, 1.0, 3.0],
            n_trials,
            base_seed: 7,
            grid_steps: 8,
            ..Default::default()
        };
        cfg.sync_snr();
        cfg
    }

    #[test]
    fn profiles() {
        assert_eq!(FronthaulProfile::Balanced.rates(15, 4, 2.0), vec![30.0; 4]);
        assert_eq!(FronthaulProfile::Increasing.rates(15, 3, 1.0), vec![15.0, 30.0, 45.0]);
        assert_eq!("Increasing".parse::<FronthaulProfile>().unwrap(), FronthaulProfile::Increasing);
        assert!("flat".parse::<FronthaulProfile>().is_err());
    }

    #[test]
    fn default_matches_reference_setup() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.topology.n_users, cfg.topology.n_rrus, cfg.topology.antennas_per_rru), (15, 4, 7));
        assert_eq!(cfg.n_trials, 200);
        assert_eq!(cfg.bits_per_user_sweep.len(), 16);
        assert!((cfg.topology.snr - 10.0).abs() < 1e-12);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_json() {
        let cfg = small(3);
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);

        let partial = ExperimentConfig::from_json(r#"{"snr_db": 0, "n_trials": 5}"#).unwrap();
        assert_eq!(partial.n_trials, 5);
        assert!((partial.topology.snr - 1.0).abs() < 1e-15);

        for bad in [
            r#"{"n_trial": 5}"#,
            r#"{"n_trials": 0}"#,
            r#"{"topology": {"n_users": 2, "n_rrus": 1, "antennas_per_rru": 2, "snr": 3}}"#,
            r#"{"bits_per_user_sweep": [2, 1]}"#,
            r#"{"bits_per_user_sweep": [1, 1]}"#,
            r#"{"bits_per_user_sweep": [-1]}"#,
            r#"{"schemes": []}"#,
            r#"{"schemes": ["IR", "IR"]}"#,
            r#"{"fh_profile": "balanced"}"#,
            r#"{"grid_steps": 0}"#,
            r#"{"topology": {"n_users": 9, "n_rrus": 1, "antennas_per_rru": 2}}"#,
        ] {
            assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sig12() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(1.0), "1");
        assert_eq!(format_sig12(15.0), "15");
        assert_eq!(format_sig12(0.1), "0.1");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(2.0 / 3.0 * 1e4), "6666.66666667");
        assert_eq!(format_sig12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(format_sig12(1.5e-7), "1.5e-07");
        assert_eq!(format_sig12(0.000123), "0.000123");
        assert_eq!(format_sig12(999999999999.5), "1e+12");
    }

    #[test]
    fn zero_budget_gives_trace_for_every_scheme() {
        let mut cfg = small(4);
        cfg.bits_per_user_sweep = vec![0.0];
        let recs = run_trials(&cfg, 1, None).unwrap();
        for r in &recs {
            for row in &r.distortions {
                assert!((row[0] - r.zero_rate_distortion).abs() <= 1e-9 * r.zero_rate_distortion);
            }
        }
        let table = aggregate(&cfg, &recs);
        let mean = recs.iter().map(|r| r.zero_rate_distortion).sum::<f64>() / 4.0;
        for row in &table.rows {
            assert!((row.mean_distortion - mean).abs() <= 1e-9 * mean);
        }
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let cfg = small(5);
        let a = run_experiment_with(&cfg, 1, None).unwrap();
        let b = run_experiment_with(&cfg, 3, None).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert_eq!(a, b);
        let single = small(1);
        assert_eq!(
            run_experiment_with(&single, 1, None).unwrap().to_json().unwrap(),
            run_experiment_with(&single, 2, None).unwrap().to_json().unwrap()
        );
    }

    #[test]
    fn table_shape_and_files() {
        let cfg = small(3);
        let seen = AtomicUsize::new(0);
        let sink = |done: usize, total: usize| {
            assert!(done <= total);
            seen.fetch_add(1, Ordering::Relaxed);
        };
        let table = run_experiment_with(&cfg, 2, Some(&sink)).unwrap();
        assert_eq!(seen.load(Ordering::Relaxed), 3);
        assert_eq!(table.rows.len(), cfg.schemes.len() * cfg.bits_per_user_sweep.len());
        assert!(table.rows.iter().all(|r| r.mean_distortion >= 0.0 && r.std_distortion >= 0.0));

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        write_results(&table, &csv_path, ResultFormat::Csv).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 1 + table.rows.len());

        let json_path = dir.path().join("r.json");
        write_results(&table, &json_path, ResultFormat::Json).unwrap();
        assert_eq!(read_results(&json_path).unwrap(), table);
    }

    #[test]
    fn empty_sweep_gives_header_only() {
        let mut cfg = small(2);
        cfg.bits_per_user_sweep.clear();
        let table = run_experiment_with(&cfg, 1, None).unwrap();
        assert_eq!(table.to_csv().unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn invalid_topology_is_rejected_up_front() {
        let mut cfg = small(1);
        cfg.topology.n_users = 5;
        assert!(matches!(run_trials(&cfg, 1, None), Err(Error::InvalidTopology(_))));
    }
}
