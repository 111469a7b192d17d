//! Batch experiments: configuration, seeded execution and CSV/JSON output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::protocols::{
    bases_mutually_unbiased, completeness_check, mub_protocol, qpt_two_level, qst_two_level, spam_calibration_circuits,
    TomographyProtocol,
};
use crate::qcore::{fidelity_states, haar_random_state, haar_random_unitary, process_fidelity, DensityMatrix, RandomSeed};
use crate::readout::SpamModel;
use crate::recon::{
    build_measurement_model, estimate_spam_general, estimate_spam_gibbs, gibbs_level_read_probabilities, mle_process, mle_state,
    CalibrationModel, GibbsFitConfig, OptimizerConfig, SpamAssumption,
};
use crate::sim::{level_read_probabilities, run_circuits, run_level_reads, run_protocol, NoiseConfig, Truth};

/// Caps the worker thread count when set to a positive integer.
pub const THREADS_ENV: &str = "QUDIT_TOMO_THREADS";

pub const LABEL_TWO_LEVEL: &str = "2-level";
pub const LABEL_MUB: &str = "MUB";
pub const LABEL_IDEAL: &str = "Ideal model";
pub const LABEL_TRUE: &str = "True model";
pub const LABEL_SPAM_1: &str = "SPAM errors model 1";
pub const LABEL_SPAM_2: &str = "SPAM errors model 2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    QstCompare,
    QptModels,
    SpamGeneral,
    SpamGibbs,
    /// Both SPAM fits in one report.
    SpamFit,
    Completeness,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::QstCompare => "qst_compare",
            Experiment::QptModels => "qpt_models",
            Experiment::SpamGeneral => "spam_general",
            Experiment::SpamGibbs => "spam_gibbs",
            Experiment::SpamFit => "spam_fit",
            Experiment::Completeness => "completeness",
        }
    }

    fn is_spam(self) -> bool {
        matches!(self, Experiment::SpamGeneral | Experiment::SpamGibbs | Experiment::SpamFit)
    }

    /// Whether a config naming `self` may be run by the subcommand for `other`.
    pub fn compatible_with(self, other: Experiment) -> bool {
        self == other || (self.is_spam() && other.is_spam())
    }
}

/// Fully resolved experiment settings. Every field has a default, so a
/// config file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    /// Total sample sizes, strictly ascending.
    pub grid: Vec<u64>,
    pub trials: usize,
    pub gate_depol_p: f64,
    pub truth_depol_p: f64,
    pub temperature: f64,
    pub omegas: Vec<f64>,
    pub b0: f64,
    pub b1: f64,
    /// Total shots of each SPAM calibration dataset.
    pub calibration_shots: u64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::QstCompare,
            dim: 3,
            grid: vec![1_000, 10_000, 100_000, 1_000_000],
            trials: 50,
            gate_depol_p: 0.001,
            truth_depol_p: 0.01,
            temperature: 1.0,
            omegas: vec![0.0, 4.0, 6.0],
            b0: 0.01,
            b1: 0.02,
            calibration_shots: 1_000_000,
            seed: 1,
            optimizer: OptimizerConfig::default(),
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self { experiment, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim < 2 {
            return bad(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("grid must be nonempty and strictly ascending, got {:?}", self.grid));
        }
        if self.grid[0] == 0 || self.calibration_shots == 0 {
            return bad("sample sizes must be positive".into());
        }
        for (name, p) in [("gate_depol_p", self.gate_depol_p), ("truth_depol_p", self.truth_depol_p)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        if self.experiment == Experiment::QptModels || self.experiment.is_spam() {
            if self.omegas.len() != self.dim {
                return bad(format!("{} omegas given for dimension {}", self.omegas.len(), self.dim));
            }
            self.spam_truth().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.optimizer.validate()
    }

    /// Thermal initialization and cascade readout with the configured parameters.
    pub fn spam_truth(&self) -> Result<SpamModel> {
        SpamModel::gibbs(self.temperature, self.omegas.clone(), self.b0, self.b1)
    }

    pub fn root_seed(&self) -> RandomSeed {
        RandomSeed::new(self.seed)
    }

    /// Output path, defaulting to `results/<experiment>.<ext>`.
    pub fn output_path(&self) -> PathBuf {
        let ext = match self.experiment {
            Experiment::QstCompare | Experiment::QptModels => "csv",
            _ => "json",
        };
        self.out.clone().unwrap_or_else(|| PathBuf::from(format!("results/{}.{ext}", self.experiment.name())))
    }

    fn optimizer_with_seed(&self, seed: RandomSeed) -> OptimizerConfig {
        OptimizerConfig { seed, ..self.optimizer.clone() }
    }
}

/// One reconstruction outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub label: String,
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub trial: usize,
    pub infidelity: f64,
}

/// Lower quartile, median and upper quartile of one `(label, N)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    #[serde(rename = "N")]
    pub n: u64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    /// Gate counts per circuit of each protocol, `(label, counts)`.
    pub gate_counts: Vec<(String, Vec<usize>)>,
    /// Sorted by label, N, trial.
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResults {
    fn new(config: &ExperimentConfig, protocols: &[(&str, &TomographyProtocol)], mut rows: Vec<ResultRow>) -> Self {
        rows.sort_by(|a, b| a.label.cmp(&b.label).then(a.n.cmp(&b.n)).then(a.trial.cmp(&b.trial)));
        let summary = summarize(&rows);
        let gate_counts =
            protocols.iter().map(|(label, p)| (label.to_string(), p.circuits.iter().map(|c| c.gate_count()).collect())).collect();
        Self { config: config.clone(), gate_counts, rows, summary }
    }

    pub fn summary_for(&self, label: &str, n: u64) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.label == label && s.n == n)
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quartiles per `(label, N)` of rows already in canonical order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for group in rows.chunk_by(|a, b| a.label == b.label && a.n == b.n) {
        let mut v: Vec<f64> = group.iter().map(|r| r.infidelity).collect();
        v.sort_by(f64::total_cmp);
        out.push(SummaryRow {
            label: group[0].label.clone(),
            n: group[0].n,
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
        });
    }
    out
}

fn infidelity(f: f64) -> Result<f64> {
    if !f.is_finite() {
        return Err(Error::Numerical(format!("fidelity {f} is not finite")));
    }
    Ok((1.0 - f).clamp(0.0, 1.0))
}

/// `(N, trial)` jobs in canonical order; each job seeds itself from the
/// root seed, so results do not depend on scheduling.
fn jobs(config: &ExperimentConfig) -> Vec<(u64, usize)> {
    config.grid.iter().flat_map(|&n| (0..config.trials).map(move |t| (n, t))).collect()
}

/// Haar-random pure states depolarized once, reconstructed from MUB and
/// two-level data with ideal-SPAM models. Both protocols see gate noise.
pub fn run_qst_compare(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let d = config.dim;
    let protocols: Vec<(&str, TomographyProtocol)> = vec![(LABEL_TWO_LEVEL, qst_two_level(d)?), (LABEL_MUB, mub_protocol(d)?)];
    let noise = NoiseConfig::new(config.gate_depol_p, SpamModel::ideal(), config.truth_depol_p)?;
    let models = protocols
        .iter()
        .map(|(_, p)| build_measurement_model(p, &SpamAssumption::Ideal, None))
        .collect::<Result<Vec<_>>>()?;
    let root = config.root_seed();
    let rows = jobs(config)
        .into_par_iter()
        .map(|(n, trial)| {
            let trial_seed = root.derive("trial", trial as u64);
            let psi = DensityMatrix::pure(&haar_random_state(d, trial_seed.derive("truth-state", 0))?)?;
            let truth = noise.truth_state(&psi)?;
            protocols
                .iter()
                .zip(&models)
                .map(|((label, proto), model)| {
                    let data = run_protocol(proto, Truth::State(&truth), &noise, n, trial_seed.derive(label, n))?;
                    let fit = mle_state(&data, model)?;
                    Ok(ResultRow {
                        experiment: config.experiment.name().into(),
                        label: label.to_string(),
                        dim: d,
                        n,
                        trial,
                        infidelity: infidelity(fidelity_states(&fit.estimate, &truth)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let listed: Vec<(&str, &TomographyProtocol)> = protocols.iter().map(|(l, p)| (*l, p)).collect();
    Ok(ExperimentResults::new(config, &listed, rows.into_iter().flatten().collect()))
}

/// Reconstruction models compared on the same process tomography data.
fn qpt_assumptions(config: &ExperimentConfig, truth_spam: &SpamModel, seed: RandomSeed) -> Result<Vec<(&'static str, SpamAssumption)>> {
    let d = config.dim;
    let noise = NoiseConfig::new(config.gate_depol_p, truth_spam.clone(), 0.0)?;
    let calib = run_circuits(&spam_calibration_circuits(d)?, Truth::None, &noise, config.calibration_shots, seed.derive("calibration", 0))?;
    let general = estimate_spam_general(&calib, config.gate_depol_p, &config.optimizer_with_seed(seed.derive("general-fit", 0)))?;
    let reads = run_level_reads(&noise, d, config.calibration_shots, seed.derive("level-reads", 0))?;
    let gibbs_cfg = GibbsFitConfig { omegas: config.omegas.clone(), optimizer: config.optimizer_with_seed(seed.derive("gibbs-fit", 0)) };
    let gibbs = estimate_spam_gibbs(&reads, &gibbs_cfg)?.estimate;
    Ok(vec![
        (LABEL_IDEAL, SpamAssumption::Ideal),
        (LABEL_TRUE, SpamAssumption::True { model: truth_spam.clone() }),
        (LABEL_SPAM_1, SpamAssumption::Diagonal { model: general.estimate }),
        (LABEL_SPAM_2, SpamAssumption::Gibbs { temperature: gibbs.temperature, omegas: gibbs.omegas, b0: gibbs.b0, b1: gibbs.b1 }),
    ])
}

/// Depolarized Haar-random unitaries reconstructed from two-level process
/// tomography data under four SPAM models. The fitted models are estimated
/// once per trial from fresh calibration data.
pub fn run_qpt_models(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let d = config.dim;
    let proto = qpt_two_level(d)?;
    let spam = config.spam_truth()?;
    let noise = NoiseConfig::new(config.gate_depol_p, spam.clone(), config.truth_depol_p)?;
    let root = config.root_seed();
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = root.derive("trial", trial as u64);
            let assumptions = qpt_assumptions(config, &spam, seed)?;
            let models = assumptions
                .into_iter()
                .map(|(label, a)| Ok((label, build_measurement_model(&proto, &a, None)?)))
                .collect::<Result<Vec<_>>>()?;
            let truth = noise.truth_process(&haar_random_unitary(d, seed.derive("truth-unitary", 0))?)?;
            Ok((trial, models, truth))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = jobs(config)
        .into_par_iter()
        .map(|(n, trial)| {
            let (_, models, truth) = &per_trial[trial];
            let data = run_protocol(&proto, Truth::Process(truth), &noise, n, root.derive("trial", trial as u64).derive("counts", n))?;
            models
                .par_iter()
                .map(|(label, model)| {
                    let fit = mle_process(&data, model)?;
                    Ok(ResultRow {
                        experiment: config.experiment.name().into(),
                        label: label.to_string(),
                        dim: d,
                        n,
                        trial,
                        infidelity: infidelity(process_fidelity(&fit.estimate, truth)?)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResults::new(config, &[(LABEL_TWO_LEVEL, &proto)], rows.into_iter().flatten().collect()))
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// SPAM calibration fits on `calibration_shots` shots, with predictive
/// residuals against the true outcome probabilities. `spam_general` and
/// `spam_gibbs` run one fit, `spam_fit` runs both.
pub fn run_spam_fits(config: &ExperimentConfig) -> Result<Value> {
    config.validate()?;
    let d = config.dim;
    let spam = config.spam_truth()?;
    let noise = NoiseConfig::new(config.gate_depol_p, spam.clone(), 0.0)?;
    let root = config.root_seed();
    let shots = config.calibration_shots;
    let mut report = json!({ "experiment": config.experiment.name(), "seed": config.seed, "config": config, "calibration_shots": shots });

    if config.experiment != Experiment::SpamGibbs {
        let calib = run_circuits(&spam_calibration_circuits(d)?, Truth::None, &noise, shots, root.derive("calibration", 0))?;
        let fit = estimate_spam_general(&calib, config.gate_depol_p, &config.optimizer_with_seed(root.derive("general-fit", 0)))?;
        let model = CalibrationModel::standard(d, config.gate_depol_p)?;
        let truth_p = model.probabilities(&spam.to_diagonal(d)?)?;
        let mut entry = fit.to_json(&config.optimizer)?;
        entry["truth_probabilities"] = json!(truth_p);
        entry["max_abs_residual_vs_truth"] = json!(max_abs_diff(&fit.predicted, &truth_p));
        report["general"] = entry;
    }
    if config.experiment != Experiment::SpamGeneral {
        let reads = run_level_reads(&noise, d, shots, root.derive("level-reads", 0))?;
        let cfg = GibbsFitConfig { omegas: config.omegas.clone(), optimizer: config.optimizer_with_seed(root.derive("gibbs-fit", 0)) };
        let fit = estimate_spam_gibbs(&reads, &cfg)?;
        let truth_q = level_read_probabilities(&noise, d)?;
        let fitted_q = gibbs_level_read_probabilities(fit.estimate.temperature, &fit.estimate.omegas, fit.estimate.b0, fit.estimate.b1)?;
        let mut entry = fit.to_json(&cfg)?;
        entry["truth"] = json!({ "temperature": config.temperature, "b0": config.b0, "b1": config.b1 });
        entry["truth_click_probabilities"] = json!(truth_q);
        entry["max_abs_residual_vs_truth"] =
            json!(truth_q.iter().zip(&fitted_q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        report["gibbs"] = entry;
    }
    Ok(report)
}

/// Protocol sizes, gate counts, ranks and completeness verdicts of the
/// two-level protocols at the configured dimension.
pub fn run_completeness(config: &ExperimentConfig) -> Result<Value> {
    config.validate()?;
    let d = config.dim;
    let describe = |p: &TomographyProtocol| -> Result<Value> {
        let c = completeness_check(p, &SpamModel::ideal())?;
        Ok(json!({
            "circuits": p.len(),
            "gate_counts": p.circuits.iter().map(|c| c.gate_count()).collect::<Vec<_>>(),
            "max_gates_per_circuit": p.max_gates_per_circuit(),
            "preparations": p.preparations().len(),
            "rank": c.rank,
            "required_rank": c.required,
            "complete": c.complete,
        }))
    };
    let qst = qst_two_level(d)?;
    let mut qst_doc = describe(&qst)?;
    qst_doc["mub_equivalent"] = json!(bases_mutually_unbiased(&qst, 1e-10)?);
    Ok(json!({
        "experiment": config.experiment.name(),
        "seed": config.seed,
        "config": config,
        "dim": d,
        "qst_two_level": qst_doc,
        "qpt_two_level": describe(&qpt_two_level(d)?)?,
    }))
}

fn comment_header(results: &ExperimentResults) -> Result<String> {
    let config = &results.config;
    let mut out = format!("# seed={}\n# config={}\n", config.seed, serde_json::to_string(config)?);
    for (label, counts) in &results.gate_counts {
        let list: Vec<String> = counts.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "# gates[{label}]={}", list.join(" "));
    }
    Ok(out)
}

fn csv_body<T: Serialize>(records: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(crate::sim::csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Rows as CSV (`experiment,label,dim,N,trial,infidelity`) preceded by
/// `#` lines holding the seed, the resolved config and the gate count of
/// every circuit of each protocol.
pub fn rows_csv(results: &ExperimentResults) -> Result<String> {
    Ok(comment_header(results)? + &csv_body(&results.rows)?)
}

/// Summary CSV (`label,N,q25,median,q75`) with the same `#` header.
pub fn summary_csv(results: &ExperimentResults) -> Result<String> {
    Ok(comment_header(results)? + &csv_body(&results.summary)?)
}

/// `<stem>_summary.csv` next to the rows file.
pub fn summary_path(rows_path: &Path) -> PathBuf {
    let stem = rows_path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    rows_path.with_file_name(format!("{stem}_summary.csv"))
}

/// Parses a rows CSV written by [`rows_csv`], skipping `#` lines.
pub fn read_rows_csv(text: &str) -> Result<Vec<ResultRow>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).fold(String::new(), |mut s, l| {
        let _ = writeln!(s, "{l}");
        s
    });
    csv::Reader::from_reader(body.as_bytes()).deserialize().map(|r| r.map_err(crate::sim::csv_err)).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes the rows and summary files; returns their paths.
pub fn write_results(results: &ExperimentResults, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let summary = summary_path(path);
    write_file(path, &rows_csv(results)?)?;
    write_file(&summary, &summary_csv(results)?)?;
    Ok((path.to_path_buf(), summary))
}

pub fn write_json(value: &Value, path: &Path) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Limits the global worker pool to the value of [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // A pool that already exists keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "qpt_models", "trials": 2}"#).unwrap();
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.trials, 2);
        assert!(cfg.validate().is_ok());
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        for bad in [r#"{"grid": [100, 10]}"#, r#"{"trials": 0}"#, r#"{"grid": []}"#, r#"{"gate_depol_p": 2}"#, r#"{"dim": 1}"#] {
            assert!(matches!(ExperimentConfig::from_json(bad).unwrap().validate(), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn summary_groups_rows() {
        let row = |label: &str, n, trial, infidelity| ResultRow { experiment: "x".into(), label: label.into(), dim: 3, n, trial, infidelity };
        let rows = vec![row("a", 10, 0, 0.3), row("a", 10, 1, 0.1), row("a", 20, 0, 0.2), row("b", 10, 0, 0.5)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].median, 0.2);
        assert_eq!((s[2].label.as_str(), s[2].n), ("b", 10));
    }

    #[test]
    fn completeness_report() {
        let v = run_completeness(&ExperimentConfig { dim: 2, ..ExperimentConfig::new(Experiment::Completeness) }).unwrap();
        assert_eq!(v["qst_two_level"]["circuits"], 3);
        assert_eq!(v["qst_two_level"]["rank"], 4);
        assert_eq!(v["qst_two_level"]["mub_equivalent"], true);
        assert_eq!(v["qpt_two_level"]["rank"], 16);
    }

    #[test]
    fn qst_compare_small_run_roundtrips_through_csv() {
        let cfg = ExperimentConfig { grid: vec![1_000, 10_000], trials: 3, ..ExperimentConfig::new(Experiment::QstCompare) };
        let res = run_qst_compare(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 3 * 2);
        assert_eq!(res.rows[0].label, LABEL_TWO_LEVEL);
        let text = rows_csv(&res).unwrap();
        assert!(text.starts_with("# seed=1\n# config={"));
        assert!(text.contains("experiment,label,dim,N,trial,infidelity\n"));
        assert!(text.contains("# gates[2-level]=0 1 1 1 1 1 1\n"));
        assert_eq!(read_rows_csv(&text).unwrap(), res.rows);
    }

    #[test]
    fn mub_needs_prime_dimension() {
        let cfg = ExperimentConfig { dim: 4, trials: 1, grid: vec![100], ..ExperimentConfig::new(Experiment::QstCompare) };
        assert!(run_qst_compare(&cfg).is_err());
    }
}
