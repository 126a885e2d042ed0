//! Reproducible experiment pipelines: configuration, profiling, pruned
//! inference with energy accounting, threshold optimisation and reports.

mod plots;

pub use plots::{bar_chart, heatmap, xy_chart};

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hw_cost::{area_report, estimate_inference, Accounting, ActivityTrace, CostError, EnergyReport, HwConfig, PruningOutcome};
use crate::io::{load_event_dataset, DataError, SyntheticSource, SyntheticSpec};
use crate::optimizer::{
    bo_loop_observed, comparison_to_csv, grid_search, load_campaign, pareto_front, pareto_to_csv, random_search,
    save_campaign, BoSettings, EvaluationRecord, Measurement, MethodSummary, ObjectiveSpec, OptimizeError,
    DEFAULT_REFERENCE,
};
use crate::pruning::{
    class_summary, evaluate, records_to_csv, select_skipped_layers, summary_to_csv, EvaluatedSample, Evaluation,
    PruningError, ThresholdBounds, ThresholdConfig,
};
use crate::sdt::{calibrate_head, profile_firing_rates, FiringRateProfile, Sample, SdtConfig, SdtError, SdtModel, SdtWeights, Site};

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Raised before any output is written.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] SdtError),
    #[error(transparent)]
    Pruning(#[from] PruningError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_))
    }
}

fn config_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    #[default]
    Synthetic,
    Events,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Evaluation samples drawn from the synthetic source.
    pub samples: usize,
    /// Synthetic samples for head calibration and firing-rate profiling.
    pub calibration: usize,
    pub density: f64,
    pub noise_min: f64,
    pub noise_max: f64,
    /// `path,label` list of event files for evaluation.
    pub manifest: Option<PathBuf>,
    /// Event files for calibration and profiling; defaults to `manifest`.
    pub calibration_manifest: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            source: DatasetSource::Synthetic,
            samples: 100,
            calibration: 200,
            density: s.density,
            noise_min: s.noise_min,
            noise_max: s.noise_max,
            manifest: None,
            calibration_manifest: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub alpha: f64,
    pub tau: (f64, f64),
    pub beta: (f64, f64),
    pub budget: usize,
    pub n0: usize,
    /// EI candidate grid points per axis.
    pub grid: usize,
    pub top_k: usize,
    pub accuracy_floor: Option<f64>,
    /// Exhaustive baseline grid, `[n_tau, n_beta]`.
    pub baseline_grid: (usize, usize),
    pub random: bool,
    /// Hand-picked `[tau, beta]` pairs reported as the manual baseline.
    pub manual: Vec<(f64, f64)>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let b = BoSettings::default();
        Self {
            alpha: 0.5,
            tau: (0.0, 1.0),
            beta: (0.0, 1.0),
            budget: b.budget,
            n0: b.n0,
            grid: b.grid,
            top_k: b.top_k,
            accuracy_floor: None,
            baseline_grid: (9, 9),
            random: true,
            manual: vec![(0.05, 0.9)],
        }
    }
}

impl OptimizeConfig {
    pub fn bounds(&self) -> ThresholdBounds {
        ThresholdBounds { tau: self.tau, beta: self.beta }
    }

    pub fn settings(&self, seed: u64) -> BoSettings {
        BoSettings { budget: self.budget, n0: self.n0, seed, grid: self.grid, top_k: self.top_k }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Model TOML; the default small model when absent.
    pub model: Option<PathBuf>,
    /// `ASTW` weight file; seeded synthetic weights with a calibrated head
    /// when absent.
    pub weights: Option<PathBuf>,
    /// Hardware TOML; built-in defaults when absent.
    pub hardware: Option<PathBuf>,
    pub accounting: Accounting,
    pub dataset: DatasetConfig,
    pub theta: ThresholdConfig,
    pub optimize: OptimizeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            model: None,
            weights: None,
            hardware: None,
            accounting: Accounting::PaperConstant,
            dataset: DatasetConfig::default(),
            theta: ThresholdConfig::new(0.0, 1.0),
            optimize: OptimizeConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.out_dir);
        for p in [&mut cfg.model, &mut cfg.weights, &mut cfg.hardware, &mut cfg.dataset.manifest, &mut cfg.dataset.calibration_manifest]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks values and that referenced files exist.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let d = &self.dataset;
        for p in [&self.model, &self.weights, &self.hardware, &d.manifest, &d.calibration_manifest].into_iter().flatten() {
            if !p.is_file() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        match d.source {
            DatasetSource::Synthetic => {
                if d.samples == 0 || d.calibration == 0 {
                    return Err(config_err("dataset.samples and dataset.calibration must be positive"));
                }
                self.synthetic_spec().validate().map_err(config_err)?;
            }
            DatasetSource::Events => {
                if d.manifest.is_none() {
                    return Err(config_err("dataset.source = \"events\" needs dataset.manifest"));
                }
            }
        }
        self.theta.validate().map_err(config_err)?;
        let o = &self.optimize;
        o.bounds().validate().map_err(config_err)?;
        if !(0.0..=1.0).contains(&o.alpha) {
            return Err(config_err(format!("optimize.alpha = {} outside [0, 1]", o.alpha)));
        }
        if o.budget <= o.n0 + 4 {
            return Err(config_err(format!("optimize.budget {} must exceed n0 + 4 = {}", o.budget, o.n0 + 4)));
        }
        if o.n0 == 0 || o.grid == 0 || o.top_k == 0 || o.baseline_grid.0 == 0 || o.baseline_grid.1 == 0 {
            return Err(config_err("optimize.n0, grid, top_k and baseline_grid must be positive"));
        }
        if let Some(f) = o.accuracy_floor {
            if !(0.0..=1.0).contains(&f) {
                return Err(config_err(format!("optimize.accuracy_floor = {f} outside [0, 1]")));
            }
        }
        for &(tau, beta) in &o.manual {
            ThresholdConfig { tau, beta, metric: self.theta.metric }.validate().map_err(config_err)?;
        }
        Ok(())
    }

    fn synthetic_spec(&self) -> SyntheticSpec {
        let d = &self.dataset;
        SyntheticSpec { density: d.density, noise_min: d.noise_min, noise_max: d.noise_max, seed: self.seed }
    }
}

/// Loaded model, hardware and data, with per-skip-mask run caching.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: SdtModel,
    pub hardware: HwConfig,
    pub calibration: Vec<Sample>,
    pub samples: Vec<Sample>,
    profile: Option<FiringRateProfile>,
    runs: HashMap<Vec<bool>, Arc<Vec<EvaluatedSample>>>,
}

/// Outcome of one threshold pair.
#[derive(Clone, Debug)]
pub struct ThetaResult {
    pub theta: ThresholdConfig,
    pub evaluation: Evaluation,
    pub energy: EnergyReport,
}

impl Experiment {
    /// Validates `config` and loads everything it references. Any failure
    /// here is a configuration error and nothing has been written yet.
    pub fn prepare(config: ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let model_cfg = match &config.model {
            Some(p) => SdtConfig::from_toml(&std::fs::read_to_string(p)?).map_err(config_err)?,
            None => SdtConfig::default(),
        };
        model_cfg.validate().map_err(config_err)?;
        let hardware = match &config.hardware {
            Some(p) => HwConfig::from_toml(&std::fs::read_to_string(p)?).map_err(config_err)?,
            None => HwConfig::default(),
        };
        hardware.validate().map_err(config_err)?;
        let d = &config.dataset;
        let (calibration, samples) = match d.source {
            DatasetSource::Synthetic => {
                let src = SyntheticSource::new(&model_cfg, config.synthetic_spec()).map_err(config_err)?;
                (src.samples(d.calibration, 0), src.samples(d.samples, 1))
            }
            DatasetSource::Events => {
                let manifest = d.manifest.as_ref().expect("validated");
                let samples = load_event_dataset(manifest, &model_cfg).map_err(config_err)?;
                let calibration = match &d.calibration_manifest {
                    Some(p) => load_event_dataset(p, &model_cfg).map_err(config_err)?,
                    None => samples.clone(),
                };
                (calibration, samples)
            }
        };
        if samples.is_empty() || calibration.is_empty() {
            return Err(config_err("dataset has no samples"));
        }
        let model = match &config.weights {
            Some(p) => {
                let w = SdtWeights::read(std::io::BufReader::new(std::fs::File::open(p)?), &model_cfg).map_err(config_err)?;
                SdtModel::new(model_cfg, w).map_err(config_err)?
            }
            None => {
                let mut m = SdtModel::synthetic(model_cfg).map_err(config_err)?;
                calibrate_head(&mut m, &calibration)?;
                m
            }
        };
        Ok(Self { config, model, hardware, calibration, samples, profile: None, runs: HashMap::new() })
    }

    pub fn from_file(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, ExperimentError> {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.out_dir = o;
        }
        Self::prepare(cfg)
    }

    /// Firing rates over the calibration set.
    pub fn profile(&mut self) -> Result<&FiringRateProfile, ExperimentError> {
        if self.profile.is_none() {
            let frames: Vec<_> = self.calibration.iter().map(|s| s.frames.clone()).collect();
            self.profile = Some(profile_firing_rates(&self.model, &frames)?);
        }
        Ok(self.profile.as_ref().expect("set"))
    }

    pub fn skip_mask(&mut self, tau: f64) -> Result<Vec<bool>, ExperimentError> {
        let depth = self.model.config().depth;
        Ok(select_skipped_layers(self.profile()?, tau, depth)?)
    }

    /// Full-length runs of the evaluation set under `mask`.
    pub fn runs(&mut self, mask: &[bool]) -> Result<Arc<Vec<EvaluatedSample>>, ExperimentError> {
        if let Some(r) = self.runs.get(mask) {
            return Ok(Arc::clone(r));
        }
        let r = Arc::new(evaluate(&self.model, &self.samples, mask, self.config.theta.metric)?);
        self.runs.insert(mask.to_vec(), Arc::clone(&r));
        Ok(r)
    }

    /// Mean per-inference trace of the unpruned model.
    pub fn baseline_trace(&mut self) -> Result<ActivityTrace, ExperimentError> {
        let mask = vec![false; self.model.config().depth];
        let runs = self.runs(&mask)?;
        let traces: Vec<ActivityTrace> = runs.iter().map(|r| r.activity.clone()).collect();
        Ok(ActivityTrace::mean(&traces)?)
    }

    /// Accuracy, exit statistics and energy at `(tau, beta)`. Energy is
    /// priced from the unpruned trace with the measured number of skipped
    /// layers and mean saved timesteps.
    pub fn measure(&mut self, tau: f64, beta: f64) -> Result<ThetaResult, ExperimentError> {
        let theta = ThresholdConfig { tau, beta, metric: self.config.theta.metric };
        theta.validate()?;
        let mask = self.skip_mask(tau)?;
        let runs = self.runs(&mask)?;
        let evaluation = Evaluation::from_runs(&runs, &mask, beta)?;
        let baseline = self.baseline_trace()?;
        let timesteps = self.model.config().timesteps as f64;
        let outcome = PruningOutcome {
            skipped_layers: evaluation.skipped_layers(),
            saved_timesteps: (timesteps - evaluation.mean_timesteps).max(0.0),
        };
        let energy = estimate_inference(&baseline, outcome, &self.hardware, self.config.accounting)?;
        Ok(ThetaResult { theta, evaluation, energy })
    }

    /// `E_lo` at `(tau_max, beta_min)` and `E_hi` at `(0, 1)`.
    pub fn objective(&mut self) -> Result<ObjectiveSpec, ExperimentError> {
        let o = self.config.optimize.clone();
        let e_lo = self.measure(o.tau.1, o.beta.0)?.energy.total.uj();
        let e_hi = self.measure(0.0, 1.0)?.energy.total.uj();
        let spec = ObjectiveSpec { alpha: o.alpha, e_lo, e_hi, accuracy_floor: o.accuracy_floor };
        spec.validate()?;
        Ok(spec)
    }

    fn out_dir(&self) -> Result<&Path, ExperimentError> {
        std::fs::create_dir_all(&self.config.out_dir)?;
        Ok(&self.config.out_dir)
    }

    /// Writes `profile.csv`.
    pub fn run_profile(&mut self) -> Result<Vec<PathBuf>, ExperimentError> {
        let csv = self.profile()?.to_csv();
        let out = self.out_dir()?.to_path_buf();
        write_file(&out.join("profile.csv"), csv.as_bytes())
    }

    /// Writes `exit_records.csv`, `class_summary.csv`, `energy.json` and
    /// `energy.csv` for the configured thresholds.
    pub fn run_infer(&mut self) -> Result<Vec<PathBuf>, ExperimentError> {
        let theta = self.config.theta;
        let r = self.measure(theta.tau, theta.beta)?;
        let out = self.out_dir()?.to_path_buf();
        let mut files = write_file(&out.join("exit_records.csv"), records_to_csv(&r.evaluation.records).as_bytes())?;
        files.extend(write_file(&out.join("class_summary.csv"), summary_to_csv(&class_summary(&r.evaluation.records)).as_bytes())?);
        files.extend(write_file(&out.join("energy.json"), r.energy.to_json().as_bytes())?);
        files.extend(write_file(&out.join("energy.csv"), r.energy.to_csv().as_bytes())?);
        Ok(files)
    }

    fn evaluator(&mut self) -> impl FnMut(f64, f64) -> Result<Measurement, String> + '_ {
        |tau, beta| {
            let r = self.measure(tau, beta).map_err(|e| e.to_string())?;
            Ok(Measurement { accuracy: r.evaluation.accuracy, energy_uj: r.energy.total.uj() })
        }
    }

    /// Runs (or resumes from `campaign.jsonl`) the Bayesian optimisation
    /// and the grid, random and manual baselines. Writes the campaign
    /// histories, `pareto.csv`, `comparison.csv` and `objective.json`.
    pub fn run_optimize(&mut self) -> Result<Vec<PathBuf>, ExperimentError> {
        let spec = self.objective()?;
        let o = self.config.optimize.clone();
        let bounds = o.bounds();
        let settings = o.settings(self.config.seed);
        let out = self.out_dir()?.to_path_buf();
        let mut files = write_file(&out.join("objective.json"), format!("{}\n", serde_json::to_string_pretty(&spec).expect("serialises")).as_bytes())?;

        let campaign_path = out.join("campaign.jsonl");
        let history = if campaign_path.is_file() {
            load_campaign(std::io::BufReader::new(std::fs::File::open(&campaign_path)?))?
        } else {
            Vec::new()
        };
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&campaign_path)?;
        let mut observer = |r: &EvaluationRecord| -> Result<(), OptimizeError> {
            save_campaign(std::slice::from_ref(r), &mut file)?;
            file.flush()?;
            Ok(())
        };
        let bo = bo_loop_observed(&mut self.evaluator(), &spec, &bounds, &settings, history, &mut observer)?;
        files.push(campaign_path);

        let mut methods = vec![("bo", bo)];
        methods.push(("grid", grid_search(&mut self.evaluator(), &spec, &bounds, o.baseline_grid)?));
        if o.random {
            let seed = self.config.seed;
            methods.push(("random", random_search(&mut self.evaluator(), &spec, &bounds, o.budget, seed)?));
        }
        if !o.manual.is_empty() {
            let mut manual = Vec::new();
            for (i, &(tau, beta)) in o.manual.iter().enumerate() {
                let m = (self.evaluator())(tau, beta).map_err(|message| OptimizeError::Evaluation { index: i, message, history: manual.clone() })?;
                manual.push(spec.record(i, tau, beta, m)?);
            }
            methods.push(("manual", manual));
        }
        let mut rows = Vec::new();
        for (name, history) in &methods {
            if *name != "bo" {
                let mut buf = Vec::new();
                save_campaign(history, &mut buf)?;
                files.extend(write_file(&out.join(format!("{name}.jsonl")), &buf)?);
            }
            rows.push(MethodSummary::from_history(name, history, DEFAULT_REFERENCE)?);
        }
        let mut buf = Vec::new();
        pareto_to_csv(&methods[0].1, &mut buf)?;
        files.extend(write_file(&out.join("pareto.csv"), &buf)?);
        let mut buf = Vec::new();
        comparison_to_csv(&rows, &mut buf)?;
        files.extend(write_file(&out.join("comparison.csv"), &buf)?);
        Ok(files)
    }

    /// Summary tables and SVG plots: firing rates, accuracy and energy
    /// over the baseline grid, Pareto fronts of any saved campaigns,
    /// accuracy per timestep and mean exit step per class.
    pub fn run_report(&mut self) -> Result<Vec<PathBuf>, ExperimentError> {
        let profile = self.profile()?.clone();
        let depth = self.model.config().depth;
        let timesteps = self.model.config().timesteps;
        let (nt, nb) = self.config.optimize.baseline_grid;
        let (tb, bb) = (self.config.optimize.tau, self.config.optimize.beta);
        let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
            (0..n).map(|i| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
        };
        let (taus, betas) = (axis(tb, nt), axis(bb, nb));
        let mut acc = vec![vec![0.0; nb]; nt];
        let mut energy = vec![vec![0.0; nb]; nt];
        let mut heat = String::from("tau,beta,accuracy,energy_uj,mean_timesteps,skipped_layers\n");
        for (i, &tau) in taus.iter().enumerate() {
            for (j, &beta) in betas.iter().enumerate() {
                let r = self.measure(tau, beta)?;
                acc[i][j] = r.evaluation.accuracy;
                energy[i][j] = r.energy.total.uj();
                heat.push_str(&format!(
                    "{tau},{beta},{},{},{},{}\n",
                    r.evaluation.accuracy,
                    energy[i][j],
                    r.evaluation.mean_timesteps,
                    r.evaluation.skipped_layers()
                ));
            }
        }

        let base = self.runs(&vec![false; depth])?;
        let theta = self.config.theta;
        let pruned_mask = self.skip_mask(theta.tau)?;
        let pruned = self.runs(&pruned_mask)?;
        let curve = |runs: &[EvaluatedSample], t: usize| {
            runs.iter().filter(|r| r.trace.prediction[t] == r.label).count() as f64 / runs.len() as f64
        };
        let mut steps = String::from("timestep,accuracy_baseline,accuracy_pruned\n");
        let (mut c0, mut c1) = (Vec::new(), Vec::new());
        for t in 0..timesteps {
            let (a, b) = (curve(&base, t), curve(&pruned, t));
            steps.push_str(&format!("{},{a},{b}\n", t + 1));
            c0.push(((t + 1) as f64, a));
            c1.push(((t + 1) as f64, b));
        }
        let at_theta = self.measure(theta.tau, theta.beta)?;
        let classes = class_summary(&at_theta.evaluation.records);

        let out = self.out_dir()?.to_path_buf();
        let mut files = write_file(&out.join("heatmap.csv"), heat.as_bytes())?;
        files.extend(write_file(&out.join("timestep_accuracy.csv"), steps.as_bytes())?);
        files.extend(write_file(&out.join("area.csv"), area_report(&self.hardware).to_csv().as_bytes())?);

        let labels: Vec<String> = (1..=profile.layers()).map(|l| format!("layer {l}")).collect();
        let rates: Vec<f64> = (0..profile.layers()).map(|l| profile.rate(l, Site::SdsaOut)).collect();
        files.extend(write_file(&out.join("firing_rates.svg"), bar_chart("SDSA output firing rate", &labels, &rates, "rate").as_bytes())?);
        files.extend(write_file(&out.join("accuracy_heatmap.svg"), heatmap("Accuracy", &taus, &betas, &acc, "tau", "beta").as_bytes())?);
        files.extend(write_file(&out.join("energy_heatmap.svg"), heatmap("Energy (uJ)", &taus, &betas, &energy, "tau", "beta").as_bytes())?);

        let mut fronts = Vec::new();
        for name in ["bo", "grid", "random", "manual"] {
            let path = out.join(if name == "bo" { "campaign.jsonl".to_string() } else { format!("{name}.jsonl") });
            if path.is_file() {
                let h = load_campaign(std::io::BufReader::new(std::fs::File::open(&path)?))?;
                let pts = pareto_front(&h).members.iter().map(|r| (r.e_norm, r.accuracy)).collect();
                fronts.push((name.to_string(), pts));
            }
        }
        files.extend(write_file(&out.join("pareto.svg"), xy_chart("Pareto fronts", &fronts, "normalised energy", "accuracy", true).as_bytes())?);
        let series = vec![("baseline".to_string(), c0), (format!("tau = {}", theta.tau), c1)];
        files.extend(write_file(&out.join("timestep_accuracy.svg"), xy_chart("Accuracy per timestep", &series, "timestep", "accuracy", true).as_bytes())?);
        let class_pts = vec![("mean exit step".to_string(), classes.iter().map(|c| (c.class as f64, c.mean_t_star)).collect())];
        files.extend(write_file(&out.join("class_timesteps.svg"), xy_chart("Exit step per class", &class_pts, "class", "mean t*", false).as_bytes())?);
        Ok(files)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::write(path, bytes)?;
    Ok(vec![path.to_path_buf()])
}
