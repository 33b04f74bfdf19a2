//! Experiment configuration and batch execution.
//!
//! An experiment is the cross product of policies, item counts, seeds and
//! horizons. Runs are independent and execute on a rayon pool; results are
//! merged by key, so neither worker count nor completion order can change
//! the summary.
//!
//! Anytime policies run once at the largest horizon and are snapshotted at
//! every smaller one. Fixed-horizon policies read `T`, so they are rerun
//! from scratch for each horizon.

mod verify;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::environment::{Environment, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::instances;
use crate::metrics::{
    downsample, fit_scaling, geometric_grid, write_csv, MeanStd, PolicyTrace, Recorder, ScalingFit,
    Snapshot, TraceMode,
};
use crate::model::Instance;
use crate::policies::{Policy, PolicyKind, PolicySpec, PolicyStats};

pub use verify::{run_verify, SuiteReport, VerifyOptions, VerifyReport};

/// Environment variable holding the worker count (defaults to all cores).
pub const WORKERS_ENV: &str = "MNL_BANDIT_WORKERS";
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// When `seed` is absent each run draws its own instance from its seed.
    Uniform {
        n: usize,
        k: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    LbBase {
        n: usize,
        #[serde(default)]
        capacity: Option<usize>,
    },
    LbPerturbed {
        n: usize,
        k_item: usize,
        t1: u64,
        #[serde(default)]
        capacity: Option<usize>,
    },
}

impl GeneratorSpec {
    fn n(&self) -> usize {
        match *self {
            GeneratorSpec::Uniform { n, .. }
            | GeneratorSpec::LbBase { n, .. }
            | GeneratorSpec::LbPerturbed { n, .. } => n,
        }
    }

    /// Builds the instance for item count `n` and run seed `run_seed`.
    pub fn generate(&self, n: usize, run_seed: u64) -> Result<Instance> {
        match *self {
            GeneratorSpec::Uniform { k, seed, .. } => {
                instances::gen_uniform_random(n, k.min(n), seed.unwrap_or_else(|| instance_seed(run_seed)))
            }
            GeneratorSpec::LbBase { capacity, .. } => {
                instances::gen_lowerbound_base_with_capacity(n, capacity.unwrap_or(1))
            }
            GeneratorSpec::LbPerturbed {
                k_item, t1, capacity, ..
            } => instances::gen_lowerbound_perturbed_with_capacity(n, k_item, t1, capacity.unwrap_or(1)),
        }
    }
}

/// Instance streams are decorrelated from the customer stream of the same
/// run seed by one SplitMix64 round.
pub fn instance_seed(run_seed: u64) -> u64 {
    let mut z = run_seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { base: u64, count: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { base, count } => (0..*count).map(|i| base + i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleSpec {
    /// Powers of two up to `T`, plus `T`.
    Geometric,
    Points(Vec<u64>),
}

impl DownsampleSpec {
    pub fn grid(&self, horizon: u64) -> Vec<u64> {
        match self {
            DownsampleSpec::Geometric => {
                let mut g = geometric_grid(horizon);
                if g.last() != Some(&horizon) {
                    g.push(horizon);
                }
                g
            }
            DownsampleSpec::Points(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policies: Vec<PolicySpec>,
    pub horizons: Vec<u64>,
    pub seeds: SeedSpec,
    /// Item counts to sweep; generator sources only.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    /// Where `summary.json` and `traces/` go; nothing is written if absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub trace_mode: TraceMode,
    #[serde(default)]
    pub downsample: Option<DownsampleSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Simulate,
    Sweep,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

impl ExperimentConfig {
    pub fn validate(&self, kind: RunKind) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Error::config("horizons", "at least one horizon is required"));
        }
        if self.horizons.contains(&0) {
            return Err(Error::config("horizons", "horizons must be positive"));
        }
        let seeds = self.seeds.seeds();
        if seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "at least one policy is required"));
        }
        let mut names = HashSet::new();
        for (i, p) in self.policies.iter().enumerate() {
            p.validate().map_err(|e| match e {
                Error::Config { field, reason } => Error::config(format!("policies[{i}].{field}"), reason),
                other => other,
            })?;
            if !names.insert(p.name) {
                return Err(Error::config(format!("policies[{i}].name"), format!("{} listed twice", p.name)));
            }
        }
        match (&self.instance, &self.n_grid) {
            (_, Some(_)) if kind == RunKind::Simulate => {
                return Err(Error::config("n_grid", "only valid for sweep"));
            }
            (InstanceSource::File(_), Some(_)) => {
                return Err(Error::config("n_grid", "requires a generator instance source"));
            }
            (_, Some(grid)) if grid.is_empty() => {
                return Err(Error::config("n_grid", "must not be empty"));
            }
            _ => {}
        }
        if let InstanceSource::Generator(g) = &self.instance {
            for n in self.item_counts() {
                g.generate(n, 0)
                    .map_err(|e| Error::config("instance.generator", format!("n = {n}: {e}")))?;
            }
        }
        if let Some(DownsampleSpec::Points(p)) = &self.downsample {
            if p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("downsample.points", "must be strictly increasing"));
            }
        }
        Ok(())
    }

    /// Copy with horizons sorted and deduplicated and seeds expanded, as
    /// recorded in the result provenance.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        c.horizons.sort_unstable();
        c.horizons.dedup();
        c.seeds = SeedSpec::List(self.seeds.seeds());
        c
    }

    fn item_counts(&self) -> Vec<usize> {
        match (&self.instance, &self.n_grid) {
            (_, Some(grid)) => grid.clone(),
            (InstanceSource::Generator(g), None) => vec![g.n()],
            (InstanceSource::File(_), None) => vec![0],
        }
    }
}

/// Final metrics of one (policy, n, T, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub seed: u64,
    pub instance_hash: String,
    pub theta_star: f64,
    pub cum_regret: f64,
    pub asst_switches: u64,
    pub item_switches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub policy: PolicyKind,
    pub n_items: usize,
    pub horizon: u64,
    pub runs: Vec<RunFinal>,
    pub regret: MeanStd,
    pub asst_switches: MeanStd,
    pub item_switches: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub policy: PolicyKind,
    pub n_items: usize,
    pub metric: String,
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub policy: PolicyKind,
    pub n_items: usize,
    pub seed: u64,
    pub horizons: Vec<u64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub rng_algorithm: String,
    pub build_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    pub groups: Vec<GroupSummary>,
    pub fits: Vec<FitSummary>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentResult {
    pub fn group(&self, policy: PolicyKind, n_items: usize, horizon: u64) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.policy == policy && g.n_items == n_items && g.horizon == horizon)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results always serialize");
        s.push('\n');
        s
    }
}

/// Everything one simulated run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: PolicyTrace,
    /// Exact snapshots at the requested checkpoints.
    pub checkpoints: Vec<Snapshot>,
    pub last: Snapshot,
    pub stats: PolicyStats,
}

/// Drives `policy` on a fresh environment until `horizon`.
pub fn run_policy(
    inst: &Instance,
    policy: &mut dyn Policy,
    horizon: u64,
    seed: u64,
    mode: TraceMode,
    checkpoints: Vec<u64>,
) -> Result<RunOutput> {
    let mut env = Environment::new(inst.clone(), Some(horizon), seed);
    let mut rec = Recorder::new(inst, policy.kind(), seed, mode, Some(horizon), checkpoints)?;
    while !env.is_exhausted() {
        let step = policy.step(&mut env)?;
        rec.record_epoch(&step.assortment, &step.outcome);
    }
    let (trace, checkpoints, last) = rec.finish();
    Ok(RunOutput {
        trace,
        checkpoints,
        last,
        stats: policy.stats().clone(),
    })
}

pub fn run_spec(
    inst: &Instance,
    spec: &PolicySpec,
    horizon: u64,
    seed: u64,
    mode: TraceMode,
    checkpoints: Vec<u64>,
) -> Result<RunOutput> {
    let mut policy = spec.build(inst, horizon)?;
    run_policy(inst, policy.as_mut(), horizon, seed, mode, checkpoints)
}

#[derive(Debug, Clone)]
struct RunUnit {
    policy: usize,
    n_items: usize,
    seed_index: usize,
    seed: u64,
    horizons: Vec<u64>,
}

type GroupKey = (usize, usize, u64);

struct UnitResult {
    unit: RunUnit,
    outcome: std::result::Result<Vec<(u64, RunFinal)>, String>,
}

fn plan(cfg: &ExperimentConfig) -> Vec<RunUnit> {
    let seeds = cfg.seeds.seeds();
    let mut units = Vec::new();
    for (p, spec) in cfg.policies.iter().enumerate() {
        for &n in &cfg.item_counts() {
            for (seed_index, &seed) in seeds.iter().enumerate() {
                let horizon_sets: Vec<Vec<u64>> = if spec.name.is_anytime() {
                    vec![cfg.horizons.clone()]
                } else {
                    cfg.horizons.iter().map(|&t| vec![t]).collect()
                };
                for horizons in horizon_sets {
                    units.push(RunUnit {
                        policy: p,
                        n_items: n,
                        seed_index,
                        seed,
                        horizons,
                    });
                }
            }
        }
    }
    units
}

fn trace_path(dir: &Path, policy: PolicyKind, n: usize, horizon: u64, seed: u64) -> PathBuf {
    dir.join("traces")
        .join(format!("{policy}_n{n}_T{horizon}_seed{seed}.csv"))
}

fn execute(cfg: &ExperimentConfig, file_instance: Option<&Instance>, unit: &RunUnit) -> Result<Vec<(u64, RunFinal)>> {
    let spec = &cfg.policies[unit.policy];
    let inst = match (&cfg.instance, file_instance) {
        (_, Some(inst)) => inst.clone(),
        (InstanceSource::Generator(g), None) => g.generate(unit.n_items, unit.seed)?,
        (InstanceSource::File(_), None) => unreachable!("file instances are loaded up front"),
    };
    let horizon = *unit.horizons.last().expect("units carry a horizon");
    let out = run_spec(&inst, spec, horizon, unit.seed, cfg.trace_mode, unit.horizons.clone())?;
    let theta_star = out.trace.header.theta_star;

    if let (Some(dir), true) = (&cfg.output_dir, cfg.trace_mode != TraceMode::Summary) {
        let trace = match &cfg.downsample {
            Some(d) => downsample(&out.trace, &d.grid(horizon))?,
            None => out.trace,
        };
        let path = trace_path(dir, spec.name, inst.n_items(), horizon, unit.seed);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_csv(&trace, std::io::BufWriter::new(file))?;
    }

    let hash = instances::instance_hash(&inst);
    debug_assert_eq!(out.checkpoints.len(), unit.horizons.len());
    Ok(out
        .checkpoints
        .iter()
        .map(|s| {
            (
                s.t,
                RunFinal {
                    seed: unit.seed,
                    instance_hash: hash.clone(),
                    theta_star,
                    cum_regret: s.cum_regret,
                    asst_switches: s.asst_switches,
                    item_switches: s.item_switches,
                },
            )
        })
        .collect())
}

fn worker_count() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            warn!("ignoring {WORKERS_ENV}={raw:?}; expected a positive integer");
            None
        }
    }
}

/// Runs every (policy, n, T, seed) combination. Configuration problems
/// are returned as errors; individual run failures are collected in
/// [`ExperimentResult::failures`] while the rest of the batch continues.
pub fn run_experiment(config: &ExperimentConfig, kind: RunKind) -> Result<ExperimentResult> {
    config.validate(kind)?;
    let cfg = config.normalized();
    let file_instance = match &cfg.instance {
        InstanceSource::File(path) => Some(
            instances::load(path).map_err(|e| Error::config("instance.file", e.to_string()))?,
        ),
        InstanceSource::Generator(_) => None,
    };
    if let Some(dir) = &cfg.output_dir {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
    }

    let units = plan(&cfg);
    info!("running {} units", units.len());
    let work = || -> Vec<UnitResult> {
        units
            .par_iter()
            .map(|unit| UnitResult {
                unit: unit.clone(),
                outcome: execute(&cfg, file_instance.as_ref(), unit).map_err(|e| e.to_string()),
            })
            .collect()
    };
    let results = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(WORKERS_ENV, e.to_string()))?
            .install(work),
        None => work(),
    };

    let n_items_of = |unit: &RunUnit| file_instance.as_ref().map_or(unit.n_items, |i| i.n_items());
    let mut merged: BTreeMap<GroupKey, BTreeMap<usize, RunFinal>> = BTreeMap::new();
    let mut failures = Vec::new();
    for r in results {
        let n = n_items_of(&r.unit);
        match r.outcome {
            Ok(finals) => {
                for (t, fin) in finals {
                    merged
                        .entry((r.unit.policy, n, t))
                        .or_default()
                        .insert(r.unit.seed_index, fin);
                }
            }
            Err(error) => {
                warn!("run failed: {} n={n} seed={}: {error}", cfg.policies[r.unit.policy].name, r.unit.seed);
                failures.push((
                    (r.unit.policy, n, r.unit.seed_index, r.unit.horizons.clone()),
                    RunFailure {
                        policy: cfg.policies[r.unit.policy].name,
                        n_items: n,
                        seed: r.unit.seed,
                        horizons: r.unit.horizons,
                        error,
                    },
                ));
            }
        }
    }
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    let failures: Vec<RunFailure> = failures.into_iter().map(|(_, f)| f).collect();

    let groups: Vec<GroupSummary> = merged
        .into_iter()
        .map(|((p, n, t), by_seed)| {
            let runs: Vec<RunFinal> = by_seed.into_values().collect();
            let col = |f: &dyn Fn(&RunFinal) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
            GroupSummary {
                policy: cfg.policies[p].name,
                n_items: n,
                horizon: t,
                regret: col(&|r| r.cum_regret),
                asst_switches: col(&|r| r.asst_switches as f64),
                item_switches: col(&|r| r.item_switches as f64),
                runs,
            }
        })
        .collect();
    let fits = fit_groups(&groups);

    let config_json = serde_json::to_vec(&cfg)?;
    Ok(ExperimentResult {
        provenance: Provenance {
            config_hash: format!("{:x}", Sha256::digest(&config_json)),
            config: cfg,
            rng_algorithm: RNG_ALGORITHM.to_string(),
            build_id: BUILD_ID.to_string(),
        },
        groups,
        fits,
        failures,
    })
}

/// Scaling fits of the mean finals against `T`, per (policy, n). Needs at
/// least three horizons.
fn fit_groups(groups: &[GroupSummary]) -> Vec<FitSummary> {
    let mut by_key: BTreeMap<(PolicyKind, usize), Vec<&GroupSummary>> = BTreeMap::new();
    for g in groups {
        by_key.entry((g.policy, g.n_items)).or_default().push(g);
    }
    let mut fits = Vec::new();
    for ((policy, n_items), gs) in by_key {
        if gs.len() < 3 {
            continue;
        }
        let metrics: [(&str, fn(&GroupSummary) -> f64); 3] = [
            ("regret", |g| g.regret.mean),
            ("asst_switches", |g| g.asst_switches.mean),
            ("item_switches", |g| g.item_switches.mean),
        ];
        for (metric, value) in metrics {
            let points: Vec<(f64, f64)> = gs.iter().map(|g| (g.horizon as f64, value(g))).collect();
            let (fit, error) = match fit_scaling(&points) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            fits.push(FitSummary {
                policy,
                n_items,
                metric: metric.to_string(),
                fit,
                error,
            });
        }
    }
    fits
}

/// Writes `summary.json` into the configured output directory, if any.
pub fn write_summary(result: &ExperimentResult) -> Result<Option<PathBuf>> {
    let Some(dir) = &result.provenance.config.output_dir else {
        return Ok(None);
    };
    let path = dir.join("summary.json");
    fs::write(&path, result.to_json()).map_err(|e| Error::io(&path, e))?;
    Ok(Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        serde_json::from_str(json).unwrap()
    }

    const BASIC: &str = r#"{
        "instance": {"generator": {"family": "uniform", "n": 5, "k": 2, "seed": 3}},
        "policies": [{"name": "at_ducb"}, {"name": "fh_ducb"}],
        "horizons": [4096, 1024, 2048],
        "seeds": {"base": 10, "count": 3},
        "trace_mode": "summary"
    }"#;

    #[test]
    fn config_defaults_and_normalization() {
        let cfg = config(BASIC);
        assert_eq!(cfg.trace_mode, TraceMode::Summary);
        assert!(cfg.output_dir.is_none());
        let norm = cfg.normalized();
        assert_eq!(norm.horizons, vec![1024, 2048, 4096]);
        assert_eq!(norm.seeds, SeedSpec::List(vec![10, 11, 12]));
        assert_eq!(norm.n_grid, None);
        let round: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&norm).unwrap()).unwrap();
        assert_eq!(round, norm);
    }

    #[test]
    fn config_errors_name_fields() {
        let cases = [
            (r#""horizons": []"#, "horizons"),
            (r#""seeds": []"#, "seeds"),
            (r#""policies": [{"name": "at_ducb", "c1": 2}]"#, "policies[0].c1"),
            (r#""n_grid": [4]"#, "n_grid"),
        ];
        for (patch, field) in cases {
            let mut v: serde_json::Value = serde_json::from_str(BASIC).unwrap();
            let p: serde_json::Value = serde_json::from_str(&format!("{{{patch}}}")).unwrap();
            for (k, val) in p.as_object().unwrap() {
                v[k] = val.clone();
            }
            let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
            match cfg.validate(RunKind::Simulate) {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{patch}: {other:?}"),
            }
        }
        assert!(serde_json::from_str::<ExperimentConfig>(&BASIC.replace("\"seeds\"", "\"seedz\"")).is_err());
    }

    #[test]
    fn summary_groups_and_counts() {
        let result = run_experiment(&config(BASIC), RunKind::Simulate).unwrap();
        assert!(result.failures.is_empty());
        assert_eq!(result.groups.len(), 6);
        for g in &result.groups {
            assert_eq!(g.runs.len(), 3);
            assert_eq!(g.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
        }
        assert_eq!(result.fits.len(), 6);
        assert_eq!(result.provenance.config_hash.len(), 64);
    }

    #[test]
    fn anytime_checkpoint_equals_standalone_run() {
        let result = run_experiment(&config(BASIC), RunKind::Simulate).unwrap();
        let inst = instances::gen_uniform_random(5, 2, 3).unwrap();
        let spec = PolicySpec::new(PolicyKind::AtDucb);
        let solo = run_spec(&inst, &spec, 1024, 11, TraceMode::Summary, vec![]).unwrap();
        let group = result.group(PolicyKind::AtDucb, 5, 1024).unwrap();
        let run = &group.runs[1];
        assert_eq!(run.cum_regret, solo.last.cum_regret);
        assert_eq!(run.asst_switches, solo.last.asst_switches);
        assert_eq!(run.item_switches, solo.last.item_switches);
    }

    #[test]
    fn per_run_seeds_give_distinct_instances() {
        let cfg = config(&BASIC.replace(r#", "seed": 3"#, ""));
        let result = run_experiment(&cfg, RunKind::Simulate).unwrap();
        let g = result.group(PolicyKind::FhDucb, 5, 1024).unwrap();
        let hashes: HashSet<_> = g.runs.iter().map(|r| &r.instance_hash).collect();
        assert_eq!(hashes.len(), 3);
        let other = result.group(PolicyKind::AtDucb, 5, 1024).unwrap();
        for (a, b) in g.runs.iter().zip(&other.runs) {
            assert_eq!(a.instance_hash, b.instance_hash);
        }
    }

    #[test]
    fn sweep_over_item_counts() {
        let cfg = config(
            r#"{
            "instance": {"generator": {"family": "lb_base", "n": 2}},
            "policies": [{"name": "baseline_ucb"}],
            "horizons": [500],
            "seeds": [1],
            "n_grid": [2, 4, 8],
            "trace_mode": "summary"
        }"#,
        );
        assert!(cfg.validate(RunKind::Simulate).is_err());
        let result = run_experiment(&cfg, RunKind::Sweep).unwrap();
        let ns: Vec<usize> = result.groups.iter().map(|g| g.n_items).collect();
        assert_eq!(ns, vec![2, 4, 8]);
        for g in &result.groups {
            assert!((g.runs[0].theta_star - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn run_failures_are_isolated() {
        // ESUCB's default δ = 1/T is invalid at T = 1, so only those runs fail
        let cfg = config(
            r#"{
            "instance": {"generator": {"family": "uniform", "n": 3, "k": 1, "seed": 0}},
            "policies": [{"name": "at_ducb"}, {"name": "esucb"}],
            "horizons": [1, 64],
            "seeds": [1, 2],
            "trace_mode": "summary"
        }"#,
        );
        let result = run_experiment(&cfg, RunKind::Simulate).unwrap();
        assert_eq!(result.failures.len(), 2);
        assert!(result.failures.iter().all(|f| f.policy == PolicyKind::Esucb && f.horizons == [1]));
        assert!(result.failures[0].error.contains("delta"));
        assert_eq!(result.groups.len(), 3);
        assert!(result.group(PolicyKind::Esucb, 3, 64).is_some());
    }

    #[test]
    fn instance_seed_mixes() {
        assert_ne!(instance_seed(0), 0);
        assert_ne!(instance_seed(1), instance_seed(2));
    }
}
