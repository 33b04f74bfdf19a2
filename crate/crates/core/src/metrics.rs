//! Regret and switching-cost accounting.
//!
//! Regret is the pseudo-regret `Σ_t (θ* − R(S_t, v))`, computed from true
//! weights. Realized rewards are kept in the trace for reference only.
//!
//! Inside one epoch the offered set is constant, so cumulative regret at
//! step `k` of an epoch is `closed + k·gap`, where `closed` sums
//! `epoch_length·gap` over finished epochs. Every row, checkpoint and final
//! uses that same expression, which keeps step-level and epoch-level
//! accounting bit-for-bit identical.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::environment::EpochOutcome;
use crate::error::{Error, Result};
use crate::model::{revenue, switch_deltas, Assortment, Instance};
use crate::optimizer::{solve_theta_star, DEFAULT_TOLERANCE};
use crate::policies::PolicyKind;

/// Above this horizon a full per-step trace falls back to epoch rows.
pub const FULL_TRACE_LIMIT: u64 = 1_000_000;

pub const CSV_HEADER: [&str; 8] = [
    "t",
    "policy",
    "seed",
    "cum_regret",
    "asst_switches",
    "item_switches",
    "choice",
    "reward",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// One row per time step.
    Full,
    /// One row at the last step of every epoch.
    #[default]
    Epoch,
    /// Checkpoints and finals only.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceHeader {
    pub instance_hash: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub theta_star: f64,
    pub optimal_set: Assortment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    /// Index into [`PolicyTrace::assortments`].
    pub assortment: u32,
    /// `None` is the no-purchase option.
    pub choice: Option<usize>,
    pub reward: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub asst_switches: u64,
    pub item_switches: u64,
    /// Row synthesized by [`downsample`] from an earlier step; its choice
    /// and reward describe that earlier step.
    pub carried: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyTrace {
    pub header: TraceHeader,
    pub assortments: Vec<Assortment>,
    pub rows: Vec<TraceRow>,
}

/// Cumulative metrics at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: u64,
    pub cum_regret: f64,
    pub asst_switches: u64,
    pub item_switches: u64,
}

/// Builds a trace for one run, one epoch at a time.
#[derive(Debug, Clone)]
pub struct Recorder {
    mode: TraceMode,
    rewards: Vec<f64>,
    weights: Vec<f64>,
    theta_star: f64,
    trace: PolicyTrace,
    prev: Option<(Assortment, u32)>,
    closed: f64,
    t: u64,
    asst: u64,
    item: u64,
    checkpoints: Vec<u64>,
    next_checkpoint: usize,
    snapshots: Vec<Snapshot>,
}

impl Recorder {
    /// `checkpoints` are the steps at which exact snapshots are kept; the
    /// final step of the run is always snapshotted by [`Recorder::finish`].
    pub fn new(
        inst: &Instance,
        policy: PolicyKind,
        seed: u64,
        mode: TraceMode,
        horizon: Option<u64>,
        mut checkpoints: Vec<u64>,
    ) -> Result<Self> {
        let opt = solve_theta_star(inst, None, DEFAULT_TOLERANCE)?;
        let theta_star = revenue(inst.rewards(), inst.weights(), opt.optimal_set.items());
        let mode = match (mode, horizon) {
            (TraceMode::Full, Some(h)) if h > FULL_TRACE_LIMIT => {
                warn!("full trace requested for T = {h} > {FULL_TRACE_LIMIT}; recording epoch rows instead");
                TraceMode::Epoch
            }
            (TraceMode::Full, None) => {
                warn!("full trace requested without a horizon; recording epoch rows instead");
                TraceMode::Epoch
            }
            (m, _) => m,
        };
        checkpoints.sort_unstable();
        checkpoints.dedup();
        Ok(Self {
            mode,
            rewards: inst.rewards().to_vec(),
            weights: inst.weights().to_vec(),
            theta_star,
            trace: PolicyTrace {
                header: TraceHeader {
                    instance_hash: crate::instances::instance_hash(inst),
                    policy,
                    seed,
                    theta_star,
                    optimal_set: opt.optimal_set,
                },
                assortments: Vec::new(),
                rows: Vec::new(),
            },
            prev: None,
            closed: 0.0,
            t: 0,
            asst: 0,
            item: 0,
            checkpoints,
            next_checkpoint: 0,
            snapshots: Vec::new(),
        })
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }

    /// Per-step pseudo-regret of offering `s`. Clamped at zero so that
    /// rounding in `R` can never make cumulative regret decrease.
    pub fn gap(&self, s: &Assortment) -> f64 {
        (self.theta_star - revenue(&self.rewards, &self.weights, s.items())).max(0.0)
    }

    fn intern(&mut self, s: &Assortment) -> u32 {
        match &self.prev {
            Some((p, id)) if p == s => *id,
            _ => {
                if let Some(pos) = self.trace.assortments.iter().position(|a| a == s) {
                    pos as u32
                } else {
                    self.trace.assortments.push(s.clone());
                    (self.trace.assortments.len() - 1) as u32
                }
            }
        }
    }

    /// Records every step of one epoch that offered `s`.
    pub fn record_epoch(&mut self, s: &Assortment, outcome: &EpochOutcome) {
        debug_assert_eq!(outcome.start_t, self.t);
        let id = self.intern(s);
        if let Some((prev, _)) = &self.prev {
            let d = switch_deltas(prev, s);
            self.asst += d.assortment;
            self.item += d.items;
        }
        let gap = self.gap(s);
        let start = self.t;
        let len = outcome.epoch_length;
        let row = |k: u64| TraceRow {
            t: start + k,
            assortment: id,
            choice: outcome.choices[k as usize - 1],
            reward: outcome.choices[k as usize - 1].map_or(0.0, |i| self.rewards[i]),
            regret: gap,
            cum_regret: self.closed + k as f64 * gap,
            asst_switches: self.asst,
            item_switches: self.item,
            carried: false,
        };
        let mut rows = Vec::new();
        match self.mode {
            TraceMode::Full => rows.extend((1..=len).map(row)),
            TraceMode::Epoch => rows.push(row(len)),
            TraceMode::Summary => {}
        }
        while let Some(&c) = self.checkpoints.get(self.next_checkpoint) {
            if c > start + len {
                break;
            }
            if c > start {
                let k = c - start;
                self.snapshots.push(Snapshot {
                    t: c,
                    cum_regret: self.closed + k as f64 * gap,
                    asst_switches: self.asst,
                    item_switches: self.item,
                });
            }
            self.next_checkpoint += 1;
        }
        self.trace.rows.extend(rows);
        self.closed += len as f64 * gap;
        self.t += len;
        self.prev = Some((s.clone(), id));
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: self.t,
            cum_regret: self.closed,
            asst_switches: self.asst,
            item_switches: self.item,
        }
    }

    /// Checkpoint snapshots reached so far, in time order.
    pub fn checkpoints(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn finish(self) -> (PolicyTrace, Vec<Snapshot>, Snapshot) {
        let last = self.snapshot();
        (self.trace, self.snapshots, last)
    }
}

/// Checks the cumulative columns and the `Ψ^asst ≤ Ψ^item ≤ min(2K,N)·Ψ^asst`
/// relation row by row. Returns the first offending row index.
pub fn check_trace(trace: &PolicyTrace, max_item_switch: u64) -> std::result::Result<(), usize> {
    let mut last: Option<&TraceRow> = None;
    for (idx, row) in trace.rows.iter().enumerate() {
        let relation = row.asst_switches <= row.item_switches
            && row.item_switches <= max_item_switch * row.asst_switches;
        let monotone = last.is_none_or(|p| {
            p.t < row.t
                && p.cum_regret <= row.cum_regret
                && p.asst_switches <= row.asst_switches
                && p.item_switches <= row.item_switches
        });
        if !(relation && monotone) {
            return Err(idx);
        }
        last = Some(row);
    }
    Ok(())
}

/// Rows at the grid times, each carrying forward the latest row at or
/// before it. Grid points past the last row are dropped with a warning.
pub fn downsample(trace: &PolicyTrace, grid: &[u64]) -> Result<PolicyTrace> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    let end = trace.rows.last().map_or(0, |r| r.t);
    let mut rows = Vec::with_capacity(grid.len());
    let mut idx = 0;
    let mut dropped = 0;
    for &g in grid {
        if g > end {
            dropped += 1;
            continue;
        }
        while idx + 1 < trace.rows.len() && trace.rows[idx + 1].t <= g {
            idx += 1;
        }
        let src = &trace.rows[idx];
        if src.t > g {
            continue;
        }
        rows.push(TraceRow {
            t: g,
            carried: src.carried || src.t != g,
            ..src.clone()
        });
    }
    if dropped > 0 {
        warn!("downsample: {dropped} grid points beyond t = {end} were dropped");
    }
    Ok(PolicyTrace {
        header: trace.header.clone(),
        assortments: trace.assortments.clone(),
        rows,
    })
}

/// `{1, 2, 4, ..., 2^k}` up to and including `horizon` when it is a power of two.
pub fn geometric_grid(horizon: u64) -> Vec<u64> {
    std::iter::successors(Some(1u64), |&g| g.checked_mul(2))
        .take_while(|&g| g <= horizon)
        .collect()
}

#[derive(Serialize)]
struct CsvRow<'a> {
    t: u64,
    policy: &'a str,
    seed: u64,
    cum_regret: f64,
    asst_switches: u64,
    item_switches: u64,
    choice: Option<usize>,
    reward: Option<f64>,
}

/// Writes `t,policy,seed,cum_regret,asst_switches,item_switches,choice,reward`.
/// `choice` is one-based with `0` for no purchase; carried rows leave
/// `choice` and `reward` empty.
pub fn write_csv<W: Write>(trace: &PolicyTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let policy = trace.header.policy.as_str();
    for row in &trace.rows {
        w.serialize(CsvRow {
            t: row.t,
            policy,
            seed: trace.header.seed,
            cum_regret: row.cum_regret,
            asst_switches: row.asst_switches,
            item_switches: row.item_switches,
            choice: (!row.carried).then(|| row.choice.map_or(0, |i| i + 1)),
            reward: (!row.carried).then_some(row.reward),
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    Log,
    Loglog,
    Sqrt,
    Linear,
}

impl ScalingModel {
    pub const ALL: [ScalingModel; 4] = [
        ScalingModel::Log,
        ScalingModel::Loglog,
        ScalingModel::Sqrt,
        ScalingModel::Linear,
    ];

    pub fn regressor(self, t: f64) -> f64 {
        match self {
            ScalingModel::Log => t.log2(),
            ScalingModel::Loglog => t.log2().log2(),
            ScalingModel::Sqrt => t.sqrt(),
            ScalingModel::Linear => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: ScalingModel,
    pub coefficient: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub best: ModelFit,
    /// Every candidate, in [`ScalingModel::ALL`] order.
    pub candidates: Vec<ModelFit>,
}

impl ScalingFit {
    pub fn candidate(&self, model: ScalingModel) -> &ModelFit {
        self.candidates
            .iter()
            .find(|f| f.model == model)
            .expect("every model is fitted")
    }
}

/// Least-squares fit of `value ≈ a + c·x(T)` for each candidate regressor
/// `x`; the best model has the largest `r²`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::DegenerateFit("horizons must be strictly increasing".into()));
    }
    if points[0].0 <= 2.0 {
        return Err(Error::DegenerateFit("horizons must exceed 2 for the loglog regressor".into()));
    }
    if points.iter().any(|&(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateFit("non-finite point".into()));
    }
    let n = points.len() as f64;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let syy: f64 = points.iter().map(|p| (p.1 - ybar).powi(2)).sum();
    if syy <= f64::EPSILON * ybar.abs().max(1.0) {
        return Err(Error::DegenerateFit("values are constant".into()));
    }
    let candidates: Vec<ModelFit> = ScalingModel::ALL
        .iter()
        .map(|&model| {
            let xs: Vec<f64> = points.iter().map(|p| model.regressor(p.0)).collect();
            let xbar = xs.iter().sum::<f64>() / n;
            let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
            let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - xbar) * (p.1 - ybar)).sum();
            let coefficient = sxy / sxx;
            let intercept = ybar - coefficient * xbar;
            let sse: f64 = xs
                .iter()
                .zip(points)
                .map(|(x, p)| (p.1 - intercept - coefficient * x).powi(2))
                .sum();
            ModelFit {
                model,
                coefficient,
                intercept,
                r_squared: 1.0 - sse / syy,
            }
        })
        .collect();
    let best = *candidates
        .iter()
        .max_by(|a, b| a.r_squared.total_cmp(&b.r_squared))
        .expect("four candidates");
    Ok(ScalingFit { best, candidates })
}

/// Mean and sample standard deviation (zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}
