//! Release-gate self checks, runnable from the CLI.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::environment::{seeded_rng, Environment};
use crate::instances::{gen_lowerbound_base, gen_uniform_random};
use crate::metrics::{check_trace, TraceMode};
use crate::model::{Assortment, Instance};
use crate::optimizer::{
    brute_force_linear_argmax, brute_force_optimum, g_value_for, linear_argmax_with, results_agree, solve_unchecked,
    TieBreak, DEFAULT_TOLERANCE,
};
use crate::policies::{PolicyKind, PolicySpec};

use super::run_spec;

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Negative control: run the optimizer with the wrong tie-break so the
    /// oracle suite must fail.
    pub corrupt_tie_break: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: u64,
    pub failures: u64,
    pub detail: String,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

pub fn run_verify(opts: &VerifyOptions) -> VerifyReport {
    let suites = vec![
        timed("optimizer_oracle", || optimizer_oracle(opts)),
        timed("fixed_point_sign", || fixed_point_sign(opts.seed)),
        timed("geometric_estimator", || geometric_estimator(opts.seed)),
        timed("switch_relation", || switch_relation(opts.seed)),
    ];
    VerifyReport { suites }
}

fn timed(name: &'static str, f: impl FnOnce() -> (u64, u64, String)) -> SuiteReport {
    let start = Instant::now();
    let (checks, failures, detail) = f();
    SuiteReport {
        name,
        checks,
        failures,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn draw(rng: &mut impl Rng, coarse: bool) -> f64 {
    if coarse {
        f64::from(rng.random_range(0..=4u8)) / 4.0
    } else {
        rng.random::<f64>()
    }
}

/// Odd indices draw from a coarse grid so that ties occur.
fn oracle_instance(rng: &mut impl Rng, idx: usize) -> Instance {
    let coarse = idx % 2 == 1;
    let n = rng.random_range(1..=10);
    let k = rng.random_range(1..=n);
    let r = (0..n).map(|_| draw(rng, coarse)).collect();
    let v = (0..n).map(|_| draw(rng, coarse)).collect();
    Instance::new(n, k, r, v).expect("generated within bounds")
}

fn optimizer_oracle(opts: &VerifyOptions) -> (u64, u64, String) {
    let tie = if opts.corrupt_tie_break {
        TieBreak::HighestIndex
    } else {
        TieBreak::LowestIndex
    };
    let mut rng = seeded_rng(opts.seed ^ 0x0AC1E);
    let mut failures = 0;
    let mut first = String::new();
    for idx in 0..1000 {
        let inst = oracle_instance(&mut rng, idx);
        let fast = solve_unchecked(inst.weights(), inst.rewards(), inst.capacity(), DEFAULT_TOLERANCE, tie);
        let slow = brute_force_optimum(&inst, None).expect("n <= 10");
        if !results_agree(&fast, &slow, 1e-9) {
            failures += 1;
            if first.is_empty() {
                first = format!("theta*: {} vs oracle {} on {inst:?}", fast.optimal_set, slow.optimal_set);
            }
        }
    }
    for idx in 0..1000 {
        let inst = oracle_instance(&mut rng, idx);
        let theta = draw(&mut rng, idx % 2 == 1);
        let fast = linear_argmax_with(inst.weights(), inst.rewards(), theta, inst.capacity(), tie);
        let slow = brute_force_linear_argmax(inst.weights(), inst.rewards(), theta, inst.capacity()).expect("n <= 10");
        if fast != slow {
            failures += 1;
            if first.is_empty() {
                first = format!("argmax at theta = {theta}: {fast} vs oracle {slow}");
            }
        }
    }
    let detail = if failures == 0 {
        "1000 optimum and 1000 argmax probes match enumeration".to_string()
    } else {
        format!("first mismatch: {first}")
    };
    (2000, failures, detail)
}

fn fixed_point_sign(seed: u64) -> (u64, u64, String) {
    let mut rng = seeded_rng(seed ^ 0x5167);
    let (mut checks, mut failures) = (0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let inst = gen_uniform_random(n, rng.random_range(1..=n), rng.random()).expect("valid bounds");
        let opt = solve_unchecked(inst.weights(), inst.rewards(), inst.capacity(), DEFAULT_TOLERANCE, TieBreak::LowestIndex);
        let theta = opt.theta_star;
        let residual = (g_value_for(&inst, theta) - theta).abs();
        worst = worst.max(residual);
        checks += 1;
        failures += u64::from(residual > 1e-9);
        for _ in 0..100 {
            let below = rng.random::<f64>() * (theta - 1e-6);
            if below >= 0.0 {
                checks += 1;
                failures += u64::from(g_value_for(&inst, below) <= below);
            }
            let above = theta + 1e-6 + rng.random::<f64>() * (1.0 - theta);
            checks += 1;
            failures += u64::from(g_value_for(&inst, above) >= above);
        }
    }
    (checks, failures, format!("max |G(theta*) - theta*| = {worst:.3e}"))
}

fn geometric_estimator(seed: u64) -> (u64, u64, String) {
    let (mut checks, mut failures) = (0, 0);
    let v = 0.5;
    let inst = Instance::new(1, 1, vec![1.0], vec![v]).expect("valid");
    let s = Assortment::from_indices([0]);
    let mut env = Environment::new(inst, None, seed ^ 0x6E0);
    let epochs = 100_000;
    let bins = 9;
    let mut hist = vec![0u64; bins];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..epochs {
        let d = env.run_epoch(&s).expect("no horizon").purchases[0];
        hist[(d as usize).min(bins - 1)] += 1;
        sum += d as f64;
        sum_sq += (d * d) as f64;
    }
    let n = epochs as f64;
    let mean = sum / n;
    let se = ((sum_sq / n - mean * mean) / n).sqrt();
    checks += 1;
    failures += u64::from((mean - v).abs() > 3.0 * se);

    let q = v / (1.0 + v);
    let chi2: f64 = (0..bins)
        .map(|m| {
            let p = if m + 1 < bins {
                q.powi(m as i32) * (1.0 - q)
            } else {
                q.powi(m as i32)
            };
            let expected = p * n;
            (hist[m] as f64 - expected).powi(2) / expected
        })
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64).expect("positive dof").inverse_cdf(0.99);
    checks += 1;
    failures += u64::from(chi2 > critical);

    let base = gen_lowerbound_base(4).expect("n >= 2");
    let mut rng = seeded_rng(seed ^ 0xBA5E);
    let draws = 100_000;
    let s = Assortment::from_indices([2]);
    let hits = (0..draws)
        .filter(|_| crate::environment::sample_choice(&base, &s, &mut rng) == Some(2))
        .count();
    let freq = hits as f64 / draws as f64;
    checks += 1;
    failures += u64::from((freq - 1.0 / 3.0).abs() > 0.01);

    (
        checks,
        failures,
        format!("mean {mean:.4} (se {se:.4}), chi2 {chi2:.2} vs {critical:.2}, purchase freq {freq:.4}"),
    )
}

fn switch_relation(seed: u64) -> (u64, u64, String) {
    let (mut checks, mut failures) = (0, 0);
    let horizon = 20_000;
    for (idx, (n, k)) in [(4, 1), (6, 3), (8, 8), (10, 4)].into_iter().enumerate() {
        let inst = gen_uniform_random(n, k, seed.wrapping_add(idx as u64)).expect("valid bounds");
        for kind in PolicyKind::ALL {
            let mut spec = PolicySpec::new(kind);
            if matches!(kind, PolicyKind::Esucb | PolicyKind::EsucbNoreset) {
                spec.first_check_fraction = Some(0.1);
            }
            let out = run_spec(&inst, &spec, horizon, seed, TraceMode::Full, vec![]).expect("valid run");
            checks += 1;
            failures += u64::from(check_trace(&out.trace, inst.max_item_switch()).is_err());
        }
    }
    (checks, failures, format!("{checks} full traces checked row by row"))
}
