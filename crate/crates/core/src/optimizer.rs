//! Exact capacitated assortment optimization.
//!
//! The optimal revenue `θ*` is the unique fixed point of
//! `G(θ) = R(S_θ, w)`, where `S_θ` maximizes the linear score
//! `Σ_{i∈S} w_i (r_i − θ)` over `|S| ≤ K`. `G(θ) > θ` below the fixed point
//! and `G(θ) < θ` above it, so a bisection on that sign recovers `θ*`.
//!
//! Every argmax breaks ties toward the set with the smallest `Σ_{i∈S} 2^i`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{revenue, Assortment, Instance};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const MAX_BISECTION_STEPS: u32 = 200;
/// Revenue values closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Largest item count the enumeration oracles accept.
pub const MAX_ENUMERATION_ITEMS: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub theta_star: f64,
    pub optimal_set: Assortment,
    pub iterations: u32,
    pub residual: f64,
}

/// Order used among items with equal linear score.
///
/// Only [`TieBreak::LowestIndex`] yields the `Σ 2^i`-minimal maximizer;
/// `HighestIndex` exists as a negative control for the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    LowestIndex,
    HighestIndex,
}

/// `argmax_{|S|≤K} Σ_{i∈S} w_i (r_i − θ)` with the `Σ 2^i` tie-break.
pub fn static_linear_argmax(weights: &[f64], rewards: &[f64], theta: f64, capacity: usize) -> Assortment {
    linear_argmax_with(weights, rewards, theta, capacity, TieBreak::LowestIndex)
}

pub fn linear_argmax_with(
    weights: &[f64],
    rewards: &[f64],
    theta: f64,
    capacity: usize,
    tie: TieBreak,
) -> Assortment {
    debug_assert_eq!(weights.len(), rewards.len());
    let scores: Vec<f64> = weights
        .iter()
        .zip(rewards)
        .map(|(&w, &r)| w * (r - theta))
        .collect();
    // Zero-score items would keep the value but raise Σ 2^i.
    let mut positive: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] > TIE_TOLERANCE).collect();
    positive.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    if positive.len() > capacity {
        // Scores within the tolerance of the cutoff compete on index alone.
        let cutoff = scores[positive[capacity - 1]];
        let (mut keep, mut tied): (Vec<usize>, Vec<usize>) = positive
            .into_iter()
            .filter(|&i| scores[i] >= cutoff - TIE_TOLERANCE)
            .partition(|&i| scores[i] > cutoff + TIE_TOLERANCE);
        match tie {
            TieBreak::LowestIndex => tied.sort_unstable(),
            TieBreak::HighestIndex => tied.sort_unstable_by(|a, b| b.cmp(a)),
        }
        let room = capacity - keep.len();
        keep.extend(tied.into_iter().take(room));
        positive = keep;
    }
    Assortment::from_indices(positive)
}

fn linear_score(weights: &[f64], rewards: &[f64], theta: f64, s: &Assortment) -> f64 {
    s.items().iter().map(|&i| weights[i] * (rewards[i] - theta)).sum()
}

/// `G(θ) = R(S_θ, w)`; zero when `S_θ` is empty.
pub fn g_value(weights: &[f64], rewards: &[f64], capacity: usize, theta: f64) -> f64 {
    let s = static_linear_argmax(weights, rewards, theta, capacity);
    revenue(rewards, weights, s.items())
}

/// Same as [`g_value`] with the instance's own weights.
pub fn g_value_for(inst: &Instance, theta: f64) -> f64 {
    g_value(inst.weights(), inst.rewards(), inst.capacity(), theta)
}

fn override_or_own<'a>(inst: &'a Instance, weights: Option<&'a [f64]>) -> Result<&'a [f64]> {
    match weights {
        None => Ok(inst.weights()),
        Some(w) if w.len() != inst.n_items() => Err(Error::param(
            "weights_override",
            format!("expected {} entries, got {}", inst.n_items(), w.len()),
        )),
        Some(w) if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) => Err(Error::param(
            "weights_override",
            "entries must be finite and nonnegative",
        )),
        Some(w) => Ok(w),
    }
}

/// Computes `θ* = max_{|S|≤K} R(S, w)` and its maximizer by bisection on
/// the sign of `Σ_{i∈S_θ} w_i (r_i − θ) − θ` over `[0, max r_i]`.
pub fn solve_theta_star(
    inst: &Instance,
    weights_override: Option<&[f64]>,
    tolerance: f64,
) -> Result<FixedPointResult> {
    if !(tolerance > 0.0) {
        return Err(Error::param("tolerance", format!("must be positive, got {tolerance}")));
    }
    let weights = override_or_own(inst, weights_override)?;
    Ok(solve_unchecked(weights, inst.rewards(), inst.capacity(), tolerance, TieBreak::LowestIndex))
}

pub(crate) fn solve_unchecked(
    weights: &[f64],
    rewards: &[f64],
    capacity: usize,
    tolerance: f64,
    tie: TieBreak,
) -> FixedPointResult {
    let mut lo = 0.0;
    let mut hi = rewards.iter().copied().fold(0.0, f64::max);
    let mut iterations = 0;
    while hi - lo > tolerance && iterations < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let s = linear_argmax_with(weights, rewards, mid, capacity, tie);
        if linear_score(weights, rewards, mid, &s) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    // Re-solving at the exact revenue of the bracketed set keeps items with
    // r_i ≈ θ* out, since they tie at zero score.
    let bracketed = linear_argmax_with(weights, rewards, 0.5 * (lo + hi), capacity, tie);
    let theta = revenue(rewards, weights, bracketed.items());
    let optimal_set = linear_argmax_with(weights, rewards, theta, capacity, tie);
    if optimal_set.is_empty() {
        return FixedPointResult {
            theta_star: 0.0,
            optimal_set,
            iterations,
            residual: 0.0,
        };
    }
    let theta = revenue(rewards, weights, optimal_set.items());
    let g = g_value(weights, rewards, capacity, theta);
    FixedPointResult {
        theta_star: theta,
        optimal_set,
        iterations,
        residual: (g - theta).abs(),
    }
}

/// The revenue-maximizing set under `weights`, as the policies use it.
pub(crate) fn best_assortment(weights: &[f64], rewards: &[f64], capacity: usize) -> Assortment {
    solve_unchecked(weights, rewards, capacity, DEFAULT_TOLERANCE, TieBreak::LowestIndex).optimal_set
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_ITEMS {
        return Err(Error::EnumerationRefused {
            n_items: n,
            limit: MAX_ENUMERATION_ITEMS,
        });
    }
    Ok(())
}

/// Subsets of `0..n` with at most `k` elements, as bitmasks in increasing
/// numeric order (which is increasing `Σ 2^i`).
fn subsets(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..(1u32 << n)).filter(move |m| m.count_ones() as usize <= k)
}

fn mask_to_set(mask: u32) -> Assortment {
    Assortment::from_indices((0..32).filter(|i| mask & (1 << i) != 0))
}

fn mask_items(mask: u32, buf: &mut Vec<usize>) {
    buf.clear();
    buf.extend((0..32usize).filter(|i| mask & (1 << i) != 0));
}

/// Maximizes `score` over all subsets; among values within
/// [`TIE_TOLERANCE`] of the maximum, returns the smallest bitmask.
fn enumerate_best(n: usize, k: usize, mut score: impl FnMut(&[usize]) -> f64) -> (u32, f64, u32) {
    let mut buf = Vec::with_capacity(n);
    let mut best = f64::NEG_INFINITY;
    let mut count = 0u32;
    for m in subsets(n, k) {
        mask_items(m, &mut buf);
        best = best.max(score(&buf));
        count += 1;
    }
    for m in subsets(n, k) {
        mask_items(m, &mut buf);
        let v = score(&buf);
        if v >= best - TIE_TOLERANCE {
            return (m, v, count);
        }
    }
    unreachable!("the empty set is always enumerated")
}

/// Exhaustive `max_{|S|≤K} R(S, w)`; the verification oracle for
/// [`solve_theta_star`].
pub fn brute_force_optimum(inst: &Instance, weights_override: Option<&[f64]>) -> Result<FixedPointResult> {
    check_enumerable(inst.n_items())?;
    let weights = override_or_own(inst, weights_override)?;
    let rewards = inst.rewards();
    let (mask, value, count) =
        enumerate_best(inst.n_items(), inst.capacity(), |items| revenue(rewards, weights, items));
    let g = g_value(weights, rewards, inst.capacity(), value);
    Ok(FixedPointResult {
        theta_star: value,
        optimal_set: mask_to_set(mask),
        iterations: count,
        residual: (g - value).abs(),
    })
}

/// Exhaustive counterpart of [`static_linear_argmax`].
pub fn brute_force_linear_argmax(
    weights: &[f64],
    rewards: &[f64],
    theta: f64,
    capacity: usize,
) -> Result<Assortment> {
    check_enumerable(weights.len())?;
    let (mask, _, _) = enumerate_best(weights.len(), capacity, |items| {
        items.iter().map(|&i| weights[i] * (rewards[i] - theta)).sum()
    });
    Ok(mask_to_set(mask))
}

/// Compares two fixed-point results the way the oracle suites do: values
/// within `value_tol`, sets exactly.
pub fn results_agree(a: &FixedPointResult, b: &FixedPointResult, value_tol: f64) -> bool {
    (a.theta_star - b.theta_star).abs() <= value_tol
        && a.optimal_set.cmp_power_sum(&b.optimal_set) == Ordering::Equal
}
