//! Instance generators and JSON persistence.
//!
//! Besides i.i.d. uniform instances, two families reproduce the hard
//! instances behind the regret lower bound: every item has weight 1/2 and
//! reward 1 with capacity 1, and the perturbed family lifts one item by
//! `Δ = (1/16)·√(N/(24·T₁))`.

use std::fs;
use std::path::Path;

use log::warn;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::environment::seeded_rng;
use crate::error::{Error, Result};
use crate::model::Instance;

pub const LOWER_BOUND_WEIGHT: f64 = 0.5;

/// `r_i, v_i ~ U[0, 1]` i.i.d.
pub fn gen_uniform_random(n: usize, k: usize, seed: u64) -> Result<Instance> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::param("k", format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut rng = seeded_rng(seed);
    let rewards: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    Instance::new(n, k, rewards, weights)
}

pub fn gen_lowerbound_base(n: usize) -> Result<Instance> {
    gen_lowerbound_base_with_capacity(n, 1)
}

/// The base family with a capacity other than 1. The lower-bound argument
/// only covers `K = 1`.
pub fn gen_lowerbound_base_with_capacity(n: usize, k: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::param("n", format!("lower-bound instances need n >= 2, got {n}")));
    }
    Instance::new(n, k, vec![1.0; n], vec![LOWER_BOUND_WEIGHT; n])
}

/// `Δ = (1/16)·√(n/(24·t1))`.
pub fn lowerbound_perturbation(n: usize, t1: u64) -> f64 {
    (n as f64 / (24.0 * t1 as f64)).sqrt() / 16.0
}

/// Base instance with item `k_item` (one-based) raised to `1/2 + Δ`,
/// clamped to 1.
pub fn gen_lowerbound_perturbed(n: usize, k_item: usize, t1: u64) -> Result<Instance> {
    gen_lowerbound_perturbed_with_capacity(n, k_item, t1, 1)
}

pub fn gen_lowerbound_perturbed_with_capacity(n: usize, k_item: usize, t1: u64, k: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::param("n", format!("lower-bound instances need n >= 2, got {n}")));
    }
    if k_item == 0 || k_item > n {
        return Err(Error::param("k_item", format!("must lie in [1, {n}], got {k_item}")));
    }
    if t1 == 0 {
        return Err(Error::param("t1", "must be positive"));
    }
    let mut weights = vec![LOWER_BOUND_WEIGHT; n];
    let lifted = LOWER_BOUND_WEIGHT + lowerbound_perturbation(n, t1);
    if lifted > 1.0 {
        warn!("perturbed weight {lifted} exceeds 1 (n = {n}, t1 = {t1}); clamping to 1");
    }
    weights[k_item - 1] = lifted.min(1.0);
    Instance::new(n, k, vec![1.0; n], weights)
}

/// Hex SHA-256 of the instance's canonical JSON.
pub fn instance_hash(inst: &Instance) -> String {
    let json = serde_json::to_vec(inst).expect("instances always serialize");
    format!("{:x}", Sha256::digest(json))
}

pub fn to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instances always serialize")
}

/// Strict parse: unknown or missing fields and invariant violations are
/// errors that carry the line and column.
pub fn from_json(text: &str) -> std::result::Result<Instance, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = to_json(inst);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
