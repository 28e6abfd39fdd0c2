//! Exponential decay of a layered tree of identical noisy rank-N tensors.
//!
//! Every node in layer `l` holds the same hardware-efficient unitary `U_l` on
//! `N` qubits with a one-qubit index register (`τ = 1`). The leaf observable is
//! `Z^{⊗N}` on every leaf, so the contracted operator of each node only depends
//! on its layer and a layer of `N^{l−1}` identical nodes hands `M̃_l^{⊗N}` to
//! its parents. Only `N`-qubit operators are ever materialized.

use std::collections::BTreeSet;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Entangler, Rotation};
use crate::channels::Channel;
use crate::contraction::{contract_classical, type1_matrix};
use crate::error::{Error, Result};
use crate::linalg::{basis_state, tensor_power, DenseOperator, Pauli};
use crate::tolerance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    /// Qubits per tensor and branching factor.
    pub n: usize,
    /// Number of layers including the root.
    pub layers: usize,
    /// Ansatz depth.
    pub depth: usize,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_angle_range")]
    pub angle_range: f64,
    /// Set from the experiment seed when run from a configuration file.
    #[serde(skip)]
    pub seed: u64,
    /// Layers (1 = root) built from noiseless classical tensors.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub classical_layers: BTreeSet<usize>,
    #[serde(default = "default_budget")]
    pub memory_budget_bytes: u64,
}

fn default_angle_range() -> f64 {
    std::f64::consts::PI / 1000.0
}

fn default_budget() -> u64 {
    1 << 30
}

impl DecayConfig {
    pub fn new(n: usize, layers: usize, depth: usize, epsilons: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            layers,
            depth,
            epsilons,
            angle_range: default_angle_range(),
            seed,
            classical_layers: BTreeSet::new(),
            memory_budget_bytes: default_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Range(format!("N = {} must be at least 2", self.n)));
        }
        if self.layers < 2 {
            return Err(Error::Range(format!("L = {} must be at least 2", self.layers)));
        }
        if self.depth < 1 {
            return Err(Error::Range("ansatz depth must be at least 1".into()));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Validation("empty ε grid".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Range(format!("ε = {e} outside [0, 1]")));
        }
        if !(self.angle_range > 0.0) {
            return Err(Error::Range("angle_range must be positive".into()));
        }
        if let Some(l) = self.classical_layers.iter().find(|&&l| l == 0 || l > self.layers) {
            return Err(Error::Range(format!("classical layer {l} outside 1..={}", self.layers)));
        }
        // Operators on a tensor's N qubits are the largest objects built.
        let bytes = (1u128 << (2 * self.n.min(60))) * 16;
        if self.n >= 31 || bytes > self.memory_budget_bytes as u128 {
            return Err(Error::MemoryGuard(format!(
                "a {}-qubit density matrix needs {bytes} bytes, budget is {}",
                self.n, self.memory_budget_bytes
            )));
        }
        Ok(())
    }
}

/// One row of the decay CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "d")]
    pub depth: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub noisy: f64,
    pub noiseless: f64,
    pub ratio: f64,
    pub predicted_ratio: f64,
    /// Empty when the predicted ratio is too small to invert.
    pub qem_value: Option<f64>,
    pub variance_multiplier: Option<f64>,
    /// `ln ratio`, finite even where `ratio` underflows.
    pub log_ratio: f64,
    pub log_predicted_ratio: f64,
}

/// Hardware-efficient unitary: `d` layers of RY·RZ on every qubit, each
/// followed by a CZ ladder, with angles uniform in `±angle_range`.
pub fn build_hea(n: usize, d: usize, angle_range: f64, seed: u64) -> Result<DenseOperator> {
    if !(angle_range >= 0.0) {
        return Err(Error::Range("angle_range must be nonnegative".into()));
    }
    let spec = crate::ansatz::AnsatzSpec {
        depth: d,
        rotations: vec![Rotation::Ry, Rotation::Rz],
        entangler: Entangler::Cz,
        final_rotations: false,
    };
    let ansatz = crate::ansatz::HardwareEfficientAnsatz::new(n, &spec)?;
    let angles = crate::ansatz::random_angles(ansatz.num_params(), angle_range, seed);
    ansatz.unitary(&angles)
}

/// Seed of the unitary shared by all tensors of `layer`.
pub fn layer_seed(seed: u64, layer: usize) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    rng.next_u64()
}

/// Number of quantum tensors in the tree, `Σ_{l ∉ classical} N^{l−1}`.
pub fn noisy_tensor_count(n: usize, layers: usize, classical: &BTreeSet<usize>) -> f64 {
    (1..=layers)
        .filter(|l| !classical.contains(l))
        .map(|l| (n as f64).powi(l as i32 - 1))
        .sum()
}

/// `(1−ε)^{(1−N^L)/(1−N)}`.
pub fn predicted_ratio(n: usize, layers: usize, epsilon: f64) -> f64 {
    (noisy_tensor_count(n, layers, &BTreeSet::new()) * (-epsilon).ln_1p()).exp()
}

/// Divides out the predicted decay; the sampling cost grows by `r̃^{−2}`.
pub fn qem_rescale(noisy: f64, predicted: f64) -> Result<(f64, f64)> {
    if predicted <= tolerance::UNDERFLOW {
        return Err(Error::Underflow(format!("predicted ratio {predicted} is too small to invert")));
    }
    Ok((noisy / predicted, predicted.powi(-2)))
}

/// Per-layer unitaries of a configuration, index 0 being the root layer.
pub fn layer_unitaries(cfg: &DecayConfig) -> Result<Vec<DenseOperator>> {
    (1..=cfg.layers)
        .map(|l| build_hea(cfg.n, cfg.depth, cfg.angle_range, layer_seed(cfg.seed, l)))
        .collect()
}

/// Root expectation of the layered tree at noise rate `epsilon`.
pub fn layered_value(
    n: usize,
    unitaries: &[DenseOperator],
    epsilon: f64,
    classical: &BTreeSet<usize>,
) -> Result<f64> {
    let (mantissa, log_scale) = layered_log_value(n, unitaries, epsilon, classical)?;
    Ok(mantissa * log_scale.exp())
}

/// [`layered_value`] as `(mantissa, ln scale)`. The contracted observable is
/// renormalized after every layer so deep trees do not underflow.
pub fn layered_log_value(
    n: usize,
    unitaries: &[DenseOperator],
    epsilon: f64,
    classical: &BTreeSet<usize>,
) -> Result<(f64, f64)> {
    let layers = unitaries.len();
    let mut o = tensor_power(&Pauli::Z.matrix(), n)?;
    let mut log_scale = 0.0;
    for l in (2..=layers).rev() {
        let u = &unitaries[l - 1];
        let m = if classical.contains(&l) {
            let a = DenseOperator::from_columns(&[u.column(0), u.column(1 << (n - 1))])?;
            contract_classical(&a, &o)?.m
        } else {
            let w = Channel::compose(Channel::depolarizing(n, epsilon)?, Channel::unitary(u.clone())?)?;
            type1_matrix(&w, &o, 1)?
        };
        let norm = m.max_abs();
        if norm == 0.0 {
            return Ok((0.0, 0.0));
        }
        log_scale = n as f64 * (log_scale + norm.ln());
        o = tensor_power(&m.scale_real(1.0 / norm), n)?;
    }
    let root = &unitaries[0];
    let zero = basis_state(1 << n, 0);
    let value = if classical.contains(&1) {
        o.expectation(&root.apply(&zero)?)?
    } else {
        let w = Channel::compose(Channel::depolarizing(n, epsilon)?, Channel::unitary(root.clone())?)?;
        w.expectation_pure(&o, &zero)?
    };
    Ok((value.re, log_scale))
}

/// Measured and predicted ratios on the ε grid, honouring `cfg.classical_layers`.
pub fn mixed_layer_ratio(cfg: &DecayConfig, classical: &BTreeSet<usize>) -> Result<Vec<DecayRow>> {
    let mut cfg = cfg.clone();
    cfg.classical_layers = classical.clone();
    layered_ratio(&cfg)
}

pub fn layered_ratio(cfg: &DecayConfig) -> Result<Vec<DecayRow>> {
    cfg.validate()?;
    let us = layer_unitaries(cfg)?;
    let classical = &cfg.classical_layers;
    let (clean_m, clean_log) = layered_log_value(cfg.n, &us, 0.0, classical)?;
    let noiseless = clean_m * clean_log.exp();
    let count = noisy_tensor_count(cfg.n, cfg.layers, classical);
    cfg.epsilons
        .par_iter()
        .map(|&eps| {
            let (m, log) = if eps == 0.0 { (clean_m, clean_log) } else { layered_log_value(cfg.n, &us, eps, classical)? };
            let noisy = m * log.exp();
            let log_ratio = if m * clean_m > 0.0 { (m / clean_m).ln() + log - clean_log } else { f64::NAN };
            let log_predicted_ratio = count * (-eps).ln_1p();
            let predicted = log_predicted_ratio.exp();
            let qem = qem_rescale(noisy, predicted).ok();
            Ok(DecayRow {
                n: cfg.n,
                layers: cfg.layers,
                depth: cfg.depth,
                epsilon: eps,
                seed: cfg.seed,
                noisy,
                noiseless,
                ratio: if noiseless != 0.0 { noisy / noiseless } else { f64::NAN },
                predicted_ratio: predicted,
                qem_value: qem.map(|q| q.0),
                variance_multiplier: qem.map(|q| q.1),
                log_ratio,
                log_predicted_ratio,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[DecayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
