//! Deep VQE on weakly coupled clusters: per-cluster VQE, an excitation basis
//! orthonormalized by Gram–Schmidt, the effective Hamiltonian on the
//! `Σ κ_s`-qubit register, and a top-layer VQE. The same state is also
//! available as a hybrid tree (root `φ`, classical `P̃ᵀ` layer, Pauli-family
//! leaves) and as the noise-robust two-layer variant with root `∝ P̃ᵀφ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzSpec, HardwareEfficientAnsatz};
use crate::channels::NoiseSpec;
use crate::error::{Error, Result};
use crate::httn::{effective_noisy_state, HttnTree, Observable, ProductTerm, RootTensor, TreeNode};
use crate::linalg::{
    embed, hermitian_eigendecompose, pauli_decompose, tensor_product, DenseOperator, PauliString,
    StateVector, C64, ONE, ZERO,
};
use crate::optimize::{minimize, OptimizationReport, OptimizerSpec};
use crate::linalg::state_serde;
use crate::tensors::QuantumTensor;
use crate::tolerance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub qubits: usize,
    pub hamiltonian: DenseOperator,
    /// `D^0 = I` first. Empty means "use the boundary operators".
    #[serde(default)]
    pub excitations: Vec<DenseOperator>,
}

/// `c · W_t ⊗ W_u` between clusters `t` and `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionTerm {
    pub coefficient: f64,
    pub left: DenseOperator,
    pub right: DenseOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub t: usize,
    pub u: usize,
    pub terms: Vec<InteractionTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub clusters: Vec<Cluster>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl ClusterModel {
    /// Open transverse-field Ising chain `−J Σ Z_i Z_{i+1} − h Σ X_i` split into
    /// equal consecutive clusters, with boundary excitations.
    pub fn transverse_ising(clusters: usize, qubits: usize, j: f64, h: f64) -> Result<Self> {
        if clusters == 0 || qubits == 0 {
            return Err(Error::Argument("need at least one cluster and one qubit".into()));
        }
        let z = PauliString::parse("Z")?.matrix();
        let x = PauliString::parse("X")?.matrix();
        let local = |op: &DenseOperator, q: usize| embed(op, q, qubits);
        let mut cs = Vec::new();
        for _ in 0..clusters {
            let mut hs = DenseOperator::zeros(1 << qubits, 1 << qubits);
            for q in 0..qubits {
                hs = hs.try_sub(&local(&x, q)?.scale_real(h))?;
                if q + 1 < qubits {
                    hs = hs.try_sub(&local(&z, q)?.try_mul(&local(&z, q + 1)?)?.scale_real(j))?;
                }
            }
            cs.push(Cluster { qubits, hamiltonian: hs, excitations: vec![] });
        }
        let interactions = (0..clusters.saturating_sub(1))
            .map(|t| {
                Ok(Interaction {
                    t,
                    u: t + 1,
                    terms: vec![InteractionTerm {
                        coefficient: -j,
                        left: local(&z, qubits - 1)?,
                        right: local(&z, 0)?,
                    }],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = Self { clusters: cs, interactions };
        m.fill_boundary_excitations();
        m.validate()?;
        Ok(m)
    }

    /// Replaces empty excitation lists by `{I} ∪ {W_s^α}` from the interactions.
    pub fn fill_boundary_excitations(&mut self) {
        for s in 0..self.clusters.len() {
            if !self.clusters[s].excitations.is_empty() {
                continue;
            }
            let mut ds = vec![DenseOperator::identity(1 << self.clusters[s].qubits)];
            for inter in &self.interactions {
                for term in &inter.terms {
                    let w = if inter.t == s {
                        &term.left
                    } else if inter.u == s {
                        &term.right
                    } else {
                        continue;
                    };
                    if ds.iter().all(|d| d.max_abs_diff(w) > tolerance::STRUCTURAL) {
                        ds.push(w.clone());
                    }
                }
            }
            self.clusters[s].excitations = ds;
        }
    }

    pub fn total_qubits(&self) -> usize {
        self.clusters.iter().map(|c| c.qubits).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        self.clusters
            .iter()
            .scan(0, |acc, c| {
                let o = *acc;
                *acc += c.qubits;
                Some(o)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::Validation("model has no clusters".into()));
        }
        for (s, c) in self.clusters.iter().enumerate() {
            if c.qubits == 0 {
                return Err(Error::Validation(format!("cluster {s} has no qubits")));
            }
            let dim = 1 << c.qubits;
            c.hamiltonian.require_dim(dim, "cluster Hamiltonian")?;
            if c.hamiltonian.hermiticity_residual() > tolerance::STRUCTURAL {
                return Err(Error::Symmetry(format!("H_{s} is not Hermitian")));
            }
            let first = c
                .excitations
                .first()
                .ok_or_else(|| Error::Validation(format!("cluster {s} has no excitations")))?;
            for d in &c.excitations {
                d.require_dim(dim, "excitation operator")?;
            }
            if first.max_abs_diff(&DenseOperator::identity(dim)) > tolerance::STRUCTURAL {
                return Err(Error::Validation(format!("D_{s}^0 must be the identity")));
            }
        }
        for inter in &self.interactions {
            let n = self.clusters.len();
            if inter.t >= n || inter.u >= n || inter.t == inter.u {
                return Err(Error::Validation(format!(
                    "interaction ({}, {}) needs two distinct clusters",
                    inter.t, inter.u
                )));
            }
            for term in &inter.terms {
                term.left.require_dim(1 << self.clusters[inter.t].qubits, "interaction factor")?;
                term.right.require_dim(1 << self.clusters[inter.u].qubits, "interaction factor")?;
                if term.left.hermiticity_residual() > tolerance::STRUCTURAL
                    || term.right.hermiticity_residual() > tolerance::STRUCTURAL
                {
                    return Err(Error::Symmetry("interaction factors must be Hermitian".into()));
                }
            }
        }
        Ok(())
    }

    /// Dense `H = Σ_s H_s + Σ_{tu} V_tu` on all qubits.
    pub fn full_hamiltonian(&self) -> Result<DenseOperator> {
        let n = self.total_qubits();
        let off = self.offsets();
        let mut h = DenseOperator::zeros(1 << n, 1 << n);
        for (c, &o) in self.clusters.iter().zip(&off) {
            h = h.try_add(&embed(&c.hamiltonian, o, n)?)?;
        }
        for inter in &self.interactions {
            for term in &inter.terms {
                let a = embed(&term.left, off[inter.t], n)?;
                let b = embed(&term.right, off[inter.u], n)?;
                h = h.try_add(&a.try_mul(&b)?.scale_real(term.coefficient))?;
            }
        }
        Ok(h)
    }

    /// The Hamiltonian as cluster-wise product terms.
    pub fn observable(&self) -> Observable {
        let ids: Vec<DenseOperator> =
            self.clusters.iter().map(|c| DenseOperator::identity(1 << c.qubits)).collect();
        let mut terms = Vec::new();
        for (s, c) in self.clusters.iter().enumerate() {
            let mut f = ids.clone();
            f[s] = c.hamiltonian.clone();
            terms.push(ProductTerm { coefficient: 1.0, factors: f });
        }
        for inter in &self.interactions {
            for term in &inter.terms {
                let mut f = ids.clone();
                f[inter.t] = term.left.clone();
                f[inter.u] = term.right.clone();
                terms.push(ProductTerm { coefficient: term.coefficient, factors: f });
            }
        }
        Observable { terms }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterVqeResult {
    pub params: Vec<f64>,
    pub energy: f64,
    #[serde(with = "state_serde")]
    pub state: StateVector,
    pub report: OptimizationReport,
}

/// Minimizes `⟨ψ(θ)|H|ψ(θ)⟩` over a hardware-efficient ansatz.
pub fn cluster_vqe(
    h: &DenseOperator,
    ansatz: &AnsatzSpec,
    optimizer: &OptimizerSpec,
    seed: u64,
) -> Result<ClusterVqeResult> {
    if h.hermiticity_residual() > tolerance::STRUCTURAL {
        return Err(Error::Symmetry("cluster Hamiltonian is not Hermitian".into()));
    }
    let a = HardwareEfficientAnsatz::new(h.num_qubits()?, ansatz)?;
    let energy = |p: &[f64]| h.expectation(&a.state(p).expect("parameter count")).expect("dim").re;
    let grad = |p: &[f64]| a.parameter_shift_gradient(p, energy);
    let report = minimize(a.num_params(), energy, grad, optimizer, seed)?;
    let state = a.state(&report.params)?;
    Ok(ClusterVqeResult { params: report.params.clone(), energy: energy(&report.params), state, report })
}

/// `S_lm = ⟨ψ|D^{l†} D^m|ψ⟩`.
pub fn overlap_matrix(psi: &StateVector, ds: &[DenseOperator]) -> Result<DenseOperator> {
    let vs = excited_states(psi, ds)?;
    Ok(gram(&vs, &vs))
}

fn excited_states(psi: &StateVector, ds: &[DenseOperator]) -> Result<Vec<StateVector>> {
    ds.iter().map(|d| d.apply(psi)).collect()
}

fn gram(left: &[StateVector], right: &[StateVector]) -> DenseOperator {
    DenseOperator::from_fn(left.len(), right.len(), |l, m| left[l].dotc(&right[m]))
}

/// Lower-triangular `P` with `conj(P)·S·Pᵀ = I` on its non-padded rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSchmidt {
    pub p: DenseOperator,
    pub padded: Vec<bool>,
}

/// Gram–Schmidt in coefficient space with one re-orthogonalization pass.
///
/// A direction is padded when its squared residual norm `v†Sv` is at most
/// `tol`; testing the squared norm keeps roundoff of exactly dependent
/// directions (order `1e-16·‖S‖`) below the threshold.
pub fn gram_schmidt_p_with(s: &DenseOperator, tol: f64) -> Result<GramSchmidt> {
    s.require_square()?;
    if s.hermiticity_residual() > tolerance::STRUCTURAL {
        return Err(Error::Symmetry("overlap matrix is not Hermitian".into()));
    }
    let k = s.rows();
    let sm = s.matrix();
    let mut p = DenseOperator::zeros(k, k);
    let mut padded = vec![false; k];
    let inner = |a: &nalgebra::DVector<C64>, b: &nalgebra::DVector<C64>| a.dotc(&(sm * b));
    let mut rows: Vec<nalgebra::DVector<C64>> = Vec::new();
    for m in 0..k {
        let mut v = nalgebra::DVector::from_element(k, ZERO);
        v[m] = ONE;
        for _ in 0..2 {
            for r in &rows {
                let proj = inner(r, &v);
                v -= r * proj;
            }
        }
        let norm2 = inner(&v, &v).re;
        if norm2 <= tol {
            padded[m] = true;
            continue;
        }
        v /= C64::from(norm2.sqrt());
        for j in 0..k {
            p.set(m, j, v[j]);
        }
        rows.push(v);
    }
    Ok(GramSchmidt { p, padded })
}

pub fn gram_schmidt_p(s: &DenseOperator) -> Result<GramSchmidt> {
    gram_schmidt_p_with(s, tolerance::GRAM_SCHMIDT_RANK)
}

/// `conj(P)·X·Pᵀ`.
pub fn transform(p: &DenseOperator, x: &DenseOperator) -> Result<DenseOperator> {
    p.conj().try_mul(x)?.try_mul(&p.transpose())
}

fn pad_square(x: &DenseOperator, dim: usize) -> DenseOperator {
    DenseOperator::from_fn(dim, dim, |r, c| if r < x.rows() && c < x.cols() { x.get(r, c) } else { ZERO })
}

fn register_qubits(k: usize) -> usize {
    (usize::BITS - (k.max(1) - 1).leading_zeros()) as usize
}

/// Per-cluster data of the basis construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterBasis {
    pub vqe: ClusterVqeResult,
    pub overlap: DenseOperator,
    pub p: DenseOperator,
    /// `κ_s = ⌈log₂ K_s⌉`.
    pub kappa: usize,
    /// `P̃` padded to `2^{κ_s}`.
    pub p_padded: DenseOperator,
    /// Padded flags on the `2^{κ_s}` register.
    pub padded: Vec<bool>,
}

impl ClusterBasis {
    pub fn new(vqe: ClusterVqeResult, ds: &[DenseOperator], rank_tolerance: f64) -> Result<Self> {
        let overlap = overlap_matrix(&vqe.state, ds)?;
        let gs = gram_schmidt_p_with(&overlap, rank_tolerance)?;
        let kappa = register_qubits(ds.len());
        let dim = 1 << kappa;
        let mut padded = gs.padded.clone();
        padded.resize(dim, true);
        Ok(Self { p_padded: pad_square(&gs.p, dim), p: gs.p, overlap, kappa, padded, vqe })
    }

    /// `conj(P̃)·(⟨ψ^l|X|ψ^m⟩)·P̃ᵀ` on the `2^{κ_s}` register.
    fn effective(&self, x: &DenseOperator, ds: &[DenseOperator]) -> Result<DenseOperator> {
        let vs = excited_states(&self.vqe.state, ds)?;
        let xs: Vec<StateVector> = vs.iter().map(|v| x.apply(v)).collect::<Result<_>>()?;
        transform(&self.p_padded, &pad_square(&gram(&vs, &xs), 1 << self.kappa))
    }

    /// `Ŝ_s = conj(P̃)·S·P̃ᵀ`, the projector onto the non-padded basis.
    fn projector(&self) -> Result<DenseOperator> {
        transform(&self.p_padded, &pad_square(&self.overlap, 1 << self.kappa))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHamiltonian {
    pub h: DenseOperator,
    /// `⊗_s Ŝ_s`; the identity when no cluster is padded.
    pub s: DenseOperator,
}

/// `Ĥ_eff = Σ_s Ĥ_s^eff + Σ_{tu} Σ_α c^α Ŵ_t^α ⊗ Ŵ_u^α`, where cluster
/// factors not touched by a term are `Ŝ_t` rather than the identity.
pub fn effective_hamiltonian(model: &ClusterModel, bases: &[ClusterBasis]) -> Result<EffectiveHamiltonian> {
    if bases.len() != model.clusters.len() {
        return Err(Error::Validation(format!(
            "{} bases for {} clusters",
            bases.len(),
            model.clusters.len()
        )));
    }
    let proj: Vec<DenseOperator> = bases.iter().map(ClusterBasis::projector).collect::<Result<_>>()?;
    let kron = |f: &[DenseOperator]| tensor_product(f);
    let dim: usize = bases.iter().map(|b| 1usize << b.kappa).product();
    let mut h = DenseOperator::zeros(dim, dim);
    for (s, c) in model.clusters.iter().enumerate() {
        let mut f = proj.clone();
        f[s] = bases[s].effective(&c.hamiltonian, &c.excitations)?;
        h = h.try_add(&kron(&f)?)?;
    }
    for inter in &model.interactions {
        let (dt, du) = (&model.clusters[inter.t].excitations, &model.clusters[inter.u].excitations);
        for term in &inter.terms {
            let mut f = proj.clone();
            f[inter.t] = bases[inter.t].effective(&term.left, dt)?;
            f[inter.u] = bases[inter.u].effective(&term.right, du)?;
            h = h.try_add(&kron(&f)?.scale_real(term.coefficient))?;
        }
    }
    if h.hermiticity_residual() > tolerance::STRUCTURAL {
        return Err(Error::Symmetry("effective Hamiltonian is not Hermitian".into()));
    }
    Ok(EffectiveHamiltonian { h, s: kron(&proj)? })
}

/// `⟨φ|Ĥ|φ⟩ / ⟨φ|Ŝ|φ⟩`.
pub fn top_energy(eff: &EffectiveHamiltonian, phi: &StateVector) -> Result<f64> {
    let den = eff.s.expectation(phi)?.re;
    if den <= tolerance::NORMALIZATION_FLOOR {
        return Err(Error::DegenerateNormalization("top state lies in the padded subspace".into()));
    }
    Ok(eff.h.expectation(phi)?.re / den)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepVqeSpec {
    pub cluster_ansatz: AnsatzSpec,
    pub cluster_optimizer: OptimizerSpec,
    pub top_ansatz: AnsatzSpec,
    pub top_optimizer: OptimizerSpec,
    /// Squared residual norm below which an excitation direction is padded.
    #[serde(skip, default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
}

fn default_rank_tolerance() -> f64 {
    tolerance::GRAM_SCHMIDT_RANK
}

impl Default for DeepVqeSpec {
    fn default() -> Self {
        Self {
            cluster_ansatz: AnsatzSpec::default(),
            cluster_optimizer: OptimizerSpec::default(),
            top_ansatz: AnsatzSpec { depth: 3, ..Default::default() },
            top_optimizer: OptimizerSpec::default(),
            rank_tolerance: default_rank_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepVqeResult {
    pub clusters: Vec<ClusterBasis>,
    pub effective: EffectiveHamiltonian,
    pub top_params: Vec<f64>,
    #[serde(with = "state_serde")]
    pub top_state: StateVector,
    pub top_report: Option<OptimizationReport>,
    /// Top-layer VQE energy.
    pub energy: f64,
    /// Lowest eigenvalue of `Ĥ_eff` on the non-padded subspace.
    pub effective_ground_energy: f64,
}

/// Per-cluster VQE seeds are `seed + s`; the top layer uses `seed + N`.
pub fn deep_vqe_energy(model: &ClusterModel, spec: &DeepVqeSpec, seed: u64) -> Result<DeepVqeResult> {
    model.validate()?;
    let bases: Vec<ClusterBasis> = model
        .clusters
        .par_iter()
        .enumerate()
        .map(|(s, c)| {
            let vqe = cluster_vqe(&c.hamiltonian, &spec.cluster_ansatz, &spec.cluster_optimizer, seed.wrapping_add(s as u64))?;
            ClusterBasis::new(vqe, &c.excitations, spec.rank_tolerance)
        })
        .collect::<Result<_>>()?;
    let eff = effective_hamiltonian(model, &bases)?;
    let kappa: usize = bases.iter().map(|b| b.kappa).sum();
    let valid = valid_indices(&bases);
    let sub = DenseOperator::from_fn(valid.len(), valid.len(), |r, c| eff.h.get(valid[r], valid[c]));
    let effective_ground_energy = *hermitian_eigendecompose(&sub.hermitian_part())?
        .eigenvalues
        .last()
        .expect("nonempty");
    let (top_params, top_state, top_report) = if kappa == 0 {
        (vec![], StateVector::from_element(1, ONE), None)
    } else {
        let a = HardwareEfficientAnsatz::new(kappa, &spec.top_ansatz)?;
        let parts = |p: &[f64]| {
            let phi = a.state(p).expect("parameter count");
            (eff.h.expectation(&phi).expect("dim").re, eff.s.expectation(&phi).expect("dim").re)
        };
        let cost = |p: &[f64]| {
            let (num, den) = parts(p);
            if den <= tolerance::NORMALIZATION_FLOOR { f64::MAX } else { num / den }
        };
        let grad = |p: &[f64]| {
            let (num, den) = parts(p);
            let gn = a.parameter_shift_gradient(p, |q| parts(q).0);
            let gd = a.parameter_shift_gradient(p, |q| parts(q).1);
            gn.iter().zip(&gd).map(|(n, d)| (n * den - num * d) / (den * den)).collect()
        };
        let report = minimize(a.num_params(), cost, grad, &spec.top_optimizer, seed.wrapping_add(bases.len() as u64))?;
        let phi = a.state(&report.params)?;
        (report.params.clone(), phi, Some(report))
    };
    let energy = top_energy(&eff, &top_state)?;
    Ok(DeepVqeResult {
        clusters: bases,
        effective: eff,
        top_params,
        top_state,
        top_report,
        energy,
        effective_ground_energy,
    })
}

fn valid_indices(bases: &[ClusterBasis]) -> Vec<usize> {
    let mut idx = vec![0usize];
    for b in bases {
        let dim = 1 << b.kappa;
        idx = idx
            .iter()
            .flat_map(|&i| (0..dim).filter(|&a| !b.padded[a]).map(move |a| i * dim + a))
            .collect();
    }
    idx
}

fn as_pauli(d: &DenseOperator) -> Option<PauliString> {
    let terms = pauli_decompose(d).ok()?;
    match terms.as_slice() {
        [p] if (p.coefficient.norm() - 1.0).abs() <= tolerance::STRUCTURAL => Some(p.clone()),
        _ => None,
    }
}

/// Widens every cluster register to at least one qubit and re-expresses `φ`
/// on the widened register; a `κ_s = 0` cluster gains a qubit held in `|0⟩`.
fn widen(result: &DeepVqeResult, phi: &StateVector) -> (Vec<usize>, Vec<DenseOperator>, StateVector) {
    let widths: Vec<usize> = result.clusters.iter().map(|b| b.kappa.max(1)).collect();
    let ps = result.clusters.iter().zip(&widths).map(|(b, &w)| pad_square(&b.p_padded, 1 << w)).collect();
    let mut out = StateVector::zeros(widths.iter().map(|w| 1usize << w).product());
    for (i, amp) in phi.iter().enumerate() {
        let mut rem = i;
        let mut digits = vec![0usize; widths.len()];
        for (s, b) in result.clusters.iter().enumerate().rev() {
            digits[s] = rem % (1 << b.kappa);
            rem >>= b.kappa;
        }
        let j = digits.iter().zip(&widths).fold(0, |acc, (&dg, &w)| (acc << w) | dg);
        out[j] = *amp;
    }
    (widths, ps, out)
}

/// Noiseless three-layer hybrid tree of the Deep VQE state together with the
/// model Hamiltonian as a cluster-wise observable.
pub fn htn_form(model: &ClusterModel, result: &DeepVqeResult) -> Result<(HttnTree, Observable)> {
    let (widths, ps, phi) = widen(result, &result.top_state);
    let mut layer2 = Vec::new();
    let mut layer3 = Vec::new();
    for (s, (b, c)) in result.clusters.iter().zip(&model.clusters).enumerate() {
        let dim = 1 << widths[s];
        let pt = ps[s].transpose();
        let cols: Vec<StateVector> = (0..dim).map(|a| pt.column(a)).collect();
        layer2.push(TreeNode { parent: 0, tensor: QuantumTensor::classical(cols)? });
        let leaf = match leaf_paulis(&c.excitations, dim) {
            Some(paulis) => QuantumTensor::pauli_family(b.vqe.state.clone(), paulis)?,
            None => {
                let mut cols = excited_states(&b.vqe.state, &c.excitations)?;
                cols.resize(dim, StateVector::zeros(1 << c.qubits));
                QuantumTensor::classical(cols)?
            }
        };
        layer3.push(TreeNode { parent: s, tensor: leaf });
    }
    let tree = HttnTree::new(RootTensor::Classical { amplitudes: phi }, vec![layer2, layer3])?;
    Ok((tree, model.observable()))
}

fn leaf_paulis(ds: &[DenseOperator], dim: usize) -> Option<Vec<Option<PauliString>>> {
    let mut out: Vec<Option<PauliString>> = ds.iter().map(as_pauli).collect::<Option<Vec<_>>>()?.into_iter().map(Some).collect();
    out.resize(dim, None);
    Some(out)
}

/// Two-layer noisy tree: root `∝ (⊗P̃_sᵀ)φ` and one Pauli-family tensor per
/// cluster carrying `noise[s]` after its base-state preparation.
pub fn dv2_tree(model: &ClusterModel, result: &DeepVqeResult, noise: &[NoiseSpec]) -> Result<HttnTree> {
    if noise.len() != model.clusters.len() {
        return Err(Error::Validation("one noise description per cluster expected".into()));
    }
    let (widths, ps, phi) = widen(result, &result.top_state);
    let pt = tensor_product(&ps.iter().map(DenseOperator::transpose).collect::<Vec<_>>())?;
    let root = pt.apply(&phi)?;
    let mut leaves = Vec::new();
    for (s, (b, c)) in result.clusters.iter().zip(&model.clusters).enumerate() {
        let paulis = leaf_paulis(&c.excitations, 1 << widths[s]).ok_or_else(|| {
            Error::Unsupported(format!("cluster {s} has non-Pauli excitations"))
        })?;
        leaves.push(QuantumTensor::pauli_family(b.vqe.state.clone(), paulis)?.with_noise(noise[s].clone())?);
    }
    HttnTree::two_layer(RootTensor::Classical { amplitudes: root }, leaves)
}

/// `ρ_DV2 = 𝒜(|φ'⟩⟨φ'|)/Tr[·]` with only Pauli-family noisy maps.
pub fn dv2_effective_state(model: &ClusterModel, result: &DeepVqeResult, noise: &[NoiseSpec]) -> Result<DenseOperator> {
    effective_noisy_state(&dv2_tree(model, result, noise)?)
}

/// Trace of the three-layer state when the leaves are noisy but the
/// classical `P̃ᵀ` layer was built from the noiseless overlaps. Noise breaks
/// the orthonormality `P̃` assumes, so the trace drifts from one.
pub fn dv_noisy_trace(model: &ClusterModel, result: &DeepVqeResult, noise: &[NoiseSpec]) -> Result<f64> {
    let (mut tree, _) = htn_form(model, result)?;
    let leaves = tree.layers.last_mut().expect("three layers");
    for (node, n) in leaves.iter_mut().zip(noise) {
        node.tensor = node.tensor.clone().with_noise(n.clone())?;
    }
    Ok(crate::httn::unnormalized_effective_state(&tree)?.trace().re)
}
