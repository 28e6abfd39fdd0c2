//! Hybrid tree tensor networks: wiring, bottom-up contraction, noisy
//! effective states and physicality diagnostics.
//!
//! Layer 1 is the root. `layers[0]` holds layer 2, and each node names the
//! index of its parent in the previous layer (the root is parent `0`).
//! Children of a parent are listed contiguously and consume the parent's
//! qubits in order, most significant first.

use std::collections::HashMap;
use std::sync::RwLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::NoiseSpec;
use crate::contraction::{contract, contract_operator, observable_hash, HermitianBlock};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_local_map, min_eigenvalue, pauli_decompose, qubits_of, tensor_product, DenseOperator,
    PauliString, StateVector, C64, ONE,
};
use crate::linalg::state_serde;
use crate::tensors::{PrepKind, QuantumTensor};
use crate::tolerance;

/// Top tensor of the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RootTensor {
    /// Quantum state with optional preparation noise.
    Quantum {
        state: DenseOperator,
        #[serde(default)]
        noise: NoiseSpec,
    },
    /// Noiseless amplitude vector; normalization is divided out.
    Classical {
        #[serde(with = "state_serde")]
        amplitudes: StateVector,
    },
}

impl RootTensor {
    pub fn pure(state: &StateVector) -> Self {
        RootTensor::Quantum { state: DenseOperator::projector(state), noise: NoiseSpec::None }
    }

    pub fn dim(&self) -> usize {
        match self {
            RootTensor::Quantum { state, .. } => state.rows(),
            RootTensor::Classical { amplitudes } => amplitudes.len(),
        }
    }

    /// Root state after its own noise, trace one.
    pub fn density(&self) -> Result<DenseOperator> {
        match self {
            RootTensor::Quantum { state, noise } => {
                noise.channel(qubits_of(state.rows())?)?.apply(state)
            }
            RootTensor::Classical { amplitudes } => {
                let n = amplitudes.norm_squared();
                if n <= tolerance::NORMALIZATION_FLOOR {
                    return Err(Error::DegenerateNormalization("zero classical root".into()));
                }
                Ok(DenseOperator::projector(amplitudes).scale_real(1.0 / n))
            }
        }
    }

    fn is_noisy(&self) -> bool {
        matches!(self, RootTensor::Quantum { noise, .. } if !noise.is_none())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeNode {
    pub parent: usize,
    pub tensor: QuantumTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttnTree {
    pub root: RootTensor,
    pub layers: Vec<Vec<TreeNode>>,
}

impl HttnTree {
    pub fn new(root: RootTensor, layers: Vec<Vec<TreeNode>>) -> Result<Self> {
        let t = Self { root, layers };
        t.validate()?;
        Ok(t)
    }

    /// Two-layer tree whose children consume the root qubits in order.
    pub fn two_layer(root: RootTensor, children: Vec<QuantumTensor>) -> Result<Self> {
        let nodes = children.into_iter().map(|tensor| TreeNode { parent: 0, tensor }).collect();
        Self::new(root, vec![nodes])
    }

    /// Number of layers including the root.
    pub fn depth(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn leaves(&self) -> &[TreeNode] {
        self.layers.last().map_or(&[], Vec::as_slice)
    }

    /// Quantum width of each leaf.
    pub fn leaf_widths(&self) -> Vec<usize> {
        self.leaves().iter().map(|n| n.tensor.k_width).collect()
    }

    pub fn leaf_qubits(&self) -> usize {
        self.leaf_widths().iter().sum()
    }

    pub fn is_noisy(&self) -> bool {
        self.root.is_noisy() || self.layers.iter().flatten().any(|n| n.tensor.is_noisy())
    }

    pub fn has_kind(&self, kind: PrepKind) -> bool {
        self.layers.iter().flatten().any(|n| n.tensor.kind() == kind)
    }

    /// Checks tensors, the qubit partition and the root trace.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.iter().any(Vec::is_empty) {
            return Err(Error::Topology("every layer needs at least one node".into()));
        }
        let root_qubits = qubits_of(self.root.dim())?;
        if let RootTensor::Quantum { state, noise } = &self.root {
            state.require_square()?;
            if (state.trace() - ONE).norm() > tolerance::STRUCTURAL {
                return Err(Error::Validation("root state must have trace 1".into()));
            }
            noise.channel(root_qubits)?;
        }
        let mut parent_widths = vec![root_qubits];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut consumed = vec![0usize; parent_widths.len()];
            let mut last_parent = 0;
            for (mu, node) in layer.iter().enumerate() {
                node.tensor.validate()?;
                let p = node.parent;
                if p >= parent_widths.len() {
                    return Err(Error::Topology(format!(
                        "layer {} node {mu} names missing parent {p}",
                        l + 2
                    )));
                }
                if p < last_parent {
                    return Err(Error::Topology(format!(
                        "layer {} children are not grouped by parent",
                        l + 2
                    )));
                }
                last_parent = p;
                consumed[p] += node.tensor.tau;
            }
            for (p, (&c, &w)) in consumed.iter().zip(&parent_widths).enumerate() {
                if c != w {
                    return Err(Error::Topology(format!(
                        "parent {p} of layer {} has {w} qubits but its children consume {c}",
                        l + 2
                    )));
                }
            }
            parent_widths = layer.iter().map(|n| n.tensor.k_width).collect();
        }
        Ok(())
    }

    /// Children (indices into the next layer) of node `mu` in `layers[l]`.
    fn children(&self, l: usize, mu: usize) -> Vec<usize> {
        self.layers[l + 1]
            .iter()
            .enumerate()
            .filter(|(_, n)| n.parent == mu)
            .map(|(i, _)| i)
            .collect()
    }
}

/// One product term `coefficient · ⊗_leaf factor`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    pub coefficient: f64,
    pub factors: Vec<DenseOperator>,
}

/// Leaf observable as a real combination of Hermitian product terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub terms: Vec<ProductTerm>,
}

impl Observable {
    pub fn product(factors: Vec<DenseOperator>) -> Self {
        Self { terms: vec![ProductTerm { coefficient: 1.0, factors }] }
    }

    /// Splits an arbitrary Hermitian operator on the leaf register into Pauli product terms.
    pub fn from_dense(op: &DenseOperator, leaf_widths: &[usize]) -> Result<Self> {
        if op.hermiticity_residual() > tolerance::STRUCTURAL {
            return Err(Error::Symmetry("observable is not Hermitian".into()));
        }
        let total: usize = leaf_widths.iter().sum();
        if op.num_qubits()? != total {
            return Err(Error::Dimension("observable does not match the leaf register".into()));
        }
        let mut terms = Vec::new();
        for p in pauli_decompose(op)? {
            let mut offset = 0;
            let factors = leaf_widths
                .iter()
                .map(|&w| {
                    let labels = p.labels[offset..offset + w].to_vec();
                    offset += w;
                    PauliString::new(ONE, labels).matrix()
                })
                .collect();
            terms.push(ProductTerm { coefficient: p.coefficient.re, factors });
        }
        Ok(Self { terms })
    }

    pub fn to_dense(&self) -> Result<DenseOperator> {
        let mut acc: Option<DenseOperator> = None;
        for t in &self.terms {
            let m = tensor_product(&t.factors)?.scale_real(t.coefficient);
            acc = Some(match acc {
                Some(a) => a.try_add(&m)?,
                None => m,
            });
        }
        acc.ok_or_else(|| Error::Argument("observable has no terms".into()))
    }

    fn check(&self, widths: &[usize]) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Argument("observable has no terms".into()));
        }
        for t in &self.terms {
            if t.factors.len() != widths.len() {
                return Err(Error::Shape(format!(
                    "{} factors for {} leaves",
                    t.factors.len(),
                    widths.len()
                )));
            }
            for (f, &w) in t.factors.iter().zip(widths) {
                f.require_dim(1 << w, "leaf observable")?;
            }
        }
        Ok(())
    }
}

/// Memoized per-node contractions keyed by (layer, node, observable hash).
#[derive(Debug, Default)]
pub struct ContractionCache {
    inner: RwLock<HashMap<(usize, usize, u64), DenseOperator>>,
}

impl ContractionCache {
    pub fn get(&self, key: &(usize, usize, u64)) -> Option<DenseOperator> {
        self.inner.read().expect("cache lock").get(key).cloned()
    }

    pub fn insert(&self, key: (usize, usize, u64), value: DenseOperator) {
        self.inner.write().expect("cache lock").entry(key).or_insert(value);
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bottom-up contraction engine bound to one tree.
pub struct Contractor<'a> {
    tree: &'a HttnTree,
    cache: ContractionCache,
    strict_support: bool,
}

impl<'a> Contractor<'a> {
    pub fn new(tree: &'a HttnTree) -> Result<Self> {
        tree.validate()?;
        Ok(Self { tree, cache: ContractionCache::default(), strict_support: false })
    }

    /// Reject trees whose `S` blocks are singular instead of contracting on their support.
    pub fn strict(mut self, on: bool) -> Self {
        self.strict_support = on;
        self
    }

    pub fn cache(&self) -> &ContractionCache {
        &self.cache
    }

    fn node_operator(&self, l: usize, mu: usize, o: &DenseOperator) -> Result<DenseOperator> {
        let key = (l, mu, observable_hash(o));
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let m = contract_operator(&self.tree.layers[l][mu].tensor, o)?;
        self.cache.insert(key, m.clone());
        Ok(m)
    }

    /// Contracted operators of every node for the given leaf observables, deepest layer last.
    pub fn chain(&self, leaf_obs: &[DenseOperator]) -> Result<Vec<Vec<DenseOperator>>> {
        let layers = &self.tree.layers;
        let last = layers.len() - 1;
        let mut out: Vec<Vec<DenseOperator>> = vec![Vec::new(); layers.len()];
        out[last] = (0..layers[last].len())
            .into_par_iter()
            .map(|mu| self.node_operator(last, mu, &leaf_obs[mu]))
            .collect::<Result<_>>()?;
        for l in (0..last).rev() {
            let below = &out[l + 1];
            let ops = (0..layers[l].len())
                .into_par_iter()
                .map(|mu| {
                    let kids: Vec<_> =
                        self.tree.children(l, mu).into_iter().map(|c| below[c].clone()).collect();
                    self.node_operator(l, mu, &tensor_product(&kids)?)
                })
                .collect::<Result<_>>()?;
            out[l] = ops;
        }
        Ok(out)
    }

    /// `⊗` of the layer-2 operators, acting on the root register.
    fn top(&self, leaf_obs: &[DenseOperator]) -> Result<(DenseOperator, Vec<Vec<DenseOperator>>)> {
        let chain = self.chain(leaf_obs)?;
        Ok((tensor_product(&chain[0])?, chain))
    }

    fn identity_leaves(&self) -> Vec<DenseOperator> {
        self.tree.leaf_widths().iter().map(|&w| DenseOperator::identity(1 << w)).collect()
    }

    /// `Tr[S ρ]` over the root state.
    pub fn normalization(&self) -> Result<f64> {
        let rho = self.tree.root.density()?;
        let (s_top, chain) = self.top(&self.identity_leaves())?;
        if self.strict_support {
            for (l, layer) in chain.iter().enumerate() {
                for (mu, s) in layer.iter().enumerate() {
                    if min_eigenvalue(s)? <= tolerance::NORMALIZATION_FLOOR {
                        return Err(Error::DegenerateNormalization(format!(
                            "singular S block at layer {} node {mu}",
                            l + 2
                        )));
                    }
                }
            }
        }
        let den = s_top.trace_product(&rho)?.re;
        if den.abs() <= tolerance::NORMALIZATION_FLOOR {
            return Err(Error::DegenerateNormalization(format!("Tr[Sρ] = {den:e}")));
        }
        Ok(den)
    }

    /// `Σ_t c_t Tr[M_t ρ] / Tr[S ρ]`.
    pub fn noisy_expectation(&self, obs: &Observable) -> Result<f64> {
        obs.check(&self.tree.leaf_widths())?;
        let rho = self.tree.root.density()?;
        let mut num = 0.0;
        for t in &obs.terms {
            let (m_top, _) = self.top(&t.factors)?;
            num += t.coefficient * m_top.trace_product(&rho)?.re;
        }
        Ok(num / self.normalization()?)
    }

    /// Per-node blocks for a single product observable.
    pub fn blocks(&self, leaf_obs: &[DenseOperator]) -> Result<Vec<Vec<HermitianBlock>>> {
        let m_chain = self.chain(leaf_obs)?;
        let s_chain = self.chain(&self.identity_leaves())?;
        let mut out = Vec::new();
        for (l, layer) in self.tree.layers.iter().enumerate() {
            let mut row = Vec::new();
            for (mu, node) in layer.iter().enumerate() {
                let mut b = contract(&node.tensor, &DenseOperator::identity(node.tensor.dim_out()))?;
                b.m = m_chain[l][mu].clone();
                b.s = s_chain[l][mu].clone();
                row.push(b);
            }
            out.push(row);
        }
        Ok(out)
    }
}

/// Noiseless expectation `⟨ψ|O|ψ⟩/⟨ψ|ψ⟩` by bottom-up contraction.
pub fn expectation(tree: &HttnTree, obs: &Observable) -> Result<f64> {
    if tree.is_noisy() {
        return Err(Error::Validation(
            "expectation requires a noiseless tree; use noisy_expectation".into(),
        ));
    }
    Contractor::new(tree)?.noisy_expectation(obs)
}

/// `Tr[M̃₂ρ]/Tr[S̃₂ρ]` with every node's noise.
pub fn noisy_expectation(tree: &HttnTree, obs: &Observable) -> Result<f64> {
    Contractor::new(tree)?.noisy_expectation(obs)
}

/// Applies each node's map of one layer to its slice of `x`.
fn apply_layer<F>(x: &DenseOperator, layer: &[TreeNode], mut map: F) -> Result<DenseOperator>
where
    F: FnMut(usize, &DenseOperator) -> Result<DenseOperator>,
{
    let mut current = x.clone();
    for mu in 0..layer.len() {
        let before: usize = layer[..mu].iter().map(|n| n.tensor.dim_out()).product();
        let after: usize = layer[mu + 1..].iter().map(|n| n.tensor.dim_in()).product();
        current = apply_local_map(&current, before, layer[mu].tensor.dim_in(), after, |u| map(mu, u))?;
    }
    Ok(current)
}

/// Unnormalized `Ã_L ∘ … ∘ Ã₂(ρ)`.
pub fn unnormalized_effective_state(tree: &HttnTree) -> Result<DenseOperator> {
    tree.validate()?;
    if tree.has_kind(PrepKind::Type4) {
        return Err(Error::Unsupported(
            "unitary-family tensors need effective_noisy_state_type4".into(),
        ));
    }
    let mut x = tree.root.density()?;
    for layer in &tree.layers {
        let maps = layer.iter().map(|n| n.tensor.noisy_map()).collect::<Result<Vec<_>>>()?;
        x = apply_layer(&x, layer, |mu, u| maps[mu].apply(u))?;
    }
    Ok(x)
}

/// `ρ̃ = Ã_L ∘ … ∘ Ã₂(ρ) / Tr[…]`.
pub fn effective_noisy_state(tree: &HttnTree) -> Result<DenseOperator> {
    let x = unnormalized_effective_state(tree)?;
    let t = x.trace().re;
    if t.abs() <= tolerance::NORMALIZATION_FLOOR {
        return Err(Error::DegenerateNormalization(format!("effective state trace {t:e}")));
    }
    Ok(x.scale_real(1.0 / t))
}

/// Coefficient matrices `(r, s)` of a unitary-family tensor.
fn type4_coefficients(t: &QuantumTensor) -> Result<(DenseOperator, DenseOperator)> {
    let n = t.dim_in();
    let (p, q) = t.noise.circuit_rates(n)?;
    let r = DenseOperator::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0 - p[i], 0.0)
        } else {
            C64::new((1.0 - q[i]) * (1.0 - q[j]), 0.0)
        }
    });
    let s = DenseOperator::from_fn(n, n, |i, j| {
        if i == j {
            ONE
        } else {
            C64::new((1.0 - q[i]) * (1.0 - q[j]), 0.0)
        }
    });
    Ok((r, s))
}

/// `(⊗A) (r∘ρ) (⊗A)† / Tr[(⊗A)(s∘ρ)(⊗A)†]` for a two-layer unitary-family tree.
///
/// The result need not be positive semidefinite, and its trace is
/// `Tr[A(r∘ρ)A†]/Tr[A(s∘ρ)A†]`, which differs from one when the diagonal rates are nonzero.
pub fn effective_noisy_state_type4(tree: &HttnTree) -> Result<DenseOperator> {
    tree.validate()?;
    if tree.layers.len() != 1 {
        return Err(Error::Shape("type-4 effective state needs a two-layer tree".into()));
    }
    let leaves = &tree.layers[0];
    if leaves.iter().any(|n| n.tensor.kind() != PrepKind::Type4) {
        return Err(Error::Shape("every child must be a unitary-family tensor".into()));
    }
    let mut a_ops = Vec::new();
    let mut r_ops = Vec::new();
    let mut s_ops = Vec::new();
    for n in leaves {
        a_ops.push(n.tensor.expansion_operator()?.matrix);
        let (r, s) = type4_coefficients(&n.tensor)?;
        r_ops.push(r);
        s_ops.push(s);
    }
    let a = tensor_product(&a_ops)?;
    let rho = tree.root.density()?;
    let gamma = tensor_product(&r_ops)?.hadamard(&rho)?;
    let lambda = tensor_product(&s_ops)?.hadamard(&rho)?;
    let num = &(&a * &gamma) * &a.adjoint();
    let den = (&(&a * &lambda) * &a.adjoint()).trace().re;
    if den.abs() <= tolerance::NORMALIZATION_FLOOR {
        return Err(Error::DegenerateNormalization(format!("Λ-trace {den:e}")));
    }
    Ok(num.scale_real(1.0 / den))
}

/// Physicality verdict of a candidate state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityReport {
    pub min_eigenvalue: f64,
    pub trace: C64,
    pub is_physical: bool,
}

pub fn physicality_check(rho: &DenseOperator) -> Result<PhysicalityReport> {
    physicality_check_with(rho, tolerance::PHYSICALITY)
}

pub fn physicality_check_with(rho: &DenseOperator, tol: f64) -> Result<PhysicalityReport> {
    rho.require_square()?;
    if rho.hermiticity_residual() > tol {
        return Err(Error::Symmetry("candidate state is not Hermitian".into()));
    }
    let h = rho.hermitian_part();
    let min_eigenvalue = min_eigenvalue(&h)?;
    let trace = rho.trace();
    let is_physical = min_eigenvalue >= -tol && (trace - ONE).norm() <= tol;
    Ok(PhysicalityReport { min_eigenvalue, trace, is_physical })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_state, c, Pauli};

    fn zz() -> Observable {
        Observable::product(vec![Pauli::Z.matrix(), Pauli::Z.matrix()])
    }

    fn identity_leaves() -> Vec<QuantumTensor> {
        (0..2)
            .map(|_| QuantumTensor::initial_state(DenseOperator::identity(2), 1).unwrap())
            .collect()
    }

    #[test]
    fn product_root() {
        let tree = HttnTree::two_layer(RootTensor::pure(&basis_state(4, 0)), identity_leaves()).unwrap();
        assert!((expectation(&tree, &zz()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_root() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        let tree = HttnTree::two_layer(RootTensor::pure(&bell), identity_leaves()).unwrap();
        assert!((expectation(&tree, &zz()).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wiring_violation_is_topology_error() {
        let err = HttnTree::two_layer(RootTensor::pure(&basis_state(8, 0)), identity_leaves());
        assert!(matches!(err, Err(Error::Topology(_))));
    }

    #[test]
    fn type4_falsifier() {
        let plus = StateVector::from_vec(vec![c(0.5f64.sqrt(), 0.), c(0.5f64.sqrt(), 0.)]);
        let leaf = QuantumTensor::unitary_family(vec![DenseOperator::identity(2), Pauli::X.matrix()])
            .unwrap()
            .with_noise(NoiseSpec::CircuitDepolarizing { diagonal: vec![0.5, 0.5], off_diagonal: vec![0.0, 0.0] })
            .unwrap();
        let tree = HttnTree::two_layer(RootTensor::pure(&plus), vec![leaf]).unwrap();
        let rho = effective_noisy_state_type4(&tree).unwrap();
        let rep = physicality_check(&rho).unwrap();
        assert!((rep.min_eigenvalue + 0.25).abs() < 1e-12);
        assert!(!rep.is_physical);
        assert!(matches!(effective_noisy_state(&tree), Err(Error::Unsupported(_))));
    }

    #[test]
    fn maximally_mixed_is_physical() {
        let rep = physicality_check(&DenseOperator::identity(2).scale_real(0.5)).unwrap();
        assert!(rep.is_physical);
    }
}
