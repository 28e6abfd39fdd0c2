//! Tensor definitions and their (noisy) expansion operators.
//!
//! A tensor with classical width `τ` and quantum width `K` is an amplitude
//! family `|ψ^i⟩`, `i ∈ [0, 2^τ)`, on `K` qubits. Its expansion operator is
//! `A = Σ_i |ψ^i⟩⟨i|`; under noise it becomes the linear map `Ã` with
//! `Tr[M̃ X] = Tr[O Ã(X)]` for every `X`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::{Channel, NoiseSpec};
use crate::error::{Error, Result};
use crate::linalg::{
    basis_state, state_preparation_unitary, DenseOperator, PauliString, StateVector, ZERO,
};
use crate::tolerance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preparation {
    /// `|ψ^i⟩ = U(|i⟩ ⊗ |0…0⟩)`, index register on the first `τ` qubits.
    InitialState { unitary: DenseOperator },
    /// `|ψ^i⟩ = (⟨i| ⊗ I)|ψ⟩` with `|ψ⟩` on `τ + K` qubits; left unnormalized.
    Projection {
        #[serde(with = "crate::linalg::state_serde")]
        state: StateVector,
    },
    /// `|ψ^i⟩ = P^i|ψ⟩`; a missing Pauli yields a zero column.
    PauliFamily {
        #[serde(with = "crate::linalg::state_serde")]
        base_state: StateVector,
        paulis: Vec<Option<PauliString>>,
    },
    /// `|ψ^i⟩ = U^i|0…0⟩`.
    UnitaryFamily { unitaries: Vec<DenseOperator> },
    /// Stored amplitude table, one column per index.
    Classical {
        #[serde(with = "crate::linalg::states_serde")]
        columns: Vec<StateVector>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrepKind {
    Type1,
    Type2,
    Type3,
    Type4,
    Classical,
}

impl fmt::Display for PrepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PrepKind::Type1 => "initial-state",
            PrepKind::Type2 => "projection",
            PrepKind::Type3 => "pauli-family",
            PrepKind::Type4 => "unitary-family",
            PrepKind::Classical => "classical",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumTensor {
    pub prep: Preparation,
    pub tau: usize,
    pub k_width: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn check_normalized(v: &StateVector, what: &str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Validation(format!("{what} has norm {n}, expected 1")));
    }
    Ok(())
}

impl QuantumTensor {
    pub fn new(prep: Preparation, tau: usize, k_width: usize) -> Result<Self> {
        let t = Self { prep, tau, k_width, noise: NoiseSpec::None, label: None };
        t.validate()?;
        Ok(t)
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Result<Self> {
        self.noise = noise;
        self.validate()?;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// `U(|i⟩|0…0⟩)` family.
    pub fn initial_state(unitary: DenseOperator, tau: usize) -> Result<Self> {
        let k = unitary.num_qubits()?;
        Self::new(Preparation::InitialState { unitary }, tau, k)
    }

    /// Projection family of a `τ + K` qubit state.
    pub fn projection(state: StateVector, tau: usize) -> Result<Self> {
        let total = crate::linalg::qubits_of(state.len())?;
        if tau >= total {
            return Err(Error::Shape(format!("τ = {tau} leaves no quantum qubits of {total}")));
        }
        Self::new(Preparation::Projection { state }, tau, total - tau)
    }

    pub fn pauli_family(base_state: StateVector, paulis: Vec<Option<PauliString>>) -> Result<Self> {
        let k = crate::linalg::qubits_of(base_state.len())?;
        let tau = crate::linalg::qubits_of(paulis.len())?;
        Self::new(Preparation::PauliFamily { base_state, paulis }, tau, k)
    }

    pub fn unitary_family(unitaries: Vec<DenseOperator>) -> Result<Self> {
        let tau = crate::linalg::qubits_of(unitaries.len())?;
        let k = unitaries
            .first()
            .ok_or_else(|| Error::Validation("no unitaries".into()))?
            .num_qubits()?;
        Self::new(Preparation::UnitaryFamily { unitaries }, tau, k)
    }

    pub fn classical(columns: Vec<StateVector>) -> Result<Self> {
        let tau = crate::linalg::qubits_of(columns.len())?;
        let k = crate::linalg::qubits_of(
            columns.first().ok_or_else(|| Error::Validation("no columns".into()))?.len(),
        )?;
        Self::new(Preparation::Classical { columns }, tau, k)
    }

    pub fn kind(&self) -> PrepKind {
        match self.prep {
            Preparation::InitialState { .. } => PrepKind::Type1,
            Preparation::Projection { .. } => PrepKind::Type2,
            Preparation::PauliFamily { .. } => PrepKind::Type3,
            Preparation::UnitaryFamily { .. } => PrepKind::Type4,
            Preparation::Classical { .. } => PrepKind::Classical,
        }
    }

    pub fn dim_in(&self) -> usize {
        1 << self.tau
    }

    pub fn dim_out(&self) -> usize {
        1 << self.k_width
    }

    pub fn is_noisy(&self) -> bool {
        !self.noise.is_none()
    }

    /// Checks the per-type invariants and the noise description.
    pub fn validate(&self) -> Result<()> {
        let (tau, k) = (self.tau, self.k_width);
        if tau == 0 || k == 0 {
            return Err(Error::Validation("τ and K must be positive".into()));
        }
        let count = 1usize << tau;
        let kdim = 1usize << k;
        match &self.prep {
            Preparation::InitialState { unitary } => {
                if tau > k {
                    return Err(Error::Shape(format!("τ = {tau} exceeds K = {k}")));
                }
                unitary.require_dim(kdim, "initial-state unitary")?;
                if !unitary.is_unitary(tolerance::STRUCTURAL) {
                    return Err(Error::Validation("initial-state operator is not unitary".into()));
                }
            }
            Preparation::Projection { state } => {
                if state.len() != count * kdim {
                    return Err(Error::Dimension(format!(
                        "projection state has length {}, expected {}",
                        state.len(),
                        count * kdim
                    )));
                }
                check_normalized(state, "projection state")?;
            }
            Preparation::PauliFamily { base_state, paulis } => {
                if base_state.len() != kdim {
                    return Err(Error::Dimension("base state does not match K".into()));
                }
                check_normalized(base_state, "base state")?;
                if paulis.len() != count {
                    return Err(Error::Validation(format!("expected {count} Pauli labels")));
                }
                if paulis.iter().flatten().any(|p| p.num_qubits() != k) {
                    return Err(Error::Shape(format!("Pauli labels must have length {k}")));
                }
            }
            Preparation::UnitaryFamily { unitaries } => {
                if unitaries.len() != count {
                    return Err(Error::Validation(format!(
                        "expected {count} unitaries, got {}",
                        unitaries.len()
                    )));
                }
                for u in unitaries {
                    u.require_dim(kdim, "unitary-family member")?;
                    if !u.is_unitary(tolerance::STRUCTURAL) {
                        return Err(Error::Validation("unitary-family member is not unitary".into()));
                    }
                }
                self.noise.circuit_rates(count)?;
            }
            Preparation::Classical { columns } => {
                if columns.len() != count || columns.iter().any(|v| v.len() != kdim) {
                    return Err(Error::Dimension("amplitude table has the wrong shape".into()));
                }
                if self.is_noisy() {
                    return Err(Error::Validation("classical tensors are noiseless".into()));
                }
            }
        }
        match (&self.prep, &self.noise) {
            (Preparation::UnitaryFamily { .. }, _) | (_, NoiseSpec::None) => Ok(()),
            (Preparation::Projection { .. }, n) => n.channel(k + tau).map(|_| ()),
            (_, n) => n.channel(k).map(|_| ()),
        }
    }

    /// Ideal columns `|ψ^i⟩`.
    pub fn columns(&self) -> Vec<StateVector> {
        let kdim = self.dim_out();
        match &self.prep {
            Preparation::InitialState { unitary } => (0..self.dim_in())
                .map(|i| unitary.column(i << (self.k_width - self.tau)))
                .collect(),
            Preparation::Projection { state } => (0..self.dim_in())
                .map(|i| state.rows(i * kdim, kdim).into_owned())
                .collect(),
            Preparation::PauliFamily { base_state, paulis } => paulis
                .iter()
                .map(|p| match p {
                    Some(p) => p.apply(base_state).expect("validated length"),
                    None => StateVector::zeros(kdim),
                })
                .collect(),
            Preparation::UnitaryFamily { unitaries } => {
                unitaries.iter().map(|u| u.column(0)).collect()
            }
            Preparation::Classical { columns } => columns.clone(),
        }
    }

    pub fn expansion_operator(&self) -> Result<ExpansionOperator> {
        self.validate()?;
        Ok(ExpansionOperator {
            matrix: DenseOperator::from_columns(&self.columns())?,
            source: self.label.clone(),
        })
    }

    /// Noise channel acting after the ideal state preparation.
    pub fn noise_channel(&self) -> Result<Channel> {
        match self.kind() {
            PrepKind::Type2 => self.noise.channel(self.k_width + self.tau),
            PrepKind::Type1 | PrepKind::Type3 => self.noise.channel(self.k_width),
            PrepKind::Classical => Ok(Channel::identity(self.dim_out())),
            PrepKind::Type4 => Err(Error::Unsupported(
                "unitary-family noise is specified per circuit".into(),
            )),
        }
    }

    /// Full preparation channel: `W = noise ∘ U` for initial-state tensors, and
    /// `noise ∘ V` with `V|0…0⟩ = |ψ⟩` for projection and Pauli families.
    pub fn preparation_channel(&self) -> Result<Channel> {
        let ideal = match &self.prep {
            Preparation::InitialState { unitary } => unitary.clone(),
            Preparation::Projection { state } => state_preparation_unitary(state)?,
            Preparation::PauliFamily { base_state, .. } => state_preparation_unitary(base_state)?,
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} tensors have no single preparation channel",
                    self.kind()
                )))
            }
        };
        crate::channels::noisy_unitary(ideal, &self.noise)
    }

    /// Noisy expansion map `Ã`; reduces to `X ↦ A X A†` without noise.
    pub fn noisy_map(&self) -> Result<ExpansionMap> {
        self.validate()?;
        let (tau, k) = (self.tau, self.k_width);
        match &self.prep {
            Preparation::InitialState { .. } => {
                Ok(ExpansionMap::Embedding { channel: self.preparation_channel()?, tau, k })
            }
            Preparation::Projection { state } => {
                let sigma = self.noise_channel()?.apply(&DenseOperator::projector(state))?;
                Ok(ExpansionMap::Projection { sigma, tau, k })
            }
            Preparation::PauliFamily { base_state, paulis } => {
                let sigma = self.noise_channel()?.apply(&DenseOperator::projector(base_state))?;
                let paulis = paulis.iter().map(|p| p.as_ref().map(PauliString::matrix)).collect();
                Ok(ExpansionMap::PauliSandwich { sigma, paulis, k })
            }
            Preparation::Classical { .. } => {
                Ok(ExpansionMap::Isometry { a: self.expansion_operator()?.matrix })
            }
            Preparation::UnitaryFamily { .. } => Err(Error::Unsupported(
                "unitary-family tensors have no CP expansion map under noise".into(),
            )),
        }
    }
}

/// `A = Σ_i |ψ^i⟩⟨i|`, shape `2^K × 2^τ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionOperator {
    pub matrix: DenseOperator,
    pub source: Option<String>,
}

pub fn build_expansion_operator(t: &QuantumTensor) -> Result<ExpansionOperator> {
    t.expansion_operator()
}

/// Linear map from `2^τ`-dimensional operators to `2^K`-dimensional ones.
#[derive(Clone, Debug)]
pub enum ExpansionMap {
    /// `X ↦ W(X ⊗ |0…0⟩⟨0…0|)`.
    Embedding { channel: Channel, tau: usize, k: usize },
    /// `X ↦ Σ_ab X_ab ⟨a|σ|b⟩` with the partial matrix element over the index register.
    Projection { sigma: DenseOperator, tau: usize, k: usize },
    /// `X ↦ Σ_ab X_ab P^a σ P^b†`.
    PauliSandwich { sigma: DenseOperator, paulis: Vec<Option<DenseOperator>>, k: usize },
    /// `X ↦ A X A†`.
    Isometry { a: DenseOperator },
}

impl ExpansionMap {
    pub fn dim_in(&self) -> usize {
        match self {
            ExpansionMap::Embedding { tau, .. } | ExpansionMap::Projection { tau, .. } => 1 << tau,
            ExpansionMap::PauliSandwich { paulis, .. } => paulis.len(),
            ExpansionMap::Isometry { a } => a.cols(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            ExpansionMap::Embedding { k, .. }
            | ExpansionMap::Projection { k, .. }
            | ExpansionMap::PauliSandwich { k, .. } => 1 << k,
            ExpansionMap::Isometry { a } => a.rows(),
        }
    }

    pub fn apply(&self, x: &DenseOperator) -> Result<DenseOperator> {
        x.require_dim(self.dim_in(), "expansion map input")?;
        let kdim = self.dim_out();
        match self {
            ExpansionMap::Embedding { channel, tau, k } => {
                let mut zero = DenseOperator::zeros(1 << (k - tau), 1 << (k - tau));
                zero.set(0, 0, crate::linalg::ONE);
                channel.apply(&x.kron(&zero))
            }
            ExpansionMap::Projection { sigma, .. } => {
                let mut out = DenseOperator::zeros(kdim, kdim);
                for a in 0..x.rows() {
                    for b in 0..x.cols() {
                        let xab = x.get(a, b);
                        if xab == ZERO {
                            continue;
                        }
                        for r in 0..kdim {
                            for s in 0..kdim {
                                let v = out.get(r, s) + xab * sigma.get(a * kdim + r, b * kdim + s);
                                out.set(r, s, v);
                            }
                        }
                    }
                }
                Ok(out)
            }
            ExpansionMap::PauliSandwich { sigma, paulis, .. } => {
                let mut out = DenseOperator::zeros(kdim, kdim);
                for (a, pa) in paulis.iter().enumerate() {
                    let Some(pa) = pa else { continue };
                    let left = pa * sigma;
                    for (b, pb) in paulis.iter().enumerate() {
                        let Some(pb) = pb else { continue };
                        let xab = x.get(a, b);
                        if xab != ZERO {
                            out = &out + &(&left * &pb.adjoint()).scale(xab);
                        }
                    }
                }
                Ok(out)
            }
            ExpansionMap::Isometry { a } => Ok(&(a * x) * &a.adjoint()),
        }
    }

    /// Choi matrix `Σ_ab |a⟩⟨b| ⊗ Ã(|a⟩⟨b|)`.
    pub fn choi(&self) -> Result<DenseOperator> {
        let (din, dout) = (self.dim_in(), self.dim_out());
        let mut choi = DenseOperator::zeros(din * dout, din * dout);
        for a in 0..din {
            for b in 0..din {
                let mut unit = DenseOperator::zeros(din, din);
                unit.set(a, b, crate::linalg::ONE);
                let img = self.apply(&unit)?;
                for r in 0..dout {
                    for s in 0..dout {
                        choi.set(a * dout + r, b * dout + s, img.get(r, s));
                    }
                }
            }
        }
        Ok(choi)
    }
}

/// `|i⟩` on the `τ` index register, used by tests and examples.
pub fn index_state(tau: usize, i: usize) -> StateVector {
    basis_state(1 << tau, i)
}
