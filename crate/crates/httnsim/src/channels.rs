//! Quantum channels: unitary, global depolarizing, Kraus lists, and their
//! sequential and parallel compositions.
//!
//! Every channel acts as a linear map on arbitrary (not necessarily density)
//! operators, which the contraction routines rely on when feeding matrix units
//! such as `|i'⟩⟨i| ⊗ |0⟩⟨0|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    all_pauli_strings, apply_local_map, min_eigenvalue, qubits_of, DenseOperator,
    StateVector, C64,
};
use crate::tolerance;

#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Identity { dim: usize },
    Unitary(DenseOperator),
    /// `X ↦ (1−ε)X + ε Tr[X] I/d`, kept in affine form.
    Depolarizing { dim: usize, rate: f64 },
    /// Kraus operators of shape `dim_out × dim_in`.
    Kraus(Vec<DenseOperator>),
    /// `outer ∘ inner`.
    Compose { outer: Box<Channel>, inner: Box<Channel> },
    /// Parallel action, first factor on the most significant qubits.
    Tensor(Vec<Channel>),
}

impl Channel {
    pub fn identity(dim: usize) -> Self {
        Channel::Identity { dim }
    }

    pub fn unitary(u: DenseOperator) -> Result<Self> {
        u.require_square()?;
        if !u.is_unitary(tolerance::STRUCTURAL) {
            return Err(Error::Validation("operator is not unitary".into()));
        }
        Ok(Channel::Unitary(u))
    }

    pub fn depolarizing(n_qubits: usize, rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Range(format!("depolarizing rate {rate} outside [0, 1]")));
        }
        Ok(Channel::Depolarizing { dim: 1 << n_qubits, rate })
    }

    pub fn kraus(ops: Vec<DenseOperator>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::Argument("empty Kraus list".into()))?;
        let (rows, cols) = (first.rows(), first.cols());
        if ops.iter().any(|k| k.rows() != rows || k.cols() != cols) {
            return Err(Error::Dimension("Kraus operators have different shapes".into()));
        }
        let ch = Channel::Kraus(ops);
        if !ch.is_trace_preserving(tolerance::STRUCTURAL) {
            return Err(Error::Validation("Kraus operators do not sum to identity".into()));
        }
        Ok(ch)
    }

    pub fn compose(outer: Channel, inner: Channel) -> Result<Self> {
        if outer.dim_in() != inner.dim_out() {
            return Err(Error::Dimension(format!(
                "cannot compose: outer takes {} but inner yields {}",
                outer.dim_in(),
                inner.dim_out()
            )));
        }
        Ok(Channel::Compose { outer: Box::new(outer), inner: Box::new(inner) })
    }

    pub fn tensor(factors: Vec<Channel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Argument("empty channel list".into()));
        }
        Ok(Channel::Tensor(factors))
    }

    pub fn dim_in(&self) -> usize {
        match self {
            Channel::Identity { dim } | Channel::Depolarizing { dim, .. } => *dim,
            Channel::Unitary(u) => u.cols(),
            Channel::Kraus(ops) => ops[0].cols(),
            Channel::Compose { inner, .. } => inner.dim_in(),
            Channel::Tensor(fs) => fs.iter().map(Channel::dim_in).product(),
        }
    }

    pub fn dim_out(&self) -> usize {
        match self {
            Channel::Identity { dim } | Channel::Depolarizing { dim, .. } => *dim,
            Channel::Unitary(u) => u.rows(),
            Channel::Kraus(ops) => ops[0].rows(),
            Channel::Compose { outer, .. } => outer.dim_out(),
            Channel::Tensor(fs) => fs.iter().map(Channel::dim_out).product(),
        }
    }

    /// `Φ(X)`.
    pub fn apply(&self, x: &DenseOperator) -> Result<DenseOperator> {
        x.require_dim(self.dim_in(), "channel input")?;
        match self {
            Channel::Identity { .. } => Ok(x.clone()),
            Channel::Unitary(u) => Ok(&(u * x) * &u.adjoint()),
            Channel::Depolarizing { dim, rate } => Ok(depolarize(x, *dim, *rate)),
            Channel::Kraus(ops) => {
                let mut acc = DenseOperator::zeros(self.dim_out(), self.dim_out());
                for k in ops {
                    acc = &acc + &(&(k * x) * &k.adjoint());
                }
                Ok(acc)
            }
            Channel::Compose { outer, inner } => outer.apply(&inner.apply(x)?),
            Channel::Tensor(fs) => {
                let dims = fs.iter().map(|f| (f.dim_in(), f.dim_out())).collect::<Vec<_>>();
                tensor_apply(fs, &dims, x, |f, u| f.apply(u))
            }
        }
    }

    /// Heisenberg-picture map `Φ†(O)`, so that `Tr[O Φ(X)] = Tr[Φ†(O) X]`.
    pub fn adjoint_apply(&self, o: &DenseOperator) -> Result<DenseOperator> {
        o.require_dim(self.dim_out(), "channel adjoint input")?;
        match self {
            Channel::Identity { .. } => Ok(o.clone()),
            Channel::Unitary(u) => Ok(&(&u.adjoint() * o) * u),
            Channel::Depolarizing { dim, rate } => Ok(depolarize(o, *dim, *rate)),
            Channel::Kraus(ops) => {
                let mut acc = DenseOperator::zeros(self.dim_in(), self.dim_in());
                for k in ops {
                    acc = &acc + &(&(&k.adjoint() * o) * k);
                }
                Ok(acc)
            }
            Channel::Compose { outer, inner } => inner.adjoint_apply(&outer.adjoint_apply(o)?),
            Channel::Tensor(fs) => {
                let dims = fs.iter().map(|f| (f.dim_out(), f.dim_in())).collect::<Vec<_>>();
                tensor_apply(fs, &dims, o, |f, u| f.adjoint_apply(u))
            }
        }
    }

    /// `Tr[O Φ(|ψ⟩⟨ψ|)]` for a (possibly unnormalized) pure input.
    pub fn expectation_pure(&self, o: &DenseOperator, psi: &StateVector) -> Result<C64> {
        if psi.len() != self.dim_in() {
            return Err(Error::Dimension("pure input has wrong dimension".into()));
        }
        match self {
            Channel::Identity { .. } => o.expectation(psi),
            Channel::Unitary(u) => o.expectation(&u.apply(psi)?),
            Channel::Depolarizing { dim, rate } => {
                o.require_dim(*dim, "observable")?;
                let mixed = o.trace() * (psi.norm_squared() / *dim as f64);
                Ok(o.expectation(psi)? * (1.0 - rate) + mixed * *rate)
            }
            Channel::Compose { outer, inner } => match (outer.as_ref(), inner.as_ref()) {
                (_, Channel::Unitary(u)) => outer.expectation_pure(o, &u.apply(psi)?),
                (_, Channel::Identity { .. }) => outer.expectation_pure(o, psi),
                (Channel::Depolarizing { dim, rate }, _) => {
                    o.require_dim(*dim, "observable")?;
                    let mixed = o.trace() * (psi.norm_squared() / *dim as f64);
                    Ok(inner.expectation_pure(o, psi)? * (1.0 - rate) + mixed * *rate)
                }
                _ => self.expectation(o, &DenseOperator::projector(psi)),
            },
            _ => self.expectation(o, &DenseOperator::projector(psi)),
        }
    }

    /// `Tr[O Φ(X)]`.
    pub fn expectation(&self, o: &DenseOperator, x: &DenseOperator) -> Result<C64> {
        o.trace_product(&self.apply(x)?)
    }

    /// A Kraus realization of the channel.
    pub fn kraus_ops(&self) -> Result<Vec<DenseOperator>> {
        match self {
            Channel::Identity { dim } => Ok(vec![DenseOperator::identity(*dim)]),
            Channel::Unitary(u) => Ok(vec![u.clone()]),
            Channel::Depolarizing { dim, rate } => {
                let n = qubits_of(*dim)?;
                let w = rate / (*dim * *dim) as f64;
                Ok(all_pauli_strings(n)
                    .into_iter()
                    .enumerate()
                    .map(|(k, p)| {
                        let weight = if k == 0 { 1.0 - rate + w } else { w };
                        p.matrix().scale_real(weight.sqrt())
                    })
                    .collect())
            }
            Channel::Kraus(ops) => Ok(ops.clone()),
            Channel::Compose { outer, inner } => {
                let (ko, ki) = (outer.kraus_ops()?, inner.kraus_ops()?);
                Ok(ko.iter().flat_map(|a| ki.iter().map(move |b| a * b)).collect())
            }
            Channel::Tensor(fs) => {
                let mut acc = vec![DenseOperator::identity(1)];
                for f in fs {
                    let ks = f.kraus_ops()?;
                    acc = acc.iter().flat_map(|a| ks.iter().map(move |b| a.kron(b))).collect();
                }
                Ok(acc)
            }
        }
    }

    /// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` built from the Kraus realization.
    pub fn choi(&self) -> Result<DenseOperator> {
        let (din, dout) = (self.dim_in(), self.dim_out());
        let mut acc = DenseOperator::zeros(din * dout, din * dout);
        for k in self.kraus_ops()? {
            // vec(K) with the input index most significant.
            let v = StateVector::from_fn(din * dout, |idx, _| k.get(idx % dout, idx / dout));
            acc = &acc + &DenseOperator::projector(&v);
        }
        Ok(acc)
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.adjoint_apply(&DenseOperator::identity(self.dim_out()))
            .is_ok_and(|m| m.max_abs_diff(&DenseOperator::identity(self.dim_in())) <= tol)
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        self.choi().and_then(|m| min_eigenvalue(&m)).is_ok_and(|e| e >= -tol)
    }
}

fn depolarize(x: &DenseOperator, dim: usize, rate: f64) -> DenseOperator {
    let mix = x.trace() * (rate / dim as f64);
    let mut out = x.scale_real(1.0 - rate);
    for i in 0..dim {
        out.set(i, i, out.get(i, i) + mix);
    }
    out
}

/// Applies factor maps one after another; `dims[k]` is the (in, out) size of factor `k`.
fn tensor_apply(
    fs: &[Channel],
    dims: &[(usize, usize)],
    x: &DenseOperator,
    f: impl Fn(&Channel, &DenseOperator) -> Result<DenseOperator>,
) -> Result<DenseOperator> {
    let mut current = x.clone();
    for k in 0..fs.len() {
        let before: usize = dims[..k].iter().map(|d| d.1).product();
        let after: usize = dims[k + 1..].iter().map(|d| d.0).product();
        current = apply_local_map(&current, before, dims[k].0, after, |u| f(&fs[k], u))?;
    }
    Ok(current)
}

/// Noise attached to a tensor preparation.
///
/// The qubit count is taken from the tensor the noise is attached to.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    Depolarizing { rate: f64 },
    Kraus { ops: Vec<DenseOperator> },
    /// Per-circuit depolarizing rates of a unitary-family tensor: `diagonal[i]`
    /// for the direct preparation of index `i`, `off_diagonal[i]` after each
    /// controlled application of `U^i` in an interference circuit.
    CircuitDepolarizing { diagonal: Vec<f64>, off_diagonal: Vec<f64> },
}

impl NoiseSpec {
    pub fn is_none(&self) -> bool {
        match self {
            NoiseSpec::None => true,
            NoiseSpec::Depolarizing { rate } => *rate == 0.0,
            NoiseSpec::CircuitDepolarizing { diagonal, off_diagonal } => {
                diagonal.iter().chain(off_diagonal).all(|&r| r == 0.0)
            }
            NoiseSpec::Kraus { .. } => false,
        }
    }

    /// Channel acting on `n_qubits` after the ideal preparation.
    pub fn channel(&self, n_qubits: usize) -> Result<Channel> {
        match self {
            NoiseSpec::None => Ok(Channel::identity(1 << n_qubits)),
            NoiseSpec::Depolarizing { rate } => Channel::depolarizing(n_qubits, *rate),
            NoiseSpec::Kraus { ops } => {
                let ch = Channel::kraus(ops.clone())?;
                if ch.dim_in() != 1 << n_qubits || ch.dim_out() != 1 << n_qubits {
                    return Err(Error::Dimension(format!(
                        "Kraus noise must act on {n_qubits} qubits"
                    )));
                }
                Ok(ch)
            }
            NoiseSpec::CircuitDepolarizing { .. } => Err(Error::Unsupported(
                "per-circuit rates apply only to unitary-family tensors".into(),
            )),
        }
    }

    /// `(p, q)` rates for a unitary-family tensor with `count` unitaries.
    pub fn circuit_rates(&self, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let check = |v: &[f64]| -> Result<()> {
            if v.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(Error::Range("depolarizing rate outside [0, 1]".into()));
            }
            Ok(())
        };
        match self {
            NoiseSpec::None => Ok((vec![0.0; count], vec![0.0; count])),
            NoiseSpec::Depolarizing { rate } => {
                check(&[*rate])?;
                Ok((vec![*rate; count], vec![*rate; count]))
            }
            NoiseSpec::CircuitDepolarizing { diagonal, off_diagonal } => {
                if diagonal.len() != count || off_diagonal.len() != count {
                    return Err(Error::Validation(format!("expected {count} rates per list")));
                }
                check(diagonal)?;
                check(off_diagonal)?;
                Ok((diagonal.clone(), off_diagonal.clone()))
            }
            NoiseSpec::Kraus { .. } => Err(Error::Unsupported(
                "Kraus noise is not supported for unitary-family tensors".into(),
            )),
        }
    }
}

/// Channel `noise ∘ U`.
pub fn noisy_unitary(u: DenseOperator, noise: &NoiseSpec) -> Result<Channel> {
    let n = u.num_qubits()?;
    let ideal = Channel::unitary(u)?;
    if noise.is_none() {
        return Ok(ideal);
    }
    Channel::compose(noise.channel(n)?, ideal)
}

/// Parallel composition, first factor on the most significant qubits.
pub fn tensor_channels(list: Vec<Channel>) -> Result<Channel> {
    Channel::tensor(list)
}

/// Sequential composition `outer ∘ inner`.
pub fn compose_channels(outer: Channel, inner: Channel) -> Result<Channel> {
    Channel::compose(outer, inner)
}

/// Global depolarizing channel on `n_qubits`.
pub fn make_depolarizing(n_qubits: usize, rate: f64) -> Result<Channel> {
    Channel::depolarizing(n_qubits, rate)
}

/// `Σ K ρ K†`.
pub fn apply_channel(ch: &Channel, rho: &DenseOperator) -> Result<DenseOperator> {
    ch.apply(rho)
}
