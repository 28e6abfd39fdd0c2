//! Contraction blocks `M` and `S` assembled from simulated measurement circuits.
//!
//! `M^{ii'}` is the (noisy) matrix element `⟨ψ^i|O|ψ^{i'}⟩` of a tensor;
//! `S` is the same with `O = I`. All values are exact density-matrix traces.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::channels::Channel;
use crate::error::{Error, Result};
use crate::linalg::{
    basis_state, c, kron_states, pauli_decompose, DenseOperator, Pauli, PauliString, StateVector,
    C64, I, ONE, ZERO,
};
use crate::tensors::{Preparation, QuantumTensor};
use crate::tolerance;

/// Where a block came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Provenance {
    pub tensor: Option<String>,
    pub observable: u64,
    pub noisy: bool,
}

/// Contracted `2^τ × 2^τ` blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermitianBlock {
    pub m: DenseOperator,
    pub s: DenseOperator,
    pub tau: usize,
    pub provenance: Provenance,
}

/// Stable hash of an operator's entries.
pub fn observable_hash(o: &DenseOperator) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (o.rows(), o.cols()).hash(&mut h);
    for z in o.matrix().iter() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    h.finish()
}

fn require_hermitian(o: &DenseOperator) -> Result<()> {
    let r = o.hermiticity_residual();
    if r > tolerance::STRUCTURAL {
        return Err(Error::Symmetry(format!("observable is not Hermitian (residual {r:.3e})")));
    }
    Ok(())
}

/// Fills `M` from its upper triangle so the result is exactly Hermitian.
fn hermitian_from_upper(dim: usize, mut entry: impl FnMut(usize, usize) -> Result<C64>) -> Result<DenseOperator> {
    let mut m = DenseOperator::zeros(dim, dim);
    for i in 0..dim {
        m.set(i, i, c(entry(i, i)?.re, 0.0));
        for j in i + 1..dim {
            let v = entry(i, j)?;
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    Ok(m)
}

/// Single-qubit inputs used by the initial-state circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EigenInput {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl EigenInput {
    pub fn state(self) -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = match self {
            EigenInput::Zero => [ONE, ZERO],
            EigenInput::One => [ZERO, ONE],
            EigenInput::Plus => [c(s, 0.0), c(s, 0.0)],
            EigenInput::Minus => [c(s, 0.0), c(-s, 0.0)],
            EigenInput::PlusI => [c(s, 0.0), c(0.0, s)],
            EigenInput::MinusI => [c(s, 0.0), c(0.0, -s)],
        };
        StateVector::from_column_slice(&v)
    }

    /// Signed eigenprojector expansion `P = Σ sign · |e⟩⟨e|`.
    fn expansion(p: Pauli) -> [(f64, EigenInput); 2] {
        match p {
            Pauli::I => [(1.0, EigenInput::Zero), (1.0, EigenInput::One)],
            Pauli::Z => [(1.0, EigenInput::Zero), (-1.0, EigenInput::One)],
            Pauli::X => [(1.0, EigenInput::Plus), (-1.0, EigenInput::Minus)],
            Pauli::Y => [(1.0, EigenInput::PlusI), (-1.0, EigenInput::MinusI)],
        }
    }
}

/// `E(a) = Tr[O · W(|a⟩⟨a| ⊗ |0…0⟩⟨0…0|)]` with memoization over input labels.
struct InitialStateProbe<'a> {
    w: &'a Channel,
    o: &'a DenseOperator,
    tau: usize,
    k: usize,
    cache: HashMap<Vec<EigenInput>, C64>,
}

impl<'a> InitialStateProbe<'a> {
    fn new(w: &'a Channel, o: &'a DenseOperator, tau: usize) -> Result<Self> {
        let k = crate::linalg::qubits_of(w.dim_in())?;
        if tau > k {
            return Err(Error::Shape(format!("τ = {tau} exceeds K = {k}")));
        }
        o.require_dim(w.dim_out(), "observable")?;
        Ok(Self { w, o, tau, k, cache: HashMap::new() })
    }

    fn eval(&mut self, input: &[EigenInput]) -> Result<C64> {
        if let Some(v) = self.cache.get(input) {
            return Ok(*v);
        }
        let mut parts: Vec<StateVector> = input.iter().map(|e| e.state()).collect();
        parts.push(basis_state(1 << (self.k - self.tau), 0));
        let psi = kron_states(&parts)?;
        let v = self.w.expectation_pure(self.o, &psi)?;
        self.cache.insert(input.to_vec(), v);
        Ok(v)
    }

    /// `E(P) = Tr[O W(P ⊗ |0⟩⟨0|)]` through signed product eigen-inputs.
    fn eval_pauli(&mut self, p: &PauliString) -> Result<C64> {
        let mut acc = ZERO;
        for code in 0..1usize << self.tau {
            let mut sign = 1.0;
            let mut input = Vec::with_capacity(self.tau);
            for (j, &letter) in p.labels.iter().enumerate() {
                let (s, e) = EigenInput::expansion(letter)[(code >> (self.tau - 1 - j)) & 1];
                sign *= s;
                input.push(e);
            }
            acc += self.eval(&input)? * sign;
        }
        Ok(acc * p.coefficient)
    }

    /// `M^{ii'} = Tr[O W(|i'⟩⟨i| ⊗ 0)]` via the Pauli expansion of `|i'⟩⟨i|`.
    fn entry(&mut self, i: usize, ip: usize) -> Result<C64> {
        let d = 1 << self.tau;
        let unit = DenseOperator::outer(&basis_state(d, ip), &basis_state(d, i));
        let mut acc = ZERO;
        for p in pauli_decompose(&unit)? {
            acc += self.eval_pauli(&p)?;
        }
        Ok(acc)
    }
}

/// Off-diagonal `M⁰¹` from the six inputs `|0⟩,|1⟩,|±⟩,|±i⟩` (τ = 1).
pub fn type1_off_diagonal_six(w: &Channel, o: &DenseOperator) -> Result<C64> {
    let mut p = InitialStateProbe::new(w, o, 1)?;
    let e = |p: &mut InitialStateProbe, x| p.eval(&[x]);
    let (ep, em) = (e(&mut p, EigenInput::Plus)?, e(&mut p, EigenInput::Minus)?);
    let (epi, emi) = (e(&mut p, EigenInput::PlusI)?, e(&mut p, EigenInput::MinusI)?);
    Ok((ep - em - I * (epi - emi)) * 0.5)
}

/// Off-diagonal `M⁰¹ = E(+) − iE(+i) + ((i−1)/2)(E(0)+E(1))` from four inputs (τ = 1).
pub fn type1_off_diagonal_four(w: &Channel, o: &DenseOperator) -> Result<C64> {
    let mut p = InitialStateProbe::new(w, o, 1)?;
    let e0 = p.eval(&[EigenInput::Zero])?;
    let e1 = p.eval(&[EigenInput::One])?;
    let ep = p.eval(&[EigenInput::Plus])?;
    let epi = p.eval(&[EigenInput::PlusI])?;
    Ok(ep - I * epi + (I - ONE) * 0.5 * (e0 + e1))
}

/// `M` of an initial-state tensor with preparation channel `W` on `K` qubits.
pub fn type1_matrix(w: &Channel, o: &DenseOperator, tau: usize) -> Result<DenseOperator> {
    require_hermitian(o)?;
    let mut probe = InitialStateProbe::new(w, o, tau)?;
    if tau == 1 {
        let e0 = probe.eval(&[EigenInput::Zero])?;
        let e1 = probe.eval(&[EigenInput::One])?;
        let m01 = type1_off_diagonal_four(w, o)?;
        return DenseOperator::new(2, 2, vec![c(e0.re, 0.0), m01, m01.conj(), c(e1.re, 0.0)]);
    }
    hermitian_from_upper(1 << tau, |i, j| probe.entry(i, j))
}

pub fn contract_type1(w: &Channel, o: &DenseOperator, tau: usize) -> Result<HermitianBlock> {
    let m = type1_matrix(w, o, tau)?;
    Ok(HermitianBlock {
        m,
        // Trace preservation makes S the identity; it is never measured.
        s: DenseOperator::identity(1 << tau),
        tau,
        provenance: Provenance { observable: observable_hash(o), ..Default::default() },
    })
}

/// `M^{ii'} = Tr[(|i⟩⟨i'| ⊗ O) σ]`, `σ = W(|0…0⟩⟨0…0|)` on `τ + K` qubits.
pub fn type2_matrix(w: &Channel, o: &DenseOperator, tau: usize) -> Result<DenseOperator> {
    require_hermitian(o)?;
    let total = crate::linalg::qubits_of(w.dim_in())?;
    if tau >= total {
        return Err(Error::Shape(format!("τ = {tau} leaves no quantum qubits")));
    }
    o.require_dim(1 << (total - tau), "observable")?;
    let sigma = w.apply(&DenseOperator::projector(&basis_state(w.dim_in(), 0)))?;
    let mut cache: HashMap<String, C64> = HashMap::new();
    let d = 1 << tau;
    hermitian_from_upper(d, |i, j| {
        let unit = DenseOperator::outer(&basis_state(d, i), &basis_state(d, j));
        let mut acc = ZERO;
        for p in pauli_decompose(&unit)? {
            let key = p.label();
            let e = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let omega = PauliString::new(ONE, p.labels.clone()).matrix();
                    let v = omega.kron(o).trace_product(&sigma)?;
                    cache.insert(key, v);
                    v
                }
            };
            acc += p.coefficient * e;
        }
        Ok(acc)
    })
}

pub fn contract_type2(w: &Channel, o: &DenseOperator, tau: usize) -> Result<HermitianBlock> {
    let k = crate::linalg::qubits_of(w.dim_in())?.saturating_sub(tau);
    Ok(HermitianBlock {
        m: type2_matrix(w, o, tau)?,
        s: type2_matrix(w, &DenseOperator::identity(1 << k), tau)?,
        tau,
        provenance: Provenance { observable: observable_hash(o), ..Default::default() },
    })
}

/// `M^{ii'} = Tr[P^{i†} O P^{i'} σ]` from Pauli expectations over `σ = W(|0…0⟩⟨0…0|)`.
pub fn type3_matrix(
    w: &Channel,
    o: &DenseOperator,
    paulis: &[Option<PauliString>],
    tau: usize,
) -> Result<DenseOperator> {
    require_hermitian(o)?;
    let k = crate::linalg::qubits_of(w.dim_in())?;
    o.require_dim(1 << k, "observable")?;
    if paulis.len() != 1 << tau {
        return Err(Error::Shape(format!("expected {} Pauli labels", 1 << tau)));
    }
    if paulis.iter().flatten().any(|p| p.num_qubits() != k) {
        return Err(Error::Shape(format!("Pauli labels must have length {k}")));
    }
    let sigma = w.apply(&DenseOperator::projector(&basis_state(w.dim_in(), 0)))?;
    let terms = pauli_decompose(o)?;
    let mut cache: HashMap<String, C64> = HashMap::new();
    let mut expect = |p: &PauliString| -> Result<C64> {
        let key = p.label();
        let v = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let v = PauliString::new(ONE, p.labels.clone()).trace_with(&sigma)?;
                cache.insert(key, v);
                v
            }
        };
        Ok(p.coefficient * v)
    };
    hermitian_from_upper(1 << tau, |i, j| {
        let (Some(pi), Some(pj)) = (&paulis[i], &paulis[j]) else {
            return Ok(ZERO);
        };
        let left = PauliString::new(pi.coefficient.conj(), pi.labels.clone());
        let mut acc = ZERO;
        for q in &terms {
            acc += expect(&left.mul(q)?.mul(pj)?)?;
        }
        Ok(acc)
    })
}

pub fn contract_type3(
    w: &Channel,
    o: &DenseOperator,
    paulis: &[Option<PauliString>],
    tau: usize,
) -> Result<HermitianBlock> {
    let k = crate::linalg::qubits_of(w.dim_in())?;
    Ok(HermitianBlock {
        m: type3_matrix(w, o, paulis, tau)?,
        s: type3_matrix(w, &DenseOperator::identity(1 << k), paulis, tau)?,
        tau,
        provenance: Provenance { observable: observable_hash(o), ..Default::default() },
    })
}

/// Controlled-`U` on an ancilla (most significant) plus `K` qubits.
fn controlled(u: &DenseOperator, on_one: bool) -> DenseOperator {
    let d = u.rows();
    let id = DenseOperator::identity(d);
    let (a, b) = if on_one { (&id, u) } else { (u, &id) };
    let mut out = DenseOperator::zeros(2 * d, 2 * d);
    for r in 0..d {
        for s in 0..d {
            out.set(r, s, a.get(r, s));
            out.set(d + r, d + s, b.get(r, s));
        }
    }
    out
}

/// Hadamard-test value `Re(e^{-iα} ⟨ψ^i|O|ψ^{i'}⟩)` with depolarizing `q_i`, `q_{i'}`
/// on `K + 1` qubits after the respective controlled unitaries.
fn hadamard_test(
    ui: &DenseOperator,
    uj: &DenseOperator,
    o: &DenseOperator,
    qi: f64,
    qj: f64,
    alpha: f64,
) -> Result<f64> {
    let d = ui.rows();
    let k1 = crate::linalg::qubits_of(2 * d)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let anc = StateVector::from_column_slice(&[c(s, 0.0), C64::from_polar(s, alpha)]);
    let psi = anc.kronecker(&basis_state(d, 0));
    let first = Channel::compose(Channel::depolarizing(k1, qi)?, Channel::Unitary(controlled(ui, true)))?;
    let second = Channel::compose(Channel::depolarizing(k1, qj)?, Channel::Unitary(controlled(uj, false)))?;
    let circuit = Channel::compose(second, first)?;
    let readout = Pauli::X.matrix().kron(o);
    Ok(circuit.expectation_pure(&readout, &psi)?.re)
}

/// Unitary-family `M` with diagonal rates `p` and interference rates `q`.
pub fn type4_matrix(
    unitaries: &[DenseOperator],
    o: &DenseOperator,
    p: &[f64],
    q: &[f64],
) -> Result<DenseOperator> {
    require_hermitian(o)?;
    let n = unitaries.len();
    if n == 0 || p.len() != n || q.len() != n {
        return Err(Error::Validation("one unitary and two rates per index are required".into()));
    }
    let k = unitaries[0].num_qubits()?;
    o.require_dim(1 << k, "observable")?;
    hermitian_from_upper(n, |i, j| {
        if i == j {
            let w = Channel::compose(Channel::depolarizing(k, p[i])?, Channel::Unitary(unitaries[i].clone()))?;
            return w.expectation_pure(o, &basis_state(1 << k, 0));
        }
        let re = hadamard_test(&unitaries[i], &unitaries[j], o, q[i], q[j], 0.0)?;
        let im = hadamard_test(&unitaries[i], &unitaries[j], o, q[i], q[j], std::f64::consts::FRAC_PI_2)?;
        Ok(c(re, im))
    })
}

pub fn contract_type4(
    unitaries: &[DenseOperator],
    o: &DenseOperator,
    p: &[f64],
    q: &[f64],
    tau: usize,
) -> Result<HermitianBlock> {
    if unitaries.len() != 1 << tau {
        return Err(Error::Validation(format!("expected {} unitaries", 1 << tau)));
    }
    let k = unitaries[0].num_qubits()?;
    let mut s = type4_matrix(unitaries, &DenseOperator::identity(1 << k), p, q)?;
    for i in 0..s.rows() {
        s.set(i, i, ONE);
    }
    Ok(HermitianBlock {
        m: type4_matrix(unitaries, o, p, q)?,
        s,
        tau,
        provenance: Provenance { observable: observable_hash(o), ..Default::default() },
    })
}

/// `M = A† O A`, `S = A† A` for a stored amplitude table.
pub fn contract_classical(a: &DenseOperator, o: &DenseOperator) -> Result<HermitianBlock> {
    o.require_dim(a.rows(), "observable")?;
    let ad = a.adjoint();
    let tau = crate::linalg::qubits_of(a.cols())?;
    Ok(HermitianBlock {
        m: (&(&ad * o) * a).hermitian_part(),
        s: (&ad * a).hermitian_part(),
        tau,
        provenance: Provenance { observable: observable_hash(o), ..Default::default() },
    })
}

/// `M` of any tensor for observable `o`.
pub fn contract_operator(t: &QuantumTensor, o: &DenseOperator) -> Result<DenseOperator> {
    match &t.prep {
        Preparation::InitialState { .. } => type1_matrix(&t.preparation_channel()?, o, t.tau),
        Preparation::Projection { .. } => type2_matrix(&t.preparation_channel()?, o, t.tau),
        Preparation::PauliFamily { paulis, .. } => {
            type3_matrix(&t.preparation_channel()?, o, paulis, t.tau)
        }
        Preparation::UnitaryFamily { unitaries } => {
            let (p, q) = t.noise.circuit_rates(unitaries.len())?;
            type4_matrix(unitaries, o, &p, &q)
        }
        Preparation::Classical { .. } => {
            let a = t.expansion_operator()?.matrix;
            o.require_dim(a.rows(), "observable")?;
            Ok((&(&a.adjoint() * o) * &a).hermitian_part())
        }
    }
}

/// Blocks `M` (for `o`) and `S` (for `I`) of a single tensor.
pub fn contract(t: &QuantumTensor, o: &DenseOperator) -> Result<HermitianBlock> {
    t.validate()?;
    let mut block = match &t.prep {
        Preparation::InitialState { .. } => contract_type1(&t.preparation_channel()?, o, t.tau)?,
        Preparation::Projection { .. } => contract_type2(&t.preparation_channel()?, o, t.tau)?,
        Preparation::PauliFamily { paulis, .. } => {
            contract_type3(&t.preparation_channel()?, o, paulis, t.tau)?
        }
        Preparation::UnitaryFamily { unitaries } => {
            let (p, q) = t.noise.circuit_rates(unitaries.len())?;
            contract_type4(unitaries, o, &p, &q, t.tau)?
        }
        Preparation::Classical { .. } => contract_classical(&t.expansion_operator()?.matrix, o)?,
    };
    block.provenance.tensor = t.label.clone();
    block.provenance.noisy = t.is_noisy();
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h() -> DenseOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DenseOperator::from_real(2, 2, &[s, s, s, -s]).unwrap()
    }

    fn z() -> DenseOperator {
        Pauli::Z.matrix()
    }

    #[test]
    fn type1_examples() {
        let b = contract_type1(&Channel::Unitary(DenseOperator::identity(2)), &z(), 1).unwrap();
        assert!(b.m.max_abs_diff(&z()) < 1e-15);
        assert_eq!(b.s, DenseOperator::identity(2));
        let b = contract_type1(&Channel::Unitary(h()), &z(), 1).unwrap();
        assert!(b.m.max_abs_diff(&Pauli::X.matrix()) < 1e-15);
        let w = Channel::compose(Channel::depolarizing(1, 0.1).unwrap(), Channel::Unitary(h())).unwrap();
        let b = contract_type1(&w, &z(), 1).unwrap();
        assert!(b.m.max_abs_diff(&Pauli::X.matrix().scale_real(0.9)) < 1e-15);
    }

    #[test]
    fn type2_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_vec(vec![c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        let w = Channel::Unitary(crate::linalg::state_preparation_unitary(&bell).unwrap());
        let b = contract_type2(&w, &z(), 1).unwrap();
        assert!(b.m.max_abs_diff(&DenseOperator::from_real(2, 2, &[0.5, 0., 0., -0.5]).unwrap()) < 1e-15);
        assert!(b.s.max_abs_diff(&DenseOperator::identity(2).scale_real(0.5)) < 1e-15);
        let b = contract_type2(&Channel::identity(4), &z(), 1).unwrap();
        assert!(b.m.max_abs_diff(&DenseOperator::from_real(2, 2, &[1., 0., 0., 0.]).unwrap()) < 1e-15);
        assert!(b.s.max_abs_diff(&DenseOperator::from_real(2, 2, &[1., 0., 0., 0.]).unwrap()) < 1e-15);
    }

    #[test]
    fn type3_examples() {
        let ix = [Some(PauliString::parse("I").unwrap()), Some(PauliString::parse("X").unwrap())];
        let b = contract_type3(&Channel::identity(2), &z(), &ix, 1).unwrap();
        assert!(b.m.max_abs_diff(&z()) < 1e-15);
        assert!(b.s.max_abs_diff(&DenseOperator::identity(2)) < 1e-15);
        let iz = [Some(PauliString::parse("I").unwrap()), Some(PauliString::parse("Z").unwrap())];
        let b = contract_type3(&Channel::Unitary(h()), &Pauli::X.matrix(), &iz, 1).unwrap();
        assert!(b.m.max_abs_diff(&z()) < 1e-15);
        assert!(b.s.max_abs_diff(&DenseOperator::identity(2)) < 1e-15);
        let mixed = Channel::depolarizing(1, 1.0).unwrap();
        let b = contract_type3(&mixed, &z(), &ix, 1).unwrap();
        assert!(b.m.max_abs() < 1e-15);
        assert!(b.s.max_abs_diff(&DenseOperator::identity(2)) < 1e-15);
    }

    #[test]
    fn type4_examples() {
        let us = [DenseOperator::identity(2), Pauli::X.matrix()];
        let b = contract_type4(&us, &z(), &[0.0, 0.0], &[0.0, 0.0], 1).unwrap();
        assert!(b.m.max_abs_diff(&z()) < 1e-14);
        assert!(b.s.max_abs_diff(&DenseOperator::identity(2)) < 1e-14);
        let b = contract_type4(&us, &z(), &[0.5, 0.5], &[0.0, 0.0], 1).unwrap();
        assert!(b.m.max_abs_diff(&z().scale_real(0.5)) < 1e-14);
        let us = [DenseOperator::identity(2), h()];
        let b = contract_type4(&us, &z(), &[0.0, 0.0], &[0.1, 0.1], 1).unwrap();
        let expect = 0.81 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.m.get(0, 1) - c(expect, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn classical_zero_column_gives_zero_row() {
        let a = DenseOperator::from_columns(&[basis_state(2, 0), StateVector::zeros(2)]).unwrap();
        let b = contract_classical(&a, &z()).unwrap();
        assert_eq!(b.m.get(1, 1), ZERO);
        assert_eq!(b.s.get(1, 0), ZERO);
        assert_eq!(b.s.get(0, 0), ONE);
    }

    #[test]
    fn type1_rejects_wide_register() {
        let err = contract_type1(&Channel::identity(2), &z(), 2);
        assert!(matches!(err, Err(Error::Shape(_))));
    }
}
