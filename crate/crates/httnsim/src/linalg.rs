//! Dense complex linear algebra, Pauli algebra and Hermitian spectral tools.
//!
//! Qubit ordering is fixed crate-wide: in a Kronecker product the left factor
//! holds the most significant qubits, and qubit 0 of an `n`-qubit register is
//! the most significant bit of the basis index.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tolerance;

pub type C64 = Complex64;
pub type StateVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Number of qubits for a power-of-two dimension.
pub fn qubits_of(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Dimension(format!("{dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Computational basis vector `|index⟩` of a `dim`-dimensional space.
pub fn basis_state(dim: usize, index: usize) -> StateVector {
    let mut v = StateVector::zeros(dim);
    v[index] = ONE;
    v
}

/// Kronecker product of state vectors, left factor most significant.
pub fn kron_states(states: &[StateVector]) -> Result<StateVector> {
    let (first, rest) = states
        .split_first()
        .ok_or_else(|| Error::Argument("empty state list".into()))?;
    let mut out = first.clone();
    for s in rest {
        out = out.kronecker(s);
    }
    Ok(out)
}

/// Complex matrix with explicit dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator(DMatrix<C64>);

impl DenseOperator {
    /// Builds from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("operator dimensions must be positive".into()));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} operator",
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_matrix(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    /// Builds from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Operator whose columns are the given vectors.
    pub fn from_columns(columns: &[StateVector]) -> Result<Self> {
        let first = columns
            .first()
            .ok_or_else(|| Error::Argument("empty column list".into()))?;
        if columns.iter().any(|v| v.len() != first.len()) {
            return Err(Error::Dimension("columns have different lengths".into()));
        }
        Ok(Self(DMatrix::from_columns(columns)))
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        Self(a * b.adjoint())
    }

    /// `|v⟩⟨v|`.
    pub fn projector(v: &StateVector) -> Self {
        Self::outer(v, v)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, value: C64) {
        self.0[(r, c)] = value;
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Row-major entries.
    pub fn entries(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for col in 0..self.cols() {
                out.push(self.0[(r, col)]);
            }
        }
        out
    }

    pub fn column(&self, j: usize) -> StateVector {
        self.0.column(j).into_owned()
    }

    /// Qubit count of a square power-of-two operator.
    pub fn num_qubits(&self) -> Result<usize> {
        self.require_square()?;
        qubits_of(self.rows())
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "expected a square operator, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }

    pub fn require_dim(&self, dim: usize, what: &str) -> Result<()> {
        if self.rows() == dim && self.cols() == dim {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: expected {dim}x{dim}, got {}x{}",
                self.rows(),
                self.cols()
            )))
        }
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        if self.rows() != other.cols() || self.cols() != other.rows() {
            return Err(Error::Dimension("trace_product shape mismatch".into()));
        }
        let mut acc = ZERO;
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        Ok(acc)
    }

    /// `⟨v|self|v⟩`.
    pub fn expectation(&self, v: &StateVector) -> Result<C64> {
        if !self.is_square() || self.cols() != v.len() {
            return Err(Error::Dimension("expectation shape mismatch".into()));
        }
        Ok(v.dotc(&(&self.0 * v)))
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if self.cols() != v.len() {
            return Err(Error::Dimension("operator-vector shape mismatch".into()));
        }
        Ok(&self.0 * v)
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(Self(&self.0 * &rhs.0))
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self(&self.0 + &rhs.0))
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self(&self.0 - &rhs.0))
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self(self.0.component_mul(&rhs.0)))
    }

    fn same_shape(&self, rhs: &Self) -> Result<()> {
        if self.rows() != rhs.rows() || self.cols() != rhs.cols() {
            return Err(Error::Dimension(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                rhs.rows(),
                rhs.cols()
            )));
        }
        Ok(())
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        Self(self.0.kronecker(&rhs.0))
    }

    /// Largest elementwise modulus of `self - rhs`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        if self.rows() != rhs.rows() || self.cols() != rhs.cols() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(rhs.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A − A†|` elementwise; infinite for non-square operators.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && Self(self.0.adjoint() * &self.0).max_abs_diff(&Self::identity(self.rows())) <= tol
    }

    /// Trace one and spectrum bounded below by `-tol`.
    pub fn is_density(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) || (self.trace() - ONE).norm() > tol {
            return false;
        }
        min_eigenvalue(&self.hermitian_part()).is_ok_and(|e| e >= -tol)
    }

    /// Nested rows of `[re, im]` pairs.
    pub fn to_nested(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows())
            .map(|r| (0..self.cols()).map(|col| [self.0[(r, col)].re, self.0[(r, col)].im]).collect())
            .collect()
    }

    pub fn from_nested(rows: &[Vec<[f64; 2]>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        let entries = rows.iter().flatten().map(|z| c(z[0], z[1])).collect();
        Self::new(nrows, ncols, entries)
    }
}

impl Serialize for DenseOperator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested().serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PauliTerm {
    coefficient: f64,
    pauli: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OperatorRepr {
    Nested(Vec<Vec<[f64; 2]>>),
    Named(String),
    Terms(Vec<PauliTerm>),
}

/// Accepts nested `[re, im]` rows, a gate or Pauli-label name, or a list of
/// `{"coefficient", "pauli"}` terms. Always serializes as nested rows.
impl<'de> Deserialize<'de> for DenseOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let op = match OperatorRepr::deserialize(d)? {
            OperatorRepr::Nested(rows) => Self::from_nested(&rows),
            OperatorRepr::Named(name) => named_operator(&name),
            OperatorRepr::Terms(terms) => terms
                .iter()
                .map(|t| PauliString::parse(&t.pauli).map(|p| PauliString::new(p.coefficient * t.coefficient, p.labels)))
                .collect::<Result<Vec<_>>>()
                .and_then(|ps| pauli_sum(&ps)),
        };
        op.map_err(serde::de::Error::custom)
    }
}

/// `H`, `S`, `T`, `CNOT`, `CZ`, `SWAP`, or a Pauli label such as `"XIZ"`.
pub fn named_operator(name: &str) -> Result<DenseOperator> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let real = |n: usize, e: &[f64]| DenseOperator::from_real(n, n, e);
    match name {
        "H" => real(2, &[r, r, r, -r]),
        "S" => Ok(DenseOperator::from_diagonal(&[ONE, I])),
        "T" => Ok(DenseOperator::from_diagonal(&[ONE, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)])),
        "CNOT" => real(4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]),
        "CZ" => real(4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.]),
        "SWAP" => real(4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]),
        _ if !name.is_empty() && name.chars().all(|ch| "IXYZ".contains(ch)) => {
            Ok(PauliString::parse(name)?.matrix())
        }
        _ => Err(Error::Argument(format!("unknown operator name {name:?}"))),
    }
}

/// Product state from one letter per qubit (`0`, `1`, `+`, `-`), or `"bell"`.
pub fn named_state(name: &str) -> Result<StateVector> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    if name == "bell" {
        return Ok(StateVector::from_vec(vec![c(r, 0.0), ZERO, ZERO, c(r, 0.0)]));
    }
    if name.is_empty() {
        return Err(Error::Argument("empty state name".into()));
    }
    let factors = name
        .chars()
        .map(|ch| match ch {
            '0' => Ok(basis_state(2, 0)),
            '1' => Ok(basis_state(2, 1)),
            '+' => Ok(StateVector::from_vec(vec![c(r, 0.0), c(r, 0.0)])),
            '-' => Ok(StateVector::from_vec(vec![c(r, 0.0), c(-r, 0.0)])),
            _ => Err(Error::Argument(format!("unknown state letter {ch:?} in {name:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    kron_states(&factors)
}

/// Serde for state vectors: a list of `[re, im]` amplitudes, or a name
/// understood by [`named_state`] when parsing.
pub mod state_serde {
    use super::{named_state, StateVector, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum StateRepr {
        Amplitudes(Vec<C64>),
        Named(String),
    }

    impl StateRepr {
        pub(crate) fn into_state<E: serde::de::Error>(self) -> Result<StateVector, E> {
            match self {
                StateRepr::Amplitudes(v) => Ok(StateVector::from_vec(v)),
                StateRepr::Named(n) => named_state(&n).map_err(E::custom),
            }
        }
    }

    pub fn serialize<S: Serializer>(v: &StateVector, s: S) -> Result<S::Ok, S::Error> {
        v.iter().copied().collect::<Vec<C64>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<StateVector, D::Error> {
        StateRepr::deserialize(d)?.into_state()
    }
}

/// Serde for lists of state vectors, element-wise as in [`state_serde`].
pub mod states_serde {
    use super::state_serde::StateRepr;
    use super::{StateVector, C64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[StateVector], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.iter().copied().collect::<Vec<C64>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<StateVector>, D::Error> {
        Vec::<StateRepr>::deserialize(d)?.into_iter().map(StateRepr::into_state).collect()
    }
}

impl Mul for &DenseOperator {
    type Output = DenseOperator;
    /// Panics on shape mismatch; use [`DenseOperator::try_mul`] for a checked product.
    fn mul(self, rhs: Self) -> DenseOperator {
        DenseOperator(&self.0 * &rhs.0)
    }
}

impl Add for &DenseOperator {
    type Output = DenseOperator;
    fn add(self, rhs: Self) -> DenseOperator {
        DenseOperator(&self.0 + &rhs.0)
    }
}

impl Sub for &DenseOperator {
    type Output = DenseOperator;
    fn sub(self, rhs: Self) -> DenseOperator {
        DenseOperator(&self.0 - &rhs.0)
    }
}

/// Kronecker product of a nonempty list, left factor most significant.
pub fn tensor_product(ops: &[DenseOperator]) -> Result<DenseOperator> {
    let (first, rest) = ops
        .split_first()
        .ok_or_else(|| Error::Argument("tensor_product of an empty list".into()))?;
    let mut out = first.clone();
    for op in rest {
        out = out.kron(op);
    }
    Ok(out)
}

/// `n`-fold Kronecker power.
pub fn tensor_power(op: &DenseOperator, n: usize) -> Result<DenseOperator> {
    tensor_product(&vec![op.clone(); n])
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> DenseOperator {
        let e = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        DenseOperator::from_matrix(DMatrix::from_row_slice(2, 2, &e))
    }

    pub fn from_char(ch: char) -> Result<Self> {
        match ch.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Argument(format!("'{other}' is not a Pauli letter"))),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// `self · other = phase · result`.
    pub fn mul(self, other: Pauli) -> (C64, Pauli) {
        use Pauli::{X, Y, Z};
        let im = I;
        match (self, other) {
            (Pauli::I, p) | (p, Pauli::I) => (ONE, p),
            (a, b) if a == b => (ONE, Pauli::I),
            (X, Y) => (im, Z),
            (Y, X) => (-im, Z),
            (Y, Z) => (im, X),
            (Z, Y) => (-im, X),
            (Z, X) => (im, Y),
            (X, Z) => (-im, Y),
            _ => unreachable!(),
        }
    }

    /// Flips the basis bit.
    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Phase picked up acting on basis bit `b`: `P|b⟩ = phase · |b ⊕ flip⟩`.
    fn phase(self, bit: usize) -> C64 {
        match (self, bit) {
            (Pauli::Y, 0) => I,
            (Pauli::Y, _) => -I,
            (Pauli::Z, 1) => -ONE,
            _ => ONE,
        }
    }
}

/// Scaled tensor product of Pauli letters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coefficient: C64,
    #[serde(with = "pauli_labels")]
    pub labels: Vec<Pauli>,
}

mod pauli_labels {
    use super::Pauli;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(labels: &[Pauli], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&labels.iter().map(|p| p.to_char()).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Pauli>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|ch| Pauli::from_char(ch).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl PauliString {
    pub fn new(coefficient: C64, labels: Vec<Pauli>) -> Self {
        Self { coefficient, labels }
    }

    /// Parses a letter string such as `"XIZ"` with unit coefficient.
    pub fn parse(text: &str) -> Result<Self> {
        let labels = text.chars().map(Pauli::from_char).collect::<Result<Vec<_>>>()?;
        if labels.is_empty() {
            return Err(Error::Argument("empty Pauli string".into()));
        }
        Ok(Self::new(ONE, labels))
    }

    pub fn identity(n: usize) -> Self {
        Self::new(ONE, vec![Pauli::I; n])
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self) -> String {
        self.labels.iter().map(|p| p.to_char()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.labels.iter().all(|&p| p == Pauli::I)
    }

    pub fn matrix(&self) -> DenseOperator {
        let mats: Vec<_> = self.labels.iter().map(|p| p.matrix()).collect();
        tensor_product(&mats)
            .map(|m| m.scale(self.coefficient))
            .unwrap_or_else(|_| DenseOperator::identity(1).scale(self.coefficient))
    }

    /// Product `self · rhs` with accumulated phase.
    pub fn mul(&self, rhs: &PauliString) -> Result<PauliString> {
        if self.num_qubits() != rhs.num_qubits() {
            return Err(Error::Shape("Pauli strings of different length".into()));
        }
        let mut coef = self.coefficient * rhs.coefficient;
        let labels = self
            .labels
            .iter()
            .zip(&rhs.labels)
            .map(|(&a, &b)| {
                let (ph, p) = a.mul(b);
                coef *= ph;
                p
            })
            .collect();
        Ok(PauliString::new(coef, labels))
    }

    /// Bit mask of flipped qubits, qubit 0 most significant.
    fn flip_mask(&self) -> usize {
        let n = self.num_qubits();
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0, |m, (j, _)| m | 1 << (n - 1 - j))
    }

    /// Phase of `P|m⟩` excluding the coefficient.
    fn basis_phase(&self, m: usize) -> C64 {
        let n = self.num_qubits();
        self.labels
            .iter()
            .enumerate()
            .fold(ONE, |acc, (j, p)| acc * p.phase((m >> (n - 1 - j)) & 1))
    }

    /// `P|v⟩` without building the matrix.
    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.len() != 1 << self.num_qubits() {
            return Err(Error::Dimension("Pauli string / state size mismatch".into()));
        }
        let mask = self.flip_mask();
        let mut out = StateVector::zeros(v.len());
        for m in 0..v.len() {
            out[m ^ mask] = self.coefficient * self.basis_phase(m) * v[m];
        }
        Ok(out)
    }

    /// `Tr[P A]` in `O(2^n)`, coefficient included.
    pub fn trace_with(&self, a: &DenseOperator) -> Result<C64> {
        a.require_dim(1 << self.num_qubits(), "Pauli trace")?;
        let mask = self.flip_mask();
        let mut acc = ZERO;
        for m in 0..a.rows() {
            acc += self.basis_phase(m) * a.get(m, m ^ mask);
        }
        Ok(self.coefficient * acc)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{:+}i)*{}", self.coefficient.re, self.coefficient.im, self.label())
    }
}

/// All `4^n` Pauli strings in lexicographic order (I < X < Y < Z).
pub fn all_pauli_strings(n: usize) -> Vec<PauliString> {
    (0..1usize << (2 * n))
        .map(|code| {
            let labels = (0..n).map(|j| Pauli::ALL[(code >> (2 * (n - 1 - j))) & 3]).collect();
            PauliString::new(ONE, labels)
        })
        .collect()
}

/// Expansion `A = Σ_P c_P P` with `c_P = Tr[P A]/2^n`; zero coefficients are omitted.
pub fn pauli_decompose(a: &DenseOperator) -> Result<Vec<PauliString>> {
    let n = a.num_qubits()?;
    let norm = (1usize << n) as f64;
    let mut out = Vec::new();
    for mut p in all_pauli_strings(n) {
        let coef = p.trace_with(a)? / norm;
        if coef.norm() > 1e-15 {
            p.coefficient = coef;
            out.push(p);
        }
    }
    Ok(out)
}

/// Sum of the matrices of the given Pauli strings.
pub fn pauli_sum(terms: &[PauliString]) -> Result<DenseOperator> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Argument("empty Pauli sum".into()))?;
    let mut acc = DenseOperator::zeros(1 << first.num_qubits(), 1 << first.num_qubits());
    for t in terms {
        acc = acc.try_add(&t.matrix())?;
    }
    Ok(acc)
}

/// Hermitian spectral decomposition `A = U† Λ U`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Rows are the conjugated eigenvectors.
    pub unitary: DenseOperator,
}

impl Spectrum {
    /// Eigenvector of the `k`-th eigenvalue.
    pub fn eigenvector(&self, k: usize) -> StateVector {
        self.unitary.matrix().row(k).adjoint()
    }

    pub fn reconstruct(&self) -> DenseOperator {
        let lam: Vec<C64> = self.eigenvalues.iter().map(|&x| c(x, 0.0)).collect();
        &(&self.unitary.adjoint() * &DenseOperator::from_diagonal(&lam)) * &self.unitary
    }
}

/// Rotates `v` so its first non-negligible component is real and positive.
pub fn fix_phase(v: &mut StateVector) {
    if let Some(z) = v.iter().find(|z| z.norm() > tolerance::PHASE_ZERO).copied() {
        let ph = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= ph);
    }
}

fn lexicographic(a: &StateVector, b: &StateVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord.is_ne() {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigendecomposition of a Hermitian operator with deterministic ordering and phases.
pub fn hermitian_eigendecompose(a: &DenseOperator) -> Result<Spectrum> {
    a.require_square()?;
    let residual = a.hermiticity_residual();
    if residual > tolerance::STRUCTURAL {
        return Err(Error::Symmetry(format!("operator is not Hermitian (residual {residual:.3e})")));
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(a.hermitian_part().into_matrix());
    let mut pairs: Vec<(f64, StateVector)> = (0..a.rows())
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            fix_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    // Order near-degenerate groups by eigenvector.
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() <= tolerance::STRUCTURAL {
            end += 1;
        }
        pairs[start..end].sort_by(|x, y| lexicographic(&x.1, &y.1));
        start = end;
    }
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let vectors: Vec<StateVector> = pairs.into_iter().map(|p| p.1).collect();
    let unitary = DenseOperator::from_columns(&vectors)?.adjoint();
    Ok(Spectrum { eigenvalues, unitary })
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn min_eigenvalue(a: &DenseOperator) -> Result<f64> {
    a.require_square()?;
    if a.hermiticity_residual() > tolerance::STRUCTURAL {
        return Err(Error::Symmetry("operator is not Hermitian".into()));
    }
    let ev = nalgebra::linalg::SymmetricEigen::new(a.hermitian_part().into_matrix()).eigenvalues;
    Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Unitary `U` with `U|0…0⟩ = ψ` for a normalized `ψ`.
pub fn state_preparation_unitary(psi: &StateVector) -> Result<DenseOperator> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Validation(format!("state norm {norm} is not 1")));
    }
    let d = psi.len();
    let phase = if psi[0].norm() > tolerance::PHASE_ZERO {
        psi[0] / psi[0].norm()
    } else {
        ONE
    };
    let w = psi.map(|z| z * phase.conj());
    let mut v = -w;
    v[0] += ONE;
    let vv = v.norm_squared();
    let reflection = if vv <= 1e-30 {
        DMatrix::identity(d, d)
    } else {
        DMatrix::identity(d, d) - (&v * v.adjoint()).map(|z| z * (2.0 / vv))
    };
    Ok(DenseOperator::from_matrix(reflection.map(|z| z * phase)))
}

/// Applies a linear map on one tensor factor of `x`.
///
/// `x` acts on `before ⊗ d_in ⊗ after`; the result acts on `before ⊗ d_out ⊗ after`.
/// The map is sampled on the matrix units `|a⟩⟨b|` of the `d_in` factor.
pub fn apply_local_map(
    x: &DenseOperator,
    before: usize,
    d_in: usize,
    after: usize,
    mut map: impl FnMut(&DenseOperator) -> Result<DenseOperator>,
) -> Result<DenseOperator> {
    x.require_dim(before * d_in * after, "local map input")?;
    let mut images = Vec::with_capacity(d_in * d_in);
    for a in 0..d_in {
        for b in 0..d_in {
            let mut unit = DenseOperator::zeros(d_in, d_in);
            unit.set(a, b, ONE);
            images.push(map(&unit)?);
        }
    }
    let d_out = images[0].rows();
    if images.iter().any(|m| m.rows() != d_out || m.cols() != d_out) {
        return Err(Error::Dimension("local map returned inconsistent shapes".into()));
    }
    let idx_in = |p: usize, a: usize, q: usize| (p * d_in + a) * after + q;
    let idx_out = |p: usize, a: usize, q: usize| (p * d_out + a) * after + q;
    let dim_out = before * d_out * after;
    let mut out = DMatrix::<C64>::zeros(dim_out, dim_out);
    for p in 0..before {
        for q in 0..after {
            for p2 in 0..before {
                for q2 in 0..after {
                    for a in 0..d_in {
                        for b in 0..d_in {
                            let xv = x.get(idx_in(p, a, q), idx_in(p2, b, q2));
                            if xv == ZERO {
                                continue;
                            }
                            let img = images[a * d_in + b].matrix();
                            for r in 0..d_out {
                                for s in 0..d_out {
                                    out[(idx_out(p, r, q), idx_out(p2, s, q2))] += xv * img[(r, s)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(DenseOperator::from_matrix(out))
}

/// Embeds `op` acting on qubits `[offset, offset + k)` of an `n`-qubit register.
pub fn embed(op: &DenseOperator, offset: usize, n: usize) -> Result<DenseOperator> {
    let k = op.num_qubits()?;
    if offset + k > n {
        return Err(Error::Shape(format!("operator on {k} qubits at offset {offset} exceeds {n}")));
    }
    let mut factors = Vec::new();
    if offset > 0 {
        factors.push(DenseOperator::identity(1 << offset));
    }
    factors.push(op.clone());
    if offset + k < n {
        factors.push(DenseOperator::identity(1 << (n - offset - k)));
    }
    tensor_product(&factors)
}
