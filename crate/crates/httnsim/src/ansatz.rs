//! Hardware-efficient ansatz: layers of single-qubit rotations followed by a
//! nearest-neighbour entangler ladder.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, DenseOperator, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    Cz,
    Cnot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    Ry,
    Rz,
}

#[derive(Clone, Copy, Debug)]
enum Gate {
    Rot(Rotation, usize, usize),
    Cz(usize, usize),
    Cnot(usize, usize),
}

/// Shape of a hardware-efficient circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnsatzSpec {
    pub depth: usize,
    pub rotations: Vec<Rotation>,
    pub entangler: Entangler,
    /// Append one more rotation layer after the last entangler.
    pub final_rotations: bool,
}

impl Default for AnsatzSpec {
    fn default() -> Self {
        Self {
            depth: 2,
            rotations: vec![Rotation::Ry, Rotation::Rz],
            entangler: Entangler::Cz,
            final_rotations: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HardwareEfficientAnsatz {
    qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl HardwareEfficientAnsatz {
    pub fn new(qubits: usize, spec: &AnsatzSpec) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::Argument("ansatz needs at least one qubit".into()));
        }
        if spec.depth == 0 {
            return Err(Error::Range("ansatz depth must be at least 1".into()));
        }
        if spec.rotations.is_empty() {
            return Err(Error::Argument("ansatz needs at least one rotation kind".into()));
        }
        let mut gates = Vec::new();
        let mut k = 0;
        let mut rotate = |gates: &mut Vec<Gate>| {
            for q in 0..qubits {
                for &r in &spec.rotations {
                    gates.push(Gate::Rot(r, q, k));
                    k += 1;
                }
            }
        };
        for _ in 0..spec.depth {
            rotate(&mut gates);
            for q in 0..qubits.saturating_sub(1) {
                gates.push(match spec.entangler {
                    Entangler::Cz => Gate::Cz(q, q + 1),
                    Entangler::Cnot => Gate::Cnot(q, q + 1),
                });
            }
        }
        if spec.final_rotations {
            rotate(&mut gates);
        }
        Ok(Self { qubits, gates, n_params: k })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn num_params(&self) -> usize {
        self.n_params
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                self.n_params,
                params.len()
            )));
        }
        Ok(())
    }

    /// Applies the circuit to every column of `m` in place.
    fn run(&self, params: &[f64], m: &mut DMatrix<C64>) {
        let n = self.qubits;
        let bit = |q: usize| 1usize << (n - 1 - q);
        let dim = m.nrows();
        for gate in &self.gates {
            match *gate {
                Gate::Rot(r, q, k) => {
                    let (s, co) = (params[k] / 2.0).sin_cos();
                    // [[a, b], [c, d]] acting on (|0⟩, |1⟩) of qubit q.
                    let (a, b, cc, d) = match r {
                        Rotation::Ry => (c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)),
                        Rotation::Rz => (c(co, -s), c(0.0, 0.0), c(0.0, 0.0), c(co, s)),
                    };
                    let mask = bit(q);
                    for mut col in m.column_iter_mut() {
                        for i in (0..dim).filter(|i| i & mask == 0) {
                            let (x0, x1) = (col[i], col[i | mask]);
                            col[i] = a * x0 + b * x1;
                            col[i | mask] = cc * x0 + d * x1;
                        }
                    }
                }
                Gate::Cz(q1, q2) => {
                    let mask = bit(q1) | bit(q2);
                    for mut col in m.column_iter_mut() {
                        for i in (0..dim).filter(|i| i & mask == mask) {
                            col[i] = -col[i];
                        }
                    }
                }
                Gate::Cnot(ctl, tgt) => {
                    let (mc, mt) = (bit(ctl), bit(tgt));
                    for mut col in m.column_iter_mut() {
                        for i in (0..dim).filter(|i| i & mc != 0 && i & mt == 0) {
                            col.swap_rows(i, i | mt);
                        }
                    }
                }
            }
        }
    }

    /// `U(θ)|0…0⟩`.
    pub fn state(&self, params: &[f64]) -> Result<StateVector> {
        self.check(params)?;
        let mut m = DMatrix::zeros(1 << self.qubits, 1);
        m[(0, 0)] = c(1.0, 0.0);
        self.run(params, &mut m);
        Ok(m.column(0).into_owned())
    }

    pub fn unitary(&self, params: &[f64]) -> Result<DenseOperator> {
        self.check(params)?;
        let mut m = DMatrix::identity(1 << self.qubits, 1 << self.qubits);
        self.run(params, &mut m);
        Ok(DenseOperator::from_matrix(m))
    }

    /// `∂E/∂θ_k = [E(θ + π/2 e_k) − E(θ − π/2 e_k)]/2`, exact for these rotations.
    pub fn parameter_shift_gradient(
        &self,
        params: &[f64],
        energy: impl Fn(&[f64]) -> f64,
    ) -> Vec<f64> {
        let shift = std::f64::consts::FRAC_PI_2;
        (0..params.len())
            .map(|k| {
                let mut p = params.to_vec();
                p[k] += shift;
                let plus = energy(&p);
                p[k] -= 2.0 * shift;
                let minus = energy(&p);
                0.5 * (plus - minus)
            })
            .collect()
    }
}

/// Uniform angles in `[−range, range]` from a seeded stream.
pub fn random_angles(count: usize, range: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 })
        .collect()
}
