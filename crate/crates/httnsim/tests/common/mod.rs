//! Random trees and brute-force oracles shared by the integration tests.
//!
//! The oracles rebuild every tensor from its defining formula instead of
//! going through the library's expansion maps.

#![allow(dead_code)]

use httnsim::channels::{Channel, NoiseSpec};
use httnsim::httn::{HttnTree, Observable, ProductTerm, RootTensor, TreeNode};
use httnsim::linalg::{basis_state, tensor_power, DenseOperator, Pauli, PauliString, StateVector, C64};
use httnsim::random::{random_cptp, random_hermitian, random_matrix, random_state, random_unitary};
use httnsim::tensors::{Preparation, QuantumTensor};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kind {
    Initial,
    Projection,
    Pauli,
    Unitary,
    Classical,
}

pub const ALL_KINDS: [Kind; 5] = [Kind::Initial, Kind::Projection, Kind::Pauli, Kind::Unitary, Kind::Classical];
pub const CP_KINDS: [Kind; 4] = [Kind::Initial, Kind::Projection, Kind::Pauli, Kind::Classical];

fn random_pauli_string(k: usize, rng: &mut impl Rng) -> PauliString {
    let labels = (0..k).map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)]).collect();
    PauliString::new(C64::new(1.0, 0.0), labels)
}

pub fn random_tensor(kind: Kind, tau: usize, k: usize, rng: &mut impl Rng) -> QuantumTensor {
    let count = 1 << tau;
    let kdim = 1 << k;
    let prep = match kind {
        Kind::Initial => Preparation::InitialState { unitary: random_unitary(kdim, rng) },
        Kind::Projection => Preparation::Projection { state: random_state(count * kdim, rng) },
        Kind::Pauli => Preparation::PauliFamily {
            base_state: random_state(kdim, rng),
            paulis: (0..count)
                .map(|i| (i == 0 || rng.random::<f64>() > 0.15).then(|| random_pauli_string(k, rng)))
                .collect(),
        },
        Kind::Unitary => Preparation::UnitaryFamily { unitaries: (0..count).map(|_| random_unitary(kdim, rng)).collect() },
        Kind::Classical => Preparation::Classical {
            columns: (0..count).map(|_| random_matrix(kdim, 1, rng).column(0)).collect(),
        },
    };
    QuantumTensor::new(prep, tau, k).unwrap()
}

/// Kraus noise matching the register the tensor's noise acts on.
pub fn with_random_noise(t: QuantumTensor, rng: &mut impl Rng) -> QuantumTensor {
    let qubits = match t.prep {
        Preparation::Classical { .. } | Preparation::UnitaryFamily { .. } => return t,
        Preparation::Projection { .. } => t.k_width + t.tau,
        _ => t.k_width,
    };
    let n_kraus = rng.random_range(1..=3);
    let ops = random_cptp(1 << qubits, n_kraus, rng).kraus_ops().unwrap();
    t.with_noise(NoiseSpec::Kraus { ops }).unwrap()
}

fn pick(kinds: &[Kind], tau: usize, k: usize, rng: &mut impl Rng) -> Kind {
    loop {
        let kind = kinds[rng.random_range(0..kinds.len())];
        if !(kind == Kind::Initial && tau > k) {
            return kind;
        }
    }
}

/// Root amplitudes together with the tree; quantum roots are pure.
pub struct Sample {
    pub tree: HttnTree,
    pub root: StateVector,
}

pub fn random_root(qubits: usize, rng: &mut impl Rng) -> (RootTensor, StateVector) {
    let psi = random_state(1 << qubits, rng);
    if rng.random::<bool>() {
        (RootTensor::pure(&psi), psi)
    } else {
        let scaled = &psi * C64::new(rng.random_range(0.5..2.0), 0.0);
        (RootTensor::Classical { amplitudes: scaled.clone() }, scaled)
    }
}

/// Two-layer tree with `τ = 1` children of width `K ≤ 2`.
pub fn random_two_layer(kinds: &[Kind], rng: &mut impl Rng) -> Sample {
    let n = rng.random_range(1..=3);
    let (root, psi) = random_root(n, rng);
    let children = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=2);
            random_tensor(pick(kinds, 1, k, rng), 1, k, rng)
        })
        .collect();
    Sample { tree: HttnTree::two_layer(root, children).unwrap(), root: psi }
}

/// Two or three layers with every tensor drawn from `kinds`.
pub fn random_multi_layer(kinds: &[Kind], rng: &mut impl Rng) -> Sample {
    let root_qubits = rng.random_range(1..=2);
    let (root, psi) = random_root(root_qubits, rng);
    let mut layers: Vec<Vec<TreeNode>> = Vec::new();
    let mut widths = vec![root_qubits];
    let depth = rng.random_range(1..=2);
    for _ in 0..depth {
        let mut layer = Vec::new();
        for (p, &w) in widths.iter().enumerate() {
            let mut left = w;
            while left > 0 {
                let tau = if left >= 2 && rng.random::<bool>() { 2 } else { 1 };
                left -= tau;
                let k = rng.random_range(tau.min(2)..=2).max(1);
                layer.push(TreeNode { parent: p, tensor: random_tensor(pick(kinds, tau, k, rng), tau, k, rng) });
            }
        }
        widths = layer.iter().map(|n| n.tensor.k_width).collect();
        layers.push(layer);
    }
    Sample { tree: HttnTree::new(root, layers).unwrap(), root: psi }
}

pub fn random_observable(widths: &[usize], rng: &mut impl Rng) -> Observable {
    let terms = (0..rng.random_range(1..=2))
        .map(|_| ProductTerm {
            coefficient: rng.random_range(-1.0..1.0),
            factors: widths.iter().map(|&w| random_hermitian(1 << w, rng)).collect(),
        })
        .collect();
    Observable { terms }
}

pub fn dense_observable(obs: &Observable) -> DenseOperator {
    let mut total: Option<DenseOperator> = None;
    for t in &obs.terms {
        let mut prod = DenseOperator::identity(1);
        for f in &t.factors {
            prod = prod.kron(f);
        }
        let term = prod.scale_real(t.coefficient);
        total = Some(match total {
            Some(acc) => acc.try_add(&term).unwrap(),
            None => term,
        });
    }
    total.unwrap()
}

/// `2^K × 2^τ` matrix whose column `i` is `|ψ^i⟩`, from the defining formulas.
pub fn oracle_expansion(t: &QuantumTensor) -> DenseOperator {
    let (count, kdim) = (1usize << t.tau, 1usize << t.k_width);
    let shift = 1usize << (t.k_width.saturating_sub(t.tau));
    DenseOperator::from_fn(kdim, count, |r, i| match &t.prep {
        Preparation::InitialState { unitary } => unitary.get(r, i * shift),
        Preparation::Projection { state } => state[i * kdim + r],
        Preparation::PauliFamily { base_state, paulis } => match &paulis[i] {
            Some(p) => p.matrix().apply(base_state).unwrap()[r],
            None => C64::new(0.0, 0.0),
        },
        Preparation::UnitaryFamily { unitaries } => unitaries[i].get(r, 0),
        Preparation::Classical { columns } => columns[i][r],
    })
}

fn layer_operator(layer: &[TreeNode]) -> DenseOperator {
    layer.iter().fold(DenseOperator::identity(1), |acc, n| acc.kron(&oracle_expansion(&n.tensor)))
}

/// Full leaf state `(⊗A_L) … (⊗A₂)|ψ⟩` of a noiseless tree.
pub fn brute_force_state(s: &Sample) -> StateVector {
    let mut v = s.root.clone();
    for layer in &s.tree.layers {
        v = layer_operator(layer).apply(&v).unwrap();
    }
    v
}

pub fn brute_force_expectation(s: &Sample, obs: &Observable) -> f64 {
    let v = brute_force_state(s);
    dense_observable(obs).expectation(&v).unwrap().re / v.norm_squared()
}

fn apply_kraus(ops: &[DenseOperator], x: &DenseOperator) -> DenseOperator {
    let mut out = DenseOperator::zeros(x.rows(), x.cols());
    for k in ops {
        out = out.try_add(&k.try_mul(x).unwrap().try_mul(&k.adjoint()).unwrap()).unwrap();
    }
    out
}

fn kraus_of(noise: &NoiseSpec, dim: usize) -> Vec<DenseOperator> {
    match noise {
        NoiseSpec::None => vec![DenseOperator::identity(dim)],
        NoiseSpec::Kraus { ops } => ops.clone(),
        NoiseSpec::Depolarizing { rate } => {
            let n = dim.trailing_zeros() as usize;
            let mut ops = vec![DenseOperator::identity(dim).scale_real((1.0 - rate + rate / (dim * dim) as f64).sqrt())];
            let w = (rate / (dim * dim) as f64).sqrt();
            for idx in 1..dim * dim {
                let mut p = DenseOperator::identity(1);
                for q in 0..n {
                    let digit = (idx >> (2 * (n - 1 - q))) & 3;
                    p = p.kron(&[Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][digit].matrix());
                }
                ops.push(p.scale_real(w));
            }
            ops
        }
        NoiseSpec::CircuitDepolarizing { .. } => panic!("not a CP preparation noise"),
    }
}

/// Noisy image of the matrix unit `|a⟩⟨b|` under one tensor.
fn oracle_unit_image(t: &QuantumTensor, a: usize, b: usize) -> DenseOperator {
    let (count, kdim) = (1usize << t.tau, 1usize << t.k_width);
    match &t.prep {
        Preparation::InitialState { unitary } => {
            let shift = kdim / count;
            let ket = unitary.column(a * shift);
            let bra = unitary.column(b * shift);
            apply_kraus(&kraus_of(&t.noise, kdim), &DenseOperator::outer(&ket, &bra))
        }
        Preparation::Projection { state } => {
            let sigma = apply_kraus(&kraus_of(&t.noise, count * kdim), &DenseOperator::projector(state));
            DenseOperator::from_fn(kdim, kdim, |r, s| sigma.get(a * kdim + r, b * kdim + s))
        }
        Preparation::PauliFamily { base_state, paulis } => {
            let sigma = apply_kraus(&kraus_of(&t.noise, kdim), &DenseOperator::projector(base_state));
            match (&paulis[a], &paulis[b]) {
                (Some(pa), Some(pb)) => pa.matrix().try_mul(&sigma).unwrap().try_mul(&pb.matrix().adjoint()).unwrap(),
                _ => DenseOperator::zeros(kdim, kdim),
            }
        }
        Preparation::Classical { columns } => DenseOperator::outer(&columns[a], &columns[b]),
        Preparation::UnitaryFamily { .. } => panic!("no CP map for unitary families"),
    }
}

fn unit_images(layer: &[TreeNode]) -> Vec<Vec<Vec<DenseOperator>>> {
    layer
        .iter()
        .map(|n| {
            let d = 1usize << n.tensor.tau;
            (0..d).map(|a| (0..d).map(|b| oracle_unit_image(&n.tensor, a, b)).collect()).collect()
        })
        .collect()
}

/// `Σ_ab X_ab ⊗_μ Ã_μ(|a_μ⟩⟨b_μ|)`.
fn apply_layer_oracle(x: &DenseOperator, layer: &[TreeNode]) -> DenseOperator {
    let images = unit_images(layer);
    let dims: Vec<usize> = layer.iter().map(|n| 1usize << n.tensor.tau).collect();
    let out_dim: usize = layer.iter().map(|n| 1usize << n.tensor.k_width).product();
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0; dims.len()];
        for m in (0..dims.len()).rev() {
            d[m] = idx % dims[m];
            idx /= dims[m];
        }
        d
    };
    let mut out = DenseOperator::zeros(out_dim, out_dim);
    for a in 0..x.rows() {
        for b in 0..x.cols() {
            let xab = x.get(a, b);
            if xab.norm() == 0.0 {
                continue;
            }
            let (da, db) = (digits(a), digits(b));
            let mut term = DenseOperator::identity(1);
            for m in 0..dims.len() {
                term = term.kron(&images[m][da[m]][db[m]]);
            }
            out = out.try_add(&term.scale(xab)).unwrap();
        }
    }
    out
}

/// Normalized effective noisy state from explicit Kraus and matrix-unit sums.
pub fn brute_force_noisy_state(tree: &HttnTree) -> DenseOperator {
    let mut x = match &tree.root {
        RootTensor::Quantum { state, noise } => apply_kraus(&kraus_of(noise, state.rows()), state),
        RootTensor::Classical { amplitudes } => DenseOperator::projector(amplitudes),
    };
    for layer in &tree.layers {
        x = apply_layer_oracle(&x, layer);
    }
    let t = x.trace().re;
    x.scale_real(1.0 / t)
}

/// Adds random CPTP noise to every quantum tensor and, sometimes, to the root.
pub fn noisify(tree: &HttnTree, rng: &mut impl Rng) -> HttnTree {
    let root = match &tree.root {
        RootTensor::Quantum { state, .. } if rng.random::<bool>() => {
            let ops = random_cptp(state.rows(), 2, rng).kraus_ops().unwrap();
            RootTensor::Quantum { state: state.clone(), noise: NoiseSpec::Kraus { ops } }
        }
        r => r.clone(),
    };
    let layers = tree
        .layers
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|n| TreeNode { parent: n.parent, tensor: with_random_noise(n.tensor.clone(), rng) })
                .collect()
        })
        .collect();
    HttnTree::new(root, layers).unwrap()
}

/// Full 4-qubit density matrix of the N=2, L=2 tree built by hand:
/// root state on (a, b), each root qubit padded with a fresh |0⟩ and fed
/// through its child's noisy unitary.
pub fn brute_force_n2_l2(us: &[DenseOperator], eps: f64) -> f64 {
    let zero = basis_state(4, 0);
    let root = Channel::compose(Channel::depolarizing(2, eps).unwrap(), Channel::unitary(us[0].clone()).unwrap()).unwrap();
    let rho0 = root.apply(&DenseOperator::projector(&zero)).unwrap();
    let mut full = DenseOperator::zeros(16, 16);
    for (r, c) in (0..4).flat_map(|r| (0..4).map(move |c| (r, c))) {
        let spread = |x: usize| ((x >> 1) << 3) | ((x & 1) << 1);
        full.set(spread(r), spread(c), rho0.get(r, c));
    }
    let leaf = Channel::compose(Channel::depolarizing(2, eps).unwrap(), Channel::unitary(us[1].clone()).unwrap()).unwrap();
    let rho = Channel::tensor(vec![leaf.clone(), leaf]).unwrap().apply(&full).unwrap();
    tensor_power(&Pauli::Z.matrix(), 4).unwrap().trace_product(&rho).unwrap().re
}
