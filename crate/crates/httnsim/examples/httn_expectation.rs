//! Builds a three-layer tree, contracts it and compares with the effective state.

use httnsim::channels::NoiseSpec;
use httnsim::httn::{effective_noisy_state, noisy_expectation, HttnTree, Observable, RootTensor, TreeNode};
use httnsim::linalg::{named_operator, named_state, tensor_product};
use httnsim::tensors::QuantumTensor;

fn main() -> httnsim::Result<()> {
    let noise = NoiseSpec::Depolarizing { rate: 0.05 };
    let root = RootTensor::Classical { amplitudes: named_state("bell")? };
    let layer2 = vec![
        TreeNode { parent: 0, tensor: QuantumTensor::initial_state(named_operator("CNOT")?, 1)?.with_noise(noise.clone())? },
        TreeNode { parent: 0, tensor: QuantumTensor::projection(named_state("bell")?, 1)? },
    ];
    let layer3 = vec![
        TreeNode { parent: 0, tensor: QuantumTensor::initial_state(named_operator("H")?, 1)? },
        TreeNode { parent: 0, tensor: QuantumTensor::initial_state(named_operator("X")?, 1)?.with_noise(noise)? },
        TreeNode { parent: 1, tensor: QuantumTensor::initial_state(named_operator("I")?, 1)? },
    ];
    let tree = HttnTree::new(root, vec![layer2, layer3])?;
    let factors = vec![named_operator("X")?, named_operator("Z")?, named_operator("I")?];
    let obs = Observable::product(factors.clone());

    let contracted = noisy_expectation(&tree, &obs)?;
    let rho = effective_noisy_state(&tree)?;
    let direct = tensor_product(&factors)?.trace_product(&rho)?.re;
    println!("{} leaves over {} qubits", tree.leaves().len(), tree.leaf_qubits());
    println!("contracted {contracted:.12}");
    println!("from state {direct:.12}");
    Ok(())
}
