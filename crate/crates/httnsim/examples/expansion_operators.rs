//! The five preparation types and their expansion operators.

use httnsim::linalg::{named_operator, named_state, DenseOperator, PauliString};
use httnsim::tensors::QuantumTensor;

fn show(name: &str, t: &QuantumTensor) -> httnsim::Result<()> {
    let a = t.expansion_operator()?.matrix;
    println!("{name} ({}): {}×{} expansion operator", t.kind(), a.rows(), a.cols());
    for r in 0..a.rows() {
        let row: Vec<String> = (0..a.cols()).map(|c| format!("{:+.3}", a.get(r, c).re)).collect();
        println!("  [{}]", row.join(" "));
    }
    Ok(())
}

fn main() -> httnsim::Result<()> {
    show("initial state, U = H⊗I", &QuantumTensor::initial_state(named_operator("H")?.kron(&named_operator("I")?), 1)?)?;
    show("projection of a Bell pair", &QuantumTensor::projection(named_state("bell")?, 1)?)?;
    show(
        "Pauli family {I, X} on |0⟩",
        &QuantumTensor::pauli_family(named_state("0")?, vec![Some(PauliString::parse("I")?), Some(PauliString::parse("X")?)])?,
    )?;
    show("unitary family {I, H}", &QuantumTensor::unitary_family(vec![DenseOperator::identity(2), named_operator("H")?])?)?;
    show("classical table", &QuantumTensor::classical(vec![named_state("0")?, named_state("+")?])?)?;
    Ok(())
}
