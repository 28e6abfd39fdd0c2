//! Pauli algebra, decomposition and Hermitian spectra.

use httnsim::linalg::{hermitian_eigendecompose, named_operator, pauli_decompose, pauli_sum, PauliString};

fn main() -> httnsim::Result<()> {
    let xy = PauliString::parse("XY")?;
    let yz = PauliString::parse("YZ")?;
    let prod = xy.mul(&yz)?;
    println!("XY · YZ = ({:.0}) {}", prod.coefficient, prod.label());

    let cnot = named_operator("CNOT")?;
    let terms = pauli_decompose(&cnot)?;
    for t in terms.iter().filter(|t| t.coefficient.norm() > 1e-12) {
        println!("CNOT term {:>2}: {:.3}", t.label(), t.coefficient);
    }
    println!("reassembly error {:.1e}", pauli_sum(&terms)?.max_abs_diff(&cnot));

    let h = pauli_sum(&[
        PauliString::new((-1.0).into(), PauliString::parse("ZZ")?.labels),
        PauliString::new((-0.5).into(), PauliString::parse("XI")?.labels),
        PauliString::new((-0.5).into(), PauliString::parse("IX")?.labels),
    ])?;
    let spec = hermitian_eigendecompose(&h)?;
    println!("spectrum of -ZZ - 0.5(XI + IX): {:?}", spec.eigenvalues.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>());
    Ok(())
}
