//! Contraction blocks M and S of single tensors, noiseless and noisy.

use httnsim::channels::{noisy_unitary, NoiseSpec};
use httnsim::contraction::{contract, type1_off_diagonal_four, type1_off_diagonal_six};
use httnsim::linalg::{named_operator, DenseOperator};
use httnsim::tensors::QuantumTensor;

fn print(name: &str, m: &DenseOperator) {
    let rows: Vec<String> = (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| format!("{:+.4}", m.get(r, c))).collect::<Vec<_>>().join(" "))
        .collect();
    println!("{name}: [{}]", rows.join(" ; "));
}

fn main() -> httnsim::Result<()> {
    let z = named_operator("Z")?;
    let h = QuantumTensor::initial_state(named_operator("H")?, 1)?;
    let b = contract(&h, &z)?;
    print("M (H, Z)", &b.m);
    print("S (H, Z)", &b.s);

    let noisy = h.clone().with_noise(NoiseSpec::Depolarizing { rate: 0.2 })?;
    let b = contract(&noisy, &named_operator("X")?)?;
    print("M (noisy H, X)", &b.m);

    let w = noisy_unitary(named_operator("H")?, &NoiseSpec::Depolarizing { rate: 0.2 })?;
    let x = named_operator("X")?;
    println!(
        "off-diagonal element: four-input {:.6}, six-input {:.6}",
        type1_off_diagonal_four(&w, &x)?,
        type1_off_diagonal_six(&w, &x)?
    );
    Ok(())
}
