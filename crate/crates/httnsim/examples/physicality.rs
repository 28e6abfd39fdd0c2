//! Physicality of effective noisy states: guaranteed for CP preparations,
//! violated by a noisy unitary-family tensor.

use httnsim::channels::NoiseSpec;
use httnsim::httn::{effective_noisy_state, effective_noisy_state_type4, physicality_check, HttnTree, RootTensor};
use httnsim::linalg::{named_operator, named_state, DenseOperator};
use httnsim::random::{random_cptp, random_state};
use httnsim::tensors::QuantumTensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> httnsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let kraus = NoiseSpec::Kraus { ops: random_cptp(8, 2, &mut rng).kraus_ops()? };
    let leaf = QuantumTensor::projection(random_state(8, &mut rng), 1)?.with_noise(kraus)?;
    let tree = HttnTree::two_layer(RootTensor::pure(&random_state(2, &mut rng)), vec![leaf])?;
    let rep = physicality_check(&effective_noisy_state(&tree)?)?;
    println!("projection with random Kraus noise: {rep:?}");

    let plus = named_state("+")?;
    let leaf = QuantumTensor::unitary_family(vec![DenseOperator::identity(2), named_operator("X")?])?
        .with_noise(NoiseSpec::CircuitDepolarizing { diagonal: vec![0.5, 0.5], off_diagonal: vec![0.0, 0.0] })?;
    let tree = HttnTree::two_layer(RootTensor::pure(&plus), vec![leaf])?;
    let rep = physicality_check(&effective_noisy_state_type4(&tree)?)?;
    println!("unitary family with p = 0.5: {rep:?}");
    Ok(())
}
