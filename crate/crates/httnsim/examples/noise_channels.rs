//! Depolarizing and Kraus channels, Choi matrices and complete positivity.

use httnsim::channels::{Channel, NoiseSpec};
use httnsim::linalg::{min_eigenvalue, named_operator, named_state, DenseOperator};
use httnsim::random::random_cptp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> httnsim::Result<()> {
    let plus = DenseOperator::projector(&named_state("+")?);
    let x = named_operator("X")?;
    for rate in [0.0, 0.1, 0.5, 1.0] {
        let rho = Channel::depolarizing(1, rate)?.apply(&plus)?;
        println!("ε = {rate:.1}: ⟨X⟩ = {:.3}", x.trace_product(&rho)?.re);
    }

    let noisy_h = Channel::compose(Channel::depolarizing(1, 0.2)?, Channel::unitary(named_operator("H")?)?)?;
    let choi = noisy_h.choi()?;
    println!("noisy H: Choi min eigenvalue {:.3e}, trace preserving {}", min_eigenvalue(&choi)?, noisy_h.is_trace_preserving(1e-10));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random = random_cptp(4, 3, &mut rng);
    let spec = NoiseSpec::Kraus { ops: random.kraus_ops()? };
    let ch = spec.channel(2)?;
    println!("random 2-qubit channel: CP {}, TP {}", ch.is_completely_positive(1e-9), ch.is_trace_preserving(1e-10));
    let not_tp = Channel::kraus(vec![DenseOperator::identity(2).scale_real(0.5)]);
    println!("scaled identity as Kraus: {}", not_tp.err().map_or("accepted".into(), |e| e.name().to_string()));
    Ok(())
}
