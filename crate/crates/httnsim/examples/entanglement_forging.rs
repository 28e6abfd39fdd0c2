//! Entanglement forging of a random 4-qubit state, exact and sampled.

use httnsim::forging::{forged_expectation, forged_htn_expectation, forged_sampler, schmidt_decompose};
use httnsim::random::{random_hermitian, random_state};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> httnsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let psi = random_state(16, &mut rng);
    let (o1, o2) = (random_hermitian(4, &mut rng), random_hermitian(4, &mut rng));
    let full = o1.kron(&o2).expectation(&psi)?.re;
    println!("full state          {full:.10}");
    for k in 1..=4 {
        let a = schmidt_decompose(&psi, k)?;
        println!(
            "k = {k}: forged {:.10}, tree {:.10}, ‖λ‖₁ = {:.4}",
            forged_expectation(&a, &o1, &o2)?,
            forged_htn_expectation(&a, &o1, &o2)?,
            a.lambda_one_norm()
        );
    }
    let plan = schmidt_decompose(&psi, 4)?.sampler_plan();
    for shots in [1_000, 10_000, 100_000] {
        let e = forged_sampler(&plan, &o1, &o2, shots, 1)?;
        println!("{shots:>6} shots: {:.5} ± {:.5}", e.estimate, e.stderr);
    }
    Ok(())
}
