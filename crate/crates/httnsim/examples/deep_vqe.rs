//! Two-layer Deep VQE on a clustered transverse-field Ising chain.

use httnsim::channels::NoiseSpec;
use httnsim::deepvqe::{deep_vqe_energy, dv2_effective_state, ClusterModel, DeepVqeSpec};
use httnsim::httn::physicality_check;
use httnsim::linalg::min_eigenvalue;

fn main() -> httnsim::Result<()> {
    let model = ClusterModel::transverse_ising(2, 2, 1.0, 0.8)?;
    let exact = min_eigenvalue(&model.full_hamiltonian()?)?;
    let r = deep_vqe_energy(&model, &DeepVqeSpec::default(), 1)?;
    for (s, c) in r.clusters.iter().enumerate() {
        println!("cluster {s}: energy {:.6}, κ = {}, padded {:?}", c.vqe.energy, c.kappa, c.padded);
    }
    println!("effective ground {:.8}", r.effective_ground_energy);
    println!("deep VQE energy  {:.8}", r.energy);
    println!("exact            {exact:.8}");

    let noise = vec![NoiseSpec::Depolarizing { rate: 0.05 }; 2];
    let rep = physicality_check(&dv2_effective_state(&model, &r, &noise)?)?;
    println!("noisy two-layer state: {rep:?}");
    Ok(())
}
