use httnsim::ansatz::{AnsatzSpec, Rotation};
use httnsim::channels::NoiseSpec;
use httnsim::deepvqe::*;
use httnsim::httn::{expectation, physicality_check};
use httnsim::linalg::{min_eigenvalue, DenseOperator, PauliString, StateVector, C64};
use httnsim::optimize::OptimizerSpec;
use httnsim::random::{random_cptp, random_hermitian, random_psd};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pauli(label: &str) -> DenseOperator {
    PauliString::parse(label).unwrap().matrix()
}

fn strong_spec() -> DeepVqeSpec {
    DeepVqeSpec {
        cluster_ansatz: AnsatzSpec { depth: 2, ..Default::default() },
        cluster_optimizer: OptimizerSpec::lbfgs(),
        top_ansatz: AnsatzSpec { depth: 4, ..Default::default() },
        top_optimizer: OptimizerSpec::Lbfgs { max_iters: 3000, restarts: 6, tolerance: 1e-12 },
        ..Default::default()
    }
}

fn complete_basis(model: &mut ClusterModel) {
    for c in &mut model.clusters {
        c.excitations = ["II", "ZI", "IZ", "ZZ"].map(pauli).to_vec();
    }
}

#[test]
fn cluster_vqe_examples() {
    let one = AnsatzSpec { depth: 1, rotations: vec![Rotation::Ry], final_rotations: false, ..Default::default() };
    let r = cluster_vqe(&pauli("Z"), &one, &OptimizerSpec::default(), 1).unwrap();
    assert_eq!(r.params.len(), 1);
    assert!((r.energy + 1.0).abs() < 1e-6);
    let r = cluster_vqe(&pauli("X"), &one, &OptimizerSpec::default(), 1).unwrap();
    assert!((r.energy + 1.0).abs() < 1e-6);

    let model = ClusterModel::transverse_ising(1, 2, 1.0, 0.8).unwrap();
    let h = &model.clusters[0].hamiltonian;
    let r = cluster_vqe(h, &AnsatzSpec::default(), &OptimizerSpec::default(), 3).unwrap();
    let exact = min_eigenvalue(h).unwrap();
    assert!(r.energy >= exact - 1e-9);
    assert!(r.energy - exact < 1e-4, "{} vs {exact}", r.energy);
}

#[test]
fn transverse_ising_reassembles() {
    let m = ClusterModel::transverse_ising(2, 2, 1.0, 0.7).unwrap();
    let h = m.full_hamiltonian().unwrap();
    let want = ["ZZII", "IZZI", "IIZZ"].iter().fold(DenseOperator::zeros(16, 16), |a, l| a.try_sub(&pauli(l)).unwrap());
    let want = ["XIII", "IXII", "IIXI", "IIIX"]
        .iter()
        .fold(want, |a, l| a.try_sub(&pauli(l).scale_real(0.7)).unwrap());
    assert!(h.max_abs_diff(&want) < 1e-14);
    assert_eq!(m.clusters[0].excitations, vec![pauli("II"), pauli("IZ")]);
    assert_eq!(m.clusters[1].excitations, vec![pauli("II"), pauli("ZI")]);
}

#[test]
fn complete_basis_reaches_exact_ground_energy() {
    let mut model = ClusterModel::transverse_ising(2, 2, 1.0, 1.0).unwrap();
    complete_basis(&mut model);
    let exact = min_eigenvalue(&model.full_hamiltonian().unwrap()).unwrap();
    let r = deep_vqe_energy(&model, &strong_spec(), 7).unwrap();
    let spec_eff = httnsim::linalg::hermitian_eigendecompose(&r.effective.h).unwrap().eigenvalues;
    let spec_full = httnsim::linalg::hermitian_eigendecompose(&model.full_hamiltonian().unwrap()).unwrap().eigenvalues;
    for (a, b) in spec_eff.iter().zip(&spec_full) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(r.energy >= exact - 1e-8);
    assert!(r.energy - exact < 1e-4, "{} vs {exact}", r.energy);
}

#[test]
fn truncated_basis_is_variational() {
    let model = ClusterModel::transverse_ising(2, 2, 1.0, 1.0).unwrap();
    let exact = min_eigenvalue(&model.full_hamiltonian().unwrap()).unwrap();
    let r = deep_vqe_energy(&model, &strong_spec(), 1).unwrap();
    assert!(r.effective_ground_energy >= exact - 1e-8);
    assert!(r.energy >= exact - 1e-8);
    assert!(r.energy - r.effective_ground_energy < 1e-4);
}

#[test]
fn decoupled_clusters_sum_local_ground_energies() {
    let mut model = ClusterModel::transverse_ising(2, 2, 1.0, 0.6).unwrap();
    model.interactions.clear();
    complete_basis(&mut model);
    let want: f64 = model.clusters.iter().map(|c| min_eigenvalue(&c.hamiltonian).unwrap()).sum();
    let r = deep_vqe_energy(&model, &strong_spec(), 2).unwrap();
    assert!((r.energy - want).abs() < 1e-6, "{} vs {want}", r.energy);
}

fn random_model(rng: &mut ChaCha8Rng, excitations: &[&[&str]]) -> ClusterModel {
    let clusters = excitations
        .iter()
        .map(|ds| Cluster {
            qubits: ds[0].len(),
            hamiltonian: random_hermitian(1 << ds[0].len(), rng),
            excitations: ds.iter().map(|l| pauli(l)).collect(),
        })
        .collect();
    ClusterModel {
        clusters,
        interactions: vec![Interaction {
            t: 0,
            u: 1,
            terms: vec![
                InteractionTerm { coefficient: 0.3, left: pauli(&"X".repeat(excitations[0][0].len())), right: pauli(&"Z".repeat(excitations[1][0].len())) },
                InteractionTerm { coefficient: -0.2, left: pauli(&"Y".repeat(excitations[0][0].len())), right: pauli(&"Y".repeat(excitations[1][0].len())) },
            ],
        }],
    }
}

fn quick_spec() -> DeepVqeSpec {
    DeepVqeSpec {
        cluster_optimizer: OptimizerSpec::NelderMead { max_iters: 300, restarts: 1, tolerance: 1e-8, initial_step: 0.5 },
        top_optimizer: OptimizerSpec::NelderMead { max_iters: 300, restarts: 1, tolerance: 1e-8, initial_step: 0.5 },
        ..Default::default()
    }
}

/// `Σ_k φ_k ⊗_s ψ̂_s^{k_s}` assembled from the basis data.
fn deep_vqe_state(model: &ClusterModel, r: &DeepVqeResult) -> StateVector {
    let per: Vec<Vec<StateVector>> = r
        .clusters
        .iter()
        .zip(&model.clusters)
        .map(|(b, c)| {
            let vs: Vec<StateVector> = c.excitations.iter().map(|d| d.apply(&b.vqe.state).unwrap()).collect();
            (0..1usize << b.kappa)
                .map(|a| {
                    let mut acc = StateVector::zeros(1 << c.qubits);
                    for (m, v) in vs.iter().enumerate() {
                        acc += v * b.p_padded.get(a, m);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let mut out = StateVector::zeros(1 << model.total_qubits());
    for (k, amp) in r.top_state.iter().enumerate() {
        let mut rem = k;
        let mut parts = vec![];
        for b in r.clusters.iter().rev() {
            parts.push(rem % (1 << b.kappa));
            rem >>= b.kappa;
        }
        parts.reverse();
        let states: Vec<StateVector> = parts.iter().enumerate().map(|(s, &a)| per[s][a].clone()).collect();
        out += httnsim::linalg::kron_states(&states).unwrap() * *amp;
    }
    out
}

#[test]
fn htn_form_matches_effective_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let layouts: [&[&[&str]]; 3] = [
        &[&["I", "X"], &["I", "Z"]],
        &[&["II", "XI", "ZY"], &["I", "Y", "Z"]],
        &[&["I"], &["II", "XX", "ZI", "YZ", "XY"]],
    ];
    for layout in layouts {
        let model = random_model(&mut rng, layout);
        let r = deep_vqe_energy(&model, &quick_spec(), 5).unwrap();
        let (tree, obs) = htn_form(&model, &r).unwrap();
        let via_tree = expectation(&tree, &obs).unwrap();
        assert!((via_tree - r.energy).abs() < 1e-10, "{via_tree} vs {}", r.energy);
        let psi = deep_vqe_state(&model, &r);
        let direct = model.full_hamiltonian().unwrap().expectation(&psi).unwrap().re / psi.norm_squared();
        assert!((direct - r.energy).abs() < 1e-10);
        assert!(r.effective.h.hermiticity_residual() < 1e-10);
    }
}

#[test]
fn dv2_without_noise_is_the_deep_vqe_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let model = random_model(&mut rng, &[&["II", "XI", "ZY"], &["I", "Y"]]);
    let r = deep_vqe_energy(&model, &quick_spec(), 6).unwrap();
    let rho = dv2_effective_state(&model, &r, &[NoiseSpec::None, NoiseSpec::None]).unwrap();
    let psi = deep_vqe_state(&model, &r);
    let want = DenseOperator::projector(&psi).scale_real(1.0 / psi.norm_squared());
    assert!(rho.max_abs_diff(&want) < 1e-10);
}

#[test]
fn dv2_is_physical_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let model = random_model(&mut rng, &[&["II", "XI", "ZY"], &["I", "Y"]]);
    let r = deep_vqe_energy(&model, &quick_spec(), 8).unwrap();
    let dep = [NoiseSpec::Depolarizing { rate: 0.2 }, NoiseSpec::Depolarizing { rate: 0.05 }];
    assert!(physicality_check(&dv2_effective_state(&model, &r, &dep).unwrap()).unwrap().is_physical);
    for _ in 0..5 {
        let noise: Vec<NoiseSpec> = model
            .clusters
            .iter()
            .map(|c| NoiseSpec::Kraus { ops: random_cptp(1 << c.qubits, 3, &mut rng).kraus_ops().unwrap() })
            .collect();
        let rep = physicality_check(&dv2_effective_state(&model, &r, &noise).unwrap()).unwrap();
        assert!(rep.is_physical, "{rep:?}");
        let trace = dv_noisy_trace(&model, &r, &noise).unwrap();
        assert!(trace.is_finite());
    }
}

#[test]
fn dv2_rejects_non_pauli_excitations() {
    let mut model = ClusterModel::transverse_ising(2, 1, 1.0, 0.5).unwrap();
    let h = DenseOperator::from_real(2, 2, &[1.0, 0.0, 0.0, 0.5]).unwrap();
    model.clusters[0].excitations.push(h);
    let r = deep_vqe_energy(&model, &quick_spec(), 0).unwrap();
    let err = dv2_effective_state(&model, &r, &[NoiseSpec::None, NoiseSpec::None]).unwrap_err();
    assert_eq!(err.name(), "UnsupportedConstruction");
    let (tree, obs) = htn_form(&model, &r).unwrap();
    assert!((expectation(&tree, &obs).unwrap() - r.energy).abs() < 1e-10);
}

#[test]
fn invalid_models_rejected() {
    let mut m = ClusterModel::transverse_ising(2, 1, 1.0, 0.5).unwrap();
    m.clusters[0].excitations[0] = pauli("X");
    assert_eq!(m.validate().unwrap_err().name(), "ValidationError");
    let mut m = ClusterModel::transverse_ising(2, 1, 1.0, 0.5).unwrap();
    m.clusters[1].hamiltonian = DenseOperator::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(m.validate().unwrap_err().name(), "SymmetryError");
    let m = ClusterModel::transverse_ising(2, 1, 1.0, 0.5).unwrap();
    assert_eq!(effective_hamiltonian(&m, &[]).unwrap_err().name(), "ValidationError");
}

fn orthonormality_residual(s: &DenseOperator) -> (f64, usize) {
    let gs = gram_schmidt_p(s).unwrap();
    let t = transform(&gs.p, s).unwrap();
    let mut worst = 0.0f64;
    for r in 0..s.rows() {
        for c in 0..s.rows() {
            if gs.padded[r] || gs.padded[c] {
                continue;
            }
            let want = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((t.get(r, c) - want).norm());
        }
        if gs.padded[r] {
            assert!((0..s.rows()).all(|c| gs.p.get(r, c).norm() == 0.0));
        }
        assert!((r + 1..s.rows()).all(|c| gs.p.get(r, c).norm() == 0.0), "not lower triangular");
    }
    (worst, gs.padded.iter().filter(|&&p| !p).count())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_schmidt_orthonormalizes(seed in any::<u64>(), k in 1usize..7, deficit in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = k.saturating_sub(deficit).max(1);
        let s = random_psd(k, rank, &mut rng);
        let (worst, kept) = orthonormality_residual(&s);
        prop_assert!(worst < 1e-8, "residual {worst}");
        prop_assert_eq!(kept, rank);
    }

    #[test]
    fn overlap_matrices_are_psd(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = httnsim::random::random_state(4, &mut rng);
        let ds: Vec<DenseOperator> = ["II", "XY", "ZZ", "YI"].iter().map(|l| pauli(l)).collect();
        let s = overlap_matrix(&psi, &ds).unwrap();
        prop_assert!(s.hermiticity_residual() < 1e-10);
        prop_assert!(min_eigenvalue(&s).unwrap() > -1e-10);
    }
}
