//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use httnsim::channels::{noisy_unitary, NoiseSpec};
use httnsim::contraction::{type1_off_diagonal_four, type1_off_diagonal_six};
use httnsim::decay::{
    layer_unitaries, layered_ratio, layered_value, predicted_ratio, qem_rescale, DecayConfig, DecayRow,
};
use httnsim::deepvqe::{deep_vqe_energy, gram_schmidt_p, transform, ClusterModel, DeepVqeSpec};
use httnsim::forging::{forged_expectation, forged_htn_expectation, forged_sampler, schmidt_decompose};
use httnsim::httn::{effective_noisy_state, effective_noisy_state_type4, expectation, physicality_check, HttnTree, RootTensor};
use httnsim::linalg::{min_eigenvalue, DenseOperator, Pauli, PauliString, StateVector, C64};
use httnsim::optimize::OptimizerSpec;
use httnsim::ansatz::AnsatzSpec;
use httnsim::random::{random_cptp, random_hermitian, random_psd, random_state, random_unitary};
use httnsim::tensors::{PrepKind, QuantumTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_001);
    let mut kinds = HashSet::new();
    let mut worst = 0.0f64;
    for case in 0..100 {
        let s = random_two_layer(&ALL_KINDS, &mut rng);
        for leaf in s.tree.leaves() {
            kinds.insert(leaf.tensor.kind());
        }
        let obs = random_observable(&s.tree.leaf_widths(), &mut rng);
        let got = expectation(&s.tree, &obs).map_err(|e| format!("case {case}: {e}"))?;
        let want = brute_force_expectation(&s, &obs);
        worst = worst.max((got - want).abs());
        ensure(worst <= 1e-10, || format!("case {case}: {got} vs {want}"))?;
    }
    let elapsed = start.elapsed();
    ensure(kinds.len() == 5, || format!("only {} preparation types drawn", kinds.len()))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("100 trees, max |Δ| = {worst:.2e}, {elapsed:.2?}"))
}

fn six_vs_four() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_002);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let dim = 1 << rng.random_range(1..=2);
        let ops = random_cptp(dim, rng.random_range(1..=3), &mut rng).kraus_ops().map_err(|e| e.to_string())?;
        let w = noisy_unitary(random_unitary(dim, &mut rng), &NoiseSpec::Kraus { ops }).map_err(|e| e.to_string())?;
        let o = random_hermitian(dim, &mut rng);
        let four = type1_off_diagonal_four(&w, &o).map_err(|e| e.to_string())?;
        let six = type1_off_diagonal_six(&w, &o).map_err(|e| e.to_string())?;
        worst = worst.max((four - six).norm());
        ensure(worst <= 1e-12, || format!("pair {case}: {four} vs {six}"))?;
    }
    Ok(format!("100 pairs, max |Δ| = {worst:.2e}"))
}

fn positivity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_003);
    let (mut min_eig, mut worst_trace, mut multi) = (f64::INFINITY, 0.0f64, 0);
    let mut kinds = HashSet::new();
    for case in 0..200 {
        let s = if case % 2 == 0 { random_two_layer(&CP_KINDS, &mut rng) } else { random_multi_layer(&CP_KINDS, &mut rng) };
        let tree = noisify(&s.tree, &mut rng);
        multi += usize::from(tree.layers.len() > 1);
        tree.layers.iter().flatten().for_each(|n| {
            kinds.insert(n.tensor.kind());
        });
        let rho = effective_noisy_state(&tree).map_err(|e| format!("tree {case}: {e}"))?;
        let rep = physicality_check(&rho).map_err(|e| format!("tree {case}: {e}"))?;
        min_eig = min_eig.min(rep.min_eigenvalue);
        worst_trace = worst_trace.max((rep.trace - C64::new(1.0, 0.0)).norm());
        ensure(rep.min_eigenvalue >= -1e-9 && worst_trace <= 1e-9, || format!("tree {case}: {rep:?}"))?;
    }
    ensure(kinds.len() == 4, || format!("only {} preparation types drawn", kinds.len()))?;
    ensure(multi > 0, || "no multi-layer trees drawn".into())?;
    Ok(format!("200 trees ({multi} multi-layer), min eigenvalue {min_eig:.2e}, max |Tr−1| {worst_trace:.2e}"))
}

fn type4_falsifier() -> Check {
    let plus = StateVector::from_vec(vec![C64::new(0.5f64.sqrt(), 0.0); 2]);
    let leaf = QuantumTensor::unitary_family(vec![DenseOperator::identity(2), Pauli::X.matrix()])
        .and_then(|t| t.with_noise(NoiseSpec::CircuitDepolarizing { diagonal: vec![0.5, 0.5], off_diagonal: vec![0.0, 0.0] }))
        .map_err(|e| e.to_string())?;
    let tree = HttnTree::two_layer(RootTensor::pure(&plus), vec![leaf]).map_err(|e| e.to_string())?;
    ensure(tree.has_kind(PrepKind::Type4), || "no unitary-family leaf".into())?;
    let rho = effective_noisy_state_type4(&tree).map_err(|e| e.to_string())?;
    let rep = physicality_check(&rho).map_err(|e| e.to_string())?;
    ensure((rep.min_eigenvalue + 0.25).abs() <= 1e-10, || format!("min eigenvalue {}", rep.min_eigenvalue))?;
    ensure(!rep.is_physical, || "reported physical".into())?;
    Ok(format!("min eigenvalue {:.12}, trace {:.3}, unphysical", rep.min_eigenvalue, rep.trace.re))
}

fn decay_rows() -> Result<(Vec<DecayRow>, Duration), String> {
    let start = Instant::now();
    let mut rows = Vec::new();
    for layers in [4, 5, 6] {
        let cfg = DecayConfig::new(10, layers, 2, vec![1e-5, 1e-4, 1e-3, 1e-2], 20_240_005);
        rows.extend(layered_ratio(&cfg).map_err(|e| e.to_string())?);
    }
    Ok((rows, start.elapsed()))
}

fn decay_law((rows, elapsed): &(Vec<DecayRow>, Duration)) -> Check {
    let mut worst = 0.0f64;
    for r in rows {
        // (1 − ε)^((1 − N^L)/(1 − N)) in log form; L = 6, ε = 1e-2 is below the f64 range.
        let log_law = (1.0 - 10f64.powi(r.layers as i32)) / (1.0 - 10.0) * (-r.epsilon).ln_1p();
        let rel = (r.log_ratio - log_law).exp_m1().abs();
        worst = worst.max(rel);
        ensure(rel <= 1e-6, || format!("L={} ε={:e}: ln r = {} vs {log_law}", r.layers, r.epsilon, r.log_ratio))?;
        ensure((r.log_predicted_ratio - log_law).abs() <= 1e-12 * log_law.abs(), || {
            "predicted ratio disagrees with the law".into()
        })?;
        if r.predicted_ratio > 0.0 {
            ensure((r.ratio / r.predicted_ratio - 1.0).abs() <= 1e-6, || format!("L={} ε={:e}: {}", r.layers, r.epsilon, r.ratio))?;
        }
    }
    let spot = rows.iter().find(|r| r.layers == 4 && r.epsilon == 1e-3).ok_or("missing spot row")?;
    ensure((spot.ratio - 0.3290).abs() < 1e-4, || format!("spot value {}", spot.ratio))?;
    Ok(format!(
        "{} rows, max relative error {worst:.2e}, r_4(1e-3) = {:.6}, sweep {elapsed:.1?}",
        rows.len(),
        spot.ratio
    ))
}

fn small_decay_exactness() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut cfg = DecayConfig::new(2, 2, 2, vec![0.0, 1e-3, 0.01, 0.05, 0.3], seed);
        cfg.angle_range = 1.0;
        let us = layer_unitaries(&cfg).map_err(|e| e.to_string())?;
        for &eps in &cfg.epsilons {
            let fast = layered_value(2, &us, eps, &BTreeSet::new()).map_err(|e| e.to_string())?;
            let brute = brute_force_n2_l2(&us, eps);
            worst = worst.max((fast - brute).abs());
            ensure(worst <= 1e-10, || format!("seed {seed} ε {eps}: {fast} vs {brute}"))?;
        }
    }
    Ok(format!("50 instances, max |Δ| = {worst:.2e}"))
}

fn pauli(label: &str) -> DenseOperator {
    PauliString::parse(label).expect("valid label").matrix()
}

fn deep_vqe() -> Check {
    let spec = DeepVqeSpec {
        cluster_ansatz: AnsatzSpec { depth: 2, ..Default::default() },
        cluster_optimizer: OptimizerSpec::lbfgs(),
        top_ansatz: AnsatzSpec { depth: 4, ..Default::default() },
        top_optimizer: OptimizerSpec::Lbfgs { max_iters: 3000, restarts: 6, tolerance: 1e-12 },
        ..Default::default()
    };
    let truncated = ClusterModel::transverse_ising(2, 2, 1.0, 1.0).map_err(|e| e.to_string())?;
    let exact = truncated.full_hamiltonian().and_then(|h| min_eigenvalue(&h)).map_err(|e| e.to_string())?;
    let mut complete = truncated.clone();
    for c in &mut complete.clusters {
        c.excitations = ["II", "ZI", "IZ", "ZZ"].map(pauli).to_vec();
    }
    let full = deep_vqe_energy(&complete, &spec, 7).map_err(|e| e.to_string())?;
    ensure((full.energy - exact).abs() <= 1e-4, || format!("complete basis {} vs exact {exact}", full.energy))?;
    let part = deep_vqe_energy(&truncated, &spec, 1).map_err(|e| e.to_string())?;
    ensure(part.energy >= exact - 1e-8, || format!("truncated {} below exact {exact}", part.energy))?;
    Ok(format!(
        "exact {exact:.8}, complete {:.8} (Δ {:.1e}), truncated {:.8}",
        full.energy,
        full.energy - exact,
        part.energy
    ))
}

fn gram_schmidt_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_008);
    let (mut worst, mut deficient, mut padded) = (0.0f64, 0, 0);
    for case in 0..100 {
        let k = rng.random_range(1..=6);
        let rank = if case % 3 == 0 { rng.random_range(1..=k) } else { k };
        deficient += usize::from(rank < k);
        let s = random_psd(k, rank, &mut rng);
        let gs = gram_schmidt_p(&s).map_err(|e| format!("case {case}: {e}"))?;
        let t = transform(&gs.p, &s).map_err(|e| e.to_string())?;
        let kept = gs.padded.iter().filter(|p| !**p).count();
        padded += k - kept;
        ensure(kept == rank, || format!("case {case}: kept {kept} of rank {rank}"))?;
        for r in 0..k {
            for c in 0..k {
                let want = if r == c && !gs.padded[r] { 1.0 } else { 0.0 };
                worst = worst.max((t.get(r, c) - C64::new(want, 0.0)).norm());
            }
        }
        ensure(worst <= 1e-8, || format!("case {case}: residual {worst:.2e}"))?;
    }
    Ok(format!("100 matrices ({deficient} rank-deficient, {padded} padded directions), max residual {worst:.2e}"))
}

fn forging() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1 + (seed % 3) as usize;
        let dim = 1 << n;
        let psi = random_state(dim * dim, &mut rng);
        let (o1, o2) = (random_hermitian(dim, &mut rng), random_hermitian(dim, &mut rng));
        let a = schmidt_decompose(&psi, dim).map_err(|e| e.to_string())?;
        let full = o1.kron(&o2).expectation(&psi).map_err(|e| e.to_string())?.re;
        let f = forged_expectation(&a, &o1, &o2).map_err(|e| e.to_string())?;
        let h = forged_htn_expectation(&a, &o1, &o2).map_err(|e| e.to_string())?;
        worst = worst.max((f - full).abs()).max((h - full).abs());
        ensure(worst <= 1e-10, || format!("seed {seed}: {f} / {h} vs {full}"))?;
    }
    for n in 1..=3 {
        let dim = 1usize << n;
        let mut psi = StateVector::zeros(dim * dim);
        for x in 0..dim {
            psi[x * dim + x] = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        }
        let l1 = schmidt_decompose(&psi, dim).map_err(|e| e.to_string())?.lambda_one_norm();
        ensure((l1 - (dim as f64).sqrt()).abs() <= 1e-10, || format!("N={n}: ‖λ‖₁ = {l1}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_009);
    let psi = random_state(16, &mut rng);
    let (o1, o2) = (random_hermitian(4, &mut rng), random_hermitian(4, &mut rng));
    let a = schmidt_decompose(&psi, 4).map_err(|e| e.to_string())?;
    let exact = forged_expectation(&a, &o1, &o2).map_err(|e| e.to_string())?;
    let plan = a.sampler_plan();
    let est: Vec<f64> = (0..200u64)
        .map(|s| forged_sampler(&plan, &o1, &o2, 2000, 5000 + s).map(|e| e.estimate))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mean = est.iter().sum::<f64>() / 200.0;
    let sigma = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / 199.0 / 200.0).sqrt();
    let z = (mean - exact).abs() / sigma;
    ensure(z <= 4.0, || format!("sampler mean {mean} vs {exact}, {z:.2}σ"))?;
    Ok(format!("max |Δ| = {worst:.2e}, ‖λ‖₁ = √(2^N) for N ≤ 3, sampler within {z:.2}σ"))
}

fn qem_round_trip((rows, _): &(Vec<DecayRow>, Duration)) -> Check {
    let (mut worst, mut checked, mut underflow) = (0.0f64, 0, 0);
    for r in rows {
        let predicted = predicted_ratio(r.n, r.layers, r.epsilon);
        let Some(qem) = r.qem_value else {
            let err = qem_rescale(r.noisy, predicted).err().map(|e| e.name());
            ensure(predicted <= 1e-300 && err == Some("UnderflowError"), || {
                format!("L={} ε={:e}: missing QEM value at r̃ = {predicted:e}", r.layers, r.epsilon)
            })?;
            underflow += 1;
            continue;
        };
        let rel = (qem - r.noiseless).abs() / r.noiseless.abs();
        worst = worst.max(rel);
        ensure(rel <= 1e-5, || format!("L={} ε={:e}: {qem} vs {}", r.layers, r.epsilon, r.noiseless))?;
        let want = predicted.powi(-2);
        let var = r.variance_multiplier.ok_or("missing variance multiplier")?;
        ensure((var - want).abs() <= 1e-12 * want, || format!("variance multiplier {var} vs {want}"))?;
        checked += 1;
    }
    Ok(format!("{checked} rows, max relative error {worst:.2e}; {underflow} row with r̃ ≤ 1e-300 reports underflow"))
}

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let t = start.elapsed();
    match outcome {
        Ok(detail) => {
            println!("[PASS] {name}: {detail} [{t:.1?}]");
            true
        }
        Err(detail) => {
            println!("[FAIL] {name}: {detail} [{t:.1?}]");
            false
        }
    }
}

fn main() -> ExitCode {
    let rows = decay_rows();
    let results = [
        run("oracle equivalence", oracle_equivalence),
        run("six-vs-four input reduction", six_vs_four),
        run("positivity of CP trees", positivity),
        run("unitary-family falsifier", type4_falsifier),
        run("decay law", || decay_law(rows.as_ref().map_err(Clone::clone)?)),
        run("small-instance decay exactness", small_decay_exactness),
        run("deep VQE", deep_vqe),
        run("Gram-Schmidt contract", gram_schmidt_contract),
        run("forging three-way agreement", forging),
        run("QEM round trip", || qem_round_trip(rows.as_ref().map_err(Clone::clone)?)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
