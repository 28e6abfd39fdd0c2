//! Entanglement forging of a `2N`-qubit state `Σ_x λ_x (V₁|x⟩)⊗(V₂|x⟩)`:
//! exact evaluation through the `|φ^p_{xy}⟩ = (|x⟩ + i^p|y⟩)/√2` states, the
//! signed importance sampler over those terms, and the two-leaf hybrid tree.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{noisy_unitary, Channel, NoiseSpec};
use crate::contraction::type1_matrix;
use crate::error::{Error, Result};
use crate::httn::{HttnTree, RootTensor};
use crate::linalg::{
    basis_state, hermitian_eigendecompose, qubits_of, DenseOperator, StateVector, C64, I, ZERO,
};
use crate::tensors::QuantumTensor;
use crate::tolerance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgedAnsatz {
    pub n: usize,
    /// Descending, nonnegative; length is the truncation `k`.
    pub lambdas: Vec<f64>,
    pub v1: DenseOperator,
    pub v2: DenseOperator,
}

impl ForgedAnsatz {
    pub fn new(lambdas: Vec<f64>, v1: DenseOperator, v2: DenseOperator) -> Result<Self> {
        let n = v1.num_qubits()?;
        let a = Self { n, lambdas, v1, v2 };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = 1 << self.n;
        self.v1.require_dim(dim, "V₁")?;
        self.v2.require_dim(dim, "V₂")?;
        if !self.v1.is_unitary(tolerance::STRUCTURAL) || !self.v2.is_unitary(tolerance::STRUCTURAL) {
            return Err(Error::Validation("V₁ and V₂ must be unitary".into()));
        }
        if self.lambdas.is_empty() || self.lambdas.len() > dim {
            return Err(Error::Range(format!("truncation {} outside 1..={dim}", self.lambdas.len())));
        }
        if self.lambdas.iter().any(|&l| l < 0.0) || self.lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Validation("Schmidt coefficients must be nonnegative and descending".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    /// `‖λ‖₁`.
    pub fn lambda_one_norm(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// `Σ_{x<k} λ_x (V₁|x⟩)⊗(V₂|x⟩)`; unnormalized after truncation.
    pub fn reconstruct(&self) -> StateVector {
        let dim = 1 << self.n;
        let mut out = StateVector::zeros(dim * dim);
        for (x, &l) in self.lambdas.iter().enumerate() {
            out += self.v1.column(x).kronecker(&self.v2.column(x)) * C64::from(l);
        }
        out
    }

    /// `Σ_{x<y<k} λ_x λ_y` plus the diagonal, as signed weights with states.
    pub fn sampler_plan(&self) -> SamplerPlan {
        let dim = 1 << self.n;
        let mut terms = Vec::new();
        for (x, &l) in self.lambdas.iter().enumerate() {
            let b = basis_state(dim, x);
            terms.push(SamplerTerm {
                mu: l * l,
                x,
                y: x,
                p: 0,
                state1: self.v1.apply(&b).expect("dim"),
                state2: self.v2.apply(&b).expect("dim"),
            });
        }
        for x in 0..self.k() {
            for y in x + 1..self.k() {
                for p in 0..4u8 {
                    let phi = phi_state(dim, x, y, p);
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    terms.push(SamplerTerm {
                        mu: sign * self.lambdas[x] * self.lambdas[y],
                        x,
                        y,
                        p,
                        state1: self.v1.apply(&phi).expect("dim"),
                        state2: self.v2.apply(&phi).expect("dim"),
                    });
                }
            }
        }
        let scale: f64 = terms.iter().map(|t| t.mu.abs()).sum();
        let probabilities = terms.iter().map(|t| t.mu.abs() / scale).collect();
        SamplerPlan { terms, probabilities, scale, lambda_one_norm: self.lambda_one_norm() }
    }
}

/// `(|x⟩ + i^p |y⟩)/√2`.
pub fn phi_state(dim: usize, x: usize, y: usize, p: u8) -> StateVector {
    let mut v = StateVector::zeros(dim);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    v[x] = C64::from(r);
    v[y] = I.powu(p as u32) * r;
    v
}

/// SVD of the `2^N × 2^N` amplitude matrix, truncated to `k` terms.
pub fn schmidt_decompose(psi: &StateVector, k: usize) -> Result<ForgedAnsatz> {
    let total = qubits_of(psi.len())?;
    if total % 2 != 0 || total == 0 {
        return Err(Error::Dimension(format!("{total} qubits do not split into two halves")));
    }
    if (psi.norm() - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Validation("state must be normalized".into()));
    }
    let n = total / 2;
    let dim = 1 << n;
    if k < 1 || k > dim {
        return Err(Error::Range(format!("truncation {k} outside 1..={dim}")));
    }
    let amp = nalgebra::DMatrix::from_fn(dim, dim, |a, b| psi[a * dim + b]);
    let svd = amp.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let v1 = DenseOperator::from_fn(dim, dim, |r, c| u[(r, order[c])]);
    // Ψ = U Σ V†, so the second factor of term x is row x of V†.
    let v2 = DenseOperator::from_fn(dim, dim, |r, c| vt[(order[c], r)]);
    let lambdas = order.iter().take(k).map(|&i| svd.singular_values[i]).collect();
    Ok(ForgedAnsatz { n, lambdas, v1, v2 })
}

fn check_halves(a: &ForgedAnsatz, o1: &DenseOperator, o2: &DenseOperator) -> Result<()> {
    o1.require_dim(1 << a.n, "O₁")?;
    o2.require_dim(1 << a.n, "O₂")?;
    if o1.hermiticity_residual() > tolerance::STRUCTURAL || o2.hermiticity_residual() > tolerance::STRUCTURAL {
        return Err(Error::Symmetry("forged observables must be Hermitian".into()));
    }
    Ok(())
}

/// `Σ_x λ_x² ⟨b_x|Ô₁|b_x⟩⟨b_x|Ô₂|b_x⟩ + Σ_{x<y} λ_xλ_y Σ_p (−1)^p ⟨φ^p|Ô₁|φ^p⟩⟨φ^p|Ô₂|φ^p⟩`
/// with `Ô_s = V_s† O_s V_s`.
pub fn forged_expectation(a: &ForgedAnsatz, o1: &DenseOperator, o2: &DenseOperator) -> Result<f64> {
    check_halves(a, o1, o2)?;
    let plan = a.sampler_plan();
    let mut acc = 0.0;
    for t in &plan.terms {
        acc += t.mu * o1.expectation(&t.state1)?.re * o2.expectation(&t.state2)?.re;
    }
    Ok(acc)
}

/// `Σ_{i,i'} λ_i λ_{i'} M₁^{ii'} M₂^{ii'}` with `M_s` the Type1 contraction of
/// `V_s` over all `N` qubits.
pub fn forged_htn_expectation(a: &ForgedAnsatz, o1: &DenseOperator, o2: &DenseOperator) -> Result<f64> {
    forged_htn_expectation_noisy(a, o1, o2, &NoiseSpec::None, &NoiseSpec::None)
}

pub fn forged_htn_expectation_noisy(
    a: &ForgedAnsatz,
    o1: &DenseOperator,
    o2: &DenseOperator,
    noise1: &NoiseSpec,
    noise2: &NoiseSpec,
) -> Result<f64> {
    check_halves(a, o1, o2)?;
    let m1 = type1_matrix(&noisy_unitary(a.v1.clone(), noise1)?, o1, a.n)?;
    let m2 = type1_matrix(&noisy_unitary(a.v2.clone(), noise2)?, o2, a.n)?;
    let mut acc = ZERO;
    for (i, &li) in a.lambdas.iter().enumerate() {
        for (j, &lj) in a.lambdas.iter().enumerate() {
            acc += m1.get(i, j) * m2.get(i, j) * (li * lj);
        }
    }
    Ok(acc.re)
}

/// Two-leaf tree: classical root `Σ_i λ_i |i⟩|i⟩` over both index registers and
/// one Type1 tensor per half carrying its own noise.
pub fn forged_tree(a: &ForgedAnsatz, noise1: NoiseSpec, noise2: NoiseSpec) -> Result<HttnTree> {
    let dim = 1 << a.n;
    let mut root = StateVector::zeros(dim * dim);
    for (i, &l) in a.lambdas.iter().enumerate() {
        root[i * dim + i] = C64::from(l);
    }
    let t1 = QuantumTensor::initial_state(a.v1.clone(), a.n)?.with_noise(noise1)?;
    let t2 = QuantumTensor::initial_state(a.v2.clone(), a.n)?.with_noise(noise2)?;
    HttnTree::two_layer(RootTensor::Classical { amplitudes: root }, vec![t1, t2])
}

/// Lowest energy over the coefficients for fixed `V₁, V₂`: the minimum
/// eigenpair of `G = Σ_t c_t M₁,t ∘ M₂,t` restricted to the first `k` indices.
pub fn optimal_coefficients(
    v1: &DenseOperator,
    v2: &DenseOperator,
    k: usize,
    terms: &[(f64, DenseOperator, DenseOperator)],
) -> Result<(f64, StateVector)> {
    let n = v1.num_qubits()?;
    if k < 1 || k > 1 << n {
        return Err(Error::Range(format!("truncation {k} outside 1..={}", 1 << n)));
    }
    let w1 = Channel::unitary(v1.clone())?;
    let w2 = Channel::unitary(v2.clone())?;
    let mut g = DenseOperator::zeros(k, k);
    for (c, o1, o2) in terms {
        let m1 = type1_matrix(&w1, o1, n)?;
        let m2 = type1_matrix(&w2, o2, n)?;
        for r in 0..k {
            for col in 0..k {
                g.set(r, col, g.get(r, col) + m1.get(r, col) * m2.get(r, col) * *c);
            }
        }
    }
    let spec = hermitian_eigendecompose(&g)?;
    let last = spec.eigenvalues.len() - 1;
    Ok((spec.eigenvalues[last], spec.eigenvector(last)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerTerm {
    /// Signed weight `μ_a`.
    pub mu: f64,
    pub x: usize,
    pub y: usize,
    /// Phase index of `|φ^p_{xy}⟩`; 0 for diagonal terms.
    pub p: u8,
    #[serde(with = "crate::linalg::state_serde")]
    pub state1: StateVector,
    #[serde(with = "crate::linalg::state_serde")]
    pub state2: StateVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerPlan {
    pub terms: Vec<SamplerTerm>,
    /// `|μ_a| / ‖μ‖₁`.
    pub probabilities: Vec<f64>,
    /// `‖μ‖₁`.
    pub scale: f64,
    pub lambda_one_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerEstimate {
    pub estimate: f64,
    /// Empirical standard error of the mean; zero for one shot.
    pub stderr: f64,
    pub scale: f64,
    pub lambda_one_norm: f64,
    pub shots: u64,
}

/// Shots per independently seeded batch.
pub const SHOT_BATCH: u64 = 4096;

struct Outcome {
    eigenvalues: Vec<f64>,
    dist: Option<WeightedIndex<f64>>,
}

fn outcome(eigvecs: &[StateVector], eigenvalues: &[f64], state: &StateVector) -> Outcome {
    let w: Vec<f64> = eigvecs.iter().map(|e| e.dotc(state).norm_sqr()).collect();
    Outcome { eigenvalues: eigenvalues.to_vec(), dist: WeightedIndex::new(&w).ok() }
}

/// Draws `a ~ p_a`, then one measurement outcome of each half, and averages
/// `‖μ‖₁ sgn(μ_a) o₁ o₂`. Batch `b` uses ChaCha8 seeded with `seed` on stream `b`.
pub fn forged_sampler(
    plan: &SamplerPlan,
    o1: &DenseOperator,
    o2: &DenseOperator,
    shots: u64,
    seed: u64,
) -> Result<SamplerEstimate> {
    if shots == 0 {
        return Err(Error::Range("at least one shot is required".into()));
    }
    let dim = plan.terms.first().map_or(0, |t| t.state1.len());
    o1.require_dim(dim, "O₁")?;
    o2.require_dim(dim, "O₂")?;
    let s1 = hermitian_eigendecompose(o1)?;
    let s2 = hermitian_eigendecompose(o2)?;
    let e1: Vec<StateVector> = (0..dim).map(|k| s1.eigenvector(k)).collect();
    let e2: Vec<StateVector> = (0..dim).map(|k| s2.eigenvector(k)).collect();
    let outcomes: Vec<(Outcome, Outcome)> = plan
        .terms
        .iter()
        .map(|t| (outcome(&e1, &s1.eigenvalues, &t.state1), outcome(&e2, &s2.eigenvalues, &t.state2)))
        .collect();
    let pick = WeightedIndex::new(&plan.probabilities)
        .map_err(|e| Error::Validation(format!("sampler probabilities: {e}")))?;
    let batches = shots.div_ceil(SHOT_BATCH);
    let sums: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = SHOT_BATCH.min(shots - b * SHOT_BATCH);
            let (mut s, mut sq) = (0.0, 0.0);
            for _ in 0..count {
                let a = pick.sample(&mut rng);
                let (oa, ob) = &outcomes[a];
                let draw = |o: &Outcome, rng: &mut ChaCha8Rng| match &o.dist {
                    Some(d) => o.eigenvalues[d.sample(rng)],
                    None => 0.0,
                };
                let v = plan.scale * plan.terms[a].mu.signum() * draw(oa, &mut rng) * draw(ob, &mut rng);
                s += v;
                sq += v * v;
            }
            (s, sq)
        })
        .collect();
    let (s, sq) = sums.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let nf = shots as f64;
    let mean = s / nf;
    let stderr = if shots > 1 { ((sq - nf * mean * mean).max(0.0) / (nf - 1.0) / nf).sqrt() } else { 0.0 };
    Ok(SamplerEstimate { estimate: mean, stderr, scale: plan.scale, lambda_one_norm: plan.lambda_one_norm, shots })
}
