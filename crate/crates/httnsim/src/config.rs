//! JSON experiment configurations and the runner behind the command-line tool.
//!
//! ```json
//! { "schema_version": 1, "seed": 7, "output": "out",
//!   "experiment": { "kind": "decay", "n": 2, "layers": 2, "depth": 2, "epsilons": [0.0] } }
//! ```
//!
//! Operators may be nested `[re, im]` rows, a name (`"X"`, `"ZZ"`, `"H"`, `"CNOT"`, …)
//! or a list of `{"coefficient", "pauli"}` terms. States may be amplitude lists
//! or product-state names such as `"0+"` or `"bell"`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channels::NoiseSpec;
use crate::decay::{layered_ratio, write_csv, DecayConfig, DecayRow};
use crate::deepvqe::{deep_vqe_energy, dv2_effective_state, dv_noisy_trace, ClusterModel, DeepVqeSpec};
use crate::error::{Error, Result};
use crate::forging::{
    forged_expectation, forged_htn_expectation, forged_sampler, forged_tree, schmidt_decompose,
    SamplerEstimate,
};
use crate::httn::{
    effective_noisy_state, effective_noisy_state_type4, expectation, noisy_expectation,
    physicality_check_with, Contractor, HttnTree, Observable, PhysicalityReport,
};
use crate::linalg::{min_eigenvalue, qubits_of, state_serde, DenseOperator, StateVector};
use crate::tensors::PrepKind;
use crate::tolerance::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiment: Experiment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Contract(ContractSpec),
    Physicality(PhysicalitySpec),
    Deepvqe(DeepVqeExperiment),
    Forge(ForgeSpec),
    Decay(DecayConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Contract(_) => "contract",
            Experiment::Physicality(_) => "physicality",
            Experiment::Deepvqe(_) => "deepvqe",
            Experiment::Forge(_) => "forge",
            Experiment::Decay(_) => "decay",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub tree: HttnTree,
    pub observable: Observable,
    /// Fail on singular normalization blocks instead of continuing.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalitySpec {
    pub tree: HttnTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingSpec {
    pub clusters: usize,
    pub qubits: usize,
    pub j: f64,
    pub h: f64,
    /// Overrides the boundary excitations of every cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitations: Option<Vec<DenseOperator>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    TransverseIsing { transverse_ising: IsingSpec },
    Explicit(ClusterModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<ClusterModel> {
        let mut m = match self {
            ModelSpec::TransverseIsing { transverse_ising: s } => {
                let mut m = ClusterModel::transverse_ising(s.clusters, s.qubits, s.j, s.h)?;
                if let Some(ds) = &s.excitations {
                    m.clusters.iter_mut().for_each(|c| c.excitations = ds.clone());
                }
                m
            }
            ModelSpec::Explicit(m) => m.clone(),
        };
        m.fill_boundary_excitations();
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepVqeExperiment {
    pub model: ModelSpec,
    #[serde(default)]
    pub solver: DeepVqeSpec,
    /// Per-cluster preparation noise for the two-layer noisy variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<NoiseSpec>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeSpec {
    #[serde(with = "state_serde")]
    pub state: StateVector,
    /// Schmidt truncation; all terms when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub o1: DenseOperator,
    pub o2: DenseOperator,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub noise1: NoiseSpec,
    #[serde(default)]
    pub noise2: NoiseSpec,
}

fn default_shots() -> u64 {
    10_000
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks that do not run any pipeline.
    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Contract(c) => {
                c.tree.validate()?;
                if c.observable.terms.iter().any(|t| t.factors.len() != c.tree.leaves().len()) {
                    return Err(Error::Shape("observable terms must have one factor per leaf".into()));
                }
                Ok(())
            }
            Experiment::Physicality(p) => p.tree.validate(),
            Experiment::Deepvqe(d) => {
                let m = d.model.build()?;
                match &d.noise {
                    Some(n) if n.len() != m.clusters.len() => {
                        Err(Error::Validation("one noise description per cluster expected".into()))
                    }
                    _ => Ok(()),
                }
            }
            Experiment::Forge(f) => {
                let a = schmidt_decompose(&f.state, f.k.unwrap_or(1))?;
                f.o1.require_dim(1 << a.n, "O₁")?;
                f.o2.require_dim(1 << a.n, "O₂")?;
                if f.shots == 0 {
                    return Err(Error::Range("at least one shot is required".into()));
                }
                Ok(())
            }
            Experiment::Decay(d) => d.validate(),
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    /// One human-readable line per result row.
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    seed: u64,
    result: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractResult {
    pub value: f64,
    pub normalization: f64,
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalityResult {
    pub report: PhysicalityReport,
    pub dimension: usize,
    pub state: DenseOperator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepVqeSummary {
    pub energy: f64,
    pub effective_ground_energy: f64,
    /// Exact ground energy of the full Hamiltonian when it has at most 12 qubits.
    pub exact_ground_energy: Option<f64>,
    pub cluster_energies: Vec<f64>,
    pub effective_hamiltonian: DenseOperator,
    pub p_matrices: Vec<DenseOperator>,
    pub top_params: Vec<f64>,
    pub dv2_physicality: Option<PhysicalityReport>,
    pub dv_noisy_trace: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeResult {
    pub lambdas: Vec<f64>,
    pub exact: f64,
    pub htn: f64,
    pub full_state: f64,
    pub sampler: SamplerEstimate,
    pub noisy: Option<f64>,
    pub noisy_physicality: Option<PhysicalityReport>,
}

fn write_json<T: Serialize>(dir: &Path, kind: &str, seed: u64, result: T) -> Result<PathBuf> {
    let path = dir.join(format!("{kind}.json"));
    let env = Envelope { schema_version: SCHEMA_VERSION, kind, seed, result };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Runs a configuration, writing artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let seed = cfg.seed;
    let tol = cfg.tolerances;
    let kind = cfg.experiment.kind();
    let mut lines = Vec::new();
    let mut artifacts = Vec::new();
    match &cfg.experiment {
        Experiment::Contract(c) => {
            let noisy = c.tree.is_noisy();
            let contractor = Contractor::new(&c.tree)?.strict(c.strict);
            let normalization = contractor.normalization()?;
            let value = if noisy { noisy_expectation(&c.tree, &c.observable)? } else { expectation(&c.tree, &c.observable)? };
            lines.push(format!("contract value={value:.12} normalization={normalization:.12} noisy={noisy}"));
            artifacts.push(write_json(out_dir, kind, seed, ContractResult { value, normalization, noisy })?);
        }
        Experiment::Physicality(p) => {
            let rho = if p.tree.has_kind(PrepKind::Type4) {
                effective_noisy_state_type4(&p.tree)?
            } else {
                effective_noisy_state(&p.tree)?
            };
            let report = physicality_check_with(&rho, tol.physicality)?;
            lines.push(format!(
                "physicality min_eigenvalue={:.12} trace={:.12} is_physical={}",
                report.min_eigenvalue, report.trace.re, report.is_physical
            ));
            let result = PhysicalityResult { report, dimension: rho.rows(), state: rho };
            artifacts.push(write_json(out_dir, kind, seed, result)?);
        }
        Experiment::Deepvqe(d) => {
            let model = d.model.build()?;
            let mut solver = d.solver.clone();
            solver.rank_tolerance = tol.gram_schmidt_rank;
            let r = deep_vqe_energy(&model, &solver, seed)?;
            let exact = if model.total_qubits() <= 12 { Some(min_eigenvalue(&model.full_hamiltonian()?)?) } else { None };
            let (phys, trace) = match &d.noise {
                Some(noise) => (
                    Some(physicality_check_with(&dv2_effective_state(&model, &r, noise)?, tol.physicality)?),
                    Some(dv_noisy_trace(&model, &r, noise)?),
                ),
                None => (None, None),
            };
            lines.push(format!(
                "deepvqe energy={:.12} effective_ground={:.12} exact={}",
                r.energy,
                r.effective_ground_energy,
                exact.map_or("n/a".into(), |e| format!("{e:.12}"))
            ));
            let summary = DeepVqeSummary {
                energy: r.energy,
                effective_ground_energy: r.effective_ground_energy,
                exact_ground_energy: exact,
                cluster_energies: r.clusters.iter().map(|b| b.vqe.energy).collect(),
                effective_hamiltonian: r.effective.h.clone(),
                p_matrices: r.clusters.iter().map(|b| b.p.clone()).collect(),
                top_params: r.top_params.clone(),
                dv2_physicality: phys,
                dv_noisy_trace: trace,
            };
            artifacts.push(write_json(out_dir, kind, seed, summary)?);
        }
        Experiment::Forge(f) => {
            let half = 1usize << (qubits_of(f.state.len())? / 2);
            let a = schmidt_decompose(&f.state, f.k.unwrap_or(half))?;
            let exact = forged_expectation(&a, &f.o1, &f.o2)?;
            let htn = forged_htn_expectation(&a, &f.o1, &f.o2)?;
            let full_state = f.o1.kron(&f.o2).expectation(&a.reconstruct())?.re;
            let sampler = forged_sampler(&a.sampler_plan(), &f.o1, &f.o2, f.shots, seed)?;
            let (noisy, phys) = if f.noise1.is_none() && f.noise2.is_none() {
                (None, None)
            } else {
                let tree = forged_tree(&a, f.noise1.clone(), f.noise2.clone())?;
                let obs = Observable::product(vec![f.o1.clone(), f.o2.clone()]);
                let rho = effective_noisy_state(&tree)?;
                (Some(noisy_expectation(&tree, &obs)?), Some(physicality_check_with(&rho, tol.physicality)?))
            };
            lines.push(format!(
                "forge exact={exact:.12} htn={htn:.12} sampler={:.6}±{:.6} lambda_l1={:.6} scale={:.6}",
                sampler.estimate, sampler.stderr, sampler.lambda_one_norm, sampler.scale
            ));
            let result = ForgeResult { lambdas: a.lambdas.clone(), exact, htn, full_state, sampler, noisy, noisy_physicality: phys };
            artifacts.push(write_json(out_dir, kind, seed, result)?);
        }
        Experiment::Decay(d) => {
            let d = DecayConfig { seed, ..d.clone() };
            let rows = layered_ratio(&d)?;
            for r in &rows {
                lines.push(format!(
                    "decay N={} L={} d={} epsilon={:e} ratio={:.12} log_ratio={:.9} predicted={:.12} qem={}",
                    r.n,
                    r.layers,
                    r.depth,
                    r.epsilon,
                    r.ratio,
                    r.log_ratio,
                    r.predicted_ratio,
                    r.qem_value.map_or("underflow".into(), |q| format!("{q:.12}"))
                ));
            }
            let csv_path = out_dir.join("decay.csv");
            write_csv(&rows, fs::File::create(&csv_path)?)?;
            artifacts.push(csv_path);
            artifacts.push(write_json::<&[DecayRow]>(out_dir, kind, seed, &rows)?);
        }
    }
    Ok(RunOutput { lines, artifacts })
}
