//! Central numeric tolerances.

use serde::{Deserialize, Serialize};

/// Structural checks: unitarity, Hermiticity of assembled blocks, traces.
pub const STRUCTURAL: f64 = 1e-10;
/// Exact algebraic identities such as Pauli round trips.
pub const ALGEBRAIC: f64 = 1e-12;
/// Verdict threshold for physicality of effective states.
pub const PHYSICALITY: f64 = 1e-9;
/// Denominators at or below this magnitude are treated as zero.
pub const NORMALIZATION_FLOOR: f64 = 1e-14;
/// Squared residual norm at or below which a Gram–Schmidt direction is padded.
pub const GRAM_SCHMIDT_RANK: f64 = 1e-10;
/// Smallest predicted ratio accepted by error-mitigation rescaling.
pub const UNDERFLOW: f64 = 1e-300;
/// Magnitude below which an amplitude counts as zero when fixing phases.
pub const PHASE_ZERO: f64 = 1e-12;

/// Overridable subset of the tolerance table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Eigenvalue slack of the physicality verdict.
    pub physicality: f64,
    /// Padding threshold of the Deep VQE basis construction.
    pub gram_schmidt_rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            physicality: PHYSICALITY,
            gram_schmidt_rank: GRAM_SCHMIDT_RANK,
        }
    }
}
