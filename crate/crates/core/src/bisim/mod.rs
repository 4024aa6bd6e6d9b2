//! Probabilistic time bisimulation on execution trees: bottom-up lumping,
//! the leakage estimate δ and its class-weighted variant δ′.

pub mod delta;
pub mod partition;
pub mod secure;

pub use delta::{delta, delta_prime, log_time, Analysis, DeltaResult, WeightScheme, Witness, WitnessKind};
pub use partition::{chi, refine, stratify, BlockId, BlockInfo, JointDist, Lumping, Partition};
pub use secure::{pt_secure, SecureReport};
