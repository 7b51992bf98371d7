//! Design, verification and simulation of stem-connected and fully-connected
//! microwave linear analog computers (MiLACs) for capacity-achieving MIMO
//! precoding and combining.

pub mod archgraph;
pub mod campaign;
pub mod chancap;
pub mod error;
pub mod linalg;
pub mod matio;
pub mod netcore;
pub mod stemopt;

pub use archgraph::{ArchitectureMask, CircuitComplexity, MilacGraph};
pub use campaign::{CampaignConfig, CampaignReport, TrialRecord};
pub use chancap::{ChannelRealization, LinkBudget, PowerAllocation, TruncatedSvd};
pub use error::{MilacError, Result};
pub use netcore::{AdmittanceMatrix, Combiner, Precoder, ScatteringMatrix, SusceptanceMatrix};
pub use stemopt::{Architecture, Side, StemSolution, VerificationReport};
