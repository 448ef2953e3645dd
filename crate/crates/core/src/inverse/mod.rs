//! Forward synthesis, initial-time identities, reconstruction and stability sweeps.

pub mod forward;
pub mod identity;
pub mod reconstruct;
pub mod stability;

pub use forward::{
    observe, observed_vertices, synthesize_forward, ForwardConfig, ForwardResult, InitialData, ObservationConfig,
    ObservationSeries, ObservationSet, Phase,
};
pub use identity::{equation_jet, initial_identity_check, modal_jet, IdentityResiduals, InitialJet};
pub use reconstruct::{
    misfit, misfit_gradient, project, reconstruct, InverseSetup, Parametrization, PotentialEstimate, ReconstructConfig,
    StepRule,
};
pub use stability::{
    lipschitz_ratio, stability_sweep, LipschitzRow, SkippedPair, StabilityConfig, StabilityReport, StabilityRow,
    StabilitySetup, StabilitySummary,
};
