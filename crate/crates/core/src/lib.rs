//! OMA DRM 2 content lifecycle with a cycle-level cost model.
//!
//! A DRM agent registers with a rights issuer, acquires a rights object,
//! installs it and plays protected content. Every cryptographic step the
//! agent performs is recorded in an [`OpTrace`], which [`CostModel`] prices
//! for software, hardware and mixed implementations of AES, SHA-1,
//! HMAC-SHA1 and RSA-1024.
//!
//! ```no_run
//! use drmcost_core::{run_scenario, ArchVariant, Scenario, DEFAULT_CLOCK_HZ};
//!
//! let run = run_scenario(&Scenario::ringtone(), &ArchVariant::mixed(), DEFAULT_CLOCK_HZ, 1).unwrap();
//! println!("{:.3} s", run.report.total_seconds);
//! ```

pub mod codec;
pub mod cost;
pub mod crypto;
pub mod objects;
pub mod roap;
pub mod scenario;

pub use codec::FormatError;
pub use cost::{
    cost_of, AlgorithmId, ArchVariant, Comparison, CostEntry, CostError, CostModel, CostProfile, CostUnit, OpEvent,
    OpTrace, Phase, Realization, Report, DEFAULT_CLOCK_HZ,
};
pub use crypto::{CryptoError, Digest, RsaKeyPair, RsaPublicKey, Signature, SymmetricKey};
pub use objects::{Dcf, InstalledRo, ObjectError, Permissions, RightsObject};
pub use roap::{ProtocolError, Timestamp};
pub use scenario::{
    execute_scenario, render_report, run_scenario, ExecutedScenario, OutputFormat, RenderedFile, Scenario,
    ScenarioError, ScenarioRun,
};
