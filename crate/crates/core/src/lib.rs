//! Certified secret-key rates for prepare-and-measure QKD protocols whose only
//! device assumption is a bound on the pairwise overlaps of the prepared states.
//!
//! The pipeline, bottom to top:
//!
//! * [`protocol`] — the n-state coherent-polarization protocol: Gram matrix of
//!   overlaps, ideal detection statistics, sifting and QBER bookkeeping.
//! * [`stats`] — observed statistics tables (counts or probabilities), the
//!   interface between simulation/experiment and the security analysis.
//! * [`channel`] — lossy, noisy, dark-count-afflicted channel model and a
//!   reproducible Monte Carlo round simulator.
//! * [`moment`] — the Hermitian moment-matrix relaxation of the eavesdropper's
//!   guessing probability, and its real-symmetric conic form.
//! * [`sdp`] — a self-contained dense primal-dual interior-point solver whose
//!   dual certificates are re-verified by an independent eigenvalue check.
//! * [`security`] — binary entropy, Clopper-Pearson tail bounds, and the
//!   asymptotic / finite-size key-rate reports.
//! * [`optimize`] — intensity optimization, transmission sweeps and threshold
//!   searches against the certified rate.
//! * [`realization`] — explicit finite-dimensional models used as independent
//!   oracles (honest-strategy values, feasibility checks).

pub mod beta;
pub mod channel;
pub mod moment;
pub mod optimize;
pub mod protocol;
pub mod realization;
pub mod sdp;
pub mod security;
pub mod stats;

pub use channel::{ChannelModel, RoundRecord};
pub use moment::{HierarchyLevel, MomentProblem, Monomial, PgBound};
pub use protocol::{GramConstraint, ProtocolSpec, Sifted};
pub use sdp::{ConicProblem, DualCertificate, SolveStatus};
pub use security::{KeyRateReport, TailBound};
pub use stats::StatTable;
