//! Indoor positioning from superposed visible-light LED signatures.
//!
//! All ceiling LEDs transmit random binary IDs at once. A photodiode on the
//! floor receives their superposition weighted by the line-of-sight optical
//! channel, which is sparse because only nearby LEDs cover the receiver.
//! Orthogonal matching pursuit recovers the sparse gain vector and a
//! distance-gated proximity rule turns the strongest detections into a
//! position estimate.
//!
//! - [`geometry`]: floor, LED grid, coverage disks, `K_max`.
//! - [`channel`]: Lambertian LOS gain.
//! - [`signal`]: signatures, `x = λ ⊙ α`, noisy synthesis at a target SNR.
//! - [`recovery`]: orthogonal matching pursuit.
//! - [`positioning`]: sort, gate and average.
//! - [`eval`]: Monte-Carlo trials and sweeps.
//! - [`config`], [`cli`]: run configuration and command-line front end.

pub mod channel;
pub mod cli;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod positioning;
pub mod recovery;
pub mod seeds;
pub mod signal;

pub use channel::{ChannelGainVector, ChannelParams};
pub use config::{RunConfig, SweepAxis, UdSampling};
pub use eval::{run_sweep, run_trial, Scenario, SweepPoint, SweepResult, TrialResult};
pub use geometry::{CoverageVector, LedPosition, Point2, SceneGeometry, UserPosition};
pub use positioning::{Estimator, GatingParams, PositionEstimate};
pub use recovery::{omp, SparseEstimate};
pub use signal::{ReceivedSignal, SignatureMatrix, SparseGainVector};
