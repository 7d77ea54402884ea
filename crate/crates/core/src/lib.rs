//! Linear quantum kicked rotor ("Maryland model") driven by a Markov chain
//! of on/off kicks.
//!
//! * [`kicks`]: the two-state kick process, its moments and characteristic function.
//! * [`variance`]: exact and Monte Carlo momentum variance.
//! * [`evolution`]: density matrices under the averaged dynamical maps `Φ_N`.
//! * [`witness`]: Hilbert–Schmidt monotonicity and positivity probes of the
//!   intertwining maps.
//! * [`io`]: CSV, JSON and binary artifact formats.
//! * [`verify`]: the cross-checking oracle suite.

pub mod error;
pub mod evolution;
pub mod io;
pub mod kicks;
pub mod par;
pub mod params;
pub mod variance;
pub mod verify;
pub mod witness;

pub use error::{Error, Result};
pub use evolution::{DensityMatrix, MarkovKickMap};
pub use kicks::{MarkovKickProcess, PhaseVector, Realization};
pub use params::{RotorParams, Tau, TauKind};
