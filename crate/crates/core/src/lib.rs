//! Simulation of two-step entanglement purification for photon pairs that are
//! entangled in both polarization and frequency.
//!
//! * [`qstate`]: DEPS and Bell-sector states, Werner mixtures, fidelities.
//! * [`optics`]: port routing, wave plates, wavelength conversion, the PBS
//!   parity check and σx measurement.
//! * [`protocol`]: bit-flip correction, phase-flip purification rounds, the
//!   closed-form recursions and the discard-only baseline.
//! * [`montecarlo`]: seeded trajectory sampling of the same circuit.
//! * [`cli`]: the `deps-purify` experiment runner.

pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
pub use qstate::{
    fidelity, make_basis_state, make_bell_state, mix, werner_state, BellClass, DensityOperator,
    DepsClass, PureState, Sector,
};
