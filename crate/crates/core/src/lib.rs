//! Energy-saving content pushing for small-cell networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`quadrature`]: adaptive Gauss–Kronrod integration on finite and
//!   semi-infinite intervals.
//! * [`layout`]: hexagonal small-cell geometry and nearest-site association.
//! * [`channel`]: path loss, Rayleigh fading and the Gamma law of the
//!   equivalent channel gain; user trajectories.
//! * [`traffic`]: real-time occupancy chain, Zipf catalog, interest profiles
//!   and delivery requests.
//! * [`context`]: occupancy and channel statistics consumed by the planner.
//! * [`waterfill`]: per-slot allocation, expected energy/rate functionals,
//!   the two-tier bisection planner and the offline full-information oracle.
//! * [`sim`]: the slotted multi-cell engine comparing unicast pushing,
//!   broadcast pre-caching and the no-cache baseline.

pub mod channel;
pub mod context;
pub mod error;
pub mod layout;
pub mod quadrature;
pub mod seed;
pub mod sim;
pub mod traffic;
pub mod waterfill;

pub use error::{Error, Result};
