//! Port knocking and single packet authorization, end to end: client-side
//! packet construction, a server engine with a default-drop abstract
//! firewall, a deterministic network simulator with attacker models, and
//! an evaluator that scores implementation profiles against behavioral
//! scenarios.
//!
//! Nothing in this crate touches a real network or a real firewall; the
//! wire formats are bit-exact, the transport is simulated.

pub mod addr;
pub mod clock;
pub mod eval;
pub mod knock;
pub mod rng;
pub mod server;
pub mod sim;
pub mod spa;

pub use addr::{NetAddress, Protocol};
pub use clock::{to_minute_stamp, MinuteStamp, SimClock};
pub use rng::SeededRng;
