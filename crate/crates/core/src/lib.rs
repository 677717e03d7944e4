//! Dynamic-programming lattices for detection-based tracking, simultaneous
//! detection and tracking over score prisms, HMM event recognition, and the
//! fully joint detection + tracking + event objective.
//!
//! Every optimizer in this crate maximizes a sum of log-domain terms:
//!
//! * `f` - detection score of the chosen box or prism cell,
//! * `g` - temporal coherency between boxes in adjacent frames,
//! * `h` - HMM emission log-probability of a box under a state,
//! * `a` - HMM transition log-probability between adjacent states.
//!
//! The modules build up from plain tracking ([`tracking`]) through the
//! distance-transform accelerated prism tracker ([`pyramid`]), the
//! track x state cross-product lattice ([`events`]) and finally the
//! cell x state lattice ([`unified`]).

pub mod bench;
pub mod detection;
pub mod error;
pub mod eval;
pub mod events;
pub mod formats;
pub mod gdt;
pub mod pyramid;
pub mod synth;
pub mod tracking;
pub mod unified;

pub use detection::{FrameDetections, MotionModel, ScoredBox};
pub use error::{Error, Result};
