//! Downlink control channel: control format, candidate locations, blind
//! decoding and DCI parsing.

pub mod dci;
pub mod decode;
pub mod layout;
pub mod pcfich;

pub use dci::{parse_dci, tbs_lookup, DecodePath, Dci, DciFormat, DciSizes, Direction};
pub use layout::{enumerate_locations, CandidateLocation, Cfi, ControlLayout, Layouts};
pub use pcfich::{cfi_decode, CfiDecision};
pub use decode::{energy_gate, ControlDecoder, DecodeMode, RntiOracle, SubframeReport};
