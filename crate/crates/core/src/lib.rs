//! Worst-case sum-secrecy-rate optimization for a STAR-RIS aided RSMA SWIPT
//! downlink, plus the Monte-Carlo experiment harness around it.
//!
//! The two-step alternating optimizer lives in [`precoder`] (SPCA precoder
//! step with feasibility restoration) and [`ris`] (sequentially rank-one
//! relaxed SDP over the transmission/reflection beamforming); [`pipeline`]
//! drives the outer loop and experiments, and [`oracle`] provides independent
//! brute-force validation.

pub mod scenario;
pub mod precoder;
pub mod ris;
pub mod pipeline;
pub mod oracle;
pub mod presets;
pub mod surrogates;
pub mod rates;

pub use conic::BackendRegistry;
pub use rates::{PrecoderSet, RISProfile, RateReport};
pub use scenario::{ChannelSet, ScenarioConfig};
