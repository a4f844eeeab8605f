//! Background-activity denoising for dynamic vision sensor (DVS) event streams.
//!
//! The pipeline classifies each incoming event as signal or noise using a
//! stack of event-based binary images (EBBIs), a banked bit-packed memory
//! layout mirroring the hardware design, and a quantized single-hidden-layer
//! spiking network. Baseline spatiotemporal filters (BAF, STCF, ONF), a
//! ROC/AUC evaluation harness, synthetic stream generators, and an analytic
//! hardware cost/timing model round out the toolkit.

pub mod baseline;
pub mod bits;
pub mod ebbi;
pub mod error;
pub mod event;
pub mod hw;
pub mod metrics;
pub mod snn;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use event::{Decision, Event, EventStream, Label, Polarity, SensorGeometry};
