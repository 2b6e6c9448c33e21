//! Bit-exact fixed-point simulation of an event-camera action recognition
//! pipeline with an on-chip style continual learning head.
//!
//! The stages are, in order:
//!
//! * [`event_ingest`]: raw event streams to sparse two-polarity count frames.
//! * [`snn`]: a spiking CNN (conv3x3 layers, flatten, fully connected) with
//!   8-bit weights and saturating 24-bit membranes, plus a float oracle.
//! * [`agg_norm`]: temporal aggregation of feature spikes and a division-free
//!   L2 normalization built on a lookup-table inverse square root.
//! * [`clp`]: the prototype learner (winner-take-all inference, imprinting
//!   on error or novelty) and a float reference variant.
//! * [`baselines`]: streaming NCM, SLDA, replay and fine-tuning learners.
//! * [`learner`]: the sample-at-a-time interface shared by all learners.
//! * [`harness`]: class-incremental protocol, synthetic data, op counting,
//!   reports and the CLI plumbing.

pub mod agg_norm;
pub mod baselines;
pub mod clp;
pub mod event_ingest;
pub mod harness;
pub mod learner;
pub mod snn;

pub(crate) mod fixed;
