//! Desk-scale mechanics for RL post-training of video-language models.
//!
//! The crate is organised around five subsystems:
//!
//! * [`frame_cache`]: offline video preprocessing into content-keyed cache
//!   files, with the sampling and resize math shared by the on-the-fly path.
//! * [`reward`]: the task-aware verifiable reward library and its dispatcher.
//! * [`rollout`]: mix-policy rollout groups, group-relative advantages, the
//!   asymmetric clipped surrogate and a differentiable mock policy.
//! * [`eval`]: a virtual-time simulator of the asynchronous IO / chunked
//!   prefill / decode evaluation pipeline plus the benchmark adapter registry.
//! * [`throughput`]: the per-step phase accounting model for cached versus
//!   realtime video loading.
//!
//! Data-parallel loops go through [`par`], which maps onto rayon when the
//! `parallel` feature is enabled (the default) and onto plain iterators
//! otherwise.

pub mod config;
pub mod eval;
pub mod frame_cache;
pub mod par;
pub mod reward;
pub mod rollout;
pub mod seed;
pub mod throughput;
