pub mod fixedmath;
pub mod slotcodec;
pub mod p2core;
pub mod ormer;
pub mod baselines;
pub mod costmodel;
pub mod metrics;
pub mod harness;
