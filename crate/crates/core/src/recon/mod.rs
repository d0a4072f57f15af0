//! Reconstruction methods and the shared solver machinery.

pub mod baselines;
pub mod dss;
pub mod l1ball;
pub mod optim;
pub mod trace;
pub mod tv;
