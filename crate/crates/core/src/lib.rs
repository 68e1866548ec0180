// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod perception;
pub mod scene;
pub mod policy;
pub mod haptics;
pub mod navigator;
pub mod sim;
pub mod replay;
