//! Visible light positioning from three LEDs by combining camera bearings
//! with received signal strength, plus a four-LED vision-only baseline and a
//! Monte Carlo harness for coverage, accuracy and timing studies.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod channel;
pub mod estimator;
pub mod geometry;
pub mod p3p;
pub mod poly;
pub mod sim;
