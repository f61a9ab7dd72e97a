//! Observation-to-robot motion transfer through Labanotation.
//!
//! Recorded skeleton motion is segmented at brief stops of each body part,
//! the key poses are quantized into Labanotation direction/level symbols,
//! and the resulting score is decoded into joint-space key poses and
//! trajectories for a declaratively described robot.

// `!(x > eps)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod encoder;
pub mod keyframe;
pub mod laban;
pub mod pipeline;
pub mod robot;
pub mod skeleton;
pub mod trajectory;
