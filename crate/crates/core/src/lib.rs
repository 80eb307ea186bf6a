#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod certificate;
pub mod certify;
pub mod cli;
pub mod linalg;
pub mod lmi;
pub mod reproduce;
pub mod sdp;
pub mod system;
pub mod verify;
