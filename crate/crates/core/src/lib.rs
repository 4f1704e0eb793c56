#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod krein;
pub mod oracle;
pub mod radial;
pub mod scan;
pub mod schur;
pub mod sources;
pub mod special;
pub mod tail;
