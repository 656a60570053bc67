#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chaos;
pub mod error;
pub mod experiments;
pub mod field;
pub mod linalg;
pub mod manifold;
pub mod rosenblatt;
pub mod seeding;
pub mod temporal;

pub use error::{Error, Result};
