//! Independent reference implementations and constructed scenarios shared by
//! the integration tests.
#![allow(dead_code)]

pub mod oracle;
pub mod scenario;
pub mod trials;
