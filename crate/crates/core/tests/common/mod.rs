//! Checks shared by the test targets and the acceptance report.
#![allow(dead_code)]

pub mod grad;
pub mod oracle;
pub mod props;
