#![allow(dead_code)]

pub mod checks;
pub mod fixture;
pub mod gen;
pub mod oracle;
