#![allow(dead_code)]

pub mod ast_strategy;
pub mod embed_oracle;
pub mod gen;
pub mod oracle;
pub mod scenarios;
