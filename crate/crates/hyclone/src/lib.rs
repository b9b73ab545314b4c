pub mod corpus;
pub mod error;
pub mod sandbox;
pub mod llm;
pub mod pipeline;
pub mod experiments;
pub mod config;
pub mod cli;
