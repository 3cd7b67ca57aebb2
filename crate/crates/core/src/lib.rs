pub mod auction;
pub mod chain;
pub mod circuit;
pub mod engine;
pub mod field;
pub mod gadgets;
pub mod preprocessing;
pub mod quorum;
pub mod sharing;
pub mod transport;
