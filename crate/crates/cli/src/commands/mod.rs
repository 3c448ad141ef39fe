pub mod bench;
pub mod classify;
pub mod eval;
pub mod sample;
pub mod train;
