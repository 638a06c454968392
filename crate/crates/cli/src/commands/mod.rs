pub mod audit;
pub mod eaif;
pub mod eagf;
pub mod stats;
pub mod synth;
pub mod train;
