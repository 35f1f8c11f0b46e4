pub mod analysis;
pub mod cli;
pub mod lattice;
pub mod matcher;
pub mod montecarlo;
pub mod noise;
pub mod oracle;
pub mod pilot;
pub mod seed;
