pub mod alpha_sim;
pub mod compare;
pub mod eval;
pub mod gen_data;
pub mod ingest;
pub mod oracle_check;
pub mod train;
