pub mod fixtures;
pub mod oracle;
pub mod random_lp;
