pub mod backends;
pub mod eft;
pub mod lang;
pub mod par;
pub mod report;
pub mod residue;
pub mod ro;
