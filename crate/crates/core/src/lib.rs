pub mod constructions;
pub mod entanglement;
pub mod error;
pub mod feng;
pub mod linalg;
pub mod polynomials;
pub mod search;
pub mod table1;
