pub mod bisim;
pub mod cli;
pub mod costlab;
pub mod lang;
pub mod padding;
pub mod rational;
pub mod sectype;
pub mod semantics;
