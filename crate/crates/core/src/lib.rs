pub mod bench;
pub mod geometry;
pub mod interp;
pub mod kernel;
pub mod l1regress;
pub mod linalg;
pub mod solver;
