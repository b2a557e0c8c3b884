//! Multi-person pose association as a two-tier set-packing integer program,
//! solved by column generation over global poses and local assignments.

pub mod instance;
pub mod lp;
pub mod master;
pub mod oracle;
pub mod pricing;
pub mod rowgen;
pub mod solution;
pub mod solver;
pub mod svg;
