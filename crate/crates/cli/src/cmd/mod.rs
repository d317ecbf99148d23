pub mod eval;
pub mod fit;
pub mod gen;
pub mod mask;
pub mod replay;
pub mod report;
pub mod segment;
