pub mod atomic;
pub mod autodiff;
pub mod corpus;
pub mod encoder;
pub mod evaluation;
pub mod inter_aspect;
pub mod losses;
pub mod model;
pub mod training;
