pub mod critical;
pub mod curve;
pub mod degree;
pub mod field;
pub mod knots3d;
pub mod ode;
pub mod orbits;
pub mod planar;
pub mod report;
pub mod scenario;
pub mod store;
pub mod plot;
