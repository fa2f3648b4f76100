pub mod cparser;
pub mod formula;
pub mod metrics;
pub mod pipeline;
pub mod prepass;
pub mod rast;
