//! Logic-form machinery for controllable logical table-to-text generation.
//!
//! Tables are loaded into [`table::Table`]; logic forms are parsed, type
//! checked and executed by [`dsl`] and [`executor`]; [`templates`] and
//! [`synth`] mine and instantiate templates into execution-true candidates;
//! [`realize`] renders them as text; [`pipeline`] runs the full
//! synthesize-generate-verify-sample loop; [`metrics`] scores the result.

pub mod demo;
pub mod dsl;
pub mod executor;
pub mod metrics;
pub mod pipeline;
pub mod realize;
pub mod synth;
pub mod table;
pub mod templates;
