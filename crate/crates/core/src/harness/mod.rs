//! Configuration, the registered benchmark cases, bit-exact output formats,
//! and case execution.

pub mod config;
pub mod dump;
pub mod registry;
pub mod run;

pub use config::RunConfig;
pub use dump::{
    format_cross_section, format_field_dump, parse_field_dump, parse_field_dump_str,
    write_field_dump, RunManifest,
};
pub use registry::{check_exact_consistency, lookup, registry, CaseSpec};
pub use run::{run_case, verify_case, RunOutcome, RunStatus, SECTION_FRACTIONS};
