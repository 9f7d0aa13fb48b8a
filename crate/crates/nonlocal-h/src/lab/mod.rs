//! Scenario runner: coefficient sequences, homogenisation reports, div-curl and compactness
//! checks, and the split-incomparability demo.

pub mod config;
pub mod incomparable;
pub mod report;
pub mod scenarios;

pub use config::{DataKind, Family, ScenarioConfig, Seeds};
pub use incomparable::incomparable_demo;
pub use report::{Status, Table, Verdict};
pub use scenarios::{
    compactness_demo, divcurl_check, homogenised_limit, homogenised_tensor, layered_sequence, run_divcurl,
    run_homogenisation, LayeredParams,
};
