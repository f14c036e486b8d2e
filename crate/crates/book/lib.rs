//! The guide under `book/` compiled as rustdoc so every Rust listing runs as a
//! doctest. One module per chapter keeps failures traceable to their page.

#[doc = include_str!("../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../book/src/command-line.md")]
pub mod command_line {}
#[doc = include_str!("../../book/src/preprocessing.md")]
pub mod preprocessing {}
#[doc = include_str!("../../book/src/classifiers.md")]
pub mod classifiers {}
#[doc = include_str!("../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../book/src/tuning.md")]
pub mod tuning {}
#[doc = include_str!("../../book/src/reproducibility.md")]
pub mod reproducibility {}
