//! The book, compiled: every Rust listing in `book/src` runs as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/wakes.md")]
pub mod wakes {}

#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}

#[doc = include_str!("../../../book/src/environments.md")]
pub mod environments {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/transfer.md")]
pub mod transfer {}

#[doc = include_str!("../../../book/src/bridge.md")]
pub mod bridge {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
