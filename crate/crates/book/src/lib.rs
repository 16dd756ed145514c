//! Chapters of the guide in `book/`, compiled here so every snippet runs as a
//! doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/moments.md")]
pub mod moments {}

#[doc = include_str!("../../../book/src/tails.md")]
pub mod tails {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/serial.md")]
pub mod serial {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
