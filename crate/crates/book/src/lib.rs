//! Compiles every Rust listing of the guide in `book/` as a doc-test.
//!
//! mdbook cannot test listings that depend on an external crate, so each
//! chapter is pulled in here as the documentation of an empty module and
//! `cargo test --doc` runs its code blocks. One module per chapter keeps
//! failures traceable to their chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/getting-started.md")]
pub mod getting_started {}
#[doc = include_str!("../../../book/src/boundaries.md")]
pub mod boundaries {}
#[doc = include_str!("../../../book/src/derivatives.md")]
pub mod derivatives {}
#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/loss.md")]
pub mod loss {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/slices.md")]
pub mod slices {}
