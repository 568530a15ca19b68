//! The guide under `book/`, compiled so its snippets run as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/domain.md")]
pub mod domain {}

#[doc = include_str!("../../../book/src/planes.md")]
pub mod planes {}

#[doc = include_str!("../../../book/src/refinement.md")]
pub mod refinement {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/speech.md")]
pub mod speech {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
