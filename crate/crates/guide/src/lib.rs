//! mdbook cannot run a book's code blocks against a real dependency tree,
//! so each chapter is included here as a doc comment and `cargo test --doc`
//! executes every snippet. A failing example in the book fails the
//! workspace tests.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/fock-states.md")]
pub mod fock_states {}

#[doc = include_str!("../../../book/src/elements.md")]
pub mod elements {}

#[doc = include_str!("../../../book/src/heralding.md")]
pub mod heralding {}

#[doc = include_str!("../../../book/src/concentration.md")]
pub mod concentration {}

#[doc = include_str!("../../../book/src/circuit-files.md")]
pub mod circuit_files {}

#[doc = include_str!("../../../book/src/permanents.md")]
pub mod permanents {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
