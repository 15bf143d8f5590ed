//! The chapters of the guide, compiled as doc-tests so the snippets stay correct.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/systems.md")]
pub mod systems {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/observables.md")]
pub mod observables {}

#[doc = include_str!("../../../book/src/cylinders.md")]
pub mod cylinders {}

#[doc = include_str!("../../../book/src/maxima.md")]
pub mod maxima {}

#[doc = include_str!("../../../book/src/hitting.md")]
pub mod hitting {}

#[doc = include_str!("../../../book/src/conditions.md")]
pub mod conditions {}

#[doc = include_str!("../../../book/src/laws.md")]
pub mod laws {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
