//! Query plan spaces and informative alternative plan selection.
//!
//! The pipeline: parse a select-project-join query ([`sqlfront`]), enumerate
//! and cost its physical plans against table statistics ([`catalog`],
//! [`planspace`]), describe plans by structure, content and cost
//! ([`planmodel`], [`metrics`]) and pick the alternatives most worth
//! showing next to the optimizer's choice ([`tips`]).

pub mod catalog;
pub mod metrics;
pub mod planmodel;
pub mod planspace;
pub mod sqlfront;
pub mod tips;
