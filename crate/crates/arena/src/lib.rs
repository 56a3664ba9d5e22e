//! Session layer, plan diffs and the HTTP service behind the `arena` binary.

pub mod compare;
pub mod http;
pub mod session;
