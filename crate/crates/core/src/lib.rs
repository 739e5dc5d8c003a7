//! Analytics for URL-sharing activity across Web communities.
//!
//! The crate has two halves:
//!
//! * a discrete-time multivariate Hawkes model ([`hawkes`]) with Gibbs-based
//!   posterior inference ([`gibbs`]) and cross-community influence
//!   aggregation ([`influence`]), fitted per URL to binned event counts;
//! * descriptive temporal analytics ([`temporal`]) over the same event
//!   streams: appearance sequences, lag distributions, and flow graphs.
//!
//! The [`events`] module owns ingestion, per-URL grouping, dataset filtering,
//! and time binning shared by both halves.

pub mod events;
pub mod gibbs;
pub mod hawkes;
pub mod influence;
pub mod temporal;
