//! One module per pipeline stage. Every stage is a pure function of the
//! effective config and the artifacts earlier stages wrote: it reads
//! files, computes, writes files, and returns a [`RunReport`].

pub mod ae;
pub mod corpus;
pub mod featurize;
pub mod mine;
pub mod pipeline;
pub mod scoring;
pub mod siamese;
