//! Measures how the pseudo-relevance-feedback vocabulary of query keywords
//! drifts across decade sub-collections of a dated text corpus.

pub mod corpus;
pub mod experiment;
pub mod feedback;
pub mod index;
pub mod metrics;
pub mod partition;
pub mod retrieval;
pub mod synth;
pub mod textproc;
