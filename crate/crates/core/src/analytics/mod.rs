//! Computations the exploration invokes. All functions are pure over their
//! inputs.

mod bursts;
mod centrality;
mod compare;
mod expansion;
mod topics;

pub use bursts::{
    detect_bursts, local_peakyness, BurstInterval, DEFAULT_MIN_LEN, DEFAULT_TAU, DEFAULT_WINDOW, EPSILON,
};
pub use centrality::{
    betweenness, betweenness_raw, influencers, pagerank, top_fraction, CentralityAlgorithm, CentralityScores,
    InfluencerReport, PageRankConfig,
};
pub use compare::{ks_two_sample, KsResult};
pub use expansion::{
    bursty_hashtags, bursty_hashtags_records, cooccurrence_expand, cooccurrence_expand_records, merge_intervals,
};
pub use topics::{jensen_shannon, lda_fit, pearson_matrix, topic_outputs, LdaParams, TopicModel, TopicSummary};
