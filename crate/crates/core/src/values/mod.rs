//! Value annotation: Schwartz values, free-text value conflicts and
//! trade-offs, and clustering of value phrases into named concepts.

pub mod cluster;
pub mod conflicts;
pub mod naming;
pub mod schwartz;

pub use cluster::{cluster_values, ClusterOrigin, ClusterParams, ClusterTable, ValueCluster};
pub use conflicts::{
    annotate_conflicts, annotate_tradeoffs, conflict_text, match_tradeoffs, normalize, parse_conflicts,
    parse_tradeoffs, tradeoff_text, value_text, TradeOff, ValueConflict, MATCH_FLOOR,
};
pub use naming::{name_clusters, parse_cluster_name, ClusterName};
pub use schwartz::{annotate_schwartz, parse_schwartz, SchwartzAnnotation, SchwartzValue};
