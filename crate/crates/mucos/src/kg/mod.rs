//! Triple storage: parsing, vocabularies, adjacency/density indexes and
//! dataset statistics.

mod index;
mod parse;
mod stats;
mod triple;
mod vocab;

pub use index::{build_graph, density, GraphIndex};
pub use parse::{load_splits, parse_triples, RawSplits};
pub use stats::{graph_stats, split_stats, GraphStats, StatsReport};
pub use triple::{EntityId, RawTriple, RelationId, SplitDataset, Triple};
pub use vocab::Vocabulary;
