use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GraphIndex, SplitDataset, Triple};
use crate::{Error, Result};

/// Dataset statistics for one triple list (a split, or all splits pooled).
///
/// `avg_density_input` is the scalar a cost model would consume for this
/// graph. It cannot be derived from the other fields in a canonical way, so
/// the computed fallback here is `avg_degree`; callers may substitute their
/// own constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub avg_degree: f64,
    pub relation_count: usize,
    pub avg_relation_appearance: f64,
    pub avg_density_input: f64,
}

/// Per-split plus overall statistics. Empty valid/test splits are reported
/// as absent rather than as zero-node errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsReport {
    pub train: GraphStats,
    pub valid: Option<GraphStats>,
    pub test: Option<GraphStats>,
    pub overall: GraphStats,
}

/// Statistics over a single triple list. Node and relation counts are the
/// distinct symbols appearing in the list; zero nodes means the averages are
/// undefined and is reported as an error.
pub fn split_stats(triples: &[Triple]) -> Result<GraphStats> {
    let mut nodes = HashSet::new();
    let mut relations = HashSet::new();
    for t in triples {
        nodes.insert(t.head);
        nodes.insert(t.tail);
        relations.insert(t.relation);
    }
    if nodes.is_empty() {
        return Err(Error::config(
            "no nodes in triple list: averages are undefined",
        ));
    }
    let node_count = nodes.len();
    let edge_count = triples.len();
    let relation_count = relations.len();
    let avg_degree = edge_count as f64 / node_count as f64;
    Ok(GraphStats {
        node_count,
        edge_count,
        avg_degree,
        relation_count,
        avg_relation_appearance: edge_count as f64 / relation_count as f64,
        avg_density_input: avg_degree,
    })
}

/// Per-split and overall statistics for a dataset whose index is `g`.
pub fn graph_stats(g: &GraphIndex, splits: &SplitDataset) -> Result<StatsReport> {
    debug_assert_eq!(g.triple_count(), splits.train.len());
    let train = split_stats(&splits.train)?;
    let valid = if splits.valid.is_empty() {
        None
    } else {
        Some(split_stats(&splits.valid)?)
    };
    let test = if splits.test.is_empty() {
        None
    } else {
        Some(split_stats(&splits.test)?)
    };
    let mut pooled =
        Vec::with_capacity(splits.train.len() + splits.valid.len() + splits.test.len());
    pooled.extend_from_slice(&splits.train);
    pooled.extend_from_slice(&splits.valid);
    pooled.extend_from_slice(&splits.test);
    let overall = split_stats(&pooled)?;
    Ok(StatsReport {
        train,
        valid,
        test,
        overall,
    })
}

impl GraphStats {
    /// Flat key-value lines, one stable key per field.
    pub fn render_kv(&self, prefix: &str) -> String {
        format!(
            "{p}.node_count={}\n{p}.edge_count={}\n{p}.avg_degree={:.6}\n\
             {p}.relation_count={}\n{p}.avg_relation_appearance={:.6}\n\
             {p}.avg_density_input={:.6}\n",
            self.node_count,
            self.edge_count,
            self.avg_degree,
            self.relation_count,
            self.avg_relation_appearance,
            self.avg_density_input,
            p = prefix
        )
    }
}

impl StatsReport {
    pub fn render_kv(&self) -> String {
        let mut out = self.train.render_kv("train");
        match &self.valid {
            Some(s) => out.push_str(&s.render_kv("valid")),
            None => out.push_str("valid.empty=true\n"),
        }
        match &self.test {
            Some(s) => out.push_str(&s.render_kv("test")),
            None => out.push_str("test.empty=true\n"),
        }
        out.push_str(&self.overall.render_kv("overall"));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphIndex;

    fn toy() -> Vec<Triple> {
        vec![Triple::new(0, 0, 1), Triple::new(0, 1, 2), Triple::new(1, 0, 2)]
    }

    #[test]
    fn toy_graph_stats() {
        let s = split_stats(&toy()).unwrap();
        assert_eq!(s.node_count, 3);
        assert_eq!(s.edge_count, 3);
        assert!((s.avg_degree - 1.0).abs() < 1e-12);
        assert_eq!(s.relation_count, 2);
        assert!((s.avg_relation_appearance - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_split_is_error() {
        assert!(split_stats(&[]).is_err());
    }

    #[test]
    fn overall_pools_all_splits() {
        let splits = SplitDataset {
            train: toy(),
            valid: vec![Triple::new(2, 1, 3)],
            test: vec![Triple::new(3, 0, 0)],
        };
        let g = GraphIndex::build(&splits.train, 4, 2).unwrap();
        let report = graph_stats(&g, &splits).unwrap();
        assert_eq!(report.overall.node_count, 4);
        assert_eq!(report.overall.edge_count, 5);
        assert_eq!(report.train.node_count, 3);
        assert_eq!(report.valid.as_ref().unwrap().edge_count, 1);
        // avg_degree = edge_count / node_count, per split
        assert!((report.overall.avg_degree - 5.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn kv_report_has_stable_keys() {
        let s = split_stats(&toy()).unwrap();
        let kv = s.render_kv("train");
        for key in [
            "train.node_count=",
            "train.edge_count=",
            "train.avg_degree=",
            "train.relation_count=",
            "train.avg_relation_appearance=",
            "train.avg_density_input=",
        ] {
            assert!(kv.contains(key), "missing {key} in {kv}");
        }
    }
}
