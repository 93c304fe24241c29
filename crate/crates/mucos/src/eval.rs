//! Ranking evaluation: MRR and Hits@k over general and relation-filtered
//! slices, in raw or filtered ranking mode.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, RelationId, SplitDataset, Triple, Vocabulary};
use crate::{Error, Result, Task};

/// Ranking protocol. `Raw` ranks the truth against every class; `Filtered`
/// excludes classes that would complete another known train/valid/test
/// triple (the comparison-literature convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Raw,
    Filtered,
}

/// Scoring abstraction over the two prediction tasks, so the evaluator works
/// for the trained model, stubs and oracles alike.
pub trait Scorer {
    fn n_entities(&self) -> usize;
    fn n_relations(&self) -> usize;
    /// Distribution over relations for query (h, ?, t).
    fn score_relation(&self, h: EntityId, t: EntityId) -> Result<Vec<f64>>;
    /// Distribution over entities for query (h, r, ?).
    fn score_tail(&self, h: EntityId, r: RelationId) -> Result<Vec<f64>>;
}

/// Rank of one evaluated query, 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRecord {
    pub triple: Triple,
    pub task: Task,
    pub mode: RankingMode,
    pub rank: usize,
}

/// Metrics for one (task, slice, mode) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub slice: String,
    pub mode: RankingMode,
    pub n_queries: usize,
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
}

impl MetricsReport {
    pub fn hits(&self, k: usize) -> f64 {
        self.hits.get(&k).copied().unwrap_or(f64::NAN)
    }
}

/// Bare metrics before slice labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub n_queries: usize,
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
}

impl Metrics {
    pub fn hits(&self, k: usize) -> f64 {
        self.hits.get(&k).copied().unwrap_or(f64::NAN)
    }
}

pub const HITS_KS: [usize; 4] = [1, 3, 5, 10];

/// Rank of the ground-truth class under a score vector: one plus the number
/// of non-excluded competitors scoring strictly higher, with ties counted
/// pessimistically (an equal-scored competitor ranks above the truth).
pub fn rank_of_truth(dist: &[f64], truth: usize, excluded: &HashSet<usize>) -> Result<usize> {
    if truth >= dist.len() {
        return Err(Error::Eval(format!(
            "truth index {truth} out of range for {} classes",
            dist.len()
        )));
    }
    if excluded.contains(&truth) {
        return Err(Error::Eval("ground-truth class is excluded".into()));
    }
    let truth_score = dist[truth];
    let mut above = 0usize;
    for (c, &score) in dist.iter().enumerate() {
        if c == truth || excluded.contains(&c) {
            continue;
        }
        if score >= truth_score {
            above += 1;
        }
    }
    Ok(1 + above)
}

/// MRR and Hits@{1,3,5,10} over a rank list; empty input is an error
/// (undefined averages).
pub fn compute_metrics(ranks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(Error::Eval("cannot compute metrics over zero queries".into()));
    }
    if let Some(&bad) = ranks.iter().find(|&&r| r == 0) {
        return Err(Error::Eval(format!("invalid rank {bad}; ranks are 1-based")));
    }
    let n = ranks.len() as f64;
    let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits = HITS_KS
        .iter()
        .map(|&k| {
            let frac = ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
            (k, frac)
        })
        .collect();
    Ok(Metrics {
        n_queries: ranks.len(),
        mrr,
        hits,
    })
}

/// Known completions across all splits, used to build filtered-mode
/// exclusion sets.
pub struct KnownTriples {
    tails: HashMap<(EntityId, RelationId), HashSet<usize>>,
    relations: HashMap<(EntityId, EntityId), HashSet<usize>>,
}

impl KnownTriples {
    pub fn build(splits: &SplitDataset) -> Self {
        let mut tails: HashMap<(EntityId, RelationId), HashSet<usize>> = HashMap::new();
        let mut relations: HashMap<(EntityId, EntityId), HashSet<usize>> = HashMap::new();
        for t in splits
            .train
            .iter()
            .chain(splits.valid.iter())
            .chain(splits.test.iter())
        {
            tails
                .entry((t.head, t.relation))
                .or_default()
                .insert(t.tail.idx());
            relations
                .entry((t.head, t.tail))
                .or_default()
                .insert(t.relation.idx());
        }
        KnownTriples { tails, relations }
    }

    /// Classes to exclude when ranking `triple`'s masked slot: every known
    /// completion other than the truth itself.
    pub fn excluded(&self, triple: &Triple, task: Task) -> HashSet<usize> {
        let (known, truth) = match task {
            Task::Tail => (
                self.tails.get(&(triple.head, triple.relation)),
                triple.tail.idx(),
            ),
            Task::Relation => (
                self.relations.get(&(triple.head, triple.tail)),
                triple.relation.idx(),
            ),
        };
        let mut excluded = known.cloned().unwrap_or_default();
        excluded.remove(&truth);
        excluded
    }
}

/// Evaluation settings: ranking protocol plus which relation-filtered slice
/// (for example the drug-target relation) to report beside the general one.
#[derive(Debug, Clone, Default)]
pub struct EvalConfig {
    pub mode: Option<RankingMode>,
    /// Relation label selecting a dedicated slice of the test split.
    pub slice_relation: Option<String>,
    /// Additionally emit one slice per relation present in the test split.
    pub per_relation: bool,
}

/// Outcome of an evaluation run: the aggregated reports plus the raw rank
/// records they were computed from, so reports can be re-derived offline.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub reports: Vec<MetricsReport>,
    pub ranks: Vec<RankRecord>,
}

/// Ranks every test triple on the masked task slot and aggregates MRR and
/// Hits@k for the general slice plus any configured relation slices.
pub fn evaluate(
    scorer: &dyn Scorer,
    splits: &SplitDataset,
    vocab: &Vocabulary,
    task: Task,
    cfg: &EvalConfig,
) -> Result<EvalOutcome> {
    if splits.test.is_empty() {
        return Err(Error::Eval("test split is empty".into()));
    }
    let mode = cfg.mode.unwrap_or(RankingMode::Raw);
    let slice_relation = match &cfg.slice_relation {
        Some(label) => Some(vocab.relation_id(label).ok_or_else(|| {
            Error::config(format!("slice relation '{label}' not in vocabulary"))
        })?),
        None => None,
    };
    let known = match mode {
        RankingMode::Filtered => Some(KnownTriples::build(splits)),
        RankingMode::Raw => None,
    };

    let empty = HashSet::new();
    let mut ranks = Vec::with_capacity(splits.test.len());
    for triple in &splits.test {
        let dist = match task {
            Task::Relation => scorer.score_relation(triple.head, triple.tail)?,
            Task::Tail => scorer.score_tail(triple.head, triple.relation)?,
        };
        let truth = match task {
            Task::Relation => triple.relation.idx(),
            Task::Tail => triple.tail.idx(),
        };
        let excluded = match &known {
            Some(k) => k.excluded(triple, task),
            None => empty.clone(),
        };
        let rank = rank_of_truth(&dist, truth, &excluded)?;
        ranks.push(RankRecord {
            triple: *triple,
            task,
            mode,
            rank,
        });
    }

    let mut reports = Vec::new();
    let general: Vec<usize> = ranks.iter().map(|r| r.rank).collect();
    reports.push(label_report(compute_metrics(&general)?, task, "general", mode));

    if let Some(rel) = slice_relation {
        let slice: Vec<usize> = ranks
            .iter()
            .filter(|r| r.triple.relation == rel)
            .map(|r| r.rank)
            .collect();
        if slice.is_empty() {
            return Err(Error::Eval(format!(
                "no test triples with relation '{}'",
                vocab.relation_label(rel).unwrap_or("?")
            )));
        }
        let name = format!(
            "relation:{}",
            vocab.relation_label(rel).unwrap_or("?")
        );
        reports.push(label_report(compute_metrics(&slice)?, task, &name, mode));
    }

    if cfg.per_relation {
        let mut present: Vec<RelationId> = Vec::new();
        let mut seen = HashSet::new();
        for r in &ranks {
            if seen.insert(r.triple.relation) {
                present.push(r.triple.relation);
            }
        }
        present.sort_unstable();
        for rel in present {
            let slice: Vec<usize> = ranks
                .iter()
                .filter(|r| r.triple.relation == rel)
                .map(|r| r.rank)
                .collect();
            let name = format!(
                "relation:{}",
                vocab.relation_label(rel).unwrap_or("?")
            );
            reports.push(label_report(compute_metrics(&slice)?, task, &name, mode));
        }
    }

    Ok(EvalOutcome { reports, ranks })
}

fn label_report(m: Metrics, task: Task, slice: &str, mode: RankingMode) -> MetricsReport {
    MetricsReport {
        task,
        slice: slice.to_string(),
        mode,
        n_queries: m.n_queries,
        mrr: m.mrr,
        hits: m.hits,
    }
}

impl std::fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:?}/{:?} slice={} n={} MRR={:.4}",
            self.task, self.mode, self.slice, self.n_queries, self.mrr
        )?;
        for (k, v) in &self.hits {
            write!(f, " Hits@{k}={v:.4}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(ids: &[usize]) -> HashSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of_truth(&[0.1, 0.5, 0.4], 1, &ex(&[])).unwrap(), 1);
        // pessimistic tie: the equal-scored class 1 counts as above
        assert_eq!(rank_of_truth(&[0.4, 0.4, 0.2], 0, &ex(&[])).unwrap(), 2);
        // exclusion removes the better class
        assert_eq!(rank_of_truth(&[0.5, 0.3, 0.2], 1, &ex(&[0])).unwrap(), 1);
    }

    #[test]
    fn excluded_truth_is_contract_violation() {
        assert!(rank_of_truth(&[0.5, 0.5], 0, &ex(&[0])).is_err());
    }

    #[test]
    fn constant_scores_never_earn_rank_one() {
        let dist = vec![0.25; 4];
        assert_eq!(rank_of_truth(&dist, 2, &ex(&[])).unwrap(), 4);
    }

    #[test]
    fn metrics_examples() {
        let m = compute_metrics(&[1, 1, 1]).unwrap();
        assert_eq!(m.mrr, 1.0);
        for k in HITS_KS {
            assert_eq!(m.hits(k), 1.0);
        }

        let m = compute_metrics(&[1, 2, 4]).unwrap();
        assert!((m.mrr - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-12);
        assert!((m.hits(1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.hits(3) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.hits(10), 1.0);

        let m = compute_metrics(&[11]).unwrap();
        assert_eq!(m.hits(10), 0.0);
        assert!((m.mrr - 1.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn empty_rank_list_is_error() {
        assert!(compute_metrics(&[]).is_err());
    }

    #[test]
    fn hits_non_decreasing_and_bounds_hold() {
        let ranks = [3usize, 1, 7, 2, 40, 1, 9, 5];
        let m = compute_metrics(&ranks).unwrap();
        let mut prev = 0.0;
        for k in HITS_KS {
            assert!(m.hits(k) >= prev);
            prev = m.hits(k);
        }
        assert!(m.hits(1) <= m.mrr);
        assert!(m.mrr <= 1.0);
        assert!(m.mrr > 0.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let a = compute_metrics(&[4, 1, 2, 9]).unwrap();
        let b = compute_metrics(&[9, 2, 1, 4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filtered_exclusions_come_from_all_splits() {
        let splits = SplitDataset {
            train: vec![Triple::new(0, 0, 1)],
            valid: vec![Triple::new(0, 0, 2)],
            test: vec![Triple::new(0, 0, 3)],
        };
        let known = KnownTriples::build(&splits);
        let excluded = known.excluded(&splits.test[0], Task::Tail);
        assert_eq!(excluded, ex(&[1, 2]));
        // the truth itself is never excluded
        assert!(!excluded.contains(&3));
    }
}
