//! Synthetic dataset generators for tests, benchmarks and demos.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kg::{SplitDataset, Triple, Vocabulary};
use crate::{Error, Result};

/// A generated dataset: labelled vocabulary plus resolved splits.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub vocab: Vocabulary,
    pub splits: SplitDataset,
}

impl SynthDataset {
    /// Writes `train.txt`/`valid.txt`/`test.txt` in the tab-separated format.
    pub fn write_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, triples) in [
            ("train.txt", &self.splits.train),
            ("valid.txt", &self.splits.valid),
            ("test.txt", &self.splits.test),
        ] {
            let mut out = String::new();
            for t in triples {
                out.push_str(self.vocab.entity_label(t.head).unwrap());
                out.push('\t');
                out.push_str(self.vocab.relation_label(t.relation).unwrap());
                out.push('\t');
                out.push_str(self.vocab.entity_label(t.tail).unwrap());
                out.push('\n');
            }
            std::fs::write(dir.join(name), out)?;
        }
        Ok(())
    }
}

fn entity_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("ent{i:04}")).collect()
}

fn relation_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("rel{i}")).collect()
}

/// Deterministic-tail dataset: entities are partitioned into clusters and
/// `tail(h, r)` depends only on `(cluster(h), r)` via a shuffled lookup
/// table. Every (entity, relation) pair yields one triple; the pool is split
/// into train/valid/test such that every head keeps at least one train
/// triple and every (cluster, relation) combination stays represented in
/// train, so held-out pairs are predictable from structure alone.
pub fn functional_graph(
    n_entities: usize,
    n_relations: usize,
    n_valid: usize,
    n_test: usize,
    seed: u64,
) -> Result<SynthDataset> {
    if n_entities == 0 || n_relations == 0 || n_entities % n_relations != 0 {
        return Err(Error::config(
            "n_entities must be a positive multiple of n_relations",
        ));
    }
    let n_clusters = n_entities / n_relations;
    let pool = n_entities * n_relations;
    if n_valid + n_test >= pool {
        return Err(Error::config("holdout larger than the triple pool"));
    }
    let vocab = Vocabulary::from_labels(entity_labels(n_entities), relation_labels(n_relations))?;

    // deterministic rejection loop: nudge the stream until the holdout
    // leaves every head and every (cluster, relation) combo covered in train
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut cluster_of: Vec<usize> = (0..n_entities).map(|e| e % n_clusters).collect();
        cluster_of.shuffle(&mut rng);
        let mut tail_table: Vec<u32> = (0..n_entities as u32).collect();
        tail_table.shuffle(&mut rng); // tail_table[c * n_relations + r]

        let mut pairs: Vec<(u32, u32)> = (0..n_entities as u32)
            .flat_map(|h| (0..n_relations as u32).map(move |r| (h, r)))
            .collect();
        pairs.shuffle(&mut rng);

        let triple_of = |&(h, r): &(u32, u32)| {
            let t = tail_table[cluster_of[h as usize] * n_relations + r as usize];
            Triple::new(h, r, t)
        };
        let holdout = n_valid + n_test;
        let (held, kept) = pairs.split_at(holdout);
        let mut heads_in_train = vec![false; n_entities];
        let mut combo_in_train = vec![false; n_clusters * n_relations];
        for &(h, r) in kept {
            heads_in_train[h as usize] = true;
            combo_in_train[cluster_of[h as usize] * n_relations + r as usize] = true;
        }
        if !heads_in_train.iter().all(|&x| x) || !combo_in_train.iter().all(|&x| x) {
            continue;
        }
        let splits = SplitDataset {
            train: kept.iter().map(triple_of).collect(),
            valid: held[..n_valid].iter().map(triple_of).collect(),
            test: held[n_valid..].iter().map(triple_of).collect(),
        };
        splits.check_disjoint()?;
        return Ok(SynthDataset { vocab, splits });
    }
    Err(Error::config(
        "could not draw a holdout keeping train coverage; reduce the holdout size",
    ))
}

/// Dense single-relation graph: every node is head of `out_degree` triples
/// with distinct random tails. Average total degree is about
/// `2 * out_degree`, which makes full-mode contexts large while sampled
/// contexts stay at the configured k.
pub fn hub_graph(n_nodes: usize, out_degree: usize, seed: u64) -> Result<SynthDataset> {
    if n_nodes < 2 || out_degree == 0 || out_degree > n_nodes - 1 {
        return Err(Error::config(
            "hub graph needs n_nodes >= 2 and 1 <= out_degree < n_nodes",
        ));
    }
    let vocab = Vocabulary::from_labels(entity_labels(n_nodes), relation_labels(1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_nodes * out_degree);
    let mut others: Vec<u32> = (0..n_nodes as u32).collect();
    for h in 0..n_nodes as u32 {
        others.shuffle(&mut rng);
        let mut taken = 0;
        for &t in others.iter() {
            if t == h {
                continue;
            }
            train.push(Triple::new(h, 0, t));
            taken += 1;
            if taken == out_degree {
                break;
            }
        }
    }
    Ok(SynthDataset {
        vocab,
        splits: SplitDataset {
            train,
            valid: vec![],
            test: vec![],
        },
    })
}

/// Uniform random triple list (duplicates and self-loops allowed), for
/// property suites that compare indexes against brute-force oracles.
pub fn random_triples(
    rng: &mut ChaCha8Rng,
    n_entities: usize,
    n_relations: usize,
    n_triples: usize,
) -> Vec<Triple> {
    (0..n_triples)
        .map(|_| {
            Triple::new(
                rng.random_range(0..n_entities as u32),
                rng.random_range(0..n_relations as u32),
                rng.random_range(0..n_entities as u32),
            )
        })
        .collect()
}

/// Ablation fixture where the context carries the label signal: each head
/// has one marker triple `(h, marker_rel, M_b)` in train, and a content
/// triple `(h, query_rel, T_b)` whose tail is decided by the head's marker
/// type. Test heads have no content triple in train, so predicting their
/// held-out tails requires reading the marker from the head's neighborhood.
pub fn marker_graph(n_heads: usize, n_test_heads: usize, seed: u64) -> Result<SynthDataset> {
    if n_heads < 4 || n_test_heads + 2 >= n_heads || n_heads % 2 != 0 {
        return Err(Error::config(
            "marker graph needs an even n_heads and n_test_heads + 2 < n_heads",
        ));
    }
    // entities: M0, M1, T0, T1, then the heads
    let mut entities = vec![
        "marker0".to_string(),
        "marker1".to_string(),
        "target0".to_string(),
        "target1".to_string(),
    ];
    entities.extend((0..n_heads).map(|i| format!("head{i:03}")));
    let vocab = Vocabulary::from_labels(entities, vec!["has_marker".into(), "links_to".into()])?;

    let head_entity = |i: usize| (4 + i) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_heads).collect();
    order.shuffle(&mut rng);
    let test_heads: HashSet<usize> = order[..n_test_heads].iter().copied().collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..n_heads {
        let ty = (i % 2) as u32; // alternate marker types
        train.push(Triple::new(head_entity(i), 0, ty)); // (h, has_marker, M_ty)
        let content = Triple::new(head_entity(i), 1, 2 + ty); // (h, links_to, T_ty)
        if test_heads.contains(&i) {
            test.push(content);
        } else {
            train.push(content);
        }
    }
    Ok(SynthDataset {
        vocab,
        splits: SplitDataset {
            train,
            valid: vec![],
            test,
        },
    })
}
