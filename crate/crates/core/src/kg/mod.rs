//! Knowledge graph storage: loading, reverse augmentation, pruning and
//! adjacency queries over a directed multigraph of `(head, relation, tail)`
//! facts.

mod chain;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use chain::{shortest_chains_from, shortest_relational_chain, ChainLookup, RelationalChain, DEFAULT_MAX_CHAIN_LEN};

pub const DEFAULT_DELIMITER: char = '|';
pub const REVERSE_SUFFIX: &str = "_reverse";

#[derive(Debug, Error)]
pub enum KgError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("knowledge graph has no triples")]
    Empty,
    #[error("graph is already reverse-augmented")]
    AlreadyAugmented,
    #[error("keep probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("unknown entity id {0}")]
    UnknownEntity(usize),
    #[error("unknown relation id {0}")]
    UnknownRelation(usize),
    #[error("max chain length must be at least 1")]
    InvalidMaxLen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self { head, relation, tail }
    }
}

/// Immutable directed multigraph with dense entity and relation ids.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_labels: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    /// `Some` once reverse edges have been added; maps each relation to its inverse.
    reverse_of: Option<Vec<RelationId>>,
    is_reverse: Vec<bool>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
    out_index: Vec<Vec<(RelationId, EntityId)>>,
    in_index: Vec<Vec<(RelationId, EntityId)>>,
}

/// Incremental builder assigning ids in first-appearance order.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entity_labels: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relation_labels: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    triple_set: HashSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, label: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(label) {
            return id;
        }
        let id = EntityId(self.entity_labels.len() as u32);
        self.entity_labels.push(label.to_string());
        self.entity_index.insert(label.to_string(), id);
        id
    }

    pub fn relation(&mut self, label: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(label) {
            return id;
        }
        let id = RelationId(self.relation_labels.len() as u32);
        self.relation_labels.push(label.to_string());
        self.relation_index.insert(label.to_string(), id);
        id
    }

    /// Adds a fact; returns false when it was already present.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let h = self.entity(head);
        let r = self.relation(relation);
        let t = self.entity(tail);
        let triple = Triple::new(h, r, t);
        if self.triple_set.insert(triple) {
            self.triples.push(triple);
            true
        } else {
            false
        }
    }

    pub fn build(self) -> KnowledgeGraph {
        let m = self.relation_labels.len();
        KnowledgeGraph::assemble(
            self.entity_labels,
            self.entity_index,
            self.relation_labels,
            self.relation_index,
            None,
            vec![false; m],
            self.triples,
            self.triple_set,
        )
    }
}

impl KnowledgeGraph {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        entity_labels: Vec<String>,
        entity_index: HashMap<String, EntityId>,
        relation_labels: Vec<String>,
        relation_index: HashMap<String, RelationId>,
        reverse_of: Option<Vec<RelationId>>,
        is_reverse: Vec<bool>,
        triples: Vec<Triple>,
        triple_set: HashSet<Triple>,
    ) -> Self {
        let n = entity_labels.len();
        let mut out_index = vec![Vec::new(); n];
        let mut in_index = vec![Vec::new(); n];
        for t in &triples {
            out_index[t.head.index()].push((t.relation, t.tail));
            in_index[t.tail.index()].push((t.relation, t.head));
        }
        Self {
            entity_labels,
            entity_index,
            relation_labels,
            relation_index,
            reverse_of,
            is_reverse,
            triples,
            triple_set,
            out_index,
            in_index,
        }
    }

    /// Loads delimiter-separated `head<d>relation<d>tail` lines, skipping blanks.
    pub fn load_triples(path: impl AsRef<Path>, delimiter: char) -> Result<Self, KgError> {
        let path = path.as_ref();
        let io_err = |source| KgError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        Self::read_triples(std::io::BufReader::new(file), delimiter).map_err(|e| match e {
            KgError::Io { source, .. } => io_err(source),
            other => other,
        })
    }

    pub fn read_triples(reader: impl BufRead, delimiter: char) -> Result<Self, KgError> {
        let mut builder = GraphBuilder::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| KgError::Io {
                path: "<reader>".into(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(delimiter).map(str::trim).collect();
            match fields.as_slice() {
                [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => {
                    builder.add(h, r, t);
                }
                _ => {
                    return Err(KgError::Parse {
                        line: i + 1,
                        message: format!("expected 3 '{delimiter}'-separated fields, got {}", fields.len()),
                    })
                }
            }
        }
        if builder.triples.is_empty() {
            return Err(KgError::Empty);
        }
        Ok(builder.build())
    }

    /// Writes the forward (non-reverse) facts in the loadable text format.
    pub fn write_triples(&self, mut out: impl std::io::Write, delimiter: char) -> std::io::Result<()> {
        for t in self.triples.iter().filter(|t| !self.is_reverse[t.relation.index()]) {
            writeln!(
                out,
                "{}{delimiter}{}{delimiter}{}",
                self.entity_labels[t.head.index()],
                self.relation_labels[t.relation.index()],
                self.entity_labels[t.tail.index()]
            )?;
        }
        Ok(())
    }

    /// Adds `(t, reverse(r), h)` for every fact `(h, r, t)`.
    ///
    /// A loaded relation labelled `X_reverse` is paired with a loaded `X`
    /// rather than receiving a fresh inverse, so text-identical reverse facts
    /// already in the file are stored once.
    pub fn augment_reverse(&self) -> Result<Self, KgError> {
        if self.reverse_of.is_some() {
            return Err(KgError::AlreadyAugmented);
        }
        let mut labels = self.relation_labels.clone();
        let mut index = self.relation_index.clone();
        let mut is_reverse = self.is_reverse.clone();
        let m = labels.len();
        let mut reverse_of: Vec<Option<RelationId>> = vec![None; m];

        for r in 0..m {
            if let Some(base) = labels[r].strip_suffix(REVERSE_SUFFIX) {
                if let Some(&b) = index.get(base) {
                    if reverse_of[b.index()].is_none() && reverse_of[r].is_none() && b.index() != r {
                        reverse_of[b.index()] = Some(RelationId(r as u32));
                        reverse_of[r] = Some(b);
                        is_reverse[r] = true;
                    }
                }
            }
        }
        for r in 0..m {
            if reverse_of[r].is_some() {
                continue;
            }
            let id = RelationId(labels.len() as u32);
            let label = format!("{}{REVERSE_SUFFIX}", labels[r]);
            labels.push(label.clone());
            index.insert(label, id);
            is_reverse.push(true);
            reverse_of[r] = Some(id);
            reverse_of.push(Some(RelationId(r as u32)));
        }
        let reverse_of: Vec<RelationId> = reverse_of.into_iter().map(|r| r.expect("paired")).collect();

        let mut triples = self.triples.clone();
        let mut set = self.triple_set.clone();
        for t in &self.triples {
            let rev = Triple::new(t.tail, reverse_of[t.relation.index()], t.head);
            if set.insert(rev) {
                triples.push(rev);
            }
        }
        Ok(Self::assemble(
            self.entity_labels.clone(),
            self.entity_index.clone(),
            labels,
            index,
            Some(reverse_of),
            is_reverse,
            triples,
            set,
        ))
    }

    /// Keeps each fact independently with `keep_probability`. Entity and
    /// relation tables are unchanged so ids stay aligned with the full graph.
    pub fn prune_half(&self, keep_probability: f64, seed: u64) -> Result<Self, KgError> {
        if !(0.0..=1.0).contains(&keep_probability) {
            return Err(KgError::InvalidProbability(keep_probability));
        }
        if self.reverse_of.is_some() {
            return Err(KgError::AlreadyAugmented);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let triples: Vec<Triple> = self
            .triples
            .iter()
            .copied()
            .filter(|_| rng.gen::<f64>() < keep_probability)
            .collect();
        let set = triples.iter().copied().collect();
        Ok(Self::assemble(
            self.entity_labels.clone(),
            self.entity_index.clone(),
            self.relation_labels.clone(),
            self.relation_index.clone(),
            None,
            self.is_reverse.clone(),
            triples,
            set,
        ))
    }

    pub fn neighbors(&self, e: EntityId) -> Result<&[(RelationId, EntityId)], KgError> {
        self.out_index
            .get(e.index())
            .map(Vec::as_slice)
            .ok_or(KgError::UnknownEntity(e.index()))
    }

    pub fn incoming(&self, e: EntityId) -> Result<&[(RelationId, EntityId)], KgError> {
        self.in_index
            .get(e.index())
            .map(Vec::as_slice)
            .ok_or(KgError::UnknownEntity(e.index()))
    }

    pub fn entity_count(&self) -> usize {
        self.entity_labels.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triple_set.contains(t)
    }

    pub fn is_augmented(&self) -> bool {
        self.reverse_of.is_some()
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entity_index.get(label).copied()
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relation_index.get(label).copied()
    }

    pub fn entity_label(&self, e: EntityId) -> Option<&str> {
        self.entity_labels.get(e.index()).map(String::as_str)
    }

    pub fn relation_label(&self, r: RelationId) -> Option<&str> {
        self.relation_labels.get(r.index()).map(String::as_str)
    }

    pub fn is_reverse(&self, r: RelationId) -> bool {
        self.is_reverse.get(r.index()).copied().unwrap_or(false)
    }

    /// Inverse relation; `None` before augmentation.
    pub fn reverse(&self, r: RelationId) -> Option<RelationId> {
        self.reverse_of.as_ref()?.get(r.index()).copied()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entity_labels.len() as u32).map(EntityId)
    }
}
