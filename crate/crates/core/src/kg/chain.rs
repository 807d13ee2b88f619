//! Shortest relational chains between entities.
//!
//! Ties between equally short chains resolve to the lexicographically
//! smallest relation-id sequence. Layered BFS gives that directly: every
//! node at depth `d` keeps the smallest `best(u) ++ [r]` over its depth
//! `d - 1` predecessors `u`, since all prefixes at one depth have equal
//! length.

use std::cmp::Ordering;

use super::{EntityId, KgError, KnowledgeGraph, RelationId};

pub const DEFAULT_MAX_CHAIN_LEN: usize = 4;

/// Ordered relation sequence from a source entity to a target entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RelationalChain {
    pub relations: Vec<RelationId>,
}

impl RelationalChain {
    pub fn new(relations: Vec<RelationId>) -> Self {
        Self { relations }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn reversed(&self) -> Self {
        Self::new(self.relations.iter().rev().copied().collect())
    }

    /// Labels joined with `" -> "`, for traces.
    pub fn describe(&self, kg: &KnowledgeGraph) -> String {
        self.relations
            .iter()
            .map(|&r| kg.relation_label(r).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainLookup {
    Found(RelationalChain),
    /// No directed path of at most `max_len` relations.
    Unreachable,
}

impl ChainLookup {
    pub fn chain(&self) -> Option<&RelationalChain> {
        match self {
            ChainLookup::Found(c) => Some(c),
            ChainLookup::Unreachable => None,
        }
    }

    pub fn is_reachable(&self) -> bool {
        matches!(self, ChainLookup::Found(_))
    }
}

pub fn shortest_relational_chain(
    kg: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    max_len: usize,
) -> Result<ChainLookup, KgError> {
    if target.index() >= kg.entity_count() {
        return Err(KgError::UnknownEntity(target.index()));
    }
    let mut result = ChainLookup::Unreachable;
    layered_search(kg, source, max_len, |node, chain| {
        if node == target {
            result = ChainLookup::Found(RelationalChain::new(chain.to_vec()));
            false
        } else {
            true
        }
    })?;
    Ok(result)
}

/// Shortest chains from `source` to every entity (indexed by entity id).
pub fn shortest_chains_from(
    kg: &KnowledgeGraph,
    source: EntityId,
    max_len: usize,
) -> Result<Vec<ChainLookup>, KgError> {
    let mut out = vec![ChainLookup::Unreachable; kg.entity_count()];
    layered_search(kg, source, max_len, |node, chain| {
        out[node.index()] = ChainLookup::Found(RelationalChain::new(chain.to_vec()));
        true
    })?;
    Ok(out)
}

/// Visits nodes in order of finalisation with their best chain. The visitor
/// returns false to stop early.
fn layered_search(
    kg: &KnowledgeGraph,
    source: EntityId,
    max_len: usize,
    mut visit: impl FnMut(EntityId, &[RelationId]) -> bool,
) -> Result<(), KgError> {
    if max_len == 0 {
        return Err(KgError::InvalidMaxLen);
    }
    let n = kg.entity_count();
    if source.index() >= n {
        return Err(KgError::UnknownEntity(source.index()));
    }
    let mut depth: Vec<Option<usize>> = vec![None; n];
    let mut best: Vec<Vec<RelationId>> = vec![Vec::new(); n];
    depth[source.index()] = Some(0);
    if !visit(source, &[]) {
        return Ok(());
    }
    let mut frontier = vec![source];
    for d in 0..max_len {
        let mut next: Vec<EntityId> = Vec::new();
        for &u in &frontier {
            for &(r, v) in kg.neighbors(u)? {
                let vi = v.index();
                match depth[vi] {
                    None => {
                        depth[vi] = Some(d + 1);
                        let mut chain = best[u.index()].clone();
                        chain.push(r);
                        best[vi] = chain;
                        next.push(v);
                    }
                    Some(dv) if dv == d + 1 && extends_smaller(&best[u.index()], r, &best[vi]) => {
                        let mut chain = best[u.index()].clone();
                        chain.push(r);
                        best[vi] = chain;
                    }
                    _ => {}
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        for &v in &next {
            if !visit(v, &best[v.index()]) {
                return Ok(());
            }
        }
        frontier = next;
    }
    Ok(())
}

/// Whether `prefix ++ [r]` sorts before `current` (same length).
fn extends_smaller(prefix: &[RelationId], r: RelationId, current: &[RelationId]) -> bool {
    match prefix.cmp(&current[..prefix.len()]) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => r < current[prefix.len()],
    }
}
