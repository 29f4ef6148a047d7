//! Minimal structurally overdetermined (MSO) sets.
//!
//! Top-down search: starting from the over-constrained part, remove one
//! constraint at a time and take the over-constrained part of what is left,
//! until redundancy one is reached. Visited sets are memoized so every
//! subset is expanded once. Top-level branches run on the rayon pool.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::decomposition::dm_decompose;
use crate::graph::{BipartiteGraph, ConstraintIdx, VariableIdx};

pub const DEFAULT_MSO_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MsoSet {
    pub constraints: Vec<ConstraintIdx>,
    /// `var(C')`, known variables included.
    pub variables: Vec<VariableIdx>,
    pub unknowns: Vec<VariableIdx>,
}

impl MsoSet {
    pub fn of(g: &BipartiteGraph, constraints: Vec<ConstraintIdx>) -> Self {
        let sub = g.restrict(constraints.iter().copied());
        let variables = sub.variables();
        let unknowns = sub.unknowns();
        Self {
            constraints,
            variables,
            unknowns,
        }
    }

    pub fn redundancy(&self) -> isize {
        self.constraints.len() as isize - self.unknowns.len() as isize
    }

    pub fn contains(&self, c: ConstraintIdx) -> bool {
        self.constraints.binary_search(&c).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsoOptions {
    pub cap: usize,
}

impl Default for MsoOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_MSO_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsoError {
    #[error("more than {cap} MSO sets; raise the cap or reduce the model")]
    CapExceeded { cap: usize },
}

struct Search<'a> {
    g: &'a BipartiteGraph,
    cap: usize,
    visited: Mutex<HashSet<Vec<ConstraintIdx>>>,
    found: Mutex<Vec<Vec<ConstraintIdx>>>,
    count: AtomicUsize,
    overflow: AtomicBool,
}

impl Search<'_> {
    /// Over-constrained part of `constraints` together with its redundancy.
    fn reduce(
        &self,
        constraints: impl IntoIterator<Item = ConstraintIdx>,
    ) -> (Vec<ConstraintIdx>, usize) {
        let d = dm_decompose(&self.g.restrict(constraints));
        let r = d.redundancy();
        (d.over.constraints, r)
    }

    fn first_visit(&self, set: &[ConstraintIdx]) -> bool {
        self.visited
            .lock()
            .expect("visited set")
            .insert(set.to_vec())
    }

    fn expand(&self, set: Vec<ConstraintIdx>, redundancy: usize) {
        if self.overflow.load(Ordering::Relaxed) {
            return;
        }
        if redundancy == 1 {
            if self.count.fetch_add(1, Ordering::Relaxed) >= self.cap {
                self.overflow.store(true, Ordering::Relaxed);
                return;
            }
            self.found.lock().expect("result list").push(set);
            return;
        }
        for &c in &set {
            let (child, r) = self.reduce(set.iter().copied().filter(|&x| x != c));
            if r > 0 && self.first_visit(&child) {
                self.expand(child, r);
            }
        }
    }
}

/// All MSO sets of the over-constrained part of `g`, ordered
/// lexicographically by their (ascending) constraint lists.
pub fn enumerate_msos(g: &BipartiteGraph, options: &MsoOptions) -> Result<Vec<MsoSet>, MsoError> {
    let search = Search {
        g,
        cap: options.cap,
        visited: Mutex::new(HashSet::new()),
        found: Mutex::new(Vec::new()),
        count: AtomicUsize::new(0),
        overflow: AtomicBool::new(false),
    };
    let (root, r) = search.reduce(g.constraints().iter().copied());
    if r == 0 {
        return Ok(Vec::new());
    }
    search.first_visit(&root);
    if r == 1 {
        search.expand(root, 1);
    } else {
        root.par_iter().for_each(|&c| {
            let (child, r) = search.reduce(root.iter().copied().filter(|&x| x != c));
            if r > 0 && search.first_visit(&child) {
                search.expand(child, r);
            }
        });
    }
    if search.overflow.load(Ordering::Relaxed) {
        return Err(MsoError::CapExceeded { cap: options.cap });
    }
    let mut found = search.found.into_inner().expect("result list");
    found.sort();
    Ok(found.into_iter().map(|cs| MsoSet::of(g, cs)).collect())
}

/// MSO sets containing at least one faultable constraint.
pub fn filter_faultable(msos: &[MsoSet], g: &BipartiteGraph) -> Vec<MsoSet> {
    msos.iter()
        .filter(|m| m.constraints.iter().any(|&c| g.constraint(c).faultable))
        .cloned()
        .collect()
}
