use std::cmp::Reverse;
use std::collections::BinaryHeap;
#[cfg(debug_assertions)]
use std::collections::HashSet;

use crate::graph::{BipartiteGraph, Matching};
use crate::model::Cost;

use super::{
    solve_assignment, Assignment, CostMatrix, MatchingError, MatchingProblem, SquareProblem,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Node {
    cost: Cost,
    columns: Vec<usize>,
    // Rows whose column is fixed in this subspace, and banned cells.
    forced: Vec<Option<usize>>,
    banned: Vec<(usize, usize)>,
}

/// Lazy enumeration of all perfect assignments in non-decreasing cost
/// (Murty's partitioning). Each popped subspace is split on the rows of
/// its best assignment that are still free, in row order: child `k` forces
/// the first `k` of those rows to their current columns and bans the
/// current cell of the next one.
#[derive(Debug)]
pub struct Murty {
    base: CostMatrix,
    heap: BinaryHeap<Reverse<Node>>,
    #[cfg(debug_assertions)]
    seen: HashSet<Vec<usize>>,
}

impl Murty {
    pub fn new(base: CostMatrix) -> Self {
        let n = base.size();
        let mut heap = BinaryHeap::new();
        if let Some(a) = solve_assignment(&base) {
            heap.push(Reverse(Node {
                cost: a.cost,
                columns: a.columns,
                forced: vec![None; n],
                banned: Vec::new(),
            }));
        }
        Self {
            base,
            heap,
            #[cfg(debug_assertions)]
            seen: HashSet::new(),
        }
    }

    fn solve_subspace(
        &self,
        forced: &[Option<usize>],
        banned: &[(usize, usize)],
    ) -> Option<Assignment> {
        let mut m = self.base.clone();
        for (row, col) in forced.iter().enumerate() {
            if let Some(col) = *col {
                m.force(row, col);
            }
        }
        for &(row, col) in banned {
            m.forbid(row, col);
        }
        solve_assignment(&m)
    }
}

impl Iterator for Murty {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        let Reverse(node) = self.heap.pop()?;
        #[cfg(debug_assertions)]
        assert!(
            self.seen.insert(node.columns.clone()),
            "murty produced a duplicate assignment"
        );

        let mut forced = node.forced.clone();
        let free_rows: Vec<usize> = (0..forced.len()).filter(|&r| forced[r].is_none()).collect();
        for &row in &free_rows {
            let mut banned = node.banned.clone();
            banned.push((row, node.columns[row]));
            if let Some(a) = self.solve_subspace(&forced, &banned) {
                self.heap.push(Reverse(Node {
                    cost: a.cost,
                    columns: a.columns,
                    forced: forced.clone(),
                    banned,
                }));
            }
            forced[row] = Some(node.columns[row]);
        }
        Some(Assignment {
            cost: node.cost,
            columns: node.columns,
        })
    }
}

/// Perfect matchings of a graph problem in non-decreasing total weight.
#[derive(Debug)]
pub struct MurtyMatchings<'a> {
    graph: &'a BipartiteGraph,
    square: SquareProblem,
    inner: Murty,
}

impl Iterator for MurtyMatchings<'_> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        let a = self.inner.next()?;
        Some(
            Matching::new(self.graph, self.square.edges_of(&a))
                .expect("assignment uses admissible edges"),
        )
    }
}

/// Lazily enumerates every perfect matching of `p` over its admissible
/// edges. The sequence is empty when none exists.
pub fn murty_enumerate(p: &MatchingProblem) -> Result<MurtyMatchings<'_>, MatchingError> {
    let square = p.square()?;
    let inner = Murty::new(square.matrix.clone());
    Ok(MurtyMatchings {
        graph: &p.graph,
        square,
        inner,
    })
}
