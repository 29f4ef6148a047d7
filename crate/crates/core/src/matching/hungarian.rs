use crate::graph::Matching;
use crate::model::Cost;

use super::{MatchingError, MatchingProblem};

/// Dense `n x n` assignment costs; `None` marks an inadmissible cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    n: usize,
    cells: Vec<Option<Cost>>,
}

impl CostMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: vec![None; n * n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Option<Cost>>>) -> Self {
        let n = rows.len();
        assert!(
            rows.iter().all(|r| r.len() == n),
            "cost matrix must be square"
        );
        Self {
            n,
            cells: rows.into_iter().flatten().collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> Option<Cost> {
        self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cost: Cost) {
        self.cells[row * self.n + col] = Some(cost);
    }

    pub fn forbid(&mut self, row: usize, col: usize) {
        self.cells[row * self.n + col] = None;
    }

    /// Keeps only `(row, col)` in its row and column.
    pub fn force(&mut self, row: usize, col: usize) {
        for j in 0..self.n {
            if j != col {
                self.forbid(row, j);
            }
        }
        for i in 0..self.n {
            if i != row {
                self.forbid(i, col);
            }
        }
    }

    /// Strictly greater than any feasible assignment total.
    fn sentinel(&self) -> i64 {
        let finite: Cost = self.cells.iter().flatten().sum();
        i64::try_from(finite).expect("assignment costs fit in i64") + 1
    }
}

/// Permutation `row -> columns[row]` with its total cost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub cost: Cost,
    pub columns: Vec<usize>,
}

/// Minimum-cost perfect assignment by the shortest augmenting path
/// Hungarian method (O(n^3)). Inadmissible cells cost a sentinel above any
/// feasible total, so a result at or above the sentinel means infeasible.
pub fn solve_assignment(m: &CostMatrix) -> Option<Assignment> {
    let n = m.size();
    if n == 0 {
        return Some(Assignment {
            cost: 0,
            columns: Vec::new(),
        });
    }
    let big = m.sentinel();
    let cost = |i: usize, j: usize| m.get(i, j).map_or(big, |c| c as i64);
    const INF: i64 = i64::MAX / 4;

    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut columns = vec![0; n];
    for j in 1..=n {
        columns[owner[j] - 1] = j - 1;
    }
    let mut total: Cost = 0;
    for (i, &j) in columns.iter().enumerate() {
        total += m.get(i, j)?;
    }
    Some(Assignment {
        cost: total,
        columns,
    })
}

/// Like [`solve_assignment`], but among optimal assignments returns the
/// lexicographically smallest column vector.
pub fn solve_assignment_canonical(m: &CostMatrix) -> Option<Assignment> {
    let best = solve_assignment(m)?;
    let mut fixed = m.clone();
    let mut columns = best.columns.clone();
    for row in 0..m.size() {
        for col in 0..columns[row] {
            if fixed.get(row, col).is_none() {
                continue;
            }
            let mut trial = fixed.clone();
            trial.force(row, col);
            if let Some(a) = solve_assignment(&trial) {
                if a.cost == best.cost {
                    columns = a.columns;
                    break;
                }
            }
        }
        fixed.force(row, columns[row]);
    }
    Some(Assignment {
        cost: best.cost,
        columns,
    })
}

/// Minimum-weight perfect matching of a just-constrained problem.
pub fn hungarian_min_cost(p: &MatchingProblem) -> Result<Matching, MatchingError> {
    let sq = p.square()?;
    let a = solve_assignment_canonical(&sq.matrix).ok_or(MatchingError::Infeasible)?;
    Ok(Matching::new(&p.graph, sq.edges_of(&a)).expect("assignment uses admissible edges"))
}
