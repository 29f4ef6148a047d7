//! Matching engines: ranking, weighted elimination, minimum-cost perfect
//! assignment and ranked enumeration of perfect matchings.
//!
//! Ties are always broken towards the lowest `(constraint, variable)` index
//! pair so every engine is deterministic.

mod elimination;
mod hungarian;
mod murty;
mod ranking;

use std::str::FromStr;

use thiserror::Error;

use crate::graph::{BipartiteGraph, ConstraintIdx, EdgeIdx, VariableIdx};
use crate::model::DynamicRole;

pub use elimination::{weighted_elimination, Elimination};
pub use hungarian::{
    hungarian_min_cost, solve_assignment, solve_assignment_canonical, Assignment, CostMatrix,
};
pub use murty::{murty_enumerate, Murty, MurtyMatchings};
pub use ranking::{ranking_match, RankedMatching};

/// Which dynamic operations the diagnosis runtime may perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Causality {
    /// Differentiation only; integral-role edges are inadmissible.
    Differential,
    /// Integration only; derivative-role edges are inadmissible.
    Integral,
    Mixed,
}

impl Causality {
    pub fn as_str(self) -> &'static str {
        match self {
            Causality::Differential => "differential",
            Causality::Integral => "integral",
            Causality::Mixed => "mixed",
        }
    }
}

impl FromStr for Causality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "differential" => Ok(Causality::Differential),
            "integral" => Ok(Causality::Integral),
            "mixed" => Ok(Causality::Mixed),
            other => Err(format!("unknown causality `{other}`")),
        }
    }
}

/// A graph together with the causality that filters its matchable edges.
#[derive(Debug, Clone)]
pub struct MatchingProblem {
    pub graph: BipartiteGraph,
    pub causality: Causality,
}

impl MatchingProblem {
    pub fn new(graph: BipartiteGraph, causality: Causality) -> Self {
        Self { graph, causality }
    }

    /// Solvable, towards an unknown variable, and allowed by the causality.
    pub fn admissible(&self, e: EdgeIdx) -> bool {
        let info = self.graph.edge(e);
        info.solvable
            && !self.graph.is_known(info.variable)
            && !matches!(
                (self.causality, info.role),
                (Causality::Differential, DynamicRole::Integral)
                    | (Causality::Integral, DynamicRole::Derivative)
            )
    }

    /// Square cost matrix over admissible edges: rows are the constraints,
    /// columns the unknown variables.
    pub fn square(&self) -> Result<SquareProblem, MatchingError> {
        let rows = self.graph.constraints().to_vec();
        let cols = self.graph.unknowns();
        if rows.len() != cols.len() {
            return Err(MatchingError::NotSquare {
                constraints: rows.len(),
                unknowns: cols.len(),
            });
        }
        let mut col_pos = vec![usize::MAX; self.graph.total_variables()];
        for (j, &v) in cols.iter().enumerate() {
            col_pos[v] = j;
        }
        let n = rows.len();
        let mut matrix = CostMatrix::new(n);
        let mut edges = vec![None; n * n];
        for (i, &c) in rows.iter().enumerate() {
            for e in self.graph.unknown_edges(c) {
                if self.admissible(e) {
                    let j = col_pos[self.graph.edge(e).variable];
                    matrix.set(i, j, self.graph.edge(e).weight);
                    edges[i * n + j] = Some(e);
                }
            }
        }
        Ok(SquareProblem {
            rows,
            cols,
            matrix,
            edges,
        })
    }
}

/// A just-constrained problem laid out as an assignment matrix.
#[derive(Debug, Clone)]
pub struct SquareProblem {
    pub rows: Vec<ConstraintIdx>,
    pub cols: Vec<VariableIdx>,
    pub matrix: CostMatrix,
    edges: Vec<Option<EdgeIdx>>,
}

impl SquareProblem {
    /// Edge behind cell `(row, col)`.
    pub fn edge(&self, row: usize, col: usize) -> Option<EdgeIdx> {
        self.edges[row * self.rows.len() + col]
    }

    pub fn edges_of(&self, a: &Assignment) -> Vec<EdgeIdx> {
        a.columns
            .iter()
            .enumerate()
            .map(|(r, &c)| self.edge(r, c).expect("assignment uses admissible cells"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingError {
    #[error("problem is not square: {constraints} constraints, {unknowns} unknowns")]
    NotSquare { constraints: usize, unknowns: usize },
    #[error("no perfect matching exists")]
    Infeasible,
}
