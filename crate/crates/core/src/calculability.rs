//! Whether a matching can actually be computed with a given solver tool set.
//!
//! A complete matching orients the graph; its strongly connected components
//! are the blocks that have to be solved together. On top of the solver
//! needed for each block, calculation causality applies: derivative edges
//! must not sit inside a loop, and integral edges must sit inside one.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{
    components_in_topological_order, orient, BipartiteGraph, ConstraintIdx, EdgeIdx, GraphError,
    Matching, VariableIdx, Vertex,
};
use crate::model::{ConstraintKind, DynamicRole, Tool, ToolSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverRequirement {
    None,
    LinearAlgebraic,
    NonlinearAlgebraic,
    DifferentialEquation,
}

impl SolverRequirement {
    pub fn tool(self) -> Option<Tool> {
        match self {
            SolverRequirement::None => None,
            SolverRequirement::LinearAlgebraic => Some(Tool::LinearSolver),
            SolverRequirement::NonlinearAlgebraic => Some(Tool::NonlinearSolver),
            SolverRequirement::DifferentialEquation => Some(Tool::DifferentialEquationSolver),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolverRequirement::None => "none",
            SolverRequirement::LinearAlgebraic => "linear-algebraic-solver",
            SolverRequirement::NonlinearAlgebraic => "nonlinear-algebraic-solver",
            SolverRequirement::DifferentialEquation => "differential-equation-solver",
        }
    }
}

/// A block of simultaneously solved constraints and the variables they
/// are matched to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockClassification {
    pub constraints: Vec<ConstraintIdx>,
    pub variables: Vec<VariableIdx>,
    pub requirement: SolverRequirement,
}

impl BlockClassification {
    pub fn size(&self) -> usize {
        self.constraints.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalculabilityError {
    #[error("matching leaves {} unknown variable(s) unmatched", .0.len())]
    Incomplete(Vec<VariableIdx>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The rule a rejected matching breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    /// (a) a block needs a solver that is not available.
    MissingSolver,
    /// (b) a derivative edge inside a loop.
    DerivativeInLoop,
    /// (c) an integral edge outside any loop.
    OpenLoopIntegration,
    /// (d) an acyclic derivative edge without a differentiator.
    MissingDifferentiator,
}

impl Rule {
    pub fn letter(self) -> char {
        match self {
            Rule::MissingSolver => 'a',
            Rule::DerivativeInLoop => 'b',
            Rule::OpenLoopIntegration => 'c',
            Rule::MissingDifferentiator => 'd',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingSolver {
        block: usize,
        requirement: SolverRequirement,
    },
    DerivativeInLoop {
        edge: EdgeIdx,
        block: usize,
    },
    OpenLoopIntegration {
        edge: EdgeIdx,
    },
    MissingDifferentiator {
        edge: EdgeIdx,
    },
}

impl Violation {
    pub fn rule(&self) -> Rule {
        match self {
            Violation::MissingSolver { .. } => Rule::MissingSolver,
            Violation::DerivativeInLoop { .. } => Rule::DerivativeInLoop,
            Violation::OpenLoopIntegration { .. } => Rule::OpenLoopIntegration,
            Violation::MissingDifferentiator { .. } => Rule::MissingDifferentiator,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingSolver { block, requirement } => {
                write!(f, "block {block} needs a {}", requirement.as_str())
            }
            Violation::DerivativeInLoop { edge, block } => {
                write!(f, "derivative edge {edge} lies in loop block {block}")
            }
            Violation::OpenLoopIntegration { edge } => {
                write!(f, "integral edge {edge} lies on an open path")
            }
            Violation::MissingDifferentiator { edge } => {
                write!(f, "derivative edge {edge} needs a differentiator")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub blocks: Vec<BlockClassification>,
    pub violation: Option<Violation>,
}

impl Verdict {
    pub fn is_calculable(&self) -> bool {
        self.violation.is_none()
    }
}

/// Blocks of `orient(g, m)` in evaluation order. Only components holding
/// a matched constraint are reported.
pub fn classify_blocks(
    g: &BipartiteGraph,
    m: &Matching,
) -> Result<Vec<BlockClassification>, CalculabilityError> {
    let matched_vars = m.variables(g);
    let missing: Vec<VariableIdx> = g
        .unknowns()
        .into_iter()
        .filter(|v| matched_vars.binary_search(v).is_err())
        .collect();
    if !missing.is_empty() {
        return Err(CalculabilityError::Incomplete(missing));
    }
    let d = orient(g, m)?;
    let matched_constraints = m.constraints(g);
    let blocks = components_in_topological_order(&d)
        .into_iter()
        .filter_map(|comp| {
            let constraints: Vec<ConstraintIdx> = comp
                .iter()
                .filter_map(|v| match *v {
                    Vertex::Constraint(c) if matched_constraints.binary_search(&c).is_ok() => {
                        Some(c)
                    }
                    _ => None,
                })
                .collect();
            if constraints.is_empty() {
                return None;
            }
            let mut variables: Vec<VariableIdx> = m
                .edges()
                .iter()
                .map(|&e| g.edge(e))
                .filter(|info| constraints.binary_search(&info.constraint).is_ok())
                .map(|info| info.variable)
                .collect();
            variables.sort_unstable();
            let requirement = requirement_of(g, &constraints);
            Some(BlockClassification {
                constraints,
                variables,
                requirement,
            })
        })
        .collect();
    Ok(blocks)
}

fn requirement_of(g: &BipartiteGraph, constraints: &[ConstraintIdx]) -> SolverRequirement {
    if constraints.len() == 1 {
        return SolverRequirement::None;
    }
    let kinds = constraints.iter().map(|&c| g.constraint(c).kind);
    if kinds.clone().any(|k| k == ConstraintKind::Differential) {
        SolverRequirement::DifferentialEquation
    } else if kinds.clone().any(|k| k == ConstraintKind::Nonlinear) {
        SolverRequirement::NonlinearAlgebraic
    } else {
        SolverRequirement::LinearAlgebraic
    }
}

/// Checks rules (a) to (d) in that order and reports the first violation.
pub fn is_calculable(
    g: &BipartiteGraph,
    m: &Matching,
    tools: &ToolSet,
) -> Result<Verdict, CalculabilityError> {
    let blocks = classify_blocks(g, m)?;
    let violation = first_violation(g, m, tools, &blocks);
    Ok(Verdict { blocks, violation })
}

fn first_violation(
    g: &BipartiteGraph,
    m: &Matching,
    tools: &ToolSet,
    blocks: &[BlockClassification],
) -> Option<Violation> {
    for (i, b) in blocks.iter().enumerate() {
        if let Some(tool) = b.requirement.tool() {
            if !tools.has(tool) {
                return Some(Violation::MissingSolver {
                    block: i,
                    requirement: b.requirement,
                });
            }
        }
    }
    let block_of: HashMap<ConstraintIdx, usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.constraints.iter().map(move |&c| (c, i)))
        .collect();
    let in_loop = |e: EdgeIdx| {
        let i = block_of[&g.edge(e).constraint];
        (blocks[i].size() > 1, i)
    };
    let with_role = |role: DynamicRole| {
        m.edges()
            .iter()
            .copied()
            .filter(move |&e| g.edge(e).role == role)
    };

    if let Some((edge, block)) = with_role(DynamicRole::Derivative)
        .map(|e| (e, in_loop(e)))
        .find_map(|(e, (looped, i))| looped.then_some((e, i)))
    {
        return Some(Violation::DerivativeInLoop { edge, block });
    }
    if let Some(edge) = with_role(DynamicRole::Integral).find(|&e| !in_loop(e).0) {
        return Some(Violation::OpenLoopIntegration { edge });
    }
    if !tools.differentiator {
        if let Some(edge) = with_role(DynamicRole::Derivative).next() {
            return Some(Violation::MissingDifferentiator { edge });
        }
    }
    None
}
