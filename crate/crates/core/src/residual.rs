//! Residual generators: the cheapest calculable matching for each MSO,
//! greedy selection by cost, and the fault signature matrix.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::calculability::{classify_blocks, is_calculable, CalculabilityError, SolverRequirement};
use crate::graph::{
    orient, BipartiteGraph, ConstraintIdx, EdgeIdx, GraphError, Matching, VariableIdx, Vertex,
};
use crate::matching::{murty_enumerate, Causality, MatchingError, MatchingProblem};
use crate::model::{Cost, ToolSet};
use crate::mso::MsoSet;

/// The graph residuals are computed on, and the matching fixed before the
/// search (its variables count as known inside each MSO).
#[derive(Debug, Clone)]
pub struct ResidualContext {
    pub graph: BipartiteGraph,
    pub base: Matching,
    pub causality: Causality,
}

impl ResidualContext {
    pub fn new(graph: BipartiteGraph) -> Self {
        Self {
            graph,
            base: Matching::empty(),
            causality: Causality::Mixed,
        }
    }

    pub fn with_base(graph: BipartiteGraph, base: Matching) -> Self {
        Self {
            graph,
            base,
            causality: Causality::Mixed,
        }
    }

    /// `graph` without the base-matched constraints, base variables known.
    pub fn reduced(&self) -> BipartiteGraph {
        let matched = self.base.constraints(&self.graph);
        let rest: Vec<_> = self
            .graph
            .constraints()
            .iter()
            .copied()
            .filter(|c| matched.binary_search(c).is_err())
            .collect();
        self.graph
            .restrict(rest)
            .with_known(self.base.variables(&self.graph))
    }
}

/// Murty iterations allowed per residual candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Budget {
    /// `max(1, |C| - 1)` per candidate, so `|C| (|C| - 1)` per MSO.
    #[default]
    Auto,
    Limit(usize),
    Unlimited,
}

impl Budget {
    fn per_candidate(self, mso_size: usize) -> Option<usize> {
        match self {
            Budget::Auto => Some(mso_size.saturating_sub(1).max(1)),
            Budget::Limit(n) => Some(n),
            Budget::Unlimited => None,
        }
    }
}

impl std::str::FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Budget::Auto),
            "unlimited" => Ok(Budget::Unlimited),
            n => n
                .parse()
                .map(Budget::Limit)
                .map_err(|_| format!("invalid budget `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualGenerator {
    /// The constraint left unmatched and evaluated as the residual.
    pub residual: ConstraintIdx,
    /// Matched edges used to compute the unknowns of the residual.
    pub matching: Matching,
    pub cost: Cost,
    /// Faultable constraints the residual depends on, ascending.
    pub sensitive_faults: Vec<ConstraintIdx>,
    /// Every constraint taking part in the evaluation, ascending.
    pub constraints: Vec<ConstraintIdx>,
}

impl ResidualGenerator {
    fn key(&self) -> (Cost, ConstraintIdx, &[EdgeIdx]) {
        (self.cost, self.residual, self.matching.edges())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualSearch {
    pub generator: Option<ResidualGenerator>,
    /// Candidates whose budget ran out before a calculable matching showed up.
    pub exhausted: Vec<ConstraintIdx>,
    pub iterations: usize,
}

impl ResidualSearch {
    /// No generator, and the budget is to blame for at least one candidate.
    pub fn budget_failure(&self) -> bool {
        self.generator.is_none() && !self.exhausted.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResidualError {
    #[error("constraint set minus {0} is not just-constrained")]
    Degenerate(ConstraintIdx),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Calculability(#[from] CalculabilityError),
}

/// Builds the generator for `residual` under the combined matching.
pub fn evaluate_candidate(
    ctx: &ResidualContext,
    residual: ConstraintIdx,
    local: &Matching,
) -> Result<ResidualGenerator, ResidualError> {
    let g = &ctx.graph;
    let combined: Vec<EdgeIdx> = ctx
        .base
        .edges()
        .iter()
        .chain(local.edges())
        .copied()
        .collect();
    let full = Matching::new(g, combined)?;
    let reach = orient(g, &full)?.reversed();
    let ancestors = crate::graph::reachable_from(&reach, &[Vertex::Constraint(residual)]);
    let constraints: Vec<ConstraintIdx> = ancestors
        .iter()
        .filter_map(|v| match *v {
            Vertex::Constraint(c) => Some(c),
            _ => None,
        })
        .collect();
    let inside: BTreeSet<ConstraintIdx> = constraints.iter().copied().collect();
    let matching = Matching::new(
        g,
        full.edges()
            .iter()
            .copied()
            .filter(|&e| inside.contains(&g.edge(e).constraint)),
    )?;
    let cost = matching.total_weight() + g.constraint(residual).eval_cost;
    let sensitive_faults = constraints
        .iter()
        .copied()
        .filter(|&c| g.constraint(c).faultable)
        .collect();
    Ok(ResidualGenerator {
        residual,
        matching,
        cost,
        sensitive_faults,
        constraints,
    })
}

/// Whether the evaluation of `rg` can be carried out with `tools`.
pub fn generator_calculable(
    ctx: &ResidualContext,
    rg: &ResidualGenerator,
    tools: &ToolSet,
) -> Result<bool, ResidualError> {
    let view = ctx.graph.restrict(rg.constraints.iter().copied());
    Ok(is_calculable(&view, &rg.matching, tools)?.is_calculable())
}

/// For every constraint of the MSO, walks the perfect matchings of the
/// rest in ascending cost and keeps the first calculable one. Returns the
/// cheapest over all candidates, ties going to the lowest constraint.
pub fn get_optimal_residual(
    ctx: &ResidualContext,
    mso: &MsoSet,
    tools: &ToolSet,
    budget: Budget,
) -> Result<ResidualSearch, ResidualError> {
    let reduced = ctx.reduced();
    let limit = budget.per_candidate(mso.constraints.len());
    let mut best: Option<ResidualGenerator> = None;
    let mut exhausted = Vec::new();
    let mut iterations = 0;
    for &cj in &mso.constraints {
        let rest = reduced.restrict(mso.constraints.iter().copied().filter(|&c| c != cj));
        let problem = MatchingProblem::new(rest, ctx.causality);
        let murty = match murty_enumerate(&problem) {
            Ok(m) => m,
            Err(MatchingError::NotSquare { .. }) => return Err(ResidualError::Degenerate(cj)),
            Err(MatchingError::Infeasible) => continue,
        };
        let mut seen = 0;
        let mut found = None;
        for local in murty {
            if limit.is_some_and(|l| seen >= l) {
                exhausted.push(cj);
                break;
            }
            seen += 1;
            let rg = evaluate_candidate(ctx, cj, &local)?;
            if generator_calculable(ctx, &rg, tools)? {
                found = Some(rg);
                break;
            }
        }
        iterations += seen;
        if let Some(rg) = found {
            if best.as_ref().is_none_or(|b| rg.key() < b.key()) {
                best = Some(rg);
            }
        }
    }
    Ok(ResidualSearch {
        generator: best,
        exhausted,
        iterations,
    })
}

/// Runs [`get_optimal_residual`] on every MSO in parallel; results keep the
/// input order.
pub fn search_all(
    ctx: &ResidualContext,
    msos: &[MsoSet],
    tools: &ToolSet,
    budget: Budget,
) -> Result<Vec<ResidualSearch>, ResidualError> {
    msos.par_iter()
        .map(|m| get_optimal_residual(ctx, m, tools, budget))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Detectability,
    /// Distinguished fault pairs, the fault-free case counting as one more
    /// "fault" so detection is part of isolation.
    Isolability,
}

impl std::str::FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "detectability" => Ok(Target::Detectability),
            "isolability" => Ok(Target::Isolability),
            other => Err(format!("unknown target `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultSignatureMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub entries: Vec<Vec<u8>>,
}

impl FaultSignatureMatrix {
    pub fn new(
        g: &BipartiteGraph,
        generators: &[ResidualGenerator],
        faults: &[ConstraintIdx],
    ) -> Self {
        let rows = generators
            .iter()
            .map(|rg| g.constraint(rg.residual).id.clone())
            .collect();
        let columns = g.constraint_ids(faults);
        let entries = generators
            .iter()
            .map(|rg| {
                faults
                    .iter()
                    .map(|f| u8::from(rg.sensitive_faults.binary_search(f).is_ok()))
                    .collect()
            })
            .collect();
        Self {
            rows,
            columns,
            entries,
        }
    }

    /// Columns with at least one nonzero entry.
    pub fn detected(&self) -> Vec<&str> {
        (0..self.columns.len())
            .filter(|&j| self.entries.iter().any(|r| r[j] == 1))
            .map(|j| self.columns[j].as_str())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("residual");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, row) in self.rows.iter().zip(&self.entries) {
            out.push_str(label);
            for v in row {
                write!(out, ",{v}").expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub target: Target,
    pub generators: Vec<ResidualGenerator>,
    pub uncovered: Vec<ConstraintIdx>,
    pub metric: usize,
    pub max_metric: usize,
}

fn metric(target: Target, faults: &[ConstraintIdx], chosen: &[&ResidualGenerator]) -> usize {
    let hits = |f: ConstraintIdx| -> Vec<bool> {
        chosen
            .iter()
            .map(|rg| rg.sensitive_faults.binary_search(&f).is_ok())
            .collect()
    };
    let signatures: Vec<Vec<bool>> = faults.iter().map(|&f| hits(f)).collect();
    let detected = signatures.iter().filter(|s| s.iter().any(|&b| b)).count();
    match target {
        Target::Detectability => detected,
        Target::Isolability => {
            let mut pairs = detected;
            for i in 0..signatures.len() {
                for j in i + 1..signatures.len() {
                    pairs += usize::from(signatures[i] != signatures[j]);
                }
            }
            pairs
        }
    }
}

/// Sorted, duplicate-free pool: ascending by cost, residual, then matching.
pub fn normalize_pool(mut pool: Vec<ResidualGenerator>) -> Vec<ResidualGenerator> {
    pool.sort_by(|a, b| a.key().cmp(&b.key()));
    pool.dedup_by(|a, b| a.residual == b.residual && a.matching == b.matching);
    pool
}

/// Greedy selection in ascending cost: a generator is taken when it
/// strictly improves the target metric; stops once the metric reaches what
/// the whole pool achieves.
pub fn select_residuals(
    pool: &[ResidualGenerator],
    target: Target,
    faults: &[ConstraintIdx],
) -> Selection {
    let ordered = normalize_pool(pool.to_vec());
    let all: Vec<&ResidualGenerator> = ordered.iter().collect();
    let max_metric = metric(target, faults, &all);
    let mut chosen: Vec<&ResidualGenerator> = Vec::new();
    let mut current = metric(target, faults, &chosen);
    for rg in &ordered {
        if current >= max_metric {
            break;
        }
        chosen.push(rg);
        let next = metric(target, faults, &chosen);
        if next > current {
            current = next;
        } else {
            chosen.pop();
        }
    }
    let uncovered = faults
        .iter()
        .copied()
        .filter(|f| {
            !chosen
                .iter()
                .any(|rg| rg.sensitive_faults.binary_search(f).is_ok())
        })
        .collect();
    Selection {
        target,
        generators: chosen.into_iter().cloned().collect(),
        uncovered,
        metric: current,
        max_metric,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanStep {
    Solve {
        constraint: ConstraintIdx,
        variable: VariableIdx,
    },
    Simultaneous {
        constraints: Vec<ConstraintIdx>,
        variables: Vec<VariableIdx>,
        solver: SolverRequirement,
    },
    Evaluate {
        constraint: ConstraintIdx,
    },
}

/// Steps computing the unknowns of `rg` in dependency order, ending with
/// the evaluation of the residual constraint.
pub fn evaluation_plan(
    rg: &ResidualGenerator,
    g: &BipartiteGraph,
) -> Result<Vec<PlanStep>, ResidualError> {
    let view = g.restrict(rg.constraints.iter().copied());
    let mut steps: Vec<PlanStep> = classify_blocks(&view, &rg.matching)?
        .into_iter()
        .map(|b| {
            if b.size() == 1 {
                PlanStep::Solve {
                    constraint: b.constraints[0],
                    variable: b.variables[0],
                }
            } else {
                PlanStep::Simultaneous {
                    constraints: b.constraints,
                    variables: b.variables,
                    solver: b.requirement,
                }
            }
        })
        .collect();
    steps.push(PlanStep::Evaluate {
        constraint: rg.residual,
    });
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{Constraint, ConstraintKind, ModelBuilder};
    use crate::mso::{enumerate_msos, MsoOptions};

    fn gps() -> (ResidualContext, Vec<MsoSet>) {
        let g = BipartiteGraph::from_model(&fixtures::gps_north());
        let msos = enumerate_msos(&g, &MsoOptions::default()).unwrap();
        (ResidualContext::new(g), msos)
    }

    #[test]
    fn gps_residual_at_d1() {
        let (ctx, msos) = gps();
        let search = get_optimal_residual(&ctx, &msos[0], &ToolSet::all(), Budget::Auto).unwrap();
        let rg = search.generator.unwrap();
        let g = &ctx.graph;
        assert_eq!(g.constraint(rg.residual).id, "d1");
        assert_eq!(rg.matching.len(), 2);
        assert_eq!(rg.cost, 3);
        assert_eq!(g.constraint_ids(&rg.sensitive_faults), vec!["s13", "s16"]);
        let plan = evaluation_plan(&rg, g).unwrap();
        assert_eq!(plan.len(), 3);
        assert!(plan
            .iter()
            .all(|s| !matches!(s, PlanStep::Simultaneous { .. })));
        assert_eq!(
            plan[2],
            PlanStep::Evaluate {
                constraint: rg.residual
            }
        );
    }

    #[test]
    fn gps_without_differentiator_avoids_derivative() {
        // Residual at s16 needs n_dot from d/dt n; at s13 it would integrate.
        let (ctx, msos) = gps();
        let mut tools = ToolSet::all();
        tools.differentiator = false;
        let rg = get_optimal_residual(&ctx, &msos[0], &tools, Budget::Unlimited)
            .unwrap()
            .generator
            .unwrap();
        assert_eq!(ctx.graph.constraint(rg.residual).id, "d1");
    }

    #[test]
    fn single_constraint_mso() {
        let m = ModelBuilder::default()
            .known("y")
            .constraint(
                Constraint::new("c", ConstraintKind::Linear)
                    .faultable(true)
                    .eval_cost(7),
            )
            .link("c", "y", 1)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        let mso = MsoSet::of(&g, vec![0]);
        let rg = get_optimal_residual(
            &ResidualContext::new(g),
            &mso,
            &ToolSet::none(),
            Budget::Auto,
        )
        .unwrap()
        .generator
        .unwrap();
        assert!(rg.matching.is_empty());
        assert_eq!(rg.cost, 7);
    }

    fn generator(
        residual: ConstraintIdx,
        cost: Cost,
        faults: &[ConstraintIdx],
    ) -> ResidualGenerator {
        ResidualGenerator {
            residual,
            matching: Matching::empty(),
            cost,
            sensitive_faults: faults.to_vec(),
            constraints: vec![residual],
        }
    }

    #[test]
    fn one_generator_covers_all() {
        let pool = vec![generator(0, 5, &[0, 1, 2]), generator(1, 1, &[0])];
        let s = select_residuals(&pool, Target::Detectability, &[0, 1, 2]);
        assert_eq!(s.generators.len(), 2);
        let s = select_residuals(&pool[..1], Target::Detectability, &[0, 1, 2]);
        assert_eq!(s.generators.len(), 1);
    }

    #[test]
    fn identical_signatures_keep_the_cheaper() {
        let pool = vec![generator(0, 5, &[0, 1]), generator(1, 2, &[0, 1])];
        let s = select_residuals(&pool, Target::Detectability, &[0, 1]);
        assert_eq!(
            s.generators.iter().map(|g| g.residual).collect::<Vec<_>>(),
            vec![1]
        );
    }

    #[test]
    fn greedy_cover_by_cost() {
        // By cost: a{0,1}=1, b{0}=2 (no gain), c{2}=3, d{1,2,3}=4, e{3}=5.
        let pool = vec![
            generator(0, 1, &[0, 1]),
            generator(1, 2, &[0]),
            generator(2, 3, &[2]),
            generator(3, 4, &[1, 2, 3]),
            generator(4, 5, &[3]),
        ];
        let s = select_residuals(&pool, Target::Detectability, &[0, 1, 2, 3]);
        assert_eq!(
            s.generators.iter().map(|g| g.residual).collect::<Vec<_>>(),
            vec![0, 2, 3]
        );
        assert!(s.uncovered.is_empty());
    }

    #[test]
    fn isolability_needs_distinct_signatures() {
        let pool = vec![generator(0, 1, &[0, 1]), generator(1, 2, &[0])];
        let det = select_residuals(&pool, Target::Detectability, &[0, 1]);
        assert_eq!(det.generators.len(), 1);
        let iso = select_residuals(&pool, Target::Isolability, &[0, 1]);
        assert_eq!(iso.generators.len(), 2);
        assert_eq!(iso.metric, 3);
    }

    #[test]
    fn signature_csv() {
        let g = BipartiteGraph::from_model(&fixtures::gps_north());
        let rg = generator(0, 3, &[1, 2]);
        let m = FaultSignatureMatrix::new(&g, &[rg], &[1, 2]);
        assert_eq!(m.to_csv(), "residual,s13,s16\nd1,1,1\n");
    }

    #[test]
    fn budget_parse() {
        assert_eq!("auto".parse::<Budget>().unwrap(), Budget::Auto);
        assert_eq!("12".parse::<Budget>().unwrap(), Budget::Limit(12));
        assert!("x".parse::<Budget>().is_err());
    }
}
