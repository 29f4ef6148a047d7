//! The full analysis: decomposition, a-priori elimination on the
//! over-constrained part, MSO search on what is left, residual search and
//! selection. Reports use ids, never indices, and serialize identically
//! for identical inputs.

use serde::Serialize;
use thiserror::Error;

use crate::calculability::SolverRequirement;
use crate::decomposition::{detectable_faults, dm_decompose, DmDecomposition, DmPart};
use crate::graph::{BipartiteGraph, ConstraintIdx, Matching};
use crate::matching::{weighted_elimination, Causality, Elimination, MatchingProblem};
use crate::model::{Cost, StructuralModel, ToolSet};
use crate::mso::{enumerate_msos, MsoError, MsoOptions, MsoSet, DEFAULT_MSO_CAP};
use crate::residual::{
    evaluate_candidate, evaluation_plan, generator_calculable, normalize_pool, search_all,
    select_residuals, Budget, FaultSignatureMatrix, PlanStep, ResidualContext, ResidualError,
    ResidualGenerator, ResidualSearch, Selection, Target,
};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tools: ToolSet,
    /// Causality of the residual matchings; elimination is always differential.
    pub causality: Causality,
    pub target: Target,
    pub budget: Budget,
    pub mso_cap: usize,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tools: ToolSet::all(),
            causality: Causality::Mixed,
            target: Target::Detectability,
            budget: Budget::Auto,
            mso_cap: DEFAULT_MSO_CAP,
            jobs: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mso(#[from] MsoError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Steps one and two: decomposition and elimination on `G+`.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub graph: BipartiteGraph,
    pub dm: DmDecomposition,
    pub faults: Vec<ConstraintIdx>,
    pub elimination: Elimination,
    pub context: ResidualContext,
}

impl Analysis {
    pub fn new(model: &StructuralModel, causality: Causality) -> Self {
        let graph = BipartiteGraph::from_model(model);
        let dm = dm_decompose(&graph);
        let faults = detectable_faults(&dm, &graph);
        let over = graph.restrict(dm.over.constraints.iter().copied());
        let elimination =
            weighted_elimination(&MatchingProblem::new(over.clone(), Causality::Differential));
        let context = ResidualContext {
            graph: over,
            base: elimination.matching.clone(),
            causality,
        };
        Self {
            graph,
            dm,
            faults,
            elimination,
            context,
        }
    }

    /// `G+` with the eliminated constraints removed and their variables known.
    pub fn reduced(&self) -> BipartiteGraph {
        self.context.reduced()
    }

    pub fn msos(&self, cap: usize) -> Result<Vec<MsoSet>, MsoError> {
        enumerate_msos(&self.reduced(), &MsoOptions { cap })
    }

    /// Generators for the elimination leftovers, evaluated directly.
    pub fn elimination_generators(
        &self,
        tools: &ToolSet,
    ) -> Result<Vec<ResidualGenerator>, ResidualError> {
        let mut out = Vec::new();
        for &c in &self.elimination.residual_candidates {
            let rg = evaluate_candidate(&self.context, c, &Matching::empty())?;
            if generator_calculable(&self.context, &rg, tools)? {
                out.push(rg);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Faults stay uncovered and some searches ran out of budget.
    BudgetExhausted,
    /// Detectable faults exist but no calculable residual was found.
    TargetUnreachable,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub analysis: Analysis,
    pub msos: Vec<MsoSet>,
    pub searches: Vec<ResidualSearch>,
    pub pool: Vec<ResidualGenerator>,
    pub selection: Selection,
    pub signature: FaultSignatureMatrix,
    pub status: Status,
}

impl PipelineRun {
    pub fn report(&self) -> Result<PipelineReport, ResidualError> {
        PipelineReport::new(self)
    }
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool for `None`.
pub fn with_jobs<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, PipelineError> {
    match jobs {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Runs every stage, in parallel where possible.
pub fn run_pipeline(
    model: &StructuralModel,
    cfg: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    with_jobs(cfg.jobs, || run_stages(model, cfg))?
}

fn run_stages(model: &StructuralModel, cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    let analysis = Analysis::new(model, cfg.causality);
    let msos = analysis.msos(cfg.mso_cap)?;
    let searches = search_all(&analysis.context, &msos, &cfg.tools, cfg.budget)?;
    let mut pool: Vec<ResidualGenerator> = searches
        .iter()
        .filter_map(|s| s.generator.clone())
        .collect();
    pool.extend(analysis.elimination_generators(&cfg.tools)?);
    pool.retain(|rg| !rg.sensitive_faults.is_empty());
    let pool = normalize_pool(pool);
    let selection = select_residuals(&pool, cfg.target, &analysis.faults);
    let signature =
        FaultSignatureMatrix::new(&analysis.graph, &selection.generators, &analysis.faults);
    let status = if analysis.faults.is_empty() || selection.uncovered.is_empty() {
        Status::Ok
    } else if searches.iter().any(ResidualSearch::budget_failure) {
        Status::BudgetExhausted
    } else if selection.generators.is_empty() {
        Status::TargetUnreachable
    } else {
        Status::Ok
    };
    Ok(PipelineRun {
        analysis,
        msos,
        searches,
        pool,
        selection,
        signature,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartReport {
    pub constraints: Vec<String>,
    pub variables: Vec<String>,
}

impl PartReport {
    fn new(g: &BipartiteGraph, p: &DmPart) -> Self {
        Self {
            constraints: g.constraint_ids(&p.constraints),
            variables: g.variable_ids(&p.variables),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DmReport {
    pub under: PartReport,
    pub just: PartReport,
    pub over: PartReport,
    pub redundancy: usize,
    pub hall_blocks: Vec<PartReport>,
    pub detectable_faults: Vec<String>,
}

impl DmReport {
    pub fn new(g: &BipartiteGraph, d: &DmDecomposition) -> Self {
        Self {
            under: PartReport::new(g, &d.under),
            just: PartReport::new(g, &d.just),
            over: PartReport::new(g, &d.over),
            redundancy: d.redundancy(),
            hall_blocks: d
                .hall_blocks
                .iter()
                .map(|b| PartReport {
                    constraints: g.constraint_ids(&b.constraints),
                    variables: g.variable_ids(&b.variables),
                })
                .collect(),
            detectable_faults: g.constraint_ids(&detectable_faults(d, g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchingReport {
    pub pairs: Vec<(String, String)>,
    pub total_weight: Cost,
}

impl MatchingReport {
    pub fn new(g: &BipartiteGraph, m: &Matching) -> Self {
        Self {
            pairs: m.pairs(g),
            total_weight: m.total_weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "kebab-case")]
pub enum PlanStepReport {
    Solve {
        constraint: String,
        variable: String,
    },
    Simultaneous {
        constraints: Vec<String>,
        variables: Vec<String>,
        solver: SolverRequirement,
    },
    Evaluate {
        constraint: String,
    },
}

impl PlanStepReport {
    pub fn new(g: &BipartiteGraph, step: &PlanStep) -> Self {
        match step {
            PlanStep::Solve {
                constraint,
                variable,
            } => PlanStepReport::Solve {
                constraint: g.constraint(*constraint).id.clone(),
                variable: g.variable(*variable).id.clone(),
            },
            PlanStep::Simultaneous {
                constraints,
                variables,
                solver,
            } => PlanStepReport::Simultaneous {
                constraints: g.constraint_ids(constraints),
                variables: g.variable_ids(variables),
                solver: *solver,
            },
            PlanStep::Evaluate { constraint } => PlanStepReport::Evaluate {
                constraint: g.constraint(*constraint).id.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratorReport {
    pub residual: String,
    pub cost: Cost,
    pub matching: Vec<(String, String)>,
    pub sensitive_faults: Vec<String>,
    pub plan: Vec<PlanStepReport>,
}

impl GeneratorReport {
    pub fn new(g: &BipartiteGraph, rg: &ResidualGenerator) -> Result<Self, ResidualError> {
        let plan = evaluation_plan(rg, g)?
            .iter()
            .map(|s| PlanStepReport::new(g, s))
            .collect();
        Ok(Self {
            residual: g.constraint(rg.residual).id.clone(),
            cost: rg.cost,
            matching: rg.matching.pairs(g),
            sensitive_faults: g.constraint_ids(&rg.sensitive_faults),
            plan,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EliminationReport {
    pub matching: MatchingReport,
    pub residual_candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MsoSummary {
    pub count: usize,
    pub sets: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchSummary {
    pub murty_iterations: usize,
    pub without_generator: usize,
    /// Residual candidates whose budget ran out, as `[mso index, constraint]`.
    pub exhausted: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionReport {
    pub target: Target,
    pub metric: usize,
    pub max_metric: usize,
    pub residuals: Vec<GeneratorReport>,
    pub uncovered: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineReport {
    pub version: u32,
    pub status: Status,
    pub constraints: usize,
    pub unknowns: usize,
    pub dm: DmReport,
    pub elimination: EliminationReport,
    pub msos: MsoSummary,
    pub search: SearchSummary,
    pub pool_size: usize,
    pub selection: SelectionReport,
    pub signature: FaultSignatureMatrix,
}

impl PipelineReport {
    pub fn new(run: &PipelineRun) -> Result<Self, ResidualError> {
        let a = &run.analysis;
        let g = &a.graph;
        let residuals = run
            .selection
            .generators
            .iter()
            .map(|rg| GeneratorReport::new(g, rg))
            .collect::<Result<_, _>>()?;
        let exhausted = run
            .searches
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.exhausted
                    .iter()
                    .map(move |&c| (i, g.constraint(c).id.clone()))
            })
            .collect();
        Ok(Self {
            version: REPORT_VERSION,
            status: run.status,
            constraints: g.constraints().len(),
            unknowns: g.unknowns().len(),
            dm: DmReport::new(g, &a.dm),
            elimination: EliminationReport {
                matching: MatchingReport::new(g, &a.elimination.matching),
                residual_candidates: g.constraint_ids(&a.elimination.residual_candidates),
            },
            msos: MsoSummary {
                count: run.msos.len(),
                sets: run
                    .msos
                    .iter()
                    .map(|m| g.constraint_ids(&m.constraints))
                    .collect(),
            },
            search: SearchSummary {
                murty_iterations: run.searches.iter().map(|s| s.iterations).sum(),
                without_generator: run
                    .searches
                    .iter()
                    .filter(|s| s.generator.is_none())
                    .count(),
                exhausted,
            },
            pool_size: run.pool.len(),
            selection: SelectionReport {
                target: run.selection.target,
                metric: run.selection.metric,
                max_metric: run.selection.max_metric,
                residuals,
                uncovered: g.constraint_ids(&run.selection.uncovered),
            },
            signature: run.signature.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
