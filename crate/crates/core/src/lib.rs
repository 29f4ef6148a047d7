//! Structural analysis for fault detection and isolation.
//!
//! A model is a bipartite graph of constraints and variables with weighted
//! edges. The crate decomposes it, finds cheap calculable matchings,
//! enumerates minimal structurally overdetermined sets and picks residual
//! generators until a detectability or isolability target is met.

pub mod calculability;
pub mod decomposition;
pub mod fixtures;
pub mod graph;
pub mod matching;
pub mod model;
pub mod mso;
pub mod pipeline;
pub mod random;
pub mod residual;

pub use calculability::{
    classify_blocks, is_calculable, BlockClassification, Rule, SolverRequirement, Verdict,
    Violation,
};
pub use decomposition::{detectable_faults, dm_decompose, DmDecomposition, DmPart, HallBlock};
pub use graph::{BipartiteGraph, ConstraintIdx, EdgeIdx, Matching, VariableIdx};
pub use matching::{Causality, MatchingError, MatchingProblem};
pub use model::{
    parse_model, parse_model_with, Constraint, ConstraintKind, Cost, CostTable, DynamicRole, Edge,
    ModelError, OpCounts, OpKind, ParseOptions, StructuralModel, Tool, ToolSet, Variable,
};
pub use mso::{enumerate_msos, filter_faultable, MsoError, MsoOptions, MsoSet};
pub use pipeline::{run_pipeline, Analysis, PipelineConfig, PipelineError, PipelineReport, Status};
pub use residual::{
    get_optimal_residual, select_residuals, Budget, FaultSignatureMatrix, ResidualContext,
    ResidualGenerator, Target,
};
