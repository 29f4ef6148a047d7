use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use structdiag::graph::Columns;
use structdiag::matching::{hungarian_min_cost, ranking_match, weighted_elimination};
use structdiag::mso::DEFAULT_MSO_CAP;
use structdiag::pipeline::{with_jobs, DmReport, GeneratorReport, MatchingReport};
use structdiag::random::{random_model, GeneratorConfig};
use structdiag::{
    dm_decompose, enumerate_msos, filter_faultable, is_calculable, parse_model_with, run_pipeline,
    Analysis, BipartiteGraph, Budget, Causality, CostTable, Matching, MatchingProblem, MsoOptions,
    ParseOptions, PipelineConfig, Status, StructuralModel, Target, ToolSet,
};

const EXIT_USAGE: u8 = 1;
const EXIT_MODEL: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_UNREACHABLE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "structdiag",
    version,
    about = "Structural analysis for fault detection and isolation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dulmage-Mendelsohn decomposition.
    Dm {
        #[command(flatten)]
        model: ModelArgs,
        /// Emit the biadjacency matrix permuted into block-triangular form as CSV.
        #[arg(long)]
        biadjacency: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// A single matching of the whole graph.
    Match {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Algorithm::WeightedElimination)]
        algorithm: Algorithm,
        #[arg(long, default_value = "differential")]
        causality: Causality,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// MSO sets of the reduced over-constrained part.
    Msos {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        faultable_only: bool,
        /// Enumerate on the over-constrained part without the elimination step.
        #[arg(long)]
        no_reduce: bool,
        #[arg(long, default_value_t = DEFAULT_MSO_CAP)]
        cap: usize,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Calculability of a matching given as JSON.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        /// JSON file: `[[constraint, variable], ...]` or an object with `pairs`.
        #[arg(long)]
        matching: PathBuf,
        #[arg(long, default_value = "all")]
        tools: ToolSet,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Selected residual generators and their signature matrix.
    Residuals {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// The whole pipeline and its summary report.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Writes a seeded random model.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        constraints: usize,
        #[arg(long, default_value_t = 6)]
        unknowns: usize,
        #[arg(long, default_value_t = 3)]
        knowns: usize,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Graphviz rendering, optionally oriented by a matching.
    Dot {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        #[arg(long, default_value = "differential")]
        causality: Causality,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model file (text format, or JSON when the name ends in `.json`).
    model: PathBuf,
    /// Cost table overrides, e.g. `mul=4,diff=150`.
    #[arg(long)]
    costs: Option<String>,
    /// Gain of the sensor-noise surcharge on edge weights.
    #[arg(long, default_value_t = 0.0)]
    noise_gain: f64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "all")]
    tools: ToolSet,
    #[arg(long, default_value = "mixed")]
    causality: Causality,
    #[arg(long, default_value = "detectability")]
    target: Target,
    /// Murty iterations per residual candidate: `auto`, `unlimited` or a number.
    #[arg(long, default_value = "auto")]
    budget: Budget,
    #[arg(long, default_value_t = DEFAULT_MSO_CAP)]
    cap: usize,
    #[arg(long)]
    jobs: Option<usize>,
}

impl SearchArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            tools: self.tools,
            causality: self.causality,
            target: self.target,
            budget: self.budget,
            mso_cap: self.cap,
            jobs: self.jobs,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the artifact here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Ranking,
    WeightedElimination,
    /// Minimum-cost perfect matching of the just-constrained part.
    Hungarian,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    /// Fault signature matrix only.
    Csv,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(args: &ModelArgs) -> Result<StructuralModel, Failure> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("cannot read {}", args.model.display()))
        .map_err(fail(EXIT_MODEL))?;
    let cost_table = match &args.costs {
        Some(spec) => CostTable::default()
            .with_overrides(spec)
            .map_err(|e| fail(EXIT_USAGE)(anyhow!(e)))?,
        None => CostTable::default(),
    };
    let is_json = args.model.extension().is_some_and(|e| e == "json");
    let model = if is_json {
        StructuralModel::from_json(&text).map(|mut m| {
            m.apply_noise_gain(args.noise_gain);
            m
        })
    } else {
        parse_model_with(
            &text,
            &ParseOptions {
                cost_table,
                noise_gain: args.noise_gain,
            },
        )
    };
    model
        .with_context(|| format!("invalid model {}", args.model.display()))
        .map_err(fail(EXIT_MODEL))
}

fn emit(out: &OutputArgs, content: &str) -> Result<(), Failure> {
    match &out.output {
        Some(path) => fs::write(path, content)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(fail(EXIT_USAGE)),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Dm {
            model,
            biadjacency,
            out,
        } => {
            let m = load(&model)?;
            let g = BipartiteGraph::from_model(&m);
            let d = dm_decompose(&g);
            let text = if biadjacency {
                permuted_biadjacency(&g, &d)
            } else {
                pretty(&DmReport::new(&g, &d))
            };
            emit(&out, &text)?;
            Ok(0)
        }
        Command::Match {
            model,
            algorithm,
            causality,
            out,
        } => {
            let m = load(&model)?;
            let g = BipartiteGraph::from_model(&m);
            let report = match algorithm {
                Algorithm::Ranking => {
                    let r = ranking_match(&MatchingProblem::new(g.clone(), causality));
                    json!({ "algorithm": "ranking", "matching": MatchingReport::new(&g, &r.matching) })
                }
                Algorithm::WeightedElimination => {
                    let r = weighted_elimination(&MatchingProblem::new(g.clone(), causality));
                    json!({
                        "algorithm": "weighted-elimination",
                        "matching": MatchingReport::new(&g, &r.matching),
                        "residual_candidates": g.constraint_ids(&r.residual_candidates),
                    })
                }
                Algorithm::Hungarian => {
                    let just = just_part(&g);
                    let matching =
                        hungarian_min_cost(&MatchingProblem::new(just.clone(), causality))
                            .context("just-constrained part")
                            .map_err(fail(EXIT_UNREACHABLE))?;
                    json!({ "algorithm": "hungarian", "matching": MatchingReport::new(&just, &matching) })
                }
            };
            emit(&out, &pretty(&report))?;
            Ok(0)
        }
        Command::Msos {
            model,
            faultable_only,
            no_reduce,
            cap,
            jobs,
            out,
        } => {
            let m = load(&model)?;
            let analysis = Analysis::new(&m, Causality::Mixed);
            let g = if no_reduce {
                analysis.context.graph.clone()
            } else {
                analysis.reduced()
            };
            let options = MsoOptions { cap };
            let msos = with_jobs(jobs, || enumerate_msos(&g, &options))
                .map_err(pipeline_failure)?
                .map_err(|e| fail(EXIT_BUDGET)(e.into()))?;
            let msos = if faultable_only {
                filter_faultable(&msos, &g)
            } else {
                msos
            };
            let sets: Vec<Value> = msos
                .iter()
                .map(|s| json!({ "constraints": g.constraint_ids(&s.constraints), "unknowns": g.variable_ids(&s.unknowns) }))
                .collect();
            emit(&out, &pretty(&json!({ "count": msos.len(), "msos": sets })))?;
            Ok(0)
        }
        Command::Check {
            model,
            matching,
            tools,
            out,
        } => {
            let m = load(&model)?;
            let g = BipartiteGraph::from_model(&m);
            let (view, matching) = read_matching(&g, &matching)?;
            let verdict =
                is_calculable(&view, &matching, &tools).map_err(|e| fail(EXIT_MODEL)(e.into()))?;
            let blocks: Vec<Value> = verdict
                .blocks
                .iter()
                .map(|b| {
                    json!({
                        "constraints": view.constraint_ids(&b.constraints),
                        "variables": view.variable_ids(&b.variables),
                        "solver": b.requirement,
                    })
                })
                .collect();
            let violation = verdict.violation.as_ref().map(|v| {
                json!({ "rule": v.rule().letter().to_string(), "kind": format!("{:?}", v.rule()), "detail": describe(&view, v) })
            });
            let report = json!({ "calculable": verdict.is_calculable(), "violation": violation, "blocks": blocks });
            emit(&out, &pretty(&report))?;
            Ok(0)
        }
        Command::Residuals {
            model,
            search,
            format,
            out,
        } => {
            let m = load(&model)?;
            let run = run_pipeline(&m, &search.config()).map_err(pipeline_failure)?;
            let g = &run.analysis.graph;
            let text = if format == Format::Csv {
                run.signature.to_csv()
            } else {
                let residuals = run
                    .selection
                    .generators
                    .iter()
                    .map(|rg| GeneratorReport::new(g, rg))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| fail(EXIT_MODEL)(e.into()))?;
                pretty(&json!({
                    "status": run.status,
                    "target": run.selection.target,
                    "residuals": residuals,
                    "uncovered": g.constraint_ids(&run.selection.uncovered),
                    "signature": run.signature,
                }))
            };
            emit(&out, &text)?;
            Ok(status_code(run.status))
        }
        Command::Run {
            model,
            search,
            format,
            out,
        } => {
            let m = load(&model)?;
            let run = run_pipeline(&m, &search.config()).map_err(pipeline_failure)?;
            let report = run.report().map_err(|e| fail(EXIT_MODEL)(e.into()))?;
            eprintln!(
                "{} constraints, {} MSOs, {} residual(s) selected, status {:?}",
                report.constraints,
                report.msos.count,
                report.selection.residuals.len(),
                report.status
            );
            let text = if format == Format::Csv {
                run.signature.to_csv()
            } else {
                report.to_json()
            };
            emit(&out, &text)?;
            Ok(status_code(run.status))
        }
        Command::Generate {
            seed,
            constraints,
            unknowns,
            knowns,
            json,
            out,
        } => {
            let cfg = GeneratorConfig {
                constraints,
                unknowns,
                knowns,
                ..Default::default()
            };
            let m = random_model(seed, &cfg);
            emit(&out, &if json { m.to_json() } else { m.to_text() })?;
            Ok(0)
        }
        Command::Dot {
            model,
            algorithm,
            causality,
            out,
        } => {
            let m = load(&model)?;
            let g = BipartiteGraph::from_model(&m);
            let matching = match algorithm {
                None => None,
                Some(Algorithm::Ranking) => {
                    Some(ranking_match(&MatchingProblem::new(g.clone(), causality)).matching)
                }
                Some(Algorithm::WeightedElimination) => {
                    Some(weighted_elimination(&MatchingProblem::new(g.clone(), causality)).matching)
                }
                Some(Algorithm::Hungarian) => Some(
                    hungarian_min_cost(&MatchingProblem::new(just_part(&g), causality))
                        .context("just-constrained part")
                        .map_err(fail(EXIT_UNREACHABLE))?,
                ),
            };
            emit(&out, &g.to_dot(matching.as_ref()))?;
            Ok(0)
        }
    }
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Ok => 0,
        Status::BudgetExhausted => EXIT_BUDGET,
        Status::TargetUnreachable => EXIT_UNREACHABLE,
    }
}

fn pipeline_failure(e: structdiag::PipelineError) -> Failure {
    use structdiag::PipelineError;
    let code = match e {
        PipelineError::Mso(_) => EXIT_BUDGET,
        PipelineError::Residual(_) => EXIT_MODEL,
        PipelineError::Pool(_) => EXIT_USAGE,
    };
    Failure {
        code,
        error: e.into(),
    }
}

/// The just-constrained part with the over-constrained variables known.
fn just_part(g: &BipartiteGraph) -> BipartiteGraph {
    let d = dm_decompose(g);
    g.restrict(d.just.constraints.iter().copied())
        .with_known(d.over.variables.iter().copied())
}

fn permuted_biadjacency(g: &BipartiteGraph, d: &structdiag::DmDecomposition) -> String {
    let mut rows = d.under.constraints.clone();
    let mut cols = d.under.variables.clone();
    for b in &d.hall_blocks {
        rows.extend(&b.constraints);
        cols.extend(&b.variables);
    }
    rows.extend(&d.over.constraints);
    cols.extend(&d.over.variables);
    let a = g.biadjacency(Columns::UnknownOnly);
    let col_pos: std::collections::HashMap<_, _> =
        a.columns.iter().enumerate().map(|(j, &v)| (v, j)).collect();
    let mut out = String::from("constraint");
    for &v in &cols {
        out.push(',');
        out.push_str(&g.variable(v).id);
    }
    out.push('\n');
    for &c in &rows {
        let row = &a.data[a
            .rows
            .iter()
            .position(|&r| r == c)
            .expect("active constraint")];
        out.push_str(&g.constraint(c).id);
        for v in &cols {
            out.push(',');
            out.push_str(&row[col_pos[v]].to_string());
        }
        out.push('\n');
    }
    out
}

fn read_matching(g: &BipartiteGraph, path: &Path) -> Result<(BipartiteGraph, Matching), Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(fail(EXIT_USAGE))?;
    let value: Value = serde_json::from_str(&text)
        .context("matching is not JSON")
        .map_err(fail(EXIT_USAGE))?;
    let pairs = value
        .get("pairs")
        .or_else(|| value.get("matching").and_then(|m| m.get("pairs")))
        .unwrap_or(&value);
    let pairs: Vec<(String, String)> = serde_json::from_value(pairs.clone())
        .context("expected a list of [constraint, variable] pairs")
        .map_err(fail(EXIT_USAGE))?;
    let mut edges = Vec::new();
    let mut constraints = Vec::new();
    for (c, v) in &pairs {
        let ci = g
            .constraint_index(c)
            .ok_or_else(|| fail(EXIT_MODEL)(anyhow!("unknown constraint `{c}`")))?;
        let vi = g
            .variable_index(v)
            .ok_or_else(|| fail(EXIT_MODEL)(anyhow!("unknown variable `{v}`")))?;
        let e = g
            .find_edge(ci, vi)
            .ok_or_else(|| fail(EXIT_MODEL)(anyhow!("no edge {c}-{v}")))?;
        edges.push(e);
        constraints.push(ci);
    }
    let view = g.restrict(constraints);
    let matching = Matching::new(&view, edges).map_err(|e| fail(EXIT_MODEL)(e.into()))?;
    Ok((view, matching))
}

fn describe(g: &BipartiteGraph, v: &structdiag::Violation) -> String {
    use structdiag::Violation;
    let edge = |e: usize| {
        let info = g.edge(e);
        format!(
            "{}-{}",
            g.constraint(info.constraint).id,
            g.variable(info.variable).id
        )
    };
    match v {
        Violation::MissingSolver { block, requirement } => {
            format!("block {block} needs a {}", requirement.as_str())
        }
        Violation::DerivativeInLoop { edge: e, .. } => {
            format!("derivative edge {} lies in a loop", edge(*e))
        }
        Violation::OpenLoopIntegration { edge: e } => {
            format!("integral edge {} lies on an open path", edge(*e))
        }
        Violation::MissingDifferentiator { edge: e } => {
            format!("derivative edge {} needs a differentiator", edge(*e))
        }
    }
}
