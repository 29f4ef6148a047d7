//! Structural model: variables, constraints and annotated edges.
//!
//! A model is the single source of truth for everything downstream. It is
//! validated on construction and stored in canonical order (ids sorted with
//! a natural, digit-aware comparison) so that serialization is deterministic
//! and index-based tie-breaking follows the ids a reader sees.
//!
//! The text format is line oriented, one directive per line, `#` starts a
//! comment:
//!
//! ```text
//! version 1
//! variable <id> [known] [noise=<float>]
//! constraint <id> kind=<linear|nonlinear|differential> [faultable] [evalcost=<int> | ops=<op:n,...>]
//! edge <constraint> <variable> [weight=<int> | ops=<op:n,...>] [unsolvable] [role=<derivative|integral>]
//! ```
//!
//! Operation names accepted in `ops=` lists are `add`, `sub`, `mul`, `div`,
//! `trig`, `pow`, `root`, `int` and `diff`. An edge without `weight` or `ops`
//! has weight 1; a constraint without `evalcost` or `ops` has evaluation
//! cost 1.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version written by the serializers and accepted by the parsers.
pub const FORMAT_VERSION: u32 = 1;

/// Nonnegative integer cost units.
pub type Cost = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    #[serde(default)]
    pub known: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
}

impl Variable {
    pub fn unknown(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            known: false,
            noise_variance: None,
        }
    }

    pub fn known(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            known: true,
            noise_variance: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Linear,
    Nonlinear,
    Differential,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Linear => "linear",
            ConstraintKind::Nonlinear => "nonlinear",
            ConstraintKind::Differential => "differential",
        }
    }
}

impl FromStr for ConstraintKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ConstraintKind::Linear),
            "nonlinear" => Ok(ConstraintKind::Nonlinear),
            "differential" => Ok(ConstraintKind::Differential),
            other => Err(format!("unknown constraint kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    #[serde(default)]
    pub faultable: bool,
    #[serde(default = "default_cost")]
    pub eval_cost: Cost,
}

impl Constraint {
    pub fn new(id: impl Into<String>, kind: ConstraintKind) -> Self {
        Self {
            id: id.into(),
            kind,
            faultable: false,
            eval_cost: 1,
        }
    }

    pub fn faultable(mut self, faultable: bool) -> Self {
        self.faultable = faultable;
        self
    }

    pub fn eval_cost(mut self, cost: Cost) -> Self {
        self.eval_cost = cost;
        self
    }
}

/// What matching an edge of a differentiation constraint implies.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum DynamicRole {
    #[default]
    None,
    /// Solving for this variable differentiates the other one.
    Derivative,
    /// Solving for this variable integrates the other one.
    Integral,
}

impl DynamicRole {
    pub fn is_none(&self) -> bool {
        matches!(self, DynamicRole::None)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DynamicRole::None => "none",
            DynamicRole::Derivative => "derivative",
            DynamicRole::Integral => "integral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub constraint: String,
    pub variable: String,
    #[serde(default = "default_cost")]
    pub weight: Cost,
    #[serde(default = "default_true")]
    pub solvable: bool,
    #[serde(default, skip_serializing_if = "DynamicRole::is_none")]
    pub role: DynamicRole,
}

impl Edge {
    pub fn new(constraint: impl Into<String>, variable: impl Into<String>, weight: Cost) -> Self {
        Self {
            constraint: constraint.into(),
            variable: variable.into(),
            weight,
            solvable: true,
            role: DynamicRole::None,
        }
    }

    pub fn unsolvable(mut self) -> Self {
        self.solvable = false;
        self
    }

    pub fn role(mut self, role: DynamicRole) -> Self {
        self.role = role;
        self
    }
}

fn default_cost() -> Cost {
    1
}

fn default_true() -> bool {
    true
}

/// Elementary operations that make up a solved expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Trig,
    Pow,
    Root,
    Integrate,
    Differentiate,
}

impl OpKind {
    pub const ALL: [OpKind; 9] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Trig,
        OpKind::Pow,
        OpKind::Root,
        OpKind::Integrate,
        OpKind::Differentiate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Trig => "trig",
            OpKind::Pow => "pow",
            OpKind::Root => "root",
            OpKind::Integrate => "int",
            OpKind::Differentiate => "diff",
        }
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add" => OpKind::Add,
            "sub" => OpKind::Sub,
            "mul" => OpKind::Mul,
            "div" => OpKind::Div,
            "trig" => OpKind::Trig,
            "pow" => OpKind::Pow,
            "root" => OpKind::Root,
            "int" | "integrate" => OpKind::Integrate,
            "diff" | "differentiate" => OpKind::Differentiate,
            other => return Err(format!("unknown operation `{other}`")),
        })
    }
}

/// Multiset of operations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpCounts(BTreeMap<OpKind, u64>);

impl OpCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, op: OpKind, count: u64) -> &mut Self {
        if count > 0 {
            *self.0.entry(op).or_insert(0) += count;
        }
        self
    }

    pub fn with(mut self, op: OpKind, count: u64) -> Self {
        self.add(op, count);
        self
    }

    pub fn count(&self, op: OpKind) -> u64 {
        self.0.get(&op).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpKind, u64)> + '_ {
        self.0.iter().map(|(&op, &n)| (op, n))
    }

    /// Multiset union (counts add up).
    pub fn union(&self, other: &OpCounts) -> OpCounts {
        let mut out = self.clone();
        for (op, n) in other.iter() {
            out.add(op, n);
        }
        out
    }
}

impl FromStr for OpCounts {
    type Err = String;

    /// Parses `add:2,mul:1`. A bare name counts once.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut counts = OpCounts::new();
        for item in s.split(',').filter(|item| !item.is_empty()) {
            let (name, n) = match item.split_once(':') {
                Some((name, n)) => {
                    let n = n
                        .parse::<u64>()
                        .map_err(|_| format!("invalid operation count `{n}`"))?;
                    (name, n)
                }
                None => (item, 1),
            };
            counts.add(name.parse()?, n);
        }
        Ok(counts)
    }
}

/// Cost of each elementary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub add_sub: Cost,
    pub mul: Cost,
    pub div: Cost,
    pub trig_pow_root: Cost,
    pub integration: Cost,
    pub differentiation: Cost,
}

impl Default for CostTable {
    fn default() -> Self {
        Self {
            add_sub: 1,
            mul: 5,
            div: 10,
            trig_pow_root: 100,
            integration: 100,
            differentiation: 200,
        }
    }
}

impl CostTable {
    pub fn cost_of(&self, op: OpKind) -> Cost {
        match op {
            OpKind::Add | OpKind::Sub => self.add_sub,
            OpKind::Mul => self.mul,
            OpKind::Div => self.div,
            OpKind::Trig | OpKind::Pow | OpKind::Root => self.trig_pow_root,
            OpKind::Integrate => self.integration,
            OpKind::Differentiate => self.differentiation,
        }
    }

    /// Applies `name=value` overrides, e.g. `mul=4,differentiation=500`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self, String> {
        for item in spec.split(',').filter(|item| !item.is_empty()) {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| format!("expected name=value, got `{item}`"))?;
            let value: Cost = value
                .parse()
                .map_err(|_| format!("invalid cost `{value}`"))?;
            let slot = match name {
                "add_sub" | "add" | "sub" => &mut self.add_sub,
                "mul" => &mut self.mul,
                "div" => &mut self.div,
                "trig_pow_root" | "trig" | "pow" | "root" => &mut self.trig_pow_root,
                "integration" | "int" => &mut self.integration,
                "differentiation" | "diff" => &mut self.differentiation,
                other => return Err(format!("unknown cost table entry `{other}`")),
            };
            *slot = value;
        }
        Ok(self)
    }
}

/// Sum of the table costs over the multiset.
pub fn edge_weight_from_ops(ops: &OpCounts, table: &CostTable) -> Cost {
    ops.iter().map(|(op, n)| table.cost_of(op) * n).sum()
}

/// Solver capabilities of the diagnosis runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tool {
    Differentiator,
    Integrator,
    LinearSolver,
    NonlinearSolver,
    DifferentialEquationSolver,
}

impl Tool {
    pub const ALL: [Tool; 5] = [
        Tool::Differentiator,
        Tool::Integrator,
        Tool::LinearSolver,
        Tool::NonlinearSolver,
        Tool::DifferentialEquationSolver,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tool::Differentiator => "differentiator",
            Tool::Integrator => "integrator",
            Tool::LinearSolver => "linear",
            Tool::NonlinearSolver => "nonlinear",
            Tool::DifferentialEquationSolver => "de",
        }
    }
}

impl FromStr for Tool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "differentiator" | "diff" => Tool::Differentiator,
            "integrator" | "int" => Tool::Integrator,
            "linear" | "linear-solver" => Tool::LinearSolver,
            "nonlinear" | "nonlinear-solver" => Tool::NonlinearSolver,
            "de" | "de-solver" | "ode" => Tool::DifferentialEquationSolver,
            other => return Err(format!("unknown tool `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ToolSet {
    pub differentiator: bool,
    pub integrator: bool,
    pub linear_solver: bool,
    pub nonlinear_solver: bool,
    pub de_solver: bool,
}

impl ToolSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all() -> Self {
        Self {
            differentiator: true,
            integrator: true,
            linear_solver: true,
            nonlinear_solver: true,
            de_solver: true,
        }
    }

    pub fn has(&self, tool: Tool) -> bool {
        match tool {
            Tool::Differentiator => self.differentiator,
            Tool::Integrator => self.integrator,
            Tool::LinearSolver => self.linear_solver,
            Tool::NonlinearSolver => self.nonlinear_solver,
            Tool::DifferentialEquationSolver => self.de_solver,
        }
    }

    pub fn with(mut self, tool: Tool) -> Self {
        match tool {
            Tool::Differentiator => self.differentiator = true,
            Tool::Integrator => self.integrator = true,
            Tool::LinearSolver => self.linear_solver = true,
            Tool::NonlinearSolver => self.nonlinear_solver = true,
            Tool::DifferentialEquationSolver => self.de_solver = true,
        }
        self
    }

    /// `self` has every tool `other` has.
    pub fn is_superset_of(&self, other: &ToolSet) -> bool {
        Tool::ALL.iter().all(|&t| !other.has(t) || self.has(t))
    }

    pub fn iter(&self) -> impl Iterator<Item = Tool> + '_ {
        Tool::ALL.into_iter().filter(|&t| self.has(t))
    }
}

impl FromStr for ToolSet {
    type Err = String;

    /// `all`, `none`, or a comma-separated tool list.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(ToolSet::all()),
            "none" | "" => Ok(ToolSet::none()),
            list => list.split(',').try_fold(ToolSet::none(), |set, name| {
                Ok(set.with(name.trim().parse()?))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}unknown id reference `{id}`", at(*.line))]
    UnknownId { id: String, line: Option<usize> },
    #[error("{}duplicate id `{id}`", at(*.line))]
    DuplicateId { id: String, line: Option<usize> },
    #[error("{}duplicate edge {constraint}-{variable}", at(*.line))]
    DuplicateEdge {
        constraint: String,
        variable: String,
        line: Option<usize>,
    },
    #[error("{}invalid id `{id}`", at(*.line))]
    InvalidId { id: String, line: Option<usize> },
    #[error("{}negative weight", at(*.line))]
    NegativeWeight { line: Option<usize> },
    #[error("{}invalid noise variance for `{id}`", at(*.line))]
    InvalidNoise { id: String, line: Option<usize> },
    #[error(
        "differential constraint `{constraint}` needs exactly one derivative and one integral edge \
         (found {derivative} and {integral})"
    )]
    DifferentialRoles {
        constraint: String,
        derivative: usize,
        integral: usize,
    },
    #[error("{}edge {constraint}-{variable} has a dynamic role but `{constraint}` is not differential", at(*.line))]
    RoleOnAlgebraic {
        constraint: String,
        variable: String,
        line: Option<usize>,
    },
    #[error("constraint `{0}` has no edges")]
    EmptyConstraint(String),
    #[error("variable `{0}` appears in no constraint")]
    UnusedVariable(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("json: {0}")]
    Json(String),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// Orders ids so that embedded numbers compare numerically (`c2` < `c10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(cb.iter()) {
        let ord = if *da && *db {
            let ta = sa.trim_start_matches('0');
            let tb = sb.trim_start_matches('0');
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            sa.cmp(sb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

fn valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// A validated structural model in canonical order.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    edges: Vec<Edge>,
    variable_index: HashMap<String, usize>,
    constraint_index: HashMap<String, usize>,
}

impl PartialEq for StructuralModel {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables
            && self.constraints == other.constraints
            && self.edges == other.edges
    }
}

/// Source line of each item, for error reporting.
#[derive(Default)]
struct Lines {
    variables: Vec<Option<usize>>,
    constraints: Vec<Option<usize>>,
    edges: Vec<Option<usize>>,
}

impl StructuralModel {
    pub fn new(
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        edges: Vec<Edge>,
    ) -> Result<Self, ModelError> {
        Self::validated(variables, constraints, edges, Lines::default())
    }

    pub fn builder() -> ModelBuilder {
        ModelBuilder::default()
    }

    fn validated(
        variables: Vec<Variable>,
        constraints: Vec<Constraint>,
        edges: Vec<Edge>,
        lines: Lines,
    ) -> Result<Self, ModelError> {
        let line = |v: &Vec<Option<usize>>, i: usize| v.get(i).copied().flatten();
        let mut seen = HashSet::new();
        for (i, v) in variables.iter().enumerate() {
            if !valid_id(&v.id) {
                return Err(ModelError::InvalidId {
                    id: v.id.clone(),
                    line: line(&lines.variables, i),
                });
            }
            if !seen.insert(v.id.as_str()) {
                return Err(ModelError::DuplicateId {
                    id: v.id.clone(),
                    line: line(&lines.variables, i),
                });
            }
            if let Some(noise) = v.noise_variance {
                if !(noise.is_finite() && noise >= 0.0) {
                    return Err(ModelError::InvalidNoise {
                        id: v.id.clone(),
                        line: line(&lines.variables, i),
                    });
                }
            }
        }
        for (i, c) in constraints.iter().enumerate() {
            if !valid_id(&c.id) {
                return Err(ModelError::InvalidId {
                    id: c.id.clone(),
                    line: line(&lines.constraints, i),
                });
            }
            if !seen.insert(c.id.as_str()) {
                return Err(ModelError::DuplicateId {
                    id: c.id.clone(),
                    line: line(&lines.constraints, i),
                });
            }
        }

        let var_set: HashMap<&str, usize> = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();
        let con_set: HashMap<&str, usize> = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        let mut pairs = HashSet::new();
        let mut con_degree = vec![0usize; constraints.len()];
        let mut var_degree = vec![0usize; variables.len()];
        let mut roles = vec![(0usize, 0usize); constraints.len()];
        for (i, e) in edges.iter().enumerate() {
            let l = line(&lines.edges, i);
            let &ci = con_set
                .get(e.constraint.as_str())
                .ok_or_else(|| ModelError::UnknownId {
                    id: e.constraint.clone(),
                    line: l,
                })?;
            let &vi = var_set
                .get(e.variable.as_str())
                .ok_or_else(|| ModelError::UnknownId {
                    id: e.variable.clone(),
                    line: l,
                })?;
            if !pairs.insert((ci, vi)) {
                return Err(ModelError::DuplicateEdge {
                    constraint: e.constraint.clone(),
                    variable: e.variable.clone(),
                    line: l,
                });
            }
            con_degree[ci] += 1;
            var_degree[vi] += 1;
            match e.role {
                DynamicRole::None => {}
                _ if constraints[ci].kind != ConstraintKind::Differential => {
                    return Err(ModelError::RoleOnAlgebraic {
                        constraint: e.constraint.clone(),
                        variable: e.variable.clone(),
                        line: l,
                    })
                }
                DynamicRole::Derivative => roles[ci].0 += 1,
                DynamicRole::Integral => roles[ci].1 += 1,
            }
        }
        for (ci, c) in constraints.iter().enumerate() {
            if con_degree[ci] == 0 {
                return Err(ModelError::EmptyConstraint(c.id.clone()));
            }
            if c.kind == ConstraintKind::Differential && roles[ci] != (1, 1) {
                return Err(ModelError::DifferentialRoles {
                    constraint: c.id.clone(),
                    derivative: roles[ci].0,
                    integral: roles[ci].1,
                });
            }
        }
        if let Some(vi) = var_degree.iter().position(|&d| d == 0) {
            return Err(ModelError::UnusedVariable(variables[vi].id.clone()));
        }

        let mut variables = variables;
        let mut constraints = constraints;
        let mut edges = edges;
        variables.sort_by(|a, b| natural_cmp(&a.id, &b.id));
        constraints.sort_by(|a, b| natural_cmp(&a.id, &b.id));
        edges.sort_by(|a, b| {
            natural_cmp(&a.constraint, &b.constraint)
                .then_with(|| natural_cmp(&a.variable, &b.variable))
        });
        let variable_index = variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.clone(), i))
            .collect();
        let constraint_index = constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        Ok(Self {
            variables,
            constraints,
            edges,
            variable_index,
            constraint_index,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn variable_index(&self, id: &str) -> Option<usize> {
        self.variable_index.get(id).copied()
    }

    pub fn constraint_index(&self, id: &str) -> Option<usize> {
        self.constraint_index.get(id).copied()
    }

    pub fn unknown_count(&self) -> usize {
        self.variables.iter().filter(|v| !v.known).count()
    }

    pub fn faultable(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.faultable)
    }

    /// Adds `round(gain * noise_variance)` of every noisy known variable of a
    /// constraint to each of that constraint's edges towards unknown variables.
    pub fn apply_noise_gain(&mut self, gain: f64) {
        if gain == 0.0 {
            return;
        }
        let mut surcharge: HashMap<&str, Cost> = HashMap::new();
        for e in &self.edges {
            let v = &self.variables[self.variable_index[&e.variable]];
            if let (true, Some(noise)) = (v.known, v.noise_variance) {
                *surcharge.entry(e.constraint.as_str()).or_insert(0) +=
                    (gain * noise).round().max(0.0) as Cost;
            }
        }
        let surcharge: HashMap<String, Cost> = surcharge
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        for e in &mut self.edges {
            let known = self.variables[self.variable_index[&e.variable]].known;
            if !known {
                e.weight += surcharge.get(&e.constraint).copied().unwrap_or(0);
            }
        }
    }

    /// Canonical text form; `parse_model(&m.to_text()) == m`.
    pub fn to_text(&self) -> String {
        let mut out = format!("version {FORMAT_VERSION}\n");
        for v in &self.variables {
            out.push_str("variable ");
            out.push_str(&v.id);
            if v.known {
                out.push_str(" known");
            }
            if let Some(noise) = v.noise_variance {
                out.push_str(&format!(" noise={noise}"));
            }
            out.push('\n');
        }
        for c in &self.constraints {
            out.push_str(&format!("constraint {} kind={}", c.id, c.kind.as_str()));
            if c.faultable {
                out.push_str(" faultable");
            }
            out.push_str(&format!(" evalcost={}\n", c.eval_cost));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "edge {} {} weight={}",
                e.constraint, e.variable, e.weight
            ));
            if !e.solvable {
                out.push_str(" unsolvable");
            }
            if !e.role.is_none() {
                out.push_str(&format!(" role={}", e.role.as_str()));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            version: FORMAT_VERSION,
            variables: self.variables.clone(),
            constraints: self.constraints.clone(),
            edges: self.edges.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        if doc.version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(doc.version));
        }
        Self::new(doc.variables, doc.constraints, doc.edges)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    edges: Vec<Edge>,
}

/// Incremental construction, mostly for tests and generators.
#[derive(Debug, Default, Clone)]
pub struct ModelBuilder {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    edges: Vec<Edge>,
}

impl ModelBuilder {
    pub fn unknown(mut self, id: &str) -> Self {
        self.variables.push(Variable::unknown(id));
        self
    }

    pub fn known(mut self, id: &str) -> Self {
        self.variables.push(Variable::known(id));
        self
    }

    pub fn variable(mut self, v: Variable) -> Self {
        self.variables.push(v);
        self
    }

    pub fn constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn linear(self, id: &str) -> Self {
        self.constraint(Constraint::new(id, ConstraintKind::Linear))
    }

    pub fn edge(mut self, e: Edge) -> Self {
        self.edges.push(e);
        self
    }

    /// Solvable, role-free edge.
    pub fn link(self, constraint: &str, variable: &str, weight: Cost) -> Self {
        self.edge(Edge::new(constraint, variable, weight))
    }

    pub fn build(self) -> Result<StructuralModel, ModelError> {
        StructuralModel::new(self.variables, self.constraints, self.edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub cost_table: CostTable,
    /// Gain `k` of the noise surcharge `round(k * noise_variance)`.
    pub noise_gain: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            cost_table: CostTable::default(),
            noise_gain: 0.0,
        }
    }
}

pub fn parse_model(text: &str) -> Result<StructuralModel, ModelError> {
    parse_model_with(text, &ParseOptions::default())
}

pub fn parse_model_with(text: &str, options: &ParseOptions) -> Result<StructuralModel, ModelError> {
    let mut variables = Vec::new();
    let mut constraints = Vec::new();
    let mut edges = Vec::new();
    let mut lines = Lines::default();
    let mut seen_directive = false;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        let Some(&(col, keyword)) = tokens.first() else {
            continue;
        };
        let syntax = |column: usize, message: String| ModelError::Syntax {
            line: lineno,
            column,
            message,
        };
        match keyword {
            "version" => {
                if seen_directive {
                    return Err(syntax(col, "`version` must come first".into()));
                }
                let &(vcol, v) = tokens
                    .get(1)
                    .ok_or_else(|| syntax(col, "missing version number".into()))?;
                let v: u32 = v
                    .parse()
                    .map_err(|_| syntax(vcol, format!("invalid version `{v}`")))?;
                if v != FORMAT_VERSION {
                    return Err(ModelError::UnsupportedVersion(v));
                }
                if let Some(&(c, t)) = tokens.get(2) {
                    return Err(syntax(c, format!("unexpected `{t}`")));
                }
            }
            "variable" => {
                let &(_, id) = tokens
                    .get(1)
                    .ok_or_else(|| syntax(col, "missing variable id".into()))?;
                let mut v = Variable::unknown(id);
                for &(c, tok) in &tokens[2..] {
                    match split_attr(tok) {
                        ("known", None) => v.known = true,
                        ("noise", Some(val)) => {
                            v.noise_variance = Some(
                                val.parse()
                                    .map_err(|_| syntax(c, format!("invalid noise `{val}`")))?,
                            )
                        }
                        _ => return Err(syntax(c, format!("unexpected `{tok}`"))),
                    }
                }
                variables.push(v);
                lines.variables.push(Some(lineno));
            }
            "constraint" => {
                let &(_, id) = tokens
                    .get(1)
                    .ok_or_else(|| syntax(col, "missing constraint id".into()))?;
                let mut kind = None;
                let mut faultable = false;
                let mut eval_cost = None;
                for &(c, tok) in &tokens[2..] {
                    match split_attr(tok) {
                        ("kind", Some(k)) => kind = Some(k.parse().map_err(|e| syntax(c, e))?),
                        ("faultable", None) => faultable = true,
                        ("evalcost", Some(n)) if eval_cost.is_none() => {
                            eval_cost = Some(parse_cost(n, lineno, c)?)
                        }
                        ("ops", Some(ops)) if eval_cost.is_none() => {
                            let ops: OpCounts = ops.parse().map_err(|e| syntax(c, e))?;
                            eval_cost = Some(edge_weight_from_ops(&ops, &options.cost_table));
                        }
                        _ => return Err(syntax(c, format!("unexpected `{tok}`"))),
                    }
                }
                let kind = kind.ok_or_else(|| syntax(col, "missing kind=".into()))?;
                constraints.push(Constraint {
                    id: id.to_string(),
                    kind,
                    faultable,
                    eval_cost: eval_cost.unwrap_or(1),
                });
                lines.constraints.push(Some(lineno));
            }
            "edge" => {
                let (&(_, c_id), &(_, v_id)) = match (tokens.get(1), tokens.get(2)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(syntax(
                            col,
                            "expected `edge <constraint> <variable>`".into(),
                        ))
                    }
                };
                let mut edge = Edge::new(c_id, v_id, 1);
                let mut weighted = false;
                for &(c, tok) in &tokens[3..] {
                    match split_attr(tok) {
                        ("weight", Some(n)) if !weighted => {
                            edge.weight = parse_cost(n, lineno, c)?;
                            weighted = true;
                        }
                        ("ops", Some(ops)) if !weighted => {
                            let ops: OpCounts = ops.parse().map_err(|e| syntax(c, e))?;
                            edge.weight = edge_weight_from_ops(&ops, &options.cost_table);
                            weighted = true;
                        }
                        ("unsolvable", None) => edge.solvable = false,
                        ("role", Some("derivative")) => edge.role = DynamicRole::Derivative,
                        ("role", Some("integral")) => edge.role = DynamicRole::Integral,
                        ("role", Some("none")) => edge.role = DynamicRole::None,
                        _ => return Err(syntax(c, format!("unexpected `{tok}`"))),
                    }
                }
                edges.push(edge);
                lines.edges.push(Some(lineno));
            }
            other => return Err(syntax(col, format!("unknown directive `{other}`"))),
        }
        seen_directive = true;
    }

    let mut model = StructuralModel::validated(variables, constraints, edges, lines)?;
    model.apply_noise_gain(options.noise_gain);
    Ok(model)
}

fn parse_cost(s: &str, line: usize, column: usize) -> Result<Cost, ModelError> {
    match s.parse::<i64>() {
        Ok(n) if n < 0 => Err(ModelError::NegativeWeight { line: Some(line) }),
        Ok(n) => Ok(n as Cost),
        Err(_) => Err(ModelError::Syntax {
            line,
            column,
            message: format!("invalid integer `{s}`"),
        }),
    }
}

fn split_attr(tok: &str) -> (&str, Option<&str>) {
    match tok.split_once('=') {
        Some((k, v)) => (k, Some(v)),
        None => (tok, None),
    }
}

/// Whitespace-separated tokens with their 1-based column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

impl fmt::Display for StructuralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
