//! Index-based bipartite structure graph and the directed graphs derived
//! from matchings.
//!
//! Every [`BipartiteGraph`] produced from one model shares the same dense
//! index space: constraint `i` is the `i`-th constraint of the model,
//! variable `j` the `j`-th variable, edge `k` the `k`-th edge. Subgraphs are
//! views holding a subset of constraints and a (possibly extended) set of
//! known variables, so matchings can move between them without relabeling.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{ConstraintKind, Cost, DynamicRole, StructuralModel};

pub type ConstraintIdx = usize;
pub type VariableIdx = usize;
pub type EdgeIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintInfo {
    pub id: String,
    pub kind: ConstraintKind,
    pub faultable: bool,
    pub eval_cost: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableInfo {
    pub id: String,
    pub known: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeInfo {
    pub constraint: ConstraintIdx,
    pub variable: VariableIdx,
    pub weight: Cost,
    pub solvable: bool,
    pub role: DynamicRole,
}

#[derive(Debug)]
struct Structure {
    constraints: Vec<ConstraintInfo>,
    variables: Vec<VariableInfo>,
    edges: Vec<EdgeInfo>,
    constraint_edges: Vec<Vec<EdgeIdx>>,
    variable_edges: Vec<Vec<EdgeIdx>>,
    edge_lookup: HashMap<(ConstraintIdx, VariableIdx), EdgeIdx>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {0} is not part of the graph")]
    EdgeNotInGraph(EdgeIdx),
    #[error("edges {0} and {1} share a vertex")]
    SharedVertex(EdgeIdx, EdgeIdx),
    #[error("edge {0} is not solvable")]
    Unsolvable(EdgeIdx),
    #[error("edge {0} is matched to a known variable")]
    KnownVariable(EdgeIdx),
}

/// A view on the structure graph of a model.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    structure: Arc<Structure>,
    constraints: Vec<ConstraintIdx>,
    active: Vec<bool>,
    known: Vec<bool>,
}

impl BipartiteGraph {
    pub fn from_model(model: &StructuralModel) -> Self {
        let constraints: Vec<ConstraintInfo> = model
            .constraints()
            .iter()
            .map(|c| ConstraintInfo {
                id: c.id.clone(),
                kind: c.kind,
                faultable: c.faultable,
                eval_cost: c.eval_cost,
            })
            .collect();
        let variables: Vec<VariableInfo> = model
            .variables()
            .iter()
            .map(|v| VariableInfo {
                id: v.id.clone(),
                known: v.known,
            })
            .collect();
        let edges: Vec<EdgeInfo> = model
            .edges()
            .iter()
            .map(|e| EdgeInfo {
                constraint: model
                    .constraint_index(&e.constraint)
                    .expect("validated model"),
                variable: model.variable_index(&e.variable).expect("validated model"),
                weight: e.weight,
                solvable: e.solvable,
                role: e.role,
            })
            .collect();
        let mut constraint_edges = vec![Vec::new(); constraints.len()];
        let mut variable_edges = vec![Vec::new(); variables.len()];
        let mut edge_lookup = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            constraint_edges[e.constraint].push(k);
            variable_edges[e.variable].push(k);
            edge_lookup.insert((e.constraint, e.variable), k);
        }
        let known = variables.iter().map(|v| v.known).collect();
        let n = constraints.len();
        Self {
            structure: Arc::new(Structure {
                constraints,
                variables,
                edges,
                constraint_edges,
                variable_edges,
                edge_lookup,
            }),
            constraints: (0..n).collect(),
            active: vec![true; n],
            known,
        }
    }

    /// The view restricted to the given constraints (which must be active).
    pub fn restrict(&self, constraints: impl IntoIterator<Item = ConstraintIdx>) -> Self {
        let mut active = vec![false; self.active.len()];
        for c in constraints {
            debug_assert!(self.active[c], "constraint {c} is not part of the graph");
            active[c] = true;
        }
        let constraints = (0..active.len()).filter(|&c| active[c]).collect();
        Self {
            structure: Arc::clone(&self.structure),
            constraints,
            active,
            known: self.known.clone(),
        }
    }

    /// The same view with additional variables treated as known.
    pub fn with_known(&self, variables: impl IntoIterator<Item = VariableIdx>) -> Self {
        let mut known = self.known.clone();
        for v in variables {
            known[v] = true;
        }
        Self {
            known,
            ..self.clone()
        }
    }

    /// Active constraints, ascending.
    pub fn constraints(&self) -> &[ConstraintIdx] {
        &self.constraints
    }

    pub fn has_constraint(&self, c: ConstraintIdx) -> bool {
        self.active.get(c).copied().unwrap_or(false)
    }

    pub fn constraint(&self, c: ConstraintIdx) -> &ConstraintInfo {
        &self.structure.constraints[c]
    }

    pub fn variable(&self, v: VariableIdx) -> &VariableInfo {
        &self.structure.variables[v]
    }

    pub fn edge(&self, e: EdgeIdx) -> &EdgeInfo {
        &self.structure.edges[e]
    }

    pub fn total_constraints(&self) -> usize {
        self.structure.constraints.len()
    }

    pub fn total_variables(&self) -> usize {
        self.structure.variables.len()
    }

    pub fn is_known(&self, v: VariableIdx) -> bool {
        self.known[v]
    }

    pub fn constraint_index(&self, id: &str) -> Option<ConstraintIdx> {
        self.structure.constraints.iter().position(|c| c.id == id)
    }

    pub fn variable_index(&self, id: &str) -> Option<VariableIdx> {
        self.structure.variables.iter().position(|v| v.id == id)
    }

    pub fn find_edge(&self, c: ConstraintIdx, v: VariableIdx) -> Option<EdgeIdx> {
        self.structure
            .edge_lookup
            .get(&(c, v))
            .copied()
            .filter(|_| self.has_constraint(c))
    }

    pub fn contains_edge(&self, e: EdgeIdx) -> bool {
        e < self.structure.edges.len() && self.has_constraint(self.structure.edges[e].constraint)
    }

    /// Edges of a constraint, ascending by variable.
    pub fn constraint_edges(&self, c: ConstraintIdx) -> &[EdgeIdx] {
        &self.structure.constraint_edges[c]
    }

    /// Edges of a variable towards active constraints.
    pub fn variable_edges(&self, v: VariableIdx) -> impl Iterator<Item = EdgeIdx> + '_ {
        self.structure.variable_edges[v]
            .iter()
            .copied()
            .filter(move |&e| self.active[self.structure.edges[e].constraint])
    }

    /// Edges of a constraint towards variables that are unknown in this view.
    pub fn unknown_edges(&self, c: ConstraintIdx) -> impl Iterator<Item = EdgeIdx> + '_ {
        self.constraint_edges(c)
            .iter()
            .copied()
            .filter(move |&e| !self.known[self.edge(e).variable])
    }

    /// All edges of active constraints, ascending.
    pub fn edges(&self) -> Vec<EdgeIdx> {
        self.constraints
            .iter()
            .flat_map(|&c| self.constraint_edges(c).iter().copied())
            .collect()
    }

    /// `var(C)`, ascending.
    pub fn variables(&self) -> Vec<VariableIdx> {
        let mut mark = vec![false; self.known.len()];
        for &c in &self.constraints {
            for &e in self.constraint_edges(c) {
                mark[self.edge(e).variable] = true;
            }
        }
        (0..mark.len()).filter(|&v| mark[v]).collect()
    }

    /// `var_U(C)`, ascending.
    pub fn unknowns(&self) -> Vec<VariableIdx> {
        self.variables()
            .into_iter()
            .filter(|&v| !self.known[v])
            .collect()
    }

    pub fn constraint_ids(&self, cs: &[ConstraintIdx]) -> Vec<String> {
        cs.iter().map(|&c| self.constraint(c).id.clone()).collect()
    }

    pub fn variable_ids(&self, vs: &[VariableIdx]) -> Vec<String> {
        vs.iter().map(|&v| self.variable(v).id.clone()).collect()
    }

    pub fn biadjacency(&self, columns: Columns) -> Biadjacency {
        let cols = match columns {
            Columns::All => self.variables(),
            Columns::UnknownOnly => self.unknowns(),
        };
        let col_pos: HashMap<VariableIdx, usize> =
            cols.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let data = self
            .constraints
            .iter()
            .map(|&c| {
                let mut row = vec![0u8; cols.len()];
                for &e in self.constraint_edges(c) {
                    if let Some(&j) = col_pos.get(&self.edge(e).variable) {
                        row[j] = 1;
                    }
                }
                row
            })
            .collect();
        Biadjacency {
            rows: self.constraints.clone(),
            columns: cols,
            data,
        }
    }

    /// Graphviz rendering. With a matching the graph is oriented and
    /// matched edges are drawn bold.
    pub fn to_dot(&self, matching: Option<&Matching>) -> String {
        let mut out = String::new();
        let directed = matching.is_some();
        let _ = writeln!(
            out,
            "{} structure {{",
            if directed { "digraph" } else { "graph" }
        );
        let _ = writeln!(out, "  rankdir=LR;");
        for &c in &self.constraints {
            let _ = writeln!(out, "  \"{}\" [shape=box];", self.constraint(c).id);
        }
        for v in self.variables() {
            let style = if self.known[v] {
                ", style=filled, fillcolor=lightgray"
            } else {
                ""
            };
            let _ = writeln!(out, "  \"{}\" [shape=circle{style}];", self.variable(v).id);
        }
        for e in self.edges() {
            let info = self.edge(e);
            let (c, v) = (
                &self.constraint(info.constraint).id,
                &self.variable(info.variable).id,
            );
            let mut attrs = Vec::new();
            if !info.solvable {
                attrs.push("style=dashed".to_string());
            }
            let line = match matching {
                None => format!("\"{c}\" -- \"{v}\""),
                Some(m) if m.contains(e) => {
                    attrs.push("penwidth=3".to_string());
                    format!("\"{c}\" -> \"{v}\"")
                }
                Some(_) => format!("\"{v}\" -> \"{c}\""),
            };
            if attrs.is_empty() {
                let _ = writeln!(out, "  {line};");
            } else {
                let _ = writeln!(out, "  {line} [{}];", attrs.join(", "));
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    All,
    UnknownOnly,
}

/// 0/1 constraint-by-variable incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Biadjacency {
    pub rows: Vec<ConstraintIdx>,
    pub columns: Vec<VariableIdx>,
    pub data: Vec<Vec<u8>>,
}

/// A set of edges without shared endpoints, each solvable and towards an
/// unknown variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Matching {
    edges: Vec<EdgeIdx>,
    total_weight: Cost,
}

impl Matching {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(
        g: &BipartiteGraph,
        edges: impl IntoIterator<Item = EdgeIdx>,
    ) -> Result<Self, GraphError> {
        let mut edges: Vec<EdgeIdx> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        let mut by_constraint = HashMap::new();
        let mut by_variable = HashMap::new();
        let mut total_weight = 0;
        for &e in &edges {
            if !g.contains_edge(e) {
                return Err(GraphError::EdgeNotInGraph(e));
            }
            let info = g.edge(e);
            if !info.solvable {
                return Err(GraphError::Unsolvable(e));
            }
            if g.is_known(info.variable) {
                return Err(GraphError::KnownVariable(e));
            }
            if let Some(&other) = by_constraint.get(&info.constraint) {
                return Err(GraphError::SharedVertex(other, e));
            }
            if let Some(&other) = by_variable.get(&info.variable) {
                return Err(GraphError::SharedVertex(other, e));
            }
            by_constraint.insert(info.constraint, e);
            by_variable.insert(info.variable, e);
            total_weight += info.weight;
        }
        Ok(Self {
            edges,
            total_weight,
        })
    }

    /// Wraps edges without validation; the weight is left at zero.
    pub(crate) fn from_edges_unchecked(mut edges: Vec<EdgeIdx>) -> Self {
        edges.sort_unstable();
        Self {
            edges,
            total_weight: 0,
        }
    }

    /// Member edges, ascending.
    pub fn edges(&self) -> &[EdgeIdx] {
        &self.edges
    }

    pub fn total_weight(&self) -> Cost {
        self.total_weight
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeIdx) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    pub fn constraints(&self, g: &BipartiteGraph) -> Vec<ConstraintIdx> {
        let mut cs: Vec<_> = self.edges.iter().map(|&e| g.edge(e).constraint).collect();
        cs.sort_unstable();
        cs
    }

    pub fn variables(&self, g: &BipartiteGraph) -> Vec<VariableIdx> {
        let mut vs: Vec<_> = self.edges.iter().map(|&e| g.edge(e).variable).collect();
        vs.sort_unstable();
        vs
    }

    /// `(constraint id, variable id)` pairs in edge order.
    pub fn pairs(&self, g: &BipartiteGraph) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&e| {
                let info = g.edge(e);
                (
                    g.constraint(info.constraint).id.clone(),
                    g.variable(info.variable).id.clone(),
                )
            })
            .collect()
    }

    /// True when every unknown variable of `g` is matched.
    pub fn is_complete_on_unknowns(&self, g: &BipartiteGraph) -> bool {
        self.variables(g) == g.unknowns()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Constraint(ConstraintIdx),
    Variable(VariableIdx),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiArc {
    pub from: usize,
    pub to: usize,
    pub edge: EdgeIdx,
    pub matched: bool,
}

/// A directed graph over a subset of vertices, with dense local node ids.
#[derive(Debug, Clone)]
pub struct Digraph {
    nodes: Vec<Vertex>,
    lookup: HashMap<Vertex, usize>,
    arcs: Vec<DiArc>,
    out: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(nodes: Vec<Vertex>) -> Self {
        let lookup = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let out = vec![Vec::new(); nodes.len()];
        Self {
            nodes,
            lookup,
            arcs: Vec::new(),
            out,
        }
    }

    pub fn add_arc(&mut self, from: Vertex, to: Vertex, edge: EdgeIdx, matched: bool) {
        let (from, to) = (self.lookup[&from], self.lookup[&to]);
        self.out[from].push(self.arcs.len());
        self.arcs.push(DiArc {
            from,
            to,
            edge,
            matched,
        });
    }

    pub fn nodes(&self) -> &[Vertex] {
        &self.nodes
    }

    pub fn node(&self, vertex: Vertex) -> Option<usize> {
        self.lookup.get(&vertex).copied()
    }

    pub fn arcs(&self) -> &[DiArc] {
        &self.arcs
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.out[node].iter().map(move |&a| self.arcs[a].to)
    }

    pub fn reversed(&self) -> Digraph {
        let mut rev = Digraph::new(self.nodes.clone());
        for a in &self.arcs {
            rev.out[a.to].push(rev.arcs.len());
            rev.arcs.push(DiArc {
                from: a.to,
                to: a.from,
                ..*a
            });
        }
        rev
    }
}

/// Orients `g` along `m`: matched edges run constraint to variable, all
/// other edges variable to constraint.
pub fn orient(g: &BipartiteGraph, m: &Matching) -> Result<Digraph, GraphError> {
    if let Some(&e) = m.edges().iter().find(|&&e| !g.contains_edge(e)) {
        return Err(GraphError::EdgeNotInGraph(e));
    }
    let nodes = g
        .constraints()
        .iter()
        .map(|&c| Vertex::Constraint(c))
        .chain(g.variables().into_iter().map(Vertex::Variable))
        .collect();
    let mut d = Digraph::new(nodes);
    for e in g.edges() {
        let info = g.edge(e);
        let (c, v) = (
            Vertex::Constraint(info.constraint),
            Vertex::Variable(info.variable),
        );
        if m.contains(e) {
            d.add_arc(c, v, e, true);
        } else {
            d.add_arc(v, c, e, false);
        }
    }
    Ok(d)
}

/// Vertices reachable from `sources` by directed paths, sources included.
pub fn reachable_from(g: &Digraph, sources: &[Vertex]) -> BTreeSet<Vertex> {
    let mut seen = vec![false; g.nodes().len()];
    let mut stack: Vec<usize> = sources.iter().filter_map(|&s| g.node(s)).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(n) = stack.pop() {
        for next in g.successors(n) {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    (0..seen.len())
        .filter(|&i| seen[i])
        .map(|i| g.nodes()[i])
        .collect()
}

/// Tarjan's algorithm. Components come out in reverse topological order of
/// the condensation (sinks first); each component is sorted.
pub fn strongly_connected_components(g: &Digraph) -> Vec<Vec<Vertex>> {
    component_ids(g)
        .1
        .into_iter()
        .map(|comp| sorted_vertices(g, comp))
        .collect()
}

/// Components in topological order of the condensation (sources first).
/// Among components that are ready at the same time, the one holding the
/// smallest vertex goes first, which makes the order canonical.
pub fn components_in_topological_order(g: &Digraph) -> Vec<Vec<Vertex>> {
    let (comp_of, comps) = component_ids(g);
    let n = comps.len();
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for a in g.arcs() {
        let (x, y) = (comp_of[a.from], comp_of[a.to]);
        if x != y {
            succ[x].push(y);
            indeg[y] += 1;
        }
    }
    let key = |c: usize| {
        comps[c]
            .iter()
            .map(|&i| g.nodes()[i])
            .min()
            .expect("nonempty component")
    };
    let mut ready: BinaryHeap<Reverse<(Vertex, usize)>> = (0..n)
        .filter(|&c| indeg[c] == 0)
        .map(|c| Reverse((key(c), c)))
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((_, c))) = ready.pop() {
        order.push(sorted_vertices(g, comps[c].clone()));
        for &d in &succ[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(Reverse((key(d), d)));
            }
        }
    }
    order
}

fn sorted_vertices(g: &Digraph, comp: Vec<usize>) -> Vec<Vertex> {
    let mut vs: Vec<Vertex> = comp.into_iter().map(|i| g.nodes()[i]).collect();
    vs.sort_unstable();
    vs
}

/// Iterative Tarjan; returns the component of each node and the components
/// in discovery-completion order.
fn component_ids(g: &Digraph) -> (Vec<usize>, Vec<Vec<usize>>) {
    const UNVISITED: usize = usize::MAX;
    let n = g.nodes().len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp_of = vec![UNVISITED; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0;
    let succ: Vec<Vec<usize>> = (0..n).map(|v| g.successors(v).collect()).collect();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = succ[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp_of[w] = comps.len();
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    (comp_of, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn edge(g: &BipartiteGraph, c: &str, v: &str) -> EdgeIdx {
        g.find_edge(g.constraint_index(c).unwrap(), g.variable_index(v).unwrap())
            .unwrap()
    }

    fn vc(g: &BipartiteGraph, id: &str) -> Vertex {
        g.constraint_index(id)
            .map(Vertex::Constraint)
            .or_else(|| g.variable_index(id).map(Vertex::Variable))
            .unwrap()
    }

    #[test]
    fn biadjacency_of_cyclic_ranking_graph() {
        let g = BipartiteGraph::from_model(&fixtures::cyclic_ranking());
        let a = g.biadjacency(Columns::UnknownOnly);
        assert_eq!(
            a.data,
            vec![vec![1, 0, 0], vec![1, 1, 1], vec![0, 0, 1], vec![0, 1, 1]]
        );
        let single = StructuralModel::builder()
            .unknown("x")
            .linear("c")
            .link("c", "x", 1)
            .build()
            .unwrap();
        assert_eq!(
            BipartiteGraph::from_model(&single)
                .biadjacency(Columns::All)
                .data,
            vec![vec![1]]
        );
    }

    #[test]
    fn orientation_follows_matching() {
        let g = BipartiteGraph::from_model(&fixtures::cyclic_ranking());
        let empty = orient(&g, &Matching::empty()).unwrap();
        assert!(empty
            .arcs()
            .iter()
            .all(|a| matches!(empty.nodes()[a.from], Vertex::Variable(_))));

        let m = Matching::new(
            &g,
            [
                edge(&g, "c1", "x1"),
                edge(&g, "c2", "x2"),
                edge(&g, "c3", "x3"),
            ],
        )
        .unwrap();
        let d = orient(&g, &m).unwrap();
        assert_eq!(d.arcs().len(), g.edges().len());
        let c4 = d.node(vc(&g, "c4")).unwrap();
        let incoming = d.arcs().iter().filter(|a| a.to == c4).count();
        assert_eq!((incoming, d.successors(c4).count()), (2, 0));

        let reach = reachable_from(&d, &[vc(&g, "c1")]);
        let ids: Vec<_> = ["c1", "x1", "c2", "x2", "c4"]
            .iter()
            .map(|id| vc(&g, id))
            .collect();
        assert_eq!(reach, ids.into_iter().collect());
        assert!(reachable_from(&d, &[]).is_empty());
    }

    #[test]
    fn orient_rejects_foreign_edges() {
        let g = BipartiteGraph::from_model(&fixtures::cyclic_ranking());
        let m = Matching::new(&g, [edge(&g, "c4", "x2")]).unwrap();
        let sub = g.restrict([0, 1]);
        assert!(matches!(
            orient(&sub, &m),
            Err(GraphError::EdgeNotInGraph(_))
        ));
    }

    #[test]
    fn matching_validation() {
        let g = BipartiteGraph::from_model(&fixtures::cyclic_ranking());
        let shared = Matching::new(&g, [edge(&g, "c1", "x1"), edge(&g, "c2", "x1")]);
        assert!(matches!(shared, Err(GraphError::SharedVertex(_, _))));
    }

    #[test]
    fn complete_bipartite_perfect_matchings() {
        let m = StructuralModel::builder()
            .unknown("x1")
            .unknown("x2")
            .linear("c1")
            .linear("c2")
            .link("c1", "x1", 1)
            .link("c1", "x2", 1)
            .link("c2", "x1", 1)
            .link("c2", "x2", 1)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        for pm in [
            [edge(&g, "c1", "x1"), edge(&g, "c2", "x2")],
            [edge(&g, "c1", "x2"), edge(&g, "c2", "x1")],
        ] {
            let d = orient(&g, &Matching::new(&g, pm).unwrap()).unwrap();
            for c in ["c1", "c2"] {
                assert_eq!(d.successors(d.node(vc(&g, c)).unwrap()).count(), 1);
            }
        }
    }

    #[test]
    fn scc_basics() {
        let mut chain = Digraph::new(vec![
            Vertex::Constraint(0),
            Vertex::Variable(0),
            Vertex::Constraint(1),
        ]);
        chain.add_arc(Vertex::Constraint(0), Vertex::Variable(0), 0, true);
        chain.add_arc(Vertex::Variable(0), Vertex::Constraint(1), 1, false);
        let sccs = strongly_connected_components(&chain);
        assert_eq!(
            sccs,
            vec![
                vec![Vertex::Constraint(1)],
                vec![Vertex::Variable(0)],
                vec![Vertex::Constraint(0)]
            ]
        );
        assert_eq!(reachable_from(&chain, &[Vertex::Constraint(0)]).len(), 3);
        let topo = components_in_topological_order(&chain);
        assert_eq!(topo[0], vec![Vertex::Constraint(0)]);

        let mut cycle = Digraph::new(vec![Vertex::Constraint(0), Vertex::Variable(0)]);
        cycle.add_arc(Vertex::Constraint(0), Vertex::Variable(0), 0, true);
        cycle.add_arc(Vertex::Variable(0), Vertex::Constraint(0), 1, false);
        assert_eq!(strongly_connected_components(&cycle).len(), 1);
    }

    fn arb_digraph() -> impl Strategy<Value = Digraph> {
        (1usize..9).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..(n * 3)).prop_map(move |arcs| {
                let mut d = Digraph::new((0..n).map(Vertex::Constraint).collect());
                for (k, (a, b)) in arcs.into_iter().enumerate() {
                    d.add_arc(Vertex::Constraint(a), Vertex::Constraint(b), k, false);
                }
                d
            })
        })
    }

    proptest! {
        #[test]
        fn scc_matches_mutual_reachability(d in arb_digraph()) {
            let n = d.nodes().len();
            let reach: Vec<BTreeSet<Vertex>> = d.nodes().iter().map(|&v| reachable_from(&d, &[v])).collect();
            let sccs = strongly_connected_components(&d);
            prop_assert_eq!(sccs.iter().map(Vec::len).sum::<usize>(), n);
            for comp in &sccs {
                for i in 0..n {
                    let vi = d.nodes()[i];
                    let mutual = comp.iter().all(|&w| {
                        let j = d.node(w).unwrap();
                        reach[i].contains(&w) && reach[j].contains(&vi)
                    });
                    prop_assert_eq!(mutual, comp.contains(&vi));
                }
            }
            // sinks first: every arc points to a component emitted no later than its source
            let pos: HashMap<Vertex, usize> = sccs.iter().enumerate()
                .flat_map(|(k, c)| c.iter().map(move |&v| (v, k))).collect();
            for a in d.arcs() {
                prop_assert!(pos[&d.nodes()[a.to]] <= pos[&d.nodes()[a.from]]);
            }
            let topo = components_in_topological_order(&d);
            let tpos: HashMap<Vertex, usize> = topo.iter().enumerate()
                .flat_map(|(k, c)| c.iter().map(move |&v| (v, k))).collect();
            for a in d.arcs() {
                prop_assert!(tpos[&d.nodes()[a.from]] <= tpos[&d.nodes()[a.to]]);
            }
        }

        #[test]
        fn double_reversal_is_identity(d in arb_digraph()) {
            let back = d.reversed().reversed();
            prop_assert_eq!(back.arcs(), d.arcs());
        }

        #[test]
        fn row_sums_are_degrees(seed in any::<u64>()) {
            let m = crate::random::random_model(seed, &Default::default());
            let g = BipartiteGraph::from_model(&m);
            let a = g.biadjacency(Columns::All);
            for (row, &c) in a.data.iter().zip(&a.rows) {
                prop_assert_eq!(row.iter().map(|&x| x as usize).sum::<usize>(), g.constraint_edges(c).len());
            }
        }

        #[test]
        fn completeness_means_one_matched_arc_per_unknown(seed in any::<u64>()) {
            let m = crate::random::random_model(seed, &Default::default());
            let g = BipartiteGraph::from_model(&m);
            let matching = crate::matching::ranking_match(&crate::matching::MatchingProblem::new(g.clone(), crate::matching::Causality::Mixed)).matching;
            let d = orient(&g, &matching).unwrap();
            let every_unknown_once = g.unknowns().iter().all(|&v| {
                let node = d.node(Vertex::Variable(v)).unwrap();
                d.arcs().iter().filter(|a| a.to == node && a.matched).count() == 1
            });
            prop_assert_eq!(every_unknown_once, matching.is_complete_on_unknowns(&g));
        }
    }
}
