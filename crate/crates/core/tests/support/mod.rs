//! Brute-force reference implementations. They only read graph data
//! through the public accessors and share no algorithm with the crate.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use structdiag::graph::BipartiteGraph;
use structdiag::model::{
    Constraint, ConstraintKind, DynamicRole, Edge, ModelBuilder, StructuralModel, ToolSet,
};

pub type Cost = u64;

/// Random model with `nc` constraints over `nu` unknowns and `nk` knowns;
/// every vertex gets at least one edge.
pub fn random_bipartite(
    rng: &mut ChaCha8Rng,
    nc: usize,
    nu: usize,
    nk: usize,
    p: f64,
) -> StructuralModel {
    let mut b = ModelBuilder::default();
    for j in 0..nu {
        b = b.unknown(&format!("x{j}"));
    }
    for j in 0..nk {
        b = b.known(&format!("y{j}"));
    }
    let vars: Vec<String> = (0..nu)
        .map(|j| format!("x{j}"))
        .chain((0..nk).map(|j| format!("y{j}")))
        .collect();
    let mut adj = vec![vec![false; vars.len()]; nc];
    for row in adj.iter_mut() {
        for cell in row.iter_mut() {
            *cell = rng.gen_bool(p);
        }
    }
    for row in adj.iter_mut() {
        if !row.iter().any(|&x| x) {
            row[rng.gen_range(0..vars.len())] = true;
        }
    }
    #[allow(clippy::needless_range_loop)]
    for j in 0..vars.len() {
        if !(0..nc).any(|i| adj[i][j]) {
            adj[rng.gen_range(0..nc)][j] = true;
        }
    }
    for (i, row) in adj.iter().enumerate() {
        let id = format!("c{i}");
        b = b.constraint(Constraint::new(&id, ConstraintKind::Linear).faultable(rng.gen_bool(0.6)));
        for (j, &on) in row.iter().enumerate() {
            if on {
                let mut e = Edge::new(&id, &vars[j], rng.gen_range(0..=20));
                if rng.gen_bool(0.1) {
                    e = e.unsolvable();
                }
                b = b.edge(e);
            }
        }
    }
    b.build().expect("valid random model")
}

pub fn random_tools(rng: &mut ChaCha8Rng) -> ToolSet {
    ToolSet {
        differentiator: rng.gen_bool(0.5),
        integrator: rng.gen_bool(0.5),
        linear_solver: rng.gen_bool(0.5),
        nonlinear_solver: rng.gen_bool(0.5),
        de_solver: rng.gen_bool(0.5),
    }
}

/// Unknown-variable adjacency of the given constraints, over all edges.
fn unknown_adjacency(g: &BipartiteGraph, cs: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut vars = BTreeSet::new();
    for &c in cs {
        for &e in g.constraint_edges(c) {
            let v = g.edge(e).variable;
            if !g.is_known(v) {
                vars.insert(v);
            }
        }
    }
    let vars: Vec<usize> = vars.into_iter().collect();
    let adj = cs
        .iter()
        .map(|&c| {
            g.constraint_edges(c)
                .iter()
                .map(|&e| g.edge(e).variable)
                .filter_map(|v| vars.iter().position(|&x| x == v))
                .collect()
        })
        .collect();
    (vars, adj)
}

/// Maximum matching size by dynamic programming over variable subsets.
/// `skip_row` / `skip_col` remove one vertex.
fn max_matching_dp(
    adj: &[Vec<usize>],
    ncols: usize,
    skip_row: Option<usize>,
    skip_col: Option<usize>,
) -> usize {
    assert!(ncols <= 16);
    let mut best = vec![None::<usize>; 1 << ncols];
    best[0] = Some(0);
    let full = 1usize << ncols;
    // frontier of reachable masks after processing each row
    let mut reach = vec![false; full];
    reach[0] = true;
    for (i, row) in adj.iter().enumerate() {
        if Some(i) == skip_row {
            continue;
        }
        let mut next = reach.clone();
        for mask in 0..full {
            if !reach[mask] {
                continue;
            }
            for &j in row {
                if Some(j) == skip_col || mask & (1 << j) != 0 {
                    continue;
                }
                next[mask | (1 << j)] = true;
            }
        }
        reach = next;
    }
    (0..full)
        .filter(|&m| reach[m])
        .map(|m: usize| m.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

pub struct DmOracle {
    pub under_c: Vec<usize>,
    pub under_v: Vec<usize>,
    pub just_c: Vec<usize>,
    pub just_v: Vec<usize>,
    pub over_c: Vec<usize>,
    pub over_v: Vec<usize>,
    pub max_matching: usize,
}

/// A variable lies in the under part iff some maximum matching leaves it
/// exposed (plus the constraints adjacent to such variables); symmetric for
/// the over part.
pub fn dm_oracle(g: &BipartiteGraph) -> DmOracle {
    let cs: Vec<usize> = g.constraints().to_vec();
    let (vars, adj) = unknown_adjacency(g, &cs);
    let nu = max_matching_dp(&adj, vars.len(), None, None);
    let exposed_v: Vec<usize> = (0..vars.len())
        .filter(|&j| max_matching_dp(&adj, vars.len(), None, Some(j)) == nu)
        .collect();
    let exposed_c: Vec<usize> = (0..cs.len())
        .filter(|&i| max_matching_dp(&adj, vars.len(), Some(i), None) == nu)
        .collect();
    let under_c: Vec<usize> = (0..cs.len())
        .filter(|&i| adj[i].iter().any(|j| exposed_v.contains(j)))
        .collect();
    let over_v: Vec<usize> = (0..vars.len())
        .filter(|&j| exposed_c.iter().any(|&i| adj[i].contains(&j)))
        .collect();
    let under_v = exposed_v;
    let over_c = exposed_c;
    let just_c: Vec<usize> = (0..cs.len())
        .filter(|i| !under_c.contains(i) && !over_c.contains(i))
        .collect();
    let just_v: Vec<usize> = (0..vars.len())
        .filter(|j| !under_v.contains(j) && !over_v.contains(j))
        .collect();
    let map_c = |v: Vec<usize>| v.into_iter().map(|i| cs[i]).collect();
    let map_v = |v: Vec<usize>| v.into_iter().map(|j| vars[j]).collect();
    DmOracle {
        under_c: map_c(under_c),
        under_v: map_v(under_v),
        just_c: map_c(just_c),
        just_v: map_v(just_v),
        over_c: map_c(over_c),
        over_v: map_v(over_v),
        max_matching: nu,
    }
}

/// Structural redundancy `|S| - maximum matching` of a constraint set.
pub fn redundancy(g: &BipartiteGraph, s: &[usize]) -> usize {
    let (vars, adj) = unknown_adjacency(g, s);
    s.len() - max_matching_dp(&adj, vars.len(), None, None)
}

pub fn unknowns_of(g: &BipartiteGraph, s: &[usize]) -> Vec<usize> {
    unknown_adjacency(g, s).0
}

/// Every MSO by subset enumeration: redundancy one, each single removal
/// drops it to zero, and `|S| = |var_U(S)| + 1`.
pub fn mso_oracle(g: &BipartiteGraph) -> Vec<Vec<usize>> {
    let cs = g.constraints().to_vec();
    let mut out = Vec::new();
    for mask in 1u32..(1 << cs.len()) {
        let s: Vec<usize> = (0..cs.len())
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| cs[i])
            .collect();
        if is_mso(g, &s) {
            out.push(s);
        }
    }
    out.sort();
    out
}

pub fn is_mso(g: &BipartiteGraph, s: &[usize]) -> bool {
    if redundancy(g, s) != 1 || s.len() != unknowns_of(g, s).len() + 1 {
        return false;
    }
    s.iter().all(|&c| {
        let rest: Vec<usize> = s.iter().copied().filter(|&x| x != c).collect();
        redundancy(g, &rest) == 0
    })
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(n, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// All perfect matchings between `rows` and `cols` using solvable edges,
/// as edge lists in row order.
pub fn perfect_matchings(g: &BipartiteGraph, rows: &[usize], cols: &[usize]) -> Vec<Vec<usize>> {
    if rows.len() != cols.len() {
        return Vec::new();
    }
    permutations(rows.len())
        .into_iter()
        .filter_map(|p| {
            rows.iter()
                .zip(&p)
                .map(|(&c, &j)| g.find_edge(c, cols[j]).filter(|&e| g.edge(e).solvable))
                .collect::<Option<Vec<usize>>>()
        })
        .collect()
}

/// Vertices are constraints `c` and variables `nc + v`.
struct Oriented {
    nc: usize,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
}

fn oriented(g: &BipartiteGraph, cs: &[usize], matched: &[usize]) -> Oriented {
    let nc = g.total_constraints();
    let n = nc + g.total_variables();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for &c in cs {
        for &e in g.constraint_edges(c) {
            let v = nc + g.edge(e).variable;
            let (a, b) = if matched.contains(&e) { (c, v) } else { (v, c) };
            out[a].push(b);
            inc[b].push(a);
        }
    }
    Oriented { nc, out, inc }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut q = VecDeque::from([start]);
    while let Some(x) = q.pop_front() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                q.push_back(y);
            }
        }
    }
    seen
}

/// Constraints from which `target` can be reached in the orientation of
/// `cs` under `matched`, `target` included.
pub fn ancestors(g: &BipartiteGraph, cs: &[usize], matched: &[usize], target: usize) -> Vec<usize> {
    let o = oriented(g, cs, matched);
    let seen = bfs(&o.inc, target);
    (0..o.nc).filter(|&c| seen[c]).collect()
}

/// The calculability rules re-derived from mutual reachability.
/// Returns the letters of every violated rule.
pub fn calculability_violations(
    g: &BipartiteGraph,
    cs: &[usize],
    matched: &[usize],
    tools: &ToolSet,
) -> Vec<char> {
    let o = oriented(g, cs, matched);
    let reach: Vec<Vec<bool>> = (0..o.out.len()).map(|x| bfs(&o.out, x)).collect();
    let block_of = |c: usize| -> Vec<usize> {
        matched
            .iter()
            .map(|&e| g.edge(e).constraint)
            .filter(|&d| reach[c][d] && reach[d][c])
            .collect()
    };
    let mut out = Vec::new();
    for &e in matched {
        let c = g.edge(e).constraint;
        let block = block_of(c);
        if block.len() > 1 {
            let kinds: Vec<ConstraintKind> = block.iter().map(|&d| g.constraint(d).kind).collect();
            let ok = if kinds.contains(&ConstraintKind::Differential) {
                tools.de_solver
            } else if kinds.contains(&ConstraintKind::Nonlinear) {
                tools.nonlinear_solver
            } else {
                tools.linear_solver
            };
            if !ok {
                out.push('a');
            }
        }
        match g.edge(e).role {
            DynamicRole::Derivative if block.len() > 1 => out.push('b'),
            DynamicRole::Integral if block.len() == 1 => out.push('c'),
            DynamicRole::Derivative if !tools.differentiator => out.push('d'),
            _ => {}
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub struct ResidualOracle {
    pub cost: Cost,
    pub residual: usize,
}

/// Minimum cost over every (residual, perfect matching of the rest) pair
/// that passes the calculability rules. No base matching.
pub fn optimal_residual_oracle(
    g: &BipartiteGraph,
    mso: &[usize],
    tools: &ToolSet,
) -> Option<ResidualOracle> {
    let cols = unknowns_of(g, mso);
    let mut best: Option<ResidualOracle> = None;
    for &cj in mso {
        let rows: Vec<usize> = mso.iter().copied().filter(|&c| c != cj).collect();
        for m in perfect_matchings(g, &rows, &cols) {
            let anc = ancestors(g, mso, &m, cj);
            let used: Vec<usize> = m
                .iter()
                .copied()
                .filter(|&e| anc.contains(&g.edge(e).constraint))
                .collect();
            if !calculability_violations(g, &anc, &used, tools).is_empty() {
                continue;
            }
            let cost =
                used.iter().map(|&e| g.edge(e).weight).sum::<Cost>() + g.constraint(cj).eval_cost;
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(ResidualOracle { cost, residual: cj });
            }
        }
    }
    best
}
