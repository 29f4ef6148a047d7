//! Dulmage-Mendelsohn decomposition.
//!
//! The decomposition is structural: every edge towards an unknown variable
//! counts, whether or not the constraint can actually be solved for it.
//! Solvability only restricts the matchings used to compute residuals.

use std::collections::VecDeque;

use crate::graph::{
    components_in_topological_order, orient, BipartiteGraph, ConstraintIdx, EdgeIdx, Matching,
    VariableIdx, Vertex,
};

/// One of the three parts, with a witness matching (edge ids).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DmPart {
    pub constraints: Vec<ConstraintIdx>,
    pub variables: Vec<VariableIdx>,
    pub matching: Vec<EdgeIdx>,
}

impl DmPart {
    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty() && self.variables.is_empty()
    }
}

/// A diagonal block of the just-constrained part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HallBlock {
    pub constraints: Vec<ConstraintIdx>,
    pub variables: Vec<VariableIdx>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmDecomposition {
    pub under: DmPart,
    pub just: DmPart,
    pub over: DmPart,
    /// Blocks of the just-constrained part in lower block-triangular
    /// (forward evaluation) order.
    pub hall_blocks: Vec<HallBlock>,
}

impl DmDecomposition {
    /// `|C+| - |X+|`.
    pub fn redundancy(&self) -> usize {
        self.over.constraints.len() - self.over.variables.len()
    }
}

/// Maximum matching between the constraints and the unknown variables of
/// `g` over all edges, by Hopcroft-Karp. Returns one edge per matched
/// constraint, ascending by constraint.
pub fn structural_matching(g: &BipartiteGraph) -> Vec<EdgeIdx> {
    let rows = g.constraints();
    let cols = g.unknowns();
    let mut col_pos = vec![usize::MAX; g.total_variables()];
    for (j, &v) in cols.iter().enumerate() {
        col_pos[v] = j;
    }
    let adj: Vec<Vec<(usize, EdgeIdx)>> = rows
        .iter()
        .map(|&c| {
            g.unknown_edges(c)
                .map(|e| (col_pos[g.edge(e).variable], e))
                .collect()
        })
        .collect();
    let (row_match, _) = hopcroft_karp(&adj, cols.len());
    row_match.into_iter().flatten().map(|(_, e)| e).collect()
}

type Slot = Option<(usize, EdgeIdx)>;

fn hopcroft_karp(adj: &[Vec<(usize, EdgeIdx)>], n_cols: usize) -> (Vec<Slot>, Vec<Option<usize>>) {
    const INF: usize = usize::MAX;
    let n = adj.len();
    let mut row_match: Vec<Slot> = vec![None; n];
    let mut col_match: Vec<Option<usize>> = vec![None; n_cols];
    let mut dist = vec![INF; n];

    loop {
        let mut queue = VecDeque::new();
        for r in 0..n {
            if row_match[r].is_none() {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = INF;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &(c, _) in &adj[r] {
                match col_match[c] {
                    None => found = true,
                    Some(r2) if dist[r2] == INF => {
                        dist[r2] = dist[r] + 1;
                        queue.push_back(r2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        for r in 0..n {
            if row_match[r].is_none() {
                augment(r, adj, &mut row_match, &mut col_match, &mut dist);
            }
        }
    }
    (row_match, col_match)
}

fn augment(
    root: usize,
    adj: &[Vec<(usize, EdgeIdx)>],
    row_match: &mut [Slot],
    col_match: &mut [Option<usize>],
    dist: &mut [usize],
) -> bool {
    // Iterative layered DFS: each frame is (row, next adjacency position).
    let mut path: Vec<(usize, usize)> = vec![(root, 0)];
    while let Some(&(r, pos)) = path.last() {
        if pos == adj[r].len() {
            dist[r] = usize::MAX;
            path.pop();
            continue;
        }
        path.last_mut().unwrap().1 += 1;
        let (c, _) = adj[r][pos];
        match col_match[c] {
            None => {
                // Flip the augmenting path.
                for &(row, p) in path.iter().rev() {
                    let (col, _) = adj[row][p - 1];
                    col_match[col] = Some(row);
                    row_match[row] = Some(adj[row][p - 1]);
                }
                return true;
            }
            Some(r2) if dist[r2] == dist[r] + 1 => path.push((r2, 0)),
            _ => {}
        }
    }
    false
}

pub fn dm_decompose(g: &BipartiteGraph) -> DmDecomposition {
    let matching = structural_matching(g);
    let nc = g.total_constraints();
    let nv = g.total_variables();
    let mut matched_var_of = vec![None; nc];
    let mut matched_con_of = vec![None; nv];
    for &e in &matching {
        let info = g.edge(e);
        matched_var_of[info.constraint] = Some((info.variable, e));
        matched_con_of[info.variable] = Some((info.constraint, e));
    }
    let unknowns = g.unknowns();

    // Under-constrained: alternating paths from unmatched variables
    // (variable -> constraint over any edge, constraint -> its matched variable).
    let mut in_under_v = vec![false; nv];
    let mut in_under_c = vec![false; nc];
    let mut stack: Vec<VariableIdx> = unknowns
        .iter()
        .copied()
        .filter(|&v| matched_con_of[v].is_none())
        .collect();
    for &v in &stack {
        in_under_v[v] = true;
    }
    while let Some(v) = stack.pop() {
        for e in g.variable_edges(v) {
            let c = g.edge(e).constraint;
            if !in_under_c[c] {
                in_under_c[c] = true;
                if let Some((v2, _)) = matched_var_of[c] {
                    if !in_under_v[v2] {
                        in_under_v[v2] = true;
                        stack.push(v2);
                    }
                }
            }
        }
    }

    // Over-constrained: alternating paths from unmatched constraints
    // (constraint -> unknown variable over any edge, variable -> its matched constraint).
    let mut in_over_v = vec![false; nv];
    let mut in_over_c = vec![false; nc];
    let mut stack: Vec<ConstraintIdx> = g
        .constraints()
        .iter()
        .copied()
        .filter(|&c| matched_var_of[c].is_none())
        .collect();
    for &c in &stack {
        in_over_c[c] = true;
    }
    while let Some(c) = stack.pop() {
        for e in g.unknown_edges(c) {
            let v = g.edge(e).variable;
            if !in_over_v[v] {
                in_over_v[v] = true;
                if let Some((c2, _)) = matched_con_of[v] {
                    if !in_over_c[c2] {
                        in_over_c[c2] = true;
                        stack.push(c2);
                    }
                }
            }
        }
    }

    let mut under = DmPart::default();
    let mut just = DmPart::default();
    let mut over = DmPart::default();
    for &c in g.constraints() {
        let part = if in_under_c[c] {
            &mut under
        } else if in_over_c[c] {
            &mut over
        } else {
            &mut just
        };
        part.constraints.push(c);
        if let Some((_, e)) = matched_var_of[c] {
            part.matching.push(e);
        }
    }
    for &v in &unknowns {
        let part = if in_under_v[v] {
            &mut under
        } else if in_over_v[v] {
            &mut over
        } else {
            &mut just
        };
        part.variables.push(v);
    }

    let hall_blocks = hall_blocks(g, &just);
    DmDecomposition {
        under,
        just,
        over,
        hall_blocks,
    }
}

fn hall_blocks(g: &BipartiteGraph, just: &DmPart) -> Vec<HallBlock> {
    if just.constraints.is_empty() {
        return Vec::new();
    }
    // Orientation only needs membership, so the witness is wrapped without
    // the solvability check that `Matching::new` performs.
    let sub = g.restrict(just.constraints.iter().copied());
    let outside: Vec<VariableIdx> = sub
        .unknowns()
        .into_iter()
        .filter(|v| just.variables.binary_search(v).is_err())
        .collect();
    let sub = sub.with_known(outside);
    let witness = Matching::from_edges_unchecked(just.matching.clone());
    let d = orient(&sub, &witness).expect("witness edges belong to the part");
    let matched_var = |c: ConstraintIdx| {
        just.matching
            .iter()
            .map(|&e| g.edge(e))
            .find(|info| info.constraint == c)
            .map(|info| info.variable)
    };
    components_in_topological_order(&d)
        .into_iter()
        .filter_map(|comp| {
            let constraints: Vec<_> = comp
                .iter()
                .filter_map(|v| match v {
                    Vertex::Constraint(c) => Some(*c),
                    _ => None,
                })
                .collect();
            if constraints.is_empty() {
                return None;
            }
            // A singleton component holds the constraint only; its matched
            // variable is a component of its own.
            let mut variables: Vec<VariableIdx> =
                constraints.iter().filter_map(|&c| matched_var(c)).collect();
            variables.sort_unstable();
            Some(HallBlock {
                constraints,
                variables,
            })
        })
        .collect()
}

/// Faultable constraints of the over-constrained part.
pub fn detectable_faults(d: &DmDecomposition, g: &BipartiteGraph) -> Vec<ConstraintIdx> {
    d.over
        .constraints
        .iter()
        .copied()
        .filter(|&c| g.constraint(c).faultable)
        .collect()
}

/// The over-constrained part as a graph view.
pub fn over_constrained(g: &BipartiteGraph) -> BipartiteGraph {
    g.restrict(dm_decompose(g).over.constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelBuilder, StructuralModel};
    use proptest::prelude::*;

    fn model(rows: &[&[usize]], n_vars: usize) -> StructuralModel {
        let mut b = ModelBuilder::default();
        for v in 0..n_vars {
            b = b.unknown(&format!("x{v}"));
        }
        for (i, row) in rows.iter().enumerate() {
            b = b.linear(&format!("c{i}"));
            for &v in *row {
                b = b.link(&format!("c{i}"), &format!("x{v}"), 1);
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn just_determined() {
        let g = BipartiteGraph::from_model(&model(&[&[0, 1], &[1]], 2));
        let d = dm_decompose(&g);
        assert!(d.under.is_empty() && d.over.is_empty());
        assert_eq!(d.just.constraints, vec![0, 1]);
        assert_eq!(d.just.matching.len(), 2);
        // c1 solves x1 first, then c0 solves x0.
        assert_eq!(d.hall_blocks.len(), 2);
        assert_eq!(d.hall_blocks[0].constraints, vec![1]);
    }

    #[test]
    fn redundancy_one() {
        let g = BipartiteGraph::from_model(&model(&[&[0], &[0]], 1));
        let d = dm_decompose(&g);
        assert_eq!((d.over.constraints.len(), d.over.variables.len()), (2, 1));
        assert!(d.under.is_empty() && d.just.is_empty());
        assert_eq!(d.redundancy(), 1);
    }

    #[test]
    fn under_constrained() {
        let g = BipartiteGraph::from_model(&model(&[&[0, 1]], 2));
        let d = dm_decompose(&g);
        assert_eq!((d.under.constraints.len(), d.under.variables.len()), (1, 2));
    }

    #[test]
    fn cyclic_block() {
        let g = BipartiteGraph::from_model(&model(&[&[0, 1], &[0, 1]], 2));
        let d = dm_decompose(&g);
        assert_eq!(d.hall_blocks.len(), 1);
        assert_eq!(d.hall_blocks[0].variables, vec![0, 1]);
    }

    #[test]
    fn faults_in_over_part() {
        let m = StructuralModel::builder()
            .unknown("x")
            .constraint(
                crate::model::Constraint::new("a", crate::model::ConstraintKind::Linear)
                    .faultable(true),
            )
            .constraint(
                crate::model::Constraint::new("b", crate::model::ConstraintKind::Linear)
                    .faultable(true),
            )
            .link("a", "x", 1)
            .link("b", "x", 1)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        assert_eq!(detectable_faults(&dm_decompose(&g), &g), vec![0, 1]);
        let none = BipartiteGraph::from_model(&model(&[&[0], &[0]], 1));
        assert!(detectable_faults(&dm_decompose(&none), &none).is_empty());
    }

    proptest! {
        #[test]
        fn invariants(seed in any::<u64>()) {
            let m = crate::random::random_model(seed, &Default::default());
            let g = BipartiteGraph::from_model(&m);
            let d = dm_decompose(&g);
            let mut all_c: Vec<_> = [&d.under, &d.just, &d.over].iter().flat_map(|p| p.constraints.clone()).collect();
            all_c.sort_unstable();
            prop_assert_eq!(all_c, g.constraints().to_vec());
            let mut all_v: Vec<_> = [&d.under, &d.just, &d.over].iter().flat_map(|p| p.variables.clone()).collect();
            all_v.sort_unstable();
            prop_assert_eq!(all_v, g.unknowns());
            prop_assert!(d.under.is_empty() || d.under.constraints.len() < d.under.variables.len());
            prop_assert_eq!(d.just.constraints.len(), d.just.variables.len());
            prop_assert!(d.over.is_empty() || d.over.constraints.len() > d.over.variables.len());
            // witnesses: complete on C-, perfect on G0, complete on X+
            prop_assert_eq!(d.under.matching.len(), d.under.constraints.len());
            prop_assert_eq!(d.just.matching.len(), d.just.constraints.len());
            prop_assert_eq!(d.over.matching.len(), d.over.variables.len());
            for (part, edges) in [(&d.under, &d.under.matching), (&d.just, &d.just.matching), (&d.over, &d.over.matching)] {
                for &e in edges {
                    let info = g.edge(e);
                    prop_assert!(part.constraints.contains(&info.constraint));
                    prop_assert!(part.variables.contains(&info.variable));
                }
            }
            let block_sizes: usize = d.hall_blocks.iter().map(|b| b.constraints.len()).sum();
            prop_assert_eq!(block_sizes, d.just.constraints.len());
            for b in &d.hall_blocks {
                prop_assert_eq!(b.constraints.len(), b.variables.len());
            }
            // lower block-triangular: a block only uses variables of itself or earlier blocks (or X+)
            let mut seen_vars: Vec<VariableIdx> = d.over.variables.clone();
            for b in &d.hall_blocks {
                seen_vars.extend(&b.variables);
                for &c in &b.constraints {
                    for e in g.unknown_edges(c) {
                        prop_assert!(seen_vars.contains(&g.edge(e).variable));
                    }
                }
            }
        }
    }
}
