use std::collections::BTreeSet;

use crate::graph::{ConstraintIdx, EdgeIdx, Matching, VariableIdx};
use crate::model::Cost;

use super::MatchingProblem;

#[derive(Debug, Clone)]
pub struct Elimination {
    pub matching: Matching,
    /// Matched edges in selection order.
    pub order: Vec<EdgeIdx>,
    /// Unmatched constraints whose variables all ended up known.
    pub residual_candidates: Vec<ConstraintIdx>,
}

/// Weighted elimination. Keeps a pool of candidate extensions `(c, x)`
/// where `x` is the only unknown left in `c`, repeatedly commits the
/// cheapest one (ties to the lowest constraint, then variable index),
/// marks `x` known, drops the other candidates for `x` and admits the
/// constraints that became single-unknown.
///
/// The result is loop-free: every matched constraint depended only on
/// variables that were already known. It is greedy, so neither maximal
/// nor globally cheapest in general. The pipeline runs it under
/// differential causality.
pub fn weighted_elimination(p: &MatchingProblem) -> Elimination {
    let g = &p.graph;
    let mut known: Vec<bool> = (0..g.total_variables()).map(|v| g.is_known(v)).collect();
    let mut unknown_count = vec![0usize; g.total_constraints()];
    let mut matched = vec![false; g.total_constraints()];
    let mut pool: BTreeSet<(Cost, ConstraintIdx, VariableIdx, EdgeIdx)> = BTreeSet::new();

    let candidate =
        |c: ConstraintIdx, known: &[bool]| -> Option<(Cost, ConstraintIdx, VariableIdx, EdgeIdx)> {
            let e = g
                .constraint_edges(c)
                .iter()
                .copied()
                .find(|&e| !known[g.edge(e).variable])?;
            p.admissible(e)
                .then(|| (g.edge(e).weight, c, g.edge(e).variable, e))
        };

    for &c in g.constraints() {
        unknown_count[c] = g.unknown_edges(c).count();
        if unknown_count[c] == 1 {
            pool.extend(candidate(c, &known));
        }
    }

    let mut order = Vec::new();
    while let Some((_, c, x, e)) = pool.pop_first() {
        order.push(e);
        matched[c] = true;
        known[x] = true;
        for e2 in g.variable_edges(x) {
            let c2 = g.edge(e2).constraint;
            pool.remove(&(g.edge(e2).weight, c2, x, e2));
            unknown_count[c2] -= 1;
            if !matched[c2] && unknown_count[c2] == 1 {
                pool.extend(candidate(c2, &known));
            }
        }
    }

    let residual_candidates = g
        .constraints()
        .iter()
        .copied()
        .filter(|&c| !matched[c] && unknown_count[c] == 0)
        .collect();
    let matching =
        Matching::new(g, order.iter().copied()).expect("elimination yields a valid matching");
    Elimination {
        matching,
        order,
        residual_candidates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{orient, strongly_connected_components, BipartiteGraph};
    use crate::matching::Causality;
    use crate::model::{Constraint, ConstraintKind, DynamicRole, Edge, StructuralModel};
    use proptest::prelude::*;

    #[test]
    fn nothing_unknown() {
        let m = StructuralModel::builder()
            .known("u")
            .linear("c1")
            .linear("c2")
            .link("c1", "u", 1)
            .link("c2", "u", 1)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        let r = weighted_elimination(&MatchingProblem::new(g, Causality::Differential));
        assert!(r.matching.is_empty());
        assert_eq!(r.residual_candidates, vec![0, 1]);
    }

    #[test]
    fn cheaper_candidate_wins() {
        let m = StructuralModel::builder()
            .known("u")
            .unknown("x1")
            .linear("a")
            .linear("b")
            .link("a", "u", 1)
            .link("a", "x1", 5)
            .link("b", "u", 1)
            .link("b", "x1", 3)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        let r = weighted_elimination(&MatchingProblem::new(g.clone(), Causality::Differential));
        assert_eq!(
            r.matching.pairs(&g),
            vec![("b".to_string(), "x1".to_string())]
        );
        assert_eq!(
            r.residual_candidates,
            vec![g.constraint_index("a").unwrap()]
        );
    }

    #[test]
    fn ties_go_to_lowest_constraint() {
        let m = StructuralModel::builder()
            .unknown("x")
            .linear("a")
            .linear("b")
            .link("a", "x", 2)
            .link("b", "x", 2)
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        let r = weighted_elimination(&MatchingProblem::new(g.clone(), Causality::Differential));
        assert_eq!(r.matching.pairs(&g)[0].0, "a");
    }

    #[test]
    fn integral_edges_are_skipped_under_differential_causality() {
        let m = StructuralModel::builder()
            .unknown("x")
            .known("x_dot")
            .constraint(Constraint::new("d", ConstraintKind::Differential))
            .edge(Edge::new("d", "x", 100).role(DynamicRole::Integral))
            .edge(Edge::new("d", "x_dot", 200).role(DynamicRole::Derivative))
            .build()
            .unwrap();
        let g = BipartiteGraph::from_model(&m);
        assert!(
            weighted_elimination(&MatchingProblem::new(g.clone(), Causality::Differential))
                .matching
                .is_empty()
        );
        assert_eq!(
            weighted_elimination(&MatchingProblem::new(g, Causality::Mixed))
                .matching
                .len(),
            1
        );
    }

    proptest! {
        #[test]
        fn loop_free_and_replayable(seed in any::<u64>()) {
            let m = crate::random::random_model(seed, &Default::default());
            let g = BipartiteGraph::from_model(&m);
            let p = MatchingProblem::new(g.clone(), Causality::Differential);
            let r = weighted_elimination(&p);
            let d = orient(&g, &r.matching).unwrap();
            prop_assert!(strongly_connected_components(&d).iter().all(|c| c.len() == 1));
            let mut known: Vec<bool> = (0..g.total_variables()).map(|v| g.is_known(v)).collect();
            for &e in &r.order {
                let info = g.edge(e);
                prop_assert!(p.admissible(e));
                let unknown: Vec<_> = g.unknown_edges(info.constraint).filter(|&e2| !known[g.edge(e2).variable]).collect();
                prop_assert_eq!(unknown, vec![e]);
                known[info.variable] = true;
            }
        }
    }
}
