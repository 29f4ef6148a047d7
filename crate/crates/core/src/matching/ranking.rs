use crate::graph::{BipartiteGraph, EdgeIdx, Matching};

use super::MatchingProblem;

#[derive(Debug, Clone)]
pub struct RankedMatching {
    pub matching: Matching,
    /// Matched edges in the order they were chosen, with their rank.
    pub order: Vec<(EdgeIdx, usize)>,
}

/// Ranking: propagate knowledge from the known variables. At every rank,
/// each unmatched constraint with exactly one unknown variable is matched
/// to it, in constraint index order; a variable already claimed at this
/// rank is skipped. Constraints whose single unknown sits behind an
/// inadmissible edge stay unmatched.
pub fn ranking_match(p: &MatchingProblem) -> RankedMatching {
    let g: &BipartiteGraph = &p.graph;
    let mut known: Vec<bool> = (0..g.total_variables()).map(|v| g.is_known(v)).collect();
    let mut matched_c = vec![false; g.total_constraints()];
    let mut order = Vec::new();
    let mut rank = 0;
    loop {
        let front: Vec<EdgeIdx> = g
            .constraints()
            .iter()
            .filter(|&&c| !matched_c[c])
            .filter_map(|&c| {
                let mut unknown = g
                    .constraint_edges(c)
                    .iter()
                    .filter(|&&e| !known[g.edge(e).variable]);
                match (unknown.next(), unknown.next()) {
                    (Some(&e), None) => Some(e),
                    _ => None,
                }
            })
            .collect();
        let mut progressed = false;
        let mut claimed = Vec::new();
        for e in front {
            let info = g.edge(e);
            if claimed.contains(&info.variable) || !p.admissible(e) {
                continue;
            }
            claimed.push(info.variable);
            matched_c[info.constraint] = true;
            order.push((e, rank));
            progressed = true;
        }
        if !progressed {
            break;
        }
        for v in claimed {
            known[v] = true;
        }
        rank += 1;
    }
    let matching =
        Matching::new(g, order.iter().map(|&(e, _)| e)).expect("ranking yields a valid matching");
    RankedMatching { matching, order }
}
