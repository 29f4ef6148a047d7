//! Seeded random structural models, for property tests and the `generate`
//! subcommand. The same seed and configuration always give the same model.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Constraint, ConstraintKind, Cost, DynamicRole, Edge, StructuralModel, Variable,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub constraints: usize,
    pub unknowns: usize,
    pub knowns: usize,
    pub edge_probability: f64,
    pub max_weight: Cost,
    pub differential_probability: f64,
    pub nonlinear_probability: f64,
    pub faultable_probability: f64,
    pub unsolvable_probability: f64,
    pub noise_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            constraints: 6,
            unknowns: 5,
            knowns: 2,
            edge_probability: 0.35,
            max_weight: 9,
            differential_probability: 0.15,
            nonlinear_probability: 0.3,
            faultable_probability: 0.5,
            unsolvable_probability: 0.1,
            noise_probability: 0.3,
        }
    }
}

/// Random model; variables that end up without edges are dropped, so the
/// result may have fewer variables than requested.
pub fn random_model(seed: u64, cfg: &GeneratorConfig) -> StructuralModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unknowns: Vec<String> = (1..=cfg.unknowns).map(|i| format!("x{i}")).collect();
    let knowns: Vec<String> = (1..=cfg.knowns).map(|i| format!("y{i}")).collect();
    let all: Vec<&String> = unknowns.iter().chain(&knowns).collect();

    let mut constraints = Vec::new();
    let mut edges = Vec::new();
    for i in 1..=cfg.constraints {
        let id = format!("c{i}");
        let kind = if unknowns.len() >= 2 && rng.gen_bool(cfg.differential_probability) {
            ConstraintKind::Differential
        } else if rng.gen_bool(cfg.nonlinear_probability) {
            ConstraintKind::Nonlinear
        } else {
            ConstraintKind::Linear
        };
        let faultable = rng.gen_bool(cfg.faultable_probability);
        let eval_cost = rng.gen_range(1..=3);
        constraints.push(
            Constraint::new(&id, kind)
                .faultable(faultable)
                .eval_cost(eval_cost),
        );

        let mut roles: Vec<(&String, DynamicRole)> = Vec::new();
        if kind == ConstraintKind::Differential {
            let pick: Vec<&String> = unknowns.choose_multiple(&mut rng, 2).collect();
            roles.push((pick[0], DynamicRole::Derivative));
            roles.push((pick[1], DynamicRole::Integral));
        }
        let mut row: Vec<Edge> = Vec::new();
        for &v in &all {
            if let Some(&(_, role)) = roles.iter().find(|(r, _)| *r == v) {
                let weight = rng.gen_range(0..=cfg.max_weight);
                row.push(Edge::new(&id, v.as_str(), weight).role(role));
            } else if rng.gen_bool(cfg.edge_probability) {
                row.push(random_edge(&mut rng, cfg, &id, v));
            }
        }
        if row.is_empty() {
            let v = all[rng.gen_range(0..all.len())];
            row.push(random_edge(&mut rng, cfg, &id, v));
        }
        edges.extend(row);
    }

    let used = |id: &str| edges.iter().any(|e| e.variable == id);
    let mut variables: Vec<Variable> = unknowns
        .iter()
        .filter(|v| used(v))
        .map(|v| Variable::unknown(v.as_str()))
        .collect();
    for k in knowns.iter().filter(|v| used(v)) {
        let mut v = Variable::known(k.as_str());
        if rng.gen_bool(cfg.noise_probability) {
            v.noise_variance = Some(f64::from(rng.gen_range(1..=50u32)) / 100.0);
        }
        variables.push(v);
    }
    StructuralModel::new(variables, constraints, edges).expect("generated models are valid")
}

fn random_edge(rng: &mut ChaCha8Rng, cfg: &GeneratorConfig, c: &str, v: &str) -> Edge {
    let e = Edge::new(c, v, rng.gen_range(0..=cfg.max_weight));
    if rng.gen_bool(cfg.unsolvable_probability) {
        e.unsolvable()
    } else {
        e
    }
}
