//! Small reference models shipped with the crate.

use crate::model::{parse_model, StructuralModel};

pub const CYCLIC_RANKING: &str = include_str!("../fixtures/cyclic_ranking.model");
pub const GPS_NORTH: &str = include_str!("../fixtures/gps_north.model");
pub const BODY_VELOCITY_CORE: &str = include_str!("../fixtures/body_velocity_core.model");

/// Four constraints, three unknowns, one cycle through `c2` and `c4`.
pub fn cyclic_ranking() -> StructuralModel {
    parse_model(CYCLIC_RANKING).expect("fixture parses")
}

/// The three-equation GPS north channel (`d1`, `s13`, `s16`).
pub fn gps_north() -> StructuralModel {
    parse_model(GPS_NORTH).expect("fixture parses")
}

/// Eight equations that close a rigid-body velocity loop through the
/// accelerometer (`k12`-`k14`, `d10`, `d11`, `s1`-`s3`).
pub fn body_velocity_core() -> StructuralModel {
    parse_model(BODY_VELOCITY_CORE).expect("fixture parses")
}
