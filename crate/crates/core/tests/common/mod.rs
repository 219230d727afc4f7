#![allow(dead_code)]

use reluplan_core::compiler::instance_bounds;
use reluplan_core::domains::{generate, DomainSpec, Generated};
use reluplan_core::nn::UnitBounds;

/// Widths cycling through |U| = 2..=8 hidden units, in one or two hidden layers.
pub fn random_widths(trial: u64) -> Vec<usize> {
    let units = 2 + (trial % 7) as usize;
    let inputs = 2 + (trial % 2) as usize;
    let outputs = 1 + (trial % 3 == 0) as usize;
    if trial % 4 == 3 && units >= 4 {
        vec![inputs, units / 2, units - units / 2, outputs]
    } else {
        vec![inputs, units, outputs]
    }
}

pub struct Case {
    pub gen: Generated,
    pub bounds: UnitBounds,
}

pub fn case_with_horizon(trial: u64, horizon: usize) -> Case {
    let gen = generate(&DomainSpec::random(random_widths(trial), 1000 + trial, horizon)).unwrap();
    let bounds = instance_bounds(&gen.instance, &gen.net).unwrap();
    Case { gen, bounds }
}

pub fn case(trial: u64) -> Case {
    case_with_horizon(trial, 1)
}
