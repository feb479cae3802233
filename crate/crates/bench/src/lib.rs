//! Shared inputs for the benchmarks.

use selfsim_core::ifs::presets;
use selfsim_core::{ComplexVal, Direction, IfsSystem};

pub fn system() -> IfsSystem {
    presets::sys_b()
}

pub fn direction() -> Direction {
    Direction::from_angle(0.7)
}

/// Frequencies on a spiral out to `|ξ| = radius`.
pub fn spiral(n: usize, radius: f64) -> Vec<ComplexVal> {
    (0..n)
        .map(|k| ComplexVal::from_polar(radius * (k + 1) as f64 / n as f64, 2.4 * k as f64))
        .collect()
}
