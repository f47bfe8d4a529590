use rand::Rng;

use crate::geometry::Position;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Indices of nodes strictly within `range` of `positions[tx]`.
pub fn receivers(positions: &[Position], tx: usize, range: f64) -> Vec<usize> {
    let origin = positions[tx];
    let r2 = range * range;
    positions
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != tx && origin.distance_sq(p) < r2)
        .map(|(j, _)| j)
        .collect()
}

pub fn propagation_delay(distance: f64) -> f64 {
    distance / SPEED_OF_LIGHT
}

/// Independent per-receiver loss draw.
pub fn frame_lost<R: Rng + ?Sized>(loss: f64, rng: &mut R) -> bool {
    loss > 0.0 && rng.gen::<f64>() < loss
}
