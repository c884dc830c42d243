use rand::seq::index::sample;
use rand::Rng;

use super::{Gradients, Parameterized};

/// Denominator floor for [`relative_error`]; below it both values are
/// treated as zero-scale and the absolute difference is compared.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Multiple of the rounding noise `ε·|L|/h` of a central difference used
/// as the per-check denominator floor.
pub const ROUNDING_NOISE_FACTOR: f64 = 1e5;

/// `|a − n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, REL_ERROR_FLOOR)
}

pub fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(tensor, index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Helpers for choosing which parameter entries to probe.
pub struct GradCheck;

impl GradCheck {
    pub fn all_indices(grads: &Gradients) -> Vec<(usize, usize)> {
        grads
            .tensors()
            .iter()
            .enumerate()
            .flat_map(|(t, g)| (0..g.len()).map(move |i| (t, i)))
            .collect()
    }

    /// Up to `per_tensor` distinct random entries from every tensor.
    pub fn sample_indices(grads: &Gradients, per_tensor: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (t, g) in grads.tensors().iter().enumerate() {
            let k = per_tensor.min(g.len());
            let mut idx = sample(rng, g.len(), k).into_vec();
            idx.sort_unstable();
            out.extend(idx.into_iter().map(|i| (t, i)));
        }
        out
    }
}

/// Compares analytic gradients with central differences
/// `(L(θ + h) − L(θ − h)) / 2h` at the chosen entries. Parameters are
/// restored exactly after each probe. Entries whose gradient is smaller
/// than the rounding noise of the difference quotient are compared on that
/// noise scale, so structurally zero gradients do not register as errors.
pub fn check_gradients<M: Parameterized>(
    model: &mut M,
    analytic: &Gradients,
    picks: &[(usize, usize)],
    step: f64,
    loss: impl Fn(&M) -> f64,
) -> GradCheckReport {
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let noise = f64::EPSILON * loss(model).abs() / step;
    let floor = REL_ERROR_FLOOR.max(ROUNDING_NOISE_FACTOR * noise);
    for &(t, i) in picks {
        let original = model.params()[t][i];
        model.params_mut()[t][i] = original + step;
        let up = loss(model);
        model.params_mut()[t][i] = original - step;
        let down = loss(model);
        model.params_mut()[t][i] = original;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic.tensors()[t][i];
        let err = relative_error_with_floor(a, numeric, floor);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((t, i, a, numeric));
        }
    }
    report
}
