use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{EncoderInput, Model};

/// Gradients with magnitude below this are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Slot name and flat index of the worst entry.
    pub worst: (String, usize),
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare every analytic gradient entry against central differences of
/// step `eps`. Runs serially.
pub fn gradient_check(
    model: &Model,
    input: &EncoderInput,
    queries: &[crate::geom::Vec3],
    labels: &[f64],
    kl_weight: f64,
    noise: Option<&Array2<f64>>,
    eps: f64,
) -> GradCheckReport {
    let (_, grads) = model.loss_and_grads(input, queries, labels, kl_weight, noise);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: (String::new(), 0),
    };
    for (slot, g) in grads.iter().enumerate() {
        for flat in 0..g.len() {
            let (r, c) = (flat / g.ncols(), flat % g.ncols());
            let orig = model.params.get(slot)[[r, c]];
            probe.params.get_mut(slot)[[r, c]] = orig + eps;
            let up = probe.loss_value(input, queries, labels, kl_weight, noise).total;
            probe.params.get_mut(slot)[[r, c]] = orig - eps;
            let down = probe.loss_value(input, queries, labels, kl_weight, noise).total;
            probe.params.get_mut(slot)[[r, c]] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(g[[r, c]], numeric, GRADCHECK_FLOOR);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (model.params.name(slot).to_string(), flat);
            }
        }
    }
    report
}
