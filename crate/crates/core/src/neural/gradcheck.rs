//! Central finite-difference gradient checking.

use super::backward::backward;
use super::forward::{forward_tokens, Dropout};
use super::model::{ModelState, PARAM_NAMES};
use crate::error::Result;

/// Denominator floor of the relative error, so entries whose true gradient is
/// numerically zero are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: &'static str,
    pub worst_index: usize,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of every parameter with central differences
/// of step `eps`. Dropout masks drawn in the first forward pass are replayed
/// for every perturbed evaluation.
pub fn check_gradients(
    model: &ModelState,
    x: &[usize],
    y: &[usize],
    dropout: Dropout<'_>,
    eps: f64,
) -> Result<GradCheckReport> {
    let (_, cache) = forward_tokens(model, x, y, dropout)?;
    let masks = cache.masks();
    let grads = backward(model, &cache);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: PARAM_NAMES[0],
        worst_index: 0,
        checked: 0,
    };
    for (ti, name) in PARAM_NAMES.into_iter().enumerate() {
        let n = grads.tensors()[ti].len();
        for i in 0..n {
            let original = probe.params.tensors()[ti].data()[i];
            probe.params.tensors_mut()[ti].data_mut()[i] = original + eps;
            let plus = forward_tokens(&probe, x, y, Dropout::Fixed(&masks))?.0;
            probe.params.tensors_mut()[ti].data_mut()[i] = original - eps;
            let minus = forward_tokens(&probe, x, y, Dropout::Fixed(&masks))?.0;
            probe.params.tensors_mut()[ti].data_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(grads.tensors()[ti].data()[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = name;
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}
