use ndarray::Array2;

use super::policy::{regnn_backward, regnn_forward, ParamGrads, ReGnnParams};
use super::rate::{sum_rate, sum_rate_grad_p};
use crate::error::{Error, Result};
use crate::netsim::ChannelRealization;
use crate::par::try_map_indexed;

/// Batch-mean sum-rate and its gradient with respect to the taps.
///
/// Slots are evaluated in parallel and reduced in slot order.
pub fn batch_objective_and_grad(
    params: &ReGnnParams,
    batch: &[&ChannelRealization],
    sigma2: f64,
) -> Result<(f64, ParamGrads)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per_slot = try_map_indexed(batch.len(), |i| {
        let g = batch[i];
        let (p, trace) = regnn_forward(params, g, None)?;
        let value = sum_rate(g, &p, sigma2);
        let gp = sum_rate_grad_p(g, &p, sigma2);
        let grads = regnn_backward(params, g, &trace, gp.view())?;
        Ok::<_, Error>((value, grads.0))
    })?;
    let mut total = 0.0;
    let mut grads = Array2::zeros(params.taps.raw_dim());
    for (v, g) in &per_slot {
        total += v;
        grads += g;
    }
    let n = batch.len() as f64;
    Ok((total / n, ParamGrads(grads / n)))
}

/// Batch-mean sum-rate without gradients.
pub fn batch_objective(params: &ReGnnParams, batch: &[&ChannelRealization], sigma2: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let rates = try_map_indexed(batch.len(), |i| {
        regnn_forward(params, batch[i], None).map(|(p, _)| sum_rate(batch[i], &p, sigma2))
    })?;
    Ok(rates.iter().sum::<f64>() / batch.len() as f64)
}
