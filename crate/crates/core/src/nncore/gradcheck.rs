use super::network::{batch_loss, Mode, Network};
use super::{Gradients, NnError};
use crate::Exec;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Max of `|a - n| / max(|a|, |n|, 1e-8)` over compared coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation changed a pooling position or gate.
    pub skipped: usize,
    pub analytic: Gradients,
    /// Central differences; `NaN` marks skipped coordinates.
    pub numeric: Gradients,
}

fn reference_loss<N: Network>(net: &N, batch: &[&[u32]], labels: &[usize], mode: Mode) -> Result<f64, NnError> {
    let probs = batch
        .iter()
        .enumerate()
        .map(|(i, ids)| net.forward_reference(ids, mode, i))
        .collect::<Result<Vec<_>, _>>()?;
    batch_loss(&probs, labels)
}

fn routing_of<N: Network>(net: &N, batch: &[&[u32]], mode: Mode) -> Result<Vec<u32>, NnError> {
    let out = net.forward_batch(batch, mode, true, Exec::Sequential)?;
    Ok(net.routing(out.cache.as_ref().ok_or(NnError::StateMissing)?))
}

/// Compares the batched analytic gradient against central differences of the
/// per-example reference loss, for every parameter coordinate.
pub fn grad_check<N: Network>(
    net: &N,
    batch: &[&[u32]],
    labels: &[usize],
    mode: Mode,
    epsilon: f64,
) -> Result<GradCheckReport, NnError> {
    if epsilon <= 0.0 {
        return Err(NnError::InvalidArgument("epsilon must be positive".into()));
    }
    let out = net.forward_batch(batch, mode, true, Exec::Sequential)?;
    let analytic = net.backward_batch(&out, labels, Exec::Sequential)?;
    let base_routing = net.routing(out.cache.as_ref().ok_or(NnError::StateMissing)?);

    let mut probe = net.clone();
    let mut numeric = Gradients::zeros_like(&net.params());
    let mut skipped = 0;
    for t in 0..numeric.tensors.len() {
        for i in 0..numeric.tensors[t].len() {
            let orig = probe.params()[t].data[i];
            probe.params_mut()[t].data[i] = orig + epsilon;
            let up = reference_loss(&probe, batch, labels, mode)?;
            let up_routing = routing_of(&probe, batch, mode)?;
            probe.params_mut()[t].data[i] = orig - epsilon;
            let down = reference_loss(&probe, batch, labels, mode)?;
            let down_routing = routing_of(&probe, batch, mode)?;
            probe.params_mut()[t].data[i] = orig;
            if up_routing != base_routing || down_routing != base_routing {
                numeric.tensors[t][i] = f64::NAN;
                skipped += 1;
            } else {
                numeric.tensors[t][i] = (up - down) / (2.0 * epsilon);
            }
        }
    }
    let (max_rel_error, checked) = compare_gradients(&analytic, &numeric)?;
    Ok(GradCheckReport { max_rel_error, checked, skipped, analytic, numeric })
}

/// Max relative error and number of compared coordinates; `NaN` entries in
/// `numeric` are skipped.
pub fn compare_gradients(analytic: &Gradients, numeric: &Gradients) -> Result<(f64, usize), NnError> {
    if analytic.tensors.len() != numeric.tensors.len()
        || analytic.tensors.iter().zip(&numeric.tensors).any(|(a, n)| a.len() != n.len())
    {
        return Err(NnError::ShapeMismatch("gradient sets differ in shape".into()));
    }
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (a, n) in analytic.tensors.iter().flatten().zip(numeric.tensors.iter().flatten()) {
        if n.is_nan() {
            continue;
        }
        checked += 1;
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok((worst, checked))
}
