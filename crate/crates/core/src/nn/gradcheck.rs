use super::param::HasParameters;
use crate::rng::SplitMix64;

/// Maximum number of coordinates probed per check.
pub const MAX_PROBES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub probed: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the gradients produced by `loss_fn` with central differences.
///
/// `loss_fn` must return the scalar loss and accumulate gradients into the
/// model's parameters (they are zeroed before each call). Up to
/// [`MAX_PROBES`] coordinates are probed, chosen by a seeded shuffle.
/// Parameter values are restored afterwards.
pub fn gradient_check<M, F>(model: &mut M, mut loss_fn: F, h: f64, seed: u64) -> GradCheck
where
    M: HasParameters,
    F: FnMut(&mut M) -> f64,
{
    model.zero_grad();
    loss_fn(model);
    let analytic: Vec<Vec<f64>> = model.parameters().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut coords: Vec<(usize, usize)> = analytic
        .iter()
        .enumerate()
        .flat_map(|(pi, g)| (0..g.len()).map(move |ei| (pi, ei)))
        .collect();
    SplitMix64::new(seed).shuffle(&mut coords);
    coords.truncate(MAX_PROBES);

    let mut eval = |model: &mut M, pi: usize, ei: usize, value: f64| {
        model.parameters_mut()[pi].value.data_mut()[ei] = value;
        model.zero_grad();
        loss_fn(model)
    };

    let mut max_rel_error: f64 = 0.0;
    for &(pi, ei) in &coords {
        let original = model.parameters()[pi].value.data()[ei];
        let plus = eval(model, pi, ei, original + h);
        let minus = eval(model, pi, ei, original - h);
        model.parameters_mut()[pi].value.data_mut()[ei] = original;
        let numeric = (plus - minus) / (2.0 * h);
        max_rel_error = max_rel_error.max(relative_error(analytic[pi][ei], numeric));
    }
    model.zero_grad();
    GradCheck {
        max_rel_error,
        probed: coords.len(),
    }
}
