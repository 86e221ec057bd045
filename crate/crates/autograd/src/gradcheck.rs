//! Central finite-difference oracle for checking backward closures.

use crate::{Graph, Tensor, Var};

/// Agreement between analytic and numeric gradients for one input.
#[derive(Clone, Debug)]
pub struct InputCheck {
    pub index: usize,
    pub coords_checked: usize,
    /// `‖analytic − numeric‖₂ / max(‖analytic‖₂, ‖numeric‖₂, 1e-8)` over the
    /// checked coordinates.
    pub rel_error: f64,
    pub analytic_norm: f64,
}

/// Compares the tape gradient of the scalar `f` against central differences
/// with step `h`, at most `max_coords` evenly strided coordinates per input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], h: f64, max_coords: usize, f: F) -> Vec<InputCheck>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Var<'g, f64>,
{
    let graph = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|t| graph.param(t.clone())).collect();
    let loss = f(&graph, &vars);
    let grads = graph.backward(loss);
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.get_or_zeros(v)).collect();

    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let g = Graph::new();
        let vs: Vec<_> = xs.iter().map(|t| g.constant(t.clone())).collect();
        f(&g, &vs).value().data()[0]
    };

    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut report = Vec::with_capacity(inputs.len());
    for (i, a) in analytic.iter().enumerate() {
        let n = a.numel();
        let stride = n.div_ceil(max_coords.max(1)).max(1);
        let (mut diff2, mut an2, mut nu2, mut count) = (0.0, 0.0, 0.0, 0);
        for j in (0..n).step_by(stride) {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let up = eval(&work);
            work[i].data_mut()[j] = orig - h;
            let down = eval(&work);
            work[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let av = a.data()[j];
            diff2 += (av - numeric).powi(2);
            an2 += av * av;
            nu2 += numeric * numeric;
            count += 1;
        }
        let denom = an2.sqrt().max(nu2.sqrt()).max(1e-8);
        report.push(InputCheck {
            index: i,
            coords_checked: count,
            rel_error: diff2.sqrt() / denom,
            analytic_norm: an2.sqrt(),
        });
    }
    report
}
