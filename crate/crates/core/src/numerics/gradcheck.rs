//! Central finite-difference oracle for tape gradients.
//!
//! The oracle only ever calls the forward function; it shares nothing with
//! the backward pass it checks.

use super::{NumericsError, Tape, Tensor, Var};

/// Denominator floor so that exactly-zero gradients compare on an absolute scale.
pub const DENOMINATOR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

/// Compares tape gradients of the scalar `f(inputs)` against central
/// differences with step `eps`, for every element of every input.
pub fn check<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradCheckReport, NumericsError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, NumericsError>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.var(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let grads = tape.backward(out)?;
        vars.iter().map(|&v| grads.get_or_zeros(v)).collect()
    };

    let eval = |probe: &[Tensor]| -> Result<f64, NumericsError> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = probe.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.scalar())
    };

    let mut probe = inputs.to_vec();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (i, grad) in analytic.iter().enumerate() {
        for k in 0..inputs[i].len() {
            let orig = inputs[i].data()[k];
            probe[i].data_mut()[k] = orig + eps;
            let plus = eval(&probe)?;
            probe[i].data_mut()[k] = orig - eps;
            let minus = eval(&probe)?;
            probe[i].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grad.data()[k], numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        checked,
    })
}
