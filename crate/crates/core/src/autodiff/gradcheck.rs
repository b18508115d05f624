use super::{NodeId, ParamStore, Tape};
use crate::error::{Error, Result};

/// Magnitude below which relative error falls back to absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

fn scalar_output(
    tape: &mut Tape,
    store: &ParamStore,
    program: &impl Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
) -> Result<f64> {
    let y = program(tape, store)?;
    let v = tape.value(y)?;
    v.item().ok_or_else(|| Error::NonScalarOutput {
        id: y.index(),
        shape: v.shape().to_vec(),
    })
}

/// Compares reverse-mode gradients of a scalar program against central
/// differences `(f(θ + ε) − f(θ − ε)) / 2ε`, one parameter coordinate at a
/// time. `program` must build the same computation on every call.
pub fn gradient_check<F>(program: F, store: &ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidStep(eps));
    }
    let mut work = store.clone();
    work.zero_grad();
    let mut tape = Tape::new();
    let y = program(&mut tape, &work)?;
    tape.backward(y)?;
    tape.accumulate_grads(&mut work)?;
    let analytic: Vec<(String, Vec<f64>)> = work
        .iter()
        .map(|(name, e)| (name.to_string(), e.grad().data().to_vec()))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for (name, grad) in analytic {
        let base = work.value(&name)?.clone();
        for (i, &a) in grad.iter().enumerate() {
            let mut shifted = base.clone();
            shifted.data_mut()[i] = base.data()[i] + eps;
            work.set_value(&name, shifted.clone())?;
            let plus = scalar_output(&mut Tape::new(), &work, &program)?;
            shifted.data_mut()[i] = base.data()[i] - eps;
            work.set_value(&name, shifted)?;
            let minus = scalar_output(&mut Tape::new(), &work, &program)?;
            work.set_value(&name, base.clone())?;

            let n = (plus - minus) / (2.0 * eps);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(REL_ERROR_FLOOR);
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
