use super::{NumericsError, Result, Tape, Tensor};
use super::tape::NodeId;

/// Max over coordinates of `|analytic - fd| / max(1, |analytic|)`.
pub fn max_rel_err(analytic: &Tensor, fd: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), fd.shape());
    analytic
        .data()
        .iter()
        .zip(fd.data())
        .map(|(a, f)| (a - f).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Compare the tape's analytic gradient of a scalar function against central
/// finite differences, coordinate by coordinate.
///
/// `f` builds the graph from the node holding `x` and returns the scalar
/// loss node. Returns the max relative error over coordinates of `x`.
pub fn grad_check<F>(f: &F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    let eval = |xt: &Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let xid = tape.input(xt.clone());
        let loss = f(&mut tape, xid)?;
        let v = tape.value(loss);
        if !v.is_scalar() {
            return Err(NumericsError::NonScalarLoss(v.shape().to_vec()));
        }
        Ok(v.scalar_value())
    };

    // analytic gradient at x
    let mut tape = Tape::new();
    let xid = tape.input(x.clone().with_grad());
    let loss = f(&mut tape, xid)?;
    let loss_value = tape.value(loss);
    if !loss_value.is_scalar() {
        return Err(NumericsError::NonScalarLoss(loss_value.shape().to_vec()));
    }
    if !loss_value.scalar_value().is_finite() {
        return Err(NumericsError::NonFinite { op: "grad_check objective" });
    }
    let analytic = tape.backward(loss)?.get(xid);

    // central differences
    let mut fd = Tensor::zeros(x.shape().to_vec());
    for i in 0..x.numel() {
        let mut xp = x.clone();
        xp.data_mut()[i] += eps;
        let mut xm = x.clone();
        xm.data_mut()[i] -= eps;
        fd.data_mut()[i] = (eval(&xp)? - eval(&xm)?) / (2.0 * eps);
    }

    Ok(max_rel_err(&analytic, &fd))
}
