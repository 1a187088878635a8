use super::{check_rows, log_softmax, softmax_backward, LossEvaluation};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::regression::BinGrid;

/// Mean over items of `Σ_k p_k |y − m_k|^p_exponent − τ·H(p)` with
/// `p = softmax(bin_logits)`. Mass far from the target is penalized and the
/// entropy bonus keeps the bin distribution spread out.
pub fn r2ccp_loss(
    bin_logits: &Matrix,
    targets: &[f64],
    grid: &BinGrid,
    p_exponent: f64,
    tau: f64,
) -> Result<LossEvaluation> {
    check_rows(bin_logits, targets.len())?;
    if bin_logits.cols() != grid.len() {
        return Err(Error::input(format!(
            "{} bin logit(s) per row, grid has {} bins",
            bin_logits.cols(),
            grid.len()
        )));
    }
    if !(p_exponent.is_finite() && p_exponent > 0.0) {
        return Err(Error::input(format!(
            "exponent must be positive, got {p_exponent}"
        )));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::input(format!(
            "entropy weight must be nonnegative, got {tau}"
        )));
    }
    let n = targets.len() as f64;
    let mut grad = Matrix::zeros(bin_logits.rows(), bin_logits.cols());
    let mut value = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        if !grid.contains(y) {
            return Err(Error::input(format!("target {y} outside the bin range")));
        }
        let logp = log_softmax(bin_logits.row(i));
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        // ∂/∂p_k of Σ p c + τ Σ p log p is c_k + τ(log p_k + 1); the constant
        // τ cancels in the softmax backward pass.
        let grad_p: Vec<f64> = grid
            .midpoints()
            .iter()
            .zip(&logp)
            .map(|(m, lp)| (y - m).abs().powf(p_exponent) + tau * lp)
            .collect();
        let row_value: f64 = p
            .iter()
            .zip(grid.midpoints())
            .zip(&logp)
            .map(|((pk, m), lp)| pk * (y - m).abs().powf(p_exponent) + tau * pk * lp)
            .sum();
        value += row_value;
        for (g, d) in grad
            .row_mut(i)
            .iter_mut()
            .zip(softmax_backward(&p, &grad_p))
        {
            *g = d / n;
        }
    }
    Ok(LossEvaluation {
        value: value / n,
        grad,
    })
}
