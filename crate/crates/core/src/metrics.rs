//! Evaluation metrics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::normal::std_normal_cdf;

fn same_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what}: lengths {a} and {b}")))
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic; tied scores
/// between a positive and a negative count one half.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    same_len(scores.len(), truth.len(), "auc")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteInput("scores"));
    }
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over runs of equal scores
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if truth[k] {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let (pf, nf) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - pf * (pf + 1.0) / 2.0) / (pf * nf))
}

/// `||a - b||^2`.
pub fn mse_beta(a: &[f64], b: &[f64]) -> Result<f64> {
    same_len(a.len(), b.len(), "mse_beta")?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `1 - mse_model / mse_null`.
pub fn rrmse(mse_model: f64, mse_null: f64) -> Result<f64> {
    if !(mse_null > 0.0) || !(mse_model >= 0.0) || !mse_null.is_finite() || !mse_model.is_finite() {
        return Err(Error::InvalidArgument(format!("rrmse needs mse_model >= 0 and mse_null > 0, got {mse_model}, {mse_null}")));
    }
    Ok(1.0 - mse_model / mse_null)
}

/// Mean of `|y_i - p_i|`.
pub fn mean_abs_diff(y: &[f64], probs: &[f64]) -> Result<f64> {
    same_len(y.len(), probs.len(), "mean_abs_diff")?;
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    Ok(y.iter().zip(probs).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Mean squared prediction error `||y - X beta||^2 / n`.
pub fn prediction_mse(y: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<f64> {
    same_len(y.len(), x.nrows(), "prediction_mse")?;
    same_len(beta.len(), x.ncols(), "prediction_mse")?;
    Ok((y - x * beta).norm_squared() / y.len() as f64)
}

/// Probit success probabilities `Phi(x_i' beta)`.
pub fn probit_probs(x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<Vec<f64>> {
    same_len(beta.len(), x.ncols(), "probit_probs")?;
    Ok((x * beta).iter().map(|&v| std_normal_cdf(v)).collect())
}
