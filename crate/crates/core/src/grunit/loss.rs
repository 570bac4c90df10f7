/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Multi-label soft-margin loss averaged over classes, with its gradient
/// with respect to the scores.
///
/// `log sigma(p)` is evaluated as `-softplus(-p)` and `log(1 - sigma(p))` as
/// `-softplus(p)`.
pub fn mlsm_loss(scores: &[f64], targets: &[bool]) -> (f64, Vec<f64>) {
    assert_eq!(scores.len(), targets.len(), "one target per score");
    assert!(!scores.is_empty(), "at least one class");
    let c = scores.len() as f64;
    let loss = scores
        .iter()
        .zip(targets)
        .map(|(&p, &y)| if y { softplus(-p) } else { softplus(p) })
        .sum::<f64>()
        / c;
    let grad = scores
        .iter()
        .zip(targets)
        .map(|(&p, &y)| (sigmoid(p) - if y { 1.0 } else { 0.0 }) / c)
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_two_at_zero() {
        let (loss, grad) = mlsm_loss(&[0.0, 0.0], &[true, false]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(grad, vec![-0.25, 0.25]);
    }

    #[test]
    fn confident_correct_goes_to_zero() {
        let (loss, _) = mlsm_loss(&[50.0, -50.0], &[true, false]);
        assert!(loss > 0.0 && loss < 1e-20);
        let (loss, _) = mlsm_loss(&[800.0], &[true]);
        assert_eq!(loss, 0.0);
        let (loss, _) = mlsm_loss(&[-800.0], &[true]);
        assert_eq!(loss, 800.0);
    }
}
