/// Softmax shifted by the max logit.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxXent {
    pub probs: Vec<f64>,
    pub loss: f64,
    pub grad_logits: Vec<f64>,
}

/// Softmax cross-entropy; the loss is computed in log-space so saturated
/// logits neither overflow nor lose the tail.
pub fn softmax_xent(logits: &[f64], label: usize) -> SoftmaxXent {
    assert!(label < logits.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let probs = softmax(logits);
    let grad_logits = probs
        .iter()
        .enumerate()
        .map(|(c, p)| if c == label { p - 1.0 } else { *p })
        .collect();
    SoftmaxXent { probs, loss, grad_logits }
}
