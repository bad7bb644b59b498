//! Binary logistic loss on raw (log-odds) scores.

/// Raw scores are clipped to this magnitude before the sigmoid.
pub const RAW_CLIP: f64 = 40.0;

#[inline]
pub fn sigmoid(raw: f64) -> f64 {
    let x = raw.clamp(-RAW_CLIP, RAW_CLIP);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// First and second derivatives of the logloss w.r.t. the raw score:
/// `g = p - y`, `h = p (1 - p)` with `p = sigmoid(raw)`.
pub fn compute_grad_hess(y: &[u8], raw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(y.len(), raw.len(), "labels and scores must have equal length");
    let mut grad = Vec::with_capacity(y.len());
    let mut hess = Vec::with_capacity(y.len());
    for (&y, &r) in y.iter().zip(raw) {
        let p = sigmoid(r);
        grad.push(p - f64::from(y));
        hess.push(p * (1.0 - p));
    }
    (grad, hess)
}

/// Mean logloss evaluated directly on raw scores (numerically stable).
pub fn raw_logloss(y: &[u8], raw: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(raw)
        .map(|(&y, &r)| {
            let r = r.clamp(-RAW_CLIP, RAW_CLIP);
            // softplus(r) - y * r
            let softplus = if r > 0.0 {
                r + (-r).exp().ln_1p()
            } else {
                r.exp().ln_1p()
            };
            softplus - f64::from(y) * r
        })
        .sum();
    total / y.len().max(1) as f64
}
