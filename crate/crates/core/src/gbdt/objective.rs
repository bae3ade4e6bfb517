//! Multiclass softmax cross-entropy.

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    softmax_into(scores, &mut out);
    out
}

pub fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Writes `softmax(scores)` into `out` and returns `cross_entropy(scores, label)`
/// from the same exponentials.
pub fn softmax_with_loss(scores: &[f64], label: usize, out: &mut [f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    max + sum.ln() - scores[label]
}

/// `-log softmax(scores)[label]`, via log-sum-exp.
pub fn cross_entropy(scores: &[f64], label: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[label]
}

/// Per-class `(gradient, hessian)` of the cross-entropy with respect to each
/// score: `p_c - [c == label]` and `p_c (1 - p_c)`.
pub fn softmax_grad_hess(scores: &[f64], label: usize) -> Vec<(f64, f64)> {
    softmax(scores)
        .into_iter()
        .enumerate()
        .map(|(c, p)| {
            let g = if c == label { p - 1.0 } else { p };
            (g, p * (1.0 - p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores() {
        let gh = softmax_grad_hess(&[0.0; 11], 3);
        let p = 1.0 / 11.0;
        assert!((gh[3].0 - (p - 1.0)).abs() < 1e-15);
        assert!((gh[3].0 + 0.909).abs() < 1e-3);
        assert!((gh[0].0 - p).abs() < 1e-15);
        assert!((gh[0].1 - p * (1.0 - p)).abs() < 1e-15);
    }

    #[test]
    fn saturated_true_class() {
        let mut s = vec![0.0; 11];
        s[2] = 800.0;
        let gh = softmax_grad_hess(&s, 2);
        assert!(gh.iter().all(|&(g, h)| g.abs() < 1e-300 && h.abs() < 1e-300));
        assert!(cross_entropy(&s, 2).abs() < 1e-300);
    }

    #[test]
    fn fused_loss_matches() {
        let s = [0.3, -1.2, 4.0, 2.2, -7.5];
        let mut p = [0.0; 5];
        for y in 0..5 {
            assert_eq!(softmax_with_loss(&s, y, &mut p), cross_entropy(&s, y));
            assert_eq!(p.to_vec(), softmax(&s));
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, -3.0, 700.0, 2.5]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
