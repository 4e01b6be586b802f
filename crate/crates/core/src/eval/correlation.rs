use crate::error::{PcdError, Result};
use crate::scalar::Scalar;

fn check_pair<S: Scalar>(a: &[S], b: &[S], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(PcdError::param(format!(
            "correlation inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_len {
        return Err(PcdError::param(format!(
            "correlation needs at least {min_len} samples, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(PcdError::param("correlation inputs must be finite"));
    }
    Ok(())
}

/// Two-pass Pearson correlation, clamped to `[-1, 1]`.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    check_pair(a, b, 2)?;
    let n = S::from_usize_lossy(a.len());
    let ma = a.iter().copied().sum::<S>() / n;
    let mb = b.iter().copied().sum::<S>() / n;
    let (mut sab, mut saa, mut sbb) = (S::zero(), S::zero(), S::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    if saa == S::zero() || sbb == S::zero() {
        return Err(PcdError::UndefinedCorrelation("an input vector is constant".into()));
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    Ok(r.max(-S::one()).min(S::one()))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks<S: Scalar>(values: &[S]) -> Vec<S> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![S::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let rank = S::from_f64_lossy((start + 1 + end) as f64 / 2.0);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation with average ranks for ties.
pub fn srcc<S: Scalar>(pred: &[S], mos: &[S]) -> Result<S> {
    check_pair(pred, mos, 3)?;
    pearson(&average_ranks(pred), &average_ranks(mos))
}
