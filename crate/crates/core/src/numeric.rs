//! Order-independent floating-point reductions.
//!
//! Metric sums are taken over the sorted addends with Neumaier compensation,
//! so permuting the inputs cannot change a single bit of the result.

/// Compensated sum of `values` in ascending order.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sorted: Vec<f64> = values.into_iter().collect();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for v in sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Mean via [`stable_sum`]; `None` for empty input.
pub fn stable_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let values: Vec<f64> = values.into_iter().collect();
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    Some(stable_sum(values) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_invariant() {
        let a = [0.1, 1e16, -1e16, 0.2, 0.3, -0.7];
        let mut b = a;
        b.reverse();
        assert_eq!(stable_sum(a).to_bits(), stable_sum(b).to_bits());
        assert!((stable_sum(a) - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(stable_mean(std::iter::empty()), None);
        assert_eq!(stable_mean([1.0, 2.0, 3.0]), Some(2.0));
    }
}
