/// Index of the largest value; ties go to the lowest index. NaNs never win.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

pub fn max_value(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Epsilon-greedy choice from pre-drawn randomness, so callers control stream consumption.
pub fn epsilon_greedy(greedy: usize, epsilon: f64, u: f64, random_action: usize) -> usize {
    if u < epsilon {
        random_action
    } else {
        greedy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax([0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax([0.1, 0.3, 0.2]), 1);
        assert_eq!(argmax([1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax([f64::NAN, 1.0]), 1);
    }
}
