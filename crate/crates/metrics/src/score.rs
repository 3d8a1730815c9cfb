use crate::tp::TpErrors;
use crate::MetricsError;

/// Composite detection score: mAP weighted five-fold against the recovered
/// true-positive qualities, `(5·mAP + Σ(1 − min(1, e))) / (5 + m)` for `m`
/// error terms. `map` is expected in [0, 1].
pub fn nds(map: f64, tp_error_terms: &[f64]) -> f64 {
    let recovered: f64 = tp_error_terms.iter().map(|e| 1.0 - e.min(1.0)).sum();
    (5.0 * map + recovered) / (5.0 + tp_error_terms.len() as f64)
}

/// [`nds`] over the three errors this crate measures (translation, scale,
/// orientation), reported as "NDS-3" since velocity and attribute errors
/// do not exist for the synthetic detector.
pub fn nds3(map: f64, errors: &TpErrors) -> f64 {
    nds(map, &errors.as_array())
}

/// Relative mAP change against an uncorrupted baseline, in percent
/// (negative when performance degrades). Reports round it to 0.1.
pub fn delta_map(baseline_map: f64, corrupted_map: f64) -> Result<f64, MetricsError> {
    if !(baseline_map > 0.0 && baseline_map.is_finite()) {
        return Err(MetricsError::NonPositiveBaseline(baseline_map));
    }
    Ok(100.0 * (corrupted_map - baseline_map) / baseline_map)
}

/// Report rounding: nearest tenth, halves away from zero.
pub fn round_to_tenth(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_marks_and_zero_errors_give_a_perfect_score() {
        assert!((nds(1.0, &[0.0; 5]) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_map_and_saturated_errors_give_zero() {
        assert!(nds(0.0, &[1.0, 2.5, 1.0, 7.0, 1.0]).abs() <= 1e-12);
    }

    #[test]
    fn the_halfway_case_scores_one_half() {
        assert!((nds(0.5, &[0.5; 5]) - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn saturated_errors_reduce_the_score_to_weighted_map() {
        for map in [0.0, 0.25, 0.9] {
            assert_eq!(nds(map, &[1.0; 5]), 5.0 * map / 10.0);
            assert_eq!(nds3(map, &TpErrors::fully_penalized()), 5.0 * map / 8.0);
        }
    }

    #[test]
    fn delta_is_zero_for_an_unchanged_map_and_errors_on_a_dead_baseline() {
        assert_eq!(delta_map(54.01, 54.01).unwrap(), 0.0);
        assert!(delta_map(0.0, 10.0).is_err());
        assert!(delta_map(-1.0, 10.0).is_err());
    }

    #[test]
    fn rounding_goes_to_the_nearest_tenth() {
        assert_eq!(round_to_tenth(-12.0133), -12.0);
        assert_eq!(round_to_tenth(-28.0746), -28.1);
        assert_eq!(round_to_tenth(0.04999), 0.0);
        assert_eq!(round_to_tenth(-0.05001), -0.1);
    }
}
