use serde::{Deserialize, Serialize};

/// Linear-interpolated quantile of an ascending slice; NaN when empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub samples: usize,
    pub median_us: f64,
    pub q1_us: f64,
    pub q3_us: f64,
    pub iqr_us: f64,
}

impl RuntimeStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return RuntimeStats::default();
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
        RuntimeStats {
            samples: s.len(),
            median_us: quantile(&s, 0.5),
            q1_us: q1,
            q3_us: q3,
            iqr_us: q3 - q1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&[7.0], 0.9), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn std_is_sample_std() {
        assert_eq!(sample_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), (32.0f64 / 7.0).sqrt());
        assert_eq!(sample_std(&[3.0]), 0.0);
    }

    #[test]
    fn runtime_stats_of_odd_count() {
        let r = RuntimeStats::from_samples(&[5.0, 1.0, 3.0]);
        assert_eq!((r.samples, r.median_us, r.q1_us, r.q3_us, r.iqr_us), (3, 3.0, 2.0, 4.0, 2.0));
        assert_eq!(RuntimeStats::from_samples(&[]).samples, 0);
    }
}
