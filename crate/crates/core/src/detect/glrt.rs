use num_complex::Complex64;

/// Normalized noncoherent correlation of a combined window against a known
/// BPSK sequence, `|sum w[t] ref[t]|^2 / (L sum |w[t]|^2)`.
///
/// Lies in `[0, 1]` (reaching 1 when the window is a complex multiple of the
/// reference) and is 0 for an all-zero window. Panics on a length mismatch.
pub fn glrt_statistic(window: &[Complex64], reference: &[f64]) -> f64 {
    assert_eq!(window.len(), reference.len(), "window and reference lengths differ");
    let energy: f64 = window.iter().map(|w| w.norm_sqr()).sum();
    if energy == 0.0 {
        return 0.0;
    }
    let corr: Complex64 = window.iter().zip(reference).map(|(w, &x)| w * x).sum();
    (corr.norm_sqr() / (window.len() as f64 * energy)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::start_sequence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn matched_window_scores_one() {
        let x = start_sequence();
        let c = Complex64::new(-0.3, 2.0);
        let w: Vec<Complex64> = x.iter().map(|&s| c * s).collect();
        assert!((glrt_statistic(&w, &x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_and_zero_windows() {
        let r = [1.0, 1.0, -1.0, -1.0];
        let w = [1.0, -1.0, 1.0, -1.0].map(|v| Complex64::new(v, 0.0));
        assert_eq!(glrt_statistic(&w, &r), 0.0);
        assert_eq!(glrt_statistic(&[Complex64::new(0.0, 0.0); 4], &r), 0.0);
    }

    #[test]
    fn noise_mean_is_one_over_length() {
        let x = start_sequence();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let w: Vec<Complex64> = (0..128)
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 0.5f64.sqrt())
                    .collect();
                glrt_statistic(&w, &x)
            })
            .collect();
        let mean = scores.iter().sum::<f64>() / n as f64;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / 128.0).abs() < 3.0 * se, "{mean}");
    }
}
