//! Post-processing of BER curves.

use trbeam_core::analytics::q_function;

/// SNR at which a decreasing BER curve first reaches `target`, interpolated
/// linearly in `log10(BER)` between the bracketing grid points.
///
/// A bracketing point with zero errors falls back to linear interpolation.
/// Returns `None` if the curve never reaches `target` or starts below it.
pub fn snr_at_ber(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let first = curve.first()?;
    if first.1 <= target {
        return None;
    }
    curve.windows(2).find(|w| w[0].1 > target && w[1].1 <= target).map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        let t = if b1 > 0.0 {
            (b0.log10() - target.log10()) / (b0.log10() - b1.log10())
        } else {
            (b0 - target) / (b0 - b1)
        };
        s0 + t * (s1 - s0)
    })
}

/// SNR in dB where the bound `Q(sqrt(2 M snr))` equals `target`.
pub fn bound_snr_at_ber(antennas: usize, target: f64) -> f64 {
    // Bisection on Q^{-1}(target).
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    10.0 * (x * x / (2.0 * antennas as f64)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_in_log_domain() {
        let curve = [(0.0, 1e-2), (10.0, 1e-6)];
        assert!((snr_at_ber(&curve, 1e-4).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(snr_at_ber(&curve, 1e-7), None);
        assert_eq!(snr_at_ber(&curve, 0.5), None);
        let zero = [(0.0, 2e-4), (2.0, 0.0)];
        assert!((snr_at_ber(&zero, 1e-4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_inverts_q() {
        for m in [1, 4, 8] {
            let snr = 10f64.powf(bound_snr_at_ber(m, 1e-4) / 10.0);
            assert!((q_function((2.0 * m as f64 * snr).sqrt()) - 1e-4).abs() < 1e-12);
        }
        let shift = bound_snr_at_ber(4, 1e-4) - bound_snr_at_ber(8, 1e-4);
        assert!((shift - 10.0 * 2f64.log10()).abs() < 1e-9);
    }
}
