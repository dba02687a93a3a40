//! Dyadic-scale aggregation `M_n = M0 2^n` and the time-slicing schedule
//! `T_n = T_{n-1}^{ratio}`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Weighted sums over a dyadic family of values `v_n` at scales `M_n = M0 2^n`:
/// the plain `sum M_n^l v_n` and the log-damped `sum_{n>=1} M_n^l v_n / n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DyadicSums {
    pub weighted: f64,
    pub log_weighted: f64,
    pub terms: usize,
}

pub fn dyadic_sum(values_by_n: &[f64], ell: i32, m0: f64) -> Result<DyadicSums> {
    if values_by_n.is_empty() {
        return Err(Error::EmptyDyadicFamily);
    }
    let mut weighted = 0.0;
    let mut log_weighted = 0.0;
    for (n, v) in values_by_n.iter().enumerate() {
        let m_n = m0 * 2f64.powi(n as i32);
        let w = m_n.powi(ell);
        weighted += w * v;
        if n >= 1 {
            log_weighted += w * v / n as f64;
        }
    }
    Ok(DyadicSums { weighted, log_weighted, terms: values_by_n.len() })
}

/// Scalar member of the dyadic family at scale `M_n`: the `l`-th power ramp
/// under a smooth step that opens once `|a|` exceeds `2 M_n`,
/// `f_n(a) = (|a|/M_n)^l (1 + tanh(2(|a|/M_n - 2)))/2`.
/// Summed with weights `M_n^l` this accumulates one `|a|^l` per active scale,
/// which is what produces the `|a|^l ln<a>` envelope.
pub fn dyadic_scalar_member(a: f64, m_n: f64, ell: i32) -> f64 {
    let u = a.abs() / m_n;
    u.powi(ell) * 0.5 * (1.0 + (2.0 * (u - 2.0)).tanh())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeComparison {
    pub a: f64,
    pub summed: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Compare `sum_n M_n^l f_n(a)` against the `|a|^l ln<a>` envelope pointwise.
pub fn dyadic_scalar_identity(
    ell: i32,
    m0: f64,
    terms: usize,
    a_samples: &[f64],
) -> Result<Vec<EnvelopeComparison>> {
    if terms == 0 {
        return Err(Error::EmptyDyadicFamily);
    }
    let mut out = Vec::with_capacity(a_samples.len());
    for &a in a_samples {
        let values: Vec<f64> = (0..terms)
            .map(|n| dyadic_scalar_member(a, m0 * 2f64.powi(n as i32), ell))
            .collect();
        let summed = dyadic_sum(&values, ell, m0)?.weighted;
        let envelope = a.abs().powi(ell) * (1.0 + a * a).sqrt().ln();
        out.push(EnvelopeComparison { a, summed, envelope, ratio: summed / envelope });
    }
    Ok(out)
}

/// Time slices `T > T_1 > ... >= T_last` with `T_n = T_{n-1}^{ratio}`,
/// iterated until the next boundary would drop below 2.
#[derive(Clone, Debug, Serialize)]
pub struct SliceSchedule {
    pub final_time: f64,
    pub ratio: f64,
    /// Decreasing boundaries, starting at `final_time`.
    pub boundaries: Vec<f64>,
}

pub const MAX_SLICES: usize = 64;

pub fn slice_schedule(final_time: f64, ratio: f64) -> Result<SliceSchedule> {
    if final_time <= std::f64::consts::E {
        return Err(Error::SliceScheduleBadFinalTime(final_time));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::SliceScheduleBadRatio(ratio));
    }
    let mut boundaries = vec![final_time];
    loop {
        let next = boundaries.last().unwrap().powf(ratio);
        if next < 2.0 {
            break;
        }
        boundaries.push(next);
        if boundaries.len() > MAX_SLICES {
            return Err(Error::SliceScheduleTooLong(MAX_SLICES));
        }
    }
    Ok(SliceSchedule { final_time, ratio, boundaries })
}

impl SliceSchedule {
    /// Number of slices (intervals between consecutive boundaries).
    pub fn len(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `sum_n [b_{n-1} - b_n] = b_first - b_last`; returns the mismatch of a
    /// telescoping sum over per-boundary values.
    pub fn telescoping_mismatch(values_at_boundaries: &[f64]) -> f64 {
        if values_at_boundaries.len() < 2 {
            return 0.0;
        }
        let total: f64 = values_at_boundaries
            .windows(2)
            .map(|w| w[0] - w[1])
            .sum();
        let direct = values_at_boundaries[0] - values_at_boundaries[values_at_boundaries.len() - 1];
        (total - direct).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_term_family() {
        let s = dyadic_sum(&[0.7], 2, 3.0).unwrap();
        assert_abs_diff_eq!(s.weighted, 9.0 * 0.7, epsilon = 1e-14);
        assert_eq!(s.log_weighted, 0.0);
    }

    #[test]
    fn ell_zero_is_plain_sum() {
        let s = dyadic_sum(&[1.0, 2.0, 3.0], 0, 5.0).unwrap();
        assert_abs_diff_eq!(s.weighted, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn empty_family_rejected() {
        assert!(matches!(dyadic_sum(&[], 1, 1.0), Err(Error::EmptyDyadicFamily)));
    }

    #[test]
    fn scalar_identity_at_minus_eight() {
        let cmp = dyadic_scalar_identity(1, 1.0, 12, &[-8.0]).unwrap();
        assert!(
            cmp[0].ratio > 0.5 && cmp[0].ratio < 2.0,
            "ratio {} at a=-8",
            cmp[0].ratio
        );
    }

    #[test]
    fn scalar_identity_across_range() {
        let samples: Vec<f64> = (0..40)
            .map(|i| -2.0 * (64.0f64 / 2.0).powf(i as f64 / 39.0))
            .collect();
        let cmp = dyadic_scalar_identity(1, 1.0, 12, &samples).unwrap();
        for c in &cmp {
            assert!(
                c.ratio > 0.5 && c.ratio < 2.0,
                "ratio {} outside factor 2 at a={}",
                c.ratio,
                c.a
            );
        }
        // the check discriminates exponents
        let cmp2 = dyadic_scalar_identity(2, 1.0, 12, &samples).unwrap();
        for c in &cmp2 {
            assert!(c.ratio > 0.5 && c.ratio < 2.0, "l=2 ratio {} at a={}", c.ratio, c.a);
        }
    }

    #[test]
    fn slice_schedule_examples() {
        let s = slice_schedule(1e8, 0.8).unwrap();
        // first boundary 10^{6.4}
        assert_abs_diff_eq!(s.boundaries[1], 10f64.powf(6.4), epsilon = 1.0);
        assert_eq!(s.len(), 14);
        assert!(s.boundaries.windows(2).all(|w| w[0] > w[1]));
        assert!(*s.boundaries.last().unwrap() >= 2.0);
        // T=100 at ratio 4/5
        let s = slice_schedule(100.0, 0.8).unwrap();
        assert_abs_diff_eq!(s.boundaries[1], 100f64.powf(0.8), epsilon = 1e-9);
    }

    #[test]
    fn slice_schedule_rejects_bad_input() {
        assert!(matches!(
            slice_schedule(2.0, 0.8),
            Err(Error::SliceScheduleBadFinalTime(_))
        ));
        assert!(matches!(
            slice_schedule(100.0, 1.0),
            Err(Error::SliceScheduleBadRatio(_))
        ));
        assert!(matches!(
            slice_schedule(1e300, 0.999),
            Err(Error::SliceScheduleTooLong(_))
        ));
    }

    #[test]
    fn telescoping_is_exact_arithmetic() {
        let values = vec![10.0, 7.5, 3.25, 3.0, 2.875];
        assert!(SliceSchedule::telescoping_mismatch(&values) < 1e-12);
    }
}
