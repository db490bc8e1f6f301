//! Entropy and divergence primitives shared by all modules.
//!
//! Everything is in nats. The central primitive is a max-subtracted
//! log-sum-exp; every integral of the form log ∫ e^{...} dμ in the solver
//! and in the bound constants goes through it.

use crate::{Error, Result};

/// Log-domain weights (nats). Entries must be finite; the positive-weight
/// convention of the measures module excludes -inf.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights {
    pub values: Vec<f64>,
}

impl LogWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("log-weights must be finite".into()));
        }
        Ok(Self { values })
    }
}

/// log Σ_i exp(values_i + log_weights_i), computed with max-subtraction.
pub fn log_sum_exp(values: &[f64], log_weights: &[f64]) -> Result<f64> {
    if values.len() != log_weights.len() {
        return Err(Error::Invalid(format!(
            "log_sum_exp length mismatch: {} vs {}",
            values.len(),
            log_weights.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::Invalid("log_sum_exp of empty input".into()));
    }
    Ok(lse_terms(values.iter().zip(log_weights).map(|(v, w)| v + w)))
}

/// Max-subtracted log-sum-exp over an iterator of exponents.
/// Exact for a single term.
pub(crate) fn lse_terms<I>(terms: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = terms.map(|t| (t - m).exp()).sum();
    m + sum.ln()
}

/// Kullback-Leibler divergence Σ p_i log(p_i / q_i) in nats.
///
/// Requires equal support ordering. Returns +inf when some q_i = 0 < p_i;
/// terms with p_i = 0 contribute zero.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Invalid(format!(
            "kl length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(acc)
}

/// Total variation distance ½ Σ |p_i - q_i|, in [0, 1] for probabilities.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Invalid(format!(
            "total_variation length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lse_of_total_mass_one() {
        let v = log_sum_exp(&[0.0, 0.0], &[0.5f64.ln(), 0.5f64.ln()]).unwrap();
        assert!(v.abs() <= 1e-15);
    }

    #[test]
    fn lse_single_term_is_exact() {
        let v = log_sum_exp(&[3.25], &[-1.5]).unwrap();
        assert_eq!(v, 3.25 - 1.5);
    }

    #[test]
    fn lse_no_overflow_at_large_values() {
        let v = log_sum_exp(&[1000.0, 1000.0], &[0.5f64.ln(), 0.5f64.ln()]).unwrap();
        assert!((v - 1000.0).abs() <= 1e-12);
    }

    #[test]
    fn lse_empty_is_error() {
        assert!(log_sum_exp(&[], &[]).is_err());
    }

    #[test]
    fn kl_identical_is_zero() {
        assert_eq!(kl(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(kl(&[1.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn kl_two_term_value() {
        let v = kl(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let expect = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - expect).abs() <= 1e-15);
        assert!((v - 0.143841).abs() <= 1e-6);
    }

    #[test]
    fn kl_absolute_continuity_failure_is_infinite() {
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn kl_length_mismatch_is_error() {
        assert!(kl(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_examples() {
        assert_eq!(total_variation(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let v = total_variation(&[0.9, 0.1], &[0.1, 0.9]).unwrap();
        assert!((v - 0.8).abs() <= 1e-15);
    }

    fn random_simplex(xs: &[f64]) -> Vec<f64> {
        let total: f64 = xs.iter().sum();
        xs.iter().map(|x| x / total).collect()
    }

    proptest! {
        #[test]
        fn kl_nonnegative_and_zero_iff_equal(
            a in proptest::collection::vec(0.01f64..1.0, 2..12),
        ) {
            let p = random_simplex(&a);
            prop_assert!(kl(&p, &p).unwrap().abs() <= 1e-12);
        }

        #[test]
        fn pinsker_inequality(
            (a, b) in (2usize..12).prop_flat_map(|n| (
                proptest::collection::vec(0.01f64..1.0, n),
                proptest::collection::vec(0.01f64..1.0, n),
            )),
        ) {
            let p = random_simplex(&a);
            let q = random_simplex(&b);
            let tv = total_variation(&p, &q).unwrap();
            let d = kl(&p, &q).unwrap();
            prop_assert!(tv * tv <= d / 2.0 + 1e-12);
            prop_assert!(d >= -1e-15);
        }

        #[test]
        fn lse_shift_invariance(
            vals in proptest::collection::vec(-50.0f64..50.0, 1..10),
            shift in -100.0f64..100.0,
        ) {
            let lw: Vec<f64> = vals.iter().map(|_| (1.0 / vals.len() as f64).ln()).collect();
            let base = log_sum_exp(&vals, &lw).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let s = log_sum_exp(&shifted, &lw).unwrap();
            prop_assert!((s - shift - base).abs() <= 1e-9);
        }
    }
}
