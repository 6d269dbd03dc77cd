use super::AnalysisError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler<T> {
    /// k distinct positions pre-drawn from `[1, max_slots]`.
    Mint,
    /// k samples drawn uniformly from the ACTs actually issued.
    Reservoir,
    /// Independent Bernoulli(p) per ACT.
    Para { p: T },
}

fn range_err(name: &'static str, value: impl ToString, range: impl Into<String>) -> AnalysisError {
    AnalysisError::ParameterRange {
        name,
        value: value.to_string(),
        range: range.into(),
    }
}

/// `C(total - hits, k) / C(total, k)`: probability that k distinct draws
/// from `total` positions avoid all `hits` of them.
fn miss_all<T: Real>(total: u64, hits: u64, k: u64) -> T {
    if k > total - hits {
        return T::zero();
    }
    (0..k).fold(T::one(), |acc, i| {
        acc * T::from_count(total - hits - i) / T::from_count(total - i)
    })
}

/// Probability that the target's `a` ACTs in one tREFI of `n` ACTs all
/// escape sampling.
pub fn sampler_escape<T: Real>(
    sampler: Sampler<T>,
    a: u64,
    n: u64,
    k: u64,
    max_slots: u64,
) -> Result<T, AnalysisError> {
    if a == 0 || a > n {
        return Err(range_err("a", a, format!("1..={n}")));
    }
    if n > max_slots {
        return Err(range_err("n", n, format!("<= {max_slots}")));
    }
    if k == 0 {
        return Err(range_err("k", k, ">= 1"));
    }
    Ok(match sampler {
        Sampler::Mint => miss_all(max_slots, a, k.min(max_slots)),
        Sampler::Reservoir => miss_all(n, a, k.min(n)),
        Sampler::Para { p } => {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(range_err("p", p, "[0, 1]"));
            }
            (T::one() - p).powf(T::from_count(a))
        }
    })
}

/// Probability the target survives the `ceil(rh_th / a)` tREFIs it needs
/// to reach `rh_th`.
pub fn sampler_failure_analytic<T: Real>(
    sampler: Sampler<T>,
    a: u64,
    n: u64,
    k: u64,
    rh_th: u64,
    max_slots: u64,
) -> Result<T, AnalysisError> {
    let escape = sampler_escape(sampler, a, n, k, max_slots)?;
    Ok(escape.powf(T::from_count(rh_th.div_ceil(a))))
}

/// `(floor(2N / width), 2^-depth)`: over-estimate bound and the
/// probability of exceeding it.
pub fn cms_false_positive_bound<T: Real>(
    width: u64,
    depth: u64,
    n: u64,
) -> Result<(u64, T), AnalysisError> {
    if width < 2 {
        return Err(range_err("width", width, ">= 2"));
    }
    if depth < 1 {
        return Err(range_err("depth", depth, ">= 1"));
    }
    let confidence = T::lit(2.0).powf(-T::from_count(depth));
    Ok((2 * n / width, confidence))
}

/// Stochastic-eviction escape: probability a new row is never swapped in
/// over `misses` misses against Min = `m`, and the probability that at
/// least one of `windows` independent windows sees that happen.
pub fn dsac_analytics<T: Real>(m: u64, misses: u64, windows: u64) -> (T, T) {
    if m == 0 {
        return (T::zero(), T::zero());
    }
    let per_miss = -T::one() / T::from_count(m + 1);
    let never = (T::from_count(misses) * per_miss.ln_1p()).exp();
    let multi = if never >= T::one() {
        T::one()
    } else {
        -(T::from_count(windows) * (-never).ln_1p()).exp_m1()
    };
    (never, multi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reservoir_monopolised_slot_never_escapes() {
        let p: f64 = sampler_failure_analytic(Sampler::Reservoir, 36, 36, 1, 64, 73).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn mint_single_act_closed_form() {
        let p: f64 = sampler_failure_analytic(Sampler::Mint, 1, 20, 1, 64, 73).unwrap();
        assert!((p - (72.0f64 / 73.0).powi(64)).abs() < 1e-12);
        assert!((p - 0.4137).abs() < 1e-3);
    }

    #[test]
    fn para_is_bernoulli_product() {
        let p: f64 = sampler_failure_analytic(Sampler::Para { p: 0.01 }, 1, 73, 1, 100, 73).unwrap();
        assert!((p - 0.99f64.powi(100)).abs() < 1e-12);
        let one: f64 = sampler_failure_analytic(Sampler::Para { p: 1.0 }, 1, 73, 1, 10, 73).unwrap();
        assert_eq!(one, 0.0);
    }

    #[test]
    fn k_above_free_positions_means_certain_capture() {
        let p: f64 = sampler_escape(Sampler::Reservoir, 2, 3, 2, 73).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn cms_bound_examples() {
        assert_eq!(cms_false_positive_bound::<f64>(2048, 4, 606_933).unwrap(), (592, 0.0625));
        assert_eq!(cms_false_positive_bound::<f64>(1024, 2, 606_933).unwrap(), (1185, 0.25));
        assert_eq!(cms_false_positive_bound::<f64>(606_933, 1, 606_933).unwrap(), (2, 0.5));
        assert!(cms_false_positive_bound::<f64>(1, 1, 10).is_err());
    }

    #[test]
    fn dsac_examples() {
        let (never, multi) = dsac_analytics::<f64>(33_000, 33_000, 1875);
        assert!((never - 0.367_885).abs() < 1e-5);
        assert!(multi >= 0.999);
        assert_eq!(dsac_analytics::<f64>(0, 10, 10), (0.0, 0.0));
    }

    #[test]
    fn f32_agrees_with_f64() {
        let a: f32 = sampler_failure_analytic(Sampler::Mint, 1, 73, 1, 64, 73).unwrap();
        let b: f64 = sampler_failure_analytic(Sampler::Mint, 1, 73, 1, 64, 73).unwrap();
        assert!((a as f64 - b).abs() < 1e-5);
    }
}
