//! KL divergence numbers between reward laws.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::ln;
use crate::model::Configuration;
use crate::policy::FeedbackMode;
use crate::{Error, Result, Table};

/// `p ln(p / q)` with `0 ln 0 = 0` and `p ln(p / 0) = +inf` for `p > 0`.
#[inline]
fn xlogx_over(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * ln(p / q)
    }
}

/// `KL(Bernoulli(u) || Bernoulli(v)) = u ln(u/v) + (1-u) ln((1-u)/(1-v))`.
pub fn bernoulli_kl(u: f64, v: f64) -> f64 {
    xlogx_over(u, v) + xlogx_over(1.0 - u, 1.0 - v)
}

/// KL between `Bin(m, u)` and `Bin(m, v)`, summed over the support.
pub fn binomial_kl(u: f64, v: f64, m: u32) -> f64 {
    let p = binomial_pmf(u, m);
    let q = binomial_pmf(v, m);
    discrete_kl(&p, &q)
}

fn binomial_pmf(theta: f64, m: u32) -> Vec<f64> {
    // product of m Bernoulli laws, by the same convolution as the aggregate law
    poisson_binomial(&vec![theta; m as usize])
}

/// `sum_k p_k ln(p_k / q_k)` over two distributions on the same support.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(&a, &b)| xlogx_over(a, b)).sum()
}

/// `KL(p || q) = sum_e p(e) ln(p(e) / q(e))` between two tables.
pub fn relative_entropy(p: &Table, q: &Table) -> f64 {
    discrete_kl(p.as_slice(), q.as_slice())
}

/// Law of the number of successes of independent Bernoulli trials with the
/// given means, by sequential convolution. Length `probs.len() + 1`.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (done, &p) in probs.iter().enumerate() {
        for k in (0..=done + 1).rev() {
            let stay = pmf[k] * (1.0 - p);
            let step = if k > 0 { pmf[k - 1] * p } else { 0.0 };
            pmf[k] = stay + step;
        }
    }
    pmf
}

/// KL number of configuration `config` between parameters `theta` and `lambda`.
///
/// Detailed feedback: the sum of per-cell Bernoulli (`m = 1`) or binomial
/// divergences over the active cells. Aggregate feedback: the divergence
/// between the laws of the total reward, which requires `m = 1`. Returns
/// `+inf` when `lambda` puts zero mass where `theta` does not.
pub fn kl_divergence(theta: &Table, lambda: &Table, config: &Configuration, mode: FeedbackMode, m: u32) -> Result<f64> {
    if theta.rows() != lambda.rows() || theta.cols() != lambda.cols() || theta.rows() != config.links() {
        return Err(Error::invalid("theta, lambda and configuration dimensions differ"));
    }
    if m == 0 {
        return Err(Error::invalid("packets per slot must be positive"));
    }
    match mode {
        FeedbackMode::Detailed => Ok(config
            .pairs()
            .map(|(i, j)| {
                if m == 1 {
                    bernoulli_kl(theta[(i, j)], lambda[(i, j)])
                } else {
                    binomial_kl(theta[(i, j)], lambda[(i, j)], m)
                }
            })
            .sum()),
        FeedbackMode::Aggregate => {
            if m != 1 {
                return Err(Error::invalid("aggregate divergence needs one packet per slot"));
            }
            let p = aggregate_pmf(theta, config);
            let q = aggregate_pmf(lambda, config);
            Ok(discrete_kl(&p, &q))
        }
    }
}

/// Law of `M • r` over `{0, .., n}` when every cell is Bernoulli.
pub(crate) fn aggregate_pmf(theta: &Table, config: &Configuration) -> Vec<f64> {
    let probs: Vec<f64> = config.pairs().map(|(i, j)| theta[(i, j)]).collect();
    let mut pmf = poisson_binomial(&probs);
    pmf.resize(config.links() + 1, 0.0);
    pmf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli_kl(0.3, 0.3), 0.0);
        // 0.5 ln 2 + 0.5 ln(2/3)
        assert!((bernoulli_kl(0.5, 0.25) - 0.143_841_036_225_890_42).abs() < 1e-15);
        assert_eq!(bernoulli_kl(0.5, 0.0), f64::INFINITY);
        assert_eq!(bernoulli_kl(0.0, 0.5), 2f64.ln());
        assert_eq!(bernoulli_kl(1.0, 1.0), 0.0);
    }

    #[test]
    fn binomial_is_m_times_bernoulli() {
        for (u, v) in [(0.3, 0.6), (0.9, 0.2), (0.5, 0.25)] {
            for m in [1, 2, 4, 7] {
                let lhs = binomial_kl(u, v, m);
                assert!((lhs - m as f64 * bernoulli_kl(u, v)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poisson_binomial_examples() {
        assert_eq!(poisson_binomial(&[0.3]), [0.7, 0.3]);
        assert_eq!(poisson_binomial(&[0.5, 0.5]), [0.25, 0.5, 0.25]);
        assert_eq!(poisson_binomial(&[]), [1.0]);
    }

    #[test]
    fn divergence_modes() {
        let theta = Table::from_rows(&[[0.5, 0.2], [0.3, 0.9]]).unwrap();
        let lambda = Table::from_rows(&[[0.25, 0.2], [0.3, 0.6]]).unwrap();
        let diag = Configuration::from_channels(&[0, 1]);
        let d = kl_divergence(&theta, &lambda, &diag, FeedbackMode::Detailed, 1).unwrap();
        assert!((d - bernoulli_kl(0.5, 0.25) - bernoulli_kl(0.9, 0.6)).abs() < 1e-15);
        let a = kl_divergence(&theta, &lambda, &diag, FeedbackMode::Aggregate, 1).unwrap();
        assert!(a <= d);
        assert_eq!(kl_divergence(&theta, &theta, &diag, FeedbackMode::Aggregate, 1).unwrap(), 0.0);
        assert!(kl_divergence(&theta, &lambda, &diag, FeedbackMode::Aggregate, 2).is_err());
        let zero = Table::zeros(2, 2);
        assert_eq!(
            kl_divergence(&theta, &zero, &diag, FeedbackMode::Detailed, 1).unwrap(),
            f64::INFINITY
        );
    }
}
