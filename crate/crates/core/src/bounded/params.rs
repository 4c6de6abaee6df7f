//! Closed-form parameter evaluators for the bounded-agent guarantees.
//!
//! The interesting magnitudes are astronomically large, so the branching
//! requirement is exposed symbolically (base and exponent) rather than
//! evaluated.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{rat, rat_one, to_f64, Rat};

/// Hoeffding sample count for estimating one posterior ratio within
/// `epsilon` except with probability `delta_prime`:
/// `ceil(ln(2/delta') / (2 epsilon^2))` (two-sided constant).
pub fn required_sample_size(epsilon: &Rat, delta_prime: &Rat) -> Result<u64> {
    for (name, v) in [("epsilon", epsilon), ("delta'", delta_prime)] {
        if v <= &Rat::zero() || v >= &rat_one() {
            return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in (0,1)")));
        }
    }
    let eps = to_f64(epsilon);
    let del = to_f64(delta_prime);
    let raw = (2.0 / del).ln() / (2.0 * eps * eps);
    Ok((raw.ceil() as u64).max(1))
}

/// Per-task parameters making bounded agents statistically
/// indistinguishable (within `rho`) from exact reasoners.
#[derive(Debug, Clone)]
pub struct WannabeParams {
    pub rho: Rat,
    pub alpha: Rat,
    /// Post-conditioning rounds `R' = 9 M^2 N^7 / (delta epsilon)^2`.
    pub rounds_post_prior: Rat,
    /// Branching requirement `B' = (11/alpha)^{R'^2} / rho^2`, symbolically.
    pub branching_base: Rat,
    pub branching_exponent: Rat,
    pub branching_log10: f64,
    /// Bits per message `ceil(log2(R' / (rho alpha))) + 2`.
    pub bits_per_message: u32,
    /// Displayed integer exponent numerators: `729 M^6 N^21` and
    /// `18 M^2 N^7`.
    pub exponent_numerator_main: BigInt,
    pub exponent_numerator_rho: BigInt,
    /// The same exponents with the `(delta epsilon)` powers applied.
    pub exponent_main: Rat,
    pub exponent_rho: Rat,
}

/// Evaluates the sampled-agent parameter formulas.
pub fn wannabe_params(
    num_tasks: u64,
    num_agents: u64,
    epsilon: &Rat,
    delta_agree: &Rat,
    rho: &Rat,
    alpha: &Rat,
) -> Result<WannabeParams> {
    if num_tasks == 0 || num_agents < 2 {
        return Err(Error::ParameterOutOfRange("need M >= 1 and N >= 2".into()));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta_agree)] {
        if v <= &Rat::zero() || v >= &rat_one() {
            return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in (0,1)")));
        }
    }
    if rho <= &Rat::zero() || rho > &rat_one() {
        return Err(Error::ParameterOutOfRange(format!("rho = {rho} not in (0,1]")));
    }
    let lo = epsilon.clone() / rat(50, 1);
    let hi = epsilon.clone() / rat(40, 1);
    if alpha < &lo || alpha > &hi {
        return Err(Error::ParameterOutOfRange(format!(
            "alpha = {alpha} outside [eps/50, eps/40] = [{lo}, {hi}]"
        )));
    }

    let m = BigInt::from(num_tasks);
    let n = BigInt::from(num_agents);
    let de = delta_agree.clone() * epsilon.clone();
    let de2 = de.clone() * de.clone();

    let rounds_numerator = BigInt::from(9) * m.pow(2) * n.pow(7);
    let rounds_post_prior = Rat::from_integer(rounds_numerator.clone()) / de2.clone();

    let branching_base = rat(11, 1) / alpha.clone();
    let branching_exponent = rounds_post_prior.clone() * rounds_post_prior.clone();
    let branching_log10 = to_f64(&branching_exponent) * to_f64(&branching_base).log10()
        + 2.0 * (1.0 / to_f64(rho)).log10();

    let bits_arg = rounds_post_prior.clone() / (rho.clone() * alpha.clone());
    let bits_per_message = to_f64(&bits_arg).log2().ceil() as u32 + 2;

    let exponent_numerator_main = BigInt::from(729) * m.pow(6) * n.pow(21);
    let exponent_numerator_rho = BigInt::from(18) * m.pow(2) * n.pow(7);
    let de6 = de2.clone() * de2.clone() * de2.clone();
    let exponent_main = Rat::from_integer(exponent_numerator_main.clone()) / de6;
    let exponent_rho = Rat::from_integer(exponent_numerator_rho.clone()) / de2;

    Ok(WannabeParams {
        rho: rho.clone(),
        alpha: alpha.clone(),
        rounds_post_prior,
        branching_base,
        branching_exponent,
        branching_log10,
        bits_per_message,
        exponent_numerator_main,
        exponent_numerator_rho,
        exponent_main,
        exponent_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_sample_counts() {
        assert_eq!(required_sample_size(&rat(1, 10), &rat(1, 50)).unwrap(), 231);
        assert_eq!(required_sample_size(&rat(1, 2), &rat(1, 2)).unwrap(), 3);
        // As delta' -> 1 the ln 2 term keeps at least one sample.
        assert!(required_sample_size(&rat(1, 2), &rat(99, 100)).unwrap() >= 1);
    }

    #[test]
    fn displayed_constants_for_two_agents_one_task() {
        let p = wannabe_params(1, 2, &rat(1, 2), &rat(1, 2), &rat(1, 2), &rat(1, 100)).unwrap();
        assert_eq!(p.exponent_numerator_main, BigInt::from(1_528_823_808u64));
        assert_eq!(p.exponent_numerator_rho, BigInt::from(2304u64));
        assert_eq!(p.branching_base, rat(1100, 1));
        assert!(!p.exponent_main.is_zero());
    }

    #[test]
    fn branching_grows_as_rho_or_epsilon_shrink() {
        let base = wannabe_params(1, 2, &rat(1, 2), &rat(1, 2), &rat(1, 2), &rat(1, 100)).unwrap();
        let small_rho =
            wannabe_params(1, 2, &rat(1, 2), &rat(1, 2), &rat(1, 4), &rat(1, 100)).unwrap();
        assert!(small_rho.branching_log10 > base.branching_log10);
        let small_eps =
            wannabe_params(1, 2, &rat(1, 4), &rat(1, 2), &rat(1, 2), &rat(1, 200)).unwrap();
        assert!(small_eps.branching_log10 > base.branching_log10);
    }

    #[test]
    fn alpha_window_is_validated() {
        assert!(wannabe_params(1, 2, &rat(1, 2), &rat(1, 2), &rat(1, 2), &rat(1, 30)).is_err());
        assert!(wannabe_params(1, 2, &rat(1, 2), &rat(1, 2), &rat(1, 2), &rat(1, 500)).is_err());
    }
}
