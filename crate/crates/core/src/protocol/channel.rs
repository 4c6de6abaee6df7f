//! Message channels: exact, three-bucket, likelihood-bounded, and smoothed.

use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{pow2_neg, rat, rat_one, Rat};

/// Three-way comparison of a sender's expectation against the mediator's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bucket {
    High,
    Medium,
    Low,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::High, Bucket::Medium, Bucket::Low];

    pub fn label(&self) -> &'static str {
        match self {
            Bucket::High => "high",
            Bucket::Medium => "medium",
            Bucket::Low => "low",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelKind {
    Continuous,
    Discretized,
    BbfDiscretized,
    Smoothed,
}

/// Channel configuration.
///
/// A smoothed channel carries payloads on the `2^-bits` grid offset by a
/// discrete triangular noise term of half-width `alpha = offset_range *
/// 2^-bits`; the likelihood-bounded channel randomizes the three-bucket
/// codeword so that no single message shifts any state's likelihood ratio
/// beyond `(1 - 2 theta) / theta`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelSpec {
    Continuous,
    Discretized,
    BbfDiscretized {
        /// Buffer parameter in (0, 1/3].
        theta: Rat,
    },
    Smoothed {
        /// Bits per message; payloads are multiples of `2^-bits`.
        bits: u32,
        /// Noise offsets range over `-offset_range..=offset_range` grid steps.
        offset_range: u32,
    },
}

impl ChannelSpec {
    pub fn kind(&self) -> ChannelKind {
        match self {
            ChannelSpec::Continuous => ChannelKind::Continuous,
            ChannelSpec::Discretized => ChannelKind::Discretized,
            ChannelSpec::BbfDiscretized { .. } => ChannelKind::BbfDiscretized,
            ChannelSpec::Smoothed { .. } => ChannelKind::Smoothed,
        }
    }

    pub fn bbf(theta: Rat) -> Result<Self> {
        if theta <= Rat::zero() || theta > rat(1, 3) {
            return Err(Error::InvalidChannel(format!("theta = {theta} not in (0, 1/3]")));
        }
        Ok(ChannelSpec::BbfDiscretized { theta })
    }

    pub fn smoothed(bits: u32, offset_range: u32) -> Result<Self> {
        if bits == 0 || bits > 32 {
            return Err(Error::InvalidChannel(format!("bits = {bits} outside 1..=32")));
        }
        if offset_range == 0 {
            return Err(Error::InvalidChannel("offset range must be positive".into()));
        }
        Ok(ChannelSpec::Smoothed { bits, offset_range })
    }

    /// Picks the smallest smoothed channel whose noise half-width lies in
    /// `[epsilon/50, epsilon/40]`, preferring a width near `target` when one
    /// is given.
    pub fn smoothed_for_epsilon(epsilon: &Rat, target: Option<&Rat>) -> Result<Self> {
        let lo = epsilon.clone() / rat(50, 1);
        let hi = epsilon.clone() / rat(40, 1);
        for bits in 1..=32u32 {
            let step = pow2_neg(bits);
            // offset_range candidates with lo <= L * step <= hi.
            let min_l = (lo.clone() / step.clone()).ceil();
            let max_l = (hi.clone() / step.clone()).floor();
            if min_l > max_l || max_l < rat_one() {
                continue;
            }
            let pick = match target {
                Some(t) => {
                    let ideal = (t.clone() / step.clone()).round();
                    if ideal < min_l {
                        min_l.clone()
                    } else if ideal > max_l {
                        max_l.clone()
                    } else {
                        ideal
                    }
                }
                None => min_l.clone(),
            };
            let l: i64 = pick
                .to_integer()
                .try_into()
                .map_err(|_| Error::InvalidChannel("offset range overflow".into()))?;
            if l >= 1 {
                return Self::smoothed(bits, l as u32);
            }
        }
        Err(Error::InvalidChannel(format!(
            "no grid noise width fits [{lo}, {hi}]"
        )))
    }

    /// Noise half-width `alpha` for the smoothed channel.
    pub fn alpha(&self) -> Option<Rat> {
        match self {
            ChannelSpec::Smoothed { bits, offset_range } => {
                Some(Rat::from_integer((*offset_range as i64).into()) * pow2_neg(*bits))
            }
            _ => None,
        }
    }

    /// Likelihood-ratio bound `beta = (1 - 2 theta) / theta`.
    pub fn likelihood_ratio_bound(&self) -> Option<Rat> {
        match self {
            ChannelSpec::BbfDiscretized { theta } => {
                Some((rat_one() - rat(2, 1) * theta.clone()) / theta.clone())
            }
            _ => None,
        }
    }

    pub fn bits_per_message(&self) -> BitCost {
        match self {
            ChannelSpec::Continuous => BitCost::Unbounded,
            ChannelSpec::Discretized | ChannelSpec::BbfDiscretized { .. } => BitCost::Bits(2),
            ChannelSpec::Smoothed { bits, .. } => BitCost::Bits(*bits),
        }
    }
}

/// Bits carried by one message; exact real-valued payloads are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitCost {
    Unbounded,
    Bits(u32),
}

impl BitCost {
    pub fn finite(&self) -> Option<u32> {
        match self {
            BitCost::Unbounded => None,
            BitCost::Bits(b) => Some(*b),
        }
    }
}

/// Draws an integer offset from the discrete triangular distribution
/// `P[r = x] = (range - |x|) / range^2` on `-range..=range`.
pub fn smoothed_offset<R: Rng + ?Sized>(range: u32, rng: &mut R) -> Result<i64> {
    if range == 0 {
        return Err(Error::InvalidChannel("offset range must be positive".into()));
    }
    let l = range as i64;
    let total = (l * l) as u64;
    let mut pick = rng.random_range(0..total) as i64;
    for x in -l..=l {
        let weight = l - x.abs();
        if pick < weight {
            return Ok(x);
        }
        pick -= weight;
    }
    unreachable!("triangular weights sum to range^2");
}

/// Probability of one triangular offset value.
pub fn smoothed_offset_pmf(range: u32, x: i64) -> Rat {
    let l = range as i64;
    if x.abs() > l {
        return Rat::zero();
    }
    rat(l - x.abs(), l * l)
}

/// Three-bucket comparison with threshold `epsilon / 4`; equality maps to
/// `Medium` (the thresholds are strict).
pub fn discretize_bucket(e_sender: &Rat, e_mediator: &Rat, epsilon: &Rat) -> Bucket {
    let margin = epsilon.clone() / rat(4, 1);
    if e_sender > &(e_mediator.clone() + margin.clone()) {
        Bucket::High
    } else if e_sender < &(e_mediator.clone() - margin) {
        Bucket::Low
    } else {
        Bucket::Medium
    }
}

/// Transmits a bucket through the likelihood-bounded channel: the matching
/// codeword with probability `1 - 2 theta`, each other codeword with
/// probability `theta`.
pub fn bbf_channel<R: Rng + ?Sized>(bucket: Bucket, theta: &Rat, rng: &mut R) -> Result<Bucket> {
    if theta <= &Rat::zero() || theta > &rat(1, 3) {
        return Err(Error::InvalidChannel(format!("theta = {theta} not in (0, 1/3]")));
    }
    // Draw an exact uniform rational on [0, 1) with 64-bit resolution.
    let u = Rat::new(rng.random_range(0..u64::MAX).into(), num_bigint::BigInt::from(u64::MAX));
    let others: Vec<Bucket> = Bucket::ALL.into_iter().filter(|b| *b != bucket).collect();
    if u < theta.clone() {
        Ok(others[0])
    } else if u < rat(2, 1) * theta.clone() {
        Ok(others[1])
    } else {
        Ok(bucket)
    }
}

/// Likelihood of observing `codeword` when the matching codeword is
/// `intended`: `1 - 2 theta` on a match, `theta` otherwise.
pub fn bbf_likelihood(intended: Bucket, codeword: Bucket, theta: &Rat) -> Rat {
    if intended == codeword {
        rat_one() - rat(2, 1) * theta.clone()
    } else {
        theta.clone()
    }
}

/// Max pairwise spread check: true iff all expectations are within
/// `epsilon` of each other.
pub fn check_agreement(expectations: &[Rat], epsilon: &Rat) -> bool {
    match (expectations.iter().max(), expectations.iter().min()) {
        (Some(max), Some(min)) => max.clone() - min.clone() <= *epsilon,
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn offset_range_one_is_always_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            assert_eq!(smoothed_offset(1, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn offset_pmf_matches_formula_and_sums_to_one() {
        // range 4: P[0]=4/16, P[+-1]=3/16, P[+-2]=2/16, P[+-3]=1/16, P[+-4]=0.
        assert_eq!(smoothed_offset_pmf(4, 0), rat(4, 16));
        assert_eq!(smoothed_offset_pmf(4, 1), rat(3, 16));
        assert_eq!(smoothed_offset_pmf(4, -3), rat(1, 16));
        assert_eq!(smoothed_offset_pmf(4, 4), Rat::zero());
        let total: Rat = (-4..=4).map(|x| smoothed_offset_pmf(4, x)).sum();
        assert_eq!(total, rat_one());
    }

    #[test]
    fn offset_mean_is_near_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 100_000;
        let sum: i64 = (0..n).map(|_| smoothed_offset(4, &mut rng).unwrap()).sum();
        let mean = sum as f64 / n as f64;
        // Var = E[x^2] = 2(9*1+4*2+1*3)/16 = 2.5; 3 sigma of the mean.
        let sigma = (2.5f64 / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} vs 3 sigma {}", 3.0 * sigma);
    }

    #[test]
    fn bucket_thresholds_are_strict() {
        let eps = rat(1, 10);
        assert_eq!(discretize_bucket(&rat(1, 2), &rat(1, 2), &eps), Bucket::Medium);
        assert_eq!(
            discretize_bucket(&(rat(1, 2) + rat(1, 20)), &rat(1, 2), &eps),
            Bucket::High
        );
        // Exactly at the threshold stays Medium.
        assert_eq!(
            discretize_bucket(&(rat(1, 2) - rat(1, 40)), &rat(1, 2), &eps),
            Bucket::Medium
        );
    }

    #[test]
    fn bbf_channel_frequencies_and_ratio_bounds() {
        let theta = rat(1, 4);
        let spec = ChannelSpec::bbf(theta.clone()).unwrap();
        assert_eq!(spec.likelihood_ratio_bound().unwrap(), rat(2, 1));
        assert_eq!(
            ChannelSpec::bbf(rat(1, 5)).unwrap().likelihood_ratio_bound().unwrap(),
            rat(3, 1)
        );
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut counts = [0u32; 3];
        let n = 30_000;
        for _ in 0..n {
            match bbf_channel(Bucket::High, &theta, &mut rng).unwrap() {
                Bucket::High => counts[0] += 1,
                Bucket::Medium => counts[1] += 1,
                Bucket::Low => counts[2] += 1,
            }
        }
        let f = |c: u32| c as f64 / n as f64;
        assert!((f(counts[0]) - 0.5).abs() < 0.02);
        assert!((f(counts[1]) - 0.25).abs() < 0.02);
        assert!((f(counts[2]) - 0.25).abs() < 0.02);
        // theta = 1/3: all likelihoods equal, ratio 1.
        let uninformative = rat(1, 3);
        for a in Bucket::ALL {
            for b in Bucket::ALL {
                let l = bbf_likelihood(a, b, &uninformative);
                assert_eq!(l, rat(1, 3));
            }
        }
    }

    #[test]
    fn agreement_check_examples() {
        assert!(check_agreement(&[rat(1, 2), rat(1, 2), rat(1, 2)], &Rat::zero()));
        assert!(!check_agreement(&[Rat::zero(), rat_one()], &rat(1, 2)));
        // {0.10, 0.15, 0.19} within 0.1 (max gap 0.09).
        assert!(check_agreement(&[rat(1, 10), rat(3, 20), rat(19, 100)], &rat(1, 10)));
    }

    #[test]
    fn smoothed_channel_selection() {
        // b=7, L=2 gives alpha = 1/64 inside [eps/50, eps/40] for eps = 0.7.
        let spec = ChannelSpec::smoothed_for_epsilon(&rat(7, 10), None).unwrap();
        let alpha = spec.alpha().unwrap();
        assert!(alpha >= rat(7, 500) && alpha <= rat(7, 400));
        // eps = 1/2 has no valid width until b = 8 (L = 3).
        let spec = ChannelSpec::smoothed_for_epsilon(&rat(1, 2), Some(&rat(1, 80))).unwrap();
        assert_eq!(spec, ChannelSpec::Smoothed { bits: 8, offset_range: 3 });
    }
}
