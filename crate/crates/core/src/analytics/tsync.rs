//! Barrier time of `m_p` columns that each retire a Binomial(K, 1 − s) number
//! of nonzero digits.
//!
//! `F(t) = P(max_i X_i <= t) = BinomCdf(t; K, 1 − s)^m_p` and
//! `E[T_sync] = Σ_{t=0}^{K−1} (1 − F(t))`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{domain, AnalyticsError};

/// Trials per Monte-Carlo shard. Fixed so a run's result does not depend on
/// how shards are spread over workers.
pub const MC_SHARD_TRIALS: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TsyncModel {
    k: u64,
    s: f64,
    m_p: u32,
}

impl TsyncModel {
    pub fn new(k: u64, s: f64, m_p: u32) -> Result<Self, AnalyticsError> {
        if k == 0 {
            return Err(domain("K", 0.0));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(domain("s", s));
        }
        if m_p == 0 {
            return Err(domain("m_p", 0.0));
        }
        Ok(Self { k, s, m_p })
    }

    /// The same columns clocked per digit instead of per operand: each of
    /// `k_operands` elements contributes `bw` Bernoulli trials.
    pub fn digit_clock(
        k_operands: u64,
        digit_sparsity: f64,
        m_p: u32,
        bw: u32,
    ) -> Result<Self, AnalyticsError> {
        Self::new(k_operands * bw as u64, digit_sparsity, m_p)
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn m_p(&self) -> u32 {
        self.m_p
    }

    /// Mean busy time of one column.
    pub fn mu(&self) -> f64 {
        self.k as f64 * (1.0 - self.s)
    }

    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.k as f64 * self.s * (1.0 - self.s))
    }

    /// `ln F(t)` for every `t` in `0..=K`, visited in order.
    fn for_each_log_cdf(&self, mut f: impl FnMut(u64, f64)) {
        let p = 1.0 - self.s;
        let m = self.m_p as f64;
        if p == 0.0 || p == 1.0 {
            // Degenerate binomial: every trial lands on 0 or on K.
            let x = if p == 0.0 { 0 } else { self.k };
            for t in 0..=self.k {
                f(t, if t >= x { 0.0 } else { f64::NEG_INFINITY });
            }
            return;
        }
        let (ln_p, ln_q) = (libm::log(p), libm::log1p(-p));
        let kf = self.k as f64;
        let ln_k_fact = libm::lgamma(kf + 1.0);
        let mut log_cdf = f64::NEG_INFINITY;
        for t in 0..=self.k {
            let j = t as f64;
            let ln_pmf = ln_k_fact - libm::lgamma(j + 1.0) - libm::lgamma(kf - j + 1.0)
                + j * ln_p
                + (kf - j) * ln_q;
            log_cdf = log_add_exp(log_cdf, ln_pmf);
            let value = if t == self.k { 0.0 } else { log_cdf.min(0.0) };
            f(t, m * value);
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

/// `P(T_sync <= t)`.
pub fn tsync_cdf(model: &TsyncModel, t: u64) -> Result<f64, AnalyticsError> {
    if t > model.k {
        return Err(domain("t", t as f64));
    }
    let mut out = 0.0;
    model.for_each_log_cdf(|i, ln_f| {
        if i == t {
            out = libm::exp(ln_f);
        }
    });
    Ok(out)
}

/// Closed-form expectation of the barrier time.
pub fn tsync_expectation(model: &TsyncModel) -> f64 {
    let mut e = 0.0;
    model.for_each_log_cdf(|t, ln_f| {
        if t < model.k {
            e += -libm::expm1(ln_f);
        }
    });
    e
}

/// Fraction of cycles saved against a dense `K`-cycle reduction.
pub fn tsync_saving(model: &TsyncModel) -> f64 {
    1.0 - tsync_expectation(model) / model.k as f64
}

/// Sufficient statistics of a block of Monte-Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ShardMoments {
    pub trials: u64,
    pub sum: u128,
    pub sum_sq: u128,
}

impl ShardMoments {
    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    pub fn from_moments(m: ShardMoments, seed: u64) -> Self {
        let n = m.trials as f64;
        let mean = m.sum as f64 / n;
        let var = if m.trials > 1 {
            ((m.sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: libm::sqrt(var / n),
            trials: m.trials,
            seed,
        }
    }
}

/// Number of shards a run of `trials` is split into.
pub fn shard_count(trials: u64) -> u64 {
    trials.div_ceil(MC_SHARD_TRIALS)
}

/// Runs shard `index` of a `trials`-trial experiment. Each shard owns the
/// ChaCha stream `index` of `seed`.
pub fn monte_carlo_shard(model: &TsyncModel, trials: u64, seed: u64, index: u64) -> ShardMoments {
    let start = index * MC_SHARD_TRIALS;
    let n = trials.saturating_sub(start).min(MC_SHARD_TRIALS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let binom = Binomial::new(model.k, 1.0 - model.s).expect("validated model");
    let mut out = ShardMoments::default();
    for _ in 0..n {
        let t = (0..model.m_p)
            .map(|_| binom.sample(&mut rng))
            .max()
            .unwrap_or(0) as u128;
        out.trials += 1;
        out.sum += t;
        out.sum_sq += t * t;
    }
    out
}

/// Sample mean and standard error of `max` over `m_p` binomial draws.
pub fn tsync_monte_carlo(
    model: &TsyncModel,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloEstimate, AnalyticsError> {
    if trials == 0 {
        return Err(domain("trials", 0.0));
    }
    let moments = (0..shard_count(trials))
        .map(|i| monte_carlo_shard(model, trials, seed, i))
        .fold(ShardMoments::default(), ShardMoments::merge);
    Ok(MonteCarloEstimate::from_moments(moments, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let m = TsyncModel::new(576, 0.38, 32).unwrap();
        let e = tsync_expectation(&m);
        assert!((e - 381.07).abs() < 0.01, "{e}");
        assert!((tsync_saving(&m) - 0.33841).abs() < 1e-4);
    }

    #[test]
    fn small_cdf() {
        let m = TsyncModel::new(2, 0.5, 1).unwrap();
        assert!((tsync_cdf(&m, 1).unwrap() - 0.75).abs() < 1e-12);
        assert!((tsync_cdf(&m, 0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(tsync_cdf(&m, 2).unwrap(), 1.0);
        assert!(tsync_cdf(&m, 3).is_err());
    }

    #[test]
    fn degenerate_sparsity() {
        let all_zero = TsyncModel::new(50, 1.0, 4).unwrap();
        assert_eq!(tsync_cdf(&all_zero, 0).unwrap(), 1.0);
        assert_eq!(tsync_expectation(&all_zero), 0.0);
        let dense = TsyncModel::new(50, 0.0, 4).unwrap();
        assert_eq!(tsync_expectation(&dense), 50.0);
        assert_eq!(tsync_monte_carlo(&all_zero, 10, 1).unwrap().mean, 0.0);
    }

    #[test]
    fn single_column_is_binomial_mean() {
        let m = TsyncModel::new(1000, 0.3, 1).unwrap();
        assert!((tsync_expectation(&m) - 700.0).abs() < 0.5);
    }

    #[test]
    fn cdf_is_monotone() {
        let m = TsyncModel::new(300, 0.62, 8).unwrap();
        let mut prev = 0.0;
        for t in 0..=300 {
            let f = tsync_cdf(&m, t).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn large_k_stays_finite() {
        let m = TsyncModel::new(10_000, 0.38, 32).unwrap();
        let e = tsync_expectation(&m);
        assert!(e > m.mu() && e < 10_000.0);
    }

    #[test]
    fn invalid_models() {
        assert!(TsyncModel::new(0, 0.5, 1).is_err());
        assert!(TsyncModel::new(10, 1.5, 1).is_err());
        assert!(TsyncModel::new(10, f64::NAN, 1).is_err());
        assert!(TsyncModel::new(10, 0.5, 0).is_err());
        let m = TsyncModel::new(10, 0.5, 1).unwrap();
        assert!(tsync_monte_carlo(&m, 0, 1).is_err());
    }

    #[test]
    fn monte_carlo_is_seeded_and_agrees() {
        let m = TsyncModel::new(576, 0.38, 32).unwrap();
        let a = tsync_monte_carlo(&m, 20_000, 7).unwrap();
        assert_eq!(a, tsync_monte_carlo(&m, 20_000, 7).unwrap());
        assert!((a.mean - tsync_expectation(&m)).abs() < 3.0 * a.stderr);
    }

    #[test]
    fn digit_clock_scales_k() {
        let m = TsyncModel::digit_clock(576, 0.4, 32, 4).unwrap();
        assert_eq!(m.k(), 2304);
    }
}
