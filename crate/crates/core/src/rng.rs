//! Counter-based normal sampler.
//!
//! Element `i` of a stream is a pure function of `(seed, i)`:
//!
//! 1. `u = splitmix64_finalize(seed + c * 0x9E3779B97F4A7C15)` for counters
//!    `c = 2*(i/2)` and `2*(i/2) + 1`;
//! 2. each `u` becomes a uniform in (0, 1] as `((u >> 11) + 1) * 2^-53`;
//! 3. Box–Muller turns the pair into `r*cos(θ)` (even `i`) and `r*sin(θ)`
//!    (odd `i`).
//!
//! The recipe uses only integer ops and libm, so other implementations can
//! regenerate the same matrices.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output for counter `counter` of stream `seed`.
pub fn mix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on (0, 1].
pub fn uniform(seed: u64, counter: u64) -> f64 {
    ((mix64(seed, counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal element `index` of stream `seed`.
pub fn standard_normal(seed: u64, index: u64) -> f64 {
    let pair = index & !1;
    let u1 = uniform(seed, pair);
    let u2 = uniform(seed, pair + 1);
    let r = libm::sqrt(-2.0 * libm::log(u1));
    let theta = 2.0 * core::f64::consts::PI * u2;
    if index & 1 == 0 {
        r * libm::cos(theta)
    } else {
        r * libm::sin(theta)
    }
}

/// Independent stream for sub-task `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ 0xD1B5_4A32_D192_ED03, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of SplitMix64 seeded with 0.
        assert_eq!(mix64(0, 1), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix64(0, 2), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn uniform_range() {
        for c in 0..10_000 {
            let u = uniform(42, c);
            assert!(u > 0.0 && u <= 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let n = 200_000u64;
        let xs = (0..n).map(|i| standard_normal(9, i));
        let (s, s2) = xs.fold((0.0, 0.0), |(s, s2), x| (s + x, s2 + x * x));
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
