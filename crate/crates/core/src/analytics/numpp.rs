//! Nonzero-digit (NumPP) statistics of 8-bit operand populations.
//!
//! [`numpp_distribution`] counts digits straight from the bit patterns rather
//! than through the encoder, so the two can be checked against each other.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use super::AnalyticsError;
use crate::encoding::{encode, DigitScheme};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NumPPHistogram {
    /// `counts[n]` operands have exactly `n` nonzero digits.
    counts: Vec<u64>,
    total: u64,
}

impl NumPPHistogram {
    pub fn new(bw: usize) -> Self {
        Self {
            counts: vec![0; bw + 1],
            total: 0,
        }
    }

    pub fn add(&mut self, numpp: usize, n: u64) {
        self.counts[numpp] += n;
        self.total += n;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, numpp: usize) -> u64 {
        self.counts.get(numpp).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Sums counts over each range of NumPP values.
    pub fn buckets(&self, ranges: &[RangeInclusive<usize>]) -> Vec<u64> {
        ranges
            .iter()
            .map(|r| r.clone().map(|n| self.get(n)).sum())
            .collect()
    }

    pub fn mean(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let weighted: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(n, &c)| n as u64 * c)
            .sum();
        weighted as f64 / self.total as f64
    }
}

/// Nonzero digits of `v` under `scheme`, read from its bit pattern.
/// `None` when the scheme cannot represent `v`.
fn nnz_from_bits(v: i8, scheme: &DigitScheme) -> Option<usize> {
    let u = v as u8 as u32;
    match scheme {
        // A radix-4 digit is zero exactly when its bit triplet is 000 or 111.
        DigitScheme::Radix4Mbe => Some(
            (0..4)
                .filter(|bw| {
                    let t = ((u << 1) >> (2 * bw)) & 0b111;
                    t != 0 && t != 0b111
                })
                .count(),
        ),
        DigitScheme::Radix2TwosComplement { .. } => Some(u.count_ones() as usize),
        DigitScheme::Radix2SignMagnitude { .. } => {
            (v != i8::MIN).then(|| v.unsigned_abs().count_ones() as usize)
        }
        DigitScheme::PluggableRadix4(table) => {
            Some(table.digits_for(v).iter().filter(|&&d| d != 0).count())
        }
    }
}

fn check_8bit(scheme: &DigitScheme) -> Result<(), AnalyticsError> {
    if scheme.operand_width() == 8 {
        Ok(())
    } else {
        Err(AnalyticsError::UnsupportedScheme(scheme.name()))
    }
}

/// Exhaustive NumPP histogram over every encodable 8-bit value. Sign-magnitude
/// cannot represent −128, so its histogram covers 255 values.
pub fn numpp_distribution(scheme: &DigitScheme) -> Result<NumPPHistogram, AnalyticsError> {
    check_8bit(scheme)?;
    let mut h = NumPPHistogram::new(scheme.bw());
    for v in i8::MIN..=i8::MAX {
        if let Some(n) = nnz_from_bits(v, scheme) {
            h.add(n, 1);
        }
    }
    Ok(h)
}

/// NumPP histogram of the elements of `m`, from bit patterns.
pub fn matrix_histogram(
    m: &Matrix<i8>,
    scheme: &DigitScheme,
) -> Result<NumPPHistogram, AnalyticsError> {
    check_8bit(scheme)?;
    let mut per_value = [0u64; 256];
    for &v in m.as_slice() {
        per_value[v as u8 as usize] += 1;
    }
    let mut h = NumPPHistogram::new(scheme.bw());
    for (byte, &count) in per_value.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let v = byte as u8 as i8;
        match nnz_from_bits(v, scheme) {
            Some(n) => h.add(n, count),
            None => {
                encode(v as i32, scheme)?;
            }
        }
    }
    Ok(h)
}

/// Mean nonzero digits per element, through the encoder.
pub fn avg_numpp(m: &Matrix<i8>, scheme: &DigitScheme) -> Result<f64, AnalyticsError> {
    check_8bit(scheme)?;
    if m.as_slice().is_empty() {
        return Err(AnalyticsError::EmptyMatrix);
    }
    let mut lut = [None; 256];
    let mut total = 0u64;
    for &v in m.as_slice() {
        let slot = &mut lut[v as u8 as usize];
        let n = match *slot {
            Some(n) => n,
            None => {
                let n = encode(v as i32, scheme)?.nnz() as u64;
                *slot = Some(n);
                n
            }
        };
        total += n;
    }
    Ok(total as f64 / m.as_slice().len() as f64)
}

/// Fraction of zero digits among all encoded digits of `m`.
pub fn encoding_sparsity(m: &Matrix<i8>, scheme: &DigitScheme) -> Result<f64, AnalyticsError> {
    Ok(1.0 - avg_numpp(m, scheme)? / scheme.bw() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::DigitTable;

    #[test]
    fn mbe_row() {
        let h = numpp_distribution(&DigitScheme::Radix4Mbe).unwrap();
        assert_eq!(h.counts(), &[1, 12, 54, 108, 81]);
        assert_eq!(h.total(), 256);
    }

    #[test]
    fn twos_complement_buckets() {
        let h = numpp_distribution(&DigitScheme::twos_complement(8).unwrap()).unwrap();
        assert_eq!(
            h.buckets(&[7..=8, 5..=6, 4..=4, 2..=3, 0..=1]),
            vec![9, 84, 70, 84, 9]
        );
        assert_eq!(h.total(), 256);
    }

    #[test]
    fn sign_magnitude_skips_min() {
        let h = numpp_distribution(&DigitScheme::sign_magnitude(8).unwrap()).unwrap();
        assert_eq!(h.total(), 255);
        assert_eq!(h.get(7), 2);
    }

    #[test]
    fn bit_patterns_agree_with_encoder() {
        let schemes = [
            DigitScheme::Radix4Mbe,
            DigitScheme::twos_complement(8).unwrap(),
            DigitScheme::sign_magnitude(8).unwrap(),
            DigitScheme::pluggable(DigitTable::mbe()),
        ];
        for s in &schemes {
            let h = numpp_distribution(s).unwrap();
            let mut recount = NumPPHistogram::new(s.bw());
            for v in -128..=127 {
                if let Ok(e) = encode(v, s) {
                    recount.add(e.nnz() as usize, 1);
                }
            }
            assert_eq!(h, recount, "{}", s.name());
        }
    }

    #[test]
    fn averages() {
        let zeros = Matrix::<i8>::zeros(3, 3);
        assert_eq!(avg_numpp(&zeros, &DigitScheme::Radix4Mbe), Ok(0.0));
        assert_eq!(encoding_sparsity(&zeros, &DigitScheme::Radix4Mbe), Ok(1.0));
        let m = Matrix::new(1, 2, vec![91i8, 124]).unwrap();
        assert_eq!(avg_numpp(&m, &DigitScheme::Radix4Mbe), Ok(3.0));
        assert_eq!(
            avg_numpp(&Matrix::<i8>::zeros(0, 4), &DigitScheme::Radix4Mbe),
            Err(AnalyticsError::EmptyMatrix)
        );
        assert!(numpp_distribution(&DigitScheme::twos_complement(16).unwrap()).is_err());
    }

    #[test]
    fn histogram_mean_matches_average() {
        let m = Matrix::from_fn(17, 23, |r, c| ((r * 37 + c * 11) % 255) as i32 as i8);
        for s in [
            DigitScheme::Radix4Mbe,
            DigitScheme::twos_complement(8).unwrap(),
        ] {
            let h = matrix_histogram(&m, &s).unwrap();
            assert_eq!(h.total(), 17 * 23);
            assert!((h.mean() - avg_numpp(&m, &s).unwrap()).abs() < 1e-12);
        }
    }
}
