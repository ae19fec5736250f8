//! Signed-digit encoders.
//!
//! An encoder splits a multiplicand `A` into `BW` sub-operands so that
//! `A = Σ_bw digit[bw] · 2^shift(bw)`. Radix-4 schemes produce `operand_width / 2`
//! digits in `{-2..=2}`; radix-2 schemes produce `operand_width` digits in
//! `{-1, 0, 1}`. Digits are stored bit-weight ascending (index 0 is the least
//! significant sub-operand); the `Display` impl prints them most-significant first.

use alloc::sync::Arc;
use core::fmt;

use thiserror::Error;

/// Largest supported digit count (radix-2 at 32 bits).
pub const MAX_DIGITS: usize = 32;

/// Width of the radix-4 operand domain.
pub const RADIX4_WIDTH: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("value {value} is outside the {width}-bit operand range")]
    ValueOutOfRange { value: i64, width: u32 },
    #[error("-{} has no {width}-bit sign-magnitude representation", 1i64 << (width - 1))]
    SignMagnitudeOverflow { width: u32 },
    #[error("digit table entry for {value} is invalid: {reason}")]
    InvalidDigitTable { value: i32, reason: &'static str },
    #[error("radix-2 operand width must be in 2..=32, got {0}")]
    UnsupportedWidth(u32),
}

/// Radix of a digit scheme; fixes the per-digit weight shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Radix {
    Radix2,
    Radix4,
}

impl Radix {
    #[inline]
    pub const fn bits_per_digit(self) -> u32 {
        match self {
            Radix::Radix2 => 1,
            Radix::Radix4 => 2,
        }
    }

    #[inline]
    pub const fn max_digit(self) -> i8 {
        match self {
            Radix::Radix2 => 1,
            Radix::Radix4 => 2,
        }
    }
}

/// Representation used by radix-2 bit-serial encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BitSerialRepr {
    TwosComplement,
    SignMagnitude,
}

/// A user-supplied radix-4 digit table covering every 8-bit input.
///
/// Entries are indexed by the operand's two's-complement byte. A table is only
/// constructible if every entry reconstructs its input, so encoders built on it
/// are exact.
#[derive(Clone, PartialEq, Eq)]
pub struct DigitTable {
    entries: [[i8; 4]; 256],
}

impl DigitTable {
    /// Builds a table from `(value, digits)` pairs, digits bit-weight ascending.
    /// Every value in `-128..=127` must appear exactly once.
    pub fn from_entries<I>(entries: I) -> Result<Self, EncodingError>
    where
        I: IntoIterator<Item = (i32, [i8; 4])>,
    {
        let mut table = [[0i8; 4]; 256];
        let mut seen = [false; 256];
        for (value, digits) in entries {
            if !(-128..=127).contains(&value) {
                return Err(EncodingError::InvalidDigitTable {
                    value,
                    reason: "value outside -128..=127",
                });
            }
            let idx = (value as i8 as u8) as usize;
            if seen[idx] {
                return Err(EncodingError::InvalidDigitTable {
                    value,
                    reason: "duplicate entry",
                });
            }
            seen[idx] = true;
            table[idx] = digits;
        }
        if let Some(idx) = seen.iter().position(|s| !s) {
            return Err(EncodingError::InvalidDigitTable {
                value: idx as u8 as i8 as i32,
                reason: "missing entry",
            });
        }
        Self::from_array(table)
    }

    /// Builds a table from a 256-entry array indexed by `value as u8`.
    pub fn from_array(entries: [[i8; 4]; 256]) -> Result<Self, EncodingError> {
        for (idx, digits) in entries.iter().enumerate() {
            let value = idx as u8 as i8 as i32;
            if digits.iter().any(|d| !(-2..=2).contains(d)) {
                return Err(EncodingError::InvalidDigitTable {
                    value,
                    reason: "digit outside -2..=2",
                });
            }
            let rebuilt: i32 = digits
                .iter()
                .enumerate()
                .map(|(bw, &d)| (d as i32) << (2 * bw))
                .sum();
            if rebuilt != value {
                return Err(EncodingError::InvalidDigitTable {
                    value,
                    reason: "digits do not reconstruct the value",
                });
            }
        }
        Ok(Self { entries })
    }

    /// The MBE digits as a table; handy as a starting point for custom tables.
    pub fn mbe() -> Self {
        let mut entries = [[0i8; 4]; 256];
        for v in -128..=127i32 {
            let enc = encode_mbe(v as i8);
            entries[(v as i8 as u8) as usize].copy_from_slice(enc.digits());
        }
        Self { entries }
    }

    #[inline]
    pub fn digits_for(&self, value: i8) -> [i8; 4] {
        self.entries[value as u8 as usize]
    }
}

impl fmt::Debug for DigitTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DigitTable").finish_non_exhaustive()
    }
}

/// Which encoder decomposes the multiplicand.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DigitScheme {
    /// Modified Booth encoding of an 8-bit operand, four radix-4 digits.
    #[default]
    Radix4Mbe,
    /// Bit-serial two's complement; the most significant digit is negated.
    Radix2TwosComplement { width: u32 },
    /// Bit-serial sign-magnitude; every digit carries the operand's sign.
    Radix2SignMagnitude { width: u32 },
    /// Radix-4 encoder backed by a validated digit table.
    PluggableRadix4(Arc<DigitTable>),
}

impl DigitScheme {
    pub fn twos_complement(width: u32) -> Result<Self, EncodingError> {
        check_radix2_width(width)?;
        Ok(DigitScheme::Radix2TwosComplement { width })
    }

    pub fn sign_magnitude(width: u32) -> Result<Self, EncodingError> {
        check_radix2_width(width)?;
        Ok(DigitScheme::Radix2SignMagnitude { width })
    }

    pub fn pluggable(table: DigitTable) -> Self {
        DigitScheme::PluggableRadix4(Arc::new(table))
    }

    pub fn radix(&self) -> Radix {
        match self {
            DigitScheme::Radix4Mbe | DigitScheme::PluggableRadix4(_) => Radix::Radix4,
            DigitScheme::Radix2TwosComplement { .. } | DigitScheme::Radix2SignMagnitude { .. } => {
                Radix::Radix2
            }
        }
    }

    pub fn operand_width(&self) -> u32 {
        match self {
            DigitScheme::Radix4Mbe | DigitScheme::PluggableRadix4(_) => RADIX4_WIDTH,
            DigitScheme::Radix2TwosComplement { width }
            | DigitScheme::Radix2SignMagnitude { width } => *width,
        }
    }

    /// Number of bit-weight digits (`BW`).
    pub fn bw(&self) -> usize {
        (self.operand_width() / self.radix().bits_per_digit()) as usize
    }

    /// Smallest and largest encodable operand.
    pub fn value_range(&self) -> (i64, i64) {
        let w = self.operand_width();
        let hi = (1i64 << (w - 1)) - 1;
        match self {
            DigitScheme::Radix2SignMagnitude { .. } => (-hi, hi),
            _ => (-hi - 1, hi),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DigitScheme::Radix4Mbe => "mbe",
            DigitScheme::Radix2TwosComplement { .. } => "bit-serial-c",
            DigitScheme::Radix2SignMagnitude { .. } => "bit-serial-m",
            DigitScheme::PluggableRadix4(_) => "table",
        }
    }
}

fn check_radix2_width(width: u32) -> Result<(), EncodingError> {
    if (2..=MAX_DIGITS as u32).contains(&width) {
        Ok(())
    } else {
        Err(EncodingError::UnsupportedWidth(width))
    }
}

/// A multiplicand decomposed into bit-weighted signed digits.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct EncodedOperand {
    source: i32,
    radix: Radix,
    len: u8,
    nonzero: u32,
    digits: [i8; MAX_DIGITS],
}

impl EncodedOperand {
    fn from_digits(source: i32, radix: Radix, digits: &[i8]) -> Self {
        debug_assert!(digits.len() <= MAX_DIGITS);
        let mut buf = [0i8; MAX_DIGITS];
        buf[..digits.len()].copy_from_slice(digits);
        let nonzero = digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .fold(0u32, |m, (bw, _)| m | (1 << bw));
        Self {
            source,
            radix,
            len: digits.len() as u8,
            nonzero,
            digits: buf,
        }
    }

    /// The all-zero operand for a scheme with `bw` digits; used for padding.
    pub fn zero(radix: Radix, bw: usize) -> Self {
        Self {
            source: 0,
            radix,
            len: bw as u8,
            nonzero: 0,
            digits: [0; MAX_DIGITS],
        }
    }

    #[inline]
    pub fn source(&self) -> i32 {
        self.source
    }

    #[inline]
    pub fn radix(&self) -> Radix {
        self.radix
    }

    #[inline]
    pub fn digits(&self) -> &[i8] {
        &self.digits[..self.len as usize]
    }

    #[inline]
    pub fn digit(&self, bw: usize) -> i8 {
        self.digits()[bw]
    }

    /// Number of bit-weight digits (`BW`).
    #[inline]
    pub fn bw(&self) -> usize {
        self.len as usize
    }

    /// Left shift applied to the partial product of digit `bw`.
    #[inline]
    pub fn weight_shift(&self, bw: usize) -> u32 {
        bw as u32 * self.radix.bits_per_digit()
    }

    /// Number of nonzero digits, i.e. the NumPPs of this operand.
    #[inline]
    pub fn nnz(&self) -> u32 {
        self.nonzero.count_ones()
    }

    /// Bit `bw` is set iff `digit(bw) != 0`.
    #[inline]
    pub fn nonzero_mask(&self) -> u32 {
        self.nonzero
    }
}

impl fmt::Debug for EncodedOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EncodedOperand")
            .field("source", &self.source)
            .field("radix", &self.radix)
            .field("digits", &self.digits())
            .finish()
    }
}

impl fmt::Display for EncodedOperand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, d) in self.digits().iter().rev().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str("}")
    }
}

/// Radix-4 modified Booth encoding of an 8-bit operand.
///
/// `digit[bw] = -2·a[2bw+1] + a[2bw] + a[2bw-1]` with `a[-1] = 0`.
pub fn encode_mbe(value: i8) -> EncodedOperand {
    let bits = value as u8 as u32;
    // Appending a[-1] = 0 below bit 0 makes every digit a plain 3-bit window.
    let ext = bits << 1;
    let mut digits = [0i8; 4];
    for (bw, digit) in digits.iter_mut().enumerate() {
        let window = (ext >> (2 * bw)) & 0b111;
        let hi = ((window >> 2) & 1) as i8;
        let mid = ((window >> 1) & 1) as i8;
        let lo = (window & 1) as i8;
        *digit = -2 * hi + mid + lo;
    }
    EncodedOperand::from_digits(value as i32, Radix::Radix4, &digits)
}

/// 8-bit radix-2 bit-serial encoding.
pub fn encode_bit_serial(value: i8, repr: BitSerialRepr) -> Result<EncodedOperand, EncodingError> {
    encode_radix2(value as i64, RADIX4_WIDTH, repr)
}

/// Radix-2 bit-serial encoding at an arbitrary width in `2..=32`.
pub fn encode_radix2(
    value: i64,
    width: u32,
    repr: BitSerialRepr,
) -> Result<EncodedOperand, EncodingError> {
    check_radix2_width(width)?;
    let hi = (1i64 << (width - 1)) - 1;
    if value < -hi - 1 || value > hi {
        return Err(EncodingError::ValueOutOfRange { value, width });
    }
    let w = width as usize;
    let mut digits = [0i8; MAX_DIGITS];
    match repr {
        BitSerialRepr::TwosComplement => {
            let bits = value as u64;
            for (bw, d) in digits[..w].iter_mut().enumerate() {
                *d = ((bits >> bw) & 1) as i8;
            }
            digits[w - 1] = -digits[w - 1];
        }
        BitSerialRepr::SignMagnitude => {
            if value == -hi - 1 {
                return Err(EncodingError::SignMagnitudeOverflow { width });
            }
            let sign: i8 = if value < 0 { -1 } else { 1 };
            let mag = value.unsigned_abs();
            for (bw, d) in digits[..w - 1].iter_mut().enumerate() {
                *d = sign * ((mag >> bw) & 1) as i8;
            }
        }
    }
    Ok(EncodedOperand::from_digits(
        value as i32,
        Radix::Radix2,
        &digits[..w],
    ))
}

/// Encodes `value` under `scheme`.
pub fn encode(value: i32, scheme: &DigitScheme) -> Result<EncodedOperand, EncodingError> {
    match scheme {
        DigitScheme::Radix4Mbe => Ok(encode_mbe(radix4_operand(value)?)),
        DigitScheme::PluggableRadix4(table) => {
            let v = radix4_operand(value)?;
            Ok(EncodedOperand::from_digits(
                value,
                Radix::Radix4,
                &table.digits_for(v),
            ))
        }
        DigitScheme::Radix2TwosComplement { width } => {
            encode_radix2(value as i64, *width, BitSerialRepr::TwosComplement)
        }
        DigitScheme::Radix2SignMagnitude { width } => {
            encode_radix2(value as i64, *width, BitSerialRepr::SignMagnitude)
        }
    }
}

fn radix4_operand(value: i32) -> Result<i8, EncodingError> {
    i8::try_from(value).map_err(|_| EncodingError::ValueOutOfRange {
        value: value as i64,
        width: RADIX4_WIDTH,
    })
}

/// Inverse of [`encode`]: `Σ digit[bw] · 2^shift(bw)`.
pub fn decode(enc: &EncodedOperand) -> i64 {
    enc.digits()
        .iter()
        .enumerate()
        .map(|(bw, &d)| (d as i64) << enc.weight_shift(bw))
        .sum()
}

/// Ascending bit-weight positions of the nonzero digits of an operand.
#[derive(Clone, Copy, PartialEq, Eq, Default)]
pub struct SparseIndexList {
    len: u8,
    indices: [u8; MAX_DIGITS],
}

impl SparseIndexList {
    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.indices[..self.len as usize]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.as_slice().iter().map(|&i| i as usize)
    }
}

impl fmt::Debug for SparseIndexList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

/// Sparse encoder over a raw digit vector. Inputs longer than [`MAX_DIGITS`]
/// are truncated.
pub fn sparse(digits: &[i8]) -> SparseIndexList {
    let mut out = SparseIndexList::default();
    for (i, _) in digits
        .iter()
        .take(MAX_DIGITS)
        .enumerate()
        .filter(|(_, &d)| d != 0)
    {
        out.indices[out.len as usize] = i as u8;
        out.len += 1;
    }
    out
}

/// Sparse encoder over an encoded operand.
pub fn sparse_indices(enc: &EncodedOperand) -> SparseIndexList {
    let mut out = SparseIndexList::default();
    let mut mask = enc.nonzero_mask();
    while mask != 0 {
        out.indices[out.len as usize] = mask.trailing_zeros() as u8;
        out.len += 1;
        mask &= mask - 1;
    }
    out
}
