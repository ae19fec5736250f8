//! Fixed-width semantics of the PE datapath primitives: candidate partial-product
//! generation, selection, shifting, carry-save reduction, full add and accumulate.
//!
//! Every word is interpreted modulo `2^acc_width` and read back as a signed
//! two's-complement value.

use thiserror::Error;

use crate::encoding::Radix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("digit {0} is outside the candidate set {{-2..=2}}")]
    DigitOutOfRange(i8),
    #[error("shifted value {value} << {shift} does not fit in {width} bits")]
    ShiftOverflow { value: i64, shift: u32, width: u32 },
    #[error("{inputs} partial products exceed the {arity}-2 compressor's {slots} slots")]
    ArityMismatch {
        inputs: usize,
        arity: u32,
        slots: usize,
    },
    #[error("accumulator width {0} is outside 2..=64")]
    InvalidWidth(u32),
    #[error("compressor is {spec} bits wide but the accumulator is {state} bits")]
    WidthMismatch { spec: u32, state: u32 },
}

/// Bit width of the accumulation datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u32", into = "u32"))]
pub struct AccWidth(u32);

impl AccWidth {
    /// INT32 accumulation.
    pub const INT32: AccWidth = AccWidth(32);

    pub const fn new(bits: u32) -> Result<Self, ArithError> {
        if bits >= 2 && bits <= 64 {
            Ok(AccWidth(bits))
        } else {
            Err(ArithError::InvalidWidth(bits))
        }
    }

    #[inline]
    pub const fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub const fn mask(self) -> u64 {
        if self.0 == 64 {
            u64::MAX
        } else {
            (1u64 << self.0) - 1
        }
    }

    /// Low `bits` of `v` as an unsigned word.
    #[inline]
    pub const fn to_word(self, v: i64) -> u64 {
        (v as u64) & self.mask()
    }

    /// Sign-extends a `bits`-wide word.
    #[inline]
    pub const fn from_word(self, w: u64) -> i64 {
        let shift = 64 - self.0;
        ((w << shift) as i64) >> shift
    }

    /// Reduces an exact integer modulo `2^bits` into the signed range.
    #[inline]
    pub const fn wrap(self, v: i128) -> i64 {
        self.from_word((v as u64) & self.mask())
    }

    #[inline]
    pub const fn contains(self, v: i128) -> bool {
        let half = 1i128 << (self.0 - 1);
        v >= -half && v < half
    }
}

impl Default for AccWidth {
    fn default() -> Self {
        AccWidth::INT32
    }
}

impl TryFrom<u32> for AccWidth {
    type Error = ArithError;

    fn try_from(bits: u32) -> Result<Self, Self::Error> {
        AccWidth::new(bits)
    }
}

impl From<AccWidth> for u32 {
    fn from(w: AccWidth) -> u32 {
        w.0
    }
}

/// Candidate partial products `{-2B, -B, 0, B, 2B}` of one multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidatePpTable {
    multiplier: i32,
    entries: [i64; 5],
}

impl CandidatePpTable {
    #[inline]
    pub fn multiplier(&self) -> i32 {
        self.multiplier
    }

    /// `d · B` for `d` in `-2..=2`.
    #[inline]
    pub fn entry(&self, digit: i8) -> Option<i64> {
        if (-2..=2).contains(&digit) {
            Some(self.entries[(digit + 2) as usize])
        } else {
            None
        }
    }

    /// Entries ordered `-2B, -B, 0, B, 2B`.
    #[inline]
    pub fn entries(&self) -> &[i64; 5] {
        &self.entries
    }
}

/// Candidate partial-product generator.
#[inline]
pub fn cppg(b: i32) -> CandidatePpTable {
    let b = b as i64;
    CandidatePpTable {
        multiplier: b as i32,
        entries: [-2 * b, -b, 0, b, 2 * b],
    }
}

/// Multiplexer: picks the candidate addressed by an encoded digit.
#[inline]
pub fn map_select(table: &CandidatePpTable, digit: i8) -> Result<i64, ArithError> {
    table.entry(digit).ok_or(ArithError::DigitOutOfRange(digit))
}

/// Shifts a partial product to its bit weight, rejecting results that leave
/// the `width`-bit signed range.
pub fn shift(pp: i64, bw: usize, radix: Radix, width: AccWidth) -> Result<i64, ArithError> {
    let s = bw as u32 * radix.bits_per_digit();
    let overflow = ArithError::ShiftOverflow {
        value: pp,
        shift: s,
        width: width.bits(),
    };
    if s >= 64 {
        return Err(overflow);
    }
    let shifted = (pp as i128) << s;
    if !width.contains(shifted) {
        return Err(overflow);
    }
    Ok(shifted as i64)
}

/// Shift modulo `2^width`; what a fixed-width shifter computes.
#[inline]
pub fn shift_wrapping(pp: i64, bw: usize, radix: Radix, width: AccWidth) -> i64 {
    let s = bw as u32 * radix.bits_per_digit();
    if s >= 64 {
        return 0;
    }
    width.wrap(((pp as u64) << s) as i64 as i128)
}

/// A redundant `(sum, carry)` pair whose value is `sum + carry mod 2^width`.
#[derive(Debug, Clone, Copy)]
pub struct CarrySaveValue {
    sum: u64,
    carry: u64,
    width: AccWidth,
}

impl CarrySaveValue {
    #[inline]
    pub const fn zero(width: AccWidth) -> Self {
        Self {
            sum: 0,
            carry: 0,
            width,
        }
    }

    /// Builds a pair from raw words; bits above `width` are dropped.
    #[inline]
    pub const fn from_parts(sum: u64, carry: u64, width: AccWidth) -> Self {
        Self {
            sum: sum & width.mask(),
            carry: carry & width.mask(),
            width,
        }
    }

    #[inline]
    pub fn sum(&self) -> u64 {
        self.sum
    }

    #[inline]
    pub fn carry(&self) -> u64 {
        self.carry
    }

    #[inline]
    pub fn width(&self) -> AccWidth {
        self.width
    }

    /// The represented value.
    #[inline]
    pub fn value(&self) -> i64 {
        self.width
            .from_word(self.sum.wrapping_add(self.carry) & self.width.mask())
    }

    /// One 3:2 carry-save adder row folding `x` into the pair.
    #[inline]
    fn csa(self, x: i64) -> Self {
        let m = self.width.mask();
        let x = (x as u64) & m;
        let (s, c) = (self.sum, self.carry);
        Self {
            sum: (s ^ c ^ x) & m,
            carry: (((s & c) | (s & x) | (c & x)) << 1) & m,
            width: self.width,
        }
    }
}

impl PartialEq for CarrySaveValue {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width && self.value() == other.value()
    }
}

impl Eq for CarrySaveValue {}

/// Compressor tree sizes: 3-2, 4-2 and 6-2. Two of the inputs are always the
/// fed-back sum and carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CompressorArity {
    ThreeTwo,
    FourTwo,
    SixTwo,
}

impl CompressorArity {
    #[inline]
    pub const fn inputs(self) -> u32 {
        match self {
            CompressorArity::ThreeTwo => 3,
            CompressorArity::FourTwo => 4,
            CompressorArity::SixTwo => 6,
        }
    }

    /// Partial products accepted alongside the fed-back pair.
    #[inline]
    pub const fn pp_slots(self) -> usize {
        self.inputs() as usize - 2
    }

    /// Smallest tree with room for `pps` partial products.
    pub const fn for_pps(pps: usize) -> Option<Self> {
        match pps {
            0 | 1 => Some(CompressorArity::ThreeTwo),
            2 => Some(CompressorArity::FourTwo),
            3 | 4 => Some(CompressorArity::SixTwo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressorSpec {
    pub arity: CompressorArity,
    pub acc_width: AccWidth,
}

impl CompressorSpec {
    pub const fn new(arity: CompressorArity, acc_width: AccWidth) -> Self {
        Self { arity, acc_width }
    }
}

/// Compressor tree: folds up to `arity - 2` partial products into the pair
/// without propagating carries.
pub fn half_reduce(
    inputs: &[i64],
    state: CarrySaveValue,
    spec: CompressorSpec,
) -> Result<CarrySaveValue, ArithError> {
    if spec.acc_width != state.width {
        return Err(ArithError::WidthMismatch {
            spec: spec.acc_width.bits(),
            state: state.width.bits(),
        });
    }
    let slots = spec.arity.pp_slots();
    if inputs.len() > slots {
        return Err(ArithError::ArityMismatch {
            inputs: inputs.len(),
            arity: spec.arity.inputs(),
            slots,
        });
    }
    Ok(inputs.iter().fold(state, |cs, &x| cs.csa(x)))
}

/// A tree of 6-2 stages wide enough for any number of partial products, as
/// used inside a parallel multiplier.
pub(crate) fn reduce_tree(inputs: &[i64], state: CarrySaveValue) -> CarrySaveValue {
    inputs.iter().fold(state, |cs, &x| cs.csa(x))
}

/// Full adder: resolves a carry-save pair into a signed word.
#[inline]
pub fn add(cs: &CarrySaveValue) -> i64 {
    cs.value()
}

/// Accumulator: wrap-adds `input` into the running `state`.
#[inline]
pub fn accumulate(state: i64, input: i64, width: AccWidth) -> i64 {
    width.wrap(state as i128 + input as i128)
}

/// Exact dot product reduced modulo `2^width`; the reference every PE model
/// is checked against.
pub fn mac_reference(a: &[i32], b: &[i32], width: AccWidth) -> i64 {
    let exact: i128 = a.iter().zip(b).map(|(&x, &y)| x as i128 * y as i128).sum();
    width.wrap(exact)
}
