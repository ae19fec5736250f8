//! Cycle-stepped process-element models.
//!
//! | variant  | per-cycle work                                   | accumulator            |
//! |----------|--------------------------------------------------|------------------------|
//! | Baseline | full multiply, full add, accumulate              | plain word             |
//! | OPT1     | full multiply, 4-2 merge into (sum, carry)       | carry-save             |
//! | OPT2     | one bit weight of `k_p` operands                 | carry-save lane per bw |
//! | OPT3     | one nonzero digit of the latched operands        | carry-save lane per bw |
//! | OPT4C    | one externally selected digit                    | carry-save lane per bw |
//! | OPT4E    | up to four selected digits of one bit weight     | shared carry-save lanes|
//!
//! Lane variants defer the bit-weight shift to the vector core: [`PeState::finalize`]
//! resolves every lane and shifts it once.
//!
//! OPT4C and OPT4E PEs hold no encoder. [`drive_stream`] plays the part of the
//! shared column encoder: it walks the operand window bit weight by bit weight
//! and hands each PE the nonzero digits together with the prefetched `B`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::arith::{
    self, cppg, half_reduce, map_select, reduce_tree, shift_wrapping, AccWidth, ArithError,
    CarrySaveValue, CompressorArity, CompressorSpec,
};
use crate::encoding::{encode, DigitScheme, EncodedOperand, EncodingError, Radix, MAX_DIGITS};

/// Number of PEs sharing one 6-2 compressor tree in an OPT4E group.
pub const OPT4E_GROUP: usize = 4;

/// Largest operand group a PE latches per step.
pub const MAX_K_P: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeError {
    #[error("{variant} expects {expected} input(s) per step, got {got}")]
    ArityMismatch {
        variant: PeVariant,
        expected: usize,
        got: usize,
    },
    #[error("{variant} does not accept {input} inputs")]
    WrongInput {
        variant: PeVariant,
        input: &'static str,
    },
    #[error("selected partial products span several bit weights")]
    MixedBitWeights,
    #[error("operand encoding does not match the configured scheme")]
    SchemeMismatch,
    #[error("PE is still draining {pending} cycle(s) of work")]
    IncompleteStream { pending: usize },
    #[error("state diverged from the exact partial sum at cycle {cycle}: {actual} != {expected}")]
    InvariantViolation {
        cycle: u64,
        expected: i64,
        actual: i64,
    },
    #[error("invalid PE configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PeVariant {
    #[cfg_attr(feature = "serde", serde(rename = "baseline"))]
    BaselineMac,
    Opt1,
    Opt2,
    Opt3,
    Opt4C,
    Opt4E,
}

impl PeVariant {
    pub const ALL: [PeVariant; 6] = [
        PeVariant::BaselineMac,
        PeVariant::Opt1,
        PeVariant::Opt2,
        PeVariant::Opt3,
        PeVariant::Opt4C,
        PeVariant::Opt4E,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PeVariant::BaselineMac => "baseline",
            PeVariant::Opt1 => "opt1",
            PeVariant::Opt2 => "opt2",
            PeVariant::Opt3 => "opt3",
            PeVariant::Opt4C => "opt4c",
            PeVariant::Opt4E => "opt4e",
        }
    }

    /// Variants whose cycle count depends on operand values.
    pub fn is_sparse(self) -> bool {
        matches!(self, PeVariant::Opt3 | PeVariant::Opt4C | PeVariant::Opt4E)
    }

    /// Variants that keep one carry-save lane per bit weight.
    pub fn uses_lanes(self) -> bool {
        !matches!(self, PeVariant::BaselineMac | PeVariant::Opt1)
    }

    /// Variants fed by an external encoder.
    pub fn takes_selected(self) -> bool {
        matches!(self, PeVariant::Opt4C | PeVariant::Opt4E)
    }
}

impl fmt::Display for PeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PeVariant {
    type Err = PeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        PeVariant::ALL
            .into_iter()
            .find(|v| v.name() == lower || (lower == "mac" && *v == PeVariant::BaselineMac))
            .ok_or(PeError::InvalidConfig("unknown PE variant"))
    }
}

/// Static description of one PE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeConfig {
    pub variant: PeVariant,
    pub scheme: DigitScheme,
    /// Operands latched per step (spatial K unroll inside the PE).
    pub k_p: usize,
    pub acc_width: AccWidth,
    /// Cycles charged to an operand with no nonzero digit: 0 is the ideal
    /// model, 1 models control overhead.
    pub min_cycles_per_operand: u32,
    /// Compare the datapath against exact arithmetic after every cycle.
    pub check_invariants: bool,
}

impl PeConfig {
    /// Defaults: `k_p = BW` for OPT2/OPT3 (keeps one MAC per cycle for OPT2),
    /// `k_p = 4` for OPT4E, `1` otherwise; INT32 accumulation.
    pub fn new(variant: PeVariant, scheme: DigitScheme) -> Self {
        let k_p = match variant {
            PeVariant::Opt2 | PeVariant::Opt3 => scheme.bw(),
            PeVariant::Opt4E => OPT4E_GROUP,
            _ => 1,
        };
        Self {
            variant,
            scheme,
            k_p,
            acc_width: AccWidth::INT32,
            min_cycles_per_operand: 0,
            check_invariants: false,
        }
    }

    pub fn with_k_p(mut self, k_p: usize) -> Self {
        self.k_p = k_p;
        self
    }

    pub fn with_acc_width(mut self, width: AccWidth) -> Self {
        self.acc_width = width;
        self
    }

    pub fn with_min_cycles(mut self, min: u32) -> Self {
        self.min_cycles_per_operand = min;
        self
    }

    pub fn checked(mut self) -> Self {
        self.check_invariants = true;
        self
    }

    pub fn validate(&self) -> Result<(), PeError> {
        if self.k_p == 0 {
            return Err(PeError::InvalidConfig("k_p must be at least 1"));
        }
        if self.k_p > MAX_K_P {
            return Err(PeError::InvalidConfig("k_p exceeds 64"));
        }
        if self.min_cycles_per_operand > 1 {
            return Err(PeError::InvalidConfig(
                "min_cycles_per_operand must be 0 or 1",
            ));
        }
        Ok(())
    }

    pub fn bw(&self) -> usize {
        self.scheme.bw()
    }

    /// Operands consumed per `step` call by [`drive_stream`].
    pub fn operands_per_step(&self) -> usize {
        match self.variant {
            PeVariant::BaselineMac | PeVariant::Opt1 => 1,
            _ => self.k_p,
        }
    }

    fn params(&self) -> Params {
        Params {
            variant: self.variant,
            radix: self.scheme.radix(),
            bw: self.bw(),
            k_p: self.k_p,
            width: self.acc_width,
            min_cycles: self.min_cycles_per_operand,
            check: self.check_invariants,
        }
    }

    /// Cycles [`drive_stream`] spends on `window`, computed from digit counts
    /// alone without running the datapath.
    pub fn stream_cycles(&self, window: &[EncodedOperand]) -> u64 {
        let bw = self.bw();
        let min = self.min_cycles_per_operand as u64;
        match self.variant {
            PeVariant::BaselineMac | PeVariant::Opt1 => window.len() as u64,
            PeVariant::Opt2 => window.len().div_ceil(self.k_p) as u64 * bw as u64,
            PeVariant::Opt3 | PeVariant::Opt4C => {
                window.iter().map(|a| (a.nnz() as u64).max(min)).sum()
            }
            PeVariant::Opt4E => {
                let group = OPT4E_GROUP as u64;
                let mut per_bw = [0u64; MAX_DIGITS];
                for a in window {
                    if a.nnz() == 0 {
                        per_bw[0] += min;
                    }
                    let mut m = a.nonzero_mask();
                    while m != 0 {
                        per_bw[m.trailing_zeros() as usize] += 1;
                        m &= m - 1;
                    }
                }
                per_bw[..bw].iter().map(|n| n.div_ceil(group)).sum()
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Params {
    variant: PeVariant,
    radix: Radix,
    bw: usize,
    k_p: usize,
    width: AccWidth,
    min_cycles: u32,
    check: bool,
}

/// One partial product chosen by the shared encoder: a nonzero digit, its
/// bit weight, and the prefetched multiplier. `digit == 0` is a bubble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedPp {
    pub digit: i8,
    pub bw: u8,
    pub b: i32,
}

/// Per-step PE input.
#[derive(Debug, Clone, Copy)]
pub enum PeInput<'a> {
    /// Raw operand pairs: one for Baseline/OPT1, `k_p` for OPT2/OPT3.
    Operands {
        a: &'a [EncodedOperand],
        b: &'a [i32],
    },
    /// Encoder-selected partial products: one for OPT4C, up to four of one
    /// bit weight for OPT4E.
    Selected(&'a [SelectedPp]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub cycles_consumed: u64,
    pub emitted: Option<i64>,
    pub busy: bool,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Accumulator {
    Plain(i64),
    CarrySave(CarrySaveValue),
    Lanes([CarrySaveValue; MAX_DIGITS]),
}

/// Work latched but not yet retired.
#[derive(Debug, Clone, Copy)]
enum Drain {
    /// A single multiply (Baseline/OPT1).
    Multiply,
    /// OPT2 bit-weight pass over the latched operands.
    Pass(usize),
    /// OPT3 drain of the sparse index queue.
    Queue(usize),
    /// One OPT4 cycle over the latched selections.
    Selected,
}

/// Mutable state of one PE.
#[derive(Debug, Clone)]
pub struct PeState {
    p: Params,
    acc: Accumulator,
    latched: Vec<(EncodedOperand, i32)>,
    /// OPT3 sparse index queue: (latched operand, bit weight); `u8::MAX` bw is a bubble.
    queue: Vec<(u16, u8)>,
    selected: Vec<SelectedPp>,
    drain: Option<Drain>,
    cycles: u64,
    exact: i128,
}

impl PeState {
    pub fn new(cfg: &PeConfig) -> Result<Self, PeError> {
        cfg.validate()?;
        let p = cfg.params();
        let acc = match p.variant {
            PeVariant::BaselineMac => Accumulator::Plain(0),
            PeVariant::Opt1 => Accumulator::CarrySave(CarrySaveValue::zero(p.width)),
            _ => Accumulator::Lanes([CarrySaveValue::zero(p.width); MAX_DIGITS]),
        };
        Ok(Self {
            p,
            acc,
            latched: Vec::with_capacity(p.k_p),
            queue: Vec::with_capacity(p.k_p * p.bw),
            selected: Vec::with_capacity(OPT4E_GROUP),
            drain: None,
            cycles: 0,
            exact: 0,
        })
    }

    /// Clears registers and the cycle counter, keeping allocations.
    pub fn reset(&mut self) {
        let w = self.p.width;
        match &mut self.acc {
            Accumulator::Plain(v) => *v = 0,
            Accumulator::CarrySave(cs) => *cs = CarrySaveValue::zero(w),
            Accumulator::Lanes(l) => *l = [CarrySaveValue::zero(w); MAX_DIGITS],
        }
        self.latched.clear();
        self.queue.clear();
        self.selected.clear();
        self.drain = None;
        self.cycles = 0;
        self.exact = 0;
    }

    pub fn variant(&self) -> PeVariant {
        self.p.variant
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn is_idle(&self) -> bool {
        self.drain.is_none()
    }

    /// Cycles of latched work still to run.
    pub fn pending_cycles(&self) -> usize {
        match self.drain {
            None => 0,
            Some(Drain::Multiply) | Some(Drain::Selected) => 1,
            Some(Drain::Pass(bw)) => self.p.bw - bw,
            Some(Drain::Queue(i)) => self.queue.len() - i,
        }
    }

    /// Number of sparse indices still queued (OPT3).
    pub fn pending_indices(&self) -> usize {
        match self.drain {
            Some(Drain::Queue(i)) => self.queue.len() - i,
            _ => 0,
        }
    }

    /// Latches one step of input. The PE must be idle.
    pub fn load(&mut self, input: PeInput<'_>) -> Result<(), PeError> {
        if !self.is_idle() {
            return Err(PeError::IncompleteStream {
                pending: self.pending_cycles(),
            });
        }
        let v = self.p.variant;
        match input {
            PeInput::Operands { a, b } => {
                if v.takes_selected() {
                    return Err(PeError::WrongInput {
                        variant: v,
                        input: "raw operand",
                    });
                }
                let expected = match v {
                    PeVariant::BaselineMac | PeVariant::Opt1 => 1,
                    _ => self.p.k_p,
                };
                if a.len() != expected || b.len() != expected {
                    return Err(PeError::ArityMismatch {
                        variant: v,
                        expected,
                        got: a.len().max(b.len()),
                    });
                }
                if a.iter()
                    .any(|x| x.radix() != self.p.radix || x.bw() != self.p.bw)
                {
                    return Err(PeError::SchemeMismatch);
                }
                self.latched.clear();
                self.latched
                    .extend(a.iter().copied().zip(b.iter().copied()));
                self.drain = Some(match v {
                    PeVariant::BaselineMac | PeVariant::Opt1 => Drain::Multiply,
                    PeVariant::Opt2 => Drain::Pass(0),
                    _ => {
                        self.build_queue();
                        if self.queue.is_empty() {
                            self.latched.clear();
                            return Ok(());
                        }
                        Drain::Queue(0)
                    }
                });
            }
            PeInput::Selected(pps) => {
                if !v.takes_selected() {
                    return Err(PeError::WrongInput {
                        variant: v,
                        input: "selected partial product",
                    });
                }
                let cap = if v == PeVariant::Opt4E {
                    OPT4E_GROUP
                } else {
                    1
                };
                if pps.is_empty() || pps.len() > cap {
                    return Err(PeError::ArityMismatch {
                        variant: v,
                        expected: cap,
                        got: pps.len(),
                    });
                }
                if pps.iter().any(|pp| pp.bw != pps[0].bw) {
                    return Err(PeError::MixedBitWeights);
                }
                if pps[0].bw as usize >= self.p.bw {
                    return Err(PeError::SchemeMismatch);
                }
                self.selected.clear();
                self.selected.extend_from_slice(pps);
                self.drain = Some(Drain::Selected);
            }
        }
        Ok(())
    }

    /// Bit-weight-major order over the latched operands: each pass of the
    /// vector core shifts exactly one lane.
    fn build_queue(&mut self) {
        self.queue.clear();
        for bw in 0..self.p.bw {
            for (k, (a, _)) in self.latched.iter().enumerate() {
                if a.nonzero_mask() & (1 << bw) != 0 {
                    self.queue.push((k as u16, bw as u8));
                }
            }
        }
        if self.p.min_cycles > 0 {
            for (k, (a, _)) in self.latched.iter().enumerate() {
                if a.nnz() == 0 {
                    self.queue.push((k as u16, u8::MAX));
                }
            }
        }
    }

    /// Advances one clock. Returns `false` (and spends no cycle) when idle.
    pub fn tick(&mut self) -> Result<bool, PeError> {
        let Some(drain) = self.drain else {
            return Ok(false);
        };
        let w = self.p.width;
        let radix = self.p.radix;
        self.drain = match drain {
            Drain::Multiply => {
                let (a, b) = self.latched[0];
                let product = multiply_tree(&a, b, w);
                match &mut self.acc {
                    Accumulator::Plain(acc) => {
                        *acc = arith::accumulate(*acc, arith::add(&product), w)
                    }
                    Accumulator::CarrySave(acc) => {
                        let words = [product.sum() as i64, product.carry() as i64];
                        *acc = half_reduce(
                            &words,
                            *acc,
                            CompressorSpec::new(CompressorArity::FourTwo, w),
                        )?;
                    }
                    Accumulator::Lanes(_) => unreachable!("multiply drain on a lane PE"),
                }
                if self.p.check {
                    self.exact += a.source() as i128 * b as i128;
                }
                None
            }
            Drain::Pass(bw) => {
                let mut pps = [0i64; MAX_K_P];
                let n = self.latched.len();
                for (slot, (a, b)) in pps.iter_mut().zip(&self.latched) {
                    let d = a.digit(bw);
                    *slot = map_select(&cppg(*b), d)?;
                    if self.p.check {
                        self.exact += ((d as i128) * (*b as i128)) << a.weight_shift(bw);
                    }
                }
                let lane = &mut self.lanes()[bw];
                *lane = reduce_lane(&pps[..n], *lane, w)?;
                if bw + 1 == self.p.bw {
                    self.latched.clear();
                    None
                } else {
                    Some(Drain::Pass(bw + 1))
                }
            }
            Drain::Queue(i) => {
                let (k, bw) = self.queue[i];
                if bw != u8::MAX {
                    let (a, b) = self.latched[k as usize];
                    let d = a.digit(bw as usize);
                    let pp = map_select(&cppg(b), d)?;
                    let lane = &mut self.lanes()[bw as usize];
                    *lane = half_reduce(
                        &[pp],
                        *lane,
                        CompressorSpec::new(CompressorArity::ThreeTwo, w),
                    )?;
                    if self.p.check {
                        self.exact += ((d as i128) * (b as i128)) << a.weight_shift(bw as usize);
                    }
                }
                if i + 1 == self.queue.len() {
                    self.latched.clear();
                    self.queue.clear();
                    None
                } else {
                    Some(Drain::Queue(i + 1))
                }
            }
            Drain::Selected => {
                let bw = self.selected[0].bw as usize;
                let mut pps = [0i64; OPT4E_GROUP];
                let n = self.selected.len();
                for (slot, sel) in pps.iter_mut().zip(&self.selected) {
                    *slot = map_select(&cppg(sel.b), sel.digit)?;
                    if self.p.check {
                        self.exact += ((sel.digit as i128) * (sel.b as i128))
                            << (bw as u32 * radix.bits_per_digit());
                    }
                }
                let arity = if self.p.variant == PeVariant::Opt4E {
                    CompressorArity::SixTwo
                } else {
                    CompressorArity::ThreeTwo
                };
                let lane = &mut self.lanes()[bw];
                *lane = half_reduce(&pps[..n], *lane, CompressorSpec::new(arity, w))?;
                self.selected.clear();
                None
            }
        };
        self.cycles += 1;
        if self.p.check {
            self.check_invariant()?;
        }
        Ok(true)
    }

    fn lanes(&mut self) -> &mut [CarrySaveValue; MAX_DIGITS] {
        match &mut self.acc {
            Accumulator::Lanes(l) => l,
            _ => unreachable!("lane access on a non-lane PE"),
        }
    }

    fn check_invariant(&self) -> Result<(), PeError> {
        let expected = self.p.width.wrap(self.exact);
        let actual = self.partial_value();
        if expected == actual {
            Ok(())
        } else {
            Err(PeError::InvariantViolation {
                cycle: self.cycles,
                expected,
                actual,
            })
        }
    }

    /// Value the registers currently represent, shifted lanes included.
    pub fn partial_value(&self) -> i64 {
        let w = self.p.width;
        match &self.acc {
            Accumulator::Plain(v) => *v,
            Accumulator::CarrySave(cs) => arith::add(cs),
            Accumulator::Lanes(lanes) => {
                lanes[..self.p.bw]
                    .iter()
                    .enumerate()
                    .fold(0i64, |acc, (bw, lane)| {
                        let shifted = shift_wrapping(arith::add(lane), bw, self.p.radix, w);
                        arith::accumulate(acc, shifted, w)
                    })
            }
        }
    }

    /// Loads `input` and clocks until the PE is idle again.
    pub fn step(&mut self, input: PeInput<'_>) -> Result<StepOutcome, PeError> {
        let start = self.cycles;
        self.load(input)?;
        while self.tick()? {}
        let cycles_consumed = self.cycles - start;
        Ok(StepOutcome {
            cycles_consumed,
            emitted: None,
            busy: cycles_consumed > 0,
        })
    }

    /// Output after the reduction: the carry-save pair or the lanes resolved
    /// and shifted by the vector core.
    pub fn finalize(&self) -> Result<i64, PeError> {
        if !self.is_idle() {
            return Err(PeError::IncompleteStream {
                pending: self.pending_cycles(),
            });
        }
        Ok(self.partial_value())
    }
}

/// Parallel multiplier: every bit weight's partial product, shifted, through
/// one compressor tree. The result stays in carry-save form.
fn multiply_tree(a: &EncodedOperand, b: i32, w: AccWidth) -> CarrySaveValue {
    let table = cppg(b);
    let mut pps = [0i64; MAX_DIGITS];
    for (bw, slot) in pps.iter_mut().enumerate().take(a.bw()) {
        let pp = table.entry(a.digit(bw)).unwrap_or(0);
        *slot = shift_wrapping(pp, bw, a.radix(), w);
    }
    reduce_tree(&pps[..a.bw()], CarrySaveValue::zero(w))
}

fn reduce_lane(pps: &[i64], lane: CarrySaveValue, w: AccWidth) -> Result<CarrySaveValue, PeError> {
    match CompressorArity::for_pps(pps.len()) {
        Some(arity) => Ok(half_reduce(pps, lane, CompressorSpec::new(arity, w))?),
        None => Ok(pps
            .chunks(CompressorArity::SixTwo.pp_slots())
            .try_fold(lane, |cs, chunk| {
                half_reduce(chunk, cs, CompressorSpec::new(CompressorArity::SixTwo, w))
            })?),
    }
}

/// Drives `pe` over a whole operand window and returns the cycles spent.
///
/// Raw-operand variants are fed `operands_per_step` pairs at a time, padded
/// with zero operands. Selected-input variants receive the window's nonzero
/// digits bit weight by bit weight: one per cycle for OPT4C, packed four per
/// cycle for OPT4E.
pub fn drive_stream(pe: &mut PeState, a: &[EncodedOperand], b: &[i32]) -> Result<u64, PeError> {
    if a.len() != b.len() {
        return Err(PeError::ArityMismatch {
            variant: pe.variant(),
            expected: a.len(),
            got: b.len(),
        });
    }
    let start = pe.cycles();
    let p = pe.p;
    match p.variant {
        PeVariant::BaselineMac | PeVariant::Opt1 => {
            for (x, y) in a.iter().zip(b) {
                pe.step(PeInput::Operands {
                    a: core::slice::from_ref(x),
                    b: core::slice::from_ref(y),
                })?;
            }
        }
        PeVariant::Opt2 | PeVariant::Opt3 => {
            let zero = EncodedOperand::zero(p.radix, p.bw);
            let mut pad_a = Vec::new();
            let mut pad_b = Vec::new();
            for (xa, xb) in a.chunks(p.k_p).zip(b.chunks(p.k_p)) {
                if xa.len() == p.k_p {
                    pe.step(PeInput::Operands { a: xa, b: xb })?;
                } else {
                    pad_a.clear();
                    pad_b.clear();
                    pad_a.extend_from_slice(xa);
                    pad_a.resize(p.k_p, zero);
                    pad_b.extend_from_slice(xb);
                    pad_b.resize(p.k_p, 0);
                    pe.step(PeInput::Operands {
                        a: &pad_a,
                        b: &pad_b,
                    })?;
                }
            }
        }
        PeVariant::Opt4C | PeVariant::Opt4E => {
            let group = if p.variant == PeVariant::Opt4E {
                OPT4E_GROUP
            } else {
                1
            };
            let mut batch = [SelectedPp {
                digit: 0,
                bw: 0,
                b: 0,
            }; OPT4E_GROUP];
            for bw in 0..p.bw {
                let mut n = 0;
                for (x, &y) in a.iter().zip(b) {
                    let bubble = bw == 0 && p.min_cycles > 0 && x.nnz() == 0;
                    if x.nonzero_mask() & (1 << bw) == 0 && !bubble {
                        continue;
                    }
                    batch[n] = SelectedPp {
                        digit: x.digit(bw),
                        bw: bw as u8,
                        b: y,
                    };
                    n += 1;
                    if n == group {
                        pe.step(PeInput::Selected(&batch[..n]))?;
                        n = 0;
                    }
                }
                if n > 0 {
                    pe.step(PeInput::Selected(&batch[..n]))?;
                }
            }
        }
    }
    Ok(pe.cycles() - start)
}

/// Runs one PE over a full dot product: `(result, cycles)`.
pub fn run_pe(cfg: &PeConfig, a: &[i32], b: &[i32]) -> Result<(i64, u64), PeError> {
    let enc = a
        .iter()
        .map(|&x| encode(x, &cfg.scheme))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pe = PeState::new(cfg)?;
    let cycles = drive_stream(&mut pe, &enc, b)?;
    Ok((pe.finalize()?, cycles))
}
