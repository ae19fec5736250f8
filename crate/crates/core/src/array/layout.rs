//! Banked operand layout and the conflict-free fetch schedule.
//!
//! Element `k` of the reduction lives in bank `(k / dk) mod banks`. Within a
//! bank, addresses run over (tile, k-block, lane) with the lane index
//! innermost, so the lanes of one tile occupy adjacent words.
//!
//! Columns fetch in a rotated order: at fetch cycle `t`, lane `i` reads from
//! bank `(i + t / dk) mod banks`, which is a Latin square over lanes and
//! banks. [`BankArbiter`] checks that property while the simulator runs.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("index ({row}, {k}) outside a {rows}x{k_len} operand")]
    IndexOutOfRange {
        row: usize,
        k: usize,
        rows: usize,
        k_len: usize,
    },
    #[error("layout dimensions must be positive")]
    ZeroDimension,
    #[error("bank {bank} read by lanes {first} and {second} in fetch cycle {cycle}")]
    BankConflict {
        cycle: usize,
        bank: usize,
        first: usize,
        second: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BankAddress {
    pub bank: usize,
    pub offset: usize,
}

/// Geometry of one banked operand. For `A` the lanes are the `m_p` array
/// columns and tiles the `m_t` row tiles; for `B` they are `n_p` and `n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayoutDims {
    pub lanes: usize,
    pub tiles: usize,
    pub k_len: usize,
    pub dk: usize,
}

impl LayoutDims {
    pub fn new(lanes: usize, tiles: usize, k_len: usize, dk: usize) -> Result<Self, LayoutError> {
        if lanes == 0 || tiles == 0 || k_len == 0 || dk == 0 {
            return Err(LayoutError::ZeroDimension);
        }
        Ok(Self {
            lanes,
            tiles,
            k_len,
            dk,
        })
    }

    pub fn banks(&self) -> usize {
        self.lanes
    }

    fn rows(&self) -> usize {
        self.lanes * self.tiles
    }

    /// Elements of `k` a bank holds per lane: whole rounds of `dk` words.
    fn k_blocks(&self) -> usize {
        self.k_len.div_ceil(self.lanes * self.dk)
    }

    fn address(&self, row: usize, k: usize) -> Result<BankAddress, LayoutError> {
        if row >= self.rows() || k >= self.k_len {
            return Err(LayoutError::IndexOutOfRange {
                row,
                k,
                rows: self.rows(),
                k_len: self.k_len,
            });
        }
        let banks = self.banks();
        let bank = (k / self.dk) % banks;
        let k2 = k / (banks * self.dk);
        let within = k % self.dk;
        let (tile, lane) = (row / self.lanes, row % self.lanes);
        let offset = ((tile * self.k_blocks() + k2) * self.dk + within) * self.lanes + lane;
        Ok(BankAddress { bank, offset })
    }
}

/// Address of `A[m, k]`.
pub fn layout_a(m: usize, k: usize, dims: &LayoutDims) -> Result<BankAddress, LayoutError> {
    dims.address(m, k)
}

/// Address of `B[k, n]`.
pub fn layout_b(k: usize, n: usize, dims: &LayoutDims) -> Result<BankAddress, LayoutError> {
    dims.address(n, k)
}

/// Element of the reduction that `lane` fetches in `cycle`, under the
/// rotated schedule. Returns `None` for slots past the end of `k_len`.
pub fn fetch_k(lane: usize, cycle: usize, dims: &LayoutDims) -> Option<usize> {
    let banks = dims.banks();
    let round = banks * dims.dk;
    let (block, r) = (cycle / round, cycle % round);
    let bank = (r / dims.dk + lane) % banks;
    let k = block * round + bank * dims.dk + r % dims.dk;
    (k < dims.k_len).then_some(k)
}

/// Fetch cycles needed to visit every `k` once per lane.
pub fn fetch_cycles(dims: &LayoutDims) -> usize {
    dims.k_blocks() * dims.banks() * dims.dk
}

/// Tracks which lane owns each bank during one fetch cycle.
#[derive(Debug, Clone)]
pub struct BankArbiter {
    owner: Vec<Option<usize>>,
    cycle: usize,
}

impl BankArbiter {
    pub fn new(banks: usize) -> Self {
        Self {
            owner: vec![None; banks],
            cycle: 0,
        }
    }

    pub fn begin_cycle(&mut self, cycle: usize) {
        self.owner.iter_mut().for_each(|o| *o = None);
        self.cycle = cycle;
    }

    pub fn request(&mut self, lane: usize, addr: BankAddress) -> Result<(), LayoutError> {
        match self.owner[addr.bank] {
            Some(first) => Err(LayoutError::BankConflict {
                cycle: self.cycle,
                bank: addr.bank,
                first,
                second: lane,
            }),
            None => {
                self.owner[addr.bank] = Some(lane);
                Ok(())
            }
        }
    }
}

/// Replays the rotated fetch of one tile: lane `i` reads row
/// `tile * lanes + i`. Fails on the first conflict.
pub fn check_tile_fetch(
    tile: usize,
    dims: &LayoutDims,
    order: impl Fn(usize, usize, &LayoutDims) -> Option<usize>,
) -> Result<(), LayoutError> {
    let mut arbiter = BankArbiter::new(dims.banks());
    for cycle in 0..fetch_cycles(dims) {
        arbiter.begin_cycle(cycle);
        for lane in 0..dims.lanes {
            if let Some(k) = order(lane, cycle, dims) {
                arbiter.request(lane, dims.address(tile * dims.lanes + lane, k)?)?;
            }
        }
    }
    Ok(())
}
