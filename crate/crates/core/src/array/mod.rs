//! GEMM on an array of PEs.
//!
//! `A` (M×K) is the encoded multiplicand and `B` (K×N) the multiplier. A
//! *column* is the set of PEs that share one stream of `A` digits, so its PEs
//! finish together; different columns are held at a barrier until the
//! slowest one is done.
//!
//! | dataflow   | spatial unroll (M, N, K) | sync groups per step | partial sums            |
//! |------------|--------------------------|----------------------|-------------------------|
//! | OS 2D      | (m_p, n_p, k_p)          | m_p, one per tile    | stay in the PE          |
//! | WS systolic| (1, n_p, m_p·k_p)        | m_p rows, per k step | PE state flows down     |
//! | 3D cube    | (m_p, n_p, d·k_p)        | m_p·d, per k step    | PE keeps, tree over d   |
//! | adder tree | (1, n_p, m_p·k_p)        | m_p leaves, per step | tree over leaves        |

pub mod layout;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::arith::{accumulate, AccWidth};
use crate::encoding::{encode, EncodedOperand, EncodingError};
use crate::matrix::Matrix;
use crate::pe::{drive_stream, PeConfig, PeError, PeState};

use layout::{check_tile_fetch, fetch_k, LayoutDims, LayoutError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("shape mismatch: A is {a_rows}x{a_cols}, B is {b_rows}x{b_cols}")]
    ShapeMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("tile schedule {m_t}x{n_t}x{k_t} does not cover a {m}x{k}x{n} GEMM")]
    ScheduleTooSmall {
        m_t: usize,
        n_t: usize,
        k_t: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    #[error("invalid array configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("PEs of one column disagree on cycles ({first} vs {other})")]
    NonUniformColumn { first: u64, other: u64 },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Pe(#[from] PeError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dataflow {
    OutputStationary2D,
    WeightStationarySystolic,
    Cube3D { depth: usize },
    AdderTree,
}

impl Dataflow {
    pub fn name(self) -> &'static str {
        match self {
            Dataflow::OutputStationary2D => "os2d",
            Dataflow::WeightStationarySystolic => "ws",
            Dataflow::Cube3D { .. } => "cube3d",
            Dataflow::AdderTree => "adder-tree",
        }
    }
}

impl fmt::Display for Dataflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dataflow::Cube3D { depth } => write!(f, "cube3d:{depth}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Dataflow {
    type Err = SimError;

    /// Accepts `os2d`, `ws`, `adder-tree`, `cube3d` and `cube3d:<depth>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "os2d" | "os" | "output-stationary" => Ok(Dataflow::OutputStationary2D),
            "ws" | "systolic" | "weight-stationary" => Ok(Dataflow::WeightStationarySystolic),
            "adder-tree" | "tree" => Ok(Dataflow::AdderTree),
            "cube3d" | "cube" => Ok(Dataflow::Cube3D { depth: 2 }),
            other => other
                .strip_prefix("cube3d:")
                .and_then(|d| d.parse().ok())
                .map(|depth| Dataflow::Cube3D { depth })
                .ok_or(SimError::InvalidConfig("unknown dataflow")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayConfig {
    pub m_p: usize,
    pub n_p: usize,
    pub pe: PeConfig,
    pub dataflow: Dataflow,
    /// Consecutive `k` elements stored per bank before moving to the next.
    pub bank_dk: usize,
}

/// How one dataflow maps the GEMM onto space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unroll {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Sync groups along K inside one spatial `m`.
    pub k_groups: usize,
}

impl ArrayConfig {
    pub fn new(m_p: usize, n_p: usize, pe: PeConfig, dataflow: Dataflow) -> Self {
        Self {
            m_p,
            n_p,
            pe,
            dataflow,
            bank_dk: 1,
        }
    }

    pub fn k_p(&self) -> usize {
        self.pe.k_p
    }

    pub fn pe_count(&self) -> usize {
        match self.dataflow {
            Dataflow::Cube3D { depth } => self.m_p * self.n_p * depth,
            _ => self.m_p * self.n_p,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.m_p == 0 || self.n_p == 0 || self.bank_dk == 0 {
            return Err(SimError::InvalidConfig(
                "array dimensions must be at least 1",
            ));
        }
        if matches!(self.dataflow, Dataflow::Cube3D { depth: 0 }) {
            return Err(SimError::InvalidConfig("cube depth must be at least 1"));
        }
        if self.pe.acc_width.bits() > 32 {
            return Err(SimError::InvalidConfig(
                "outputs are int32; acc_width must be <= 32",
            ));
        }
        self.pe.validate()?;
        Ok(())
    }

    pub fn unroll(&self) -> Unroll {
        let k_p = self.k_p();
        match self.dataflow {
            Dataflow::OutputStationary2D => Unroll {
                m: self.m_p,
                n: self.n_p,
                k: k_p,
                k_groups: 1,
            },
            Dataflow::WeightStationarySystolic | Dataflow::AdderTree => Unroll {
                m: 1,
                n: self.n_p,
                k: self.m_p * k_p,
                k_groups: self.m_p,
            },
            Dataflow::Cube3D { depth } => Unroll {
                m: self.m_p,
                n: self.n_p,
                k: depth * k_p,
                k_groups: depth,
            },
        }
    }

    /// Sync groups, the entries of [`CycleStats::per_column`].
    pub fn columns(&self) -> usize {
        let u = self.unroll();
        u.m * u.k_groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LoopOrder {
    /// Row-major over output tiles, reversing `n` on odd `m` rows.
    #[default]
    Zigzag,
    RowMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TileSchedule {
    pub m_t: usize,
    pub n_t: usize,
    pub k_t: usize,
    pub order: LoopOrder,
}

impl TileSchedule {
    /// Smallest schedule covering an `m`×`k`×`n` GEMM.
    pub fn fit(m: usize, k: usize, n: usize, cfg: &ArrayConfig) -> Self {
        let u = cfg.unroll();
        Self {
            m_t: m.div_ceil(u.m).max(1),
            n_t: n.div_ceil(u.n).max(1),
            k_t: k.div_ceil(u.k).max(1),
            order: LoopOrder::default(),
        }
    }

    /// Output tiles in visiting order.
    pub fn tiles(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.m_t).flat_map(move |mt| {
            (0..self.n_t).map(move |i| {
                let reverse = self.order == LoopOrder::Zigzag && mt % 2 == 1;
                (mt, if reverse { self.n_t - 1 - i } else { i })
            })
        })
    }

    fn check(&self, m: usize, k: usize, n: usize, cfg: &ArrayConfig) -> Result<(), SimError> {
        let u = cfg.unroll();
        if self.m_t * u.m < m || self.n_t * u.n < n || self.k_t * u.k < k || self.k_t == 0 {
            return Err(SimError::ScheduleTooSmall {
                m_t: self.m_t,
                n_t: self.n_t,
                k_t: self.k_t,
                m,
                k,
                n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnStats {
    pub busy: u64,
    pub idle: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CycleStats {
    pub total_cycles: u64,
    pub per_column: Vec<ColumnStats>,
    pub sync_events: u64,
    pub busy_min: u64,
    pub busy_max: u64,
    pub busy_avg: f64,
}

impl CycleStats {
    fn with_columns(n: usize) -> Self {
        Self {
            per_column: vec![ColumnStats::default(); n],
            ..Self::default()
        }
    }

    /// Charges one barrier step: each column is busy for its own count and
    /// idle until the slowest one finishes.
    fn barrier(&mut self, busy: &[u64], sparse: bool) {
        let t_sync = sync_barrier(busy);
        for (col, &b) in self.per_column.iter_mut().zip(busy) {
            col.busy += b;
            col.idle += t_sync - b;
        }
        self.total_cycles += t_sync;
        if sparse {
            self.sync_events += 1;
        }
    }

    fn summarize(&mut self) {
        let busy = self.per_column.iter().map(|c| c.busy);
        self.busy_min = busy.clone().min().unwrap_or(0);
        self.busy_max = busy.clone().max().unwrap_or(0);
        let n = self.per_column.len().max(1) as f64;
        self.busy_avg = busy.map(|b| b as f64).sum::<f64>() / n;
    }

    /// Fraction of column-cycles spent waiting at barriers.
    pub fn idle_fraction(&self) -> f64 {
        let slots = self.total_cycles as f64 * self.per_column.len() as f64;
        if slots == 0.0 {
            return 0.0;
        }
        self.per_column.iter().map(|c| c.idle as f64).sum::<f64>() / slots
    }
}

/// Barrier time of one step: the slowest column.
pub fn sync_barrier(columns: &[u64]) -> u64 {
    columns.iter().copied().max().unwrap_or(0)
}

/// Idle cycles each column spends blocked at the barrier.
pub fn barrier_idle(columns: &[u64]) -> Vec<u64> {
    let t = sync_barrier(columns);
    columns.iter().map(|&c| t - c).collect()
}

/// `A` padded with zeros and read as windows of encoded operands.
struct PaddedA<'a> {
    a: &'a Matrix<i8>,
    cfg: &'a ArrayConfig,
}

impl PaddedA<'_> {
    fn encode_window(
        &self,
        m: usize,
        k0: usize,
        len: usize,
        out: &mut Vec<EncodedOperand>,
    ) -> Result<(), SimError> {
        out.clear();
        let scheme = &self.cfg.pe.scheme;
        let zero = encode(0, scheme)?;
        for k in k0..k0 + len {
            if m < self.a.rows() && k < self.a.cols() {
                out.push(encode(self.a.get(m, k) as i32, scheme)?);
            } else {
                out.push(zero);
            }
        }
        Ok(())
    }
}

/// Step geometry shared by the functional and cycles-only simulators.
#[derive(Debug, Clone, Copy)]
struct Steps {
    u: Unroll,
    k_pad: usize,
    /// k steps per output tile and the window each group consumes per step.
    k_steps: usize,
    window: usize,
}

impl Steps {
    fn new(cfg: &ArrayConfig, sched: &TileSchedule) -> Self {
        let u = cfg.unroll();
        let k_pad = sched.k_t * u.k;
        let (k_steps, window) = match cfg.dataflow {
            Dataflow::OutputStationary2D => (1, k_pad),
            _ => (sched.k_t, cfg.k_p()),
        };
        Self {
            u,
            k_pad,
            k_steps,
            window,
        }
    }

    fn offset(&self, kt: usize, group: usize) -> usize {
        (kt * self.u.k_groups + group) * self.window
    }
}

fn check_banks(cfg: &ArrayConfig, sched: &TileSchedule, k_pad: usize) -> Result<(), SimError> {
    if cfg.dataflow != Dataflow::OutputStationary2D {
        return Ok(());
    }
    let dims = LayoutDims::new(cfg.m_p, sched.m_t, k_pad, cfg.bank_dk)?;
    for mt in 0..sched.m_t {
        check_tile_fetch(mt, &dims, fetch_k)?;
    }
    Ok(())
}

fn check_shapes(a: &Matrix<i8>, b: &Matrix<i8>) -> Result<(), SimError> {
    if a.cols() != b.rows() {
        return Err(SimError::ShapeMismatch {
            a_rows: a.rows(),
            a_cols: a.cols(),
            b_rows: b.rows(),
            b_cols: b.cols(),
        });
    }
    Ok(())
}

/// Runs the GEMM bit-exactly through PE state machines.
pub fn simulate_gemm(
    a: &Matrix<i8>,
    b: &Matrix<i8>,
    cfg: &ArrayConfig,
    sched: &TileSchedule,
) -> Result<(Matrix<i32>, CycleStats), SimError> {
    check_shapes(a, b)?;
    cfg.validate()?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    sched.check(m, k, n, cfg)?;
    let st = Steps::new(cfg, sched);
    let u = st.u;
    check_banks(cfg, sched, st.k_pad)?;

    let width = cfg.pe.acc_width;
    let sparse = cfg.pe.variant.is_sparse();
    let src = PaddedA { a, cfg };
    let bt = Matrix::from_fn(
        n,
        st.k_pad,
        |r, c| {
            if c < k {
                b.get(c, r) as i32
            } else {
                0
            }
        },
    );

    let groups = u.m * u.k_groups;
    let template = PeState::new(&cfg.pe)?;
    let mut pes = vec![template; groups * u.n];
    let mut out = vec![0i64; u.m * u.n];
    let mut busy = vec![0u64; groups];
    let mut window = Vec::with_capacity(st.window);
    let mut stats = CycleStats::with_columns(groups);
    let mut c = Matrix::<i32>::zeros(m, n);

    for (mt, nt) in sched.tiles() {
        pes.iter_mut().for_each(PeState::reset);
        out.iter_mut().for_each(|o| *o = 0);
        let live_n = (n - nt * u.n).min(u.n);
        for kt in 0..st.k_steps {
            for mi in 0..u.m {
                let row = mt * u.m + mi;
                for g in 0..u.k_groups {
                    let k0 = st.offset(kt, g);
                    src.encode_window(row, k0, st.window, &mut window)?;
                    let col = mi * u.k_groups + g;
                    let mut cycles = None;
                    for j in 0..live_n {
                        let nn = nt * u.n + j;
                        let pe = match cfg.dataflow {
                            // One state per output, handed down the rows.
                            Dataflow::WeightStationarySystolic => &mut pes[j],
                            _ => &mut pes[col * u.n + j],
                        };
                        let spent = drive_stream(pe, &window, &bt.row(nn)[k0..k0 + st.window])?;
                        match cycles {
                            None => cycles = Some(spent),
                            Some(first) if first != spent => {
                                return Err(SimError::NonUniformColumn {
                                    first,
                                    other: spent,
                                })
                            }
                            _ => {}
                        }
                    }
                    busy[col] = cycles.unwrap_or(0);
                }
            }
            stats.barrier(&busy, sparse);
            // Per-step reductions leave the array through the vector core.
            match cfg.dataflow {
                Dataflow::WeightStationarySystolic => {
                    for j in 0..live_n {
                        out[j] = accumulate(out[j], pes[j].finalize()?, width);
                        pes[j].reset();
                    }
                }
                Dataflow::AdderTree => {
                    for j in 0..live_n {
                        for g in 0..u.k_groups {
                            let pe = &mut pes[g * u.n + j];
                            out[j] = accumulate(out[j], pe.finalize()?, width);
                            pe.reset();
                        }
                    }
                }
                _ => {}
            }
        }
        if matches!(
            cfg.dataflow,
            Dataflow::OutputStationary2D | Dataflow::Cube3D { .. }
        ) {
            for mi in 0..u.m {
                for j in 0..live_n {
                    for g in 0..u.k_groups {
                        let v = pes[(mi * u.k_groups + g) * u.n + j].finalize()?;
                        out[mi * u.n + j] = accumulate(out[mi * u.n + j], v, width);
                    }
                }
            }
        }
        for mi in 0..u.m {
            let row = mt * u.m + mi;
            if row >= m {
                break;
            }
            for j in 0..live_n {
                c.set(row, nt * u.n + j, to_i32(out[mi * u.n + j], width));
            }
        }
    }
    stats.summarize();
    Ok((c, stats))
}

fn to_i32(v: i64, width: AccWidth) -> i32 {
    width.wrap(v as i128) as i32
}

/// Busy cycles of every sync group, step by step, from digit counts of `A`
/// alone. `trace[step][column]`.
pub fn column_trace(
    cfg: &ArrayConfig,
    sched: &TileSchedule,
    a: &Matrix<i8>,
) -> Result<Vec<Vec<u64>>, SimError> {
    let mut trace = Vec::new();
    for_each_step(cfg, sched, a, |busy| trace.push(busy.to_vec()))?;
    Ok(trace)
}

/// Cycle statistics without computing `C`. Equal to the statistics of
/// [`simulate_gemm`] for any `B` with `n` columns.
pub fn simulate_cycles(
    cfg: &ArrayConfig,
    sched: &TileSchedule,
    a: &Matrix<i8>,
) -> Result<CycleStats, SimError> {
    let sparse = cfg.pe.variant.is_sparse();
    let mut stats = CycleStats::with_columns(cfg.columns());
    for_each_step(cfg, sched, a, |busy| stats.barrier(busy, sparse))?;
    stats.summarize();
    Ok(stats)
}

fn for_each_step(
    cfg: &ArrayConfig,
    sched: &TileSchedule,
    a: &Matrix<i8>,
    mut sink: impl FnMut(&[u64]),
) -> Result<(), SimError> {
    cfg.validate()?;
    let u = cfg.unroll();
    let need_k = a.cols().div_ceil(u.k).max(1);
    let need_m = a.rows().div_ceil(u.m).max(1);
    if sched.k_t < need_k || sched.m_t < need_m {
        return Err(SimError::ScheduleTooSmall {
            m_t: sched.m_t,
            n_t: sched.n_t,
            k_t: sched.k_t,
            m: a.rows(),
            k: a.cols(),
            n: sched.n_t * u.n,
        });
    }
    let st = Steps::new(cfg, sched);
    check_banks(cfg, sched, st.k_pad)?;
    let src = PaddedA { a, cfg };
    let groups = u.m * u.k_groups;
    let mut window = Vec::with_capacity(st.window);

    // Columns depend only on the row tile, so each row tile is costed once.
    let mut per_mt = vec![vec![0u64; groups]; st.k_steps];
    let mut costed = None;
    for (mt, _) in sched.tiles() {
        if costed != Some(mt) {
            for (kt, busy) in per_mt.iter_mut().enumerate() {
                for mi in 0..u.m {
                    for g in 0..u.k_groups {
                        src.encode_window(mt * u.m + mi, st.offset(kt, g), st.window, &mut window)?;
                        busy[mi * u.k_groups + g] = cfg.pe.stream_cycles(&window);
                    }
                }
            }
            costed = Some(mt);
        }
        for busy in &per_mt {
            sink(busy);
        }
    }
    Ok(())
}
