//! Report producers behind the CLI subcommands.

use bwtpe_core::analytics::tsync::{monte_carlo_shard, shard_count, tsync_saving, ShardMoments};
use bwtpe_core::analytics::{
    avg_numpp, cost_report, numpp_distribution, tsync_expectation, AnalyticsError, CostReport,
    MonteCarloEstimate, OperatingPoint, TsyncModel,
};
use bwtpe_core::array::{
    simulate_cycles, simulate_gemm, ArrayConfig, CycleStats, SimError, TileSchedule,
};
use bwtpe_core::encoding::{DigitScheme, DigitTable};
use bwtpe_core::matrix::{gemm_reference, Matrix};
use bwtpe_core::pe::{PeConfig, PeVariant};
use bwtpe_core::rng::derive_seed;
use bwtpe_core::workloads::{img2col_gemm, quantize, GemmShape, MatrixSpec, WorkloadError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::io::{IoError, Workload};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

pub const SCHEME_NAMES: [&str; 4] = ["mbe", "bit-serial-c", "bit-serial-m", "table"];

/// `bit-serial-c` is two's complement, `bit-serial-m` sign-magnitude.
/// `table` needs a digit table.
pub fn parse_scheme(name: &str, table: Option<DigitTable>) -> Result<DigitScheme, ExpError> {
    let bad = |e: bwtpe_core::encoding::EncodingError| ExpError::Config(e.to_string());
    match name {
        "mbe" => Ok(DigitScheme::Radix4Mbe),
        "bit-serial-c" => DigitScheme::twos_complement(8).map_err(bad),
        "bit-serial-m" => DigitScheme::sign_magnitude(8).map_err(bad),
        "table" => table
            .map(DigitScheme::pluggable)
            .ok_or_else(|| ExpError::Config("scheme `table` needs --table PATH".into())),
        other => Err(ExpError::Config(format!(
            "unknown scheme `{other}` (expected one of {})",
            SCHEME_NAMES.join(", ")
        ))),
    }
}

/// Runs `f` on a pool of `jobs` workers; results never depend on `jobs`.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Row-block parallel version of [`bwtpe_core::workloads::gen_matrix`];
/// produces the same matrix.
pub fn gen_matrix_par(spec: &MatrixSpec) -> Result<Matrix<i8>, WorkloadError> {
    gen_matrix_head(spec, spec.rows)
}

/// The first `rows` rows of the matrix `spec` describes, quantized with the
/// scale of the whole matrix.
pub fn gen_matrix_head(spec: &MatrixSpec, rows: usize) -> Result<Matrix<i8>, WorkloadError> {
    spec.validate()?;
    const BLOCK: usize = 64;
    let rows = rows.min(spec.rows);
    let block = |b: usize| b * BLOCK..((b + 1) * BLOCK).min(spec.rows);
    let kept: Vec<Vec<f64>> = (0..rows.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| spec.sample_rows(block(b)))
        .collect();
    let abs_max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tail_max = (rows.div_ceil(BLOCK)..spec.rows.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| abs_max(&spec.sample_rows(block(b))))
        .reduce(|| 0.0, f64::max);
    let max_abs = kept.iter().map(|v| abs_max(v)).fold(tail_max, f64::max);
    let f = spec.quant_factor(max_abs);
    let data = kept
        .into_iter()
        .flatten()
        .take(rows * spec.cols)
        .map(|x| quantize(x, f))
        .collect();
    Matrix::new(rows, spec.cols, data).map_err(|_| WorkloadError::InvalidSpec("dimensions"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaAverage {
    pub sigma: f64,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub avg_numpp: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeStats {
    pub scheme: String,
    /// `histogram[n]`: 8-bit values with `n` nonzero digits.
    pub histogram: Vec<u64>,
    pub total: u64,
    pub exhaustive_mean: f64,
    pub averages: Vec<SigmaAverage>,
}

/// Exhaustive NumPP histogram, plus average NumPPs of one quantized normal
/// matrix per `sigma` (matrix `i` uses stream `derive_seed(seed, i)`).
pub fn encode_stats(
    scheme: &DigitScheme,
    sigmas: &[f64],
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<EncodeStats, ExpError> {
    let h = numpp_distribution(scheme)?;
    let averages = sigmas
        .par_iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let seed = derive_seed(seed, i as u64);
            let m = gen_matrix_par(&MatrixSpec::normal(rows, cols, sigma, seed))?;
            let avg = avg_numpp(&m, scheme)?;
            Ok(SigmaAverage {
                sigma,
                rows,
                cols,
                seed,
                avg_numpp: avg,
                sparsity: 1.0 - avg / scheme.bw() as f64,
            })
        })
        .collect::<Result<Vec<_>, ExpError>>()?;
    Ok(EncodeStats {
        scheme: scheme.name().to_owned(),
        histogram: h.counts().to_vec(),
        total: h.total(),
        exhaustive_mean: h.mean(),
        averages,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsyncResult {
    pub k: u64,
    pub s: f64,
    pub m_p: u32,
    pub mu: f64,
    pub sigma: f64,
    pub expectation: f64,
    pub saving: f64,
    pub monte_carlo: Option<MonteCarloEstimate>,
    /// Closed form within three standard errors of the sample mean.
    pub agrees_within_3_stderr: Option<bool>,
}

/// Monte-Carlo estimate with shards spread over the current pool.
pub fn monte_carlo_par(model: &TsyncModel, trials: u64, seed: u64) -> MonteCarloEstimate {
    let shards: Vec<ShardMoments> = (0..shard_count(trials))
        .into_par_iter()
        .map(|i| monte_carlo_shard(model, trials, seed, i))
        .collect();
    let m = shards
        .into_iter()
        .fold(ShardMoments::default(), ShardMoments::merge);
    MonteCarloEstimate::from_moments(m, seed)
}

pub fn tsync(model: &TsyncModel, trials: Option<u64>, seed: u64) -> Result<TsyncResult, ExpError> {
    let expectation = tsync_expectation(model);
    let mc = match trials {
        Some(0) => return Err(ExpError::Config("--mc needs at least one trial".into())),
        Some(n) => Some(monte_carlo_par(model, n, seed)),
        None => None,
    };
    Ok(TsyncResult {
        k: model.k(),
        s: model.s(),
        m_p: model.m_p(),
        mu: model.mu(),
        sigma: model.sigma(),
        expectation,
        saving: tsync_saving(model),
        agrees_within_3_stderr: mc.map(|m| (m.mean - expectation).abs() <= 3.0 * m.stderr),
        monte_carlo: mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSnapshot {
    pub variant: PeVariant,
    pub scheme: String,
    pub m_p: usize,
    pub n_p: usize,
    pub k_p: usize,
    pub dataflow: String,
    pub acc_width: u32,
    pub min_cycles_per_operand: u32,
    pub bank_dk: usize,
}

impl ConfigSnapshot {
    pub fn of(cfg: &ArrayConfig) -> Self {
        Self {
            variant: cfg.pe.variant,
            scheme: cfg.pe.scheme.name().to_owned(),
            m_p: cfg.m_p,
            n_p: cfg.n_p,
            k_p: cfg.pe.k_p,
            dataflow: cfg.dataflow.to_string(),
            acc_width: cfg.pe.acc_width.bits(),
            min_cycles_per_operand: cfg.pe.min_cycles_per_operand,
            bank_dk: cfg.bank_dk,
        }
    }
}

pub fn cost(cfg: &ArrayConfig, nominal_k: u64) -> Result<CostReport, ExpError> {
    cfg.validate()?;
    Ok(cost_report(cfg, nominal_k)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub row: usize,
    pub col: usize,
    pub got: i32,
    pub want: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub rows: usize,
    pub cols: usize,
    pub mismatches: u64,
    pub first_mismatch: Option<Mismatch>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

pub fn compare_outputs(got: &Matrix<i32>, want: &Matrix<i32>) -> Verification {
    let mut v = Verification {
        rows: want.rows(),
        cols: want.cols(),
        mismatches: 0,
        first_mismatch: None,
    };
    for r in 0..want.rows() {
        for c in 0..want.cols() {
            let (g, w) = (got.get(r, c), want.get(r, c));
            if g != w {
                v.mismatches += 1;
                v.first_mismatch.get_or_insert(Mismatch {
                    row: r,
                    col: c,
                    got: g,
                    want: w,
                });
            }
        }
    }
    v
}

/// Barrier-time predictions next to the simulated mean. The operand clock
/// runs one Bernoulli trial per element of the reduction window, the digit
/// clock one per digit; the simulator retires one nonzero digit per cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncComparison {
    pub window: u64,
    pub columns: u32,
    pub digit_sparsity: f64,
    pub operand_clock: f64,
    pub digit_clock: f64,
    pub simulated_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GemmRecord {
    pub layer: usize,
    pub label: String,
    pub shape: GemmShape,
    /// Rows of `A` actually simulated (capped).
    pub simulated_m: usize,
    pub repeat: usize,
    pub seed: u64,
    pub avg_numpp: f64,
    pub stats: CycleStats,
    pub idle_fraction: f64,
    pub sync: Option<SyncComparison>,
    pub compare_cycles: Option<u64>,
    pub verification: Option<Verification>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateResult {
    pub workload: String,
    pub config: ConfigSnapshot,
    pub gemms: Vec<GemmRecord>,
    /// Sum over GEMMs of simulated cycles times `repeat`.
    pub total_cycles: u64,
    pub compare_variant: Option<PeVariant>,
    pub compare_total_cycles: Option<u64>,
    /// `compare_total_cycles / total_cycles`.
    pub cycle_ratio: Option<f64>,
    /// Same ratio in wall time, each variant at its nominal clock.
    pub nominal_time_ratio: Option<f64>,
    pub mismatches: u64,
}

#[derive(Debug, Clone)]
pub struct SimSettings {
    pub cfg: ArrayConfig,
    /// Cap on simulated rows of `A` per GEMM.
    pub max_m: usize,
    /// Run the bit-exact simulator and compare with the oracle.
    pub verify: bool,
    /// Cap on columns of `B` when verifying.
    pub max_verify_n: usize,
    pub compare: Option<PeVariant>,
    /// Corrupt one output element before verification.
    pub fault_inject: bool,
    /// Explicit tile counts; `None` fits the GEMM.
    pub tiles: TileOverride,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TileOverride {
    pub m_t: Option<usize>,
    pub n_t: Option<usize>,
    pub k_t: Option<usize>,
}

impl SimSettings {
    pub fn new(cfg: ArrayConfig) -> Self {
        Self {
            cfg,
            max_m: 256,
            verify: false,
            max_verify_n: 64,
            compare: None,
            fault_inject: false,
            tiles: TileOverride::default(),
        }
    }

    pub fn schedule(&self, m: usize, k: usize, n: usize) -> TileSchedule {
        let fit = TileSchedule::fit(m, k, n, &self.cfg);
        TileSchedule {
            m_t: self.tiles.m_t.unwrap_or(fit.m_t),
            n_t: self.tiles.n_t.unwrap_or(fit.n_t),
            k_t: self.tiles.k_t.unwrap_or(fit.k_t),
            ..fit
        }
    }
}

fn with_variant(cfg: &ArrayConfig, v: PeVariant) -> ArrayConfig {
    let mut pe = PeConfig::new(v, cfg.pe.scheme.clone())
        .with_acc_width(cfg.pe.acc_width)
        .with_min_cycles(cfg.pe.min_cycles_per_operand);
    if v == cfg.pe.variant {
        pe.k_p = cfg.pe.k_p;
    }
    ArrayConfig { pe, ..cfg.clone() }
}

pub fn sync_comparison(
    cfg: &ArrayConfig,
    sched: &TileSchedule,
    stats: &CycleStats,
    avg: f64,
) -> Result<Option<SyncComparison>, ExpError> {
    if !cfg.pe.variant.is_sparse() || stats.sync_events == 0 {
        return Ok(None);
    }
    let u = cfg.unroll();
    let window = match cfg.dataflow {
        bwtpe_core::array::Dataflow::OutputStationary2D => sched.k_t * u.k,
        _ => cfg.k_p(),
    } as u64;
    let bw = cfg.pe.bw() as u32;
    let s = (1.0 - avg / bw as f64).clamp(0.0, 1.0);
    let columns = cfg.columns() as u32;
    let operand = TsyncModel::new(window, s, columns)?;
    let digit = TsyncModel::digit_clock(window, s, columns, bw)?;
    Ok(Some(SyncComparison {
        window,
        columns,
        digit_sparsity: s,
        operand_clock: tsync_expectation(&operand),
        digit_clock: tsync_expectation(&digit),
        simulated_mean: stats.total_cycles as f64 / stats.sync_events as f64,
    }))
}

/// Simulates one GEMM of a workload on synthetic operands.
pub fn simulate_shape(
    layer: usize,
    label: &str,
    shape: GemmShape,
    repeat: usize,
    seed: u64,
    params: &bwtpe_core::workloads::MatrixParams,
    s: &SimSettings,
) -> Result<GemmRecord, ExpError> {
    let m = shape.m.min(s.max_m.max(1));
    let a = gen_matrix_head(
        &MatrixSpec {
            seed,
            ..params.with_dims(shape.m, shape.k)
        },
        m,
    )?;
    let sched = s.schedule(m, shape.k, shape.n);
    let stats = simulate_cycles(&s.cfg, &sched, &a)?;
    let avg = avg_numpp(&a, &s.cfg.pe.scheme)?;
    let compare_cycles = match s.compare {
        Some(v) => {
            let other = with_variant(&s.cfg, v);
            let sched = TileSchedule::fit(m, shape.k, shape.n, &other);
            Some(simulate_cycles(&other, &sched, &a)?.total_cycles)
        }
        None => None,
    };
    let verification = if s.verify {
        let n = shape.n.min(s.max_verify_n.max(1));
        let b = gen_matrix_head(
            &MatrixSpec {
                seed: derive_seed(seed, 1),
                ..params.with_dims(shape.n, shape.k)
            },
            n,
        )?
        .transpose();
        let sched_n = s.schedule(m, shape.k, n);
        Some(verify_gemm(&a, &b, &s.cfg, &sched_n, s.fault_inject)?.1)
    } else {
        None
    };
    Ok(GemmRecord {
        layer,
        label: label.to_owned(),
        shape,
        simulated_m: m,
        repeat,
        seed,
        avg_numpp: avg,
        idle_fraction: stats.idle_fraction(),
        sync: sync_comparison(&s.cfg, &sched, &stats, avg)?,
        stats,
        compare_cycles,
        verification,
    })
}

/// Bit-exact simulation checked against the schoolbook oracle.
pub fn verify_gemm(
    a: &Matrix<i8>,
    b: &Matrix<i8>,
    cfg: &ArrayConfig,
    sched: &TileSchedule,
    fault_inject: bool,
) -> Result<(CycleStats, Verification), ExpError> {
    let (mut c, stats) = simulate_gemm(a, b, cfg, sched)?;
    if fault_inject && c.rows() > 0 && c.cols() > 0 {
        c.set(0, 0, c.get(0, 0).wrapping_add(1));
    }
    let want =
        gemm_reference(a, b, cfg.pe.acc_width).map_err(|e| ExpError::Config(e.to_string()))?;
    Ok((stats, compare_outputs(&c, &want)))
}

fn time_ratio(s: &SimSettings, compare_cycles: Option<u64>, cycles: u64) -> Option<f64> {
    let other = s.compare?;
    if cycles == 0 {
        return None;
    }
    let f_self = OperatingPoint::nominal(s.cfg.pe.variant).freq_hz;
    let f_other = OperatingPoint::nominal(other).freq_hz;
    Some((compare_cycles? as f64 / f_other) / (cycles as f64 / f_self))
}

/// Per-GEMM operand seed: layer `i`, GEMM `j` of that layer.
pub fn gemm_seed(workload_seed: u64, layer: usize, gemm: usize) -> u64 {
    derive_seed(workload_seed, ((layer as u64) << 16) | gemm as u64)
}

pub fn simulate_workload(w: &Workload, s: &SimSettings) -> Result<SimulateResult, ExpError> {
    s.cfg.validate()?;
    let mut jobs = Vec::new();
    for (i, layer) in w.layers.iter().enumerate() {
        for (j, g) in img2col_gemm(layer)?.into_iter().enumerate() {
            jobs.push((i, g, gemm_seed(w.matrix.seed, i, j)));
        }
    }
    let gemms = jobs
        .par_iter()
        .map(|(i, g, seed)| simulate_shape(*i, g.label, g.shape, g.repeat, *seed, &w.matrix, s))
        .collect::<Result<Vec<_>, _>>()?;
    let total_cycles = gemms
        .iter()
        .map(|g| g.stats.total_cycles * g.repeat as u64)
        .sum();
    let compare_total_cycles = s.compare.map(|_| {
        gemms
            .iter()
            .map(|g| g.compare_cycles.unwrap_or(0) * g.repeat as u64)
            .sum::<u64>()
    });
    let mismatches = gemms
        .iter()
        .filter_map(|g| g.verification.as_ref())
        .map(|v| v.mismatches)
        .sum();
    Ok(SimulateResult {
        workload: w.name.clone(),
        config: ConfigSnapshot::of(&s.cfg),
        total_cycles,
        compare_variant: s.compare,
        cycle_ratio: compare_total_cycles
            .filter(|_| total_cycles > 0)
            .map(|c| c as f64 / total_cycles as f64),
        nominal_time_ratio: time_ratio(s, compare_total_cycles, total_cycles),
        compare_total_cycles,
        mismatches,
        gemms,
    })
}

/// Simulates caller-supplied operands bit-exactly, always verifying.
pub fn simulate_matrices(
    label: &str,
    a: &Matrix<i8>,
    b: &Matrix<i8>,
    seed: u64,
    s: &SimSettings,
) -> Result<SimulateResult, ExpError> {
    s.cfg.validate()?;
    let shape = GemmShape {
        m: a.rows(),
        k: a.cols(),
        n: b.cols(),
    };
    let sched = s.schedule(shape.m, shape.k, shape.n);
    let (stats, verification) = verify_gemm(a, b, &s.cfg, &sched, s.fault_inject)?;
    let avg = avg_numpp(a, &s.cfg.pe.scheme)?;
    let compare_cycles = match s.compare {
        Some(v) => {
            let other = with_variant(&s.cfg, v);
            let sched = TileSchedule::fit(shape.m, shape.k, shape.n, &other);
            Some(simulate_cycles(&other, &sched, a)?.total_cycles)
        }
        None => None,
    };
    let total_cycles = stats.total_cycles;
    let mismatches = verification.mismatches;
    let record = GemmRecord {
        layer: 0,
        label: label.to_owned(),
        shape,
        simulated_m: shape.m,
        repeat: 1,
        seed,
        avg_numpp: avg,
        idle_fraction: stats.idle_fraction(),
        sync: sync_comparison(&s.cfg, &sched, &stats, avg)?,
        stats,
        compare_cycles,
        verification: Some(verification),
    };
    Ok(SimulateResult {
        workload: label.to_owned(),
        config: ConfigSnapshot::of(&s.cfg),
        gemms: vec![record],
        total_cycles,
        compare_variant: s.compare,
        compare_total_cycles: compare_cycles,
        cycle_ratio: compare_cycles
            .filter(|_| total_cycles > 0)
            .map(|c| c as f64 / total_cycles as f64),
        nominal_time_ratio: time_ratio(s, compare_cycles, total_cycles),
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bwtpe_core::array::Dataflow;
    use bwtpe_core::workloads::gen_matrix;

    fn cfg(v: PeVariant) -> ArrayConfig {
        ArrayConfig::new(
            8,
            8,
            PeConfig::new(v, DigitScheme::Radix4Mbe),
            Dataflow::OutputStationary2D,
        )
    }

    #[test]
    fn parallel_generation_matches_serial() {
        let spec = MatrixSpec::normal(150, 37, 2.5, 4);
        let serial = gen_matrix(&spec).unwrap();
        assert_eq!(with_jobs(3, || gen_matrix_par(&spec)).unwrap(), serial);
    }

    #[test]
    fn head_is_a_slice_of_the_full_matrix() {
        let spec = MatrixSpec::normal(200, 9, 1.0, 8);
        let full = gen_matrix(&spec).unwrap();
        let head = gen_matrix_head(&spec, 70).unwrap();
        assert_eq!(head.rows(), 70);
        for r in 0..70 {
            assert_eq!(head.row(r), full.row(r));
        }
    }

    #[test]
    fn schemes_parse() {
        assert_eq!(parse_scheme("mbe", None).unwrap(), DigitScheme::Radix4Mbe);
        assert!(matches!(
            parse_scheme("bit-serial-c", None).unwrap(),
            DigitScheme::Radix2TwosComplement { width: 8 }
        ));
        assert!(parse_scheme("table", None).is_err());
        assert!(parse_scheme("nope", None).is_err());
    }

    #[test]
    fn results_do_not_depend_on_jobs() {
        let model = TsyncModel::new(576, 0.38, 32).unwrap();
        let one = with_jobs(1, || tsync(&model, Some(10_000), 3)).unwrap();
        let four = with_jobs(4, || tsync(&model, Some(10_000), 3)).unwrap();
        assert_eq!(one, four);
        let s = DigitScheme::Radix4Mbe;
        let a = with_jobs(1, || encode_stats(&s, &[0.5, 1.0], 64, 64, 9)).unwrap();
        let b = with_jobs(4, || encode_stats(&s, &[0.5, 1.0], 64, 64, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fault_injection_is_caught() {
        let a = gen_matrix(&MatrixSpec::normal(9, 12, 1.0, 1)).unwrap();
        let b = gen_matrix(&MatrixSpec::normal(12, 5, 1.0, 2)).unwrap();
        let c = cfg(PeVariant::Opt3);
        let sched = TileSchedule::fit(9, 12, 5, &c);
        assert!(verify_gemm(&a, &b, &c, &sched, false).unwrap().1.passed());
        let v = verify_gemm(&a, &b, &c, &sched, true).unwrap().1;
        assert_eq!(v.mismatches, 1);
        assert_eq!(v.first_mismatch.unwrap().row, 0);
    }

    #[test]
    fn resnet_ratio_against_baseline() {
        let w = crate::presets::preset("resnet18").unwrap().unwrap();
        let mut s = SimSettings::new(cfg(PeVariant::Opt3));
        s.max_m = 16;
        s.compare = Some(PeVariant::BaselineMac);
        let r = simulate_workload(&w, &s).unwrap();
        // One digit per cycle against one operand per cycle.
        let ratio = r.cycle_ratio.unwrap();
        assert!((0.3..0.6).contains(&ratio), "{ratio}");
        assert!((r.nominal_time_ratio.unwrap() - 2.0 * ratio).abs() < 1e-9);
        assert_eq!(r.gemms.len(), 20);
        assert!(r.gemms.iter().all(|g| g.sync.is_some()));
    }
}
