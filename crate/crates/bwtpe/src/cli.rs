//! `bwtpe` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use bwtpe_core::analytics::TsyncModel;
use bwtpe_core::arith::AccWidth;
use bwtpe_core::array::{ArrayConfig, Dataflow};
use bwtpe_core::encoding::DigitTable;
use bwtpe_core::matrix::Matrix;
use bwtpe_core::pe::{PeConfig, PeVariant};
use bwtpe_core::rng::derive_seed;
use bwtpe_core::workloads::{GemmShape, MatrixSpec};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::experiments::{self as exp, ExpError, SimSettings, SimulateResult, TileOverride};
use crate::io::{load_digit_table, load_workload, to_json_pretty, write_csv, IoError, Workload};
use crate::manifest::{Report, RunManifest};
use crate::presets;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "bwtpe",
    version,
    about = "Bit-weight PE array simulator and models"
)]
pub struct Cli {
    /// Worker threads for independent grid points.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the result as CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// NumPP histogram of every 8-bit value and averages over normal matrices.
    EncodeStats(EncodeStatsArgs),
    /// Expected barrier time of sparse columns.
    Tsync(TsyncArgs),
    /// Cycle-level array simulation of a workload or one GEMM.
    Simulate(SimulateArgs),
    /// Component counts of an array.
    Cost(CostArgs),
    /// Workload file utilities.
    #[command(subcommand)]
    Workload(WorkloadCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct SchemeArgs {
    /// mbe, bit-serial-c, bit-serial-m or table.
    #[arg(long, default_value = "mbe")]
    pub scheme: String,
    /// Digit table for `--scheme table`.
    #[arg(long, value_name = "PATH")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeStatsArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.5, 5.0])]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 1024)]
    pub rows: usize,
    #[arg(long, default_value_t = 1024)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TsyncArgs {
    /// Reduction lengths; a comma list forms a grid with `--s` and `--mp`.
    #[arg(long, value_delimiter = ',', default_values_t = [576])]
    pub k: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.38])]
    pub s: Vec<f64>,
    #[arg(long = "mp", value_delimiter = ',', default_values_t = [32])]
    pub m_p: Vec<u32>,
    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ArrayArgs {
    #[arg(long, default_value = "opt3")]
    pub variant: String,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value = "os2d")]
    pub dataflow: String,
    #[arg(long = "mp", default_value_t = 32)]
    pub m_p: usize,
    #[arg(long = "np", default_value_t = 32)]
    pub n_p: usize,
    /// Operands per PE step; defaults per variant.
    #[arg(long = "kp")]
    pub k_p: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub acc_width: u32,
    /// Minimum cycles charged per operand (0 is ideal zero skipping).
    #[arg(long, default_value_t = 0)]
    pub min_cycles: u32,
    /// Consecutive reduction elements per memory bank.
    #[arg(long, default_value_t = 1)]
    pub bank_dk: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// Bundled workload: resnet18, mobilenetv3, gpt2 or vit.
    #[arg(long, group = "input")]
    pub preset: Option<String>,
    #[arg(long, value_name = "PATH", group = "input")]
    pub workload: Option<PathBuf>,
    /// One random GEMM, `MxKxN`.
    #[arg(long, value_name = "MxKxN", group = "input")]
    pub gemm: Option<String>,
    /// `A` is the N×N identity, `B` random; checks `C == B`.
    #[arg(long, value_name = "N", group = "input")]
    pub identity: Option<usize>,
    /// Operand spread for `--gemm` and `--identity`.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Overrides the workload seed; seeds `--gemm` and `--identity`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "mt")]
    pub m_t: Option<usize>,
    #[arg(long = "nt")]
    pub n_t: Option<usize>,
    #[arg(long = "kt")]
    pub k_t: Option<usize>,
    /// Rows of `A` simulated per workload GEMM.
    #[arg(long, default_value_t = 256)]
    pub max_m: usize,
    /// Check workload GEMMs against the oracle.
    #[arg(long)]
    pub verify: bool,
    /// Columns of `B` used when verifying workload GEMMs.
    #[arg(long, default_value_t = 64)]
    pub max_verify_n: usize,
    /// Report the cycle ratio against another variant.
    #[arg(long)]
    pub compare: Option<String>,
    /// Corrupt one output element (exercises the mismatch path).
    #[arg(long, hide = true)]
    pub fault_inject: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CostArgs {
    #[command(flatten)]
    pub array: ArrayArgs,
    /// Reduction length used for amortized adders.
    #[arg(long, default_value_t = 1024)]
    pub k: u64,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum WorkloadCmd {
    /// Parse and lower a workload file, listing its GEMMs.
    Validate { path: PathBuf },
}

fn config_err(e: impl std::fmt::Display) -> ExpError {
    ExpError::Config(e.to_string())
}

fn load_scheme(a: &SchemeArgs) -> Result<bwtpe_core::encoding::DigitScheme, ExpError> {
    let table: Option<DigitTable> = a.table.as_deref().map(load_digit_table).transpose()?;
    exp::parse_scheme(&a.scheme, table)
}

fn parse_variant(s: &str) -> Result<PeVariant, ExpError> {
    s.parse().map_err(config_err)
}

pub fn array_config(a: &ArrayArgs) -> Result<ArrayConfig, ExpError> {
    let variant = parse_variant(&a.variant)?;
    let width = AccWidth::new(a.acc_width).map_err(config_err)?;
    let mut pe = PeConfig::new(variant, load_scheme(&a.scheme)?)
        .with_acc_width(width)
        .with_min_cycles(a.min_cycles);
    if let Some(k) = a.k_p {
        pe = pe.with_k_p(k);
    }
    let dataflow: Dataflow = a.dataflow.parse().map_err(config_err)?;
    let cfg = ArrayConfig {
        bank_dk: a.bank_dk,
        ..ArrayConfig::new(a.m_p, a.n_p, pe, dataflow)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_gemm(s: &str) -> Result<GemmShape, ExpError> {
    let dims: Vec<usize> = s
        .split(['x', 'X'])
        .map(|d| d.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| ExpError::Config(format!("--gemm `{s}`: expected MxKxN")))?;
    match dims[..] {
        [m, k, n] => Ok(GemmShape::new(m, k, n)?),
        _ => Err(ExpError::Config(format!("--gemm `{s}`: expected MxKxN"))),
    }
}

/// What one subcommand produced.
struct Outcome {
    report: String,
    mismatches: u64,
    diff: Option<String>,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Self {
            report,
            mismatches: 0,
            diff: None,
        }
    }
}

fn emit<T: Serialize, R: Serialize>(
    cli: &Cli,
    started: RunManifest,
    result: T,
    csv_rows: &[R],
) -> Result<String, ExpError> {
    if let Some(path) = &cli.csv {
        write_csv(path, csv_rows)?;
    }
    let report = Report {
        manifest: started.finish(),
        result,
    };
    Ok(to_json_pretty(&report)?)
}

#[derive(Serialize)]
struct EncodeRow {
    section: &'static str,
    key: f64,
    value: f64,
}

#[derive(Serialize)]
struct TsyncRow {
    k: u64,
    s: f64,
    m_p: u32,
    expectation: f64,
    saving: f64,
    mc_mean: Option<f64>,
    mc_stderr: Option<f64>,
}

#[derive(Serialize)]
struct GemmRow<'a> {
    layer: usize,
    label: &'a str,
    m: usize,
    k: usize,
    n: usize,
    simulated_m: usize,
    repeat: usize,
    total_cycles: u64,
    sync_events: u64,
    idle_fraction: f64,
    avg_numpp: f64,
    compare_cycles: Option<u64>,
    mismatches: Option<u64>,
}

fn gemm_rows(r: &SimulateResult) -> Vec<GemmRow<'_>> {
    r.gemms
        .iter()
        .map(|g| GemmRow {
            layer: g.layer,
            label: &g.label,
            m: g.shape.m,
            k: g.shape.k,
            n: g.shape.n,
            simulated_m: g.simulated_m,
            repeat: g.repeat,
            total_cycles: g.stats.total_cycles,
            sync_events: g.stats.sync_events,
            idle_fraction: g.idle_fraction,
            avg_numpp: g.avg_numpp,
            compare_cycles: g.compare_cycles,
            mismatches: g.verification.as_ref().map(|v| v.mismatches),
        })
        .collect()
}

fn config_value(cli: &Cli) -> serde_json::Value {
    serde_json::to_value(cli).unwrap_or(serde_json::Value::Null)
}

fn encode_stats(cli: &Cli, a: &EncodeStatsArgs) -> Result<Outcome, ExpError> {
    let scheme = load_scheme(&a.scheme)?;
    let manifest = RunManifest::start("encode-stats", config_value(cli), vec![a.seed]);
    let r = exp::with_jobs(cli.jobs, || {
        exp::encode_stats(&scheme, &a.sigma, a.rows, a.cols, a.seed)
    })?;
    let mut rows: Vec<EncodeRow> = r
        .histogram
        .iter()
        .enumerate()
        .map(|(n, &c)| EncodeRow {
            section: "histogram",
            key: n as f64,
            value: c as f64,
        })
        .collect();
    rows.extend(r.averages.iter().map(|x| EncodeRow {
        section: "avg_numpp",
        key: x.sigma,
        value: x.avg_numpp,
    }));
    let report = emit(cli, manifest, &r, &rows)?;
    Ok(Outcome::ok(report))
}

fn tsync(cli: &Cli, a: &TsyncArgs) -> Result<Outcome, ExpError> {
    let mut models = Vec::new();
    for &k in &a.k {
        for &s in &a.s {
            for &m_p in &a.m_p {
                models.push(TsyncModel::new(k, s, m_p)?);
            }
        }
    }
    models.sort_by(|x, y| {
        (x.k(), x.m_p())
            .cmp(&(y.k(), y.m_p()))
            .then(x.s().total_cmp(&y.s()))
    });
    let manifest = RunManifest::start("tsync", config_value(cli), vec![a.seed]);
    let points = exp::with_jobs(cli.jobs, || {
        models
            .iter()
            .enumerate()
            .map(|(i, m)| exp::tsync(m, a.mc, derive_seed(a.seed, i as u64)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rows: Vec<TsyncRow> = points
        .iter()
        .map(|p| TsyncRow {
            k: p.k,
            s: p.s,
            m_p: p.m_p,
            expectation: p.expectation,
            saving: p.saving,
            mc_mean: p.monte_carlo.map(|m| m.mean),
            mc_stderr: p.monte_carlo.map(|m| m.stderr),
        })
        .collect();
    let report = emit(cli, manifest, &points, &rows)?;
    Ok(Outcome::ok(report))
}

fn random_matrix(rows: usize, cols: usize, sigma: f64, seed: u64) -> Result<Matrix<i8>, ExpError> {
    Ok(exp::gen_matrix_par(&MatrixSpec::normal(
        rows, cols, sigma, seed,
    ))?)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<Outcome, ExpError> {
    let cfg = array_config(&a.array)?;
    let mut s = SimSettings::new(cfg);
    s.max_m = a.max_m;
    s.verify = a.verify;
    s.max_verify_n = a.max_verify_n;
    s.compare = a.compare.as_deref().map(parse_variant).transpose()?;
    s.fault_inject = a.fault_inject;
    s.tiles = TileOverride {
        m_t: a.m_t,
        n_t: a.n_t,
        k_t: a.k_t,
    };
    let seed = a.seed.unwrap_or(0);
    let workload: Option<Workload> = match (&a.preset, &a.workload) {
        (Some(name), _) => Some(presets::preset(name).ok_or_else(|| {
            ExpError::Config(format!(
                "unknown preset `{name}` (expected one of {})",
                presets::names().collect::<Vec<_>>().join(", ")
            ))
        })??),
        (_, Some(path)) => Some(load_workload(path)?),
        _ => None,
    };
    let manifest = RunManifest::start("simulate", config_value(cli), vec![seed]);
    let result = exp::with_jobs(cli.jobs, || -> Result<SimulateResult, ExpError> {
        if let Some(mut w) = workload {
            if let Some(seed) = a.seed {
                w.matrix.seed = seed;
            }
            exp::simulate_workload(&w, &s)
        } else if let Some(n) = a.identity {
            let id = Matrix::<i8>::identity(n);
            let b = random_matrix(n, n, a.sigma, seed)?;
            exp::simulate_matrices("identity", &id, &b, seed, &s)
        } else if let Some(g) = &a.gemm {
            let shape = parse_gemm(g)?;
            let am = random_matrix(shape.m, shape.k, a.sigma, seed)?;
            let bm = random_matrix(shape.k, shape.n, a.sigma, derive_seed(seed, 1))?;
            exp::simulate_matrices("gemm", &am, &bm, seed, &s)
        } else {
            Err(ExpError::Config(
                "simulate needs one of --preset, --workload, --gemm, --identity".into(),
            ))
        }
    })?;
    let rows = gemm_rows(&result);
    let report = emit(cli, manifest, &result, &rows)?;
    let diff = result.gemms.iter().find_map(|g| {
        let v = g.verification.as_ref()?;
        let m = v.first_mismatch.as_ref()?;
        Some(format!(
            "layer {} `{}`: {} of {}x{} outputs differ; first at ({}, {}): got {}, want {}",
            g.layer, g.label, v.mismatches, v.rows, v.cols, m.row, m.col, m.got, m.want
        ))
    });
    Ok(Outcome {
        report,
        mismatches: result.mismatches,
        diff,
    })
}

#[derive(Serialize)]
struct CostRow {
    variant: PeVariant,
    pe_count: u64,
    units: u64,
    encoders: u64,
    sparse_encoders: u64,
    cppg_instances: u64,
    mux_instances: u64,
    shifters: u64,
    compressor_input_ports: u64,
    register_bits_in: u64,
    register_bits_out: u64,
    external_full_adders: u64,
    external_shifters: u64,
}

fn cost(cli: &Cli, a: &CostArgs) -> Result<Outcome, ExpError> {
    let cfg = array_config(&a.array)?;
    let manifest = RunManifest::start("cost", config_value(cli), vec![]);
    let r = exp::cost(&cfg, a.k)?;
    let t = &r.total;
    let row = CostRow {
        variant: r.variant,
        pe_count: r.pe_count,
        units: r.units,
        encoders: t.encoders,
        sparse_encoders: t.sparse_encoders,
        cppg_instances: t.cppg_instances,
        mux_instances: t.mux_instances,
        shifters: t.shifters,
        compressor_input_ports: t.compressor_input_ports,
        register_bits_in: t.register_bits_in,
        register_bits_out: t.register_bits_out,
        external_full_adders: r.external_full_adders,
        external_shifters: r.external_shifters,
    };
    let report = emit(cli, manifest, r, &[row])?;
    Ok(Outcome::ok(report))
}

#[derive(Serialize)]
struct LoweredGemm {
    layer: usize,
    label: &'static str,
    m: usize,
    k: usize,
    n: usize,
    repeat: usize,
    macs: u64,
}

#[derive(Serialize)]
struct ValidateResult {
    name: String,
    layers: usize,
    gemms: Vec<LoweredGemm>,
    total_macs: u64,
}

fn validate(cli: &Cli, path: &std::path::Path) -> Result<Outcome, ExpError> {
    let manifest = RunManifest::start("workload validate", config_value(cli), vec![]);
    let w = load_workload(path)?;
    let mut gemms = Vec::new();
    for (i, l) in w.layers.iter().enumerate() {
        for g in bwtpe_core::workloads::img2col_gemm(l)? {
            gemms.push(LoweredGemm {
                layer: i,
                label: g.label,
                m: g.shape.m,
                k: g.shape.k,
                n: g.shape.n,
                repeat: g.repeat,
                macs: g.shape.macs() * g.repeat as u64,
            });
        }
    }
    let r = ValidateResult {
        name: w.name.clone(),
        layers: w.layers.len(),
        total_macs: gemms.iter().map(|g| g.macs).sum(),
        gemms,
    };
    let report = emit(cli, manifest, &r, &r.gemms)?;
    Ok(Outcome::ok(report))
}

fn dispatch(cli: &Cli) -> Result<Outcome, ExpError> {
    if cli.jobs == 0 {
        return Err(ExpError::Config("--jobs must be at least 1".into()));
    }
    match &cli.command {
        Command::EncodeStats(a) => encode_stats(cli, a),
        Command::Tsync(a) => tsync(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Cost(a) => cost(cli, a),
        Command::Workload(WorkloadCmd::Validate { path }) => validate(cli, path),
    }
}

/// Runs the CLI and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &outcome.report).map_err(|source| IoError::Io {
            path: path.clone(),
            source,
        }),
        None => out
            .write_all(outcome.report.as_bytes())
            .map_err(|source| IoError::Io {
                path: "<stdout>".into(),
                source,
            }),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }
    if outcome.mismatches > 0 {
        let _ = writeln!(
            err,
            "verification failed: {} output mismatches",
            outcome.mismatches
        );
        if let Some(d) = &outcome.diff {
            let _ = writeln!(err, "  {d}");
        }
        return EXIT_MISMATCH;
    }
    EXIT_OK
}
