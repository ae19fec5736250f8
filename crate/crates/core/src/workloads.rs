//! DNN layers as GEMM shapes, and synthetic quantized operand matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::matrix::Matrix;
use crate::rng::standard_normal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("unsupported layer: {0}")]
    UnsupportedLayer(String),
    #[error("invalid matrix spec: {0}")]
    InvalidSpec(&'static str),
}

/// `C[M×N] = A[M×K] · B[K×N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GemmShape {
    pub m: usize,
    pub k: usize,
    pub n: usize,
}

impl GemmShape {
    pub fn new(m: usize, k: usize, n: usize) -> Result<Self, WorkloadError> {
        if m == 0 || k == 0 || n == 0 {
            return Err(WorkloadError::UnsupportedLayer(format!(
                "GEMM dimensions must be positive, got {m}x{k}x{n}"
            )));
        }
        Ok(Self { m, k, n })
    }

    pub fn macs(&self) -> u64 {
        (self.m * self.k * self.n) as u64
    }
}

#[cfg(feature = "serde")]
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Conv2d {
    pub channels_in: usize,
    pub channels_out: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Dense {
    pub tokens: usize,
    pub in_features: usize,
    pub out_features: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Attention {
    pub d_model: usize,
    pub heads: usize,
    pub seq: usize,
}

/// One layer of a workload. `Gemm` passes a raw shape through unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LayerSpec {
    Conv2d(Conv2d),
    Dense(Dense),
    Attention(Attention),
    Gemm(GemmShape),
}

/// A GEMM produced by a layer, executed `repeat` times with independent
/// operands (groups, heads, or the three input projections).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LabeledGemm {
    pub label: &'static str,
    pub shape: GemmShape,
    pub repeat: usize,
}

fn labeled(
    label: &'static str,
    m: usize,
    k: usize,
    n: usize,
    repeat: usize,
) -> Result<LabeledGemm, WorkloadError> {
    Ok(LabeledGemm {
        label,
        shape: GemmShape::new(m, k, n)?,
        repeat,
    })
}

/// GEMMs a layer lowers to. A convolution becomes
/// `M = out_h·out_w, K = (c_in/g)·k_h·k_w, N = c_out/g`, repeated per group,
/// so a depthwise 3×3 layer is `c` reductions of length 9.
pub fn img2col_gemm(layer: &LayerSpec) -> Result<Vec<LabeledGemm>, WorkloadError> {
    match layer {
        LayerSpec::Conv2d(c) => {
            let g = c.groups;
            if g == 0 || c.channels_in % g != 0 || c.channels_out % g != 0 {
                return Err(WorkloadError::UnsupportedLayer(format!(
                    "groups = {g} must divide {} input and {} output channels",
                    c.channels_in, c.channels_out
                )));
            }
            let label = if g == 1 { "conv" } else { "grouped_conv" };
            Ok(alloc::vec![labeled(
                label,
                c.out_h * c.out_w,
                c.channels_in / g * c.kernel_h * c.kernel_w,
                c.channels_out / g,
                g,
            )?])
        }
        LayerSpec::Dense(d) => Ok(alloc::vec![labeled(
            "dense",
            d.tokens,
            d.in_features,
            d.out_features,
            1
        )?]),
        LayerSpec::Attention(a) => {
            if a.heads == 0 || a.d_model % a.heads != 0 {
                return Err(WorkloadError::UnsupportedLayer(format!(
                    "{} heads do not divide d_model = {}",
                    a.heads, a.d_model
                )));
            }
            let d_head = a.d_model / a.heads;
            Ok(alloc::vec![
                labeled("qkv_proj", a.seq, a.d_model, a.d_model, 3)?,
                labeled("scores", a.seq, d_head, a.seq, a.heads)?,
                labeled("context", a.seq, a.seq, d_head, a.heads)?,
                labeled("out_proj", a.seq, a.d_model, a.d_model, 1)?,
            ])
        }
        LayerSpec::Gemm(s) => Ok(alloc::vec![labeled("gemm", s.m, s.k, s.n, 1)?]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Normal {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Quantization {
    /// Scale so the largest magnitude maps to 127.
    #[default]
    SymmetricMax,
    /// `q = x / scale`.
    FixedScale(f64),
}

/// Distribution, quantizer and seed shared by every matrix of a workload.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatrixParams {
    pub dist: Normal,
    #[cfg_attr(feature = "serde", serde(default))]
    pub quantization: Quantization,
    pub seed: u64,
}

impl MatrixParams {
    pub fn with_dims(self, rows: usize, cols: usize) -> MatrixSpec {
        MatrixSpec {
            dist: self.dist,
            rows,
            cols,
            quantization: self.quantization,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatrixSpec {
    pub dist: Normal,
    pub rows: usize,
    pub cols: usize,
    pub quantization: Quantization,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn normal(rows: usize, cols: usize, sigma: f64, seed: u64) -> Self {
        Self {
            dist: Normal { mean: 0.0, sigma },
            rows,
            cols,
            quantization: Quantization::SymmetricMax,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.dist.sigma > 0.0) || !self.dist.sigma.is_finite() {
            return Err(WorkloadError::InvalidSpec("sigma must be positive"));
        }
        if !self.dist.mean.is_finite() {
            return Err(WorkloadError::InvalidSpec("mean must be finite"));
        }
        if let Quantization::FixedScale(s) = self.quantization {
            if !(s > 0.0) || !s.is_finite() {
                return Err(WorkloadError::InvalidSpec("scale must be positive"));
            }
        }
        Ok(())
    }

    /// Real-valued samples of rows `rows`, row-major.
    pub fn sample_rows(&self, rows: core::ops::Range<usize>) -> Vec<f64> {
        let cols = self.cols as u64;
        rows.flat_map(|r| {
            (0..cols).map(move |c| {
                let idx = r as u64 * cols + c;
                self.dist.mean + self.dist.sigma * standard_normal(self.seed, idx)
            })
        })
        .collect()
    }

    /// Multiplier from real values to the integer grid, given the largest
    /// sample magnitude.
    pub fn quant_factor(&self, max_abs: f64) -> f64 {
        match self.quantization {
            Quantization::SymmetricMax if max_abs > 0.0 => 127.0 / max_abs,
            Quantization::SymmetricMax => 0.0,
            Quantization::FixedScale(s) => 1.0 / s,
        }
    }
}

/// Round half to even and saturate to [−127, 127]; NaN maps to 0.
pub fn quantize(x: f64, factor: f64) -> i8 {
    let q = libm::rint(x * factor);
    if q.is_nan() {
        0
    } else {
        q.clamp(-127.0, 127.0) as i8
    }
}

pub fn gen_matrix(spec: &MatrixSpec) -> Result<Matrix<i8>, WorkloadError> {
    spec.validate()?;
    let xs = spec.sample_rows(0..spec.rows);
    let max_abs = xs.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
    let f = spec.quant_factor(max_abs);
    let data = xs.iter().map(|&x| quantize(x, f)).collect();
    Matrix::new(spec.rows, spec.cols, data).map_err(|_| WorkloadError::InvalidSpec("dimensions"))
}
