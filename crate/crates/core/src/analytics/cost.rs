//! Component counts of an array, per PE and outside the PE array.
//!
//! Counts follow where each function lives in the variant:
//!
//! | variant  | inside the PE                                    | outside                           |
//! |----------|--------------------------------------------------|-----------------------------------|
//! | Baseline | encoder, CPPG, BW muxes, BW shifters, adder      |                                   |
//! | OPT1     | as Baseline, accumulator kept as (sum, carry)    | ⌈P/K⌉ full adders                 |
//! | OPT2     | ⌈k_p/BW⌉ encoders, k_p muxes, no shifter         | lane adders and shifters          |
//! | OPT3     | encoder and sparse encoder, one mux, 3-2 tree    | lane adders and shifters          |
//! | OPT4C    | CPPG, one mux, 3-2 tree                          | 2 encoders + 2 sparse per column  |
//! | OPT4E    | per group of 4: 4 CPPG/mux, one 6-2 tree         | 2 encoders + 2 sparse per column  |
//!
//! `P` is the PE count and `K` the nominal reduction length. Lane registers
//! are sized `pp_width + ⌈log2 K⌉` bits.

use super::{domain, AnalyticsError};
use crate::array::ArrayConfig;
use crate::pe::{PeVariant, OPT4E_GROUP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComponentCounts {
    pub encoders: u64,
    pub sparse_encoders: u64,
    pub cppg_instances: u64,
    pub mux_instances: u64,
    pub shifters: u64,
    pub compressor_input_ports: u64,
    pub register_bits_in: u64,
    pub register_bits_out: u64,
}

impl ComponentCounts {
    fn scaled(self, n: u64) -> Self {
        Self {
            encoders: self.encoders * n,
            sparse_encoders: self.sparse_encoders * n,
            cppg_instances: self.cppg_instances * n,
            mux_instances: self.mux_instances * n,
            shifters: self.shifters * n,
            compressor_input_ports: self.compressor_input_ports * n,
            register_bits_in: self.register_bits_in * n,
            register_bits_out: self.register_bits_out * n,
        }
    }

    fn plus(self, o: Self) -> Self {
        Self {
            encoders: self.encoders + o.encoders,
            sparse_encoders: self.sparse_encoders + o.sparse_encoders,
            cppg_instances: self.cppg_instances + o.cppg_instances,
            mux_instances: self.mux_instances + o.mux_instances,
            shifters: self.shifters + o.shifters,
            compressor_input_ports: self.compressor_input_ports + o.compressor_input_ports,
            register_bits_in: self.register_bits_in + o.register_bits_in,
            register_bits_out: self.register_bits_out + o.register_bits_out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub variant: PeVariant,
    pub nominal_k: u64,
    pub pe_count: u64,
    /// PEs, or PE groups for OPT4E.
    pub units: u64,
    pub per_unit: ComponentCounts,
    /// Encoders shared by PE columns, outside the array.
    pub shared: ComponentCounts,
    /// Whole-array totals: `per_unit * units + shared`.
    pub total: ComponentCounts,
    pub external_full_adders: u64,
    pub external_shifters: u64,
}

fn ceil_log2(x: u64) -> u64 {
    (u64::BITS - x.saturating_sub(1).leading_zeros()) as u64
}

pub fn cost_report(cfg: &ArrayConfig, nominal_k: u64) -> Result<CostReport, AnalyticsError> {
    if nominal_k == 0 {
        return Err(domain("nominal K", 0.0));
    }
    let pe = &cfg.pe;
    let variant = pe.variant;
    let p = cfg.pe_count() as u64;
    let bw = pe.bw() as u64;
    let k_p = pe.k_p as u64;
    let op_bits = pe.scheme.operand_width() as u64;
    let acc = pe.acc_width.bits() as u64;
    // Largest candidate PP: B times the largest digit magnitude.
    let pp_width = op_bits + pe.scheme.radix().bits_per_digit() as u64;
    let lane = (pp_width + ceil_log2(nominal_k)).min(acc);
    let lanes_out = 2 * lane * bw;
    let columns = cfg.columns() as u64;
    let pair_in = 2 * op_bits;
    // Selected-PP inputs: digit (3 bits), bit weight index, multiplier.
    let selected_in = 3 + ceil_log2(bw).max(1) + op_bits;

    let zero = ComponentCounts::default();
    let (units, per_unit, shared, ext_adders, ext_shifters) = match variant {
        PeVariant::BaselineMac => (
            p,
            ComponentCounts {
                encoders: 1,
                cppg_instances: 1,
                mux_instances: bw,
                shifters: bw,
                compressor_input_ports: bw,
                register_bits_in: pair_in,
                register_bits_out: acc,
                ..zero
            },
            zero,
            0,
            0,
        ),
        PeVariant::Opt1 => (
            p,
            ComponentCounts {
                encoders: 1,
                cppg_instances: 1,
                mux_instances: bw,
                shifters: bw,
                compressor_input_ports: bw + 2,
                register_bits_in: pair_in,
                register_bits_out: 2 * acc,
                ..zero
            },
            zero,
            p.div_ceil(nominal_k),
            0,
        ),
        PeVariant::Opt2 => {
            // One output leaves every K/k_p passes and needs BW lane merges.
            let vector = (p * k_p).div_ceil(nominal_k);
            (
                p,
                ComponentCounts {
                    encoders: k_p.div_ceil(bw),
                    cppg_instances: k_p,
                    mux_instances: k_p,
                    shifters: 0,
                    compressor_input_ports: k_p + 2,
                    register_bits_in: k_p * pair_in,
                    register_bits_out: lanes_out,
                    ..zero
                },
                zero,
                vector,
                vector,
            )
        }
        PeVariant::Opt3 => {
            let vector = (p * bw).div_ceil(nominal_k);
            (
                p,
                ComponentCounts {
                    encoders: 1,
                    sparse_encoders: 1,
                    cppg_instances: 1,
                    mux_instances: 1,
                    shifters: 0,
                    compressor_input_ports: 3,
                    register_bits_in: k_p * pair_in,
                    register_bits_out: lanes_out,
                },
                zero,
                vector,
                vector,
            )
        }
        PeVariant::Opt4C => {
            let vector = (p * bw).div_ceil(nominal_k);
            (
                p,
                ComponentCounts {
                    cppg_instances: 1,
                    mux_instances: 1,
                    compressor_input_ports: 3,
                    register_bits_in: selected_in,
                    register_bits_out: lanes_out,
                    ..zero
                },
                ComponentCounts {
                    encoders: 2 * columns,
                    sparse_encoders: 2 * columns,
                    ..zero
                },
                vector,
                vector,
            )
        }
        PeVariant::Opt4E => {
            let group = OPT4E_GROUP as u64;
            let groups = p.div_ceil(group);
            let vector = (groups * bw).div_ceil(nominal_k);
            (
                groups,
                ComponentCounts {
                    cppg_instances: group,
                    mux_instances: group,
                    compressor_input_ports: group + 2,
                    register_bits_in: group * selected_in,
                    register_bits_out: lanes_out,
                    ..zero
                },
                ComponentCounts {
                    encoders: 2 * columns,
                    sparse_encoders: 2 * columns,
                    ..zero
                },
                vector,
                vector,
            )
        }
    };
    Ok(CostReport {
        variant,
        nominal_k,
        pe_count: p,
        units,
        per_unit,
        shared,
        total: per_unit.scaled(units).plus(shared),
        external_full_adders: ext_adders,
        external_shifters: ext_shifters,
    })
}
