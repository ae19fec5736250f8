//! Peak throughput from cycles per MAC, counted with two ops per MAC.

use super::{domain, AnalyticsError};
use crate::pe::{PeConfig, PeVariant, OPT4E_GROUP};

/// Multiply and add.
pub const OPS_PER_MAC: f64 = 2.0;

/// Operations per second of `pe_count` units clocked at `freq_hz`.
///
/// Baseline and OPT1 retire one MAC per PE per cycle; OPT2 retires `k_p`
/// MACs every `BW` cycles; OPT3 and OPT4C retire one per `avg_numpp`
/// cycles. For OPT4E `pe_count` counts PE groups, each retiring
/// `4 / avg_numpp` MACs per cycle through its shared tree.
pub fn throughput_model(
    cfg: &PeConfig,
    avg_numpp: f64,
    freq_hz: f64,
    pe_count: u64,
) -> Result<f64, AnalyticsError> {
    if !(avg_numpp > 0.0) {
        return Err(domain("avg_numpp", avg_numpp));
    }
    if !(freq_hz > 0.0) {
        return Err(domain("freq_hz", freq_hz));
    }
    let macs_per_cycle = match cfg.variant {
        PeVariant::BaselineMac | PeVariant::Opt1 => 1.0,
        PeVariant::Opt2 => cfg.k_p as f64 / cfg.bw() as f64,
        PeVariant::Opt3 | PeVariant::Opt4C => 1.0 / avg_numpp,
        PeVariant::Opt4E => OPT4E_GROUP as f64 / avg_numpp,
    };
    Ok(pe_count as f64 * freq_hz * macs_per_cycle * OPS_PER_MAC)
}

/// Clock and area of one variant, relative to a parallel MAC.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OperatingPoint {
    pub variant: PeVariant,
    pub freq_hz: f64,
    /// Throughput units (PEs, or PE groups for OPT4E) fitting in the area of
    /// one parallel MAC.
    pub units_per_mac_area: u64,
}

impl OperatingPoint {
    /// Nominal clocks of the synthesized arrays and the area equivalences
    /// reported for them.
    pub fn nominal(variant: PeVariant) -> Self {
        let (freq_ghz, units) = match variant {
            PeVariant::BaselineMac => (1.0, 1),
            PeVariant::Opt1 | PeVariant::Opt2 => (1.5, 1),
            PeVariant::Opt3 => (2.0, 1),
            PeVariant::Opt4C => (2.5, 3),
            PeVariant::Opt4E => (2.0, 1),
        };
        Self {
            variant,
            freq_hz: freq_ghz * 1e9,
            units_per_mac_area: units,
        }
    }

    /// Throughput of this variant in the area of `macs` parallel MACs.
    pub fn equal_area_throughput(
        &self,
        cfg: &PeConfig,
        avg_numpp: f64,
        macs: u64,
    ) -> Result<f64, AnalyticsError> {
        throughput_model(cfg, avg_numpp, self.freq_hz, macs * self.units_per_mac_area)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::DigitScheme;

    fn cfg(v: PeVariant) -> PeConfig {
        PeConfig::new(v, DigitScheme::Radix4Mbe)
    }

    #[test]
    fn single_opt4c() {
        let ops = throughput_model(&cfg(PeVariant::Opt4C), 2.22, 2.5e9, 1).unwrap();
        assert!((ops / 1e9 - 2.252).abs() < 1e-3);
        let at_2ghz = throughput_model(&cfg(PeVariant::Opt4C), 2.22, 2.0e9, 1).unwrap();
        assert!((at_2ghz / 1e9 - 1.80).abs() < 0.01);
    }

    #[test]
    fn baseline_array_peak() {
        let ops = throughput_model(&cfg(PeVariant::BaselineMac), 4.0, 1e9, 1024).unwrap();
        assert!((ops / 1e12 - 2.048).abs() < 1e-9);
    }

    #[test]
    fn worst_case_halves() {
        let c = cfg(PeVariant::Opt3);
        let two = throughput_model(&c, 2.0, 1e9, 8).unwrap();
        let four = throughput_model(&c, 4.0, 1e9, 8).unwrap();
        assert_eq!(four * 2.0, two);
    }

    #[test]
    fn domain_errors() {
        for bad in [0.0, -1.0, f64::NAN] {
            assert!(throughput_model(&cfg(PeVariant::Opt3), bad, 1e9, 1).is_err());
        }
    }

    #[test]
    fn opt4e_equal_area_gain() {
        let base = OperatingPoint::nominal(PeVariant::BaselineMac)
            .equal_area_throughput(&cfg(PeVariant::BaselineMac), 2.4, 64)
            .unwrap();
        let e = OperatingPoint::nominal(PeVariant::Opt4E)
            .equal_area_throughput(&cfg(PeVariant::Opt4E), 2.4, 64)
            .unwrap();
        assert!((e / base - 8.0 / 2.4).abs() < 1e-9);
    }
}
