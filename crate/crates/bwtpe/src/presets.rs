//! Shape-only workload presets shipped with the crate. Operands are synthetic.

use crate::io::{parse_workload, IoError, Workload};

const PRESETS: [(&str, &str); 4] = [
    ("resnet18", include_str!("../presets/resnet18.json")),
    ("mobilenetv3", include_str!("../presets/mobilenetv3.json")),
    ("gpt2", include_str!("../presets/gpt2.json")),
    ("vit", include_str!("../presets/vit.json")),
];

/// The bundled radix-4 modified Booth table, as a digit-table file.
pub const MBE_TABLE_JSON: &str = include_str!("../presets/tables/mbe.json");

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Option<Result<Workload, IoError>> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_workload(text, n))
}
