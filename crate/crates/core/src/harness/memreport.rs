use std::fmt::Write;

use crate::preprocess::{format_truncated, frame_bytes, frame_kb, PixelFormat, PACKED_BYTES};
use crate::replay::{memory_report, FRAMES_PER_EXPERIENCE};

const COLUMNS: [PixelFormat; 3] = [
    PixelFormat::RgbFloat64,
    PixelFormat::GrayFloat64,
    PixelFormat::BinaryByte,
];

/// Replay capacities used in the comparison, per column.
pub const CAPACITIES: [u64; 3] = [1_000_000, 1_000_000, 50_000];

/// Percentage with up to three decimals, trailing zeros dropped.
pub fn format_percent(fraction: f64) -> String {
    let s = format!("{:.3}", fraction * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

/// Two decimals from 100 upward, three below; truncated.
pub fn format_gb(gb: f64) -> String {
    format_truncated(gb, if gb >= 100.0 { 2 } else { 3 })
}

fn row(out: &mut String, label: &str, cells: [String; 3]) {
    let _ = writeln!(
        out,
        "{label:<34}{:<14}{:<14}{}",
        cells[0], cells[1], cells[2]
    );
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, "{title}");
    row(out, "", COLUMNS.map(|f| f.label().to_owned()));
}

pub fn frame_table() -> String {
    let mut out = String::new();
    header(&mut out, "Memory requirement per 84x84 frame");
    row(
        &mut out,
        "Data Type",
        COLUMNS.map(|f| f.data_type().to_owned()),
    );
    row(
        &mut out,
        "Size (bytes)",
        COLUMNS.map(|f| frame_bytes(f).to_string()),
    );
    row(
        &mut out,
        "Size (kB)",
        COLUMNS.map(|f| format_truncated(frame_kb(f), 3)),
    );
    let save = |base: PixelFormat| {
        COLUMNS.map(|f| {
            if frame_bytes(f) > frame_bytes(base) {
                "-".to_owned()
            } else {
                format_percent(1.0 - frame_bytes(f) as f64 / frame_bytes(base) as f64)
            }
        })
    };
    row(
        &mut out,
        "Memory Save % w.r.t. RGB",
        save(PixelFormat::RgbFloat64),
    );
    row(
        &mut out,
        "Memory Save % w.r.t. Grayscale",
        save(PixelFormat::GrayFloat64),
    );
    let _ = writeln!(
        out,
        "Live storage (bit-packed): {PACKED_BYTES} bytes ({} kB)",
        format_truncated(frame_kb(PixelFormat::BinaryPacked), 3)
    );
    out
}

pub fn replay_table() -> String {
    let reports: Vec<_> = COLUMNS
        .iter()
        .zip(CAPACITIES)
        .map(|(&f, c)| memory_report(c, f, FRAMES_PER_EXPERIENCE))
        .collect();
    let cells = |f: &dyn Fn(usize) -> String| [f(0), f(1), f(2)];
    let mut out = String::new();
    header(
        &mut out,
        &format!("Replay memory ({FRAMES_PER_EXPERIENCE} frames per experience)"),
    );
    row(
        &mut out,
        "Capacity",
        cells(&|i| reports[i].capacity.to_string()),
    );
    row(
        &mut out,
        "Memory Usage (bytes)",
        cells(&|i| reports[i].bytes.to_string()),
    );
    row(
        &mut out,
        "Memory Usage (GB)",
        cells(&|i| format_gb(reports[i].gib())),
    );
    let save = |base: usize| {
        cells(&|i| {
            if reports[i].bytes > reports[base].bytes {
                "-".to_owned()
            } else {
                format_percent(reports[i].saving_vs(&reports[base]))
            }
        })
    };
    row(&mut out, "Memory Save % w.r.t. RGB", save(0));
    row(&mut out, "Memory Save % w.r.t. Grayscale", save(1));
    let packed = memory_report(
        CAPACITIES[2],
        PixelFormat::BinaryPacked,
        FRAMES_PER_EXPERIENCE,
    );
    let _ = writeln!(
        out,
        "Live storage (bit-packed, {} experiences): {} bytes ({} GB)",
        packed.capacity,
        packed.bytes,
        format_gb(packed.gib())
    );
    out
}

pub fn full_report() -> String {
    format!("{}\n{}", frame_table(), replay_table())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_formatting() {
        assert_eq!(format_percent(0.0), "0%");
        assert_eq!(format_percent(2.0 / 3.0), "66.667%");
        assert_eq!(format_percent(0.875), "87.5%");
        assert_eq!(format_percent(0.99375), "99.375%");
    }

    #[test]
    fn tables_contain_reference_figures() {
        let f = frame_table();
        for s in [
            "169344", "56448", "7056", "165.375", "55.125", "6.890", "95.833%", "87.5%",
        ] {
            assert!(f.contains(s), "missing {s} in\n{f}");
        }
        let r = replay_table();
        for s in ["1261.71", "420.57", "2.628", "99.792%", "99.375%"] {
            assert!(r.contains(s), "missing {s} in\n{r}");
        }
    }
}
