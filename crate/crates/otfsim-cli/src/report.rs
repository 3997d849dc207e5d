//! Complexity report: closed-form predictions over a dimension sweep, with
//! the LZ/LM rows verified against instrumented counters.

use std::io::Write;

use otfsim_core::complexity::{complexity_report, MpParams, ReceiverKind, ReportRow, SweepPoint};
use otfsim_core::modem::ConstellationKind;

use crate::config::ExperimentConfig;
use crate::HarnessError;

pub const CSV_HEADER: &str = "m,n,nt,nr,mp_iterations,receiver,predicted_ops,predicted_transforms,measured_ops,measured_transforms,exact";

/// Rows of one complexity report.
pub struct ComplexityOutput {
    pub rows: Vec<ReportRow>,
}

impl ComplexityOutput {
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.point.m,
                row.point.n,
                row.point.nt,
                row.point.nr,
                row.point.mp_iterations,
                row.receiver.label(),
                row.predicted_arithmetic,
                row.predicted_transforms,
                row.measured_arithmetic
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                row.measured_transforms
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                row.exact,
            )?;
        }
        Ok(())
    }
}

/// Evaluate the sweep from the config: grid sizes x antenna counts x MP
/// iteration counts, for the LZ, LM, conventional MMSE, and MP receivers.
pub fn run_complexity_report(config: &ExperimentConfig) -> Result<ComplexityOutput, HarnessError> {
    let sweep = &config.complexity;
    if sweep.grid_sizes.is_empty() || sweep.antenna_counts.is_empty() {
        return Err(HarnessError::Config(
            "section 'complexity': empty sweep lists".into(),
        ));
    }
    let params = MpParams {
        constellation_size: match config.constellation {
            ConstellationKind::Bpsk => 2,
            ConstellationKind::Qpsk => 4,
        },
        num_taps: sweep.mp_taps,
        doppler_window: sweep.mp_doppler_window,
    };
    let mut points = Vec::new();
    for &side in &sweep.grid_sizes {
        for &streams in &sweep.antenna_counts {
            for &iters in &sweep.mp_iterations {
                points.push(SweepPoint {
                    m: side,
                    n: side,
                    nt: streams,
                    nr: streams,
                    mp_iterations: iters,
                });
            }
        }
    }
    let receivers = [
        ReceiverKind::Lz,
        ReceiverKind::Lm,
        ReceiverKind::ConventionalMmse,
        ReceiverKind::Mp,
    ];
    let rows = complexity_report(&points, &receivers, &params)
        .map_err(|e| HarnessError::Numerical(e.to_string()))?;
    Ok(ComplexityOutput { rows })
}
