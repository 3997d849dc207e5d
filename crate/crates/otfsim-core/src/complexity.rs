//! Closed-form operation-count predictors and their verification against
//! the instrumented counters.
//!
//! Counts follow the convention of [`crate::counter`]: one complex
//! multiply/divide or add/subtract is one operation, and 2D DFT applications
//! are tracked separately as a symbolic `O(MN log2 MN)` term rather than
//! being folded into the arithmetic totals.

use crate::block::gram;
use crate::channel::{eigen_matrix, ChannelRealization};
use crate::counter::{measure, OpCounter};
use crate::error::{Error, Result};
use crate::transform::{DdTransform, Direction};
use crate::Cplx;

/// Operations to form and invert `D^H D`:
/// `[2 N_t^3 - 3 N_t^2 + N_t + 2 N_t^2 N_r] MN`.
pub fn mu_d_lz(nt: u64, nr: u64, mn: u64) -> u64 {
    (2 * nt * nt * nt - 3 * nt * nt + nt + 2 * nt * nt * nr) * mn
}

/// Operations to form and invert `D^H D + rho I`:
/// `[2 N_t^3 - 3 N_t^2 + 3 N_t + 2 N_t^2 N_r] MN`.
pub fn mu_d_lm(nt: u64, nr: u64, mn: u64) -> u64 {
    mu_d_lz(nt, nr, mn) + 2 * nt * mn
}

/// Arithmetic to process one received vector (fold the inverse into the
/// channel and combine): `[2 N_t^2 N_r + N_t N_r - N_t] MN`.
pub fn mu_combine_arith(nt: u64, nr: u64, mn: u64) -> u64 {
    (2 * nt * nt * nr + nt * nr - nt) * mn
}

/// 2D transforms to process one received vector: `N_t + N_r`.
pub fn combine_transforms(nt: u64, nr: u64) -> u64 {
    nt + nr
}

/// 2D transforms to compute the eigenvalue matrix: one per antenna pair.
pub fn eigen_transforms(nt: u64, nr: u64) -> u64 {
    nt * nr
}

/// Total LZ receiver arithmetic:
/// `[2 N_t^3 - 3 N_t^2 + 4 N_t^2 N_r + N_t N_r] MN`.
pub fn mu_lz_arith(nt: u64, nr: u64, mn: u64) -> u64 {
    mu_d_lz(nt, nr, mn) + mu_combine_arith(nt, nr, mn)
}

/// Total LM receiver arithmetic: `mu_LZ + 2 N_t MN`.
pub fn mu_lm_arith(nt: u64, nr: u64, mn: u64) -> u64 {
    mu_lz_arith(nt, nr, mn) + 2 * nt * mn
}

/// 2D transforms for the full receiver: `N_t + N_r + N_t N_r`
/// (channel eigenvalues plus per-vector processing).
pub fn receiver_transforms(nt: u64, nr: u64) -> u64 {
    combine_transforms(nt, nr) + eigen_transforms(nt, nr)
}

/// Conventional ZF/MMSE order class: `(N_t MN)^3`.
pub fn conventional_order(nt: u64, mn: u64) -> u128 {
    let n = (nt * mn) as u128;
    n * n * n
}

/// Message-passing detector parameters.
#[derive(Debug, Clone, Copy)]
pub struct MpParams {
    /// Constellation size `Q`.
    pub constellation_size: u64,
    /// Channel paths `L_h`.
    pub num_taps: u64,
    /// Half-width `N_i` of the per-tap Doppler spread window; each tap
    /// contributes `2 N_i + 1` non-zeros per row.
    pub doppler_window: u64,
}

impl MpParams {
    /// Non-zeros per row/column of each antenna-pair channel matrix:
    /// `S = L_h (2 N_i + 1)`.
    pub fn nonzeros_per_row(&self) -> u64 {
        self.num_taps * (2 * self.doppler_window + 1)
    }
}

/// Message-passing detector order class: `N_I N_r N_t MN S Q`.
pub fn mp_order(nt: u64, nr: u64, mn: u64, iterations: u64, params: &MpParams) -> u128 {
    iterations as u128
        * nr as u128
        * nt as u128
        * mn as u128
        * params.nonzeros_per_row() as u128
        * params.constellation_size as u128
}

/// Receivers covered by the complexity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    Lz,
    Lm,
    ConventionalZf,
    ConventionalMmse,
    Mp,
}

impl ReceiverKind {
    pub fn label(&self) -> &'static str {
        match self {
            ReceiverKind::Lz => "LZ",
            ReceiverKind::Lm => "LM",
            ReceiverKind::ConventionalZf => "cZF",
            ReceiverKind::ConventionalMmse => "cMMSE",
            ReceiverKind::Mp => "MP",
        }
    }
}

/// Predicted cost of one receiver at one operating point. LZ/LM predictions
/// are exact integers; the conventional and MP entries are order classes.
#[derive(Debug, Clone, Copy)]
pub struct ComplexityPrediction {
    pub receiver: ReceiverKind,
    pub arithmetic_ops: u128,
    /// Number of `O(MN log2 MN)` transform applications (zero for the
    /// receivers whose model does not separate them).
    pub transform_applications: u64,
    /// Whether `arithmetic_ops` is an exact count rather than an order class.
    pub exact: bool,
}

/// Evaluate the closed-form cost model.
pub fn predict_ops(
    receiver: ReceiverKind,
    nt: usize,
    nr: usize,
    m: usize,
    n: usize,
    mp_iterations: u64,
    mp: Option<&MpParams>,
) -> Result<ComplexityPrediction> {
    if nt == 0 || nr == 0 || m == 0 || n == 0 {
        return Err(Error::InvalidConfig(
            "complexity model needs positive dims".into(),
        ));
    }
    let (nt, nr, mn) = (nt as u64, nr as u64, (m * n) as u64);
    let p = match receiver {
        ReceiverKind::Lz => ComplexityPrediction {
            receiver,
            arithmetic_ops: mu_lz_arith(nt, nr, mn) as u128,
            transform_applications: receiver_transforms(nt, nr),
            exact: true,
        },
        ReceiverKind::Lm => ComplexityPrediction {
            receiver,
            arithmetic_ops: mu_lm_arith(nt, nr, mn) as u128,
            transform_applications: receiver_transforms(nt, nr),
            exact: true,
        },
        ReceiverKind::ConventionalZf | ReceiverKind::ConventionalMmse => ComplexityPrediction {
            receiver,
            arithmetic_ops: conventional_order(nt, mn),
            transform_applications: 0,
            exact: false,
        },
        ReceiverKind::Mp => {
            let params =
                mp.ok_or_else(|| Error::InvalidConfig("MP prediction needs MpParams".into()))?;
            ComplexityPrediction {
                receiver,
                arithmetic_ops: mp_order(nt, nr, mn, mp_iterations, params),
                transform_applications: 0,
                exact: false,
            }
        }
    };
    Ok(p)
}

/// Instrumented tallies for one `(N_t, N_r, M, N)` point, split by stage.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredReceiverOps {
    /// Eigenvalue computation (transforms only).
    pub eigen: OpCounter,
    /// Gram + inversion for LZ.
    pub d_lz: OpCounter,
    /// Gram + inversion for LM.
    pub d_lm: OpCounter,
    /// `D * G^-1` plus per-vector processing.
    pub combine: OpCounter,
}

impl MeasuredReceiverOps {
    pub fn lz_total(&self) -> OpCounter {
        let mut c = self.eigen;
        c.merge(&self.d_lz);
        c.merge(&self.combine);
        c
    }

    pub fn lm_total(&self) -> OpCounter {
        let mut c = self.eigen;
        c.merge(&self.d_lm);
        c.merge(&self.combine);
        c
    }
}

/// Run the counted pipeline stages on a synthetic channel of the given
/// shape and collect their tallies. Counts depend only on the shapes, so a
/// single-tap channel with seeded random gains is used; the inversion is
/// measured on the regularized Gram, which exists for any `(N_t, N_r)` and
/// has the same count as the unregularized one.
pub fn measure_receiver_ops(
    nt: usize,
    nr: usize,
    m: usize,
    n: usize,
) -> Result<MeasuredReceiverOps> {
    use rand::Rng;
    let mut rng = crate::rng::stream(0x0ff5, "complexity-measure");
    let mn = m * n;
    let gains: Vec<Cplx<f64>> = (0..nr * nt)
        .map(|_| Cplx::new(rng.gen::<f64>() + 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let real = ChannelRealization::from_parts(nr, nt, m, n, vec![(0, 0)], gains)?;
    let transform = DdTransform::<f64>::new(m, n);

    let mut eigen = OpCounter::new();
    let d = eigen_matrix(&real, &transform, &mut eigen)?;

    let gram_lz = measure(|c| {
        gram(&d, 0.0, c).unwrap();
    });
    let mut gram_lm = OpCounter::new();
    let g_lm = gram(&d, 1.0, &mut gram_lm)?;
    let mut invert = OpCounter::new();
    let ginv = g_lm.invert(&mut invert)?;

    let mut d_lz = gram_lz;
    d_lz.merge(&invert);
    let mut d_lm = gram_lm;
    d_lm.merge(&invert);

    let mut combine = OpCounter::new();
    let dtilde = d.mul(&ginv, &mut combine)?;
    let mut y = vec![Cplx::new(0.0f64, 0.0); nr * mn];
    transform.apply(&mut y, Direction::Forward, nr, &mut combine)?;
    let mut z = dtilde.adjoint_mul_vec(&y, &mut combine)?;
    transform.apply(&mut z, Direction::Adjoint, nt, &mut combine)?;

    Ok(MeasuredReceiverOps {
        eigen,
        d_lz,
        d_lm,
        combine,
    })
}

/// One operating point of a complexity sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub m: usize,
    pub n: usize,
    pub nt: usize,
    pub nr: usize,
    /// MP iteration count `N_I` at this point.
    pub mp_iterations: u64,
}

/// One row of the complexity report.
#[derive(Debug, Clone, Copy)]
pub struct ReportRow {
    pub point: SweepPoint,
    pub receiver: ReceiverKind,
    pub predicted_arithmetic: u128,
    pub predicted_transforms: u64,
    pub measured_arithmetic: Option<u64>,
    pub measured_transforms: Option<u64>,
    pub exact: bool,
}

/// Evaluate predictions over a sweep and, for the LZ/LM rows, verify the
/// instrumented counters match exactly. Any mismatch aborts the report with
/// the first differing term named.
pub fn complexity_report(
    points: &[SweepPoint],
    receivers: &[ReceiverKind],
    mp: &MpParams,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::with_capacity(points.len() * receivers.len());
    for point in points {
        let needs_measurement = receivers
            .iter()
            .any(|r| matches!(r, ReceiverKind::Lz | ReceiverKind::Lm));
        let measured = if needs_measurement {
            Some(verify_point(point)?)
        } else {
            None
        };
        for &receiver in receivers {
            let prediction = predict_ops(
                receiver,
                point.nt,
                point.nr,
                point.m,
                point.n,
                point.mp_iterations,
                Some(mp),
            )?;
            let (ma, mt) = match (receiver, &measured) {
                (ReceiverKind::Lz, Some(m)) => {
                    let t = m.lz_total();
                    (Some(t.arithmetic()), Some(t.transforms))
                }
                (ReceiverKind::Lm, Some(m)) => {
                    let t = m.lm_total();
                    (Some(t.arithmetic()), Some(t.transforms))
                }
                _ => (None, None),
            };
            rows.push(ReportRow {
                point: *point,
                receiver,
                predicted_arithmetic: prediction.arithmetic_ops,
                predicted_transforms: prediction.transform_applications,
                measured_arithmetic: ma,
                measured_transforms: mt,
                exact: prediction.exact,
            });
        }
    }
    Ok(rows)
}

/// Check every exact prediction against the counters at one point.
pub fn verify_point(point: &SweepPoint) -> Result<MeasuredReceiverOps> {
    let (nt, nr, mn) = (point.nt as u64, point.nr as u64, (point.m * point.n) as u64);
    let measured = measure_receiver_ops(point.nt, point.nr, point.m, point.n)?;
    let checks: [(&str, u64, u64); 5] = [
        ("mu_D_LZ", measured.d_lz.arithmetic(), mu_d_lz(nt, nr, mn)),
        ("mu_D_LM", measured.d_lm.arithmetic(), mu_d_lm(nt, nr, mn)),
        (
            "G_A^H y arithmetic",
            measured.combine.arithmetic(),
            mu_combine_arith(nt, nr, mn),
        ),
        (
            "G_A^H y transforms",
            measured.combine.transforms,
            combine_transforms(nt, nr),
        ),
        (
            "eigen transforms",
            measured.eigen.transforms,
            eigen_transforms(nt, nr),
        ),
    ];
    for (name, got, expected) in checks {
        if got != expected {
            return Err(Error::CountMismatch(format!(
                "{name} at N_t={}, N_r={}, M={}, N={}: measured {got}, predicted {expected}",
                point.nt, point.nr, point.m, point.n
            )));
        }
    }
    Ok(measured)
}
