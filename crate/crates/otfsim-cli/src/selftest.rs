//! Fast self-test suites: oracle equivalence, eigen reconstruction,
//! operation-count exactness, and the random-matrix statistics, each
//! reporting a one-line verdict.

use otfsim_core::channel::{
    build_dense_channel, eigen_matrix, perturb_csi, sample_channel, transmit_with_eigen,
    CsiErrorModel, DelayDopplerProfile, NoiseModel,
};
use otfsim_core::complexity::{mu_d_lm, mu_d_lz, verify_point, SweepPoint};
use otfsim_core::counter::OpCounter;
use otfsim_core::modem::{demap, modulate, random_bits, Constellation};
use otfsim_core::receiver::{conventional_equalize, equalize_with_csi_error, EqualizerMode};
use otfsim_core::sinr::validate_lemma_expectations;
use otfsim_core::transform::{DdTransform, Direction};
use otfsim_core::{rng, C64};

use crate::HarnessError;

const SELFTEST_SEED: u64 = 0x5e1f;

fn suite_oracle_equivalence() -> Result<(), String> {
    let (m, n) = (8usize, 8usize);
    let transform = DdTransform::<f64>::new(m, n);
    let profile = DelayDopplerProfile::<f64>::table2(m, n).map_err(|e| e.to_string())?;
    let constellation = Constellation::<f64>::qpsk();
    for (case, (snr_db, imperfect)) in [(0.0, false), (10.0, false), (0.0, true), (10.0, true)]
        .into_iter()
        .enumerate()
    {
        let noise = NoiseModel::from_snr_db(snr_db);
        for trial in 0..3u64 {
            let key = [case as u64, trial];
            let mut c = OpCounter::new();
            let real = sample_channel(
                &profile,
                2,
                4,
                &mut rng::indexed_stream(SELFTEST_SEED, "st-channel", &key),
            )
            .map_err(|e| e.to_string())?;
            let d = eigen_matrix(&real, &transform, &mut c).map_err(|e| e.to_string())?;
            let bits = random_bits(
                &mut rng::indexed_stream(SELFTEST_SEED, "st-data", &key),
                2 * m * n * 2,
            );
            let x = modulate(&bits, &constellation, 2, m, n, 1.0).map_err(|e| e.to_string())?;
            let y = transmit_with_eigen(
                &x,
                &d,
                &noise,
                &transform,
                &mut rng::indexed_stream(SELFTEST_SEED, "st-noise", &key),
            )
            .map_err(|e| e.to_string())?;
            let (d_rx, h_rx) = if imperfect {
                let err = CsiErrorModel::scaled_to_snr(&noise, 2);
                let pert = perturb_csi(
                    &real,
                    &err,
                    &transform,
                    &mut rng::indexed_stream(SELFTEST_SEED, "st-csi", &key),
                )
                .map_err(|e| e.to_string())?;
                let one = C64::new(1.0, 0.0);
                let d_hat = d
                    .add_scaled(&pert.delta_d, one, one, &mut c)
                    .map_err(|e| e.to_string())?;
                (d_hat, build_dense_channel(&pert.perturbed))
            } else {
                (d, build_dense_channel(&real))
            };
            for mode in [EqualizerMode::Lz, EqualizerMode::Lm] {
                let fast = equalize_with_csi_error(&d_rx, &y, mode, &noise, &transform, &mut c)
                    .map_err(|e| e.to_string())?;
                let dense =
                    conventional_equalize(&h_rx, &y, mode, &noise).map_err(|e| e.to_string())?;
                let err: f64 = fast
                    .data()
                    .iter()
                    .zip(dense.data())
                    .map(|(p, q)| (p - q).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                let scale: f64 = dense
                    .data()
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                if err > 1e-8 * scale {
                    return Err(format!(
                        "{mode:?} deviates from the dense receiver by {:.2e} (rel)",
                        err / scale
                    ));
                }
                let fast_bits = demap(&fast, &constellation, 1.0).1;
                let dense_bits = demap(&dense, &constellation, 1.0).1;
                if fast_bits != dense_bits {
                    return Err(format!("{mode:?} bit decisions diverge"));
                }
            }
        }
    }
    Ok(())
}

fn suite_reconstruction() -> Result<(), String> {
    let (m, n) = (8usize, 8usize);
    let mn = m * n;
    let transform = DdTransform::<f64>::new(m, n);
    let profile = DelayDopplerProfile::<f64>::table2(m, n).map_err(|e| e.to_string())?;
    for trial in 0..10u64 {
        let real = sample_channel(
            &profile,
            2,
            2,
            &mut rng::indexed_stream(SELFTEST_SEED, "st-recon", &[trial]),
        )
        .map_err(|e| e.to_string())?;
        let d =
            eigen_matrix(&real, &transform, &mut OpCounter::new()).map_err(|e| e.to_string())?;
        let h = build_dense_channel(&real);
        let mut err_sq = 0.0;
        let mut norm_sq = 0.0;
        for br in 0..2 {
            for bt in 0..2 {
                let lambda = d.block(br, bt);
                for col in 0..mn {
                    let mut v = transform.unit_column(col);
                    for (x, lam) in v.iter_mut().zip(lambda) {
                        *x *= lam;
                    }
                    transform.transform_grid(&mut v, Direction::Adjoint);
                    for row in 0..mn {
                        let dense = h[(br * mn + row, bt * mn + col)];
                        err_sq += (v[row] - dense).norm_sqr();
                        norm_sq += dense.norm_sqr();
                    }
                }
            }
        }
        let rel = (err_sq / norm_sq).sqrt();
        if rel > 1e-9 {
            return Err(format!("reconstruction error {rel:.2e} on trial {trial}"));
        }
    }
    Ok(())
}

fn suite_op_exactness() -> Result<(), String> {
    for (nt, nr, m, n) in [
        (2usize, 4usize, 8usize, 8usize),
        (4, 4, 16, 16),
        (8, 8, 8, 8),
    ] {
        let point = SweepPoint {
            m,
            n,
            nt,
            nr,
            mp_iterations: 1,
        };
        let measured = verify_point(&point).map_err(|e| e.to_string())?;
        let mn = (m * n) as u64;
        if measured.d_lz.arithmetic() != mu_d_lz(nt as u64, nr as u64, mn)
            || measured.d_lm.arithmetic() != mu_d_lm(nt as u64, nr as u64, mn)
            || measured.d_lm.arithmetic() - measured.d_lz.arithmetic() != 2 * nt as u64 * mn
        {
            return Err(format!("counter mismatch at ({nt}, {nr}, {m}, {n})"));
        }
    }
    Ok(())
}

fn suite_lemma_statistics() -> Result<(), String> {
    let mut r = rng::stream(SELFTEST_SEED, "st-lemmas");
    let stats =
        validate_lemma_expectations::<f64, _>(2, 2, 4, 4000, &mut r).map_err(|e| e.to_string())?;
    for check in &stats.checks {
        if !check.pass {
            return Err(format!(
                "{} outside its 3 sigma band (ratio {:.3})",
                check.name, check.worst_ratio
            ));
        }
    }
    Ok(())
}

/// Run every suite, printing one verdict line each.
#[allow(clippy::type_complexity)]
pub fn run_selftest() -> Result<(), HarnessError> {
    let suites: [(&str, fn() -> Result<(), String>); 4] = [
        (
            "oracle equivalence (LZ/LM vs dense ZF/MMSE)",
            suite_oracle_equivalence,
        ),
        ("eigen reconstruction", suite_reconstruction),
        ("operation-count exactness", suite_op_exactness),
        ("random-matrix statistics", suite_lemma_statistics),
    ];
    let mut failures = 0;
    for (name, suite) in suites {
        match suite() {
            Ok(()) => println!("selftest {name}: ok"),
            Err(msg) => {
                println!("selftest {name}: FAILED ({msg})");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        Err(HarnessError::Selftest(failures))
    } else {
        Ok(())
    }
}
