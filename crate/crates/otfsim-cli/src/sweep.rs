//! Seeded Monte Carlo BER sweeps and SINR validation runs.
//!
//! Trials parallelize over (SNR point, realization) pairs with
//! deterministically derived RNG streams, so output is byte-identical for
//! any thread count. Within a trial every receiver sees the same channel,
//! noise, data, and CSI error draws.

use std::io::Write;

use rayon::prelude::*;

use otfsim_core::block::DiagBlockMat;
use otfsim_core::channel::{
    build_dense_channel, eigen_matrix, perturb_csi, sample_channel, transmit_with_eigen,
    ChannelRealization, NoiseModel,
};
use otfsim_core::counter::OpCounter;
use otfsim_core::dense::DenseMat;
use otfsim_core::modem::{demap, modulate, random_bits, Constellation};
use otfsim_core::receiver::{conventional_equalize, las_refine, EqualizerMode, LinearEqualizer};
use otfsim_core::sinr::{analytic_ber, lm_sinr, lz_sinr};
use otfsim_core::transform::DdTransform;
use otfsim_core::{rng, Error as CoreError, C64};

use crate::config::{ExperimentConfig, HarnessReceiver};
use crate::{fmt_float, HarnessError};

/// Bounded redraws for trials whose channel defeats a ZF-style inversion.
const MAX_ATTEMPTS: u64 = 8;

/// Fixed CSV schema of BER and SINR-validation runs.
pub const CSV_HEADER: &str = "snr_db,receiver,csi,trials,bit_errors,total_bits,ber,analytic_ber";

/// One aggregated CSV row.
#[derive(Debug, Clone)]
pub struct BerRecord {
    pub snr_db: f64,
    pub receiver: HarnessReceiver,
    pub csi: &'static str,
    pub trials: usize,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub analytic_ber: Option<f64>,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.total_bits as f64
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_float(self.snr_db),
            self.receiver.label(),
            self.csi,
            self.trials,
            self.bit_errors,
            self.total_bits,
            fmt_float(self.ber()),
            self.analytic_ber.map(fmt_float).unwrap_or_default(),
        )
    }
}

/// Sweep results plus run diagnostics.
#[derive(Debug)]
pub struct SweepOutput {
    pub records: Vec<BerRecord>,
    /// Trials redrawn because of a singular channel.
    pub redraws: u64,
}

impl SweepOutput {
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for record in &self.records {
            writeln!(w, "{}", record.csv_line())?;
        }
        Ok(())
    }
}

struct TrialOutcome {
    bit_errors: Vec<u64>,
    bits: u64,
    /// Analytic BER of (LZ, LM) for this realization, when computed.
    analytic: [Option<f64>; 2],
    redraws: u64,
}

fn is_singularity(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::SingularCorner { .. } | CoreError::SingularDense(_)
    )
}

/// Run the Monte Carlo BER sweep described by the config.
pub fn run_ber_sweep(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    run_sweep(config, &config.receivers)
}

/// SINR validation: the same sweep restricted to the receivers with a
/// closed-form SINR, so every row carries paired simulated and analytic BER.
pub fn run_sinr_validation(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    run_sweep(config, &[HarnessReceiver::Lz, HarnessReceiver::Lm])
}

fn run_sweep(
    config: &ExperimentConfig,
    receivers: &[HarnessReceiver],
) -> Result<SweepOutput, HarnessError> {
    let profile = config.profile()?;
    let pairs: Vec<(usize, usize)> = (0..config.snr_db.len())
        .flat_map(|s| (0..config.trials).map(move |t| (s, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = pairs
        .par_iter()
        .map(|&(s, t)| run_trial(config, receivers, &profile, s, t))
        .collect::<Result<_, HarnessError>>()?;

    let mut records = Vec::with_capacity(config.snr_db.len() * receivers.len());
    let mut redraws = 0;
    for (s, &snr_db) in config.snr_db.iter().enumerate() {
        let trials = &outcomes[s * config.trials..(s + 1) * config.trials];
        redraws += trials.iter().map(|o| o.redraws).sum::<u64>();
        for (ri, &receiver) in receivers.iter().enumerate() {
            let bit_errors = trials.iter().map(|o| o.bit_errors[ri]).sum();
            let total_bits = trials.iter().map(|o| o.bits).sum();
            let analytic_slot = match receiver {
                HarnessReceiver::Lz => Some(0),
                HarnessReceiver::Lm => Some(1),
                _ => None,
            };
            let analytic_ber = analytic_slot.and_then(|slot| {
                let values: Vec<f64> = trials.iter().filter_map(|o| o.analytic[slot]).collect();
                if values.len() == trials.len() {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                } else {
                    None
                }
            });
            records.push(BerRecord {
                snr_db,
                receiver,
                csi: config.csi.label(),
                trials: config.trials,
                bit_errors,
                total_bits,
                analytic_ber,
            });
        }
    }
    Ok(SweepOutput { records, redraws })
}

fn run_trial(
    config: &ExperimentConfig,
    receivers: &[HarnessReceiver],
    profile: &otfsim_core::channel::DelayDopplerProfile<f64>,
    snr_idx: usize,
    trial_idx: usize,
) -> Result<TrialOutcome, HarnessError> {
    let noise = NoiseModel::from_snr_db(config.snr_db[snr_idx]);
    for attempt in 0..MAX_ATTEMPTS {
        match try_trial(
            config, receivers, profile, &noise, snr_idx, trial_idx, attempt,
        ) {
            Ok(mut outcome) => {
                outcome.redraws = attempt;
                return Ok(outcome);
            }
            Err(e) if is_singularity(&e) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(HarnessError::Numerical(format!(
        "trial {trial_idx} at SNR index {snr_idx} stayed singular after {MAX_ATTEMPTS} redraws"
    )))
}

#[allow(clippy::too_many_arguments)]
fn try_trial(
    config: &ExperimentConfig,
    receivers: &[HarnessReceiver],
    profile: &otfsim_core::channel::DelayDopplerProfile<f64>,
    noise: &NoiseModel<f64>,
    snr_idx: usize,
    trial_idx: usize,
    attempt: u64,
) -> Result<TrialOutcome, CoreError> {
    let (s, t, a) = (snr_idx as u64, trial_idx as u64, attempt);
    let transform = DdTransform::<f64>::new(config.m, config.n);
    let constellation = Constellation::<f64>::of_kind(config.constellation);
    let mut scratch = OpCounter::new();

    let real = sample_channel(
        profile,
        config.nt,
        config.nr,
        &mut rng::indexed_stream(config.seed, "channel", &[s, t, a]),
    )?;
    let d = eigen_matrix(&real, &transform, &mut scratch)?;
    let err_model = config.csi.error_model(noise, config.nt);
    let sigma_d_sq = err_model.map_or(0.0, |e| e.sigma_d_sq(real.num_taps()));

    let wants = |r: HarnessReceiver| receivers.contains(&r);
    let needs_dense =
        wants(HarnessReceiver::ConventionalZf) || wants(HarnessReceiver::ConventionalMmse);

    // Analytic BER from the true channel and the error statistics; any
    // singularity here means the trial is redrawn like a simulated one.
    let mut analytic = [None, None];
    if wants(HarnessReceiver::Lz) {
        analytic[0] = Some(analytic_ber(
            &lz_sinr(&d, noise, sigma_d_sq)?,
            &constellation,
        ));
    }
    if wants(HarnessReceiver::Lm) {
        analytic[1] = Some(analytic_ber(
            &lm_sinr(&d, noise, sigma_d_sq)?,
            &constellation,
        ));
    }

    let bits_per_frame = config.nt * config.m * config.n * constellation.bits_per_symbol();
    let mut bit_errors = vec![0u64; receivers.len()];
    let mut bits_total = 0u64;
    for frame in 0..config.frames_per_trial as u64 {
        let key = [s, t, a, frame];
        let bits = random_bits(
            &mut rng::indexed_stream(config.seed, "data", &key),
            bits_per_frame,
        );
        let x = modulate(
            &bits,
            &constellation,
            config.nt,
            config.m,
            config.n,
            noise.p_x(),
        )?;
        let y = transmit_with_eigen(
            &x,
            &d,
            noise,
            &transform,
            &mut rng::indexed_stream(config.seed, "noise", &key),
        )?;

        // Receiver-side channel knowledge, shared by every receiver.
        let (d_rx, real_rx): (DiagBlockMat<f64>, Option<ChannelRealization<f64>>) = match &err_model
        {
            Some(err) => {
                let pert = perturb_csi(
                    &real,
                    err,
                    &transform,
                    &mut rng::indexed_stream(config.seed, "csi", &key),
                )?;
                let one = C64::new(1.0, 0.0);
                let d_hat = d.add_scaled(&pert.delta_d, one, one, &mut scratch)?;
                (d_hat, Some(pert.perturbed))
            }
            None => (d.clone(), None),
        };
        let h_rx: Option<DenseMat<f64>> = if needs_dense {
            Some(build_dense_channel(real_rx.as_ref().unwrap_or(&real)))
        } else {
            None
        };

        // Soft outputs shared between a linear receiver and its LAS variant.
        let mut soft = [None, None]; // LZ, LM
        let mut soft_for = |mode: EqualizerMode,
                            scratch: &mut OpCounter|
         -> Result<otfsim_core::modem::SymbolFrame<f64>, CoreError> {
            let slot = if mode == EqualizerMode::Lz { 0 } else { 1 };
            if soft[slot].is_none() {
                let eq = LinearEqualizer::prepare(&d_rx, mode, noise, scratch)?;
                soft[slot] = Some(eq.apply(&y, &transform, scratch)?);
            }
            Ok(soft[slot].clone().expect("just filled"))
        };

        for (ri, &receiver) in receivers.iter().enumerate() {
            let decided = match receiver {
                HarnessReceiver::Lz | HarnessReceiver::Lm => {
                    let mode = if receiver == HarnessReceiver::Lz {
                        EqualizerMode::Lz
                    } else {
                        EqualizerMode::Lm
                    };
                    let xhat = soft_for(mode, &mut scratch)?;
                    demap(&xhat, &constellation, noise.p_x()).1
                }
                HarnessReceiver::ConventionalZf | HarnessReceiver::ConventionalMmse => {
                    let mode = if receiver == HarnessReceiver::ConventionalZf {
                        EqualizerMode::Lz
                    } else {
                        EqualizerMode::Lm
                    };
                    let xhat = conventional_equalize(
                        h_rx.as_ref().expect("dense prepared"),
                        &y,
                        mode,
                        noise,
                    )?;
                    demap(&xhat, &constellation, noise.p_x()).1
                }
                HarnessReceiver::LzLas | HarnessReceiver::LmLas => {
                    let mode = if receiver == HarnessReceiver::LzLas {
                        EqualizerMode::Lz
                    } else {
                        EqualizerMode::Lm
                    };
                    let xhat = soft_for(mode, &mut scratch)?;
                    let (_, hard_bits) = demap(&xhat, &constellation, noise.p_x());
                    let init = modulate(
                        &hard_bits,
                        &constellation,
                        config.nt,
                        config.m,
                        config.n,
                        noise.p_x(),
                    )?;
                    let refined = las_refine(
                        &init,
                        &d_rx,
                        &y,
                        &constellation,
                        noise.p_x(),
                        config.las_cap(),
                        &transform,
                    )?;
                    demap(&refined.symbols, &constellation, noise.p_x()).1
                }
            };
            bit_errors[ri] += decided.iter().zip(&bits).filter(|(p, q)| p != q).count() as u64;
        }
        bits_total += bits_per_frame as u64;
    }
    Ok(TrialOutcome {
        bit_errors,
        bits: bits_total,
        analytic,
        redraws: 0,
    })
}
