//! Closed-form per-symbol SINR for the LZ/LM receivers under perfect and
//! imperfect CSI, the analytic BER map, and Monte Carlo validators for the
//! random-matrix identities the derivation rests on.
//!
//! Every quantity here reduces to block matrices with diagonal blocks, so
//! symbol-domain diagonals come from an exact transform identity instead of
//! dense conjugation: each entry of the 2D DFT matrix has squared magnitude
//! `1/MN`, hence the diagonal of `Psi' K Psi` within stream `t` is the
//! constant `mean(diag K_{t,t})`, and row powers follow from `K K^H` the
//! same way.

use rand::Rng;

use crate::block::{block_diag_sum_tile, gram, DiagBlockMat};
use crate::channel::{
    complex_normal, eigen_matrix, perturb_csi, transmit_with_eigen, ChannelRealization,
    CsiErrorModel, NoiseModel,
};
use crate::counter::OpCounter;
use crate::error::{Error, Result};
use crate::modem::{Constellation, SymbolFrame};
use crate::receiver::{EqualizerMode, LinearEqualizer};
use crate::scalar::Scalar;
use crate::transform::DdTransform;
use crate::Cplx;

/// Whether a report models perfect or estimated CSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

/// Per-symbol SINR, linear scale, length `N_t * MN`.
#[derive(Debug, Clone)]
pub struct SinrReport<T: Scalar> {
    pub gamma: Vec<T>,
    pub mode: EqualizerMode,
    pub csi: CsiMode,
}

impl<T: Scalar> SinrReport<T> {
    pub fn mean_gamma(&self) -> T {
        self.gamma.iter().copied().sum::<T>() / T::of_usize(self.gamma.len())
    }
}

/// Diagonal of a symbol-domain covariance, length `N_t * MN`.
#[derive(Debug, Clone)]
pub struct CovarianceDiag<T: Scalar> {
    pub diag: Vec<T>,
}

/// Mean of each diagonal block: the constant symbol-domain diagonal value
/// per stream of `Psi' K Psi` for a square block matrix `K`.
fn stream_means<T: Scalar>(k: &DiagBlockMat<T>) -> Result<Vec<Cplx<T>>> {
    if k.block_rows() != k.block_cols() {
        return Err(Error::ShapeMismatch(
            "symbol-domain diagonal needs a square block matrix".into(),
        ));
    }
    let mn = T::of_usize(k.mn());
    Ok((0..k.block_rows())
        .map(|t| k.block(t, t).iter().copied().sum::<Cplx<T>>() / mn)
        .collect())
}

/// Per-stream row power `(1/MN) sum_{t', n} |K[t,t'][n]|^2` of
/// `Psi' K Psi`, split into the own-stream block and the total.
fn stream_row_powers<T: Scalar>(k: &DiagBlockMat<T>) -> (Vec<T>, Vec<T>) {
    let mn = T::of_usize(k.mn());
    let mut own = Vec::with_capacity(k.block_rows());
    let mut total = Vec::with_capacity(k.block_rows());
    for t in 0..k.block_rows() {
        let mut own_acc = T::zero();
        let mut total_acc = T::zero();
        for tp in 0..k.block_cols() {
            let power: T = k.block(t, tp).iter().map(|v| v.norm_sqr()).sum();
            total_acc += power;
            if tp == t {
                own_acc = power;
            }
        }
        own.push(own_acc / mn);
        total.push(total_acc / mn);
    }
    (own, total)
}

fn expand_per_stream<T: Scalar>(values: &[T], mn: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len() * mn);
    for &v in values {
        out.extend(std::iter::repeat_n(v, mn));
    }
    out
}

/// Block-diagonal projection `sum_i (I_target (x) Y_{i,i})` of a square
/// block matrix, the quantity the expectation identities produce.
pub fn bar_projection<T: Scalar>(
    y: &DiagBlockMat<T>,
    target_streams: usize,
) -> Result<DiagBlockMat<T>> {
    block_diag_sum_tile(y, target_streams)
}

/// The matrices entering the LM covariance: `S = (D^H D + rho I)^-1`,
/// `D1 = D D^H`, `D2 = D S D^H`, `D3 = D S^H`, and their block-diagonal
/// projections.
pub struct LmAuxiliary<T: Scalar> {
    pub s: DiagBlockMat<T>,
    pub d1: DiagBlockMat<T>,
    pub d2: DiagBlockMat<T>,
    pub d3: DiagBlockMat<T>,
    pub dbar1: DiagBlockMat<T>,
    pub dbar2: DiagBlockMat<T>,
    pub dbar4: DiagBlockMat<T>,
    pub dbar6: DiagBlockMat<T>,
    pub dbar8: DiagBlockMat<T>,
    pub dtil1: DiagBlockMat<T>,
    pub dtil2: DiagBlockMat<T>,
    pub dtil6: DiagBlockMat<T>,
    pub dtil8: DiagBlockMat<T>,
}

impl<T: Scalar> LmAuxiliary<T> {
    pub fn new(d: &DiagBlockMat<T>, noise: &NoiseModel<T>) -> Result<Self> {
        let rho = noise.rho();
        if rho <= T::zero() {
            return Err(Error::InvalidConfig(
                "the LM covariance needs a positive noise-to-signal ratio".into(),
            ));
        }
        let nt = d.block_cols();
        let nr = d.block_rows();
        let mut c = OpCounter::new();
        let s = gram(d, rho, &mut c)?.invert(&mut c)?;
        let dh = d.adjoint();
        let d1 = d.mul(&dh, &mut c)?;
        let d2 = d.mul(&s, &mut c)?.mul(&dh, &mut c)?;
        let d3 = d.mul(&s.adjoint(), &mut c)?;
        let d2h = d2.adjoint();
        let d3h = d3.adjoint();

        let dbar1 = bar_projection(&d2.mul(&d1, &mut c)?.mul(&d2h, &mut c)?, nt)?;
        let dbar2 = bar_projection(&d2.mul(&d1, &mut c)?, nt)?;
        let dbar4 = bar_projection(&d1, nt)?;
        let dbar6 = bar_projection(&d1.mul(&d2h, &mut c)?, nt)?;
        let dbar8 = bar_projection(&d3h.mul(&d1, &mut c)?.mul(&d3, &mut c)?, nr)?;
        let dtil1 = bar_projection(&d2.mul(&d2h, &mut c)?, nt)?;
        let dtil2 = bar_projection(&d2, nt)?;
        let dtil6 = bar_projection(&d2h, nt)?;
        let dtil8 = bar_projection(&d3h.mul(&d3, &mut c)?, nr)?;

        Ok(Self {
            s,
            d1,
            d2,
            d3,
            dbar1,
            dbar2,
            dbar4,
            dbar6,
            dbar8,
            dtil1,
            dtil2,
            dtil6,
            dtil8,
        })
    }
}

/// Diagonal of the LM noise-plus-distortion covariance for a fixed channel:
///
/// ```text
/// R_v = P_x sd^2 Psi' { S(Dbar1 + rho Dtil1)S^H - S(Dbar2 + rho Dtil2)S^H
///       + S(Dbar4 + rho N_r I)S^H - S(Dbar6 + rho Dtil6)S^H
///       + D3^H (Dbar8 + rho Dtil8) D3 } Psi  +  sv^2 Psi' D3^H D3 Psi
/// ```
///
/// where the last term is the error-free collapse (`sd^2 = 0` keeps only it).
pub fn lm_noise_cov<T: Scalar>(
    d: &DiagBlockMat<T>,
    noise: &NoiseModel<T>,
    sigma_d_sq: T,
) -> Result<CovarianceDiag<T>> {
    let aux = LmAuxiliary::new(d, noise)?;
    lm_noise_cov_with_aux(&aux, noise, sigma_d_sq)
}

fn lm_noise_cov_with_aux<T: Scalar>(
    aux: &LmAuxiliary<T>,
    noise: &NoiseModel<T>,
    sigma_d_sq: T,
) -> Result<CovarianceDiag<T>> {
    let rho = noise.rho();
    let nt = aux.s.block_rows();
    let mn = aux.s.mn();
    let mut c = OpCounter::new();
    let one = Cplx::new(T::one(), T::zero());
    let rho_c = Cplx::new(rho, T::zero());

    let d3h_d3 = aux.d3.adjoint().mul(&aux.d3, &mut c)?;
    let noise_part = stream_means(&d3h_d3)?;

    let mut diag = vec![T::zero(); nt];
    if sigma_d_sq > T::zero() {
        let b1 = aux.dbar1.add_scaled(&aux.dtil1, one, rho_c, &mut c)?;
        let b2 = aux.dbar2.add_scaled(&aux.dtil2, one, rho_c, &mut c)?;
        let rnr = Cplx::new(rho * T::of_usize(aux.d1.block_rows()), T::zero());
        let b4 = aux
            .dbar4
            .add_scaled(&DiagBlockMat::identity(nt, mn), one, rnr, &mut c)?;
        let b6 = aux.dbar6.add_scaled(&aux.dtil6, one, rho_c, &mut c)?;
        let b8 = aux.dbar8.add_scaled(&aux.dtil8, one, rho_c, &mut c)?;

        let inner = b1
            .add_scaled(&b2, one, -one, &mut c)?
            .add_scaled(&b4, one, one, &mut c)?
            .add_scaled(&b6, one, -one, &mut c)?;
        let s_part = aux.s.mul(&inner, &mut c)?.mul(&aux.s.adjoint(), &mut c)?;
        let d3_part = aux.d3.adjoint().mul(&b8, &mut c)?.mul(&aux.d3, &mut c)?;
        let bracket = s_part.add_scaled(&d3_part, one, one, &mut c)?;
        for (dst, v) in diag.iter_mut().zip(stream_means(&bracket)?) {
            *dst = noise.p_x() * sigma_d_sq * v.re;
        }
    }
    for (dst, v) in diag.iter_mut().zip(noise_part) {
        *dst += noise.sigma_v_sq() * v.re;
        *dst = dst.max(T::zero());
    }
    Ok(CovarianceDiag {
        diag: expand_per_stream(&diag, mn),
    })
}

/// Per-symbol LM SINR for a fixed channel: gain and interference from
/// `W = Psi' (D^H D + rho I)^-1 D^H D Psi`, noise-plus-distortion from
/// [`lm_noise_cov`]. The interference is the row power of `W` minus its
/// diagonal, which covers intra- and inter-stream terms without double
/// counting.
pub fn lm_sinr<T: Scalar>(
    d: &DiagBlockMat<T>,
    noise: &NoiseModel<T>,
    sigma_d_sq: T,
) -> Result<SinrReport<T>> {
    let rho = noise.rho();
    if rho <= T::zero() {
        return Err(Error::InvalidConfig(
            "the LM SINR needs a positive noise-to-signal ratio".into(),
        ));
    }
    let mut c = OpCounter::new();
    let ginv = gram(d, rho, &mut c)?.invert(&mut c)?;
    let d_lz = gram(d, T::zero(), &mut c)?;
    let k = ginv.mul(d_lz.inner(), &mut c)?;

    let gains = stream_means(&k)?;
    let (_, total_power) = stream_row_powers(&k);
    let rv = lm_noise_cov(d, noise, sigma_d_sq)?;

    let mn = d.mn();
    let p_x = noise.p_x();
    let mut gamma = Vec::with_capacity(k.block_rows() * mn);
    for (t, (&gain, &row_power)) in gains.iter().zip(&total_power).enumerate() {
        let signal = p_x * gain.norm_sqr();
        let interference = p_x * (row_power - gain.norm_sqr()).max(T::zero());
        let denom = interference + rv.diag[t * mn];
        if denom <= T::zero() {
            return Err(Error::DegenerateCovariance(t * mn));
        }
        gamma.extend(std::iter::repeat_n(signal / denom, mn));
    }
    Ok(SinrReport {
        gamma,
        mode: EqualizerMode::Lm,
        csi: if sigma_d_sq > T::zero() {
            CsiMode::Imperfect
        } else {
            CsiMode::Perfect
        },
    })
}

/// Diagonal of the LZ noise-plus-distortion covariance:
///
/// ```text
/// R_vbar = P_x sd^2 rho Psi' { Glz^-1 D^H DbarLZ D Glz^-1 } Psi
///          + P_x (rho + N_t sd^2) Psi' Glz^-1 Psi
/// ```
///
/// with `DbarLZ = sum_i (I_{N_r} (x) [Glz^-1]_{i,i})`.
pub fn lz_noise_cov<T: Scalar>(
    d: &DiagBlockMat<T>,
    noise: &NoiseModel<T>,
    sigma_d_sq: T,
) -> Result<CovarianceDiag<T>> {
    let nt = d.block_cols();
    let nr = d.block_rows();
    let mn = d.mn();
    let mut c = OpCounter::new();
    let glz_inv = gram(d, T::zero(), &mut c)?.invert(&mut c)?;
    let inv_means = stream_means(&glz_inv)?;

    let base = noise.p_x() * (noise.rho() + T::of_usize(nt) * sigma_d_sq);
    let mut diag: Vec<T> = inv_means.iter().map(|v| base * v.re).collect();

    if sigma_d_sq > T::zero() {
        let bar_lz = bar_projection(&glz_inv, nr)?;
        let term = glz_inv
            .mul(&d.adjoint(), &mut c)?
            .mul(&bar_lz, &mut c)?
            .mul(d, &mut c)?
            .mul(&glz_inv, &mut c)?;
        for (dst, v) in diag.iter_mut().zip(stream_means(&term)?) {
            *dst += noise.p_x() * sigma_d_sq * noise.rho() * v.re;
        }
    }
    for v in diag.iter_mut() {
        *v = v.max(T::zero());
    }
    Ok(CovarianceDiag {
        diag: expand_per_stream(&diag, mn),
    })
}

/// Per-symbol LZ SINR: `gamma_k = P_x / [R_vbar]_kk`.
pub fn lz_sinr<T: Scalar>(
    d: &DiagBlockMat<T>,
    noise: &NoiseModel<T>,
    sigma_d_sq: T,
) -> Result<SinrReport<T>> {
    let cov = lz_noise_cov(d, noise, sigma_d_sq)?;
    let gamma = cov
        .diag
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            if v <= T::zero() {
                Err(Error::DegenerateCovariance(k))
            } else {
                Ok(noise.p_x() / v)
            }
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(SinrReport {
        gamma,
        mode: EqualizerMode::Lz,
        csi: if sigma_d_sq > T::zero() {
            CsiMode::Imperfect
        } else {
            CsiMode::Perfect
        },
    })
}

/// Gaussian tail function `Q(x) = P(N(0,1) > x)`.
pub fn q_function<T: Scalar>(x: T) -> T {
    let x64 = x.to_f64().unwrap_or(f64::INFINITY);
    T::of_f64(0.5 * libm::erfc(x64 / std::f64::consts::SQRT_2))
}

/// Analytic BER: mean over symbols of `k0 * Q(sqrt(k1 * gamma))`.
pub fn analytic_ber<T: Scalar>(report: &SinrReport<T>, constellation: &Constellation<T>) -> T {
    let (k0, k1) = constellation.ber_constants();
    let total: T = report
        .gamma
        .iter()
        .map(|&g| k0 * q_function((k1 * g).sqrt()))
        .sum();
    total / T::of_usize(report.gamma.len())
}

/// One Monte Carlo check of an expectation identity: worst per-entry
/// deviation as a multiple of its three-sigma band.
#[derive(Debug, Clone)]
pub struct LemmaCheck<T: Scalar> {
    pub name: &'static str,
    /// max over entries of |mean - expected| / (3 * standard error).
    pub worst_ratio: T,
    pub pass: bool,
}

/// Results of [`validate_lemma_expectations`].
#[derive(Debug, Clone)]
pub struct LemmaStats<T: Scalar> {
    pub trials: usize,
    pub checks: Vec<LemmaCheck<T>>,
}

impl<T: Scalar> LemmaStats<T> {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn random_block_iid<T: Scalar, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    mn: usize,
    sigma_sq: T,
    rng: &mut R,
) -> DiagBlockMat<T> {
    DiagBlockMat::from_fn(rows, cols, mn, |_, _| {
        (0..mn).map(|_| complex_normal(rng, sigma_sq)).collect()
    })
}

struct MeanAccumulator<T: Scalar> {
    sum: Vec<Cplx<T>>,
    sum_sq: Vec<T>,
}

impl<T: Scalar> MeanAccumulator<T> {
    fn new(len: usize) -> Self {
        Self {
            sum: vec![Cplx::new(T::zero(), T::zero()); len],
            sum_sq: vec![T::zero(); len],
        }
    }

    fn push(&mut self, rows: usize, cols: usize, sample: &DiagBlockMat<T>) {
        let mut idx = 0;
        for r in 0..rows {
            for c in 0..cols {
                for &v in sample.block(r, c) {
                    self.sum[idx] += v;
                    self.sum_sq[idx] += v.norm_sqr();
                    idx += 1;
                }
            }
        }
    }

    /// Worst deviation from the expectation, in multiples of 3 standard
    /// errors (entrywise).
    fn worst_ratio(&self, expected: &[Cplx<T>], trials: usize) -> T {
        let n = T::of_usize(trials);
        let mut worst = T::zero();
        for ((&s, &sq), &e) in self.sum.iter().zip(&self.sum_sq).zip(expected) {
            let mean = s / n;
            let var = (sq / n - mean.norm_sqr()).max(T::zero());
            let se = (var / n).sqrt().max(T::of_f64(1e-300));
            let ratio = (mean - e).norm() / (T::of_f64(3.0) * se);
            worst = worst.max(ratio);
        }
        worst
    }
}

fn flatten<T: Scalar>(m: &DiagBlockMat<T>) -> Vec<Cplx<T>> {
    let mut out = Vec::with_capacity(m.block_rows() * m.block_cols() * m.mn());
    for r in 0..m.block_rows() {
        for c in 0..m.block_cols() {
            out.extend_from_slice(m.block(r, c));
        }
    }
    out
}

/// Monte Carlo validation of the expectation identities behind the
/// covariance derivation: for `X` with i.i.d. zero-mean blocks of variance
/// `sx^2`, `E[X^H Y X] = sx^2 Ybar`, `E[X Z X^H] = sx^2 Zbar`,
/// `E[X A X] = 0`, and `E[X^H B X^H] = 0`.
pub fn validate_lemma_expectations<T: Scalar, R: Rng + ?Sized>(
    nr: usize,
    nt: usize,
    mn: usize,
    trials: usize,
    rng: &mut R,
) -> Result<LemmaStats<T>> {
    let sigma_x_sq = T::one();
    let y = random_block_iid(nr, nr, mn, T::one(), rng);
    let z = random_block_iid(nt, nt, mn, T::one(), rng);
    let a = random_block_iid(nt, nr, mn, T::one(), rng);
    let b = random_block_iid(nr, nt, mn, T::one(), rng);

    let mut acc_y = MeanAccumulator::new(nt * nt * mn);
    let mut acc_z = MeanAccumulator::new(nr * nr * mn);
    let mut acc_a = MeanAccumulator::new(nr * nt * mn);
    let mut acc_b = MeanAccumulator::new(nt * nr * mn);
    let mut c = OpCounter::new();
    for _ in 0..trials {
        let x = random_block_iid(nr, nt, mn, sigma_x_sq, rng);
        let xh = x.adjoint();
        acc_y.push(nt, nt, &xh.mul(&y, &mut c)?.mul(&x, &mut c)?);
        acc_z.push(nr, nr, &x.mul(&z, &mut c)?.mul(&xh, &mut c)?);
        acc_a.push(nr, nt, &x.mul(&a, &mut c)?.mul(&x, &mut c)?);
        acc_b.push(nt, nr, &xh.mul(&b, &mut c)?.mul(&xh, &mut c)?);
    }

    let ybar = flatten(&bar_projection(&y, nt)?);
    let zbar = flatten(&bar_projection(&z, nr)?);
    let zero_a = vec![Cplx::new(T::zero(), T::zero()); nr * nt * mn];
    let zero_b = vec![Cplx::new(T::zero(), T::zero()); nt * nr * mn];

    let make = |name, worst: T| LemmaCheck {
        name,
        worst_ratio: worst,
        pass: worst <= T::one(),
    };
    let checks = vec![
        make("E[X^H Y X] = sx^2 Ybar", acc_y.worst_ratio(&ybar, trials)),
        make("E[X Z X^H] = sx^2 Zbar", acc_z.worst_ratio(&zbar, trials)),
        make("E[X A X] = 0", acc_a.worst_ratio(&zero_a, trials)),
        make("E[X^H B X^H] = 0", acc_b.worst_ratio(&zero_b, trials)),
    ];
    Ok(LemmaStats { trials, checks })
}

/// Fractions of Monte Carlo draws violating the two conditions behind the
/// first-order expansion of the imperfect-CSI combiner.
#[derive(Debug, Clone, Copy)]
pub struct TaylorRegimeReport<T: Scalar> {
    pub draws: usize,
    /// Fraction of draws with `|dD^H dD|_F >= |dD^H D|_F` (second-order
    /// term not dominated).
    pub norm_violation_fraction: T,
    /// Fraction of draws where the spectral radius of
    /// `(dD^H D + D^H dD)(D^H D + rho I)^-1` exceeds one on some bin.
    pub spectrum_violation_fraction: T,
}

/// Sample channels and CSI errors and measure how often the expansion's
/// premises fail. The spectral radius is evaluated per delay-Doppler bin
/// (closed form for two streams, power iteration otherwise) and maximized
/// over bins.
#[allow(clippy::too_many_arguments)]
pub fn taylor_regime_evidence<T: Scalar, R: Rng + ?Sized>(
    profile: &crate::channel::DelayDopplerProfile<T>,
    nt: usize,
    nr: usize,
    noise: &NoiseModel<T>,
    csi_error: &CsiErrorModel<T>,
    draws: usize,
    transform: &DdTransform<T>,
    rng: &mut R,
) -> Result<TaylorRegimeReport<T>> {
    let mut c = OpCounter::new();
    let one = Cplx::new(T::one(), T::zero());
    let mut norm_violations = 0usize;
    let mut spectrum_violations = 0usize;
    for _ in 0..draws {
        let real = crate::channel::sample_channel(profile, nt, nr, rng)?;
        let d = eigen_matrix(&real, transform, &mut c)?;
        let delta = perturb_csi(&real, csi_error, transform, rng)?.delta_d;

        let second_order = delta.adjoint().mul(&delta, &mut c)?;
        let cross = delta.adjoint().mul(&d, &mut c)?;
        if second_order.fro_norm() >= cross.fro_norm() {
            norm_violations += 1;
        }

        let t_mat = cross.add_scaled(&d.adjoint().mul(&delta, &mut c)?, one, one, &mut c)?;
        let s = gram(&d, noise.rho(), &mut c)?.invert(&mut c)?;
        let ts = t_mat.mul(&s, &mut c)?;
        if max_bin_spectral_radius(&ts) > T::one() {
            spectrum_violations += 1;
        }
    }
    Ok(TaylorRegimeReport {
        draws,
        norm_violation_fraction: T::of_usize(norm_violations) / T::of_usize(draws),
        spectrum_violation_fraction: T::of_usize(spectrum_violations) / T::of_usize(draws),
    })
}

/// Largest per-bin spectral radius of a square block matrix (the bins
/// decouple into `N_t x N_t` eigenproblems).
pub fn max_bin_spectral_radius<T: Scalar>(m: &DiagBlockMat<T>) -> T {
    let nt = m.block_rows();
    debug_assert_eq!(nt, m.block_cols());
    let mut worst = T::zero();
    for bin in 0..m.mn() {
        let radius = if nt == 1 {
            m.block(0, 0)[bin].norm()
        } else if nt == 2 {
            // Quadratic closed form.
            let a = m.block(0, 0)[bin];
            let b = m.block(0, 1)[bin];
            let c = m.block(1, 0)[bin];
            let d = m.block(1, 1)[bin];
            let tr = a + d;
            let det = a * d - b * c;
            let half = T::of_f64(0.5);
            let disc = (tr * tr - det.scale(T::of_f64(4.0))).sqrt();
            ((tr + disc).scale(half).norm()).max((tr - disc).scale(half).norm())
        } else {
            // Power iteration on the bin matrix.
            let a: Vec<Vec<Cplx<T>>> = (0..nt)
                .map(|i| (0..nt).map(|j| m.block(i, j)[bin]).collect())
                .collect();
            let mut v: Vec<Cplx<T>> = (0..nt)
                .map(|i| Cplx::new(T::one() + T::of_usize(i) * T::of_f64(0.37), T::of_f64(0.21)))
                .collect();
            let mut lambda = T::zero();
            for _ in 0..100 {
                let w: Vec<Cplx<T>> = (0..nt)
                    .map(|i| (0..nt).map(|j| a[i][j] * v[j]).sum())
                    .collect();
                let norm_w = w
                    .iter()
                    .map(|x| x.norm_sqr())
                    .fold(T::zero(), |p, q| p + q)
                    .sqrt();
                if norm_w == T::zero() {
                    lambda = T::zero();
                    break;
                }
                let norm_v = v
                    .iter()
                    .map(|x| x.norm_sqr())
                    .fold(T::zero(), |p, q| p + q)
                    .sqrt();
                lambda = norm_w / norm_v;
                v = w.into_iter().map(|x| x.unscale(norm_w)).collect();
            }
            lambda
        };
        worst = worst.max(radius);
    }
    worst
}

/// Empirical per-symbol SINR of a receiver on a fixed channel: repeated
/// data/noise (and CSI error) draws, then
/// `gamma_m = P_x |mean gain|^2 / var(residual)`.
pub fn empirical_sinr<T: Scalar, R: Rng + ?Sized>(
    real: &ChannelRealization<T>,
    mode: EqualizerMode,
    noise: &NoiseModel<T>,
    csi_error: Option<&CsiErrorModel<T>>,
    trials: usize,
    transform: &DdTransform<T>,
    rng: &mut R,
) -> Result<SinrReport<T>> {
    let mut c = OpCounter::new();
    let d = eigen_matrix(real, transform, &mut c)?;
    let perfect_eq = match csi_error {
        None => Some(LinearEqualizer::prepare(&d, mode, noise, &mut c)?),
        Some(_) => None,
    };

    let len = real.nt() * real.mn();
    let mut s_xy = vec![Cplx::new(T::zero(), T::zero()); len];
    let mut s_x2 = vec![T::zero(); len];
    let mut s_y2 = vec![T::zero(); len];
    for _ in 0..trials {
        let x = SymbolFrame::new(
            (0..len).map(|_| complex_normal(rng, noise.p_x())).collect(),
            real.nt(),
            real.m(),
            real.n(),
        )?;
        let y = transmit_with_eigen(&x, &d, noise, transform, rng)?;
        let xhat = match (&perfect_eq, csi_error) {
            (Some(eq), _) => eq.apply(&y, transform, &mut c)?,
            (None, Some(err)) => {
                let pert = perturb_csi(real, err, transform, rng)?;
                let one = Cplx::new(T::one(), T::zero());
                let d_hat = d.add_scaled(&pert.delta_d, one, one, &mut c)?;
                LinearEqualizer::prepare(&d_hat, mode, noise, &mut c)?
                    .apply(&y, transform, &mut c)?
            }
            (None, None) => unreachable!("perfect equalizer prepared above"),
        };
        for (m, (&xv, &yv)) in x.data().iter().zip(xhat.data()).enumerate() {
            s_xy[m] += yv * xv.conj();
            s_x2[m] += xv.norm_sqr();
            s_y2[m] += yv.norm_sqr();
        }
    }

    let n = T::of_usize(trials);
    let gamma = (0..len)
        .map(|m| {
            let gain = s_xy[m] / s_x2[m];
            let var = (s_y2[m] / n - gain.norm_sqr() * (s_x2[m] / n)).max(T::of_f64(1e-300));
            noise.p_x() * gain.norm_sqr() / var
        })
        .collect();
    Ok(SinrReport {
        gamma,
        mode,
        csi: if csi_error.is_some() {
            CsiMode::Imperfect
        } else {
            CsiMode::Perfect
        },
    })
}
