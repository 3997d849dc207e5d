//! Delay-Doppler channel generation and application.
//!
//! A channel realization is a set of integer delay/Doppler taps with one
//! complex gain per tap and antenna pair. Its per-pair matrix places the tap
//! gain `h'_i` at row `k + N*l`, column `(k - k_i) mod N + N*((l - l_i) mod M)`,
//! which makes it block circulant (in the delay index) with circulant `N x N`
//! blocks (in the Doppler index). The eigenvalue form is the unnormalized 2D
//! DFT of the tap grid, so channels are applied in `O(MN log MN)` through
//! [`DdTransform`].

use rand::Rng;

use crate::block::DiagBlockMat;
use crate::counter::OpCounter;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::modem::SymbolFrame;
use crate::scalar::Scalar;
use crate::transform::{DdTransform, Direction};
use crate::Cplx;

/// One propagation path: tap power in dB plus integer delay/Doppler bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDopplerTap<T: Scalar> {
    pub power_db: T,
    /// Delay tap `l_i` in `[0, M)`.
    pub delay: usize,
    /// Doppler tap `k_i` in `[0, N)`.
    pub doppler: usize,
}

/// Statistical description of a delay-Doppler channel on an `M x N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayDopplerProfile<T: Scalar> {
    taps: Vec<DelayDopplerTap<T>>,
    carrier_hz: T,
    subcarrier_spacing_hz: T,
    m: usize,
    n: usize,
}

impl<T: Scalar> DelayDopplerProfile<T> {
    pub fn new(
        taps: Vec<DelayDopplerTap<T>>,
        carrier_hz: T,
        subcarrier_spacing_hz: T,
        m: usize,
        n: usize,
    ) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidConfig(
                "profile needs at least one tap".into(),
            ));
        }
        if m == 0 || n == 0 {
            return Err(Error::InvalidConfig(
                "grid dimensions must be positive".into(),
            ));
        }
        for (i, tap) in taps.iter().enumerate() {
            if tap.delay >= m || tap.doppler >= n {
                return Err(Error::InvalidConfig(format!(
                    "tap {} at (l={}, k={}) outside the {}x{} grid",
                    i, tap.delay, tap.doppler, m, n
                )));
            }
            for other in &taps[..i] {
                if other.delay == tap.delay && other.doppler == tap.doppler {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate tap position (l={}, k={})",
                        tap.delay, tap.doppler
                    )));
                }
            }
        }
        Ok(Self {
            taps,
            carrier_hz,
            subcarrier_spacing_hz,
            m,
            n,
        })
    }

    /// The five-tap reference channel: delays
    /// `{2.08, 5.20, 8.328, 11.46, 14.80} us`, Doppler shifts
    /// `{0, 470, 940, 1410, 1851} Hz`, tap powers
    /// `{1, -1.804, -3.565, -5.376, -8.860} dB` (the first entry taken at
    /// face value as +1 dB), at a 4 GHz carrier with 15 kHz subcarrier
    /// spacing. The integer taps are pinned at the reference 32x32 grid,
    /// `(l, k) = (1,0), (2,1), (4,2), (6,3), (7,4)`, so the five taps stay
    /// distinct on any grid with `m >= 8`, `n >= 5`; use
    /// [`Self::from_physical`] to re-quantize at a different grid.
    pub fn table2(m: usize, n: usize) -> Result<Self> {
        let tap = |p: f64, l: usize, k: usize| DelayDopplerTap {
            power_db: T::of_f64(p),
            delay: l,
            doppler: k,
        };
        Self::new(
            vec![
                tap(1.0, 1, 0),
                tap(-1.804, 2, 1),
                tap(-3.565, 4, 2),
                tap(-5.376, 6, 3),
                tap(-8.860, 7, 4),
            ],
            T::of_f64(4.0e9),
            T::of_f64(15.0e3),
            m,
            n,
        )
    }

    /// Quantize physical delays (seconds) and Doppler shifts (Hz) to the
    /// nearest integer taps of an `m x n` grid with the given subcarrier
    /// spacing: `l_i = round(tau_i * m * delta_f)`, `k_i = round(nu_i * n / delta_f)`.
    /// Fails if two paths land on the same tap.
    pub fn from_physical(
        delays_s: &[f64],
        dopplers_hz: &[f64],
        powers_db: &[f64],
        carrier_hz: f64,
        subcarrier_spacing_hz: f64,
        m: usize,
        n: usize,
    ) -> Result<Self> {
        if delays_s.len() != dopplers_hz.len() || delays_s.len() != powers_db.len() {
            return Err(Error::InvalidConfig(
                "delay, Doppler, and power lists must have equal length".into(),
            ));
        }
        let taps = delays_s
            .iter()
            .zip(dopplers_hz)
            .zip(powers_db)
            .map(|((&tau, &nu), &p)| DelayDopplerTap {
                power_db: T::of_f64(p),
                delay: (tau * m as f64 * subcarrier_spacing_hz).round() as usize,
                doppler: (nu * n as f64 / subcarrier_spacing_hz).round() as usize,
            })
            .collect();
        Self::new(
            taps,
            T::of_f64(carrier_hz),
            T::of_f64(subcarrier_spacing_hz),
            m,
            n,
        )
    }

    pub fn taps(&self) -> &[DelayDopplerTap<T>] {
        &self.taps
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn carrier_hz(&self) -> T {
        self.carrier_hz
    }

    pub fn subcarrier_spacing_hz(&self) -> T {
        self.subcarrier_spacing_hz
    }

    /// Per-tap linear powers, normalized to sum to one so the average
    /// channel energy is unit and the SNR definition is unambiguous.
    pub fn linear_powers(&self) -> Vec<T> {
        let ten = T::of_f64(10.0);
        let raw: Vec<T> = self
            .taps
            .iter()
            .map(|t| ten.powf(t.power_db / ten))
            .collect();
        let total: T = raw.iter().copied().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

/// Symbol power and noise variance, both linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T: Scalar> {
    p_x: T,
    sigma_v_sq: T,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(p_x: T, sigma_v_sq: T) -> Result<Self> {
        if p_x <= T::zero() || sigma_v_sq < T::zero() {
            return Err(Error::InvalidConfig(
                "need symbol power > 0 and noise variance >= 0".into(),
            ));
        }
        Ok(Self { p_x, sigma_v_sq })
    }

    /// Unit symbol power at the given SNR (dB): `sigma_v^2 = 10^(-snr/10)`.
    pub fn from_snr_db(snr_db: T) -> Self {
        let ten = T::of_f64(10.0);
        Self {
            p_x: T::one(),
            sigma_v_sq: ten.powf(-snr_db / ten),
        }
    }

    pub fn p_x(&self) -> T {
        self.p_x
    }

    pub fn sigma_v_sq(&self) -> T {
        self.sigma_v_sq
    }

    /// `rho = sigma_v^2 / P_x = 1 / SNR`.
    pub fn rho(&self) -> T {
        self.sigma_v_sq / self.p_x
    }
}

/// Channel-estimate error statistics: i.i.d. complex Gaussian entries of
/// variance `sigma_e^2` on the channel support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorModel<T: Scalar> {
    sigma_e_sq: T,
}

impl<T: Scalar> CsiErrorModel<T> {
    pub fn new(sigma_e_sq: T) -> Result<Self> {
        if sigma_e_sq < T::zero() {
            return Err(Error::InvalidConfig("error variance must be >= 0".into()));
        }
        Ok(Self { sigma_e_sq })
    }

    /// The SNR-coupled setting `sigma_e^2 = rho / N_t`.
    pub fn scaled_to_snr(noise: &NoiseModel<T>, nt: usize) -> Self {
        Self {
            sigma_e_sq: noise.rho() / T::of_usize(nt),
        }
    }

    pub fn sigma_e_sq(&self) -> T {
        self.sigma_e_sq
    }

    /// Variance of each eigenvalue-domain error entry. With integer taps,
    /// every tap contributes one non-zero per circulant-block row, so the
    /// per-block non-zero counts sum to the number of taps.
    pub fn sigma_d_sq(&self, num_taps: usize) -> T {
        self.sigma_e_sq * T::of_usize(num_taps)
    }
}

/// Sampled channel: tap positions plus one complex gain per antenna pair
/// and tap. Immutable once drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T: Scalar> {
    nr: usize,
    nt: usize,
    m: usize,
    n: usize,
    /// Tap positions `(l_i, k_i)`, shared by every antenna pair.
    taps: Vec<(usize, usize)>,
    /// Gains indexed `[(r * nt + t) * num_taps + i]`.
    gains: Vec<Cplx<T>>,
}

impl<T: Scalar> ChannelRealization<T> {
    pub fn from_parts(
        nr: usize,
        nt: usize,
        m: usize,
        n: usize,
        taps: Vec<(usize, usize)>,
        gains: Vec<Cplx<T>>,
    ) -> Result<Self> {
        if gains.len() != nr * nt * taps.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gains for {} antenna pairs x {} taps",
                gains.len(),
                nr * nt,
                taps.len()
            )));
        }
        for &(l, k) in &taps {
            if l >= m || k >= n {
                return Err(Error::InvalidConfig(format!(
                    "tap (l={l}, k={k}) outside the {m}x{n} grid"
                )));
            }
        }
        Ok(Self {
            nr,
            nt,
            m,
            n,
            taps,
            gains,
        })
    }

    /// The identity channel: a single zero-delay zero-Doppler tap with gain
    /// one between matching antennas and zero otherwise.
    pub fn identity(streams: usize, m: usize, n: usize) -> Self {
        let mut gains = vec![Cplx::new(T::zero(), T::zero()); streams * streams];
        for s in 0..streams {
            gains[s * streams + s] = Cplx::new(T::one(), T::zero());
        }
        Self {
            nr: streams,
            nt: streams,
            m,
            n,
            taps: vec![(0, 0)],
            gains,
        }
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    pub fn taps(&self) -> &[(usize, usize)] {
        &self.taps
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn gains_for(&self, r: usize, t: usize) -> &[Cplx<T>] {
        let at = (r * self.nt + t) * self.taps.len();
        &self.gains[at..at + self.taps.len()]
    }
}

/// One draw from the standard circularly-symmetric complex Gaussian scaled
/// to the given variance.
pub fn complex_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, sigma_sq: T) -> Cplx<T> {
    let scale = (sigma_sq / T::of_f64(2.0)).sqrt();
    Cplx::new(T::std_normal(rng) * scale, T::std_normal(rng) * scale)
}

/// Draw one channel realization: per tap and antenna pair,
/// `h'_i = h_i * exp(-2i*pi*nu_i*tau_i)` with `h_i ~ CN(0, sigma_i^2)` from
/// the normalized profile powers. Deterministic given the RNG stream.
pub fn sample_channel<T: Scalar, R: Rng + ?Sized>(
    profile: &DelayDopplerProfile<T>,
    nt: usize,
    nr: usize,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    if nt < 1 || nr < nt {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= N_t <= N_r, got N_t = {nt}, N_r = {nr}"
        )));
    }
    let powers = profile.linear_powers();
    let taps: Vec<(usize, usize)> = profile
        .taps()
        .iter()
        .map(|t| (t.delay, t.doppler))
        .collect();
    // nu_i * tau_i = (k_i / (N T)) * (l_i / (M df)) = k_i l_i / (M N).
    let mn = T::of_usize(profile.m() * profile.n());
    let rotations: Vec<Cplx<T>> = taps
        .iter()
        .map(|&(l, k)| {
            let phase = T::of_f64(-2.0) * T::PI() * T::of_usize(k * l) / mn;
            Cplx::from_polar(T::one(), phase)
        })
        .collect();
    let mut gains = Vec::with_capacity(nr * nt * taps.len());
    for _r in 0..nr {
        for _t in 0..nt {
            for (i, &sigma_sq) in powers.iter().enumerate() {
                gains.push(complex_normal(rng, sigma_sq) * rotations[i]);
            }
        }
    }
    ChannelRealization::from_parts(nr, nt, profile.m(), profile.n(), taps, gains)
}

/// Dense channel matrix (oracle path): per antenna pair, tap `i` contributes
/// `h'_i` at row `k + N*l`, column `(k - k_i) mod N + N*((l - l_i) mod M)`.
pub fn build_dense_channel<T: Scalar>(real: &ChannelRealization<T>) -> DenseMat<T> {
    let (m, n, mn) = (real.m(), real.n(), real.mn());
    let mut h = DenseMat::zeros(real.nr() * mn, real.nt() * mn);
    for r in 0..real.nr() {
        for t in 0..real.nt() {
            let gains = real.gains_for(r, t);
            for (&(li, ki), &g) in real.taps().iter().zip(gains) {
                for l in 0..m {
                    let src_l = (l + m - li) % m;
                    for k in 0..n {
                        let src_k = (k + n - ki) % n;
                        let row = r * mn + k + n * l;
                        let col = t * mn + src_k + n * src_l;
                        h[(row, col)] += g;
                    }
                }
            }
        }
    }
    h
}

/// Eigenvalue matrix `D`: per antenna pair, the unnormalized 2D DFT of the
/// tap grid (one transform per block, counted).
pub fn eigen_matrix<T: Scalar>(
    real: &ChannelRealization<T>,
    transform: &DdTransform<T>,
    counter: &mut OpCounter,
) -> Result<DiagBlockMat<T>> {
    if transform.m() != real.m() || transform.n() != real.n() {
        return Err(Error::ShapeMismatch(format!(
            "transform grid {}x{} != channel grid {}x{}",
            transform.m(),
            transform.n(),
            real.m(),
            real.n()
        )));
    }
    let mn = real.mn();
    let mut d = DiagBlockMat::zeros(real.nr(), real.nt(), mn);
    let mut generator = vec![Cplx::new(T::zero(), T::zero()); mn];
    for r in 0..real.nr() {
        for t in 0..real.nt() {
            generator.fill(Cplx::new(T::zero(), T::zero()));
            for (&(l, k), &g) in real.taps().iter().zip(real.gains_for(r, t)) {
                generator[k + real.n() * l] += g;
            }
            d.block_mut(r, t)
                .copy_from_slice(&transform.eigenvalues(&generator));
            counter.add_transforms(1);
        }
    }
    Ok(d)
}

/// Pass a frame through a precomputed eigenvalue matrix and add receiver
/// noise: forward transform per transmit stream, block-diagonal multiply,
/// adjoint transform per receive antenna, then `CN(0, sigma_v^2)` noise.
pub fn transmit_with_eigen<T: Scalar, R: Rng + ?Sized>(
    x: &SymbolFrame<T>,
    d: &DiagBlockMat<T>,
    noise: &NoiseModel<T>,
    transform: &DdTransform<T>,
    rng: &mut R,
) -> Result<SymbolFrame<T>> {
    if x.streams() != d.block_cols() || x.mn() != d.mn() {
        return Err(Error::ShapeMismatch(format!(
            "frame with {} streams of {} bins against {}x{} channel of {} bins",
            x.streams(),
            x.mn(),
            d.block_rows(),
            d.block_cols(),
            d.mn()
        )));
    }
    let mut scratch = OpCounter::new();
    let mut tx = x.data().to_vec();
    transform.apply(&mut tx, Direction::Forward, x.streams(), &mut scratch)?;
    let mut rx = d.mul_vec(&tx, &mut scratch)?;
    transform.apply(&mut rx, Direction::Adjoint, d.block_rows(), &mut scratch)?;
    if noise.sigma_v_sq() > T::zero() {
        for v in rx.iter_mut() {
            *v += complex_normal(rng, noise.sigma_v_sq());
        }
    }
    SymbolFrame::new(rx, d.block_rows(), x.m(), x.n())
}

/// `y = H x + v` through the fast eigenvalue path.
pub fn transmit<T: Scalar, R: Rng + ?Sized>(
    x: &SymbolFrame<T>,
    real: &ChannelRealization<T>,
    noise: &NoiseModel<T>,
    transform: &DdTransform<T>,
    rng: &mut R,
) -> Result<SymbolFrame<T>> {
    let d = eigen_matrix(real, transform, &mut OpCounter::new())?;
    transmit_with_eigen(x, &d, noise, transform, rng)
}

/// A perturbed channel estimate: the realization whose gains include the
/// error draw, plus the eigenvalue form of the error alone.
#[derive(Debug, Clone)]
pub struct CsiPerturbation<T: Scalar> {
    /// Estimated channel `H + dH` as generators.
    pub perturbed: ChannelRealization<T>,
    /// Eigenvalue matrix of the error `dH`.
    pub delta_d: DiagBlockMat<T>,
}

/// Draw a CSI error on the channel support: i.i.d. `CN(0, sigma_e^2)` per
/// tap and antenna pair, independent of the channel.
pub fn perturb_csi<T: Scalar, R: Rng + ?Sized>(
    real: &ChannelRealization<T>,
    err: &CsiErrorModel<T>,
    transform: &DdTransform<T>,
    rng: &mut R,
) -> Result<CsiPerturbation<T>> {
    let l = real.num_taps();
    let mut delta_gains = Vec::with_capacity(real.nr() * real.nt() * l);
    for _ in 0..real.nr() * real.nt() * l {
        delta_gains.push(if err.sigma_e_sq() > T::zero() {
            complex_normal(rng, err.sigma_e_sq())
        } else {
            Cplx::new(T::zero(), T::zero())
        });
    }
    let delta_real = ChannelRealization::from_parts(
        real.nr(),
        real.nt(),
        real.m(),
        real.n(),
        real.taps().to_vec(),
        delta_gains.clone(),
    )?;
    let delta_d = eigen_matrix(&delta_real, transform, &mut OpCounter::new())?;
    let perturbed_gains: Vec<Cplx<T>> = real
        .gains
        .iter()
        .zip(&delta_gains)
        .map(|(a, b)| a + b)
        .collect();
    let perturbed = ChannelRealization::from_parts(
        real.nr(),
        real.nt(),
        real.m(),
        real.n(),
        real.taps().to_vec(),
        perturbed_gains,
    )?;
    Ok(CsiPerturbation { perturbed, delta_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn table2_matches_physical_quantization_at_reference_grid() {
        let preset = DelayDopplerProfile::<f64>::table2(32, 32).unwrap();
        let mapped = DelayDopplerProfile::<f64>::from_physical(
            &[2.08e-6, 5.20e-6, 8.328e-6, 11.46e-6, 14.80e-6],
            &[0.0, 470.0, 940.0, 1410.0, 1851.0],
            &[1.0, -1.804, -3.565, -5.376, -8.860],
            4.0e9,
            15.0e3,
            32,
            32,
        )
        .unwrap();
        assert_eq!(preset, mapped);
        let positions: Vec<(usize, usize)> =
            preset.taps().iter().map(|t| (t.delay, t.doppler)).collect();
        assert_eq!(positions, vec![(1, 0), (2, 1), (4, 2), (6, 3), (7, 4)]);
    }

    #[test]
    fn linear_powers_normalize_and_preserve_ordering() {
        let p = DelayDopplerProfile::<f64>::table2(32, 32).unwrap();
        let powers = p.linear_powers();
        let total: f64 = powers.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        // The +1 dB first tap carries the most power.
        for w in powers.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn profile_validation_rejects_bad_taps() {
        let tap = |l, k| DelayDopplerTap {
            power_db: 0.0f64,
            delay: l,
            doppler: k,
        };
        assert!(DelayDopplerProfile::new(vec![tap(8, 0)], 4e9, 15e3, 8, 8).is_err());
        assert!(DelayDopplerProfile::new(vec![tap(1, 1), tap(1, 1)], 4e9, 15e3, 8, 8).is_err());
        assert!(DelayDopplerProfile::<f64>::new(vec![], 4e9, 15e3, 8, 8).is_err());
        // The preset needs room for Doppler tap 4.
        assert!(DelayDopplerProfile::<f64>::table2(8, 4).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_respects_dims() {
        let p = DelayDopplerProfile::<f64>::table2(16, 16).unwrap();
        let a = sample_channel(&p, 2, 4, &mut crate::rng::stream(1, "channel")).unwrap();
        let b = sample_channel(&p, 2, 4, &mut crate::rng::stream(1, "channel")).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.nr(), a.nt(), a.num_taps()), (4, 2, 5));
        assert!(sample_channel(&p, 4, 2, &mut crate::rng::stream(1, "x")).is_err());
    }

    #[test]
    fn per_tap_sample_variance_matches_profile() {
        let p = DelayDopplerProfile::<f64>::table2(16, 16).unwrap();
        let powers = p.linear_powers();
        let mut rng = crate::rng::stream(17, "variance");
        let draws = 20_000;
        let mut acc = vec![0.0f64; p.num_taps()];
        for _ in 0..draws {
            let real = sample_channel(&p, 2, 4, &mut rng).unwrap();
            for r in 0..4 {
                for t in 0..2 {
                    for (i, g) in real.gains_for(r, t).iter().enumerate() {
                        acc[i] += g.norm_sqr();
                    }
                }
            }
        }
        let samples = (draws * 8) as f64;
        for (i, &sigma_sq) in powers.iter().enumerate() {
            let measured = acc[i] / samples;
            assert!(
                (measured - sigma_sq).abs() <= 0.02 * sigma_sq,
                "tap {i}: measured {measured:.5}, expected {sigma_sq:.5}"
            );
        }
    }

    #[test]
    fn dense_identity_channel() {
        let real = ChannelRealization::<f64>::identity(1, 2, 2);
        let h = build_dense_channel(&real);
        let eye = DenseMat::identity(4);
        assert!(h.add_scaled(&eye, C64::new(-1.0, 0.0)).fro_norm() <= 1e-15);
    }

    #[test]
    fn dense_pure_delay_is_a_block_shift() {
        // Single tap (l=1, k=0) with gain g on a 2x2 grid: the two 2x2
        // Doppler blocks swap.
        let g = C64::new(0.5, -1.5);
        let real = ChannelRealization::from_parts(1, 1, 2, 2, vec![(1, 0)], vec![g]).unwrap();
        let h = build_dense_channel(&real);
        let mut expected = DenseMat::<f64>::zeros(4, 4);
        expected[(2, 0)] = g;
        expected[(3, 1)] = g;
        expected[(0, 2)] = g;
        expected[(1, 3)] = g;
        assert!(h.add_scaled(&expected, C64::new(-1.0, 0.0)).fro_norm() <= 1e-15);
    }

    #[test]
    fn dense_channel_is_doubly_block_circulant() {
        // Every entry must equal the first-column entry at the same cyclic
        // offset, for every antenna pair.
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 2, 2, &mut crate::rng::stream(3, "structure")).unwrap();
        let h = build_dense_channel(&real);
        let (m, n, mn) = (8, 8, 64);
        for r in 0..2 {
            for t in 0..2 {
                for l in 0..m {
                    for k in 0..n {
                        for lp in 0..m {
                            for kp in 0..n {
                                let row = r * mn + k + n * l;
                                let col = t * mn + kp + n * lp;
                                let dl = (l + m - lp) % m;
                                let dk = (k + n - kp) % n;
                                let reference = h[(r * mn + dk + n * dl, t * mn)];
                                assert_eq!(h[(row, col)], reference);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn eigen_of_identity_channel_is_constant() {
        let real = ChannelRealization::<f64>::identity(2, 4, 4);
        let transform = DdTransform::new(4, 4);
        let d = eigen_matrix(&real, &transform, &mut OpCounter::new()).unwrap();
        for r in 0..2 {
            for t in 0..2 {
                let expected = if r == t { 1.0 } else { 0.0 };
                for v in d.block(r, t) {
                    assert!((v - C64::new(expected, 0.0)).norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn eigen_counts_one_transform_per_block() {
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 2, 3, &mut crate::rng::stream(5, "count")).unwrap();
        let transform = DdTransform::new(8, 8);
        let mut c = OpCounter::new();
        eigen_matrix(&real, &transform, &mut c).unwrap();
        assert_eq!(c.transforms, 6);
    }

    #[test]
    fn reconstruction_identity_small_scale() {
        // Per block, expanding F' * diag(lambda) * F column by column must
        // reproduce the dense channel.
        let tap = |p: f64, l, k| DelayDopplerTap {
            power_db: p,
            delay: l,
            doppler: k,
        };
        let profile = DelayDopplerProfile::new(
            vec![tap(0.0, 0, 0), tap(-2.0, 1, 1), tap(-4.0, 2, 3)],
            4e9,
            15e3,
            4,
            4,
        )
        .unwrap();
        let real = sample_channel(&profile, 2, 2, &mut crate::rng::stream(7, "recon")).unwrap();
        let transform = DdTransform::new(4, 4);
        let d = eigen_matrix(&real, &transform, &mut OpCounter::new()).unwrap();
        let h = build_dense_channel(&real);
        let mn = 16;
        let mut err_sq = 0.0;
        let mut norm_sq = 0.0;
        for r in 0..2 {
            for t in 0..2 {
                let lambda = d.block(r, t);
                for col in 0..mn {
                    let mut v = transform.unit_column(col);
                    for (x, lam) in v.iter_mut().zip(lambda) {
                        *x *= lam;
                    }
                    transform.transform_grid(&mut v, Direction::Adjoint);
                    for row in 0..mn {
                        let dense = h[(r * mn + row, t * mn + col)];
                        err_sq += (v[row] - dense).norm_sqr();
                        norm_sq += dense.norm_sqr();
                    }
                }
            }
        }
        assert!(err_sq.sqrt() <= 1e-10 * norm_sq.sqrt());
    }

    #[test]
    fn transmit_identity_noiseless_is_lossless() {
        let real = ChannelRealization::<f64>::identity(2, 4, 4);
        let transform = DdTransform::new(4, 4);
        let noise = NoiseModel::new(1.0, 0.0).unwrap();
        let mut rng = crate::rng::stream(9, "tx");
        let x = SymbolFrame::new(
            (0..32)
                .map(|i| C64::new((i as f64).cos(), (i as f64).sin()))
                .collect(),
            2,
            4,
            4,
        )
        .unwrap();
        let y = transmit(&x, &real, &noise, &transform, &mut rng).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn transmit_fast_path_matches_dense_multiply() {
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 2, 4, &mut crate::rng::stream(11, "fastdense")).unwrap();
        let transform = DdTransform::new(8, 8);
        let noise = NoiseModel::new(1.0, 0.0).unwrap();
        let mut rng = crate::rng::stream(12, "unused");
        let x = SymbolFrame::new(
            (0..128)
                .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect(),
            2,
            8,
            8,
        )
        .unwrap();
        let fast = transmit(&x, &real, &noise, &transform, &mut rng).unwrap();
        let dense = build_dense_channel(&real).mul_vec(x.data());
        let norm: f64 = dense.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = fast
            .data()
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * norm);
    }

    #[test]
    fn pure_noise_has_requested_variance() {
        let real = ChannelRealization::<f64>::identity(4, 16, 16);
        let transform = DdTransform::new(16, 16);
        let noise = NoiseModel::new(1.0, 1.0).unwrap();
        let mut rng = crate::rng::stream(13, "noise");
        let x = SymbolFrame::zeros(4, 16, 16);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..100 {
            let y = transmit(&x, &real, &noise, &transform, &mut rng).unwrap();
            acc += y.data().iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += y.len();
        }
        let measured = acc / count as f64;
        // 3 sigma band for the mean of |CN(0,1)|^2 over `count` samples.
        let band = 3.0 / (count as f64).sqrt();
        assert!((measured - 1.0).abs() <= band, "variance {measured:.4}");
    }

    #[test]
    fn zero_csi_error_is_exact() {
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 2, 2, &mut crate::rng::stream(15, "csi")).unwrap();
        let transform = DdTransform::new(8, 8);
        let err = CsiErrorModel::new(0.0).unwrap();
        let pert =
            perturb_csi(&real, &err, &transform, &mut crate::rng::stream(16, "csi")).unwrap();
        assert_eq!(pert.perturbed, real);
        assert!(pert.delta_d.fro_norm() == 0.0);
    }

    #[test]
    fn perturbed_eigen_adds_linearly() {
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 2, 2, &mut crate::rng::stream(18, "csi2")).unwrap();
        let transform = DdTransform::new(8, 8);
        let err = CsiErrorModel::new(0.05).unwrap();
        let pert =
            perturb_csi(&real, &err, &transform, &mut crate::rng::stream(19, "csi2")).unwrap();
        let d = eigen_matrix(&real, &transform, &mut OpCounter::new()).unwrap();
        let d_hat = eigen_matrix(&pert.perturbed, &transform, &mut OpCounter::new()).unwrap();
        let one = C64::new(1.0, 0.0);
        let sum = d
            .add_scaled(&pert.delta_d, one, one, &mut OpCounter::new())
            .unwrap();
        let diff = d_hat
            .add_scaled(&sum, one, -one, &mut OpCounter::new())
            .unwrap()
            .fro_norm();
        assert!(diff <= 1e-10 * d_hat.fro_norm());
    }

    #[test]
    fn delta_d_entries_are_zero_mean_with_variance_sigma_e_lh() {
        let p = DelayDopplerProfile::<f64>::table2(8, 8).unwrap();
        let real = sample_channel(&p, 1, 1, &mut crate::rng::stream(21, "dvar")).unwrap();
        let transform = DdTransform::new(8, 8);
        let sigma_e_sq = 0.04;
        let err = CsiErrorModel::new(sigma_e_sq).unwrap();
        let expected = err.sigma_d_sq(real.num_taps());
        let mut rng = crate::rng::stream(22, "dvar");
        let draws = 2_000;
        let mut mean = C64::new(0.0, 0.0);
        let mut per_draw_power = Vec::with_capacity(draws);
        for _ in 0..draws {
            let pert = perturb_csi(&real, &err, &transform, &mut rng).unwrap();
            let block = pert.delta_d.block(0, 0);
            mean += block.iter().sum::<C64>();
            per_draw_power
                .push(block.iter().map(|v| v.norm_sqr()).sum::<f64>() / block.len() as f64);
        }
        let entries = (draws * 64) as f64;
        mean /= entries;
        let var = per_draw_power.iter().sum::<f64>() / draws as f64;
        // Per-draw averages are i.i.d.; use their spread for the 3 sigma band.
        let spread = {
            let m = var;
            let s2 = per_draw_power
                .iter()
                .map(|v| (v - m) * (v - m))
                .sum::<f64>()
                / (draws as f64 - 1.0);
            (s2 / draws as f64).sqrt()
        };
        assert!(
            (var - expected).abs() <= 3.0 * spread,
            "var {var:.5} vs {expected:.5}"
        );
        assert!(mean.norm() <= 3.0 * (expected / entries).sqrt());
    }
}
