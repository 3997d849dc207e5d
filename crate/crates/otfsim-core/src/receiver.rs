//! Equalizers: the eigenvalue-domain ZF (LZ) and MMSE (LM) receivers, their
//! conventional dense counterparts, and LAS refinement.
//!
//! The LZ/LM pipeline processes a received frame as: forward transform per
//! receive antenna, combine with `D * (D^H D + rho_A I)^-1` applied as an
//! adjoint, adjoint transform per stream. The inversion runs once per
//! channel through [`crate::block`]; both stages are operation-counted.

use crate::block::{gram, DiagBlockMat};
use crate::channel::NoiseModel;
use crate::counter::OpCounter;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::modem::{Constellation, SymbolFrame};
use crate::scalar::Scalar;
use crate::transform::{DdTransform, Direction};
use crate::Cplx;

/// Which linear receiver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqualizerMode {
    /// Zero forcing: invert `D^H D`.
    Lz,
    /// MMSE: invert `D^H D + rho I`, requires `rho > 0`.
    Lm,
}

impl EqualizerMode {
    fn regularization<T: Scalar>(self, noise: &NoiseModel<T>) -> Result<T> {
        match self {
            EqualizerMode::Lz => Ok(T::zero()),
            EqualizerMode::Lm => {
                let rho = noise.rho();
                if rho <= T::zero() {
                    return Err(Error::InvalidConfig(
                        "the MMSE receiver needs a positive noise-to-signal ratio".into(),
                    ));
                }
                Ok(rho)
            }
        }
    }
}

/// A prepared linear receiver for one channel: holds
/// `Dtilde = D * (D^H D + rho_A I)^-1` so repeated frames only pay the
/// per-vector cost.
#[derive(Debug, Clone)]
pub struct LinearEqualizer<T: Scalar> {
    mode: EqualizerMode,
    dtilde: DiagBlockMat<T>,
}

impl<T: Scalar> LinearEqualizer<T> {
    /// Form the Gram matrix, invert it, and fold the inverse into the
    /// channel. Counts the inversion tally plus the `D * G^-1` product.
    pub fn prepare(
        d: &DiagBlockMat<T>,
        mode: EqualizerMode,
        noise: &NoiseModel<T>,
        counter: &mut OpCounter,
    ) -> Result<Self> {
        let rho = mode.regularization(noise)?;
        let g = gram(d, rho, counter)?;
        let ginv = g.invert(counter)?;
        let dtilde = d.mul(&ginv, counter)?;
        Ok(Self { mode, dtilde })
    }

    pub fn mode(&self) -> EqualizerMode {
        self.mode
    }

    /// Equalize one frame: `xhat = Psi_T' * (Dtilde^H * (Psi_R * y))`.
    pub fn apply(
        &self,
        y: &SymbolFrame<T>,
        transform: &DdTransform<T>,
        counter: &mut OpCounter,
    ) -> Result<SymbolFrame<T>> {
        let nr = self.dtilde.block_rows();
        let nt = self.dtilde.block_cols();
        if y.streams() != nr || y.mn() != self.dtilde.mn() {
            return Err(Error::ShapeMismatch(format!(
                "received frame has {} segments of {} bins, receiver expects {} of {}",
                y.streams(),
                y.mn(),
                nr,
                self.dtilde.mn()
            )));
        }
        let mut v = y.data().to_vec();
        transform.apply(&mut v, Direction::Forward, nr, counter)?;
        let mut z = self.dtilde.adjoint_mul_vec(&v, counter)?;
        transform.apply(&mut z, Direction::Adjoint, nt, counter)?;
        SymbolFrame::new(z, nt, y.m(), y.n())
    }
}

/// One-shot equalization: prepare for this channel and apply to one frame.
pub fn equalize<T: Scalar>(
    d: &DiagBlockMat<T>,
    y: &SymbolFrame<T>,
    mode: EqualizerMode,
    noise: &NoiseModel<T>,
    transform: &DdTransform<T>,
    counter: &mut OpCounter,
) -> Result<SymbolFrame<T>> {
    LinearEqualizer::prepare(d, mode, noise, counter)?.apply(y, transform, counter)
}

/// Equalize against a channel estimate: the identical pipeline applied to
/// `Dhat` in place of `D`. No approximation is made here; the receiver
/// simply trusts its estimate.
pub fn equalize_with_csi_error<T: Scalar>(
    d_hat: &DiagBlockMat<T>,
    y: &SymbolFrame<T>,
    mode: EqualizerMode,
    noise: &NoiseModel<T>,
    transform: &DdTransform<T>,
    counter: &mut OpCounter,
) -> Result<SymbolFrame<T>> {
    equalize(d_hat, y, mode, noise, transform, counter)
}

/// Conventional dense receiver (oracle path):
/// `xhat = (H^H H + rho_A I)^-1 H^H y`.
pub fn conventional_equalize<T: Scalar>(
    h: &DenseMat<T>,
    y: &SymbolFrame<T>,
    mode: EqualizerMode,
    noise: &NoiseModel<T>,
) -> Result<SymbolFrame<T>> {
    let rho = mode.regularization(noise)?;
    if y.len() != h.rows() {
        return Err(Error::ShapeMismatch(format!(
            "received vector length {} != {} channel rows",
            y.len(),
            h.rows()
        )));
    }
    let mut a = h.adjoint().mul(h);
    if rho > T::zero() {
        a.add_diagonal(rho);
    }
    let rhs = h.adjoint().mul_vec(y.data());
    let mut rhs_mat = DenseMat::zeros(rhs.len(), 1);
    for (i, v) in rhs.into_iter().enumerate() {
        rhs_mat[(i, 0)] = v;
    }
    let solved = a.solve(&rhs_mat)?;
    let nt = h.cols() / y.mn();
    let data = (0..h.cols()).map(|i| solved[(i, 0)]).collect();
    SymbolFrame::new(data, nt, y.m(), y.n())
}

/// Outcome of a LAS refinement run.
#[derive(Debug, Clone)]
pub struct LasResult<T: Scalar> {
    /// Refined hard symbols (scaled constellation points).
    pub symbols: SymbolFrame<T>,
    /// Residual cost after each accepted move, starting with the initial
    /// cost. Strictly decreasing by construction.
    pub cost_trace: Vec<T>,
}

/// Likelihood ascent search: steepest single-position substitution descent
/// on `||y - H s||^2`, starting from hard-decided symbols.
///
/// The residual is maintained in the eigenvalue domain where `H` acts
/// block-diagonally, so a move evaluation is one gradient transform per
/// stream and a move application is a rank-one update.
pub fn las_refine<T: Scalar>(
    init: &SymbolFrame<T>,
    d: &DiagBlockMat<T>,
    y: &SymbolFrame<T>,
    constellation: &Constellation<T>,
    p_x: T,
    max_iters: usize,
    transform: &DdTransform<T>,
) -> Result<LasResult<T>> {
    let nt = d.block_cols();
    let nr = d.block_rows();
    let mn = d.mn();
    if init.streams() != nt || y.streams() != nr || init.mn() != mn || y.mn() != mn {
        return Err(Error::ShapeMismatch(
            "LAS operands do not match the channel dimensions".into(),
        ));
    }
    let mut scratch = OpCounter::new();
    let amp = p_x.sqrt();

    // Residual in the eigenvalue domain: r = Psi_R y - D (Psi_T s).
    let mut y_tilde = y.data().to_vec();
    transform.apply(&mut y_tilde, Direction::Forward, nr, &mut scratch)?;
    let mut symbols = init.clone();
    let mut s_tilde = symbols.data().to_vec();
    transform.apply(&mut s_tilde, Direction::Forward, nt, &mut scratch)?;
    let hs = d.mul_vec(&s_tilde, &mut scratch)?;
    let mut residual: Vec<Cplx<T>> = y_tilde.iter().zip(&hs).map(|(a, b)| a - b).collect();

    // Per-stream column energy: ||D Psi e_m||^2 = (1/MN) sum_{r,n} |D_{r,t}[n]|^2,
    // identical for every position of stream t.
    let col_energy: Vec<T> = (0..nt)
        .map(|t| {
            let mut acc = T::zero();
            for r in 0..nr {
                for v in d.block(r, t) {
                    acc += v.norm_sqr();
                }
            }
            acc / T::of_usize(mn)
        })
        .collect();

    let cost =
        |r: &[Cplx<T>]| -> T { r.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b) };
    let mut trace = vec![cost(&residual)];

    for _ in 0..max_iters {
        // Gradients g_m = (Psi' D^H r)_m for every position at once.
        let mut grad = d.adjoint_mul_vec(&residual, &mut scratch)?;
        transform.apply(&mut grad, Direction::Adjoint, nt, &mut scratch)?;

        // Steepest single-symbol substitution.
        let mut best_delta_cost = T::zero();
        let mut best: Option<(usize, Cplx<T>)> = None;
        for (pos, &g) in grad.iter().enumerate() {
            let t = pos / mn;
            let current = symbols.data()[pos];
            for label in 0..constellation.size() {
                let candidate = constellation.point(label).scale(amp);
                let delta = candidate - current;
                if delta.norm_sqr() == T::zero() {
                    continue;
                }
                // Cost change of s[pos] += delta:
                // -2 Re(conj(delta) g) + |delta|^2 * col_energy.
                let change =
                    -T::of_f64(2.0) * (delta.conj() * g).re + delta.norm_sqr() * col_energy[t];
                if change < best_delta_cost {
                    best_delta_cost = change;
                    best = Some((pos, delta));
                }
            }
        }
        let Some((pos, delta)) = best else { break };
        // Guard against vanishing float-level improvements.
        let f = *trace.last().expect("trace is never empty");
        if best_delta_cost >= -T::of_f64(1e-9) * (T::one() + f) {
            break;
        }

        // Rank-one residual update: r -= delta * D (Psi e_pos).
        let t = pos / mn;
        let column = transform.unit_column(pos % mn);
        for r in 0..nr {
            let blk = d.block(r, t);
            let seg = &mut residual[r * mn..(r + 1) * mn];
            for ((rv, bv), cv) in seg.iter_mut().zip(blk).zip(&column) {
                *rv -= delta * bv * cv;
            }
        }
        symbols.data_mut()[pos] += delta;
        trace.push(cost(&residual));
    }

    Ok(LasResult {
        symbols,
        cost_trace: trace,
    })
}
