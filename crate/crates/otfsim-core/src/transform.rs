//! 2D DFT over the delay-Doppler grid.
//!
//! A length-`M*N` vector indexed by `k + N*l` (delay bin `l`, Doppler bin
//! `k`) is treated as an `M x N` grid. The forward transform applies the
//! unitary DFT along both axes (negative-exponent convention, scaled by
//! `1/sqrt(MN)`); the adjoint applies the conjugate transform. With this
//! convention every doubly-block circulant matrix `H` factors as
//! `H = F' * diag(lambda) * F` where `F` is the forward transform and
//! `lambda` is the unnormalized 2D DFT of the generator grid (the first
//! column of `H` laid out delay-major). The sign/normalization choice is
//! locked by the reconstruction tests, not assumed.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::counter::OpCounter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Cplx;

/// Which side of the unitary transform pair to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// The forward map (negative-exponent DFT on both axes).
    Forward,
    /// The adjoint (= inverse) map.
    Adjoint,
}

/// Planned 2D DFT for a fixed `(M, N)` grid.
pub struct DdTransform<T: Scalar> {
    m: usize,
    n: usize,
    fwd_m: Arc<dyn Fft<T>>,
    fwd_n: Arc<dyn Fft<T>>,
    inv_m: Arc<dyn Fft<T>>,
    inv_n: Arc<dyn Fft<T>>,
}

impl<T: Scalar> DdTransform<T> {
    /// Plan transforms for `m` delay bins and `n` Doppler bins.
    pub fn new(m: usize, n: usize) -> Self {
        assert!(m >= 1 && n >= 1, "grid dimensions must be positive");
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            fwd_m: planner.plan_fft_forward(m),
            fwd_n: planner.plan_fft_forward(n),
            inv_m: planner.plan_fft_inverse(m),
            inv_n: planner.plan_fft_inverse(n),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Grid size `M*N`.
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    fn pass_2d(&self, data: &mut [Cplx<T>], fft_m: &Arc<dyn Fft<T>>, fft_n: &Arc<dyn Fft<T>>) {
        debug_assert_eq!(data.len(), self.mn());
        // Doppler axis: contiguous rows of length N.
        for row in data.chunks_exact_mut(self.n) {
            fft_n.process(row);
        }
        // Delay axis: columns with stride N.
        let mut column = vec![Cplx::new(T::zero(), T::zero()); self.m];
        for k in 0..self.n {
            for l in 0..self.m {
                column[l] = data[l * self.n + k];
            }
            fft_m.process(&mut column);
            for l in 0..self.m {
                data[l * self.n + k] = column[l];
            }
        }
    }

    /// Unitary transform of one grid, in place.
    pub fn transform_grid(&self, data: &mut [Cplx<T>], direction: Direction) {
        match direction {
            Direction::Forward => self.pass_2d(data, &self.fwd_m, &self.fwd_n),
            Direction::Adjoint => self.pass_2d(data, &self.inv_m, &self.inv_n),
        }
        let scale = T::one() / T::of_usize(self.mn()).sqrt();
        for v in data.iter_mut() {
            *v = v.scale(scale);
        }
    }

    /// Per-antenna unitary transform of a concatenated vector. Counts one 2D
    /// transform application per antenna segment.
    pub fn apply(
        &self,
        v: &mut [Cplx<T>],
        direction: Direction,
        antennas: usize,
        counter: &mut OpCounter,
    ) -> Result<()> {
        if v.len() != antennas * self.mn() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} != {} antennas * {} bins",
                v.len(),
                antennas,
                self.mn()
            )));
        }
        for seg in v.chunks_exact_mut(self.mn()) {
            self.transform_grid(seg, direction);
        }
        counter.add_transforms(antennas as u64);
        Ok(())
    }

    /// Eigenvalues of the doubly-block circulant matrix with the given
    /// generator grid (first column, delay-major layout): the unnormalized
    /// 2D DFT of the generator.
    pub fn eigenvalues(&self, generator: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(generator.len(), self.mn());
        let mut out = generator.to_vec();
        self.pass_2d(&mut out, &self.fwd_m, &self.fwd_n);
        out
    }

    /// Column `bin` of the forward transform matrix, i.e. the transform of a
    /// unit impulse.
    pub fn unit_column(&self, bin: usize) -> Vec<Cplx<T>> {
        assert!(bin < self.mn());
        let mut v = vec![Cplx::new(T::zero(), T::zero()); self.mn()];
        v[bin] = Cplx::new(T::one(), T::zero());
        self.transform_grid(&mut v, Direction::Forward);
        v
    }
}

/// Dense forward-transform matrix, used by oracle tests and the dense
/// receiver path: entry `(p*N + q, l*N + k) = exp(-2i*pi*(pl/M + qk/N)) / sqrt(MN)`.
pub fn dense_forward_matrix<T: Scalar>(m: usize, n: usize) -> Vec<Vec<Cplx<T>>> {
    let mn = m * n;
    let scale = T::one() / T::of_usize(mn).sqrt();
    let tau = T::of_f64(-2.0) * T::PI();
    let mut rows = Vec::with_capacity(mn);
    for p in 0..m {
        for q in 0..n {
            let mut row = Vec::with_capacity(mn);
            for l in 0..m {
                for k in 0..n {
                    let phase = tau
                        * (T::of_usize(p * l) / T::of_usize(m)
                            + T::of_usize(q * k) / T::of_usize(n));
                    row.push(Cplx::from_polar(scale, phase));
                }
            }
            rows.push(row);
        }
    }
    rows
}
