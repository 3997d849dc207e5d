//! Algebra over block matrices whose blocks are `MN x MN` diagonal matrices.
//!
//! An `R x T` grid of length-`MN` diagonals is closed under products, linear
//! combinations, adjoints, Schur complements, and inversion, which is what
//! makes the low-complexity receivers work. Inversion follows the recursive
//! partition/backtracking scheme: the matrix is repeatedly split along its
//! last block row/column, the corner diagonal is inverted directly, and the
//! block-wise inverse
//!
//! ```text
//! [A B; C D]^-1 = [S^-1, -S^-1 B D^-1; -D^-1 C S^-1, D^-1 + D^-1 C S^-1 B D^-1]
//! ```
//!
//! with `S = A - B D^-1 C` is assembled on the way back up.
//!
//! Every arithmetic primitive reports complex multiplies/divides and
//! adds/subtracts to an [`OpCounter`]. The counting convention is fixed so
//! the closed-form totals in [`crate::complexity`] are met exactly:
//! `D^-1 C` is computed once in the partition phase and reused during
//! backtracking, while `B D^-1` is computed in the backtracking phase;
//! conjugation and sign flips are free.

use crate::counter::OpCounter;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Cplx;

/// Relative magnitude below which a corner-diagonal entry is treated as
/// singular (relative to the largest magnitude in the same block).
pub const DEFAULT_SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Block matrix with diagonal blocks: an `R x T` grid of length-`MN`
/// complex diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagBlockMat<T: Scalar> {
    rows: usize,
    cols: usize,
    mn: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Scalar> DiagBlockMat<T> {
    pub fn zeros(rows: usize, cols: usize, mn: usize) -> Self {
        assert!(rows > 0 && cols > 0 && mn > 0, "empty block matrix");
        Self {
            rows,
            cols,
            mn,
            data: vec![Cplx::new(T::zero(), T::zero()); rows * cols * mn],
        }
    }

    /// Square matrix with identity blocks on the diagonal.
    pub fn identity(t: usize, mn: usize) -> Self {
        let mut out = Self::zeros(t, t, mn);
        for i in 0..t {
            out.block_mut(i, i).fill(Cplx::new(T::one(), T::zero()));
        }
        out
    }

    /// Build from a per-block generator: `f(r, c)` returns the length-`MN`
    /// diagonal of block `(r, c)`.
    pub fn from_fn<F: FnMut(usize, usize) -> Vec<Cplx<T>>>(
        rows: usize,
        cols: usize,
        mn: usize,
        mut f: F,
    ) -> Self {
        let mut out = Self::zeros(rows, cols, mn);
        for r in 0..rows {
            for c in 0..cols {
                let diag = f(r, c);
                assert_eq!(diag.len(), mn, "generator returned wrong diagonal length");
                out.block_mut(r, c).copy_from_slice(&diag);
            }
        }
        out
    }

    pub fn block_rows(&self) -> usize {
        self.rows
    }

    pub fn block_cols(&self) -> usize {
        self.cols
    }

    pub fn mn(&self) -> usize {
        self.mn
    }

    pub fn block(&self, r: usize, c: usize) -> &[Cplx<T>] {
        let at = (r * self.cols + c) * self.mn;
        &self.data[at..at + self.mn]
    }

    pub fn block_mut(&mut self, r: usize, c: usize) -> &mut [Cplx<T>] {
        let at = (r * self.cols + c) * self.mn;
        &mut self.data[at..at + self.mn]
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.mn != other.mn {
            return Err(Error::ShapeMismatch(format!(
                "diagonal lengths differ: {} vs {}",
                self.mn, other.mn
            )));
        }
        Ok(())
    }

    /// Block product: block `(i, k)` of the result is
    /// `sum_j self[i,j] o other[j,k]` with elementwise diagonal products.
    /// Counts `a*c*b*MN` multiplies and `a*c*(b-1)*MN` adds.
    pub fn mul(&self, other: &Self, counter: &mut OpCounter) -> Result<Self> {
        self.check_same_grid(other)?;
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "block product {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (a, b, c) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(a, c, self.mn);
        for i in 0..a {
            for k in 0..c {
                for j in 0..b {
                    let x = self.block(i, j);
                    let y = other.block(j, k);
                    let dst = out.block_mut(i, k);
                    if j == 0 {
                        for (d, (xv, yv)) in dst.iter_mut().zip(x.iter().zip(y)) {
                            *d = xv * yv;
                        }
                    } else {
                        for (d, (xv, yv)) in dst.iter_mut().zip(x.iter().zip(y)) {
                            *d += xv * yv;
                        }
                    }
                }
            }
        }
        counter.add_mul_div((a * c * b * self.mn) as u64);
        counter.add_add_sub((a * c * (b - 1) * self.mn) as u64);
        Ok(out)
    }

    /// Blockwise conjugate transpose: block `(i, j)` of the result is the
    /// conjugate of block `(j, i)`. Not counted (no arithmetic).
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, self.mn);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let src = self.block(r, c);
                for (d, s) in out.block_mut(c, r).iter_mut().zip(src) {
                    *d = s.conj();
                }
            }
        }
        out
    }

    /// Linear combination `a1 * self + a2 * other`. Coefficients equal to
    /// `+-1` cost nothing; any other coefficient costs one multiply per
    /// entry; the combination costs one add per entry.
    pub fn add_scaled(
        &self,
        other: &Self,
        a1: Cplx<T>,
        a2: Cplx<T>,
        counter: &mut OpCounter,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch(format!(
                "block sum {}x{} + {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let entries = (self.rows * self.cols * self.mn) as u64;
        let one = Cplx::new(T::one(), T::zero());
        let is_unit = |a: Cplx<T>| a == one || a == -one;
        let mut out = Self::zeros(self.rows, self.cols, self.mn);
        for ((d, x), y) in out.data.iter_mut().zip(&self.data).zip(&other.data) {
            *d = a1 * x + a2 * y;
        }
        let mut mults = 0;
        if !is_unit(a1) {
            mults += entries;
        }
        if !is_unit(a2) {
            mults += entries;
        }
        counter.add_mul_div(mults);
        counter.add_add_sub(entries);
        Ok(out)
    }

    /// Apply to a concatenated vector of `T` antenna segments:
    /// `out_r = sum_t self[r,t] o v_t`. Counts `R*T*MN` multiplies and
    /// `R*(T-1)*MN` adds.
    pub fn mul_vec(&self, v: &[Cplx<T>], counter: &mut OpCounter) -> Result<Vec<Cplx<T>>> {
        if v.len() != self.cols * self.mn {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} != {} block cols * {} bins",
                v.len(),
                self.cols,
                self.mn
            )));
        }
        let mut out = vec![Cplx::new(T::zero(), T::zero()); self.rows * self.mn];
        for r in 0..self.rows {
            let dst = &mut out[r * self.mn..(r + 1) * self.mn];
            for t in 0..self.cols {
                let blk = self.block(r, t);
                let seg = &v[t * self.mn..(t + 1) * self.mn];
                for (d, (b, s)) in dst.iter_mut().zip(blk.iter().zip(seg)) {
                    *d += b * s;
                }
            }
        }
        counter.add_mul_div((self.rows * self.cols * self.mn) as u64);
        counter.add_add_sub((self.rows * (self.cols - 1) * self.mn) as u64);
        Ok(out)
    }

    /// Apply the adjoint to a concatenated vector of `R` antenna segments:
    /// `out_t = sum_r conj(self[r,t]) o v_r`, without forming the adjoint.
    /// Counts `T*R*MN` multiplies and `T*(R-1)*MN` adds.
    pub fn adjoint_mul_vec(&self, v: &[Cplx<T>], counter: &mut OpCounter) -> Result<Vec<Cplx<T>>> {
        if v.len() != self.rows * self.mn {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} != {} block rows * {} bins",
                v.len(),
                self.rows,
                self.mn
            )));
        }
        let mut out = vec![Cplx::new(T::zero(), T::zero()); self.cols * self.mn];
        for t in 0..self.cols {
            let dst = &mut out[t * self.mn..(t + 1) * self.mn];
            for r in 0..self.rows {
                let blk = self.block(r, t);
                let seg = &v[r * self.mn..(r + 1) * self.mn];
                for (d, (b, s)) in dst.iter_mut().zip(blk.iter().zip(seg)) {
                    *d += b.conj() * s;
                }
            }
        }
        counter.add_mul_div((self.cols * self.rows * self.mn) as u64);
        counter.add_add_sub((self.cols * (self.rows - 1) * self.mn) as u64);
        Ok(out)
    }

    /// Structural expansion to a dense `(R*MN) x (T*MN)` matrix (oracle path).
    pub fn dense_expand(&self) -> DenseMat<T> {
        let mut out = DenseMat::zeros(self.rows * self.mn, self.cols * self.mn);
        for r in 0..self.rows {
            for c in 0..self.cols {
                for (j, &v) in self.block(r, c).iter().enumerate() {
                    out[(r * self.mn + j, c * self.mn + j)] = v;
                }
            }
        }
        out
    }

    /// Contract a dense matrix back to block-diagonal form by reading the
    /// diagonal of each `MN x MN` block (inverse of [`Self::dense_expand`]
    /// on structurally conforming inputs).
    pub fn from_dense(dense: &DenseMat<T>, rows: usize, cols: usize, mn: usize) -> Self {
        assert_eq!(dense.rows(), rows * mn);
        assert_eq!(dense.cols(), cols * mn);
        Self::from_fn(rows, cols, mn, |r, c| {
            (0..mn).map(|j| dense[(r * mn + j, c * mn + j)]).collect()
        })
    }

    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .map(|v| v.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Invert a square block matrix via partition + backtracking with the
    /// default singularity threshold.
    pub fn invert(&self, counter: &mut OpCounter) -> Result<Self> {
        self.invert_with_threshold(T::of_f64(DEFAULT_SINGULARITY_THRESHOLD), counter)
    }

    /// Invert with an explicit relative singularity threshold.
    pub fn invert_with_threshold(&self, threshold: T, counter: &mut OpCounter) -> Result<Self> {
        let stack = self.partition(threshold, counter)?;
        stack.backtrack(threshold, counter)
    }

    /// Partition phase of the inversion: repeatedly split off the last block
    /// row/column and replace the running matrix by the Schur complement of
    /// the corner, storing every partition.
    pub fn partition(&self, threshold: T, counter: &mut OpCounter) -> Result<PartitionStack<T>> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch(format!(
                "inversion requires a square block matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mut levels = Vec::with_capacity(self.rows.saturating_sub(1));
        let mut running = self.clone();
        let mut level = 1;
        while running.rows > 1 {
            let (record, schur) = schur_step_at(&running, level, threshold, counter)?;
            levels.push(record);
            running = schur;
            level += 1;
        }
        Ok(PartitionStack {
            levels,
            base: running.block(0, 0).to_vec(),
            mn: self.mn,
        })
    }
}

/// One stored partition: the bordered split of a `(u+1)^2` block matrix into
/// `A` (`u x u`), `B` (`u x 1`), `C` (`1 x u`) and the corner diagonal, plus
/// the cached quantities reused during backtracking.
#[derive(Debug, Clone)]
pub struct PartitionLevel<T: Scalar> {
    /// Partition depth, counting from 1 at the outermost split.
    pub level: usize,
    pub a: DiagBlockMat<T>,
    pub b: DiagBlockMat<T>,
    pub c: DiagBlockMat<T>,
    /// Corner diagonal `D` of this split.
    pub corner: Vec<Cplx<T>>,
    /// `D^-1`, computed during the partition phase.
    pub corner_inv: Vec<Cplx<T>>,
    /// `D^-1 C`, computed during the partition phase and reused.
    pub corner_inv_c: DiagBlockMat<T>,
}

/// The stored partitions of a square block matrix, outermost split first,
/// plus the final fully-reduced Schur complement (a single diagonal).
#[derive(Debug, Clone)]
pub struct PartitionStack<T: Scalar> {
    levels: Vec<PartitionLevel<T>>,
    base: Vec<Cplx<T>>,
    mn: usize,
}

impl<T: Scalar> PartitionStack<T> {
    pub fn levels(&self) -> &[PartitionLevel<T>] {
        &self.levels
    }

    /// Diagonal of the innermost Schur complement.
    pub fn base(&self) -> &[Cplx<T>] {
        &self.base
    }

    /// Backtracking phase: assemble the inverse from the stored partitions
    /// via the block-wise inverse formula.
    pub fn backtrack(&self, threshold: T, counter: &mut OpCounter) -> Result<DiagBlockMat<T>> {
        let mn = self.mn;
        let base_inv = invert_diagonal(&self.base, self.levels.len() + 1, threshold)?;
        counter.add_mul_div(mn as u64);
        let mut f = DiagBlockMat::from_fn(1, 1, mn, |_, _| base_inv.clone());
        for record in self.levels.iter().rev() {
            f = backtrack_combine(&f, record, counter)?;
        }
        Ok(f)
    }
}

/// Invert the corner diagonal, enforcing the relative singularity threshold.
fn invert_diagonal<T: Scalar>(
    corner: &[Cplx<T>],
    level: usize,
    threshold: T,
) -> Result<Vec<Cplx<T>>> {
    let max_mag = corner
        .iter()
        .map(|v| v.norm())
        .fold(T::zero(), |a, b| a.max(b));
    let floor = threshold * max_mag;
    let one = Cplx::new(T::one(), T::zero());
    corner
        .iter()
        .enumerate()
        .map(|(bin, v)| {
            let mag = v.norm();
            if mag <= floor || mag == T::zero() {
                Err(Error::SingularCorner {
                    level,
                    bin,
                    magnitude: mag.to_f64().unwrap_or(0.0),
                })
            } else {
                Ok(one / v)
            }
        })
        .collect()
}

/// One partition step: split `P` (square, at least 2x2 blocks) into
/// `[A B; C D]` and return the stored partition together with the Schur
/// complement `S = A - B D^-1 C`.
pub fn schur_step<T: Scalar>(
    p: &DiagBlockMat<T>,
    counter: &mut OpCounter,
) -> Result<(PartitionLevel<T>, DiagBlockMat<T>)> {
    schur_step_at(p, 1, T::of_f64(DEFAULT_SINGULARITY_THRESHOLD), counter)
}

fn schur_step_at<T: Scalar>(
    p: &DiagBlockMat<T>,
    level: usize,
    threshold: T,
    counter: &mut OpCounter,
) -> Result<(PartitionLevel<T>, DiagBlockMat<T>)> {
    if p.block_rows() != p.block_cols() || p.block_rows() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "Schur step requires a square matrix with >= 2 block rows, got {}x{}",
            p.block_rows(),
            p.block_cols()
        )));
    }
    let u = p.block_rows() - 1;
    let mn = p.mn();

    let a = DiagBlockMat::from_fn(u, u, mn, |i, j| p.block(i, j).to_vec());
    let b = DiagBlockMat::from_fn(u, 1, mn, |i, _| p.block(i, u).to_vec());
    let c = DiagBlockMat::from_fn(1, u, mn, |_, j| p.block(u, j).to_vec());
    let corner = p.block(u, u).to_vec();

    // D^-1: MN divisions.
    let corner_inv = invert_diagonal(&corner, level, threshold)?;
    counter.add_mul_div(mn as u64);

    // E = D^-1 C: u*MN multiplies.
    let corner_inv_c = DiagBlockMat::from_fn(1, u, mn, |_, j| {
        c.block(0, j)
            .iter()
            .zip(&corner_inv)
            .map(|(cv, dv)| cv * dv)
            .collect()
    });
    counter.add_mul_div((u * mn) as u64);

    // S = A - B (D^-1 C): u^2*MN multiplies, u^2*MN subtracts.
    let mut schur = a.clone();
    for i in 0..u {
        for j in 0..u {
            let bi = b.block(i, 0);
            let ej = corner_inv_c.block(0, j);
            let dst = schur.block_mut(i, j);
            for (d, (bv, ev)) in dst.iter_mut().zip(bi.iter().zip(ej)) {
                *d -= bv * ev;
            }
        }
    }
    counter.add_mul_div((u * u * mn) as u64);
    counter.add_add_sub((u * u * mn) as u64);

    let record = PartitionLevel {
        level,
        a,
        b,
        c,
        corner,
        corner_inv,
        corner_inv_c,
    };
    Ok((record, schur))
}

/// Assemble the inverse of the `(u+1)^2` matrix from `F = S^-1` (`u^2`
/// blocks) and the stored partition, via the block-wise inverse formula.
fn backtrack_combine<T: Scalar>(
    f: &DiagBlockMat<T>,
    record: &PartitionLevel<T>,
    counter: &mut OpCounter,
) -> Result<DiagBlockMat<T>> {
    let u = f.block_rows();
    let mn = f.mn();
    if record.a.block_rows() != u {
        return Err(Error::ShapeMismatch(format!(
            "backtracking level {} expects {} blocks, inverse has {}",
            record.level,
            record.a.block_rows(),
            u
        )));
    }

    // W = B D^-1: u*MN multiplies.
    let w = DiagBlockMat::from_fn(u, 1, mn, |i, _| {
        record
            .b
            .block(i, 0)
            .iter()
            .zip(&record.corner_inv)
            .map(|(bv, dv)| bv * dv)
            .collect()
    });
    counter.add_mul_div((u * mn) as u64);

    // Upper right: -(F W), u x 1 blocks.
    let fw = f.mul(&w, counter)?;
    // Lower left: -(E F) with E = D^-1 C cached from the partition phase.
    let ef = record.corner_inv_c.mul(f, counter)?;

    // Corner: D^-1 + (E F) W: u*MN multiplies, (u-1)*MN + MN adds.
    let mut corner = record.corner_inv.clone();
    for j in 0..u {
        let l = ef.block(0, j);
        let wv = w.block(j, 0);
        for (d, (lv, wj)) in corner.iter_mut().zip(l.iter().zip(wv)) {
            *d += lv * wj;
        }
    }
    counter.add_mul_div((u * mn) as u64);
    counter.add_add_sub((u * mn) as u64);

    let mut out = DiagBlockMat::zeros(u + 1, u + 1, mn);
    for i in 0..u {
        for j in 0..u {
            out.block_mut(i, j).copy_from_slice(f.block(i, j));
        }
        for (d, s) in out.block_mut(i, u).iter_mut().zip(fw.block(i, 0)) {
            *d = -s;
        }
        for (d, s) in out.block_mut(u, i).iter_mut().zip(ef.block(0, i)) {
            *d = -s;
        }
    }
    out.block_mut(u, u).copy_from_slice(&corner);
    Ok(out)
}

/// Regularized Gram matrix `D^H D (+ rho I)` of an eigenvalue matrix,
/// Hermitian with diagonal blocks.
#[derive(Debug, Clone)]
pub struct GramMatrix<T: Scalar> {
    inner: DiagBlockMat<T>,
    rho: T,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn inner(&self) -> &DiagBlockMat<T> {
        &self.inner
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Invert via partition + backtracking.
    pub fn invert(&self, counter: &mut OpCounter) -> Result<DiagBlockMat<T>> {
        self.inner.invert(counter)
    }
}

/// Form `D^H D + rho I` for an `N_r x N_t` eigenvalue matrix.
///
/// Counts `N_t^2 * N_r * MN` multiplies and `N_t^2 * (N_r - 1) * MN` adds for
/// the product; the regularization, when `rho > 0`, is counted as two
/// operations per affected diagonal entry (`2 * N_t * MN` in total), which is
/// the convention behind the LM-vs-LZ complexity gap.
pub fn gram<T: Scalar>(
    d: &DiagBlockMat<T>,
    rho: T,
    counter: &mut OpCounter,
) -> Result<GramMatrix<T>> {
    if rho < T::zero() {
        return Err(Error::InvalidConfig("negative regularization".into()));
    }
    let (nr, nt, mn) = (d.block_rows(), d.block_cols(), d.mn());
    let mut inner = DiagBlockMat::zeros(nt, nt, mn);
    for i in 0..nt {
        for j in 0..nt {
            let dst = inner.block_mut(i, j);
            for r in 0..nr {
                let x = d.block(r, i);
                let y = d.block(r, j);
                for (dv, (xv, yv)) in dst.iter_mut().zip(x.iter().zip(y)) {
                    *dv += xv.conj() * yv;
                }
            }
        }
    }
    counter.add_mul_div((nt * nt * nr * mn) as u64);
    counter.add_add_sub((nt * nt * (nr - 1) * mn) as u64);
    if rho > T::zero() {
        let rho_c = Cplx::new(rho, T::zero());
        for t in 0..nt {
            for v in inner.block_mut(t, t) {
                *v += rho_c;
            }
        }
        counter.add_add_sub(2 * (nt * mn) as u64);
    }
    Ok(GramMatrix { inner, rho })
}

/// Sum the diagonal blocks of a square block matrix and tile the sum across
/// `tile` identity positions: `sum_i (I_tile (x) Y_{i,i})`, the projection
/// used by the random-matrix expectation identities.
pub fn block_diag_sum_tile<T: Scalar>(y: &DiagBlockMat<T>, tile: usize) -> Result<DiagBlockMat<T>> {
    if y.block_rows() != y.block_cols() {
        return Err(Error::ShapeMismatch(format!(
            "diagonal-block sum requires a square matrix, got {}x{}",
            y.block_rows(),
            y.block_cols()
        )));
    }
    let mn = y.mn();
    let mut sum = vec![Cplx::new(T::zero(), T::zero()); mn];
    for i in 0..y.block_rows() {
        for (s, v) in sum.iter_mut().zip(y.block(i, i)) {
            *s += *v;
        }
    }
    let mut out = DiagBlockMat::zeros(tile, tile, mn);
    for t in 0..tile {
        out.block_mut(t, t).copy_from_slice(&sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::measure;
    use crate::C64;
    use rand::Rng;

    pub(crate) fn random_block(
        rows: usize,
        cols: usize,
        mn: usize,
        seed: u64,
    ) -> DiagBlockMat<f64> {
        let mut rng = crate::rng::stream(seed, "block-test");
        DiagBlockMat::from_fn(rows, cols, mn, |_, _| {
            (0..mn)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect()
        })
    }

    fn assert_dense_close(a: &DenseMat<f64>, b: &DenseMat<f64>, tol: f64) {
        let diff = a.add_scaled(b, C64::new(-1.0, 0.0)).fro_norm();
        let scale = b.fro_norm().max(1.0);
        assert!(
            diff <= tol * scale,
            "dense mismatch: |diff| = {diff:.3e}, scale = {scale:.3e}"
        );
    }

    #[test]
    fn mul_by_identity_is_identity_map() {
        let x = random_block(3, 2, 4, 1);
        let eye = DiagBlockMat::identity(3, 4);
        let mut c = OpCounter::new();
        let y = eye.mul(&x, &mut c).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn single_block_product_is_elementwise() {
        let x = DiagBlockMat::from_fn(1, 1, 2, |_, _| vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)]);
        let y = DiagBlockMat::from_fn(1, 1, 2, |_, _| vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        let prod = x.mul(&y, &mut OpCounter::new()).unwrap();
        assert_eq!(prod.block(0, 0), &[C64::new(3.0, 0.0), C64::new(8.0, 0.0)]);
    }

    #[test]
    fn mul_matches_dense_expansion() {
        let x = random_block(2, 3, 4, 2);
        let y = random_block(3, 2, 4, 3);
        let fast = x.mul(&y, &mut OpCounter::new()).unwrap().dense_expand();
        let dense = x.dense_expand().mul(&y.dense_expand());
        assert_dense_close(&fast, &dense, 1e-12);
    }

    #[test]
    fn mul_counts_match_convention() {
        let x = random_block(2, 3, 4, 4);
        let y = random_block(3, 5, 4, 5);
        let c = measure(|c| {
            x.mul(&y, c).unwrap();
        });
        assert_eq!(c.mul_div, 2 * 5 * 3 * 4);
        assert_eq!(c.add_sub, 2 * 5 * 2 * 4);
    }

    #[test]
    fn adjoint_involution_and_dense_agreement() {
        let x = random_block(2, 3, 4, 6);
        assert_eq!(x.adjoint().adjoint(), x);
        assert_dense_close(
            &x.adjoint().dense_expand(),
            &x.dense_expand().adjoint(),
            1e-15,
        );
    }

    #[test]
    fn add_scaled_cancels_self() {
        let x = random_block(2, 2, 4, 7);
        let one = C64::new(1.0, 0.0);
        let z = x.add_scaled(&x, one, -one, &mut OpCounter::new()).unwrap();
        assert!(z.fro_norm() == 0.0);
    }

    #[test]
    fn diagonal_block_products_commute_elementwise() {
        // Diagonal blocks commute under the elementwise product; this is the
        // structural property behind the closure lemma.
        let x = random_block(3, 3, 8, 8);
        let y = random_block(3, 3, 8, 9);
        for i in 0..3 {
            for j in 0..3 {
                for (a, b) in x.block(i, j).iter().zip(y.block(i, j)) {
                    assert_eq!(a * b, b * a);
                }
            }
        }
    }

    #[test]
    fn gram_of_identity_with_rho() {
        let eye = DiagBlockMat::<f64>::identity(1, 4);
        let g = gram(&eye, 0.5, &mut OpCounter::new()).unwrap();
        for v in g.inner().block(0, 0) {
            assert!((v - C64::new(1.5, 0.0)).norm() <= 1e-15);
        }
    }

    #[test]
    fn gram_matches_dense() {
        let d = random_block(4, 2, 4, 10);
        let g = gram(&d, 0.0, &mut OpCounter::new()).unwrap();
        let dd = d.dense_expand();
        assert_dense_close(&g.inner().dense_expand(), &dd.adjoint().mul(&dd), 1e-12);
    }

    #[test]
    fn gram_is_hermitian() {
        let d = random_block(4, 3, 8, 11);
        let g = gram(&d, 0.3, &mut OpCounter::new()).unwrap();
        let inner = g.inner();
        for i in 0..3 {
            for j in 0..3 {
                for (a, b) in inner.block(i, j).iter().zip(inner.block(j, i)) {
                    assert!((a - b.conj()).norm() <= 1e-14);
                }
            }
        }
        // Corner diagonals strictly positive with rho > 0.
        for t in 0..3 {
            for v in inner.block(t, t) {
                assert!(v.re > 0.0 && v.im.abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn gram_count_matches_closed_form() {
        // [N_t^2 N_r + N_t^2 (N_r - 1) + 2 N_t] MN with regularization.
        let (nr, nt, mn) = (4usize, 2usize, 1024usize);
        let d = random_block(nr, nt, mn, 12);
        let c = measure(|c| {
            gram(&d, 0.5, c).unwrap();
        });
        let expected = (nt * nt * nr + nt * nt * (nr - 1) + 2 * nt) * mn;
        assert_eq!(c.arithmetic(), expected as u64);
        // Without regularization the 2 N_t MN term disappears.
        let c0 = measure(|c| {
            gram(&d, 0.0, c).unwrap();
        });
        assert_eq!(c0.arithmetic(), ((nt * nt * (2 * nr - 1)) * mn) as u64);
    }

    #[test]
    fn invert_identity() {
        let eye = DiagBlockMat::<f64>::identity(3, 4);
        let inv = eye.invert(&mut OpCounter::new()).unwrap();
        assert!(
            inv.add_scaled(
                &eye,
                C64::new(1.0, 0.0),
                C64::new(-1.0, 0.0),
                &mut OpCounter::new()
            )
            .unwrap()
            .fro_norm()
                <= 1e-14
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn invert_two_by_two_closed_form() {
        // [[2,1],[1,2]]^-1 = [[2/3,-1/3],[-1/3,2/3]] at MN = 1.
        let x = DiagBlockMat::from_fn(2, 2, 1, |i, j| {
            vec![C64::new(if i == j { 2.0 } else { 1.0 }, 0.0)]
        });
        let inv = x.invert(&mut OpCounter::new()).unwrap();
        let expected = [[2.0 / 3.0, -1.0 / 3.0], [-1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv.block(i, j)[0] - C64::new(expected[i][j], 0.0)).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn invert_matches_dense_oracle() {
        for (nt, mn, rho, seed) in [(2, 8, 0.0, 20), (3, 4, 0.1, 21), (4, 8, 1.0, 22)] {
            let d = random_block(nt + 2, nt, mn, seed);
            let g = gram(&d, rho, &mut OpCounter::new()).unwrap();
            let inv = g.invert(&mut OpCounter::new()).unwrap();
            // G * G^-1 = I.
            let prod = g.inner().mul(&inv, &mut OpCounter::new()).unwrap();
            let eye = DiagBlockMat::identity(nt, mn);
            let resid = prod
                .add_scaled(
                    &eye,
                    C64::new(1.0, 0.0),
                    C64::new(-1.0, 0.0),
                    &mut OpCounter::new(),
                )
                .unwrap()
                .fro_norm();
            assert!(resid <= 1e-9, "residual {resid:.3e}");
            // Matches the dense inverse.
            let dense_inv = g.inner().dense_expand().invert().unwrap();
            assert_dense_close(&inv.dense_expand(), &dense_inv, 1e-8);
        }
    }

    #[test]
    fn inverse_op_count_matches_closed_form() {
        // Inversion alone costs [2 N_t^3 - 2 N_t^2 + N_t] MN.
        for (nt, mn) in [(1usize, 16usize), (2, 8), (3, 4), (4, 8), (8, 4)] {
            let d = random_block(nt, nt, mn, 30 + nt as u64);
            let g = gram(&d, 1.0, &mut OpCounter::new()).unwrap();
            let c = measure(|c| {
                g.invert(c).unwrap();
            });
            let expected = (2 * nt * nt * nt - 2 * nt * nt + nt) * mn;
            assert_eq!(c.arithmetic(), expected as u64, "N_t = {nt}, MN = {mn}");
            assert_eq!(c.transforms, 0);
        }
    }

    #[test]
    fn schur_step_scalar_case() {
        let x = DiagBlockMat::from_fn(2, 2, 1, |i, j| {
            vec![C64::new(if i == j { 2.0 } else { 1.0 }, 0.0)]
        });
        let (record, s) = schur_step(&x, &mut OpCounter::new()).unwrap();
        assert!((s.block(0, 0)[0] - C64::new(1.5, 0.0)).norm() <= 1e-15);
        assert_eq!(record.corner[0], C64::new(2.0, 0.0));
    }

    #[test]
    fn schur_step_block_diagonal_input_passes_a_through() {
        let mut x = DiagBlockMat::zeros(3, 3, 4);
        for i in 0..3 {
            let diag: Vec<C64> = (0..4)
                .map(|j| C64::new(1.0 + i as f64 + j as f64, 0.0))
                .collect();
            x.block_mut(i, i).copy_from_slice(&diag);
        }
        let (record, s) = schur_step(&x, &mut OpCounter::new()).unwrap();
        assert_eq!(s, record.a);
    }

    #[test]
    fn schur_step_matches_dense() {
        let d = random_block(4, 3, 4, 40);
        let g = gram(&d, 0.2, &mut OpCounter::new()).unwrap();
        let (_, s) = schur_step(g.inner(), &mut OpCounter::new()).unwrap();
        // Dense Schur complement of the trailing MN x MN corner.
        let dense = g.inner().dense_expand();
        let mn = 4;
        let u = 2 * mn;
        let mut a = DenseMat::zeros(u, u);
        let mut b = DenseMat::zeros(u, mn);
        let mut c = DenseMat::zeros(mn, u);
        let mut corner = DenseMat::zeros(mn, mn);
        for i in 0..u {
            for j in 0..u {
                a[(i, j)] = dense[(i, j)];
            }
            for j in 0..mn {
                b[(i, j)] = dense[(i, u + j)];
            }
        }
        for i in 0..mn {
            for j in 0..u {
                c[(i, j)] = dense[(u + i, j)];
            }
            for j in 0..mn {
                corner[(i, j)] = dense[(u + i, u + j)];
            }
        }
        let dense_schur = a.add_scaled(
            &b.mul(&corner.invert().unwrap()).mul(&c),
            C64::new(-1.0, 0.0),
        );
        assert_dense_close(&s.dense_expand(), &dense_schur, 1e-10);
    }

    #[test]
    fn singular_corner_names_level_and_bin() {
        let mut x = DiagBlockMat::<f64>::identity(2, 4);
        x.block_mut(1, 1)[2] = C64::new(0.0, 0.0);
        match x.invert(&mut OpCounter::new()) {
            Err(Error::SingularCorner { level, bin, .. }) => {
                assert_eq!(level, 1);
                assert_eq!(bin, 2);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn regularized_gram_never_singular() {
        // Existence: with rho > 0 the inversion succeeds across many draws.
        let mut rng = crate::rng::stream(99, "existence");
        for trial in 0..10_000u64 {
            let nt = 2 + (trial % 3) as usize;
            let mn = 4;
            let d = DiagBlockMat::from_fn(nt + 1, nt, mn, |_, _| {
                (0..mn)
                    .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect()
            });
            let g = gram(&d, 0.1, &mut OpCounter::new()).unwrap();
            g.invert(&mut OpCounter::new())
                .expect("regularized Gram must invert");
        }
    }

    #[test]
    fn expand_contract_round_trip() {
        let x = random_block(3, 2, 8, 50);
        let back = DiagBlockMat::from_dense(&x.dense_expand(), 3, 2, 8);
        assert_eq!(x, back);
    }

    #[test]
    fn block_diag_sum_tile_identity() {
        let eye = DiagBlockMat::<f64>::identity(2, 2);
        let tiled = block_diag_sum_tile(&eye, 3).unwrap();
        for t in 0..3 {
            for v in tiled.block(t, t) {
                assert_eq!(*v, C64::new(2.0, 0.0));
            }
        }
        for v in tiled.block(0, 1) {
            assert_eq!(*v, C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn block_diag_sum_tile_matches_dense() {
        let y = random_block(2, 2, 4, 60);
        let tiled = block_diag_sum_tile(&y, 3).unwrap();
        // Dense: sum_i (I_3 (x) Y_ii).
        let mut expected = DenseMat::<f64>::zeros(12, 12);
        for i in 0..2 {
            for t in 0..3 {
                for (j, &v) in y.block(i, i).iter().enumerate() {
                    expected[(t * 4 + j, t * 4 + j)] += v;
                }
            }
        }
        assert_dense_close(&tiled.dense_expand(), &expected, 1e-14);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_block(
            rows: usize,
            cols: usize,
            mn: usize,
        ) -> impl Strategy<Value = DiagBlockMat<f64>> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols * mn).prop_map(
                move |values| {
                    let mut it = values.into_iter();
                    DiagBlockMat::from_fn(rows, cols, mn, |_, _| {
                        (0..mn)
                            .map(|_| {
                                let (re, im) = it.next().unwrap();
                                C64::new(re, im)
                            })
                            .collect()
                    })
                },
            )
        }

        proptest! {
            #[test]
            fn product_adjoint_reverses((x, y) in (arb_block(2, 3, 4), arb_block(3, 2, 4))) {
                let mut c = OpCounter::new();
                let lhs = x.mul(&y, &mut c).unwrap().adjoint();
                let rhs = y.adjoint().mul(&x.adjoint(), &mut c).unwrap();
                let one = C64::new(1.0, 0.0);
                let diff = lhs.add_scaled(&rhs, one, -one, &mut c).unwrap().fro_norm();
                prop_assert!(diff <= 1e-12 * rhs.fro_norm().max(1.0));
            }

            #[test]
            fn closure_keeps_diagonal_block_structure((x, y) in (arb_block(2, 2, 4), arb_block(2, 2, 4))) {
                // Products, sums, adjoints, and Schur steps stay on the
                // diagonal-block grid; expanding and contracting is lossless.
                let mut c = OpCounter::new();
                let one = C64::new(1.0, 0.0);
                for result in [
                    x.mul(&y, &mut c).unwrap(),
                    x.add_scaled(&y, one, one, &mut c).unwrap(),
                    x.adjoint(),
                ] {
                    let back = DiagBlockMat::from_dense(
                        &result.dense_expand(),
                        result.block_rows(),
                        result.block_cols(),
                        result.mn(),
                    );
                    prop_assert_eq!(back, result.clone());
                    let dense = result.dense_expand();
                    // Off-diagonal entries of every block stay zero.
                    for br in 0..result.block_rows() {
                        for bc in 0..result.block_cols() {
                            for i in 0..result.mn() {
                                for j in 0..result.mn() {
                                    if i != j {
                                        let v = dense[(br * result.mn() + i, bc * result.mn() + j)];
                                        prop_assert_eq!(v, C64::new(0.0, 0.0));
                                    }
                                }
                            }
                        }
                    }
                }
            }

            #[test]
            fn gram_inverse_solves_random_systems(d in arb_block(4, 2, 4), rho in 0.05f64..2.0) {
                let mut c = OpCounter::new();
                let g = gram(&d, rho, &mut c).unwrap();
                let ginv = g.invert(&mut c).unwrap();
                let prod = g.inner().mul(&ginv, &mut c).unwrap();
                let eye = DiagBlockMat::identity(2, 4);
                let one = C64::new(1.0, 0.0);
                let resid = prod.add_scaled(&eye, one, -one, &mut c).unwrap().fro_norm();
                prop_assert!(resid <= 1e-9);
            }
        }
    }

    #[test]
    fn bar_projection_idempotent_on_tiled_input() {
        let y = random_block(1, 1, 4, 61);
        let tiled = block_diag_sum_tile(&y, 2).unwrap();
        // Summing the 2 identical diagonal blocks and re-tiling doubles.
        let twice = block_diag_sum_tile(&tiled, 2).unwrap();
        let scaled = tiled
            .add_scaled(
                &tiled,
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                &mut OpCounter::new(),
            )
            .unwrap();
        assert!(
            twice
                .add_scaled(
                    &scaled,
                    C64::new(1.0, 0.0),
                    C64::new(-1.0, 0.0),
                    &mut OpCounter::new()
                )
                .unwrap()
                .fro_norm()
                <= 1e-14
        );
    }
}
