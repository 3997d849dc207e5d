//! Delay-Doppler symbol frames, constellations, and bit mapping.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Cplx;

/// A concatenation of per-stream delay-Doppler grids: `streams` segments of
/// `M*N` symbols each. Within a segment the symbol for Doppler bin `k` and
/// delay bin `l` sits at index `k + N*l`; segments are concatenated
/// stream-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T: Scalar> {
    data: Vec<Cplx<T>>,
    streams: usize,
    m: usize,
    n: usize,
}

impl<T: Scalar> SymbolFrame<T> {
    pub fn new(data: Vec<Cplx<T>>, streams: usize, m: usize, n: usize) -> Result<Self> {
        if data.len() != streams * m * n {
            return Err(Error::ShapeMismatch(format!(
                "frame length {} != {} streams * {} bins",
                data.len(),
                streams,
                m * n
            )));
        }
        Ok(Self {
            data,
            streams,
            m,
            n,
        })
    }

    pub fn zeros(streams: usize, m: usize, n: usize) -> Self {
        Self {
            data: vec![Cplx::new(T::zero(), T::zero()); streams * m * n],
            streams,
            m,
            n,
        }
    }

    pub fn streams(&self) -> usize {
        self.streams
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Cplx<T>> {
        self.data
    }

    /// Segment carried by stream `s`.
    pub fn stream(&self, s: usize) -> &[Cplx<T>] {
        &self.data[s * self.mn()..(s + 1) * self.mn()]
    }

    /// Flat index of the symbol on Doppler bin `k`, delay bin `l` of stream `s`.
    pub fn index(&self, s: usize, k: usize, l: usize) -> usize {
        debug_assert!(s < self.streams && k < self.n && l < self.m);
        s * self.mn() + k + self.n * l
    }
}

/// Supported constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationKind {
    Bpsk,
    Qpsk,
}

/// Unit-average-power constellation with Gray bit labels and the constants
/// `(k0, k1)` of the `k0 * Q(sqrt(k1 * gamma))` BER map.
#[derive(Debug, Clone)]
pub struct Constellation<T: Scalar> {
    kind: ConstellationKind,
    /// Point for bit label `i` (bits read stream-order, first bit most
    /// significant).
    points: Vec<Cplx<T>>,
    bits_per_symbol: usize,
    ber_k0: T,
    ber_k1: T,
}

impl<T: Scalar> Constellation<T> {
    /// BPSK: bit 0 -> +1, bit 1 -> -1.
    pub fn bpsk() -> Self {
        Self {
            kind: ConstellationKind::Bpsk,
            points: vec![
                Cplx::new(T::one(), T::zero()),
                Cplx::new(-T::one(), T::zero()),
            ],
            bits_per_symbol: 1,
            ber_k0: T::one(),
            ber_k1: T::of_f64(2.0),
        }
    }

    /// Gray-labeled QPSK: the first bit selects the real sign, the second
    /// the imaginary sign, so neighboring points differ in one bit.
    pub fn qpsk() -> Self {
        let a = T::one() / T::of_f64(2.0).sqrt();
        let point =
            |re: bool, im: bool| Cplx::new(if re { a } else { -a }, if im { a } else { -a });
        Self {
            kind: ConstellationKind::Qpsk,
            // Label b0 b1: b0 = 1 flips the real part, b1 = 1 flips the
            // imaginary part.
            points: vec![
                point(true, true),
                point(true, false),
                point(false, true),
                point(false, false),
            ],
            bits_per_symbol: 2,
            ber_k0: T::one(),
            ber_k1: T::one(),
        }
    }

    pub fn of_kind(kind: ConstellationKind) -> Self {
        match kind {
            ConstellationKind::Bpsk => Self::bpsk(),
            ConstellationKind::Qpsk => Self::qpsk(),
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Cplx<T>] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Constants of the analytic BER map `k0 * Q(sqrt(k1 * gamma))`.
    pub fn ber_constants(&self) -> (T, T) {
        (self.ber_k0, self.ber_k1)
    }

    /// Bit label -> point.
    pub fn point(&self, label: usize) -> Cplx<T> {
        self.points[label]
    }

    fn label_of_bits(&self, bits: &[bool]) -> usize {
        bits.iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
    }

    fn bits_of_label(&self, label: usize, out: &mut Vec<bool>) {
        for i in (0..self.bits_per_symbol).rev() {
            out.push((label >> i) & 1 == 1);
        }
    }
}

/// Map bits onto a frame of constellation symbols scaled to power `p_x`.
pub fn modulate<T: Scalar>(
    bits: &[bool],
    constellation: &Constellation<T>,
    streams: usize,
    m: usize,
    n: usize,
    p_x: T,
) -> Result<SymbolFrame<T>> {
    let bps = constellation.bits_per_symbol();
    let needed = streams * m * n * bps;
    if bits.len() != needed {
        return Err(Error::ShapeMismatch(format!(
            "{} bits supplied, {} required",
            bits.len(),
            needed
        )));
    }
    let amp = p_x.sqrt();
    let data = bits
        .chunks_exact(bps)
        .map(|chunk| {
            constellation
                .point(constellation.label_of_bits(chunk))
                .scale(amp)
        })
        .collect();
    SymbolFrame::new(data, streams, m, n)
}

/// Hard decision: nearest constellation point per entry, after removing the
/// `sqrt(p_x)` scaling. Ties break toward the smallest bit label, so the
/// decision is deterministic.
pub fn demap<T: Scalar>(
    frame: &SymbolFrame<T>,
    constellation: &Constellation<T>,
    p_x: T,
) -> (Vec<usize>, Vec<bool>) {
    let inv_amp = T::one() / p_x.sqrt();
    let mut labels = Vec::with_capacity(frame.len());
    let mut bits = Vec::with_capacity(frame.len() * constellation.bits_per_symbol());
    for &soft in frame.data() {
        let scaled = soft.scale(inv_amp);
        let mut best = 0usize;
        let mut best_dist = (scaled - constellation.point(0)).norm_sqr();
        for label in 1..constellation.size() {
            let dist = (scaled - constellation.point(label)).norm_sqr();
            if dist < best_dist {
                best = label;
                best_dist = dist;
            }
        }
        labels.push(best);
        constellation.bits_of_label(best, &mut bits);
    }
    (labels, bits)
}

/// Draw `count` uniformly random bits.
pub fn random_bits<R: rand::Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<bool> {
    (0..count).map(|_| rng.gen::<bool>()).collect()
}
