use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("window length {0} must be a power of two")]
    WindowLength(usize),
    #[error("bin {bin} must be below half the window length {len}")]
    Bin { bin: usize, len: usize },
    #[error("observer thresholds must satisfy v_min < v_max, got {v_min} and {v_max}")]
    Thresholds { v_min: f64, v_max: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Periodic Hanning coefficients `0.5 (1 - cos(2 pi k / N))`.
///
/// The periodic form is the one whose spectrum is the three-tap kernel
/// `[-1/4, 1/2, -1/4]`, so DC has no leakage into bins `>= 2` and the
/// recursive [`SlidingDft`] reproduces it exactly.
pub fn hanning(len: usize) -> Vec<f64> {
    (0..len).map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / len as f64).cos())).collect()
}

/// Ring buffer of the most recent `N` samples with one Hanning-windowed DFT
/// bin evaluated over it.
///
/// The bin is recomputed from the buffer on every query, so the result is
/// the exact windowed DFT of the current window with no recursive drift.
#[derive(Debug, Clone)]
pub struct SpectralWindow {
    buffer: Vec<f64>,
    head: usize,
    filled: usize,
    bin: usize,
    // w[k] * exp(-i 2 pi k bin / N), split into real/imaginary parts.
    coef_re: Vec<f64>,
    coef_im: Vec<f64>,
}

impl SpectralWindow {
    pub fn new(len: usize, bin: usize) -> Result<Self, SignalError> {
        if len == 0 || !len.is_power_of_two() {
            return Err(SignalError::WindowLength(len));
        }
        if bin >= len / 2 {
            return Err(SignalError::Bin { bin, len });
        }
        let w = hanning(len);
        let (coef_re, coef_im) = (0..len)
            .map(|k| {
                let phase = -2.0 * PI * (k * bin) as f64 / len as f64;
                (w[k] * phase.cos(), w[k] * phase.sin())
            })
            .unzip();
        Ok(Self { buffer: vec![0.0; len], head: 0, filled: 0, bin, coef_re, coef_im })
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    pub fn bin(&self) -> usize {
        self.bin
    }

    pub fn is_warm(&self) -> bool {
        self.filled == self.buffer.len()
    }

    pub fn push(&mut self, x: f64) {
        self.buffer[self.head] = x;
        self.head = (self.head + 1) % self.buffer.len();
        self.filled = (self.filled + 1).min(self.buffer.len());
    }

    /// Samples oldest first.
    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.buffer.len();
        (0..n).map(move |k| self.buffer[(self.head + k) % n])
    }

    /// `|sum_k w[k] x[k] exp(-i 2 pi k bin / N)|`, oldest sample at `k = 0`.
    /// Returns 0 until `N` samples have been pushed.
    pub fn amplitude(&self) -> f64 {
        if !self.is_warm() {
            return 0.0;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (k, x) in self.samples().enumerate() {
            re += self.coef_re[k] * x;
            im += self.coef_im[k] * x;
        }
        re.hypot(im)
    }

    pub fn clear(&mut self) {
        self.buffer.iter_mut().for_each(|x| *x = 0.0);
        self.head = 0;
        self.filled = 0;
    }
}

/// Recursive sliding DFT of bins `bin - 1 ..= bin + 1` with the Hanning
/// window applied in the frequency domain.
///
/// Each push costs O(1). Rounding error accumulates in the recursion, so the
/// bins are recomputed from the buffer every `resync_every` pushes.
#[derive(Debug, Clone)]
pub struct SlidingDft {
    window: SpectralWindow,
    // Unwindowed bins bin-1, bin, bin+1.
    re: [f64; 3],
    im: [f64; 3],
    twiddle: [(f64, f64); 3],
    pushes: usize,
    resync_every: usize,
}

impl SlidingDft {
    pub fn new(len: usize, bin: usize) -> Result<Self, SignalError> {
        let window = SpectralWindow::new(len, bin)?;
        if bin == 0 {
            return Err(SignalError::Bin { bin, len });
        }
        let twiddle = [0, 1, 2].map(|o| {
            let ph = 2.0 * PI * (bin + o - 1) as f64 / len as f64;
            (ph.cos(), ph.sin())
        });
        Ok(Self { window, re: [0.0; 3], im: [0.0; 3], twiddle, pushes: 0, resync_every: 64 * len })
    }

    pub fn push(&mut self, x: f64) {
        let oldest = self.window.buffer[self.window.head];
        self.window.push(x);
        self.pushes += 1;
        if self.pushes % self.resync_every == 0 {
            self.resync();
            return;
        }
        let delta = x - oldest;
        for o in 0..3 {
            let (c, s) = self.twiddle[o];
            let r = self.re[o] + delta;
            let i = self.im[o];
            self.re[o] = r * c - i * s;
            self.im[o] = r * s + i * c;
        }
    }

    fn resync(&mut self) {
        let n = self.window.len();
        let bin = self.window.bin();
        let samples: Vec<f64> = self.window.samples().collect();
        for o in 0..3 {
            let m = bin + o - 1;
            let (mut re, mut im) = (0.0, 0.0);
            for (k, x) in samples.iter().enumerate() {
                let ph = -2.0 * PI * ((k * m) % n) as f64 / n as f64;
                re += x * ph.cos();
                im += x * ph.sin();
            }
            self.re[o] = re;
            self.im[o] = im;
        }
    }

    /// Windowed amplitude of the centre bin; 0 during warm-up.
    pub fn amplitude(&self) -> f64 {
        if !self.window.is_warm() {
            return 0.0;
        }
        let re = 0.5 * self.re[1] - 0.25 * (self.re[0] + self.re[2]);
        let im = 0.5 * self.im[1] - 0.25 * (self.im[0] + self.im[2]);
        re.hypot(im)
    }

    pub fn window(&self) -> &SpectralWindow {
        &self.window
    }
}
