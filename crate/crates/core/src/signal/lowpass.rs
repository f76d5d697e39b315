use nalgebra::Vector3;

/// First-order exponential smoother, `y += a (x - y)` with
/// `a = dt / (dt + 1 / (2 pi f_c))`. The first sample seeds the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassFilter {
    cutoff_hz: f64,
    sample_rate_hz: f64,
    alpha: f64,
    state: Option<f64>,
}

impl LowPassFilter {
    /// Panics unless `0 < cutoff_hz < sample_rate_hz / 2`.
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        assert!(
            cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0,
            "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
            sample_rate_hz / 2.0
        );
        let dt = 1.0 / sample_rate_hz;
        let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
        Self { cutoff_hz, sample_rate_hz, alpha: dt / (dt + rc), state: None }
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn state(&self) -> Option<f64> {
        self.state
    }

    pub fn reset(&mut self) {
        self.state = None;
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let y = match self.state {
            None => x,
            Some(s) => s + self.alpha * (x - s),
        };
        self.state = Some(y);
        y
    }
}

/// Three independent [`LowPassFilter`]s sharing a cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPassVec3 {
    axes: [LowPassFilter; 3],
}

impl LowPassVec3 {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        Self { axes: [LowPassFilter::new(cutoff_hz, sample_rate_hz); 3] }
    }

    pub fn step(&mut self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(self.axes[0].step(x.x), self.axes[1].step(x.y), self.axes[2].step(x.z))
    }

    pub fn value(&self) -> Option<Vector3<f64>> {
        Some(Vector3::new(self.axes[0].state()?, self.axes[1].state()?, self.axes[2].state()?))
    }

    pub fn reset(&mut self) {
        self.axes.iter_mut().for_each(LowPassFilter::reset);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_converges_monotonically() {
        let mut f = LowPassFilter::new(15.0, 1000.0);
        f.step(0.0);
        let mut prev = 0.0;
        for _ in 0..500 {
            let y = f.step(2.5);
            assert!(y >= prev && y <= 2.5);
            prev = y;
        }
        assert!((prev - 2.5).abs() < 1e-9);
    }

    #[test]
    fn step_response_time_constant() {
        // Analytic first-order response: 1 - 1/e at t = 1 / (2 pi f_c).
        let fc = 15.0;
        let fs = 1000.0;
        let mut f = LowPassFilter::new(fc, fs);
        f.step(0.0);
        let tau_ticks = fs / (2.0 * std::f64::consts::PI * fc);
        let mut n = 0;
        while f.step(1.0) < 1.0 - (-1.0f64).exp() {
            n += 1;
        }
        let reached = (n + 1) as f64;
        assert!((reached - tau_ticks).abs() <= 2.0, "{reached} vs {tau_ticks}");
    }

    #[test]
    fn fixed_point() {
        let mut f = LowPassFilter::new(15.0, 1000.0);
        f.step(0.7);
        assert_eq!(f.step(0.7), 0.7);
    }

    #[test]
    #[should_panic]
    fn cutoff_above_nyquist_rejected() {
        LowPassFilter::new(600.0, 1000.0);
    }
}
