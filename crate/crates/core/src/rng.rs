//! Seedable PRNG for reproducible experiments. SplitMix64 is enough
//! here: the consumers are random test instances and conditioning
//! probes, not cryptography, and a fixed hand-rolled generator keeps
//! sweep outputs bit-stable across platforms and dependency bumps.

/// SplitMix64 stream (Steele, Lea, Flood 2014). The increment is the
/// 64-bit golden ratio; the two mixing constants are the published
/// finalizer multipliers.
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller. Draws two uniforms per call and
    /// discards the second output; throughput is irrelevant at this
    /// scale and statefulness would complicate reseeding.
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Log-uniform on [lo, hi], both strictly positive.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo > 0.0 && hi >= lo);
        let t = self.next_f64();
        (lo.ln() + t * (hi.ln() - lo.ln())).exp()
    }
}
