//! Deterministic pseudo-random numbers for the experiment protocol.
//!
//! The generator is xoshiro256** seeded through SplitMix64, both public
//! domain algorithms by Blackman and Vigna. Rolling our own keeps the byte
//! stream pinned to this crate: identical seeds reproduce identical runs
//! across builds of the same version, which the reproducibility contract
//! requires. Bit-exactness across other implementations is a non-goal.
//!
//! Gaussian variates come from the Box-Muller transform, with the second
//! variate of each pair cached.

/// Seeded pseudo-random number generator.
#[derive(Clone, Debug)]
pub struct Prng {
    state: [u64; 4],
    cached_gaussian: Option<f64>,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Prng {
    /// Expands `seed` into the full 256-bit state via SplitMix64.
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Prng {
            state,
            cached_gaussian: None,
        }
    }

    /// Next raw 64-bit output of xoshiro256**.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-half_width, half_width)`.
    pub fn next_uniform_symmetric(&mut self, half_width: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * half_width
    }

    /// Standard normal variate via Box-Muller.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        // u1 is shifted away from zero so the logarithm stays finite.
        let u1 = (self.next_f64()).max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Bernoulli draw with success probability `p`.
    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
