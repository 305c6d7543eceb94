//! Counter-based random number streams.
//!
//! Every draw is a pure function of (seed, stream id, counter): the counter
//! word is pushed through a splitmix64-style avalanche keyed by the seed and
//! stream. Paths own disjoint stream ids, so path generation is order-free
//! and reproduces bit-identically under any thread count.

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[inline]
fn hash3(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a ^ 0x9e3779b97f4a7c15;
    z = mix(z).wrapping_add(b.wrapping_mul(0xd1b54a32d192ed03));
    z = mix(z).wrapping_add(c.wrapping_mul(0x8cb92ba72f3d8dd7));
    mix(z)
}

/// One independent stream of draws, keyed by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream {
            seed,
            stream_id,
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = hash3(self.seed, self.stream_id, self.counter);
        self.counter += 1;
        x
    }

    /// Uniform draw in (0, 1].
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller; consumes exactly two counter values,
    /// so draw k maps to counters (2k, 2k+1).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
