//! Seeded, splittable Gaussian increment streams.
//!
//! A [`NoiseStream`] owns one ChaCha8 generator per particle rank, all keyed
//! by `(seed, stream_id)` and separated by the ChaCha stream counter. Rank `i`
//! therefore sees the same sequence of draws no matter how many ranks the
//! caller simulates, which is what lets a truncation at `m` and one at `2m`
//! share the Brownian motions of ranks `0..=m`, and what lets two coupled
//! copies consume identical increments.
//!
//! A separate auxiliary stream feeds initial-condition samplers so that
//! drawing an initial gap vector never perturbs the increment sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const AUX_STREAM: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_key(seed: u64, stream_id: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(stream_id.rotate_left(17) ^ 0xa5a5_5a5a_c3c3_3c3c);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Source of Gaussian increments for one trajectory (or one coupled pair).
///
/// Cloning a stream clones the generator states, so a clone replays exactly
/// the draws the original would have produced from that point on.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    stream_id: u64,
    position: u64,
    key: [u8; 32],
    ranks: Vec<ChaCha8Rng>,
    aux: ChaCha8Rng,
    silent: bool,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let key = derive_key(seed, stream_id);
        let mut aux = ChaCha8Rng::from_seed(key);
        aux.set_stream(AUX_STREAM);
        NoiseStream {
            seed,
            stream_id,
            position: 0,
            key,
            ranks: Vec::new(),
            aux,
            silent: false,
        }
    }

    /// A stream whose Gaussian increments are all exactly zero. The auxiliary
    /// stream stays random.
    pub fn silenced(mut self) -> Self {
        self.silent = true;
        self
    }

    /// Child stream keyed by `(seed, hash(stream_id, child))`, starting fresh.
    pub fn split(&self, child: u64) -> Self {
        let id = splitmix64(self.stream_id ^ splitmix64(child.wrapping_add(0x632b_e59b_d9b4_e019)));
        let mut out = NoiseStream::new(self.seed, id);
        out.silent = self.silent;
        out
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of increment vectors drawn so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    fn ensure_ranks(&mut self, n: usize) {
        while self.ranks.len() < n {
            let mut rng = ChaCha8Rng::from_seed(self.key);
            rng.set_stream(self.ranks.len() as u64);
            // A rank created late must still be aligned with the step counter.
            for _ in 0..self.position {
                let _: f64 = rng.sample(StandardNormal);
            }
            self.ranks.push(rng);
        }
    }

    /// Fills `out[i]` with an `N(0, dt)` draw from rank `i`'s stream.
    pub fn fill_increments(&mut self, dt: f64, out: &mut [f64]) {
        self.position += 1;
        if self.silent {
            out.fill(0.0);
            return;
        }
        self.ensure_ranks(out.len());
        let scale = dt.sqrt();
        for (x, rng) in out.iter_mut().zip(self.ranks.iter_mut()) {
            let z: f64 = rng.sample(StandardNormal);
            *x = scale * z;
        }
    }

    /// Uniform draw on `(0, 1]` from the auxiliary stream.
    pub fn uniform(&mut self) -> f64 {
        1.0 - self.aux.random::<f64>()
    }

    /// Exponential draw with the given rate, by inverse CDF on [`uniform`](Self::uniform).
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }

    /// Standard normal draw from the auxiliary stream.
    pub fn standard_normal(&mut self) -> f64 {
        self.aux.sample(StandardNormal)
    }
}
