use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream reserved for random initial states.
pub const INIT_CHANNEL: u64 = 0xFFFF;
/// Stream reserved for randomized stopping rules.
pub const RULE_CHANNEL: u64 = 0xFFFE;

/// Counter-based Gaussian noise: the stream of `(path, channel)` depends on
/// nothing else, so changing the number of paths or the model dimension
/// never re-correlates existing draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, path: usize, channel: u64) -> ChaCha8Rng {
        debug_assert!(channel <= 0xFFFF && (path as u64) < (1 << 48));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((path as u64) << 16) | channel);
        rng
    }

    /// Brownian increments for `channels` channels over `steps` steps of
    /// size `dt`, laid out step-major (`steps × channels`).
    pub fn increments(&self, path: usize, channels: usize, steps: usize, dt: f64) -> Vec<f64> {
        let scale = dt.sqrt();
        let mut out = vec![0.0; steps * channels];
        for c in 0..channels {
            let mut rng = self.rng(path, c as u64);
            for k in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                out[k * channels + c] = scale * z;
            }
        }
        out
    }

    /// `count` standard normal draws from one stream.
    pub fn normals(&self, path: usize, channel: u64, count: usize) -> Vec<f64> {
        let mut rng = self.rng(path, channel);
        (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// Sums consecutive groups of `factor` fine increments (step-major layout).
pub(crate) fn coarsen(fine: &[f64], channels: usize, factor: usize) -> Vec<f64> {
    if factor == 1 {
        return fine.to_vec();
    }
    let steps = fine.len() / channels / factor;
    let mut out = vec![0.0; steps * channels];
    for k in 0..steps {
        for j in 0..factor {
            let row = &fine[(k * factor + j) * channels..(k * factor + j + 1) * channels];
            for (o, v) in out[k * channels..(k + 1) * channels].iter_mut().zip(row) {
                *o += v;
            }
        }
    }
    out
}
