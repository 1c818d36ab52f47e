use std::io::{Read, Write};

use rayon::prelude::*;

use super::model::{FiniteModel, Rung};
use super::noise::{NoiseSource, INIT_CHANNEL};
use crate::{Error, Result};

/// Start of every path.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Point(Vec<f64>),
    /// Independent Gaussian coordinates, drawn from the path's reserved
    /// initial-state stream.
    Gaussian { mean: Vec<f64>, variances: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub initial: InitialState,
    pub t0: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub retain_increments: bool,
}

impl SimConfig {
    pub fn new(x0: Vec<f64>, steps: usize, paths: usize, seed: u64) -> Self {
        Self {
            initial: InitialState::Point(x0),
            t0: 0.0,
            steps,
            paths,
            seed,
            retain_increments: false,
        }
    }

    fn validate(&self, model: &FiniteModel) -> Result<f64> {
        if self.steps == 0 || self.paths == 0 {
            return Err(Error::Input("steps and paths must both be >= 1".into()));
        }
        let t_end = model.horizon();
        if !(self.t0 >= 0.0 && self.t0 < t_end) {
            return Err(Error::Input(format!("start time {} outside [0, {t_end})", self.t0)));
        }
        let n = model.dim();
        let len = match &self.initial {
            InitialState::Point(x) => x.len(),
            InitialState::Gaussian { mean, variances } => {
                if variances.len() != mean.len() {
                    return Err(Error::Length {
                        what: "initial variances",
                        expected: mean.len(),
                        got: variances.len(),
                    });
                }
                mean.len()
            }
        };
        if len != n {
            return Err(Error::Length {
                what: "initial state",
                expected: n,
                got: len,
            });
        }
        Ok((t_end - self.t0) / self.steps as f64)
    }
}

/// Simulates one path into `states` (`(steps + 1) × n`), optionally
/// returning the increments used.
pub(crate) fn simulate_one(
    model: &FiniteModel,
    cfg: &SimConfig,
    dt: f64,
    path: usize,
    states: &mut Vec<f64>,
) -> Result<Option<Vec<f64>>> {
    let n = model.dim();
    let channels = n + 1;
    let noise = NoiseSource::new(cfg.seed);
    let inc = noise.increments(path, channels, cfg.steps, dt);
    let mut x = match &cfg.initial {
        InitialState::Point(x0) => x0.clone(),
        InitialState::Gaussian { mean, variances } => {
            let z = noise.normals(path, INIT_CHANNEL, n);
            mean.iter()
                .zip(variances)
                .zip(z)
                .map(|((m, v), z)| m + v.sqrt() * z)
                .collect()
        }
    };
    states.clear();
    states.reserve((cfg.steps + 1) * n);
    states.extend_from_slice(&x);
    let mut stepper = model.stepper(dt);
    for k in 0..cfg.steps {
        stepper.step(&mut x, &inc[k * channels..(k + 1) * channels]);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation { path, step: k + 1 });
        }
        states.extend_from_slice(&x);
    }
    Ok(cfg.retain_increments.then_some(inc))
}

/// Read access to a family of simulated paths.
pub trait PathSet: Sync {
    fn n_paths(&self) -> usize;
    fn steps(&self) -> usize;
    fn dim(&self) -> usize;
    fn t0(&self) -> f64;
    fn dt(&self) -> f64;
    fn rung(&self) -> Rung;
    fn seed(&self) -> u64;
    /// States of path `i` as `(steps + 1) × dim`, row-major in time.
    fn path_into(&self, i: usize, buf: &mut Vec<f64>) -> Result<()>;

    fn time(&self, k: usize) -> f64 {
        self.t0() + k as f64 * self.dt()
    }
}

/// Paths held in memory, with their Brownian increments when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    rung: Rung,
    n: usize,
    steps: usize,
    paths: usize,
    t0: f64,
    dt: f64,
    seed: u64,
    states: Vec<f64>,
    increments: Option<Vec<f64>>,
}

impl PathBundle {
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let len = (self.steps + 1) * self.n;
        &self.states[i * len..(i + 1) * len]
    }

    pub fn state(&self, i: usize, k: usize) -> &[f64] {
        let p = self.path(i);
        &p[k * self.n..(k + 1) * self.n]
    }

    /// Increments of path `i` as `steps × (n + 1)`, channel 0 first.
    pub fn increments(&self, i: usize) -> Option<&[f64]> {
        let len = self.steps * (self.n + 1);
        self.increments.as_ref().map(|v| &v[i * len..(i + 1) * len])
    }

    /// Largest `|mean increment| / √(Δt/P)` over steps and channels; a
    /// sanity statistic that should stay below about 4.
    pub fn increment_mean_score(&self) -> Option<f64> {
        let inc = self.increments.as_ref()?;
        let ch = self.n + 1;
        let per = self.steps * ch;
        let mut worst: f64 = 0.0;
        for c in 0..ch {
            let mut total = 0.0;
            for p in 0..self.paths {
                for k in 0..self.steps {
                    total += inc[p * per + k * ch + c];
                }
            }
            // mean over all P·M increments of this channel
            let m = total / (self.paths * self.steps) as f64;
            let sd = (self.dt / (self.paths * self.steps) as f64).sqrt();
            worst = worst.max(m.abs() / sd);
        }
        Some(worst)
    }
}

impl PathSet for PathBundle {
    fn n_paths(&self) -> usize {
        self.paths
    }
    fn steps(&self) -> usize {
        self.steps
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn t0(&self) -> f64 {
        self.t0
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn rung(&self) -> Rung {
        self.rung
    }
    fn seed(&self) -> u64 {
        self.seed
    }
    fn path_into(&self, i: usize, buf: &mut Vec<f64>) -> Result<()> {
        buf.clear();
        buf.extend_from_slice(self.path(i));
        Ok(())
    }
}

/// Simulates `cfg.paths` paths in parallel; the result depends only on the
/// model and configuration, never on worker scheduling.
pub fn simulate_paths(model: &FiniteModel, cfg: &SimConfig) -> Result<PathBundle> {
    let dt = cfg.validate(model)?;
    let results: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut states = Vec::new();
            let inc = simulate_one(model, cfg, dt, p, &mut states)?;
            Ok((states, inc))
        })
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(cfg.paths * (cfg.steps + 1) * model.dim());
    let mut increments = cfg
        .retain_increments
        .then(|| Vec::with_capacity(cfg.paths * cfg.steps * (model.dim() + 1)));
    for (s, inc) in results {
        states.extend_from_slice(&s);
        if let (Some(all), Some(inc)) = (increments.as_mut(), inc) {
            all.extend_from_slice(&inc);
        }
    }
    Ok(PathBundle {
        rung: model.rung(),
        n: model.dim(),
        steps: cfg.steps,
        paths: cfg.paths,
        t0: cfg.t0,
        dt,
        seed: cfg.seed,
        states,
        increments,
    })
}

/// Regenerates paths on demand instead of storing them; path `i` is
/// bit-identical to path `i` of [`simulate_paths`] with the same inputs.
#[derive(Debug, Clone)]
pub struct PathSampler {
    model: FiniteModel,
    cfg: SimConfig,
    dt: f64,
}

impl PathSampler {
    pub fn new(model: FiniteModel, cfg: SimConfig) -> Result<Self> {
        let dt = cfg.validate(&model)?;
        let mut cfg = cfg;
        cfg.retain_increments = false;
        Ok(Self { model, cfg, dt })
    }

    pub fn model(&self) -> &FiniteModel {
        &self.model
    }
}

impl PathSet for PathSampler {
    fn n_paths(&self) -> usize {
        self.cfg.paths
    }
    fn steps(&self) -> usize {
        self.cfg.steps
    }
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn t0(&self) -> f64 {
        self.cfg.t0
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn rung(&self) -> Rung {
        self.model.rung()
    }
    fn seed(&self) -> u64 {
        self.cfg.seed
    }
    fn path_into(&self, i: usize, buf: &mut Vec<f64>) -> Result<()> {
        simulate_one(&self.model, &self.cfg, self.dt, i, buf).map(|_| ())
    }
}

const PATH_MAGIC: &[u8; 8] = b"SLPATHS1";

/// Flat little-endian dump: magic `SLPATHS1`, `u64` dim, paths, steps,
/// seed, `f64` t0, dt, alpha (`+inf` for the exact drift), then all states
/// path-major, time-major, coordinate-minor.
pub fn write_paths_binary<W: Write>(mut out: W, bundle: &PathBundle) -> Result<()> {
    out.write_all(PATH_MAGIC)?;
    for v in [bundle.n as u64, bundle.paths as u64, bundle.steps as u64, bundle.seed] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in [bundle.t0, bundle.dt, bundle.rung.alpha.unwrap_or(f64::INFINITY)] {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in &bundle.states {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_paths_binary<R: Read>(mut input: R) -> Result<PathBundle> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != PATH_MAGIC {
        return Err(Error::Input("not a path dump (bad magic)".into()));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n = next_u64(&mut input)? as usize;
    let paths = next_u64(&mut input)? as usize;
    let steps = next_u64(&mut input)? as usize;
    let seed = next_u64(&mut input)?;
    let t0 = f64::from_bits(next_u64(&mut input)?);
    let dt = f64::from_bits(next_u64(&mut input)?);
    let alpha = f64::from_bits(next_u64(&mut input)?);
    let count = paths * (steps + 1) * n;
    let mut bytes = vec![0u8; count * 8];
    input.read_exact(&mut bytes)?;
    let states = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(PathBundle {
        rung: Rung {
            alpha: alpha.is_finite().then_some(alpha),
            n,
        },
        n,
        steps,
        paths,
        t0,
        dt,
        seed,
        states,
        increments: None,
    })
}
