use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DomainSpec;
use crate::sde::Rung;
use crate::{Error, Result};

/// How a field was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveMethod {
    Penalized { epsilon: f64 },
    Psor { omega: f64 },
}

impl SolveMethod {
    fn tag(&self) -> (u64, f64) {
        match *self {
            SolveMethod::Penalized { epsilon } => (1, epsilon),
            SolveMethod::Psor { omega } => (2, omega),
        }
    }

    fn from_tag(tag: u64, value: f64) -> Result<Self> {
        match tag {
            1 => Ok(SolveMethod::Penalized { epsilon: value }),
            2 => Ok(SolveMethod::Psor { omega: value }),
            _ => Err(Error::Input(format!("unknown solve method tag {tag}"))),
        }
    }
}

/// Provenance carried by a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub rung: Rung,
    pub method: SolveMethod,
    /// Implicitness weight of the time discretization (0 for explicit).
    pub theta: f64,
}

/// Space-time solution `u` of the obstacle problem on `[0, T] × O_R` and
/// the value `U = u + Θ⁽ⁿ⁾`, stored at all nodes of the box grid for the
/// time levels `t_k = k T / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    domain: DomainSpec,
    steps: usize,
    horizon: f64,
    meta: FieldMeta,
    u: Vec<f64>,
    big_u: Vec<f64>,
}

impl ValueField {
    pub(crate) fn from_parts(
        domain: DomainSpec,
        steps: usize,
        horizon: f64,
        meta: FieldMeta,
        u: Vec<f64>,
        big_u: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(u.len(), (steps + 1) * domain.len());
        debug_assert_eq!(big_u.len(), u.len());
        Self {
            domain,
            steps,
            horizon,
            meta,
            u,
            big_u,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn meta(&self) -> &FieldMeta {
        &self.meta
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn big_u(&self) -> &[f64] {
        &self.big_u
    }

    pub fn u_level(&self, k: usize) -> &[f64] {
        let m = self.domain.len();
        &self.u[k * m..(k + 1) * m]
    }

    pub fn big_u_level(&self, k: usize) -> &[f64] {
        let m = self.domain.len();
        &self.big_u[k * m..(k + 1) * m]
    }

    /// Mutable access for constructing test fixtures.
    pub fn u_level_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.domain.len();
        &mut self.u[k * m..(k + 1) * m]
    }

    /// `Θ⁽ⁿ⁾` at node `flat`, time level `k`, recovered as `U − u`.
    pub fn gain_at(&self, k: usize, flat: usize) -> f64 {
        let i = k * self.domain.len() + flat;
        self.big_u[i] - self.u[i]
    }

    fn time_weights(&self, t: f64) -> (usize, f64) {
        let s = (t / self.dt()).clamp(0.0, self.steps as f64);
        let k = (s.floor() as usize).min(self.steps.saturating_sub(1));
        (k, s - k as f64)
    }

    fn interp(&self, data: &[f64], k: usize, x: &[f64]) -> Option<f64> {
        let m = self.domain.len();
        let w = self.domain.interpolation(x)?;
        Some(w.iter().map(|&(i, wi)| wi * data[k * m + i]).sum())
    }

    /// `u(t_k, x)` at time level `k`, multilinear in space and zero
    /// outside the box.
    pub fn u_level_at(&self, k: usize, x: &[f64]) -> f64 {
        self.interp(&self.u, k, x).unwrap_or(0.0)
    }

    /// `u(t, x)`: multilinear in space, linear in time; zero outside the
    /// box (the Dirichlet value).
    pub fn u_at(&self, t: f64, x: &[f64]) -> f64 {
        let (k, w) = self.time_weights(t);
        let a = self.interp(&self.u, k, x).unwrap_or(0.0);
        if w == 0.0 {
            return a;
        }
        let b = self.interp(&self.u, k + 1, x).unwrap_or(0.0);
        (1.0 - w) * a + w * b
    }

    /// Interpolated `U(t, x)`; `None` outside the box.
    pub fn big_u_at(&self, t: f64, x: &[f64]) -> Option<f64> {
        let (k, w) = self.time_weights(t);
        let a = self.interp(&self.big_u, k, x)?;
        if w == 0.0 {
            return Some(a);
        }
        let b = self.interp(&self.big_u, k + 1, x)?;
        Some((1.0 - w) * a + w * b)
    }

    /// `U(0, x)` at a grid node, or interpolated otherwise.
    pub fn value0(&self, x: &[f64]) -> Option<f64> {
        match self.domain.locate_node(x) {
            Some(flat) => Some(self.big_u[flat]),
            None => self.big_u_at(0.0, x),
        }
    }

    /// Flat binary layout (little endian): magic `SLFIELD1`; `u64` n;
    /// `f64` R; `u64` M; `f64` T; `u64` node count per axis; `u64` method
    /// tag (1 penalized, 2 PSOR); `f64` method parameter; `f64` θ; `f64`
    /// α (`+inf` for the exact drift); `u64` rung dimension; then `u` and
    /// `U`, each `(M+1) × nodes` with time outermost and the last axis
    /// fastest.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(FIELD_MAGIC)?;
        out.write_all(&(self.domain.dim() as u64).to_le_bytes())?;
        out.write_all(&self.domain.radius().to_le_bytes())?;
        out.write_all(&(self.steps as u64).to_le_bytes())?;
        out.write_all(&self.horizon.to_le_bytes())?;
        for &c in self.domain.counts() {
            out.write_all(&(c as u64).to_le_bytes())?;
        }
        let (tag, value) = self.meta.method.tag();
        out.write_all(&tag.to_le_bytes())?;
        out.write_all(&value.to_le_bytes())?;
        out.write_all(&self.meta.theta.to_le_bytes())?;
        out.write_all(&self.meta.rung.alpha.unwrap_or(f64::INFINITY).to_le_bytes())?;
        out.write_all(&(self.meta.rung.n as u64).to_le_bytes())?;
        for v in self.u.iter().chain(&self.big_u) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Input("not a value-field file (bad magic)".into()));
        }
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut input)?) as usize;
        let radius = f64::from_le_bytes(next(&mut input)?);
        let steps = u64::from_le_bytes(next(&mut input)?) as usize;
        let horizon = f64::from_le_bytes(next(&mut input)?);
        let counts = (0..n)
            .map(|_| Ok(u64::from_le_bytes(next(&mut input)?) as usize))
            .collect::<Result<Vec<_>>>()?;
        let tag = u64::from_le_bytes(next(&mut input)?);
        let value = f64::from_le_bytes(next(&mut input)?);
        let theta = f64::from_le_bytes(next(&mut input)?);
        let alpha = f64::from_le_bytes(next(&mut input)?);
        let rung_n = u64::from_le_bytes(next(&mut input)?) as usize;
        let domain = DomainSpec::new(radius, counts)?;
        let count = (steps + 1) * domain.len();
        let mut bytes = vec![0u8; 2 * count * 8];
        input.read_exact(&mut bytes)?;
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let (u, big_u) = vals.split_at(count);
        Ok(Self {
            domain,
            steps,
            horizon,
            meta: FieldMeta {
                rung: Rung {
                    alpha: alpha.is_finite().then_some(alpha),
                    n: rung_n,
                },
                method: SolveMethod::from_tag(tag, value)?,
                theta,
            },
            u: u.to_vec(),
            big_u: big_u.to_vec(),
        })
    }

    /// Probe table with columns `t, x1..xn, u, U, Theta` at every
    /// `time_stride`-th level; probes must be grid nodes.
    pub fn write_probe_csv<W: Write>(&self, out: W, probes: &[Vec<f64>], time_stride: usize) -> Result<()> {
        let n = self.domain.dim();
        let nodes = probes
            .iter()
            .map(|p| {
                self.domain
                    .locate_node(p)
                    .ok_or_else(|| Error::Input(format!("probe {p:?} is not a grid node")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(["u", "U", "Theta"].map(String::from));
        w.write_record(&header)?;
        let stride = time_stride.max(1);
        let mut levels: Vec<usize> = (0..=self.steps).step_by(stride).collect();
        if *levels.last().expect("nonempty") != self.steps {
            levels.push(self.steps);
        }
        for k in levels {
            for (p, &flat) in probes.iter().zip(&nodes) {
                let mut row = vec![format!("{:.10}", self.time(k))];
                row.extend(p.iter().map(|v| format!("{v:.10}")));
                let u = self.u_level(k)[flat];
                let big = self.big_u_level(k)[flat];
                row.push(format!("{u:.15e}"));
                row.push(format!("{big:.15e}"));
                row.push(format!("{:.15e}", big - u));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

const FIELD_MAGIC: &[u8; 8] = b"SLFIELD1";
