//! Synthetic material databases and their CSV representation.
//!
//! Every generator draws from a `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)`; Gaussian deviates come from `rand_distr::Normal`.
//! Draw order is part of the contract: for each point, the noiseless strain
//! sample first, then (if noise is on) the strain deviate, then the stress
//! deviate.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::phase_space::{plane_stress_matrix, DatasetPoint, LocalState};
use crate::scalar::Real;

/// Plateau stress of the sigmoid database (Pa).
pub const SIGMOID_PLATEAU: f64 = 0.51e6;
/// Initial slope of the sigmoid database (Pa).
pub const SIGMOID_MODULUS: f64 = 100e6;
/// Strain half-range of the sigmoid database.
pub const SIGMOID_EPS_MAX: f64 = 0.03;

/// A finite set of strain–stress samples.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialDataset<T> {
    points: Vec<DatasetPoint<T>>,
    q: usize,
    meta: BTreeMap<String, String>,
}

impl<T: Real> MaterialDataset<T> {
    pub fn new(states: Vec<LocalState<T>>, meta: BTreeMap<String, String>) -> Result<Self> {
        let q = states.first().ok_or(Error::EmptyDataset)?.q();
        for (i, s) in states.iter().enumerate() {
            if s.q() != q || s.stress.len() != q {
                return Err(Error::Dimension(format!("point {} has dimension {}, expected {}", i, s.q(), q)));
            }
            if s.strain.iter().chain(&s.stress).any(|v| !v.is_finite()) {
                return Err(Error::Contract(format!("point {} has a non-finite entry", i)));
            }
        }
        let points = states.into_iter().enumerate().map(|(index, state)| DatasetPoint { state, index }).collect();
        Ok(Self { points, q, meta })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed dataset; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn points(&self) -> &[DatasetPoint<T>] {
        &self.points
    }

    #[inline]
    pub fn state(&self, i: usize) -> &LocalState<T> {
        &self.points[i].state
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }
}

/// Gaussian noise level and RNG seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub chi: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(chi: f64, seed: u64) -> Result<Self> {
        if !(chi >= 0.0) || !chi.is_finite() {
            return Err(Error::Contract(format!("noise level must be non-negative, got {}", chi)));
        }
        Ok(Self { chi, seed })
    }

    pub fn noiseless(seed: u64) -> Self {
        Self { chi: 0.0, seed }
    }
}

/// Noise applied to the plane-stress grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneStressNoise {
    None,
    /// Component `j` perturbed with standard deviation `(0.4/∛p)·l_j`, where
    /// `l_j` is the largest noiseless magnitude of that component.
    Scaled,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::Contract(format!("normal distribution: {}", e)))
}

fn meta(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{} must be positive, got {}", name, v)))
    }
}

/// Uniform strains on `[-eps_max, eps_max]`, `σ = M ε`, plus independent
/// Gaussian noise of std `χ·eps_max` (strain) and `χ·M·eps_max` (stress).
pub fn gen_linear_truss<T: Real>(p: usize, m: T, eps_max: T, noise: NoiseSpec) -> Result<MaterialDataset<T>> {
    if p == 0 {
        return Err(Error::EmptyDataset);
    }
    let (m, eps_max) = (m.as_f64(), eps_max.as_f64());
    positive("modulus", m)?;
    positive("eps_max", eps_max)?;
    NoiseSpec::new(noise.chi, noise.seed)?;
    let mut r = rng(noise.seed);
    let strain_noise = normal(noise.chi * eps_max)?;
    let stress_noise = normal(noise.chi * m * eps_max)?;
    let states = (0..p)
        .map(|_| {
            let e: f64 = r.gen_range(-eps_max..=eps_max);
            let s = m * e;
            let (de, ds) =
                if noise.chi > 0.0 { (strain_noise.sample(&mut r), stress_noise.sample(&mut r)) } else { (0.0, 0.0) };
            LocalState::scalar(T::lit(e + de), T::lit(s + ds))
        })
        .collect();
    MaterialDataset::new(
        states,
        meta(&[
            ("generator", "linear-truss".into()),
            ("seed", noise.seed.to_string()),
            ("chi", noise.chi.to_string()),
            ("p", p.to_string()),
            ("modulus", m.to_string()),
            ("eps_max", eps_max.to_string()),
        ]),
    )
}

/// Noiseless samples of `σ = σ_p tanh(M ε / σ_p)` with uniform strains.
pub fn gen_sigmoid_truss<T: Real>(p: usize, seed: u64) -> Result<MaterialDataset<T>> {
    if p == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut r = rng(seed);
    let states = (0..p)
        .map(|_| {
            let e: f64 = r.gen_range(-SIGMOID_EPS_MAX..=SIGMOID_EPS_MAX);
            LocalState::scalar(T::lit(e), T::lit(sigmoid_stress(e)))
        })
        .collect();
    MaterialDataset::new(
        states,
        meta(&[
            ("generator", "sigmoid-truss".into()),
            ("seed", seed.to_string()),
            ("chi", "0".into()),
            ("p", p.to_string()),
        ]),
    )
}

/// The sigmoid constitutive curve used by [`gen_sigmoid_truss`].
pub fn sigmoid_stress(eps: f64) -> f64 {
    SIGMOID_PLATEAU * (SIGMOID_MODULUS * eps / SIGMOID_PLATEAU).tanh()
}

/// Strain at which the sigmoid curve reaches `stress` (|stress| < plateau).
pub fn sigmoid_strain(stress: f64) -> f64 {
    SIGMOID_PLATEAU / SIGMOID_MODULUS * (stress / SIGMOID_PLATEAU).atanh()
}

/// Default outlier of the one-bar robustness experiment.
pub fn default_outlier<T: Real>() -> LocalState<T> {
    LocalState::scalar(T::lit(0.004), T::lit(0.55e6))
}

/// `p − 1` noiseless linear points followed by `outlier`.
pub fn gen_outlier_truss<T: Real>(
    p: usize,
    m: T,
    eps_max: T,
    outlier: LocalState<T>,
    seed: u64,
) -> Result<MaterialDataset<T>> {
    if p < 2 {
        return Err(Error::Contract(format!("outlier dataset needs p >= 2, got {}", p)));
    }
    if outlier.q() != 1 {
        return Err(Error::Dimension("outlier must be a uniaxial state".into()));
    }
    let base = gen_linear_truss(p - 1, m, eps_max, NoiseSpec::noiseless(seed))?;
    let mut states: Vec<_> = base.points.into_iter().map(|d| d.state).collect();
    let (oe, os) = (outlier.strain[0].as_f64(), outlier.stress[0].as_f64());
    states.push(outlier);
    let mut md = base.meta;
    md.insert("generator".into(), "outlier-truss".into());
    md.insert("p".into(), p.to_string());
    md.insert("outlier".into(), format!("{:e};{:e}", oe, os));
    MaterialDataset::new(states, md)
}

/// Tensor-product strain grid with `p_axis` values per component over
/// `range`, stresses from the plane-stress elasticity matrix.
pub fn gen_plane_stress<T: Real>(
    p_axis: usize,
    e: T,
    nu: T,
    range: (T, T),
    noise: PlaneStressNoise,
    seed: u64,
) -> Result<MaterialDataset<T>> {
    if p_axis < 2 {
        return Err(Error::Contract(format!("p_axis must be at least 2, got {}", p_axis)));
    }
    let (lo, hi) = (range.0.as_f64(), range.1.as_f64());
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Contract(format!("invalid strain range [{}, {}]", lo, hi)));
    }
    // Validates E and ν.
    crate::phase_space::plane_stress_metric(e, nu)?;
    let c: Matrix<f64> = plane_stress_matrix(e.as_f64(), nu.as_f64());
    let axis: Vec<f64> = (0..p_axis).map(|a| lo + (hi - lo) * a as f64 / (p_axis - 1) as f64).collect();

    let mut raw = Vec::with_capacity(p_axis.pow(3));
    for &ex in &axis {
        for &ey in &axis {
            for &gxy in &axis {
                let strain = [ex, ey, gxy];
                let stress = c.mul_vec(&strain);
                raw.push([ex, ey, gxy, stress[0], stress[1], stress[2]]);
            }
        }
    }

    let chi = match noise {
        PlaneStressNoise::None => 0.0,
        PlaneStressNoise::Scaled => 0.4 / p_axis as f64,
    };
    if chi > 0.0 {
        let mut scale = [0.0f64; 6];
        for v in &raw {
            for j in 0..6 {
                scale[j] = scale[j].max(v[j].abs());
            }
        }
        let dists = scale.iter().map(|&l| normal(chi * l)).collect::<Result<Vec<_>>>()?;
        let mut r = rng(seed);
        for v in &mut raw {
            for j in 0..6 {
                v[j] += dists[j].sample(&mut r);
            }
        }
    }

    let states = raw
        .iter()
        .map(|v| LocalState {
            strain: v[..3].iter().map(|&x| T::lit(x)).collect(),
            stress: v[3..].iter().map(|&x| T::lit(x)).collect(),
        })
        .collect();
    MaterialDataset::new(
        states,
        meta(&[
            ("generator", "plane-stress".into()),
            ("seed", seed.to_string()),
            ("chi", chi.to_string()),
            ("p_axis", p_axis.to_string()),
            (
                "noise",
                match noise {
                    PlaneStressNoise::None => "none".into(),
                    PlaneStressNoise::Scaled => "scaled".into(),
                },
            ),
            ("youngs_modulus", e.as_f64().to_string()),
            ("poisson_ratio", nu.as_f64().to_string()),
        ]),
    )
}

/// Writes `# key=value` meta lines, the header, and one row per point.
pub fn write_dataset<T: Real, W: Write>(dataset: &MaterialDataset<T>, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    for (k, v) in &dataset.meta {
        writeln!(w, "# {}={}", k, v)?;
    }
    let q = dataset.q;
    let header: Vec<String> =
        (1..=q).map(|i| format!("eps_{}", i)).chain((1..=q).map(|i| format!("sig_{}", i))).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for p in &dataset.points {
        line.clear();
        for (j, v) in p.state.strain.iter().chain(&p.state.stress).enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", v.as_f64()));
        }
        writeln!(w, "{}", line)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Real>(dataset: &MaterialDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, File::create(path)?)
}

pub fn read_csv<T: Real>(path: impl AsRef<Path>) -> Result<MaterialDataset<T>> {
    read_dataset(File::open(path)?)
}

/// Parses the format produced by [`write_dataset`]. Comment lines may
/// appear anywhere; those of the form `# key=value` populate the meta map.
pub fn read_dataset<T: Real, R: Read>(input: R) -> Result<MaterialDataset<T>> {
    let reader = BufReader::new(input);
    let mut meta = BTreeMap::new();
    let mut q: Option<usize> = None;
    let mut states = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if let Some((k, v)) = c.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let cells: Vec<&str> = t.split(',').map(str::trim).collect();
        let Some(q) = q else {
            q = Some(parse_header(&cells).map_err(|msg| Error::Parse { line: lineno, msg })?);
            continue;
        };
        if cells.len() != 2 * q {
            return Err(Error::Parse { line: lineno, msg: format!("expected {} cells, found {}", 2 * q, cells.len()) });
        }
        let mut vals = Vec::with_capacity(2 * q);
        for (j, c) in cells.iter().enumerate() {
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("column {}: '{}' is not a number", j + 1, c),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: lineno, msg: format!("column {}: non-finite value", j + 1) });
            }
            vals.push(T::lit(v));
        }
        states.push(LocalState::from_vector(&vals));
    }
    if q.is_none() {
        return Err(Error::Parse { line: 0, msg: "missing header line".into() });
    }
    MaterialDataset::new(states, meta)
}

fn parse_header(cells: &[&str]) -> std::result::Result<usize, String> {
    if cells.is_empty() || !cells.len().is_multiple_of(2) {
        return Err(format!("header must have an even number of columns, found {}", cells.len()));
    }
    let q = cells.len() / 2;
    for (j, c) in cells.iter().enumerate() {
        let expect = if j < q { format!("eps_{}", j + 1) } else { format!("sig_{}", j - q + 1) };
        if *c != expect {
            return Err(format!("header column {} is '{}', expected '{}'", j + 1, c, expect));
        }
    }
    Ok(q)
}
