//! Serializable problem and dataset descriptions used by configs.

use serde::{Deserialize, Serialize};

use crate::assembly::{build_beam, build_truss, BeamSpec, Discretization, TrussSpec};
use crate::datagen::{
    default_outlier, gen_linear_truss, gen_outlier_truss, gen_plane_stress, gen_sigmoid_truss, MaterialDataset,
    NoiseSpec, PlaneStressNoise,
};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "T: Real")]
pub enum ProblemSpec<T> {
    /// Single axial bar under 10 kN.
    OneBar,
    /// The 15-member benchmark truss.
    FifteenBar,
    Truss(TrussSpec<T>),
    Beam(BeamSpec<T>),
}

impl<T: Real> ProblemSpec<T> {
    pub fn build(&self) -> Result<Discretization<T>> {
        match self {
            ProblemSpec::OneBar => build_truss(&TrussSpec::one_bar()),
            ProblemSpec::FifteenBar => build_truss(&TrussSpec::fifteen_bar()),
            ProblemSpec::Truss(t) => build_truss(t),
            ProblemSpec::Beam(b) => build_beam(b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::OneBar => "one-bar",
            ProblemSpec::FifteenBar => "fifteen-bar",
            ProblemSpec::Truss(_) => "truss",
            ProblemSpec::Beam(_) => "beam",
        }
    }
}

fn default_modulus() -> f64 {
    100e6
}

fn default_eps_max() -> f64 {
    0.01
}

fn default_outlier_pair() -> [f64; 2] {
    let o = default_outlier::<f64>();
    [o.strain[0], o.stress[0]]
}

fn default_youngs() -> f64 {
    30e6
}

fn default_poisson() -> f64 {
    0.3
}

fn default_range() -> [f64; 2] {
    [-5e-4, 5e-4]
}

fn default_noise() -> PlaneStressNoise {
    PlaneStressNoise::None
}

/// Generator name plus parameters; the seed is supplied separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum DatasetSpec {
    LinearTruss {
        p: usize,
        #[serde(default = "default_modulus")]
        modulus: f64,
        #[serde(default = "default_eps_max")]
        eps_max: f64,
        #[serde(default)]
        chi: f64,
    },
    SigmoidTruss {
        p: usize,
    },
    OutlierTruss {
        p: usize,
        #[serde(default = "default_modulus")]
        modulus: f64,
        #[serde(default = "default_eps_max")]
        eps_max: f64,
        /// `(strain, stress)` of the appended point.
        #[serde(default = "default_outlier_pair")]
        outlier: [f64; 2],
    },
    PlaneStress {
        p_axis: usize,
        #[serde(default = "default_youngs")]
        youngs_modulus: f64,
        #[serde(default = "default_poisson")]
        poisson_ratio: f64,
        #[serde(default = "default_range")]
        range: [f64; 2],
        #[serde(default = "default_noise")]
        noise: PlaneStressNoise,
    },
}

impl DatasetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSpec::LinearTruss { .. } => "linear-truss",
            DatasetSpec::SigmoidTruss { .. } => "sigmoid-truss",
            DatasetSpec::OutlierTruss { .. } => "outlier-truss",
            DatasetSpec::PlaneStress { .. } => "plane-stress",
        }
    }

    /// Number of points the generator will produce.
    pub fn size(&self) -> usize {
        match *self {
            DatasetSpec::LinearTruss { p, .. }
            | DatasetSpec::SigmoidTruss { p }
            | DatasetSpec::OutlierTruss { p, .. } => p,
            DatasetSpec::PlaneStress { p_axis, .. } => p_axis.pow(3),
        }
    }

    /// Noise level, where the generator has one.
    pub fn chi(&self) -> f64 {
        match *self {
            DatasetSpec::LinearTruss { chi, .. } => chi,
            DatasetSpec::PlaneStress { p_axis, noise: PlaneStressNoise::Scaled, .. } => 0.4 / p_axis as f64,
            _ => 0.0,
        }
    }

    /// Same generator with `p` points. Plane-stress sizes must be perfect cubes.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            DatasetSpec::LinearTruss { p, .. }
            | DatasetSpec::SigmoidTruss { p }
            | DatasetSpec::OutlierTruss { p, .. } => *p = size,
            DatasetSpec::PlaneStress { p_axis, .. } => {
                let a = (size as f64).cbrt().round() as usize;
                if a.pow(3) != size {
                    return Err(Error::Contract(format!("plane-stress size {} is not a perfect cube", size)));
                }
                *p_axis = a;
            }
        }
        Ok(out)
    }

    pub fn with_chi(&self, value: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            DatasetSpec::LinearTruss { chi, .. } => *chi = value,
            _ => return Err(Error::Unsupported(format!("{} has no noise level to set", self.name()))),
        }
        Ok(out)
    }

    pub fn generate<T: Real>(&self, seed: u64) -> Result<MaterialDataset<T>> {
        match *self {
            DatasetSpec::LinearTruss { p, modulus, eps_max, chi } => {
                gen_linear_truss(p, T::lit(modulus), T::lit(eps_max), NoiseSpec::new(chi, seed)?)
            }
            DatasetSpec::SigmoidTruss { p } => gen_sigmoid_truss(p, seed),
            DatasetSpec::OutlierTruss { p, modulus, eps_max, outlier } => gen_outlier_truss(
                p,
                T::lit(modulus),
                T::lit(eps_max),
                crate::phase_space::LocalState::scalar(T::lit(outlier[0]), T::lit(outlier[1])),
                seed,
            ),
            DatasetSpec::PlaneStress { p_axis, youngs_modulus, poisson_ratio, range, noise } => gen_plane_stress(
                p_axis,
                T::lit(youngs_modulus),
                T::lit(poisson_ratio),
                (T::lit(range[0]), T::lit(range[1])),
                noise,
                seed,
            ),
        }
    }
}
