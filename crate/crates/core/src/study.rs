//! Convergence studies: error against dataset size for several solver
//! variants, with a log-log slope fit.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::GlobalSolver;
use crate::datagen::MaterialDataset;
use crate::driver::{rms_state, rms_truss, run, truss_lengths, Mode, SolverConfig};
use crate::error::{Error, Result};
use crate::problem::{DatasetSpec, ProblemSpec};
use crate::projection::SolverParams;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub mode: Mode,
    /// Ignored for DMDD.
    #[serde(default = "one")]
    pub k: usize,
}

fn one() -> usize {
    1
}

impl Variant {
    pub fn dmdd() -> Self {
        Self { mode: Mode::Dmdd, k: 1 }
    }

    pub fn lcdd(k: usize) -> Self {
        Self { mode: Mode::Lcdd, k }
    }

    fn effective_k(&self) -> usize {
        match self.mode {
            Mode::Dmdd => 1,
            Mode::Lcdd => self.k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StudySpec<T> {
    pub problem: ProblemSpec<T>,
    pub generator: DatasetSpec,
    /// Dataset sizes `p`.
    pub sizes: Vec<usize>,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// If set, the noise level of each dataset is `chi_over_p / p`.
    #[serde(default)]
    pub chi_over_p: Option<f64>,
    /// Base solver settings; mode, k and seed are overridden per run.
    #[serde(default)]
    pub solver: SolverConfig<T>,
}

impl<T: Real> StudySpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::Contract("a study needs at least two dataset sizes".into()));
        }
        if self.variants.is_empty() || self.seeds.is_empty() {
            return Err(Error::Contract("a study needs at least one variant and one seed".into()));
        }
        for &p in &self.sizes {
            self.dataset_spec(p)?;
        }
        self.solver.validate()
    }

    fn dataset_spec(&self, p: usize) -> Result<DatasetSpec> {
        let g = self.generator.with_size(p)?;
        match self.chi_over_p {
            Some(c) => g.with_chi(c / p as f64),
            None => Ok(g),
        }
    }

    fn config(&self, v: Variant, seed: u64) -> SolverConfig<T> {
        SolverConfig {
            mode: v.mode,
            params: SolverParams { k: v.effective_k(), ..self.solver.params },
            seed,
            ..self.solver.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub problem: String,
    pub mode: Mode,
    pub k: usize,
    pub p: usize,
    pub chi: f64,
    pub seed: u64,
    /// Normalized RMS strain error for trusses, state error for continua.
    pub error_metric: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub p: usize,
    pub median_error: f64,
    pub median_iterations: f64,
    pub non_converged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub mode: Mode,
    pub k: usize,
    /// Least-squares slope of `log(median error)` against `log(axis)`;
    /// absent when some median error is zero.
    pub slope: Option<f64>,
    pub points: Vec<SizePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub problem: String,
    pub metric: String,
    /// `p`, or `cbrt_p` for three-component states.
    pub axis: String,
    pub fits: Vec<SlopeFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub summary: StudySummary,
}

/// Runs every (size, variant, seed) combination. Rows come back ordered by
/// size, then variant, then seed, independent of scheduling.
pub fn convergence_study<T: Real>(spec: &StudySpec<T>) -> Result<StudyTable> {
    spec.validate()?;
    let disc = spec.problem.build()?;
    let reference = GlobalSolver::new(&disc)?.reference_solution(T::one())?;
    let lengths = if disc.is_truss() { Some(truss_lengths(&disc)?) } else { None };

    let mut jobs = Vec::new();
    for &p in &spec.sizes {
        for &seed in &spec.seeds {
            jobs.push((p, seed));
        }
    }
    let datasets: Vec<(DatasetSpec, MaterialDataset<T>)> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let g = spec.dataset_spec(p)?;
            let d = g.generate(seed)?;
            Ok((g, d))
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::new();
    for (si, _) in spec.sizes.iter().enumerate() {
        for v in &spec.variants {
            for (ki, _) in spec.seeds.iter().enumerate() {
                runs.push((si * spec.seeds.len() + ki, *v));
            }
        }
    }
    let rows: Vec<StudyRow> = runs
        .par_iter()
        .map(|&(ji, v)| {
            let (p, seed) = jobs[ji];
            let (g, data) = &datasets[ji];
            let cfg = spec.config(v, seed);
            let start = Instant::now();
            let report = run(&disc, data, &cfg)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let err = match &lengths {
                Some(l) => rms_truss(&report.states, &reference.states, l)?.0,
                None => rms_state(&report.states, &reference.states, &disc)?,
            };
            Ok(StudyRow {
                problem: spec.problem.name().to_string(),
                mode: v.mode,
                k: v.effective_k(),
                p,
                chi: g.chi(),
                seed,
                error_metric: err.as_f64(),
                iterations: report.total_iterations(),
                converged: report.converged,
                wall_ms,
            })
        })
        .collect::<Result<_>>()?;

    let axis_cbrt = disc.q() == 3;
    let fits = spec
        .variants
        .iter()
        .map(|v| {
            let points: Vec<SizePoint> = spec
                .sizes
                .iter()
                .map(|&p| {
                    let sel: Vec<&StudyRow> =
                        rows.iter().filter(|r| r.p == p && r.mode == v.mode && r.k == v.effective_k()).collect();
                    SizePoint {
                        p,
                        median_error: median(sel.iter().map(|r| r.error_metric).collect()),
                        median_iterations: median(sel.iter().map(|r| r.iterations as f64).collect()),
                        non_converged: sel.iter().filter(|r| !r.converged).count(),
                    }
                })
                .collect();
            let xs: Vec<f64> =
                points.iter().map(|s| if axis_cbrt { (s.p as f64).cbrt() } else { s.p as f64 }).collect();
            let ys: Vec<f64> = points.iter().map(|s| s.median_error).collect();
            SlopeFit { mode: v.mode, k: v.effective_k(), slope: loglog_slope(&xs, &ys), points }
        })
        .collect();
    Ok(StudyTable {
        summary: StudySummary {
            problem: spec.problem.name().to_string(),
            metric: if disc.is_truss() { "eps_rms" } else { "omega_rms" }.to_string(),
            axis: if axis_cbrt { "cbrt_p" } else { "p" }.to_string(),
            fits,
        },
        rows,
    })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

pub const STUDY_CSV_HEADER: &str = "problem,mode,k,p,chi,seed,error_metric,iterations,converged,wall_ms";

pub fn write_study_csv<W: Write>(rows: &[StudyRow], mut out: W) -> Result<()> {
    writeln!(out, "{}", STUDY_CSV_HEADER)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:e},{},{:.16e},{},{},{:.3}",
            r.problem,
            r.mode.as_str(),
            r.k,
            r.p,
            r.chi,
            r.seed,
            r.error_metric,
            r.iterations,
            r.converged,
            r.wall_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1e2, 1e3, 1e4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.8)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.8).abs() < 1e-12);
        assert_eq!(loglog_slope(&xs, &[1.0, 0.0, 1.0]), None);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    fn small_study() -> StudySpec<f64> {
        StudySpec {
            problem: ProblemSpec::FifteenBar,
            generator: DatasetSpec::LinearTruss { p: 0, modulus: 100e6, eps_max: 0.01, chi: 0.0 },
            sizes: vec![50, 200],
            variants: vec![Variant::dmdd(), Variant::lcdd(6)],
            seeds: vec![1, 2],
            chi_over_p: Some(2.0),
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn study_table_shape_and_order() {
        let t = convergence_study(&small_study()).unwrap();
        assert_eq!(t.rows.len(), 8);
        let keys: Vec<(usize, Mode, u64)> = t.rows.iter().map(|r| (r.p, r.mode, r.seed)).collect();
        assert_eq!(keys[0], (50, Mode::Dmdd, 1));
        assert_eq!(keys[3], (50, Mode::Lcdd, 2));
        assert_eq!(keys[4], (200, Mode::Dmdd, 1));
        assert!((t.rows[0].chi - 0.04).abs() < 1e-15);
        assert_eq!(t.summary.fits.len(), 2);
        assert_eq!(t.summary.axis, "p");
        let mut buf = Vec::new();
        write_study_csv(&t.rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }

    #[test]
    fn study_needs_two_sizes() {
        let mut s = small_study();
        s.sizes = vec![100];
        assert!(convergence_study(&s).is_err());
        s.sizes = vec![];
        assert!(convergence_study(&s).is_err());
    }

    #[test]
    fn study_is_deterministic_apart_from_timing() {
        let strip =
            |t: StudyTable| -> Vec<StudyRow> { t.rows.into_iter().map(|r| StudyRow { wall_ms: 0.0, ..r }).collect() };
        let a = strip(convergence_study(&small_study()).unwrap());
        let b = strip(convergence_study(&small_study()).unwrap());
        assert_eq!(a, b);
    }
}
