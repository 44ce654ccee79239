//! The alternating global/local data-driven iteration.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{Discretization, Geometry, GlobalSolver};
use crate::datagen::MaterialDataset;
use crate::error::{Error, Result};
use crate::phase_space::{m_norm, LocalState, Metric};
use crate::projection::{convex_project, DataSearch, SolverParams};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Nearest data point.
    Dmdd,
    /// Convex combination of the k nearest data points.
    Lcdd,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dmdd => "dmdd",
            Mode::Lcdd => "lcdd",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dmdd" => Ok(Mode::Dmdd),
            "lcdd" => Ok(Mode::Lcdd),
            _ => Err(Error::Contract(format!("unknown mode '{}'", s))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// One uniformly drawn data point per integration point.
    RandomDataPoint,
    Zeros,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct SolverConfig<T> {
    pub mode: Mode,
    pub params: SolverParams<T>,
    /// Convergence tolerance relative to the largest first-iteration data
    /// state norm.
    pub tol_rel: T,
    pub max_iter: usize,
    pub init: Init,
    pub seed: u64,
    pub load_steps: usize,
    /// Keep the nearest data index of every point at every iteration.
    pub record_assignments: bool,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            mode: Mode::Lcdd,
            params: SolverParams::default(),
            tol_rel: T::lit(1e-8),
            max_iter: 10_000,
            init: Init::RandomDataPoint,
            seed: 0,
            load_steps: 1,
            record_assignments: false,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn dmdd() -> Self {
        Self { mode: Mode::Dmdd, ..Self::default() }
    }

    pub fn lcdd(k: usize) -> Self {
        Self { mode: Mode::Lcdd, params: SolverParams::with_k(k), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > T::zero()) {
            return Err(Error::Contract("tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Contract("max_iter must be at least 1".into()));
        }
        if self.load_steps == 0 {
            return Err(Error::Contract("load_steps must be at least 1".into()));
        }
        self.params.validate()
    }

    /// Neighbour count actually used by the local step.
    pub fn effective_k(&self) -> usize {
        match self.mode {
            Mode::Dmdd => 1,
            Mode::Lcdd => self.params.k,
        }
    }
}

/// Diagnostics of one global/local sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IterationRecord<T> {
    /// `max_α ‖ŝ*_α^(ν) − ŝ*_α^(ν−1)‖_M`.
    pub change: T,
    /// Free-dof equilibrium residual of the global-step state, relative to
    /// the load norm (absolute when the load vanishes).
    pub equilibrium: T,
    /// Relative compatibility residual of the global-step state.
    pub compatibility: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SolveReport<T> {
    /// Admissible states from the global step on the final assignment.
    pub states: Vec<LocalState<T>>,
    /// Final data states `ŝ*`.
    pub assigned: Vec<LocalState<T>>,
    /// Nearest data index of each point in the final assignment.
    pub nearest: Vec<usize>,
    pub displacements: Vec<T>,
    /// Iterations used by each load step.
    pub iterations: Vec<usize>,
    pub converged: bool,
    /// Some load step stopped because a DMDD assignment repeated.
    pub cycle_detected: bool,
    pub trace: Vec<IterationRecord<T>>,
    /// Per iteration, the nearest data index of every point (if recorded).
    pub assignment_trace: Option<Vec<Vec<usize>>>,
    pub tol_abs: Vec<T>,
    /// Load factor of the last step.
    pub load_factor: T,
    /// Residuals of the final global step.
    pub final_record: IterationRecord<T>,
}

impl<T: Real> SolveReport<T> {
    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    /// Largest `‖s_α − ŝ*_α‖_M` between final states and data.
    pub fn data_gap(&self, disc: &Discretization<T>) -> Result<T> {
        let mut worst = T::zero();
        for (i, (s, a)) in self.states.iter().zip(&self.assigned).enumerate() {
            worst = worst.max(m_norm(&s.sub(a), disc.metric(i))?);
        }
        Ok(worst)
    }
}

/// One search structure per distinct metric of the discretization.
struct LocalSolver<'a, T> {
    searches: Vec<DataSearch<'a, T>>,
    point_metric: Vec<usize>,
    metrics: Vec<Metric<T>>,
    mode: Mode,
    params: SolverParams<T>,
}

struct LocalOutcome<T> {
    state: LocalState<T>,
    nearest: usize,
}

impl<'a, T: Real> LocalSolver<'a, T> {
    fn new(disc: &Discretization<T>, dataset: &'a MaterialDataset<T>, cfg: &SolverConfig<T>) -> Result<Self> {
        if dataset.q() != disc.q() {
            return Err(Error::Dimension(format!(
                "dataset has dimension {} but the problem needs {}",
                dataset.q(),
                disc.q()
            )));
        }
        let k = cfg.effective_k();
        if k > dataset.len() {
            return Err(Error::TooManyNeighbors { k, p: dataset.len() });
        }
        let searches = disc.metrics.iter().map(|m| DataSearch::new(dataset, m)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            searches,
            point_metric: disc.points.iter().map(|p| p.metric).collect(),
            metrics: disc.metrics.clone(),
            mode: cfg.mode,
            params: cfg.params,
        })
    }

    fn project(&self, point: usize, s: &LocalState<T>) -> Result<LocalOutcome<T>> {
        let search = &self.searches[self.point_metric[point]];
        match self.mode {
            Mode::Dmdd => {
                let i = search.nearest_indices(s, 1)?[0];
                Ok(LocalOutcome { state: search.dataset().state(i).clone(), nearest: i })
            }
            Mode::Lcdd => {
                let nb = search.knn(s, self.params.k)?;
                let r = convex_project(s, &nb, &self.metrics[self.point_metric[point]], &self.params)?;
                Ok(LocalOutcome { state: r.state, nearest: nb.indices[0] })
            }
        }
    }

    fn sweep(&self, states: &[LocalState<T>]) -> Result<Vec<LocalOutcome<T>>> {
        states.par_iter().enumerate().map(|(i, s)| self.project(i, s)).collect()
    }
}

fn record<T: Real>(
    g: &GlobalSolver<'_, T>,
    d: &[T],
    states: &[LocalState<T>],
    scale: T,
    change: T,
) -> IterationRecord<T> {
    let res = g.equilibrium_residual(states, scale);
    let f = g.load_norm(scale);
    IterationRecord {
        change,
        equilibrium: if f > T::zero() { res / f } else { res },
        compatibility: g.compatibility_residual(d, states),
    }
}

fn initial_assignment<T: Real>(
    disc: &Discretization<T>,
    dataset: &MaterialDataset<T>,
    cfg: &SolverConfig<T>,
) -> (Vec<LocalState<T>>, Vec<usize>) {
    let m = disc.points.len();
    match cfg.init {
        Init::Zeros => (vec![LocalState::zeros(disc.q()); m], vec![usize::MAX; m]),
        Init::RandomDataPoint => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let idx: Vec<usize> = (0..m).map(|_| rng.gen_range(0..dataset.len())).collect();
            (idx.iter().map(|&i| dataset.state(i).clone()).collect(), idx)
        }
    }
}

struct StepResult<T> {
    assigned: Vec<LocalState<T>>,
    nearest: Vec<usize>,
    iterations: usize,
    converged: bool,
    cycle: bool,
    trace: Vec<IterationRecord<T>>,
    assignment_trace: Vec<Vec<usize>>,
    tol_abs: T,
}

fn solve_step<T: Real>(
    g: &GlobalSolver<'_, T>,
    local: &LocalSolver<'_, T>,
    cfg: &SolverConfig<T>,
    mut assigned: Vec<LocalState<T>>,
    scale: T,
) -> Result<StepResult<T>> {
    let disc = g.discretization();
    let detect_cycles = cfg.effective_k() == 1;
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut trace = Vec::new();
    let mut assignment_trace = Vec::new();
    let mut tol_abs = T::zero();
    let mut nearest = vec![usize::MAX; assigned.len()];
    let mut converged = false;
    let mut cycle = false;
    let mut iterations = 0;
    for nu in 1..=cfg.max_iter {
        iterations = nu;
        let gs = g.global_step_scaled(&assigned, scale)?;
        let out = local.sweep(&gs.states)?;
        let mut change = T::zero();
        let mut largest = T::zero();
        for (i, (o, old)) in out.iter().zip(&assigned).enumerate() {
            let m = disc.metric(i);
            change = change.max(m_norm(&o.state.sub(old), m)?);
            if nu == 1 {
                largest = largest.max(m_norm(&o.state, m)?);
            }
        }
        if nu == 1 {
            tol_abs = cfg.tol_rel * largest;
        }
        trace.push(record(g, &gs.d, &gs.states, scale, change));
        nearest = out.iter().map(|o| o.nearest).collect();
        assigned = out.into_iter().map(|o| o.state).collect();
        if cfg.record_assignments {
            assignment_trace.push(nearest.clone());
        }
        if change <= tol_abs {
            converged = true;
            break;
        }
        if detect_cycles && !seen.insert(nearest.clone()) {
            converged = true;
            cycle = true;
            break;
        }
    }
    Ok(StepResult { assigned, nearest, iterations, converged, cycle, trace, assignment_trace, tol_abs })
}

/// Solves under loads scaled by `j/steps` for `j = 1..=steps`, warm-starting
/// each step from the previous assignment. Returns one report per step.
pub fn incremental_load<T: Real>(
    disc: &Discretization<T>,
    dataset: &MaterialDataset<T>,
    cfg: &SolverConfig<T>,
) -> Result<Vec<SolveReport<T>>> {
    cfg.validate()?;
    let g = GlobalSolver::new(disc)?;
    let local = LocalSolver::new(disc, dataset, cfg)?;
    let (mut assigned, _) = initial_assignment(disc, dataset, cfg);
    let steps = cfg.load_steps;
    let mut reports = Vec::with_capacity(steps);
    for j in 1..=steps {
        let scale = T::from_usize(j).expect("step") / T::from_usize(steps).expect("steps");
        let step = solve_step(&g, &local, cfg, assigned, scale)?;
        let fin = g.global_step_scaled(&step.assigned, scale)?;
        let final_record = record(&g, &fin.d, &fin.states, scale, T::zero());
        reports.push(SolveReport {
            states: fin.states,
            assigned: step.assigned.clone(),
            nearest: step.nearest,
            displacements: fin.d,
            iterations: vec![step.iterations],
            converged: step.converged,
            cycle_detected: step.cycle,
            trace: step.trace,
            assignment_trace: cfg.record_assignments.then_some(step.assignment_trace),
            tol_abs: vec![step.tol_abs],
            load_factor: scale,
            final_record,
        });
        assigned = step.assigned;
    }
    Ok(reports)
}

/// Full solve; with several load steps the report describes the last step
/// and concatenates the per-step iteration counts and traces.
pub fn run<T: Real>(
    disc: &Discretization<T>,
    dataset: &MaterialDataset<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolveReport<T>> {
    let reports = incremental_load(disc, dataset, cfg)?;
    Ok(merge_steps(reports))
}

pub fn merge_steps<T: Real>(reports: Vec<SolveReport<T>>) -> SolveReport<T> {
    let mut it = reports.into_iter();
    let mut acc = it.next().expect("at least one load step");
    for r in it {
        acc.iterations.extend(r.iterations);
        acc.trace.extend(r.trace);
        acc.tol_abs.extend(r.tol_abs);
        if let (Some(a), Some(b)) = (acc.assignment_trace.as_mut(), r.assignment_trace) {
            a.extend(b);
        }
        acc.converged &= r.converged;
        acc.cycle_detected |= r.cycle_detected;
        acc.states = r.states;
        acc.assigned = r.assigned;
        acc.nearest = r.nearest;
        acc.displacements = r.displacements;
        acc.load_factor = r.load_factor;
        acc.final_record = r.final_record;
    }
    acc
}

/// Length-weighted normalized RMS strain and stress errors of a truss
/// solution: `(1/max|ε_ref|)·sqrt((1/m) Σ l (ε − ε_ref)²)`, likewise for σ.
pub fn rms_truss<T: Real>(states: &[LocalState<T>], reference: &[LocalState<T>], lengths: &[T]) -> Result<(T, T)> {
    let m = states.len();
    if m == 0 || reference.len() != m || lengths.len() != m {
        return Err(Error::Dimension("state, reference and length counts must agree".into()));
    }
    if states.iter().chain(reference).any(|s| s.q() != 1) {
        return Err(Error::Dimension("truss errors need uniaxial states".into()));
    }
    let eps_max = reference.iter().fold(T::zero(), |a, s| a.max(s.strain[0].abs()));
    let sig_max = reference.iter().fold(T::zero(), |a, s| a.max(s.stress[0].abs()));
    if eps_max == T::zero() || sig_max == T::zero() {
        return Err(Error::Contract("reference solution is identically zero".into()));
    }
    let mt = T::from_usize(m).expect("count");
    let (mut se, mut ss) = (T::zero(), T::zero());
    for ((s, r), &l) in states.iter().zip(reference).zip(lengths) {
        se += l * (s.strain[0] - r.strain[0]).powi(2);
        ss += l * (s.stress[0] - r.stress[0]).powi(2);
    }
    Ok(((se / mt).sqrt() / eps_max, (ss / mt).sqrt() / sig_max))
}

/// `sqrt(Σ V ‖s − s_ref‖²_M / Σ V ‖s_ref‖²_M)`.
pub fn rms_state<T: Real>(
    states: &[LocalState<T>],
    reference: &[LocalState<T>],
    disc: &Discretization<T>,
) -> Result<T> {
    if states.len() != reference.len() || states.len() != disc.points.len() {
        return Err(Error::Dimension("state, reference and point counts must agree".into()));
    }
    let (mut num, mut den) = (T::zero(), T::zero());
    for (i, (s, r)) in states.iter().zip(reference).enumerate() {
        let m = disc.metric(i);
        let w = disc.points[i].weight;
        num += w * m.norm_sq(&s.sub(r))?;
        den += w * m.norm_sq(r)?;
    }
    if den == T::zero() {
        return Err(Error::Contract("reference state has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

/// Member lengths of a truss discretization.
pub fn truss_lengths<T: Real>(disc: &Discretization<T>) -> Result<Vec<T>> {
    match &disc.geometry {
        Geometry::Truss(t) => Ok(t.lengths.clone()),
        Geometry::Continuum(_) => Err(Error::Unsupported("member lengths of a continuum".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{build_truss, TrussSpec};
    use crate::datagen::{gen_linear_truss, NoiseSpec};

    fn one_bar() -> Discretization<f64> {
        build_truss(&TrussSpec::one_bar()).unwrap()
    }

    #[test]
    fn one_bar_lcdd_on_noiseless_data() {
        let d = gen_linear_truss(100, 100e6, 0.01, NoiseSpec::noiseless(3)).unwrap();
        let r = run(&one_bar(), &d, &SolverConfig::lcdd(6)).unwrap();
        assert!(r.converged);
        let s = &r.states[0];
        assert!((s.stress[0] - 0.5e6).abs() <= 1e-9 * 0.5e6);
        // within a tenth of the data spacing
        assert!((s.strain[0] - 0.005).abs() < 1e-5, "{}", s.strain[0]);
    }

    #[test]
    fn five_load_steps() {
        let d = gen_linear_truss(100, 100e6, 0.01, NoiseSpec::new(0.05, 1).unwrap()).unwrap();
        let cfg = SolverConfig { load_steps: 5, ..SolverConfig::lcdd(6) };
        let reps = incremental_load(&one_bar(), &d, &cfg).unwrap();
        assert_eq!(reps.len(), 5);
        for (j, r) in reps.iter().enumerate() {
            let expect = 0.1e6 * (j + 1) as f64;
            assert!((r.states[0].stress[0] - expect).abs() <= 1e-9 * expect);
        }
    }

    #[test]
    fn monotone_strains_on_linear_data() {
        let d = gen_linear_truss(200, 100e6, 0.01, NoiseSpec::noiseless(5)).unwrap();
        let cfg = SolverConfig { load_steps: 5, ..SolverConfig::lcdd(6) };
        let reps = incremental_load(&one_bar(), &d, &cfg).unwrap();
        let eps: Vec<f64> = reps.iter().map(|r| r.states[0].strain[0]).collect();
        assert!(eps.windows(2).all(|w| w[1] > w[0]), "{:?}", eps);
    }

    #[test]
    fn single_step_matches_run() {
        let d = gen_linear_truss(50, 100e6, 0.01, NoiseSpec::new(0.1, 2).unwrap()).unwrap();
        let cfg = SolverConfig::<f64>::dmdd();
        let a = run(&one_bar(), &d, &cfg).unwrap();
        let b = incremental_load(&one_bar(), &d, &cfg).unwrap().pop().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lcdd_with_one_neighbour_is_dmdd() {
        let disc = build_truss(&TrussSpec::fifteen_bar()).unwrap();
        let d = gen_linear_truss(300, 100e6, 0.01, NoiseSpec::new(0.05, 8).unwrap()).unwrap();
        let base = SolverConfig { record_assignments: true, seed: 4, ..SolverConfig::dmdd() };
        let a = run(&disc, &d, &base).unwrap();
        let b = run(&disc, &d, &SolverConfig { mode: Mode::Lcdd, params: SolverParams::with_k(1), ..base }).unwrap();
        assert_eq!(a.assignment_trace, b.assignment_trace);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn deterministic_traces() {
        let disc = build_truss(&TrussSpec::fifteen_bar()).unwrap();
        let d = gen_linear_truss(300, 100e6, 0.01, NoiseSpec::new(0.05, 8).unwrap()).unwrap();
        let cfg = SolverConfig { seed: 9, ..SolverConfig::lcdd(6) };
        assert_eq!(run(&disc, &d, &cfg).unwrap(), run(&disc, &d, &cfg).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let d =
            crate::datagen::gen_plane_stress(2, 30e6, 0.3, (-1e-4, 1e-4), crate::datagen::PlaneStressNoise::None, 0)
                .unwrap();
        assert!(matches!(run(&one_bar(), &d, &SolverConfig::dmdd()), Err(Error::Dimension(_))));
        let small = gen_linear_truss(3, 100e6, 0.01, NoiseSpec::noiseless(0)).unwrap();
        assert!(matches!(run(&one_bar(), &small, &SolverConfig::lcdd(6)), Err(Error::TooManyNeighbors { .. })));
    }

    #[test]
    fn non_convergence_is_reported() {
        let disc = build_truss(&TrussSpec::fifteen_bar()).unwrap();
        let d = gen_linear_truss(1000, 100e6, 0.01, NoiseSpec::new(0.1, 1).unwrap()).unwrap();
        let r = run(&disc, &d, &SolverConfig { max_iter: 1, ..SolverConfig::lcdd(6) }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, vec![1]);
    }

    #[test]
    fn rms_truss_values() {
        let r = vec![LocalState::scalar(0.5, 2.0)];
        assert_eq!(rms_truss(&r, &r, &[2.0]).unwrap(), (0.0, 0.0));
        let s = vec![LocalState::scalar(0.5 + 0.01, 2.0)];
        let (e, _) = rms_truss(&s, &r, &[2.0]).unwrap();
        assert!((e - 0.01 * 2f64.sqrt() / 0.5).abs() < 1e-12);
        let (e4, _) = rms_truss(&s, &r, &[8.0]).unwrap();
        assert!((e4 / e - 2.0).abs() < 1e-12);
        assert!(rms_truss(&s, &[LocalState::scalar(0.0, 0.0)], &[1.0]).is_err());
    }

    #[test]
    fn rms_state_values() {
        let disc = build_truss(&TrussSpec {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [4.0, 0.0]],
            members: vec![
                crate::assembly::Member { a: 0, b: 1, area: 1.0 },
                crate::assembly::Member { a: 1, b: 2, area: 1.0 },
            ],
            supports: vec![crate::assembly::Support { node: 0, ux: Some(0.0), uy: Some(0.0) }],
            loads: vec![],
            modulus: 2.0,
        })
        .unwrap();
        let r: Vec<LocalState<f64>> = vec![LocalState::scalar(1.0, 0.0), LocalState::scalar(0.0, 2.0)];
        assert_eq!(rms_state(&r, &r, &disc).unwrap(), 0.0);
        let s: Vec<_> = r.iter().map(|x| x.scale(1.1)).collect();
        assert!((rms_state(&s, &r, &disc).unwrap() - 0.1).abs() < 1e-12);
        // V = (1, 3); ‖(1,0)‖² = 1, ‖(0,2)‖² = 1; perturb only the second point
        let s = vec![r[0].clone(), LocalState::scalar(0.5, 2.0)];
        let num: f64 = 3.0 * 0.5 * 2.0 * 0.25;
        let den = 1.0 * 1.0 + 3.0 * 1.0;
        assert!((rms_state(&s, &r, &disc).unwrap() - (num / den).sqrt()).abs() < 1e-12);
    }
}
