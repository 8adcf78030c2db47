//! Implicit midpoint (Cayley) time stepping of discrete generators and
//! exponential decay-rate fits of the energy.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::discretize::DiscreteOperator;
use crate::error::{PhsError, Result};
use crate::linalg::{self, re};

/// Relative size of the seeded perturbation added to the default initial condition.
pub const DEFAULT_PERTURBATION: f64 = 1e-3;
/// Eigenvalues with `|Re λ|` at most this are skipped when choosing the default initial condition.
pub const AXIS_SKIP_TOL: f64 = 1e-8;

/// One implicit midpoint propagator `x ↦ (I − dt/2 A)^{−1}(I + dt/2 A) x` built from a single LU.
pub struct MidpointStepper {
    lu: faer::linalg::solvers::PartialPivLu<c64>,
    plus: Mat<c64>,
}

impl MidpointStepper {
    /// Factorizes `I − dt/2 A` once.
    pub fn new(a: &Mat<c64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(PhsError::BadParameter(format!("time step must be positive, got {dt}")));
        }
        let n = a.nrows();
        let id = Mat::<c64>::identity(n, n);
        let half = linalg::scale(a, re(0.5 * dt));
        let minus = &id - &half;
        let plus = &id + &half;
        let lu = minus.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let v = u[(i, i)].norm();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if n > 0 && !(lo > 1e-14 * hi.max(1.0)) {
            return Err(PhsError::SingularStep);
        }
        Ok(MidpointStepper { lu, plus })
    }

    /// One step.
    pub fn step(&self, x: &[c64]) -> Vec<c64> {
        let rhs = linalg::col(&linalg::matvec(&self.plus, x));
        linalg::column(&self.lu.solve(&rhs), 0)
    }
}

/// Sampled states of a time integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times.
    pub times: Vec<f64>,
    /// States at the sample times.
    pub states: Vec<Vec<c64>>,
    /// Time step.
    pub dt: f64,
}

/// Number of steps covering `[0, T]` with step `dt`.
fn step_count(dt: f64, t_final: f64) -> usize {
    (t_final / dt).round().max(0.0) as usize
}

/// Integrates from `x0` up to `T`, keeping every state.
pub fn integrate_midpoint(op: &DiscreteOperator, x0: &[c64], dt: f64, t_final: f64) -> Result<Trajectory> {
    integrate_a(&op.a_h, x0, dt, t_final)
}

/// Midpoint integration for a bare matrix generator.
pub fn integrate_a(a: &Mat<c64>, x0: &[c64], dt: f64, t_final: f64) -> Result<Trajectory> {
    let stepper = MidpointStepper::new(a, dt)?;
    let steps = step_count(dt, t_final);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    for k in 1..=steps {
        x = stepper.step(&x);
        times.push(k as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, dt })
}

/// Energies `E_n = ½ x_n* M x_n` along a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    /// Sample times.
    pub times: Vec<f64>,
    /// Energies.
    pub energies: Vec<f64>,
    /// Time step.
    pub dt: f64,
    /// Free-form label of the model.
    pub label: String,
}

/// Energies of a stored trajectory.
pub fn energy_trace(traj: &Trajectory, m_h: &Mat<c64>) -> EnergyTrace {
    let energies = traj.states.iter().map(|x| 0.5 * linalg::quad_form(m_h, x).re.max(0.0)).collect();
    EnergyTrace { times: traj.times.clone(), energies, dt: traj.dt, label: String::new() }
}

/// Integrates and records only the energy, without storing the states.
pub fn simulate_energy(op: &DiscreteOperator, x0: &[c64], dt: f64, t_final: f64) -> Result<EnergyTrace> {
    let stepper = MidpointStepper::new(&op.a_h, dt)?;
    let steps = step_count(dt, t_final);
    let mut times = Vec::with_capacity(steps + 1);
    let mut energies = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    energies.push(op.energy(&x).max(0.0));
    for k in 1..=steps {
        x = stepper.step(&x);
        times.push(k as f64 * dt);
        energies.push(op.energy(&x).max(0.0));
    }
    Ok(EnergyTrace { times, energies, dt, label: op.label.clone() })
}

/// Least-squares exponential fit of an energy trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Fitted state-norm rate, half the slope of `log E`.
    pub omega_hat: f64,
    /// Fit window.
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    /// Number of samples used.
    pub samples: usize,
}

/// Default fit window `[0.2 T, T]`.
pub fn default_window(trace: &EnergyTrace) -> (f64, f64) {
    let t = trace.times.last().copied().unwrap_or(0.0);
    (0.2 * t, t)
}

/// Fits `log E = c + s t` on the window and returns `omega_hat = s/2`.
pub fn fit_decay_rate(trace: &EnergyTrace, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (t0, t1) = window.unwrap_or_else(|| default_window(trace));
    let eps = 1e-12 * (t1.abs() + 1.0);
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energies)
        .filter(|(t, _)| **t >= t0 - eps && **t <= t1 + eps)
        .map(|(&t, &e)| (t, e))
        .collect();
    if pts.len() < 10 {
        return Err(PhsError::BadParameter(format!("decay fit needs at least 10 samples, window has {}", pts.len())));
    }
    if let Some(&(t, _)) = pts.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(PhsError::NonpositiveEnergy { t });
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let logs: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mean_l = logs.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (p, l) in pts.iter().zip(&logs) {
        sxx += (p.0 - mean_t).powi(2);
        sxy += (p.0 - mean_t) * (l - mean_l);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = mean_l - slope * mean_t;
    let rss: f64 = pts.iter().zip(&logs).map(|(p, l)| (l - icpt - slope * p.0).powi(2)).sum();
    Ok(DecayFit { omega_hat: slope / 2.0, window: (t0, t1), residual: (rss / n).sqrt(), samples: pts.len() })
}

/// Eigenvector of the rightmost eigenvalue off the imaginary axis, normalized in the
/// energy norm, plus a seeded perturbation of relative size `DEFAULT_PERTURBATION`.
pub fn default_initial_condition(op: &DiscreteOperator, seed: u64) -> Result<Vec<c64>> {
    let n = op.dim();
    let (vals, vecs) = linalg::eig(&op.a_h)?;
    let pick = (0..vals.len())
        .filter(|&i| vals[i].re.abs() > AXIS_SKIP_TOL)
        .max_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re).then(vals[b].im.total_cmp(&vals[a].im)))
        .or_else(|| (0..vals.len()).max_by(|&a, &b| vals[a].re.total_cmp(&vals[b].re)));
    let mut x = match pick {
        Some(i) => linalg::column(&vecs, i),
        None => return Ok(Vec::new()),
    };
    normalize(op, &mut x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<c64> = (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            c64::new(a, b)
        })
        .collect();
    normalize(op, &mut p);
    for (xi, pi) in x.iter_mut().zip(p) {
        *xi += pi * DEFAULT_PERTURBATION;
    }
    Ok(x)
}

fn normalize(op: &DiscreteOperator, x: &mut [c64]) {
    let nrm = linalg::quad_form(&op.m_h, x).re.max(0.0).sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}
