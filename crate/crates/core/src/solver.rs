//! Minimization of the discrete p-energy under boundary constraints.
//!
//! The optimizer is an accelerated projected-gradient method in the metric
//! of a separable preconditioner: a weighted graph Laplacian whose radial
//! and angular stiffnesses are constant on each radial band. It is inverted
//! exactly by an FFT in θ followed by one tridiagonal solve per Fourier mode.
//! For `p = 2` with the Euclidean norm the preconditioner is the Hessian
//! itself.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::capacity::CapacityResult;
use crate::error::{Error, Result};
use crate::finsler::{CellNorm, EnergyFunctional, GradNormKind, PolarGrid, ScalarField};
use crate::weights::MeasureProfile;

/// Smallest exponent accepted by the solver.
pub const MIN_P: f64 = 1.05;
/// Default smoothing schedule for the max-norm.
pub const DEFAULT_SCHEDULE: [f64; 4] = [4.0, 8.0, 16.0, 32.0];
/// Default relative energy-change tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Window, in iterations, over which the relative energy change is measured.
pub const STOP_WINDOW: usize = 50;

const PRECONDITIONER_REFRESH: usize = 25;

/// Boundary data of a solve. The outer ring is always held at its value.
#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    /// Inner ring at 1, outer ring at 0.
    CapacitaryRing,
    /// Inner and outer rings take the values of the given field.
    Dirichlet(ScalarField),
    /// Marked nodes at 1, outer ring at 0, everything else free.
    SuperlevelInner(Vec<bool>),
}

#[derive(Debug, Clone)]
pub struct SolveSpec {
    pub grid: PolarGrid,
    pub p: f64,
    pub kind: GradNormKind,
    pub profile: MeasureProfile,
    pub bc: BoundaryCondition,
    /// Smoothing exponents for the max-norm, increasing, each `>= 2`.
    pub schedule: Vec<f64>,
    pub tol: f64,
    pub max_iterations: usize,
}

impl SolveSpec {
    pub fn new(grid: PolarGrid, p: f64, kind: GradNormKind, profile: MeasureProfile, bc: BoundaryCondition) -> Self {
        Self {
            grid,
            p,
            kind,
            profile,
            bc,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            tol: DEFAULT_TOL,
            max_iterations: 20_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= MIN_P) || !self.p.is_finite() {
            return Err(Error::domain(format!(
                "solver needs p >= {MIN_P} (conditioning), got {}",
                self.p
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("solver tolerance must be positive"));
        }
        if self.schedule.is_empty()
            || self.schedule.iter().any(|&q| !(q >= 2.0) || !q.is_finite())
            || self.schedule.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(Error::domain("smoothing schedule must be increasing with every q >= 2"));
        }
        match &self.bc {
            BoundaryCondition::Dirichlet(f) if f.grid() != &self.grid => {
                Err(Error::domain("Dirichlet field lives on a different grid"))
            }
            BoundaryCondition::SuperlevelInner(marked) => {
                if marked.len() != self.grid.nodes() {
                    return Err(Error::domain("superlevel mask does not match the grid"));
                }
                if !marked.iter().any(|&m| m) {
                    return Err(Error::domain("superlevel set is empty"));
                }
                let n = self.grid.angles();
                let outer = self.grid.cells_radial();
                if (0..n).any(|j| marked[self.grid.index(outer, j)]) {
                    return Err(Error::domain("superlevel set touches the outer boundary"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Energy reached by one smoothing stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    /// Smoothing exponent, absent for Euclidean solves.
    pub q: Option<f64>,
    pub energy: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: ScalarField,
    pub capacity: CapacityResult,
    pub iterations: usize,
    pub stages: Vec<StageReport>,
    /// Energies of accepted iterates, all stages concatenated.
    pub history: Vec<f64>,
}

/// Fixed-node mask and initial guess satisfying the boundary condition.
fn setup(spec: &SolveSpec) -> (Vec<bool>, Vec<f64>) {
    let g = &spec.grid;
    let (m, n) = (g.cells_radial(), g.angles());
    let r = g.radii();
    let (r0, rm) = (r[0], r[m]);
    let mut fixed = vec![false; g.nodes()];
    let mut u = vec![0.0; g.nodes()];
    for j in 0..n {
        fixed[g.index(m, j)] = true;
    }
    match &spec.bc {
        BoundaryCondition::CapacitaryRing => {
            for j in 0..n {
                fixed[g.index(0, j)] = true;
                for i in 0..=m {
                    u[g.index(i, j)] = (rm - r[i]) / (rm - r0);
                }
            }
        }
        BoundaryCondition::Dirichlet(f) => {
            for j in 0..n {
                fixed[g.index(0, j)] = true;
                let (a, b) = (f.at(0, j), f.at(m, j));
                for i in 0..=m {
                    let s = (r[i] - r0) / (rm - r0);
                    u[g.index(i, j)] = (1.0 - s) * a + s * b;
                }
            }
        }
        BoundaryCondition::SuperlevelInner(marked) => {
            for j in 0..n {
                // Outermost marked node on this ray; linear decay to the outer ring.
                let top = (0..=m).rev().find(|&i| marked[g.index(i, j)]);
                for i in 0..=m {
                    let k = g.index(i, j);
                    fixed[k] |= marked[k];
                    u[k] = match top {
                        _ if marked[k] => 1.0,
                        Some(t) if i < t => 1.0,
                        Some(t) => (rm - r[i]) / (rm - r[t]),
                        None => 0.0,
                    };
                }
            }
            for (k, &mk) in marked.iter().enumerate() {
                if mk {
                    u[k] = 1.0;
                }
            }
        }
    }
    for j in 0..n {
        u[g.index(m, j)] = match &spec.bc {
            BoundaryCondition::Dirichlet(f) => f.at(m, j),
            _ => 0.0,
        };
    }
    (fixed, u)
}

/// Separable SPD approximation of the energy Hessian.
struct Preconditioner {
    rings: usize,
    n: usize,
    fixed_ring: Vec<bool>,
    fixed: Vec<bool>,
    c_r: Vec<f64>,
    c_t: Vec<f64>,
    lambda: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Preconditioner {
    fn new(f: &EnergyFunctional, u: &[f64], fixed: &[bool], planner: &mut FftPlanner<f64>) -> Self {
        let g = f.grid();
        let (m, n) = (g.cells_radial(), g.angles());
        let p = f.p();
        // Band RMS of radial and angular differences over cells touching free nodes.
        let mut a2 = vec![0.0; m];
        let mut b2 = vec![0.0; m];
        let mut any = vec![false; m];
        for i in 0..m {
            let mut count = 0usize;
            for j in 0..n {
                let j1 = (j + 1) % n;
                let ks = [g.index(i, j), g.index(i, j1), g.index(i + 1, j), g.index(i + 1, j1)];
                if ks.iter().all(|&k| fixed[k]) {
                    continue;
                }
                let dr0 = (u[ks[2]] - u[ks[0]]) * f.inv_dr(i);
                let dr1 = (u[ks[3]] - u[ks[1]]) * f.inv_dr(i);
                let da0 = (u[ks[1]] - u[ks[0]]) * f.inv_arc(i);
                let da1 = (u[ks[3]] - u[ks[2]]) * f.inv_arc(i);
                a2[i] += 0.5 * (dr0 * dr0 + dr1 * dr1);
                b2[i] += 0.5 * (da0 * da0 + da1 * da1);
                count += 1;
            }
            if count > 0 {
                a2[i] /= count as f64;
                b2[i] /= count as f64;
                any[i] = true;
            }
        }
        let active: Vec<f64> = (0..m).filter(|&i| any[i]).map(|i| a2[i] + b2[i]).collect();
        let mean_s = if active.is_empty() {
            1.0
        } else {
            active.iter().sum::<f64>() / active.len() as f64
        };
        let floor = (1e-12 * mean_s).max(1e-300);
        let mut h_r = vec![1.0; m];
        let mut h_t = vec![1.0; m];
        for i in 0..m {
            let s = (a2[i] + b2[i]).max(floor);
            let base = if mean_s > 0.0 { p * s.powf(0.5 * p - 1.0) } else { 1.0 };
            let hr = base * (1.0 + (p - 2.0) * a2[i] / s).max(p - 1.0);
            let ht = base * (1.0 + (p - 2.0) * b2[i] / s).max(p - 1.0);
            let top = hr.max(ht);
            h_r[i] = hr.max(1e-3 * top);
            h_t[i] = ht.max(1e-3 * top);
        }
        let c_r: Vec<f64> = (0..m)
            .map(|i| h_r[i] * f.cell_mass(i) * f.inv_dr(i).powi(2))
            .collect();
        let band = |i: usize| h_t[i] * f.cell_mass(i) * f.inv_arc(i).powi(2);
        let c_t: Vec<f64> = (0..=m)
            .map(|i| {
                let lo = if i > 0 { band(i - 1) } else { 0.0 };
                let hi = if i < m { band(i) } else { 0.0 };
                0.5 * (lo + hi)
            })
            .collect();
        let fixed_ring = (0..=m).map(|i| (0..n).all(|j| fixed[g.index(i, j)])).collect();
        let lambda = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                4.0 * s * s
            })
            .collect();
        Self {
            rings: m + 1,
            n,
            fixed_ring,
            fixed: fixed.to_vec(),
            c_r,
            c_t,
            lambda,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// `out = P^{-1} r` restricted to free nodes.
    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let (rings, n) = (self.rings, self.n);
        let mut spec: Vec<Complex64> = r
            .iter()
            .zip(&self.fixed)
            .map(|(&v, &fx)| Complex64::new(if fx { 0.0 } else { v }, 0.0))
            .collect();
        spec.par_chunks_mut(n).for_each(|row| self.forward.process(row));
        // One tridiagonal system per angular mode.
        let columns: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let rhs: Vec<Complex64> = (0..rings).map(|i| spec[i * n + k]).collect();
                self.solve_mode(k, &rhs)
            })
            .collect();
        for (k, col) in columns.iter().enumerate() {
            for i in 0..rings {
                spec[i * n + k] = col[i];
            }
        }
        spec.par_chunks_mut(n).for_each(|row| self.inverse.process(row));
        let scale = 1.0 / n as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = if self.fixed[k] { 0.0 } else { spec[k].re * scale };
        }
    }

    fn solve_mode(&self, k: usize, rhs: &[Complex64]) -> Vec<Complex64> {
        let rings = self.rings;
        let lam = self.lambda[k];
        let mut diag = vec![0.0; rings];
        let mut lower = vec![0.0; rings];
        let mut upper = vec![0.0; rings];
        let mut b = rhs.to_vec();
        for i in 0..rings {
            if self.fixed_ring[i] {
                diag[i] = 1.0;
                b[i] = Complex64::new(0.0, 0.0);
                continue;
            }
            let mut d = self.c_t[i] * lam;
            if i > 0 {
                d += self.c_r[i - 1];
                if !self.fixed_ring[i - 1] {
                    lower[i] = -self.c_r[i - 1];
                }
            }
            if i + 1 < rings {
                d += self.c_r[i];
                if !self.fixed_ring[i + 1] {
                    upper[i] = -self.c_r[i];
                }
            }
            diag[i] = d * (1.0 + 1e-14);
        }
        // Thomas algorithm with real coefficients and complex right-hand side.
        let mut cp = vec![0.0; rings];
        for i in 0..rings {
            let denom = if i > 0 { diag[i] - lower[i] * cp[i - 1] } else { diag[i] };
            cp[i] = upper[i] / denom;
            let prev = if i > 0 { b[i - 1] } else { Complex64::new(0.0, 0.0) };
            b[i] = (b[i] - prev * lower[i]) / denom;
        }
        for i in (0..rings.saturating_sub(1)).rev() {
            let next = b[i + 1];
            b[i] -= next * cp[i];
        }
        b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct StageOutcome {
    x: Vec<f64>,
    energy: f64,
    iterations: usize,
    history: Vec<f64>,
    change: f64,
}

/// Accelerated preconditioned gradient descent with backtracking and
/// function-value restarts; accepted iterates have nonincreasing energy.
fn minimize_stage(
    f: &EnergyFunctional,
    x0: Vec<f64>,
    fixed: &[bool],
    tol: f64,
    max_iterations: usize,
    planner: &mut FftPlanner<f64>,
) -> Result<StageOutcome> {
    let nn = x0.len();
    let mut x = x0;
    let mut ex = f.energy(&x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut step = 1.0f64;
    let mut grad = vec![0.0; nn];
    let mut dir = vec![0.0; nn];
    let mut z = vec![0.0; nn];
    let mut history = vec![ex];
    let mut pre = Preconditioner::new(f, &x, fixed, planner);
    let mut since_refresh = 0usize;
    for it in 1..=max_iterations {
        if since_refresh >= PRECONDITIONER_REFRESH {
            pre = Preconditioner::new(f, &x, fixed, planner);
            since_refresh = 0;
            y.copy_from_slice(&x);
            t = 1.0;
        }
        since_refresh += 1;
        let ey = f.energy_and_gradient(&y, &mut grad);
        for (g, &fx) in grad.iter_mut().zip(fixed) {
            if fx {
                *g = 0.0;
            }
        }
        pre.apply(&grad, &mut dir);
        let gd = dot(&grad, &dir);
        if !(gd > 0.0) {
            // Stationary in the free variables.
            return Ok(StageOutcome {
                x,
                energy: ex,
                iterations: it,
                history,
                change: 0.0,
            });
        }
        let mut accepted = None;
        while step > 1e-14 {
            for k in 0..nn {
                z[k] = y[k] - step * dir[k];
            }
            let ez = f.energy(&z);
            if ez <= ey - 0.5 * step * gd {
                accepted = Some(ez);
                break;
            }
            if 0.5 * step * gd <= 4.0 * f64::EPSILON * ey.abs() {
                // Decrease below rounding of the energy: nothing left to gain.
                accepted = Some(ez.min(ey));
                if ez > ey {
                    z.copy_from_slice(&y);
                }
                break;
            }
            step *= 0.5;
        }
        let Some(ez) = accepted else {
            return Err(Error::Optimizer(format!(
                "backtracking failed to decrease the energy {ey:.17e} (predicted decrease {:.3e})",
                0.5 * step * gd
            )));
        };
        if ez <= ex {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for k in 0..nn {
                let xn = z[k];
                y[k] = xn + beta * (xn - x[k]);
                x[k] = xn;
            }
            t = t_next;
            ex = ez;
        } else {
            // Momentum overshoot: restart from the last accepted iterate.
            y.copy_from_slice(&x);
            t = 1.0;
        }
        history.push(ex);
        step = (step * 1.25).min(4.0);
        if history.len() > STOP_WINDOW {
            let old = history[history.len() - 1 - STOP_WINDOW];
            let change = (old - ex).abs();
            if change <= tol * ex.abs() || ex == 0.0 {
                return Ok(StageOutcome {
                    x,
                    energy: ex,
                    iterations: it,
                    history,
                    change,
                });
            }
        }
    }
    Err(Error::Optimizer(format!(
        "no convergence to relative change {tol:e} within {max_iterations} iterations (energy {ex:.10e})"
    )))
}

/// Minimizes the discrete p-energy subject to `spec.bc`.
pub fn minimize_p_energy(spec: &SolveSpec) -> Result<Solution> {
    spec.validate()?;
    let (fixed, x0) = setup(spec);
    let base = EnergyFunctional::new(&spec.grid, spec.p, spec.kind.into(), &spec.profile)?;
    let mut planner = FftPlanner::new();
    let norms: Vec<(Option<f64>, CellNorm)> = match spec.kind {
        GradNormKind::Euclidean => vec![(None, CellNorm::Euclidean)],
        GradNormKind::FinslerMax => spec.schedule.iter().map(|&q| (Some(q), CellNorm::SmoothMax(q))).collect(),
    };
    let mut x = x0;
    let mut stages = Vec::new();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut last_change = 0.0;
    for (q, norm) in norms {
        let f = base.with_norm(norm);
        let out = minimize_stage(&f, x, &fixed, spec.tol, spec.max_iterations, &mut planner)?;
        x = out.x;
        iterations += out.iterations;
        history.extend(out.history);
        last_change = out.change;
        stages.push(StageReport {
            q,
            energy: out.energy,
            iterations: out.iterations,
        });
    }
    let last = stages.last().expect("at least one stage");
    let (value, extrapolation_error) = match (stages.len(), last.q) {
        (len, Some(q1)) if len >= 2 => {
            let prev = &stages[len - 2];
            let q0 = prev.q.expect("smoothing stage");
            // Linear in 1/q through the last two stages, evaluated at 1/q = 0.
            let slope = (last.energy - prev.energy) / (1.0 / q1 - 1.0 / q0);
            let limit = last.energy - slope / q1;
            (limit, (limit - last.energy).abs())
        }
        _ => (last.energy, 0.0),
    };
    let optimizer_error = last_change.max(spec.tol * value.abs());
    Ok(Solution {
        field: ScalarField::new(spec.grid.clone(), x)?,
        capacity: CapacityResult::variational(value, extrapolation_error + optimizer_error),
        iterations,
        stages,
        history,
    })
}

/// Capacity of `{u >= b}` relative to the grid's outer circle.
///
/// Nodes with `u >= b` (up to a relative `1e-12`) are held at 1 and the outer
/// ring at 0; the remaining nodes are free.
pub fn superlevel_capacity(
    field: &ScalarField,
    b: f64,
    p: f64,
    kind: GradNormKind,
    profile: &MeasureProfile,
    schedule: &[f64],
) -> Result<CapacityResult> {
    let marked = superlevel_mask(field, b);
    if !marked.iter().any(|&m| m) {
        return Err(Error::domain(format!("superlevel set {{u >= {b}}} is empty")));
    }
    let mut spec = SolveSpec::new(
        field.grid().clone(),
        p,
        kind,
        profile.clone(),
        BoundaryCondition::SuperlevelInner(marked),
    );
    spec.schedule = schedule.to_vec();
    Ok(minimize_p_energy(&spec)?.capacity)
}

/// Nodes with `u >= b`, up to a relative `1e-12`.
pub fn superlevel_mask(field: &ScalarField, b: f64) -> Vec<bool> {
    field.values().iter().map(|&v| v >= b * (1.0 - 1e-12)).collect()
}

/// Capacities on a sequence of grids with a Richardson extrapolation.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementStudy {
    pub sizes: Vec<usize>,
    pub energies: Vec<f64>,
    pub extrapolated: f64,
    pub error_estimate: f64,
}

/// Solves `build(m)` for each size and extrapolates assuming second order.
pub fn refinement_study(sizes: &[usize], build: impl Fn(usize) -> Result<SolveSpec>) -> Result<RefinementStudy> {
    if sizes.len() < 2 {
        return Err(Error::domain("refinement study needs at least two grids"));
    }
    let energies = sizes
        .iter()
        .map(|&m| Ok(minimize_p_energy(&build(m)?)?.capacity.value))
        .collect::<Result<Vec<f64>>>()?;
    let (fine, coarse) = (energies[energies.len() - 1], energies[energies.len() - 2]);
    let extrapolated = fine + (fine - coarse) / 3.0;
    Ok(RefinementStudy {
        sizes: sizes.to_vec(),
        energies,
        extrapolated,
        error_estimate: (fine - coarse).abs(),
    })
}

/// Relative variation `max |Φ - Φ̄| / |Φ̄|` of the radial flux
/// `Φ(r) = |u'|^(p-2) u' r^(1+α)` along one ray.
///
/// `u` is the profile along the ray. Returns `+∞` when the mean flux
/// vanishes but the flux does not.
pub fn el_residual_radial(u: impl Fn(f64) -> f64, p: f64, alpha: f64, radii: &[f64]) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("EL residual needs p > 1, got {p}")));
    }
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::domain("EL residual needs positive sample radii"));
    }
    let flux: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let h = 1e-3 * r;
            let d = (-u(r + 2.0 * h) + 8.0 * u(r + h) - 8.0 * u(r - h) + u(r - 2.0 * h)) / (12.0 * h);
            if d == 0.0 {
                return 0.0;
            }
            d.abs().powf(p - 2.0) * d * r.powf(1.0 + alpha)
        })
        .collect();
    let mean = flux.iter().sum::<f64>() / flux.len() as f64;
    let dev = flux.iter().map(|f| (f - mean).abs()).fold(0.0f64, f64::max);
    if mean == 0.0 {
        return Ok(if dev == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(dev / mean.abs())
}
