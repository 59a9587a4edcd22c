//! The explicit Green-function family for the weight `|x|^α` under the
//! ℓ¹-Finsler structure:
//!
//! `u(r, θ) = A (r^-a - R^-a) e^{a f(θ)}` on `B_R`, or `A r^-a e^{a f(θ)}` on
//! the whole plane, with `a = (2 + α - p)/(p - 1)` and `f` 1-Lipschitz on the
//! circle. Every member is p-harmonic off the origin, so different profiles
//! give different Green functions with the same singularity.

use std::f64::consts::PI;

use serde::Serialize;

use crate::capacity::{ring_capacity_radial, CapacityResult};
use crate::error::{Error, Result};
use crate::finsler::{p_energy, GradNormKind, PolarGrid, ScalarField};
use crate::solver::{
    el_residual_radial, minimize_p_energy, superlevel_mask, BoundaryCondition, SolveSpec, DEFAULT_SCHEDULE,
    DEFAULT_TOL,
};
use crate::weights::{MeasureProfile, WeightModel};

/// `a_p = (2 + α - p)/(p - 1)`.
pub fn a_exponent(p: f64, alpha: f64) -> Result<f64> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("candidate needs alpha > -1, got {alpha}")));
    }
    if !(p > 1.0) {
        return Err(Error::domain(format!("candidate needs p > 1, got {p}")));
    }
    if !(p < 2.0 + alpha) {
        return Err(Error::domain(format!(
            "candidate needs p < 2 + alpha = {}, got p = {p}",
            2.0 + alpha
        )));
    }
    Ok((2.0 + alpha - p) / (p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Zero,
    Triangle,
    Custom,
}

/// Periodic 1-Lipschitz function on the circle, sampled at `θ_j = 2πj/N` and
/// linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzProfile {
    samples: Vec<f64>,
    kind: ProfileKind,
}

impl LipschitzProfile {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::build(samples, ProfileKind::Custom)
    }

    fn build(samples: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        let n = samples.len();
        if n < 8 {
            return Err(Error::domain(format!("profile needs at least 8 samples, got {n}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("profile samples must be finite"));
        }
        let dth = 2.0 * PI / n as f64;
        for j in 0..n {
            let jump = (samples[(j + 1) % n] - samples[j]).abs();
            if jump > (1.0 + 1e-12) * dth {
                return Err(Error::domain(format!(
                    "profile is not 1-Lipschitz between samples {j} and {}: slope {}",
                    (j + 1) % n,
                    jump / dth
                )));
            }
        }
        Ok(Self { samples, kind })
    }

    /// `f ≡ 0`.
    pub fn zero(n: usize) -> Result<Self> {
        Self::build(vec![0.0; n], ProfileKind::Zero)
    }

    /// `f(θ) = min(θ, 2π - θ)`; `n` must be even so that `θ = π` is a sample.
    pub fn triangle(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::domain(format!("triangle profile needs an even sample count, got {n}")));
        }
        let dth = 2.0 * PI / n as f64;
        let samples = (0..n).map(|j| (j.min(n - j) as f64) * dth).collect();
        Self::build(samples, ProfileKind::Triangle)
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.samples.len() as f64
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let x = theta.rem_euclid(2.0 * PI) / self.dtheta();
        let j = (x.floor() as usize) % self.len();
        (j, x - x.floor())
    }

    pub fn value(&self, theta: f64) -> f64 {
        let (j, s) = self.locate(theta);
        let n = self.len();
        (1.0 - s) * self.samples[j] + s * self.samples[(j + 1) % n]
    }

    /// `f'` on the segment containing `θ` (right derivative at samples).
    pub fn slope(&self, theta: f64) -> f64 {
        let (j, _) = self.locate(theta);
        (self.samples[(j + 1) % self.len()] - self.samples[j]) / self.dtheta()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Domain of a candidate: the disc `B_R` or the whole plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    Bounded(f64),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenCandidate {
    p: f64,
    alpha: f64,
    extent: Extent,
    profile: LipschitzProfile,
    a_p: f64,
    normalization: Option<f64>,
}

impl GreenCandidate {
    pub fn new(p: f64, alpha: f64, extent: Extent, profile: LipschitzProfile) -> Result<Self> {
        let a_p = a_exponent(p, alpha)?;
        if let Extent::Bounded(r) = extent {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::domain(format!("candidate needs R > 0, got {r}")));
            }
        }
        Ok(Self {
            p,
            alpha,
            extent,
            profile,
            a_p,
            normalization: None,
        })
    }

    /// Multiplies the family member by `a`.
    pub fn with_normalization(mut self, a: f64) -> Self {
        self.normalization = Some(a);
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a_p(&self) -> f64 {
        self.a_p
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    pub fn profile(&self) -> &LipschitzProfile {
        &self.profile
    }

    pub fn normalization(&self) -> Option<f64> {
        self.normalization
    }

    /// `A`, or 1 when not yet normalized.
    pub fn scale(&self) -> f64 {
        self.normalization.unwrap_or(1.0)
    }

    fn outer_power(&self) -> f64 {
        match self.extent {
            Extent::Bounded(r) => r.powf(-self.a_p),
            Extent::Unbounded => 0.0,
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        let inside = match self.extent {
            Extent::Bounded(big) => r > 0.0 && r <= big,
            Extent::Unbounded => r > 0.0 && r.is_finite(),
        };
        if !inside {
            return Err(Error::domain(format!("radius {r} outside the candidate's domain")));
        }
        Ok(())
    }

    pub(crate) fn value_unchecked(&self, r: f64, theta: f64) -> f64 {
        let radial = match self.extent {
            Extent::Bounded(big) if r >= big => 0.0,
            _ => r.powf(-self.a_p) - self.outer_power(),
        };
        self.scale() * radial * (self.a_p * self.profile.value(theta)).exp()
    }

    pub fn eval(&self, r: f64, theta: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(self.value_unchecked(r, theta))
    }

    /// `(∂_r u, ∂_θ u / r)`.
    pub fn partials(&self, r: f64, theta: f64) -> Result<(f64, f64)> {
        self.check_radius(r)?;
        let a = self.a_p;
        let e = (a * self.profile.value(theta)).exp() * self.scale();
        let ur = -a * r.powf(-a - 1.0) * e;
        let ut = (r.powf(-a) - self.outer_power()) * a * self.profile.slope(theta) * e;
        Ok((ur, ut / r))
    }

    /// Radius on the ray `θ` where the candidate equals `level`.
    pub fn level_radius(&self, level: f64, theta: f64) -> Result<f64> {
        if !(level > 0.0) {
            return Err(Error::domain(format!("level must be positive, got {level}")));
        }
        let e = self.scale() * (self.a_p * self.profile.value(theta)).exp();
        Ok((level / e + self.outer_power()).powf(-1.0 / self.a_p))
    }

    /// Largest radius of the superlevel set `{u >= level}`.
    pub fn outer_level_radius(&self, level: f64) -> Result<f64> {
        self.level_radius_at_f(level, self.profile.max())
    }

    /// Smallest radius of the superlevel set boundary.
    pub fn inner_level_radius(&self, level: f64) -> Result<f64> {
        self.level_radius_at_f(level, self.profile.min())
    }

    fn level_radius_at_f(&self, level: f64, f: f64) -> Result<f64> {
        if !(level > 0.0) {
            return Err(Error::domain(format!("level must be positive, got {level}")));
        }
        Ok((level / (self.scale() * (self.a_p * f).exp()) + self.outer_power()).powf(-1.0 / self.a_p))
    }

    /// Nodal samples on `grid`, which must lie inside the domain.
    pub fn sample(&self, grid: &PolarGrid) -> Result<ScalarField> {
        self.check_radius(grid.outer_radius())?;
        ScalarField::from_fn(grid.clone(), |r, t| self.value_unchecked(r, t))
    }
}

/// `u(r, θ)` of the candidate (normalized when a constant is attached).
pub fn eval_candidate(c: &GreenCandidate, r: f64, theta: f64) -> Result<f64> {
    c.eval(r, theta)
}

/// `g_u = A a r^(-a-1) e^{a f(θ)}`, the minimal ℓ¹-Finsler gradient.
pub fn minimal_gradient(c: &GreenCandidate, r: f64, theta: f64) -> Result<f64> {
    c.check_radius(r)?;
    let a = c.a_p;
    Ok(c.scale() * a * r.powf(-a - 1.0) * (a * c.profile.value(theta)).exp())
}

/// `max (|∂_θ u| / r) / |∂_r u|` over the cell centers of `grid`.
pub fn gradient_dominance_check(c: &GreenCandidate, grid: &PolarGrid) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..grid.cells_radial() {
        let r = grid.cell_radius(i);
        for j in 0..grid.angles() {
            let theta = grid.theta(j) + 0.5 * grid.dtheta();
            let (ur, ut) = c.partials(r, theta)?;
            worst = worst.max(ut.abs() / ur.abs());
        }
    }
    Ok(worst)
}

/// Discretization used for every variational computation on candidates.
#[derive(Debug, Clone)]
pub struct VariationalSettings {
    /// Radial cells; the angular count is the profile's sample count.
    pub m: usize,
    pub kind: GradNormKind,
    pub schedule: Vec<f64>,
    pub tol: f64,
}

impl Default for VariationalSettings {
    fn default() -> Self {
        Self {
            m: 128,
            kind: GradNormKind::FinslerMax,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            tol: DEFAULT_TOL,
        }
    }
}

fn power_profile(alpha: f64) -> Result<MeasureProfile> {
    MeasureProfile::new(WeightModel::power(alpha)?)
}

/// Variational capacity of `{u >= b}` in `B_R`.
///
/// The grid runs from the inscribed radius of the superlevel set out to `R`,
/// so its inner ring lies in the set and the hole is part of the plate.
pub fn candidate_superlevel_capacity(c: &GreenCandidate, b: f64, settings: &VariationalSettings) -> Result<CapacityResult> {
    let Extent::Bounded(big_r) = c.extent else {
        return Err(Error::domain("superlevel capacity needs a bounded domain"));
    };
    let r_in = c.inner_level_radius(b)?;
    if !(r_in < big_r) {
        return Err(Error::domain(format!("superlevel set {{u >= {b}}} is empty")));
    }
    let grid = PolarGrid::new(r_in, big_r, settings.m, c.profile.len())?;
    let field = c.sample(&grid)?;
    let mut spec = SolveSpec::new(
        grid,
        c.p,
        settings.kind,
        power_profile(c.alpha)?,
        BoundaryCondition::SuperlevelInner(Vec::new()),
    );
    spec.schedule = settings.schedule.clone();
    spec.tol = settings.tol;
    superlevel_capacity_with(&field, b, spec)
}

fn superlevel_capacity_with(field: &ScalarField, b: f64, spec: SolveSpec) -> Result<CapacityResult> {
    let marked = superlevel_mask(field, b);
    if !marked.iter().any(|&m| m) {
        return Err(Error::domain(format!("superlevel set {{u >= {b}}} is empty")));
    }
    let spec = SolveSpec {
        bc: BoundaryCondition::SuperlevelInner(marked),
        ..spec
    };
    Ok(minimize_p_energy(&spec)?.capacity)
}

/// One level of a normalization run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelNormalization {
    pub level: f64,
    pub capacity: f64,
    /// `capacity^(1/(1-p)) / level`.
    pub a: f64,
}

#[derive(Debug, Clone)]
pub struct Normalization {
    pub candidate: GreenCandidate,
    pub levels: Vec<LevelNormalization>,
    pub a: f64,
    /// `(max - min) / mean` of the per-level constants.
    pub spread: f64,
}

/// Per-level normalization constants without the consistency check.
pub fn normalization_levels(c: &GreenCandidate, levels: &[f64], settings: &VariationalSettings) -> Result<Normalization> {
    if levels.len() < 2 {
        return Err(Error::domain("normalization needs at least two levels"));
    }
    if matches!(c.extent, Extent::Unbounded) {
        return Err(Error::domain("normalization needs a bounded domain"));
    }
    let p = c.p;
    let per_level = levels
        .iter()
        .map(|&t| {
            let cap = candidate_superlevel_capacity(c, t, settings)?.value;
            Ok(LevelNormalization {
                level: t,
                capacity: cap,
                a: cap.powf(1.0 / (1.0 - p)) / t,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = per_level.iter().map(|l| l.a).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Normalization {
        candidate: c.clone().with_normalization(c.scale() * mean),
        levels: per_level,
        a: mean,
        spread: (hi - lo) / mean,
    })
}

/// Largest tolerated relative spread of per-level normalization constants.
pub const NORMALIZATION_SPREAD: f64 = 0.02;

/// Finds `A` with `cap({A u >= b}) = b^(1-p)` from several levels and checks
/// that the levels agree.
pub fn normalize_to_green(c: &GreenCandidate, levels: &[f64], settings: &VariationalSettings) -> Result<Normalization> {
    let n = normalization_levels(c, levels, settings)?;
    if n.spread > NORMALIZATION_SPREAD {
        return Err(Error::Normalization {
            spread: n.spread,
            bound: NORMALIZATION_SPREAD,
        });
    }
    Ok(n)
}

/// Levels whose superlevel sets reach out exactly to the given radii.
pub fn levels_for_radii(c: &GreenCandidate, radii: &[f64]) -> Result<Vec<f64>> {
    radii
        .iter()
        .map(|&rho| {
            c.check_radius(rho)?;
            let radial = rho.powf(-c.a_p) - c.outer_power();
            Ok(c.scale() * radial * (c.a_p * c.profile.max()).exp())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioPoint {
    pub r: f64,
    /// `min_θ u(r, θ)`.
    pub m: f64,
    /// `max_θ u(r, θ)`.
    #[serde(rename = "M")]
    pub big_m: f64,
    /// `cap_p(B_r, B_Rcap)^(1/(1-p))`.
    pub cap_term: f64,
    pub upper_ratio: f64,
    pub lower_ratio: f64,
}

/// Circle extrema of `u` against the ball-capacity term, for each radius.
pub fn ratio_trace(c: &GreenCandidate, radii: &[f64], r_cap: f64) -> Result<Vec<RatioPoint>> {
    if let Extent::Bounded(big) = c.extent {
        if r_cap > big {
            return Err(Error::domain(format!("reference radius {r_cap} exceeds the domain radius {big}")));
        }
    }
    let profile = power_profile(c.alpha)?;
    let n = c.profile.len();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0 && r < r_cap) {
                return Err(Error::domain(format!("ratio trace needs 0 < r < R_cap, got r = {r}")));
            }
            let vals: Vec<f64> = (0..n)
                .map(|j| c.eval(r, 2.0 * PI * j as f64 / n as f64))
                .collect::<Result<_>>()?;
            let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let big_m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cap = ring_capacity_radial(&profile, c.p, r, r_cap)?.value;
            let cap_term = cap.powf(1.0 / (1.0 - c.p));
            Ok(RatioPoint {
                r,
                m,
                big_m,
                cap_term,
                upper_ratio: big_m / cap_term,
                lower_ratio: m / cap_term,
            })
        })
        .collect()
}

/// Same as [`ratio_trace`] for a solved field, sampled at the grid angles.
pub fn ratio_trace_field(field: &ScalarField, p: f64, alpha: f64, radii: &[f64], r_cap: f64) -> Result<Vec<RatioPoint>> {
    let profile = power_profile(alpha)?;
    let g = field.grid();
    radii
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = (0..g.angles())
                .map(|j| {
                    field
                        .interpolate(r, g.theta(j))
                        .ok_or_else(|| Error::domain(format!("radius {r} outside the field's grid")))
                })
                .collect::<Result<_>>()?;
            let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let big_m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let cap_term = ring_capacity_radial(&profile, p, r, r_cap)?.value.powf(1.0 / (1.0 - p));
            Ok(RatioPoint {
                r,
                m,
                big_m,
                cap_term,
                upper_ratio: big_m / cap_term,
                lower_ratio: m / cap_term,
            })
        })
        .collect()
}

/// A named numeric check with its bound.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value <= bound,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            passed: value >= bound,
        }
    }
}

fn refusal(checks: &[Check]) -> Option<String> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")))
}

#[derive(Debug, Clone)]
pub struct WitnessSettings {
    pub variational: VariationalSettings,
    /// Probe circle radius as a fraction of `R`.
    pub probe_fraction: f64,
    pub distinctness: f64,
    pub el_bound: f64,
    pub dominance_slack: f64,
    pub normalization_tol: f64,
    pub rays: usize,
}

impl Default for WitnessSettings {
    fn default() -> Self {
        Self {
            variational: VariationalSettings::default(),
            probe_fraction: 0.3,
            distinctness: 0.1,
            el_bound: 1e-6,
            dominance_slack: 1e-6,
            normalization_tol: 0.05,
            rays: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub accepted: bool,
    pub checks: Vec<Check>,
    pub distinctness: f64,
    /// Normalization constants of the two candidates.
    pub normalizations: [f64; 2],
    pub refused: Option<String>,
}

/// Certifies that two profiles give two distinct normalized Green functions.
pub fn nonuniqueness_witness(
    p: f64,
    alpha: f64,
    big_r: f64,
    f1: &LipschitzProfile,
    f2: &LipschitzProfile,
    settings: &WitnessSettings,
) -> Result<WitnessReport> {
    let raw = [
        GreenCandidate::new(p, alpha, Extent::Bounded(big_r), f1.clone())?,
        GreenCandidate::new(p, alpha, Extent::Bounded(big_r), f2.clone())?,
    ];
    let mut checks = Vec::new();
    let mut normalized = Vec::new();
    let radii: Vec<f64> = (0..16).map(|k| big_r * 0.05 * 18f64.powf(k as f64 / 15.0)).collect();
    let dominance_grid = PolarGrid::new(1e-2 * big_r, big_r, settings.variational.m, 2 * f1.len().max(f2.len()))?;
    for (k, c) in raw.iter().enumerate() {
        let tag = format!("candidate_{}", k + 1);
        let levels = levels_for_radii(c, &[big_r / 4.0, big_r / 8.0])?;
        let norm = normalization_levels(c, &levels, &settings.variational)?;
        checks.push(Check::at_most(format!("{tag}.normalization_spread"), norm.spread, NORMALIZATION_SPREAD));
        let nc = norm.candidate;
        let el = (0..settings.rays)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / settings.rays as f64;
                el_residual_radial(|r| nc.value_unchecked(r, theta), p, alpha, &radii)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        checks.push(Check::at_most(format!("{tag}.el_residual"), el, settings.el_bound));
        let dom = gradient_dominance_check(&nc, &dominance_grid)?;
        checks.push(Check::at_most(format!("{tag}.gradient_dominance"), dom, 1.0 + settings.dominance_slack));
        let cap = candidate_superlevel_capacity(&nc, 1.0, &settings.variational)?.value;
        checks.push(Check::at_most(
            format!("{tag}.superlevel_normalization"),
            (cap - 1.0).abs(),
            settings.normalization_tol,
        ));
        normalized.push(nc);
    }
    let probe = settings.probe_fraction * big_r;
    let samples = 4 * f1.len().max(f2.len());
    let distinctness = (0..samples)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / samples as f64;
            let (a, b) = (normalized[0].value_unchecked(probe, theta), normalized[1].value_unchecked(probe, theta));
            (a - b).abs() / a.max(b)
        })
        .fold(0.0f64, f64::max);
    checks.push(Check::at_least("distinctness", distinctness, settings.distinctness));
    let refused = refusal(&checks);
    Ok(WitnessReport {
        accepted: refused.is_none(),
        checks,
        distinctness,
        normalizations: [normalized[0].scale(), normalized[1].scale()],
        refused,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityCheck {
    pub inner_radius: f64,
    /// Max-norm energy of `v = u2 - u1` sampled on the annulus grid.
    pub energy_v: f64,
    /// Energy of the Dirichlet minimizer with `v`'s boundary values.
    pub energy_solved: f64,
    /// `(energy_v - energy_solved) / energy_v`.
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub accepted: bool,
    pub checks: Vec<Check>,
    /// Angles (grid indices) where `u1 = u2` on every interior ring.
    pub equality_rays: Vec<usize>,
    pub nonlinearity: Option<NonlinearityCheck>,
    pub refused: Option<String>,
}

/// Settings for [`comparison_witness`].
#[derive(Debug, Clone)]
pub struct ComparisonSettings {
    /// Inner radius of the grid used for the ordering check.
    pub r_min: f64,
    /// Annulus `[annulus_inner, 1]` for the nonlinearity check at `p = 2`.
    pub annulus_inner: f64,
    pub m: usize,
    pub energy_gap: f64,
    pub schedule: Vec<f64>,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        Self {
            r_min: 1e-2,
            annulus_inner: 0.05,
            m: 128,
            energy_gap: 0.01,
            schedule: DEFAULT_SCHEDULE.to_vec(),
        }
    }
}

/// Failure of the strong comparison principle: `u1` (zero profile) and
/// `u2` (profile `f2`) on the unit disc touch exactly on the ray `θ = 0`.
/// At `p = 2` also certifies that `u2 - u1` is not 2-harmonic.
pub fn comparison_witness(p: f64, alpha: f64, f2: &LipschitzProfile, settings: &ComparisonSettings) -> Result<ComparisonReport> {
    let n = f2.len();
    let u1 = GreenCandidate::new(p, alpha, Extent::Bounded(1.0), LipschitzProfile::zero(n)?)?;
    let u2 = GreenCandidate::new(p, alpha, Extent::Bounded(1.0), f2.clone())?;
    let grid = PolarGrid::new(settings.r_min, 1.0, settings.m, n)?;
    let (a, b) = (u1.sample(&grid)?, u2.sample(&grid)?);
    let mut below = true;
    let mut equal_on = vec![true; n];
    let mut strict_on = vec![true; n];
    // The outer ring carries zero boundary values for both and is excluded.
    for i in 0..grid.cells_radial() {
        for j in 0..n {
            let (x, y) = (a.at(i, j), b.at(i, j));
            below &= x <= y;
            let tie = (y - x).abs() <= 1e-12 * x.abs();
            equal_on[j] &= tie;
            strict_on[j] &= !tie && y > x;
        }
    }
    let equality_rays: Vec<usize> = (0..n).filter(|&j| equal_on[j]).collect();
    let strict_elsewhere = (0..n).all(|j| equal_on[j] || strict_on[j]);
    let mut checks = vec![
        Check::at_most("ordering_violation", if below { 0.0 } else { 1.0 }, 0.0),
        Check::at_most(
            "equality_set_mismatch",
            if equality_rays == [0] { 0.0 } else { 1.0 },
            0.0,
        ),
        Check::at_most("strictness_violation", if strict_elsewhere && equality_rays.len() < n { 0.0 } else { 1.0 }, 0.0),
    ];
    let nonlinearity = if (p - 2.0).abs() < 1e-12 {
        let annulus = PolarGrid::new(settings.annulus_inner, 1.0, settings.m, n)?;
        let (va, vb) = (u1.sample(&annulus)?, u2.sample(&annulus)?);
        let v = ScalarField::new(
            annulus.clone(),
            vb.values().iter().zip(va.values()).map(|(y, x)| y - x).collect(),
        )?;
        let profile = power_profile(alpha)?;
        let energy_v = p_energy(&v, p, GradNormKind::FinslerMax, &profile)?;
        let mut spec = SolveSpec::new(annulus, p, GradNormKind::FinslerMax, profile, BoundaryCondition::Dirichlet(v));
        spec.schedule = settings.schedule.clone();
        let energy_solved = minimize_p_energy(&spec)?.capacity.value;
        let gap = (energy_v - energy_solved) / energy_v;
        checks.push(Check::at_least("energy_gap", gap, settings.energy_gap));
        Some(NonlinearityCheck {
            inner_radius: settings.annulus_inner,
            energy_v,
            energy_solved,
            gap,
        })
    } else {
        None
    };
    let refused = refusal(&checks);
    Ok(ComparisonReport {
        accepted: refused.is_none(),
        checks,
        equality_rays,
        nonlinearity,
        refused,
    })
}
