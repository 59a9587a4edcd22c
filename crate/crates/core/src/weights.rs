//! Radial weights on the plane and their ball-measure profiles.
//!
//! All radii are handled through `t = log2(rho)`. The oscillating weight has
//! breakpoints `alpha_k = 2^(-lambda^k)`, which leave the range of `f64`
//! after three or four generations, so its formulas are evaluated on `t`
//! directly and measures are carried as `log2 mu`.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::{log2_add, log2_integral, log2_power_integral, log2_sub};

/// Ambient dimension. Only the plane is supported.
pub const DIM: f64 = 2.0;

/// Relative tolerance for all measure quadratures.
pub const QUAD_TOL: f64 = 1e-11;

/// Deepest generation supported by default for the oscillating weight.
pub const DEFAULT_MAX_GENERATION: usize = 20;

fn log2_two_pi() -> f64 {
    (2.0 * PI).log2()
}

/// Parameters of the oscillating weight built from exponents `1 < a < b < c < d`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatingParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    lambda: f64,
    max_generation: usize,
}

/// A maximal interval of `t` on which `w(rho) * rho = 2^log2_coef * rho^(exponent - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPiece {
    pub start: f64,
    pub end: f64,
    pub log2_coef: f64,
    pub exponent: f64,
}

impl PowerPiece {
    fn log2_weight(&self, t: f64) -> f64 {
        self.log2_coef + (self.exponent - DIM) * t
    }

    fn log2_mass(&self, t0: f64, t1: f64) -> f64 {
        self.log2_coef + log2_power_integral(self.exponent, t0, t1)
    }
}

impl OscillatingParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(1.0 < a && a < b && b < c && c < d) || !d.is_finite() {
            return Err(Error::domain(format!(
                "oscillating weight needs 1 < a < b < c < d, got ({a}, {b}, {c}, {d})"
            )));
        }
        let lambda = (c - a) * (d - b) / ((b - a) * (d - c));
        Ok(Self {
            a,
            b,
            c,
            d,
            lambda,
            max_generation: DEFAULT_MAX_GENERATION,
        })
    }

    pub fn with_max_generation(mut self, k: usize) -> Self {
        self.max_generation = k;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn max_generation(&self) -> usize {
        self.max_generation
    }

    /// `log2 alpha_k = -lambda^k`.
    pub fn log2_alpha(&self, k: usize) -> f64 {
        -self.lambda.powi(k as i32)
    }

    /// `log2 beta_k = (d-b)/(d-c) * log2 alpha_k`.
    pub fn log2_beta(&self, k: usize) -> f64 {
        self.log2_alpha(k) * (self.d - self.b) / (self.d - self.c)
    }

    /// Smallest `t` covered by the supported generations.
    pub fn log2_floor(&self) -> f64 {
        self.log2_alpha(self.max_generation + 1)
    }

    /// Generation `k` with `log2 alpha_{k+1} <= t < log2 alpha_k`, or `None`
    /// on the outer constant part `t >= log2 alpha_0`.
    pub fn generation_of(&self, t: f64) -> Option<usize> {
        if t >= self.log2_alpha(0) {
            return None;
        }
        let mut k = ((-t).ln() / self.lambda.ln()).floor().max(0.0) as usize;
        while self.log2_alpha(k + 1) > t {
            k += 1;
        }
        while k > 0 && self.log2_alpha(k) <= t {
            k -= 1;
        }
        Some(k)
    }

    /// The power piece containing `t`, chosen so that `t` lies in `(start, end]`.
    pub fn piece_at(&self, t: f64) -> PowerPiece {
        let n = DIM;
        match self.generation_of(t) {
            None => {
                let ta0 = self.log2_alpha(0);
                // A breakpoint exactly at alpha_0 belongs to the piece below.
                if t == ta0 {
                    return self.d_piece(0);
                }
                PowerPiece {
                    start: ta0,
                    end: f64::INFINITY,
                    log2_coef: (self.b - n) * ta0,
                    exponent: n,
                }
            }
            Some(k) => {
                let tb = self.log2_beta(k);
                if t > tb {
                    self.d_piece(k)
                } else if t == self.log2_alpha(k + 1) {
                    self.d_piece(k + 1)
                } else {
                    self.a_piece(k)
                }
            }
        }
    }

    fn d_piece(&self, k: usize) -> PowerPiece {
        let tb = self.log2_beta(k);
        PowerPiece {
            start: tb,
            end: self.log2_alpha(k),
            log2_coef: (self.c - self.d) * tb,
            exponent: self.d,
        }
    }

    fn a_piece(&self, k: usize) -> PowerPiece {
        let tb = self.log2_beta(k);
        PowerPiece {
            start: self.log2_alpha(k + 1),
            end: tb,
            log2_coef: (self.c - self.a) * tb,
            exponent: self.a,
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < self.log2_floor() {
            return Err(Error::GenerationRange {
                what: format!("log2 rho = {t:e} lies below log2 alpha_(K+1) = {:e}", self.log2_floor()),
                deepest_generation: self.max_generation,
            });
        }
        Ok(())
    }

    /// `log2 ∫_0^{2^t} w(rho) rho d rho`, summing power pieces downward until
    /// the remainder is negligible.
    fn log2_mass_below(&self, t: f64) -> f64 {
        let mut total = f64::NEG_INFINITY;
        let mut cursor = t;
        let start_generation = self.generation_of(t).unwrap_or(0);
        for _ in 0..100_000 {
            let piece = self.piece_at(cursor);
            let term = piece.log2_mass(piece.start, cursor);
            total = log2_add(total, term);
            let generation = self.generation_of(piece.start).unwrap_or(0);
            if generation >= start_generation + 2 && term < total - 120.0 {
                break;
            }
            if !piece.start.is_finite() || piece.start < -1e300 {
                break;
            }
            cursor = piece.start;
        }
        total
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let ta = self.log2_alpha(k);
            let tb = self.log2_beta(k);
            if ta < t0 || !ta.is_finite() {
                break;
            }
            for t in [ta, tb] {
                if t > t0 && t < t1 {
                    out.push(t);
                }
            }
            k += 1;
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Pointwise multiplier of a perturbed weight, evaluated on `log2 rho`.
pub type Multiplier = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial weight `w(rho)` on the plane.
#[derive(Clone)]
pub enum WeightModel {
    /// `w(rho) = rho^alpha`, `alpha > -1`.
    Power { alpha: f64 },
    /// Doubly-exponentially oscillating weight with exponents `a < b < c < d`.
    Oscillating(OscillatingParams),
    /// `base * multiplier`, with the multiplier declared to lie in
    /// `[factor_low, factor_high]`.
    Perturbed {
        base: Box<WeightModel>,
        multiplier: Multiplier,
        factor_low: f64,
        factor_high: f64,
    },
}

impl fmt::Debug for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightModel::Power { alpha } => f.debug_struct("Power").field("alpha", alpha).finish(),
            WeightModel::Oscillating(p) => f.debug_tuple("Oscillating").field(p).finish(),
            WeightModel::Perturbed {
                base,
                factor_low,
                factor_high,
                ..
            } => f
                .debug_struct("Perturbed")
                .field("base", base)
                .field("factor_low", factor_low)
                .field("factor_high", factor_high)
                .finish_non_exhaustive(),
        }
    }
}

impl fmt::Display for WeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightModel::Power { alpha } => write!(f, "power:{alpha}"),
            WeightModel::Oscillating(p) => write!(f, "osc:{},{},{},{}", p.a, p.b, p.c, p.d),
            WeightModel::Perturbed {
                base,
                factor_low,
                factor_high,
                ..
            } => write!(f, "perturbed({base};{factor_low},{factor_high})"),
        }
    }
}

impl FromStr for WeightModel {
    type Err = Error;

    /// Parses `power:<alpha>` or `osc:<a>,<b>,<c>,<d>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("weight spec `{s}` has no `kind:` prefix")))?;
        let numbers = args
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("weight spec `{s}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match (kind.trim(), numbers.as_slice()) {
            ("power", [alpha]) => WeightModel::power(*alpha),
            ("osc", [a, b, c, d]) => WeightModel::oscillating(*a, *b, *c, *d),
            _ => Err(Error::Parse(format!(
                "weight spec `{s}`: expected `power:<alpha>` or `osc:<a>,<b>,<c>,<d>`"
            ))),
        }
    }
}

impl WeightModel {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > -1.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("power weight needs alpha > -1, got {alpha}")));
        }
        Ok(WeightModel::Power { alpha })
    }

    pub fn oscillating(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Ok(WeightModel::Oscillating(OscillatingParams::new(a, b, c, d)?))
    }

    pub fn perturbed(
        base: WeightModel,
        multiplier: Multiplier,
        factor_low: f64,
        factor_high: f64,
    ) -> Result<Self> {
        if !(factor_low > 0.0 && factor_low <= factor_high && factor_high.is_finite()) {
            return Err(Error::domain(format!(
                "perturbation bounds need 0 < low <= high, got [{factor_low}, {factor_high}]"
            )));
        }
        Ok(WeightModel::Perturbed {
            base: Box::new(base),
            multiplier,
            factor_low,
            factor_high,
        })
    }

    /// The power-law exponent of `w`, when it is a pure power.
    pub fn power_alpha(&self) -> Option<f64> {
        match self {
            WeightModel::Power { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// Smallest `log2 rho` at which the model may be evaluated.
    pub fn log2_floor(&self) -> f64 {
        match self {
            WeightModel::Power { .. } => f64::NEG_INFINITY,
            WeightModel::Oscillating(p) => p.log2_floor(),
            WeightModel::Perturbed { base, .. } => base.log2_floor(),
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        match self {
            WeightModel::Power { .. } => Ok(()),
            WeightModel::Oscillating(p) => p.check_range(t),
            WeightModel::Perturbed { base, .. } => base.check_range(t),
        }
    }

    /// Kinks of `w` strictly inside `(t0, t1)`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            WeightModel::Power { .. } => Vec::new(),
            WeightModel::Oscillating(p) => p.breakpoints(t0, t1),
            WeightModel::Perturbed { base, .. } => base.breakpoints(t0, t1),
        }
    }

    /// `log2 w(2^t)` with no range check; perturbation multipliers are clamped
    /// to their declared bounds.
    pub(crate) fn log2_weight_unchecked(&self, t: f64) -> f64 {
        match self {
            WeightModel::Power { alpha } => alpha * t,
            WeightModel::Oscillating(p) => p.piece_at(t).log2_weight(t),
            WeightModel::Perturbed {
                base,
                multiplier,
                factor_low,
                factor_high,
            } => {
                let m = multiplier(t).clamp(*factor_low, *factor_high);
                base.log2_weight_unchecked(t) + m.log2()
            }
        }
    }

    /// `log2 w(2^t)`.
    pub fn log2_weight(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        if let WeightModel::Perturbed {
            multiplier,
            factor_low,
            factor_high,
            ..
        } = self
        {
            let m = multiplier(t);
            if !(m >= *factor_low && m <= *factor_high) {
                return Err(Error::domain(format!(
                    "perturbation multiplier {m} at log2 rho = {t} outside declared [{factor_low}, {factor_high}]"
                )));
            }
        }
        Ok(self.log2_weight_unchecked(t))
    }

    /// `w(rho)`.
    pub fn weight_at(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::domain(format!("weight evaluated at rho = {rho}; need rho > 0")));
        }
        Ok(self.log2_weight(rho.log2())?.exp2())
    }

    /// `log2 ∫_{2^t0}^{2^t1} w(rho) rho d rho`.
    pub fn log2_radial_mass(&self, t0: f64, t1: f64) -> Result<f64> {
        if !(t1 >= t0) {
            return Err(Error::domain(format!("radial mass over reversed band [{t0}, {t1}]")));
        }
        self.check_range(t0)?;
        Ok(self.log2_radial_mass_unchecked(t0, t1))
    }

    pub(crate) fn log2_radial_mass_unchecked(&self, t0: f64, t1: f64) -> f64 {
        if t1 == t0 {
            return f64::NEG_INFINITY;
        }
        match self {
            WeightModel::Power { alpha } => log2_power_integral(alpha + DIM, t0, t1),
            WeightModel::Oscillating(p) => {
                let mut total = f64::NEG_INFINITY;
                let mut cursor = t1;
                while cursor > t0 {
                    let piece = p.piece_at(cursor);
                    let lo = piece.start.max(t0);
                    total = log2_add(total, piece.log2_mass(lo, cursor));
                    cursor = lo;
                }
                total
            }
            WeightModel::Perturbed { .. } => {
                let mut nodes = vec![t0];
                nodes.extend(self.breakpoints(t0, t1));
                nodes.push(t1);
                log2_integral(
                    |t| self.log2_weight_unchecked(t) + DIM * t + LN_2.log2(),
                    &nodes,
                    QUAD_TOL,
                )
                .log2_value
            }
        }
    }

    /// `log2 ∫_0^{2^t} w(rho) rho d rho` computed from scratch.
    pub(crate) fn log2_mass_below_unchecked(&self, t: f64) -> f64 {
        match self {
            WeightModel::Power { alpha } => t * (alpha + DIM) - (alpha + DIM).log2(),
            WeightModel::Oscillating(p) => p.log2_mass_below(t),
            WeightModel::Perturbed {
                base, factor_high, ..
            } => {
                // Integrate down until the base mass, inflated by the upper
                // bound, is negligible.
                let target = base.log2_mass_below_unchecked(t) - 80.0;
                let mut floor = t - 1.0;
                while base.log2_mass_below_unchecked(floor) + factor_high.log2() > target {
                    floor -= (t - floor).max(1.0);
                }
                let seed = base.log2_mass_below_unchecked(floor) + factor_high.log2();
                log2_add(seed, self.log2_radial_mass_unchecked(floor, t))
            }
        }
    }
}

/// Sampling window for exponent estimation, in `log2 r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRange {
    pub log2_r_min: f64,
    pub log2_r_max: f64,
    pub samples: usize,
}

impl ScaleRange {
    pub fn new(log2_r_min: f64, log2_r_max: f64, samples: usize) -> Self {
        Self {
            log2_r_min,
            log2_r_max,
            samples,
        }
    }

    /// Span in decades.
    pub fn decades(&self) -> f64 {
        (self.log2_r_max - self.log2_r_min) * 2f64.log10()
    }

    /// Generations `k0..=k1` of an oscillating weight: `[alpha_{k1+1}, alpha_{k0}]`.
    pub fn generations(p: &OscillatingParams, k0: usize, k1: usize, samples: usize) -> Self {
        Self::new(p.log2_alpha(k1 + 1), p.log2_alpha(k0), samples)
    }

    /// A sensible default window below radius 1.
    pub fn default_for(model: &WeightModel) -> Self {
        match model {
            WeightModel::Power { .. } => Self::new(-40.0, 0.0, 161),
            WeightModel::Oscillating(p) => Self::generations(p, 0, 3, 513),
            WeightModel::Perturbed { base, .. } => Self::default_for(base),
        }
    }
}

/// Estimated endpoints of the lower and upper exponent sets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExponentWindow {
    /// Smallest sampled log-log slope of `mu(B_r)`; estimates `sup Q_lower`.
    pub q_lower_sup: f64,
    /// Largest sampled log-log slope; estimates `inf Q_upper`.
    pub q_upper_inf: f64,
}

/// Cumulative `log2 mu(B_r)` over a mesh of `log2 r`, with `mu(B_r) = 2π ∫_0^r w ρ dρ`.
#[derive(Debug, Clone)]
pub struct MeasureProfile {
    model: WeightModel,
    log2_r: Vec<f64>,
    log2_mu: Vec<f64>,
    tolerance: f64,
}

impl MeasureProfile {
    /// Profile over the model's default range: `[-64, 8]` for power weights,
    /// from the deepest supported generation up to `8` for oscillating ones.
    pub fn new(model: WeightModel) -> Result<Self> {
        let lo = match model.log2_floor() {
            f if f.is_finite() => f,
            _ => -64.0,
        };
        Self::with_range(model, lo, 8.0)
    }

    pub fn with_range(model: WeightModel, log2_r_min: f64, log2_r_max: f64) -> Result<Self> {
        if !(log2_r_max > log2_r_min) {
            return Err(Error::domain("profile range must be nondegenerate"));
        }
        model.check_range(log2_r_min)?;
        let mut mesh = vec![log2_r_min];
        let breaks = model.breakpoints(log2_r_min, log2_r_max);
        let mut edges = vec![log2_r_min];
        edges.extend(&breaks);
        edges.push(log2_r_max);
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            // Quarter-octave steps on moderate pieces; 16 subdivisions on huge ones.
            let n = (((b - a) * 4.0).ceil() as usize).clamp(1, 16.max(((b - a) * 4.0).min(4096.0) as usize));
            let n = if b - a > 1024.0 { 16 } else { n };
            for i in 1..=n {
                mesh.push(a + (b - a) * i as f64 / n as f64);
            }
        }
        mesh.dedup();
        let mut log2_mu = Vec::with_capacity(mesh.len());
        match &model {
            WeightModel::Perturbed { .. } => {
                let mut acc = model.log2_mass_below_unchecked(mesh[0]);
                log2_mu.push(acc + log2_two_pi());
                for w in mesh.windows(2) {
                    acc = log2_add(acc, model.log2_radial_mass_unchecked(w[0], w[1]));
                    log2_mu.push(acc + log2_two_pi());
                }
            }
            _ => {
                for &t in &mesh {
                    log2_mu.push(model.log2_mass_below_unchecked(t) + log2_two_pi());
                }
            }
        }
        Ok(Self {
            model,
            log2_r: mesh,
            log2_mu,
            tolerance: QUAD_TOL,
        })
    }

    pub fn model(&self) -> &WeightModel {
        &self.model
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn log2_range(&self) -> (f64, f64) {
        (self.log2_r[0], *self.log2_r.last().expect("non-empty mesh"))
    }

    /// Mesh nodes `(log2 r, log2 mu(B_r))`.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.log2_r.iter().copied().zip(self.log2_mu.iter().copied())
    }

    fn check(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.log2_range();
        if !(t >= lo && t <= hi) {
            return Err(Error::Range(format!(
                "log2 r = {t} outside the profile mesh [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// `log2 mu(B_r)` at `t = log2 r`.
    pub fn log2_mu(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.log2_mu_unchecked(t))
    }

    pub(crate) fn log2_mu_unchecked(&self, t: f64) -> f64 {
        match &self.model {
            WeightModel::Perturbed { .. } => {
                let i = self.log2_r.partition_point(|&x| x <= t).saturating_sub(1);
                let node = self.log2_r[i];
                if node == t {
                    return self.log2_mu[i];
                }
                log2_add(
                    self.log2_mu[i],
                    self.model.log2_radial_mass_unchecked(node, t) + log2_two_pi(),
                )
            }
            _ => self.model.log2_mass_below_unchecked(t) + log2_two_pi(),
        }
    }

    /// Measure of balls near `2^anchor`, parametrized by the offset `x = log2 r - anchor`.
    ///
    /// Offsets are exact small numbers even when `anchor` is of order `1e12`,
    /// so integrands built on this stay accurate deep in the oscillating
    /// generations. Valid for `x` in `[start - anchor, 0]` where `start` is the
    /// beginning of the power piece containing `anchor`. `None` for perturbed
    /// models, which have no power pieces.
    pub(crate) fn local_measure(&self, anchor: f64) -> Option<LocalMeasure> {
        let piece = match &self.model {
            WeightModel::Power { alpha } => PowerPiece {
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
                log2_coef: 0.0,
                exponent: alpha + DIM,
            },
            WeightModel::Oscillating(p) => p.piece_at(anchor),
            WeightModel::Perturbed { .. } => return None,
        };
        let below = if piece.start.is_finite() {
            self.model.log2_mass_below_unchecked(piece.start)
        } else {
            f64::NEG_INFINITY
        };
        Some(LocalMeasure {
            anchor,
            piece,
            log2_rest: below - piece.log2_coef - piece.exponent * anchor,
        })
    }

    /// `mu(B_r)`.
    pub fn mu_ball(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("mu_ball needs r > 0, got {r}")));
        }
        Ok(self.log2_mu(r.log2())?.exp2())
    }

    /// `log2 mu(B_R \ B_r)` for the annulus between `2^t0` and `2^t1`.
    pub fn log2_annulus(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check(t0)?;
        self.check(t1)?;
        Ok(self.model.log2_radial_mass_unchecked(t0, t1) + log2_two_pi())
    }

    /// Min/max log-log slope of `mu(B_r)` over all sampled pairs `r < R`.
    pub fn exponent_window(&self, scale: ScaleRange) -> Result<ExponentWindow> {
        if scale.decades() < 3.0 || scale.samples < 2 || !(scale.log2_r_max > scale.log2_r_min) {
            return Err(Error::domain(format!(
                "scale range must span at least 3 decades with >= 2 samples, got {:.3} decades / {} samples",
                scale.decades(),
                scale.samples
            )));
        }
        let mut ts: Vec<f64> = (0..scale.samples)
            .map(|i| {
                scale.log2_r_min
                    + (scale.log2_r_max - scale.log2_r_min) * i as f64 / (scale.samples - 1) as f64
            })
            .collect();
        ts.extend(self.model.breakpoints(scale.log2_r_min, scale.log2_r_max));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let logs = ts
            .iter()
            .map(|&t| self.log2_mu(t))
            .collect::<Result<Vec<f64>>>()?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..ts.len() {
            for j in i + 1..ts.len() {
                let slope = (logs[j] - logs[i]) / (ts[j] - ts[i]);
                lo = lo.min(slope);
                hi = hi.max(slope);
            }
        }
        Ok(ExponentWindow {
            q_lower_sup: lo,
            q_upper_inf: hi,
        })
    }
}

/// See [`MeasureProfile::local_measure`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalMeasure {
    anchor: f64,
    piece: PowerPiece,
    log2_rest: f64,
}

impl LocalMeasure {
    /// Offset of the piece start from the anchor (`-inf` for pure powers).
    pub(crate) fn start_offset(&self) -> f64 {
        self.piece.start - self.anchor
    }

    /// `log2 mu(B_{2^(anchor + x)}) - q * anchor`.
    pub(crate) fn log2_mu_shifted(&self, x: f64, q: f64) -> f64 {
        let e = self.piece.exponent;
        let own = e * x + (-(LN_2 * e * (self.start_offset() - x)).exp_m1()).log2() - e.log2();
        (e - q) * self.anchor + self.piece.log2_coef + log2_two_pi() + log2_add(own, self.log2_rest)
    }
}

/// `log2 (mu(B_r) - mu(B_s))` helper used by tests and capacity code.
pub fn log2_mu_difference(profile: &MeasureProfile, t_hi: f64, t_lo: f64) -> Result<f64> {
    Ok(log2_sub(profile.log2_mu(t_hi)?, profile.log2_mu(t_lo)?))
}
