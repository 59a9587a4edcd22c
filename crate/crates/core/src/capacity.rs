//! Radial condenser capacities, the radial Green normalization constant, and
//! energies between level sets.

use std::f64::consts::{LN_2, PI};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::finsler::{p_energy, GradNormKind, ScalarField};
use crate::green::{a_exponent, Extent, GreenCandidate};
use crate::quad::{kronrod15, log2_add, log2_integral, log2_power_integral};
use crate::weights::{MeasureProfile, WeightModel, QUAD_TOL};

/// Capacities above this are reported as `+∞`.
pub const INFINITY_THRESHOLD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityResult {
    /// `f64::INFINITY` marks a degenerate condenser; serialized as `"inf"`.
    #[serde(serialize_with = "serialize_marker")]
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

fn serialize_marker<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

impl CapacityResult {
    pub fn closed_form(value: f64) -> Self {
        Self {
            value,
            method: Method::ClosedForm,
            error_estimate: 0.0,
        }
    }

    pub fn variational(value: f64, error_estimate: f64) -> Self {
        Self {
            value,
            method: Method::Variational,
            error_estimate,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `log2 ∫_{2^t0}^{2^t1} (w(rho) rho)^(-1/(p-1)) d rho`.
fn log2_conductance_integral(model: &WeightModel, p: f64, t0: f64, t1: f64) -> f64 {
    let k = 1.0 / (p - 1.0);
    match model {
        WeightModel::Power { alpha } => log2_power_integral(1.0 - (alpha + 1.0) * k, t0, t1),
        WeightModel::Oscillating(osc) => {
            // On a piece, w rho = 2^coef rho^(e-1).
            let mut total = f64::NEG_INFINITY;
            let mut cursor = t1;
            while cursor > t0 {
                let piece = osc.piece_at(cursor);
                let lo = piece.start.max(t0);
                let part = -piece.log2_coef * k + log2_power_integral(1.0 - (piece.exponent - 1.0) * k, lo, cursor);
                total = log2_add(total, part);
                cursor = lo;
            }
            total
        }
        WeightModel::Perturbed { .. } => {
            let mut nodes = vec![t0];
            nodes.extend(model.breakpoints(t0, t1));
            nodes.push(t1);
            let g = |t: f64| t + LN_2.log2() - (model.log2_weight_unchecked(t) + t) * k;
            log2_integral(g, &nodes, QUAD_TOL).log2_value
        }
    }
}

/// `2π (∫_r^R (w rho)^(-1/(p-1)) d rho)^(1-p)`, the capacity of `B_r` in `B_R`.
pub fn ring_capacity_radial(profile: &MeasureProfile, p: f64, r: f64, r_outer: f64) -> Result<CapacityResult> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("capacity needs p > 1, got {p}")));
    }
    if !(r > 0.0 && r < r_outer) {
        return Err(Error::domain(format!("capacity needs 0 < r < R, got r = {r}, R = {r_outer}")));
    }
    let (t0, t1) = (r.log2(), r_outer.log2());
    profile.log2_mu(t0)?;
    profile.log2_mu(t1)?;
    let log2_value = (2.0 * PI).log2() + (1.0 - p) * log2_conductance_integral(profile.model(), p, t0, t1);
    let value = if log2_value > INFINITY_THRESHOLD.log2() {
        f64::INFINITY
    } else {
        log2_value.exp2()
    };
    Ok(CapacityResult::closed_form(value))
}

/// `κ = (2π)^(-1/(p-1)) / a_p`, the factor making `κ (r^-a_p - R^-a_p)` a
/// Green function for the weight `|x|^α`.
pub fn radial_green_constant(alpha: f64, p: f64) -> Result<f64> {
    let a = a_exponent(p, alpha)?;
    Ok((2.0 * PI).powf(-1.0 / (p - 1.0)) / a)
}

/// `∫_{a < u < b} g_u^p dμ` for a discrete field, using the solver's cell
/// quadrature on the truncation `clamp(u, a, b)`.
pub fn level_energy_field(
    field: &ScalarField,
    a: f64,
    b: f64,
    p: f64,
    kind: GradNormKind,
    profile: &MeasureProfile,
) -> Result<f64> {
    if !(a < b) {
        if a == b {
            return Ok(0.0);
        }
        return Err(Error::domain(format!("level band needs a < b, got [{a}, {b}]")));
    }
    p_energy(&field.clamped(a, b), p, kind, profile)
}

/// `∫_{a < u < b} g_u^p dμ` for a Green candidate, integrated along rays in
/// the level variable.
///
/// On a ray, `g_u^p r^(1+α) dr = (A a_p)^(p-1) e^{a_p (p-1) f} S du` where
/// `S = 1` for the max-norm (the radial partial dominates) and
/// `S = (1 + (1 - (r/R)^a_p)^2 f'^2)^(p/2)` for the Euclidean norm.
pub fn level_energy_candidate(c: &GreenCandidate, a: f64, b: f64, kind: GradNormKind) -> Result<f64> {
    if !(a >= 0.0 && a <= b) {
        return Err(Error::domain(format!("level band needs 0 <= a < b, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let (p, ap) = (c.p(), c.a_p());
    let scale = c.scale();
    let r_pow = match c.extent() {
        Extent::Bounded(r) => r.powf(-ap),
        Extent::Unbounded => 0.0,
    };
    let prof = c.profile();
    let n = prof.len();
    let dth = 2.0 * PI / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let (f0, f1) = (prof.samples()[j], prof.samples()[(j + 1) % n]);
        let slope = (f1 - f0) / dth;
        let seg = |s: f64| {
            let f = f0 + (f1 - f0) * s / dth;
            let angular = (ap * (p - 1.0) * f).exp();
            let stretch = match kind {
                GradNormKind::FinslerMax => b - a,
                GradNormKind::Euclidean => kronrod15(
                    |u| {
                        // (r/R)^a_p at the point of this ray where the candidate equals u.
                        let ratio = r_pow / (u / (scale * (ap * f).exp()) + r_pow);
                        let d = (1.0 - ratio) * slope;
                        (1.0 + d * d).powf(0.5 * p)
                    },
                    a,
                    b,
                ),
            };
            angular * stretch
        };
        total += kronrod15(seg, 0.0, dth);
    }
    Ok((scale * ap).powf(p - 1.0) * total)
}

/// Field or candidate whose level-band energy is measured.
pub enum LevelSource<'a> {
    Field(&'a ScalarField),
    Candidate(&'a GreenCandidate),
}

/// `∫_{a < u < b} g_u^p dμ`; for a normalized Green function this is `b - a`.
pub fn level_energy_check(
    source: LevelSource<'_>,
    a: f64,
    b: f64,
    p: f64,
    profile: &MeasureProfile,
    kind: GradNormKind,
) -> Result<f64> {
    if a > b {
        return Err(Error::domain(format!("level band needs a < b, got [{a}, {b}]")));
    }
    match source {
        LevelSource::Field(f) => level_energy_field(f, a, b, p, kind, profile),
        LevelSource::Candidate(c) => {
            if profile.model().power_alpha() != Some(c.alpha()) || p != c.p() {
                return Err(Error::domain("candidate parameters do not match the profile and p"));
            }
            level_energy_candidate(c, a, b, kind)
        }
    }
}

/// Closed-form capacity of `{u >= b}` for a radial (zero-profile) candidate.
pub fn radial_superlevel_capacity(c: &GreenCandidate, b: f64) -> Result<CapacityResult> {
    if c.profile().max() != c.profile().min() {
        return Err(Error::domain("closed-form superlevel capacity needs a constant profile"));
    }
    let Extent::Bounded(r_outer) = c.extent() else {
        return Err(Error::domain("superlevel capacity needs a bounded domain"));
    };
    let profile = MeasureProfile::new(WeightModel::power(c.alpha())?)?;
    ring_capacity_radial(&profile, c.p(), c.level_radius(b, 0.0)?, r_outer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::LipschitzProfile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power(alpha: f64) -> MeasureProfile {
        MeasureProfile::new(WeightModel::power(alpha).unwrap()).unwrap()
    }

    #[test]
    fn ring_examples() {
        let c = ring_capacity_radial(&power(0.0), 2.0, 0.1, 1.0).unwrap();
        assert_relative_eq!(c.value, 2.0 * PI / 10f64.ln(), max_relative = 1e-14);
        assert_eq!(c.method, Method::ClosedForm);
        assert_eq!(c.error_estimate, 0.0);
        let c = ring_capacity_radial(&power(0.0), 1.5, 0.25, 1.0).unwrap();
        assert_relative_eq!(c.value, 2.0 * PI / 3f64.sqrt(), max_relative = 1e-14);
        let c = ring_capacity_radial(&power(0.0), 3.0, 1.0, 1.0 + 1e-12).unwrap();
        assert!(c.value > 1e20);
        let c = ring_capacity_radial(&power(0.0), 30.0, 0.5, 0.5 * (1.0 + f64::EPSILON)).unwrap();
        assert!(c.is_infinite());
        assert_eq!(serde_json::to_value(c).unwrap()["value"], "inf");
        assert!(ring_capacity_radial(&power(0.0), 2.0, 1.0, 1.0).is_err());
        assert!(ring_capacity_radial(&power(0.0), 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn oscillating_ring_matches_quadrature() {
        // Same weight routed through the generic quadrature path.
        let osc = WeightModel::oscillating(2.0, 3.0, 4.0, 5.0).unwrap();
        let pert = WeightModel::perturbed(osc.clone(), std::sync::Arc::new(|_| 1.0), 1.0, 1.0).unwrap();
        let a = ring_capacity_radial(&MeasureProfile::new(osc).unwrap(), 2.5, 1e-3, 0.9).unwrap();
        let b = ring_capacity_radial(&MeasureProfile::with_range(pert, -12.0, 1.0).unwrap(), 2.5, 1e-3, 0.9).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-9);
    }

    #[test]
    fn green_constant_examples() {
        assert_relative_eq!(radial_green_constant(0.0, 1.5).unwrap(), (2.0 * PI).powi(-2), max_relative = 1e-14);
        assert_relative_eq!(radial_green_constant(1.0, 2.0).unwrap(), 1.0 / (2.0 * PI), max_relative = 1e-14);
        assert_relative_eq!(
            radial_green_constant(1.0, 2.5).unwrap(),
            3.0 * (2.0 * PI).powf(-2.0 / 3.0),
            max_relative = 1e-14
        );
        assert!(radial_green_constant(0.0, 2.0).is_err());
        assert!(radial_green_constant(0.0, 1.0).is_err());
    }

    /// Recovers κ by bisection on `cap({κ v >= b}) = b^(1-p)` with `v = r^-a - R^-a`.
    fn kappa_by_inversion(alpha: f64, p: f64, b: f64) -> f64 {
        let a = (2.0 + alpha - p) / (p - 1.0);
        let prof = power(alpha);
        let defect = |k: f64| {
            let r = (b / k + 1.0).powf(-1.0 / a);
            ring_capacity_radial(&prof, p, r, 1.0).unwrap().value.ln() - (1.0 - p) * b.ln()
        };
        let (mut lo, mut hi) = (1e-8_f64, 1e3_f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            // Capacity grows with k: the superlevel set swells.
            if defect(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn green_constant_by_inversion() {
        for (alpha, p) in [(0.0, 1.5), (1.0, 2.0), (1.0, 2.5), (0.5, 1.2)] {
            let k = radial_green_constant(alpha, p).unwrap();
            for b in [0.3, 1.0, 4.0] {
                assert_relative_eq!(kappa_by_inversion(alpha, p, b), k, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn level_energy_of_normalized_candidates() {
        let zero = GreenCandidate::new(1.5, 0.0, Extent::Bounded(1.0), LipschitzProfile::zero(64).unwrap())
            .unwrap()
            .with_normalization(radial_green_constant(0.0, 1.5).unwrap());
        for kind in [GradNormKind::FinslerMax, GradNormKind::Euclidean] {
            assert_relative_eq!(level_energy_candidate(&zero, 0.0, 1.0, kind).unwrap(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(level_energy_candidate(&zero, 0.5, 2.0, kind).unwrap(), 1.5, max_relative = 1e-12);
        }
        assert_eq!(level_energy_candidate(&zero, 0.7, 0.7, GradNormKind::FinslerMax).unwrap(), 0.0);
        let tri = GreenCandidate::new(1.5, 0.0, Extent::Bounded(1.0), LipschitzProfile::triangle(64).unwrap()).unwrap();
        // A = [a^(p-1) ∫ e^{(p-1) a f}]^(-1/(p-1)) with ∫ = 4 (e^{π/2} - 1) for a = 1, p = 3/2.
        let a_t = (4.0 * ((PI / 2.0).exp() - 1.0)).powi(-2);
        let tri = tri.with_normalization(a_t);
        assert_relative_eq!(level_energy_candidate(&tri, 0.0, 1.0, GradNormKind::FinslerMax).unwrap(), 1.0, max_relative = 1e-12);
        assert!(level_energy_candidate(&tri, 0.0, 1.0, GradNormKind::Euclidean).unwrap() > 1.0);
    }

    #[test]
    fn telescoping_normalization() {
        let (alpha, p) = (0.0, 1.5);
        let k = radial_green_constant(alpha, p).unwrap();
        let a_p = 1.0;
        let level_r = |u: f64| (u / k + 1.0f64).powf(-1.0 / a_p);
        let prof = power(alpha);
        for (a, b) in [(0.0, 1.0), (0.25, 0.5), (1.0, 3.0)] {
            let cap = if a == 0.0 {
                ring_capacity_radial(&prof, p, level_r(b), 1.0).unwrap()
            } else {
                ring_capacity_radial(&prof, p, level_r(b), level_r(a)).unwrap()
            };
            assert_relative_eq!(cap.value, (b - a).powf(1.0 - p), max_relative = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn capacity_monotone(alpha in -0.5f64..2.0, p in 1.1f64..4.0, r in 0.01f64..0.4, dr in 0.01f64..0.3, d_outer in 0.0f64..2.0) {
            let prof = power(alpha);
            let big_r = 0.5 + d_outer;
            let c0 = ring_capacity_radial(&prof, p, r, big_r).unwrap().value;
            let c_r = ring_capacity_radial(&prof, p, r + dr.min(0.09), big_r).unwrap().value;
            let c_big = ring_capacity_radial(&prof, p, r, big_r + 0.5).unwrap().value;
            prop_assert!(c_r >= c0 * (1.0 - 1e-12));
            prop_assert!(c_big <= c0 * (1.0 + 1e-12));
        }
    }
}
