//! Constants of the iterated Harnack inequality and measured oscillation decay
//! of solved fields.
//!
//! With a Harnack constant `A` on dilated balls `λB`, iterating over the
//! scales `δ = (50λ)^-k` gives `sup_{δB} u <= (1 + C0 δ^α) inf_{δB} u` with
//! `α log(50λ) = log(A/(A-1))` and `C0 = A (50λ)^α = A²/(A-1)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finsler::ScalarField;
use crate::weights::MeasureProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarnackConstants {
    #[serde(rename = "A")]
    pub a: f64,
    pub lambda: f64,
    pub alpha_exp: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
}

impl HarnackConstants {
    /// `1 + C0 δ^α`, the iterated bound on `sup/inf` over `δB`.
    pub fn ratio_bound(&self, delta: f64) -> f64 {
        1.0 + self.c0 * delta.powf(self.alpha_exp)
    }

    /// Largest `δ` covered by the iteration, `1/(50λ)`.
    pub fn max_delta(&self) -> f64 {
        1.0 / (50.0 * self.lambda)
    }
}

pub fn iteration_constants(a: f64, lambda: f64) -> Result<HarnackConstants> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::domain(format!("Harnack constant must satisfy A > 1, got {a}")));
    }
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("dilation must satisfy lambda >= 1, got {lambda}")));
    }
    let scale = 50.0 * lambda;
    let alpha_exp = (a / (a - 1.0)).ln() / scale.ln();
    Ok(HarnackConstants {
        a,
        lambda,
        alpha_exp,
        c0: a * scale.powf(alpha_exp),
    })
}

/// Where on `δB` the field is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeShape {
    /// The closed disc, on 9 radial fractions.
    Disc,
    /// Only the boundary circle; needed when the ball surrounds the grid's hole.
    Circle,
}

/// A ball `B(center, radius)` in Cartesian coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub center: (f64, f64),
    pub radius: f64,
    pub shape: ProbeShape,
    pub angles: usize,
}

impl Probe {
    pub fn disc(center: (f64, f64), radius: f64) -> Self {
        Self {
            center,
            radius,
            shape: ProbeShape::Disc,
            angles: 64,
        }
    }

    pub fn circle(center: (f64, f64), radius: f64) -> Self {
        Self {
            shape: ProbeShape::Circle,
            ..Self::disc(center, radius)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub delta: f64,
    pub sup: f64,
    pub inf: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTrace {
    pub probe: Probe,
    pub points: Vec<DecayPoint>,
    /// Ratios nonincreasing as `δ` decreases.
    pub monotone: bool,
    /// Slope of `log(ratio - 1)` against `log δ`; absent when fewer than two
    /// ratios exceed 1.
    pub exponent: Option<f64>,
}

fn sup_inf(field: &ScalarField, probe: &Probe, delta: f64) -> Result<(f64, f64)> {
    let rho = delta * probe.radius;
    let fractions: Vec<f64> = match probe.shape {
        ProbeShape::Disc => (0..=8).map(|k| k as f64 / 8.0).collect(),
        ProbeShape::Circle => vec![1.0],
    };
    let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
    for s in fractions {
        let rays = if s == 0.0 { 1 } else { probe.angles };
        for k in 0..rays {
            let phi = 2.0 * PI * k as f64 / rays as f64;
            let x = probe.center.0 + s * rho * phi.cos();
            let y = probe.center.1 + s * rho * phi.sin();
            let v = field.interpolate(x.hypot(y), y.atan2(x)).ok_or_else(|| {
                Error::domain(format!("probe point ({x:.6}, {y:.6}) lies outside the grid"))
            })?;
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "field must be positive on the probe, got {v:e} at ({x:.6}, {y:.6})"
                )));
            }
            sup = sup.max(v);
            inf = inf.min(v);
        }
    }
    Ok((sup, inf))
}

/// Least-squares slope of `log(ratio - 1)` against `log δ`.
pub fn fit_decay_exponent(points: &[DecayPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.ratio > 1.0 && p.delta > 0.0)
        .map(|p| (p.delta.ln(), (p.ratio - 1.0).ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|v| v.0).sum::<f64>() / n;
    let my = xy.iter().map(|v| v.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|v| (v.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(xy.iter().map(|v| (v.0 - mx) * (v.1 - my)).sum::<f64>() / sxx)
}

/// `sup_{δB} u / inf_{δB} u` for each `δ`, in the given order.
pub fn oscillation_decay(field: &ScalarField, probe: &Probe, deltas: &[f64]) -> Result<DecayTrace> {
    if !(probe.radius > 0.0) || probe.angles == 0 {
        return Err(Error::domain("probe needs a positive radius and at least one angle"));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::domain("dilation factors must lie in (0, 1]"));
    }
    let points = deltas
        .iter()
        .map(|&delta| {
            let (sup, inf) = sup_inf(field, probe, delta)?;
            Ok(DecayPoint {
                delta,
                sup,
                inf,
                ratio: sup / inf,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_delta = points.clone();
    by_delta.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let monotone = by_delta.windows(2).all(|w| w[0].ratio <= w[1].ratio);
    Ok(DecayTrace {
        probe: *probe,
        exponent: fit_decay_exponent(&points),
        monotone,
        points,
    })
}

/// Oscillation of `u` over the annulus `3B ∖ 2B` around the origin,
/// compared with the capacity scale `(μ(B_r)/r^p)^(1/(1-p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnulusOscillation {
    pub r: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub scale: f64,
    /// `(M - m) / scale`.
    pub ratio: f64,
}

pub fn annulus_oscillation(field: &ScalarField, p: f64, profile: &MeasureProfile, radii: &[f64]) -> Result<Vec<AnnulusOscillation>> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("annulus oscillation needs p > 1, got {p}")));
    }
    let n = field.grid().angles();
    radii
        .iter()
        .map(|&r| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..=16 {
                let rho = r * (2.0 + k as f64 / 16.0);
                for j in 0..n {
                    let v = field.interpolate(rho, field.grid().theta(j)).ok_or_else(|| {
                        Error::domain(format!("annulus [{}, {}] leaves the grid", 2.0 * r, 3.0 * r))
                    })?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let scale = ((profile.log2_mu(r.log2())? - p * r.log2()) / (1.0 - p)).exp2();
            Ok(AnnulusOscillation {
                r,
                m: lo,
                big_m: hi,
                scale,
                ratio: (hi - lo) / scale,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{level_energy_check, LevelSource};
    use crate::finsler::{GradNormKind, PolarGrid};
    use crate::solver::{minimize_p_energy, BoundaryCondition, SolveSpec};
    use crate::weights::WeightModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat() -> MeasureProfile {
        MeasureProfile::new(WeightModel::power(0.0).unwrap()).unwrap()
    }

    #[test]
    fn constant_examples() {
        let h = iteration_constants(2.0, 1.0).unwrap();
        assert_relative_eq!(h.alpha_exp, 2f64.ln() / 50f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(h.alpha_exp, 0.17718, max_relative = 1e-4);
        assert_relative_eq!(h.c0, 4.0, max_relative = 1e-12);
        let h = iteration_constants(3.0, 2.0).unwrap();
        assert_relative_eq!(h.alpha_exp, 1.5f64.ln() / 100f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(h.alpha_exp, 0.088043, max_relative = 1e-4);
        assert_relative_eq!(h.c0, 4.5, max_relative = 1e-12);
        assert_relative_eq!(iteration_constants(2.0, 10.0).unwrap().c0, 4.0, max_relative = 1e-12);
        assert_relative_eq!(h.ratio_bound(h.max_delta()), 1.0 + 4.5 / 1.5, max_relative = 1e-12);
        for (a, l) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5), (f64::NAN, 1.0)] {
            assert!(matches!(iteration_constants(a, l), Err(Error::Domain(_))));
        }
    }

    proptest! {
        #[test]
        fn c0_is_lambda_free(a in 1.001f64..100.0, lambda in 1.0f64..1e3) {
            let h = iteration_constants(a, lambda).unwrap();
            prop_assert!((h.c0 / (a * a / (a - 1.0)) - 1.0).abs() <= 1e-12);
            prop_assert!(((50.0 * lambda).powf(h.alpha_exp) / (a / (a - 1.0)) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn exponent_decreases_in_both_arguments(a in 1.01f64..50.0, lambda in 1.0f64..100.0) {
            let h = iteration_constants(a, lambda).unwrap().alpha_exp;
            prop_assert!(iteration_constants(a * 1.01, lambda).unwrap().alpha_exp < h);
            prop_assert!(iteration_constants(a, lambda * 1.01).unwrap().alpha_exp < h);
        }
    }

    #[test]
    fn trivial_fields() {
        let grid = PolarGrid::new(0.05, 1.0, 32, 32).unwrap();
        let c = ScalarField::from_fn(grid.clone(), |_, _| 3.0).unwrap();
        let t = oscillation_decay(&c, &Probe::disc((0.5, 0.0), 0.4), &[0.2, 0.1, 0.05]).unwrap();
        assert!(t.points.iter().all(|p| (p.ratio - 1.0).abs() <= 1e-14));
        let radial = ScalarField::from_fn(grid.clone(), |r, _| 1.0 + r * r).unwrap();
        let t = oscillation_decay(&radial, &Probe::circle((0.0, 0.0), 1.0), &[0.8, 0.4, 0.2]).unwrap();
        for p in &t.points {
            assert_relative_eq!(p.ratio, 1.0, max_relative = 1e-14);
        }
        let signed = ScalarField::from_fn(grid.clone(), |r, th| r * th.cos()).unwrap();
        assert!(matches!(
            oscillation_decay(&signed, &Probe::disc((0.5, 0.0), 0.6), &[1.0]),
            Err(Error::Domain(_))
        ));
        assert!(oscillation_decay(&c, &Probe::disc((0.0, 0.0), 0.4), &[0.5]).is_err());
    }

    #[test]
    fn solved_harmonic_field_decays() {
        // Boundary data of the harmonic 2 + x; the solve recovers it off-center.
        let grid = PolarGrid::new(0.05, 1.0, 64, 64).unwrap();
        let data = ScalarField::from_fn(grid.clone(), |r, th| 2.0 + r * th.cos()).unwrap();
        let spec = SolveSpec::new(grid, 2.0, GradNormKind::Euclidean, flat(), BoundaryCondition::Dirichlet(data));
        let field = minimize_p_energy(&spec).unwrap().field;
        let t = oscillation_decay(&field, &Probe::disc((0.5, 0.0), 0.4), &[0.2, 0.1, 0.05]).unwrap();
        assert!(t.monotone);
        assert!(t.points[0].ratio > t.points[1].ratio && t.points[1].ratio > t.points[2].ratio);
        // ratio - 1 ≈ 2 δ ρ / (2 + x0): exponent close to 1.
        let e = t.exponent.unwrap();
        assert!(e > 0.8 && e < 1.2, "{e}");
    }

    #[test]
    fn annulus_oscillation_scales_with_capacity() {
        let (r0, p) = (0.005, 2.0);
        let grid = PolarGrid::new(r0, 1.0, 96, 16).unwrap();
        let spec = SolveSpec::new(grid, p, GradNormKind::Euclidean, flat(), BoundaryCondition::CapacitaryRing);
        let sol = minimize_p_energy(&spec).unwrap();
        // cap({G >= c}) = c^(1-p) with {G >= c} = B_r0.
        let c = sol.capacity.value.powf(1.0 / (1.0 - p));
        let g = sol.field.scaled(c);
        let e = level_energy_check(LevelSource::Field(&g), 0.0, c, p, &flat(), GradNormKind::Euclidean).unwrap();
        assert_relative_eq!(e, c, max_relative = 1e-6);
        let pts = annulus_oscillation(&g, p, &flat(), &[0.02, 0.04, 0.08]).unwrap();
        let ratios: Vec<f64> = pts.iter().map(|q| q.ratio).collect();
        // G = ln(1/r)/(2π) and the scale is 1/π, so the ratio is ln(3/2)/2 at every r.
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(lo > 0.0 && hi / lo < 1.01, "{ratios:?}");
        assert_relative_eq!(ratios[0], (1.5f64).ln() / 2.0, max_relative = 1e-3);
    }
}
