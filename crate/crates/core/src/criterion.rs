//! Tail integrals of the uniqueness criterion, the singleton-capacity sign,
//! and classification of `(p, weight)` pairs.
//!
//! The tail integral is
//! `T(r) = ∫_r^upper (rho^p / mu(B_rho))^(1/(p-1)) d rho / rho`
//! and the criterion factor is `F(r) = (mu(B_r)/r^p)^(1/(p-1)) T(r)`.
//! Uniqueness of Green functions holds when `limsup F(r) = ∞` as `r → 0`.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{log2_add, log2_integral};
use crate::weights::{MeasureProfile, ScaleRange, WeightModel, QUAD_TOL, DIM};

/// F above this on some probe radius counts as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;
/// Relative variation of F over the last three probe decades counted as convergence.
pub const FLAT_VARIATION: f64 = 0.01;
/// Number of probe radii `r_j = 2^-j`, `j = 1..=PROBE_COUNT`.
pub const PROBE_COUNT: usize = 40;
/// Slack used when comparing `p` against estimated exponent endpoints.
pub const RULE_EPSILON: f64 = 1e-9;

const ZERO_BLOCK_TOL: f64 = 1e-6;
const GEOMETRIC_RATIO: f64 = 1.0 - 1e-3;

fn check_args(p: f64, r: f64, upper: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("criterion needs p > 1, got {p}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("criterion needs r > 0, got {r}")));
    }
    if !(r <= upper && upper <= 1.0) {
        return Err(Error::domain(format!(
            "criterion needs 0 < r <= upper <= 1, got r = {r}, upper = {upper}"
        )));
    }
    Ok(())
}

/// `log2` of the tail integral between `2^t_lo` and `2^t_hi`.
pub fn log2_wiener_tail(profile: &MeasureProfile, p: f64, t_lo: f64, t_hi: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("criterion needs p > 1, got {p}")));
    }
    if !(t_lo <= t_hi) {
        return Err(Error::domain(format!("tail over reversed interval [{t_lo}, {t_hi}]")));
    }
    profile.log2_mu(t_lo)?;
    profile.log2_mu(t_hi)?;
    if t_lo == t_hi {
        return Ok(f64::NEG_INFINITY);
    }
    if let Some(alpha) = profile.model().power_alpha() {
        // (rho^p / mu)^(1/(p-1)) = (Q/2π)^(1/(p-1)) rho^s with s = (p-Q)/(p-1).
        let q = alpha + DIM;
        let s = (p - q) / (p - 1.0);
        let log2_k = (2.0 * std::f64::consts::PI / q).log2();
        return Ok(-log2_k / (p - 1.0) + crate::quad::log2_power_integral(s, t_lo, t_hi));
    }
    let mut nodes = vec![t_lo];
    nodes.extend(profile.model().breakpoints(t_lo, t_hi));
    nodes.push(t_hi);
    let g = |t: f64| (p * t - profile.log2_mu_unchecked(t)) / (p - 1.0) + LN_2.log2();
    Ok(log2_integral(g, &nodes, QUAD_TOL).log2_value)
}

/// `∫_r^upper (rho^p / mu(B_rho))^(1/(p-1)) d rho / rho`.
pub fn wiener_tail(profile: &MeasureProfile, p: f64, r: f64, upper: f64) -> Result<f64> {
    check_args(p, r, upper)?;
    Ok(log2_wiener_tail(profile, p, r.log2(), upper.log2())?.exp2())
}

/// `log2 F(2^t)` with the tail taken up to radius 1.
pub fn log2_criterion_factor(profile: &MeasureProfile, p: f64, t: f64) -> Result<f64> {
    let tail = log2_wiener_tail(profile, p, t, 0.0)?;
    Ok((profile.log2_mu(t)? - p * t) / (p - 1.0) + tail)
}

/// `F(r) = (mu(B_r)/r^p)^(1/(p-1)) * wiener_tail(r, 1)`.
pub fn criterion_factor(profile: &MeasureProfile, p: f64, r: f64) -> Result<f64> {
    check_args(p, r, 1.0)?;
    Ok(log2_criterion_factor(profile, p, r.log2())?.exp2())
}

/// Whether the `p`-capacity of the origin vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitySign {
    Zero,
    Positive,
}

/// Contribution of `[2^log2_r_lo, 2^log2_r_hi]` to the singleton integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub log2_r_lo: f64,
    pub log2_r_hi: f64,
    pub log2_value: f64,
}

/// Numerical evidence behind [`singleton_capacity_sign`].
#[derive(Debug, Clone, Serialize)]
pub struct SingletonEvidence {
    /// Disjoint blocks whose contributions bound the integral from below.
    pub lower_blocks: Vec<Block>,
    /// Blocks partitioning `(0, 1]`, used for the geometric tail bound.
    pub partition_blocks: Vec<Block>,
    /// Largest ratio of consecutive partition blocks over the second half.
    pub tail_ratio: f64,
    pub verdict: Option<CapacitySign>,
}

/// Block contribution, evaluated piece by piece in offsets from each piece's
/// upper end (keeps deep generations accurate where `t` itself is ~1e12).
fn block_value(profile: &MeasureProfile, p: f64, t_lo: f64, t_hi: f64) -> Result<f64> {
    profile.log2_mu(t_lo)?;
    let mut edges = vec![t_lo];
    edges.extend(profile.model().breakpoints(t_lo, t_hi));
    edges.push(t_hi);
    let mut total = f64::NEG_INFINITY;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let part = match profile.local_measure(hi) {
            Some(local) => {
                let g = |x: f64| (p * x - local.log2_mu_shifted(x, p)) / (p - 1.0) + LN_2.log2();
                log2_integral(g, &[lo - hi, 0.0], QUAD_TOL).log2_value
            }
            None => log2_wiener_tail(profile, p, lo, hi)?,
        };
        total = log2_add(total, part);
    }
    Ok(total)
}

fn base_model(model: &WeightModel) -> &WeightModel {
    match model {
        WeightModel::Perturbed { base, .. } => base_model(base),
        other => other,
    }
}

/// Evidence for the sign of the singleton capacity, from the divergence of
/// `∫_0^1 (rho^p / mu(B_rho))^(1/(p-1)) d rho / rho`.
pub fn singleton_capacity_evidence(profile: &MeasureProfile, p: f64) -> Result<SingletonEvidence> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("singleton capacity needs p > 1, got {p}")));
    }
    let (t_min, _) = profile.log2_range();
    let (lower, partition): (Vec<(f64, f64)>, Vec<(f64, f64)>) = match base_model(profile.model()) {
        WeightModel::Oscillating(osc) => {
            let mut lower = Vec::new();
            let mut partition = vec![(osc.log2_alpha(0), 0.0)];
            for k in 0..=osc.max_generation() {
                let (ta, ta1, tb) = (osc.log2_alpha(k), osc.log2_alpha(k + 1), osc.log2_beta(k));
                if ta1 < t_min {
                    break;
                }
                lower.push((tb - 1.0, tb));
                partition.push((ta1, ta));
            }
            (lower, partition)
        }
        _ => {
            let n = ((-t_min).floor() as usize).min(200);
            let dyadic: Vec<(f64, f64)> = (0..n).map(|j| (-(j as f64) - 1.0, -(j as f64))).collect();
            (dyadic.clone(), dyadic)
        }
    };
    if lower.len() < 4 {
        return Err(Error::Range("profile too shallow for a singleton-capacity test".into()));
    }
    let evaluate = |blocks: &[(f64, f64)]| -> Result<Vec<Block>> {
        blocks
            .iter()
            .map(|&(lo, hi)| {
                Ok(Block {
                    log2_r_lo: lo,
                    log2_r_hi: hi,
                    log2_value: block_value(profile, p, lo, hi)?,
                })
            })
            .collect()
    };
    let lower_blocks = evaluate(&lower)?;
    let partition_blocks = evaluate(&partition)?;

    let tail = &lower_blocks[lower_blocks.len() / 2..];
    let floor = tail[0].log2_value + (1.0 - ZERO_BLOCK_TOL).log2();
    let diverges = tail.iter().all(|b| b.log2_value >= floor);

    let tail = &partition_blocks[partition_blocks.len() / 2..];
    let tail_ratio = tail
        .windows(2)
        .map(|w| (w[1].log2_value - w[0].log2_value).exp2())
        .fold(0.0f64, f64::max);
    let converges = tail_ratio <= GEOMETRIC_RATIO;

    let verdict = match (diverges, converges) {
        (true, false) => Some(CapacitySign::Zero),
        (false, true) => Some(CapacitySign::Positive),
        _ => None,
    };
    Ok(SingletonEvidence {
        lower_blocks,
        partition_blocks,
        tail_ratio,
        verdict,
    })
}

/// `Zero` iff the singleton integral diverges.
pub fn singleton_capacity_sign(profile: &MeasureProfile, p: f64) -> Result<CapacitySign> {
    let evidence = singleton_capacity_evidence(profile, p)?;
    evidence.verdict.ok_or_else(|| {
        Error::Inconclusive(format!(
            "singleton capacity at p = {p}: blocks neither stay bounded below nor decay geometrically (tail ratio {:.6})",
            evidence.tail_ratio
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Holds,
    Fails,
    Inconclusive,
}

/// Which rule produced the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `p >= inf` of the upper exponent set.
    InUpperSet,
    /// `p > sup` of the lower exponent set.
    OutsideLowerSet,
    /// `p < sup` of the lower exponent set.
    BelowLowerSup,
    /// Neither exponent rule applies; the numeric probe decided.
    InconclusiveRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub r: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionTrace {
    pub weight: String,
    pub p: f64,
    pub classification: Classification,
    pub rule: Rule,
    pub q_lower_sup: f64,
    pub q_upper_inf: f64,
    /// Verdict of the numeric limsup probe on its own.
    pub probe: Classification,
    pub singleton_capacity: Option<CapacitySign>,
    pub trace: Vec<TracePoint>,
}

/// Verdict of the limsup probe on `F(2^-j)`, `j = 1..=PROBE_COUNT`.
pub fn probe_verdict(trace: &[TracePoint]) -> Classification {
    let max = trace.iter().map(|x| x.f).fold(0.0f64, f64::max);
    if max > DIVERGENCE_THRESHOLD {
        return Classification::Holds;
    }
    // Three decades at the small end: about ten octaves.
    let tail = &trace[trace.len().saturating_sub(11)..];
    let hi = tail.iter().map(|x| x.f).fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().map(|x| x.f).fold(f64::INFINITY, f64::min);
    if hi > 0.0 && (hi - lo) / hi < FLAT_VARIATION {
        Classification::Fails
    } else {
        Classification::Inconclusive
    }
}

/// Classifies `(p, weight)` by the exponent-window rules, falling back to the
/// numeric probe when `p` sits on the lower endpoint.
pub fn classify_uniqueness(profile: &MeasureProfile, p: f64) -> Result<CriterionTrace> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain(format!("criterion needs p > 1, got {p}")));
    }
    let window = profile.exponent_window(ScaleRange::default_for(profile.model()))?;
    let trace = (1..=PROBE_COUNT)
        .map(|j| {
            let t = -(j as f64);
            Ok(TracePoint {
                r: t.exp2(),
                f: log2_criterion_factor(profile, p, t)?.exp2(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let probe = probe_verdict(&trace);
    let (classification, rule) = if p >= window.q_upper_inf - RULE_EPSILON {
        (Classification::Holds, Rule::InUpperSet)
    } else if p > window.q_lower_sup + RULE_EPSILON {
        (Classification::Holds, Rule::OutsideLowerSet)
    } else if p < window.q_lower_sup - RULE_EPSILON {
        (Classification::Fails, Rule::BelowLowerSup)
    } else {
        (probe, Rule::InconclusiveRule)
    };
    let singleton_capacity = singleton_capacity_evidence(profile, p)?.verdict;
    Ok(CriterionTrace {
        weight: profile.model().to_string(),
        p,
        classification,
        rule,
        q_lower_sup: window.q_lower_sup,
        q_upper_inf: window.q_upper_inf,
        probe,
        singleton_capacity,
        trace,
    })
}
