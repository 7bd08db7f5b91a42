//! Discrete laws on {1, 2, ...} with the regularity taxonomy used throughout:
//! non-critical (index 0 < gamma < 1, power-law tails), sub-critical
//! (gamma = 0, geometric tails), sup-critical (gamma = 1, log-power tails),
//! plus finite explicit laws and glued piecewise power laws that deliberately
//! break regular variation.
//!
//! Atoms `1..=M` are materialized exactly; everything beyond `M` is carried as
//! an analytic tail (Euler-Maclaurin sums), so normalization, tail moments and
//! tail quantiles stay accurate without ever enumerating the tail.

use serde::Serialize;
use thiserror::Error;

/// Atom identifiers. Values above [`FRESH_ID_BASE`] are synthetic ids for
/// draws that land beyond the invertible tail range (see `engine`).
pub type AtomId = u64;

/// Largest atom index resolved exactly by tail inversion. Tail draws beyond
/// this point are so deep that collisions are negligible at any feasible
/// sample size; the sampler hands out fresh synthetic ids for them.
pub const TAIL_INVERSION_CAP: u64 = 1 << 62;

/// Synthetic ids live in `[FRESH_ID_BASE, u64::MAX]`.
pub const FRESH_ID_BASE: u64 = 1 << 63;

/// Default number of materialized atoms for the infinite families.
pub const DEFAULT_TRUNCATION: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum DistError {
    #[error("alpha must exceed 1 (got {0}): sum of x^-alpha diverges")]
    AlphaNotSummable(f64),
    #[error("geometric rate must be positive and finite (got {0})")]
    NonPositiveRate(f64),
    #[error("beta must exceed 1 (got {0}): log-power mass is not summable")]
    BetaNotSummable(f64),
    #[error("truncation must be at least {min} (got {got})")]
    TruncationTooSmall { min: u64, got: u64 },
    #[error("atom index must be at least 1")]
    AtomOutOfRange,
    #[error("explicit weights must be positive and sum to 1 (sum = {0})")]
    BadExplicitWeights(f64),
    #[error("glued construction needs 0 < gamma1 < gamma2 < 1 (got {0}, {1})")]
    BadGammaPair(f64, f64),
    #[error("switch points must be strictly increasing in both coordinates, with m >= 2")]
    BadSwitchPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegularityClass {
    NonCritical,
    SubCritical,
    SupCritical,
    Irregular,
}

/// One piece of a glued law: atoms `start..` (up to the next segment's start)
/// carry mass `x^-alpha / norm`.
#[derive(Debug, Clone)]
pub struct GluedSegment {
    pub start: u64,
    pub alpha: f64,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub enum Family {
    /// pi_x = x^-alpha / norm with norm = zeta(alpha)
    PowerLaw { alpha: f64, norm: f64 },
    /// pi_x = (e^a - 1) e^{-a x}
    Geometric { a: f64 },
    /// pi_x = w(x) / norm with w(x) = 1 / ((x+2) ln^beta(x+2))
    LogPower { beta: f64, norm: f64 },
    /// finite support, weights[x-1] = pi_x
    Explicit { weights: Vec<f64> },
    /// alternating power-law exponents 1/gamma1, 1/gamma2 across cut points
    Glued {
        gamma1: f64,
        gamma2: f64,
        /// calibration checkpoints (n_j, m_j); the m_j are the segment cuts
        switch_points: Vec<(u64, u64)>,
        segments: Vec<GluedSegment>,
        /// total mass of segments i.. for fast tail evaluation
        suffix_mass: Vec<f64>,
    },
}

/// A discrete law with its regularity metadata and truncated materialization.
#[derive(Debug, Clone)]
pub struct DistributionSpec {
    family: Family,
    class: RegularityClass,
    gamma: Option<f64>,
    truncation: u64,
    materialized: Vec<f64>,
    materialized_mass: f64,
    tail_mass: f64,
    x0_strict: Option<u64>,
}

/// Flat summary for reports and serialized output.
#[derive(Debug, Clone, Serialize)]
pub struct SpecSummary {
    pub family: String,
    pub class: RegularityClass,
    pub gamma: Option<f64>,
    pub truncation: u64,
    pub tail_mass: f64,
    pub x0_strict: Option<u64>,
}

// ---------------------------------------------------------------------------
// analytic tail sums
// ---------------------------------------------------------------------------

/// sum_{x >= a} x^-alpha by direct summation up to a floor plus an
/// Euler-Maclaurin closure (error far below f64 resolution for a >= 1).
pub(crate) fn power_tail_from(alpha: f64, a: u64) -> f64 {
    debug_assert!(alpha > 1.0 && a >= 1);
    let head_end = a.max(64);
    let mut sum = 0.0f64;
    for x in (a..head_end).rev() {
        sum += (x as f64).powf(-alpha);
    }
    let t = head_end as f64;
    let em = t.powf(1.0 - alpha) / (alpha - 1.0)
        + t.powf(-alpha) / 2.0
        + alpha * t.powf(-alpha - 1.0) / 12.0
        - alpha * (alpha + 1.0) * (alpha + 2.0) * t.powf(-alpha - 3.0) / 720.0
        + alpha * (alpha + 1.0) * (alpha + 2.0) * (alpha + 3.0) * (alpha + 4.0)
            * t.powf(-alpha - 5.0)
            / 30240.0;
    sum + em
}

fn log_power_weight(beta: f64, x: u64) -> f64 {
    let u = x as f64 + 2.0;
    1.0 / (u * u.ln().powf(beta))
}

/// sum_{x >= a} 1 / ((x+2) ln^beta(x+2)), same direct-head + EM scheme.
pub(crate) fn log_power_tail_from(beta: f64, a: u64) -> f64 {
    debug_assert!(beta > 1.0 && a >= 1);
    let head_end = a.max(1024);
    let mut sum = 0.0f64;
    for x in (a..head_end).rev() {
        sum += log_power_weight(beta, x);
    }
    let u = head_end as f64 + 2.0;
    let l = u.ln();
    let integral = l.powf(1.0 - beta) / (beta - 1.0);
    let f = 1.0 / (u * l.powf(beta));
    let fp = -(l + beta) / (u * u * l.powf(beta + 1.0));
    sum + integral + f / 2.0 - fp / 12.0
}

/// sum_{x >= a} w(x)^k for the log-power weight, k >= 2, via adaptive Simpson
/// on t = ln(x+2) plus the EM half/derivative corrections.
fn log_power_tail_power_from(beta: f64, a: u64, k: u32) -> f64 {
    debug_assert!(k >= 2);
    let kf = k as f64;
    let u0 = a as f64 + 2.0;
    let t0 = u0.ln();
    // integrand after substitution: exp(-(k-1) t) / t^{k beta}
    let g = |t: f64| (-(kf - 1.0) * t).exp() * t.powf(-kf * beta);
    let integral = simpson_to_decay(&g, t0, 1e-14);
    let f = |x: f64| {
        let u = x + 2.0;
        (u * u.ln().powf(beta)).powf(-kf)
    };
    // f'(x) = -k w(x)^{k-1} w'(x); w'(x) = -(L + beta) / (u^2 L^{beta+1})
    let u = u0;
    let l = t0;
    let w = 1.0 / (u * l.powf(beta));
    let wp = -(l + beta) / (u * u * l.powf(beta + 1.0));
    let fp = kf * w.powf(kf - 1.0) * wp;
    integral + f(a as f64) / 2.0 - fp / 12.0
}

/// Adaptive Simpson of g over [t0, inf) where g decays (at least)
/// exponentially; integrates panel by panel until contributions vanish.
pub(crate) fn simpson_to_decay(g: &dyn Fn(f64) -> f64, t0: f64, rel_tol: f64) -> f64 {
    let mut total = 0.0f64;
    let mut lo = t0;
    let mut width = 1.0f64;
    for _ in 0..200 {
        let hi = lo + width;
        let panel = adaptive_simpson(g, lo, hi, rel_tol, 24);
        total += panel;
        if panel.abs() < rel_tol * total.abs().max(f64::MIN_POSITIVE) && total != 0.0 {
            break;
        }
        lo = hi;
        width *= 1.5;
    }
    total
}

fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        g: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm);
        let frm = g(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol * (left + right).abs().max(f64::MIN_POSITIVE) {
            left + right + delta / 15.0
        } else {
            rec(g, a, fa, m, fm, flm, left, tol, depth - 1)
                + rec(g, m, fm, b, fb, frm, right, tol, depth - 1)
        }
    }
    let fa = g(a);
    let fb = g(b);
    let fm = g(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    rec(g, a, fa, b, fb, fm, whole, tol, depth)
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

// ---------------------------------------------------------------------------
// constructors
// ---------------------------------------------------------------------------

impl DistributionSpec {
    /// Power law pi_x = x^-alpha / zeta(alpha): non-critical with
    /// gamma = 1/alpha.
    pub fn power_law(alpha: f64, truncation: u64) -> Result<Self, DistError> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(DistError::AlphaNotSummable(alpha));
        }
        if truncation < 2 {
            return Err(DistError::TruncationTooSmall { min: 2, got: truncation });
        }
        let norm = power_tail_from(alpha, 1);
        let materialized: Vec<f64> =
            (1..=truncation).map(|x| (x as f64).powf(-alpha) / norm).collect();
        let materialized_mass = kahan_sum(materialized.iter().copied());
        let tail_mass = power_tail_from(alpha, truncation + 1) / norm;
        Ok(Self {
            family: Family::PowerLaw { alpha, norm },
            class: RegularityClass::NonCritical,
            gamma: Some(1.0 / alpha),
            truncation,
            materialized,
            materialized_mass,
            tail_mass,
            x0_strict: Some(1),
        })
    }

    /// Geometric-type law pi_x = (e^a - 1) e^{-a x}: sub-critical, gamma = 0.
    pub fn geometric(a: f64) -> Result<Self, DistError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(DistError::NonPositiveRate(a));
        }
        // materialize until the tail drops below ~1e-15 of the mass
        let truncation = ((36.0 / a).ceil() as u64).clamp(8, 4_000_000);
        let c = a.exp_m1();
        let materialized: Vec<f64> = (1..=truncation).map(|x| c * (-a * x as f64).exp()).collect();
        let materialized_mass = kahan_sum(materialized.iter().copied());
        let tail_mass = (-a * truncation as f64).exp(); // 1 - CDF(M), exact
        Ok(Self {
            family: Family::Geometric { a },
            class: RegularityClass::SubCritical,
            gamma: Some(0.0),
            truncation,
            materialized,
            materialized_mass,
            tail_mass,
            x0_strict: Some(1),
        })
    }

    /// Log-power law pi_x proportional to 1/((x+2) ln^beta(x+2)):
    /// sup-critical, gamma = 1. The +2 offset keeps the logarithm positive
    /// from x = 1 without changing the asymptotic class.
    pub fn log_power(beta: f64, truncation: u64) -> Result<Self, DistError> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(DistError::BetaNotSummable(beta));
        }
        if truncation < 3 {
            return Err(DistError::TruncationTooSmall { min: 3, got: truncation });
        }
        let norm = log_power_tail_from(beta, 1);
        let materialized: Vec<f64> =
            (1..=truncation).map(|x| log_power_weight(beta, x) / norm).collect();
        let materialized_mass = kahan_sum(materialized.iter().copied());
        let tail_mass = log_power_tail_from(beta, truncation + 1) / norm;
        Ok(Self {
            family: Family::LogPower { beta, norm },
            class: RegularityClass::SupCritical,
            gamma: Some(1.0),
            truncation,
            materialized,
            materialized_mass,
            tail_mass,
            x0_strict: Some(1),
        })
    }

    /// Finite law from explicit weights (must sum to 1 within 1e-12).
    pub fn explicit(weights: Vec<f64>) -> Result<Self, DistError> {
        if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(DistError::BadExplicitWeights(f64::NAN));
        }
        let sum = kahan_sum(weights.iter().copied());
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DistError::BadExplicitWeights(sum));
        }
        let truncation = weights.len() as u64;
        let x0 = strict_decrease_start(&weights);
        Ok(Self {
            family: Family::Explicit { weights: weights.clone() },
            class: RegularityClass::Irregular,
            gamma: None,
            truncation,
            materialized: weights,
            materialized_mass: sum,
            tail_mass: 0.0,
            x0_strict: x0,
        })
    }

    /// Finite renormalized restriction of `self` to atoms `1..=m`.
    pub fn truncate_renormalized(&self, m: u64) -> Result<Self, DistError> {
        if m < 1 || m > self.truncation {
            return Err(DistError::TruncationTooSmall { min: 1, got: m });
        }
        let head = &self.materialized[..m as usize];
        let sum = kahan_sum(head.iter().copied());
        Self::explicit(head.iter().map(|w| w / sum).collect())
    }

    /// Piecewise power law alternating between exponents 1/gamma1 and
    /// 1/gamma2 across the cut points m_j taken from `switch_points`; each
    /// segment is renormalized so the running tail mass is continuous. With
    /// an empty switch list this is a plain power law with exponent
    /// 1/gamma1. Always classified as irregular.
    pub fn glued(
        gamma1: f64,
        gamma2: f64,
        switch_points: &[(u64, u64)],
    ) -> Result<Self, DistError> {
        if !(gamma1 > 0.0 && gamma1 < gamma2 && gamma2 < 1.0) {
            return Err(DistError::BadGammaPair(gamma1, gamma2));
        }
        let mut prev = (0u64, 1u64);
        for &(n, m) in switch_points {
            if n <= prev.0 || m <= prev.1 || m < 2 {
                return Err(DistError::BadSwitchPoints);
            }
            prev = (n, m);
        }
        let alpha1 = 1.0 / gamma1;
        let alpha2 = 1.0 / gamma2;
        let mut segments: Vec<GluedSegment> = Vec::with_capacity(switch_points.len() + 1);
        let mut leftover = 1.0f64; // mass not yet assigned to earlier segments
        let mut start = 1u64;
        for i in 0..=switch_points.len() {
            let alpha = if i % 2 == 0 { alpha1 } else { alpha2 };
            let norm = power_tail_from(alpha, start) / leftover;
            segments.push(GluedSegment { start, alpha, norm });
            if i < switch_points.len() {
                let end = switch_points[i].1;
                leftover *= power_tail_from(alpha, end) / power_tail_from(alpha, start);
                start = end;
            }
        }
        // suffix_mass[i] = total mass of segments i..
        let mut suffix_mass = vec![0.0f64; segments.len() + 1];
        for i in (0..segments.len()).rev() {
            let seg_mass = if i + 1 < segments.len() {
                (power_tail_from(segments[i].alpha, segments[i].start)
                    - power_tail_from(segments[i].alpha, segments[i + 1].start))
                    / segments[i].norm
            } else {
                power_tail_from(segments[i].alpha, segments[i].start) / segments[i].norm
            };
            suffix_mass[i] = suffix_mass[i + 1] + seg_mass;
        }
        let family = Family::Glued {
            gamma1,
            gamma2,
            switch_points: switch_points.to_vec(),
            segments,
            suffix_mass,
        };
        let truncation = DEFAULT_TRUNCATION;
        let materialized: Vec<f64> =
            (1..=truncation).map(|x| family_mass(&family, x)).collect();
        let materialized_mass = kahan_sum(materialized.iter().copied());
        let tail_mass = family_tail_beyond(&family, truncation);
        let x0_strict = {
            let mut x0 = strict_decrease_start(&materialized);
            // cuts beyond the materialized range can still break monotonicity
            if let Family::Glued { switch_points, .. } = &family {
                for &(_, m) in switch_points {
                    if m > truncation && m >= 2 && family_mass(&family, m - 1) <= family_mass(&family, m)
                    {
                        x0 = None;
                    }
                }
            }
            x0
        };
        Ok(Self {
            family,
            class: RegularityClass::Irregular,
            gamma: None,
            truncation,
            materialized,
            materialized_mass,
            tail_mass,
            x0_strict,
        })
    }
}

/// Smallest x0 such that the materialized weights are strictly decreasing
/// (and positive) from x0 on.
fn strict_decrease_start(weights: &[f64]) -> Option<u64> {
    let mut x0 = 1u64;
    for i in 0..weights.len().saturating_sub(1) {
        if !(weights[i] > weights[i + 1] && weights[i + 1] > 0.0) {
            x0 = i as u64 + 2;
        }
    }
    if (x0 as usize) < weights.len() || weights.len() == 1 {
        Some(x0)
    } else {
        None
    }
}

fn family_mass(family: &Family, x: u64) -> f64 {
    match family {
        Family::PowerLaw { alpha, norm } => (x as f64).powf(-*alpha) / norm,
        Family::Geometric { a } => a.exp_m1() * (-a * x as f64).exp(),
        Family::LogPower { beta, norm } => log_power_weight(*beta, x) / norm,
        Family::Explicit { weights } => {
            weights.get((x - 1) as usize).copied().unwrap_or(0.0)
        }
        Family::Glued { segments, .. } => {
            let seg = glued_segment_of(segments, x);
            (x as f64).powf(-seg.alpha) / seg.norm
        }
    }
}

fn glued_segment_of(segments: &[GluedSegment], x: u64) -> &GluedSegment {
    let mut idx = 0;
    for (i, s) in segments.iter().enumerate() {
        if s.start <= x {
            idx = i;
        } else {
            break;
        }
    }
    &segments[idx]
}

/// sum_{x > m} pi_x, analytic.
fn family_tail_beyond(family: &Family, m: u64) -> f64 {
    match family {
        Family::PowerLaw { alpha, norm } => power_tail_from(*alpha, m + 1) / norm,
        Family::Geometric { a } => (-a * m as f64).exp(),
        Family::LogPower { beta, norm } => log_power_tail_from(*beta, m + 1) / norm,
        Family::Explicit { weights } => {
            if (m as usize) >= weights.len() {
                0.0
            } else {
                kahan_sum(weights[m as usize..].iter().copied())
            }
        }
        Family::Glued { segments, suffix_mass, .. } => {
            let x = m + 1;
            let mut i = 0;
            for (j, s) in segments.iter().enumerate() {
                if s.start <= x {
                    i = j;
                } else {
                    break;
                }
            }
            let seg = &segments[i];
            let seg_tail_from_x = power_tail_from(seg.alpha, x) / seg.norm;
            if i + 1 < segments.len() {
                let seg_tail_from_end = power_tail_from(seg.alpha, segments[i + 1].start) / seg.norm;
                seg_tail_from_x - seg_tail_from_end + suffix_mass[i + 1]
            } else {
                seg_tail_from_x
            }
        }
    }
}

/// sum_{x > m} pi_x^k, analytic (k >= 1).
fn family_tail_power_beyond(family: &Family, m: u64, k: u32) -> f64 {
    if k == 1 {
        return family_tail_beyond(family, m);
    }
    let kf = k as f64;
    match family {
        Family::PowerLaw { alpha, norm } => {
            power_tail_from(alpha * kf, m + 1) / norm.powf(kf)
        }
        Family::Geometric { a } => {
            // sum_{x>m} c^k e^{-akx} = c^k e^{-ak(m+1)} / (1 - e^{-ak})
            let c = a.exp_m1();
            c.powf(kf) * (-a * kf * (m as f64 + 1.0)).exp() / (-(-a * kf).exp_m1())
        }
        Family::LogPower { beta, norm } => {
            log_power_tail_power_from(*beta, m + 1, k) / norm.powf(kf)
        }
        Family::Explicit { weights } => {
            if (m as usize) >= weights.len() {
                0.0
            } else {
                kahan_sum(weights[m as usize..].iter().map(|w| w.powi(k as i32)))
            }
        }
        Family::Glued { segments, .. } => {
            let mut total = 0.0;
            let x = m + 1;
            for (i, seg) in segments.iter().enumerate() {
                let from = seg.start.max(x);
                let end = segments.get(i + 1).map(|s| s.start);
                if let Some(end) = end {
                    if from >= end {
                        continue;
                    }
                    total += (power_tail_from(seg.alpha * kf, from)
                        - power_tail_from(seg.alpha * kf, end))
                        / seg.norm.powf(kf);
                } else {
                    total += power_tail_from(seg.alpha * kf, from) / seg.norm.powf(kf);
                }
            }
            total
        }
    }
}

// ---------------------------------------------------------------------------
// accessors and regularity metadata
// ---------------------------------------------------------------------------

impl DistributionSpec {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn class(&self) -> RegularityClass {
        self.class
    }

    /// Regular-variation index gamma; None for irregular laws.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Number of exactly materialized atoms M.
    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    /// pi_x for x = 1..=M without recomputation.
    pub fn materialized(&self) -> &[f64] {
        &self.materialized
    }

    pub fn materialized_mass(&self) -> f64 {
        self.materialized_mass
    }

    /// Mass beyond the materialized range: sum_{x > M} pi_x.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Largest single-atom mass (atom 1 for every built-in family, but scan
    /// anyway to cover explicit laws).
    pub fn max_mass(&self) -> f64 {
        self.materialized.iter().copied().fold(0.0, f64::max)
    }

    /// Observed start of strict decrease of x -> pi_x, when there is one.
    pub fn x0_strict(&self) -> Option<u64> {
        self.x0_strict
    }

    /// Support size for finite laws.
    pub fn support_size(&self) -> Option<u64> {
        match &self.family {
            Family::Explicit { weights } => Some(weights.len() as u64),
            _ => None,
        }
    }

    /// pi_x, exact for any x >= 1 (analytic beyond the materialized range).
    pub fn mass(&self, x: u64) -> Result<f64, DistError> {
        if x == 0 {
            return Err(DistError::AtomOutOfRange);
        }
        if x <= self.truncation {
            return Ok(self.materialized[(x - 1) as usize]);
        }
        Ok(family_mass(&self.family, x))
    }

    /// sum_{x > m} pi_x for any m >= M (analytic tail).
    pub fn tail_mass_beyond(&self, m: u64) -> f64 {
        if m >= TAIL_INVERSION_CAP {
            return family_tail_beyond(&self.family, TAIL_INVERSION_CAP);
        }
        family_tail_beyond(&self.family, m.max(self.truncation))
    }

    /// sum_{x > M} pi_x^k (tail power sums used for truncation corrections).
    pub fn tail_power_sum(&self, k: u32) -> f64 {
        family_tail_power_beyond(&self.family, self.truncation, k)
    }

    /// Smallest x > M accumulating fraction u of the tail mass, or None when
    /// the quantile falls beyond the inversion cap.
    pub fn tail_quantile(&self, u: f64) -> Option<u64> {
        debug_assert!((0.0..1.0).contains(&u));
        if self.tail_mass <= 0.0 {
            return None;
        }
        if let Family::Geometric { a } = &self.family {
            // memoryless tail: closed-form inversion
            let j = ((-(1.0 - u).ln()) / a).ceil().max(1.0);
            return Some(self.truncation + j as u64);
        }
        let target = (1.0 - u) * self.tail_mass;
        if self.tail_mass_beyond(TAIL_INVERSION_CAP) > target {
            return None;
        }
        let mut lo = self.truncation; // T(lo) > target
        let mut hi = TAIL_INVERSION_CAP; // T(hi) <= target
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tail_mass_beyond(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    // -- condition (C0)/(C1) metadata ---------------------------------------

    /// phi(x) = 1 / pi_x, continuously extended in x. None for explicit laws.
    pub fn phi(&self, x: f64) -> Option<f64> {
        if x < 1.0 {
            return None;
        }
        match &self.family {
            Family::PowerLaw { alpha, norm } => Some(norm * x.powf(*alpha)),
            Family::Geometric { a } => Some((a * x).exp() / a.exp_m1()),
            Family::LogPower { beta, norm } => {
                let u = x + 2.0;
                Some(norm * u * u.ln().powf(*beta))
            }
            Family::Explicit { .. } => None,
            Family::Glued { segments, .. } => {
                let seg = glued_segment_of(segments, x.floor().max(1.0) as u64);
                Some(seg.norm * x.powf(seg.alpha))
            }
        }
    }

    /// phi^{-1}(y) on the eventually monotone range. None for explicit laws.
    pub fn phi_inv(&self, y: f64) -> Option<f64> {
        if !(y > 0.0) {
            return None;
        }
        match &self.family {
            Family::PowerLaw { alpha, norm } => Some((y / norm).powf(1.0 / alpha)),
            Family::Geometric { a } => Some((y * a.exp_m1()).ln() / a),
            Family::LogPower { beta, norm } => {
                // solve norm * u ln^beta u = y for u by bisection, x = u - 2
                let target = y / norm;
                let f = |u: f64| u * u.ln().powf(*beta);
                let mut lo = 3.0f64;
                if f(lo) >= target {
                    return Some(1.0);
                }
                let mut hi = lo * 2.0;
                while f(hi) < target {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return None;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-12 * hi {
                        break;
                    }
                }
                Some(0.5 * (lo + hi) - 2.0)
            }
            Family::Explicit { .. } => None,
            Family::Glued { segments, .. } => {
                for (i, seg) in segments.iter().enumerate() {
                    let x = (y / seg.norm).powf(1.0 / seg.alpha);
                    let lo = seg.start as f64;
                    let hi = segments.get(i + 1).map(|s| s.start as f64).unwrap_or(f64::INFINITY);
                    if x >= lo && x < hi {
                        return Some(x);
                    }
                }
                // y falls in a jump at a cut: clamp to the nearest boundary
                let seg = segments.last().unwrap();
                Some((y / seg.norm).powf(1.0 / seg.alpha).max(seg.start as f64))
            }
        }
    }

    /// Derivative of phi_0(x) = phi^{-1}(e^x); constant 1/a for the
    /// geometric family. Sub-critical only.
    pub fn phi0_prime(&self, _x: f64) -> Option<f64> {
        match &self.family {
            Family::Geometric { a } => Some(1.0 / a),
            _ => None,
        }
    }

    /// Scaling function psi for sup-critical laws (identity here).
    pub fn psi(&self, x: f64) -> Option<f64> {
        match &self.family {
            Family::LogPower { .. } => Some(x),
            _ => None,
        }
    }

    /// Limit density g(lambda) for sup-critical laws.
    pub fn g(&self, lambda: f64) -> Option<f64> {
        match &self.family {
            Family::LogPower { beta, .. } => Some((1.0 + lambda).powf(-beta)),
            _ => None,
        }
    }

    /// L1 norm of g: 1/(beta - 1) for the log-power family.
    pub fn g_l1_norm(&self) -> Option<f64> {
        match &self.family {
            Family::LogPower { beta, .. } => Some(1.0 / (beta - 1.0)),
            _ => None,
        }
    }

    pub fn summary(&self) -> SpecSummary {
        let family = match &self.family {
            Family::PowerLaw { alpha, .. } => format!("power_law(alpha={alpha})"),
            Family::Geometric { a } => format!("geometric(a={a})"),
            Family::LogPower { beta, .. } => format!("log_power(beta={beta})"),
            Family::Explicit { weights } => format!("explicit({} atoms)", weights.len()),
            Family::Glued { gamma1, gamma2, switch_points, .. } => format!(
                "glued(gamma1={gamma1}, gamma2={gamma2}, cuts={:?})",
                switch_points.iter().map(|&(_, m)| m).collect::<Vec<_>>()
            ),
        };
        SpecSummary {
            family,
            class: self.class,
            gamma: self.gamma,
            truncation: self.truncation,
            tail_mass: self.tail_mass,
            x0_strict: self.x0_strict,
        }
    }
}
