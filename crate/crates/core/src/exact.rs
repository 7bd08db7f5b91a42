//! Exact evaluation of occupancy expectations, their leading-order
//! asymptotics, and the limit constants of the intensity/degree laws, with
//! per-quantity truncation-error accounting.
//!
//! Everything sums over the materialized atoms of a [`DistributionSpec`] plus
//! an analytic correction (or bound) for the tail. All binomial factors are
//! handled in log space, folded into the per-atom terms, so expectations with
//! n up to 10^8 neither overflow nor lose the small-atom contributions.

use crate::dist::{DistributionSpec, RegularityClass};
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("n must be at least 1 (got {0})")]
    InvalidN(u64),
    #[error("need 1 <= ell <= n (got ell={ell}, n={n})")]
    InvalidEll { ell: u64, n: u64 },
    #[error("need 1 <= k <= ell (got k={k}, ell={ell})")]
    InvalidK { k: u64, ell: u64 },
    #[error("gamma must lie strictly inside (0, 1) (got {0})")]
    GammaOutOfRange(f64),
    #[error("derivative order must be at least 1")]
    InvalidDerivativeOrder,
    #[error("regime {requested:?} does not match the spec's class {actual:?}")]
    RegimeMismatch { requested: LimitRegime, actual: RegularityClass },
    #[error("no asymptotic form for irregular laws")]
    IrregularSpec,
    #[error("undirected limits are not defined in the sub-critical regime")]
    UndirectedSubCritical,
}

fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

// ---------------------------------------------------------------------------
// E(n) = sum_x [1 - (1 - pi_x)^n]
// ---------------------------------------------------------------------------

/// E(n) over the materialized atoms only (no tail). Used for identities on
/// truncated supports.
pub fn expected_range_materialized(spec: &DistributionSpec, n: u64) -> Result<f64, ExactError> {
    if n == 0 {
        return Err(ExactError::InvalidN(n));
    }
    let nf = n as f64;
    let mut acc = 0.0f64;
    for &p in spec.materialized() {
        // 1 - (1-p)^n = -expm1(n ln(1-p))
        acc += -(nf * (-p).ln_1p()).exp_m1();
    }
    Ok(acc)
}

/// E(n) = E R_n with an analytic tail correction.
///
/// The tail contribution sum_{x>M} [1-(1-pi_x)^n] is expanded as the
/// alternating series sum_k (-1)^{k-1} C(n,k) sum_{x>M} pi_x^k, valid (with
/// the next term bounding the remainder) whenever n * pi_{M+1} <= 1/2; when
/// that fails the tail is left out and bounded by n * tail_mass.
pub fn expected_range(spec: &DistributionSpec, n: u64) -> Result<(f64, f64), ExactError> {
    let value = expected_range_materialized(spec, n)?;
    let tail_mass = spec.tail_mass();
    if tail_mass <= 0.0 {
        return Ok((value, 0.0));
    }
    let nf = n as f64;
    let pi_next = spec.mass(spec.truncation() + 1).unwrap_or(0.0);
    if nf * pi_next <= 0.5 {
        let mut tail = 0.0f64;
        let mut sign = 1.0f64;
        for k in 1..=4u32 {
            let term = (ln_binom(n, k as u64)).exp() * spec.tail_power_sum(k);
            tail += sign * term;
            sign = -sign;
        }
        let bound = (ln_binom(n, 5)).exp() * spec.tail_power_sum(5);
        Ok((value + tail, bound.max(1e-15 * tail.abs())))
    } else {
        Ok((value, nf * tail_mass))
    }
}

// ---------------------------------------------------------------------------
// S_ell(n) = sum_x pi_x^ell (1 - pi_x)^{n - ell} and E_ell(n) = C(n,ell) S_ell(n)
// ---------------------------------------------------------------------------

fn check_ell(ell: u64, n: u64) -> Result<(), ExactError> {
    if n == 0 {
        return Err(ExactError::InvalidN(n));
    }
    if ell < 1 || ell > n {
        return Err(ExactError::InvalidEll { ell, n });
    }
    Ok(())
}

/// Per-atom term exp(ln_c + ell ln pi + (n-ell) ln(1-pi)), summed over the
/// materialized atoms.
fn binom_sum_materialized(spec: &DistributionSpec, ell: u64, n: u64, ln_c: f64) -> f64 {
    let lf = ell as f64;
    let rest = (n - ell) as f64;
    let mut acc = 0.0f64;
    for &p in spec.materialized() {
        let ln_term = ln_c + lf * p.ln() + rest * (-p).ln_1p();
        if ln_term > -745.0 {
            acc += ln_term.exp();
        }
    }
    acc
}

/// Tail contribution sum_{x>M} exp(ln_c + ell ln pi(x) + (n-ell) ln(1-pi(x)))
/// by adaptive quadrature on t = ln x, plus the Euler-Maclaurin half-term.
/// Only used when the binomial peak ell/n lies inside the materialized range
/// (n * pi_{M+1} <= 1/2), so the integrand decays from the start.
fn binom_sum_tail(spec: &DistributionSpec, ell: u64, n: u64, ln_c: f64) -> Option<(f64, f64)> {
    let m = spec.truncation();
    if spec.tail_mass() <= 0.0 {
        return Some((0.0, 0.0));
    }
    let pi_next = spec.mass(m + 1).ok()?;
    if (n as f64) * pi_next > 0.5 {
        return None;
    }
    spec.phi(m as f64 + 1.0)?; // families without a continuous extension bail out
    let lf = ell as f64;
    let rest = (n - ell) as f64;
    let h = |x: f64| -> f64 {
        let p = 1.0 / spec.phi(x).unwrap_or(f64::INFINITY);
        if !(p > 0.0) {
            return 0.0;
        }
        let ln_term = ln_c + lf * p.ln() + rest * (-p).ln_1p();
        if ln_term > -745.0 {
            ln_term.exp()
        } else {
            0.0
        }
    };
    let t0 = (m as f64 + 1.0).ln();
    let g = |t: f64| h(t.exp()) * t.exp();
    let integral = crate::dist::simpson_to_decay(&g, t0, 1e-12);
    let half = h(m as f64 + 1.0) / 2.0;
    // crude derivative magnitude for the EM remainder estimate
    let slope = (h(m as f64 + 2.0) - h(m as f64)).abs() / 2.0;
    let value = integral + half;
    let err = slope / 12.0 + 1e-10 * value.abs();
    Some((value, err))
}

/// S_ell(n), with tail handled like `expected_range` (computed when the
/// decay condition holds, otherwise bounded).
pub fn s_series(spec: &DistributionSpec, ell: u64, n: u64) -> Result<(f64, f64), ExactError> {
    check_ell(ell, n)?;
    let value = binom_sum_materialized(spec, ell, n, 0.0);
    match binom_sum_tail(spec, ell, n, 0.0) {
        Some((tail, err)) => Ok((value + tail, err)),
        None => {
            let m = spec.truncation();
            let pi_next = spec.mass(m + 1).unwrap_or(0.0);
            let bound = pi_next.powi(ell as i32 - 1) * spec.tail_mass();
            Ok((value, bound))
        }
    }
}

/// E_ell(n) = E R_{n,ell} = C(n,ell) S_ell(n), binomial folded per atom.
pub fn e_ell(spec: &DistributionSpec, ell: u64, n: u64) -> Result<(f64, f64), ExactError> {
    check_ell(ell, n)?;
    let ln_c = ln_binom(n, ell);
    let value = binom_sum_materialized(spec, ell, n, ln_c);
    match binom_sum_tail(spec, ell, n, ln_c) {
        Some((tail, err)) => Ok((value + tail, err)),
        None => {
            let m = spec.truncation();
            let pi_next = spec.mass(m + 1).unwrap_or(0.0);
            let bound = (ln_c + (ell as f64 - 1.0) * pi_next.ln()).exp() * spec.tail_mass();
            Ok((value, bound.min(n as f64 * spec.tail_mass())))
        }
    }
}

/// E_ell(n) over materialized atoms only.
pub fn e_ell_materialized(spec: &DistributionSpec, ell: u64, n: u64) -> Result<f64, ExactError> {
    check_ell(ell, n)?;
    Ok(binom_sum_materialized(spec, ell, n, ln_binom(n, ell)))
}

/// E_{ell+}(n) = E(n) - sum_{j<ell} E_j(n).
pub fn e_ell_plus(spec: &DistributionSpec, ell: u64, n: u64) -> Result<(f64, f64), ExactError> {
    check_ell(ell, n)?;
    let (mut value, mut err) = expected_range(spec, n)?;
    for j in 1..ell {
        let (ej, eje) = e_ell(spec, j, n)?;
        value -= ej;
        err += eje;
    }
    Ok((value, err))
}

// ---------------------------------------------------------------------------
// limit fractions r_ell(gamma)
// ---------------------------------------------------------------------------

/// r_ell(gamma) = gamma * prod_{j=1}^{ell-1} (j - gamma) / ell!, evaluated by
/// the stable product recursion r_{l+1} = r_l (l - gamma) / (l + 1).
pub fn r_limit(gamma: f64, ell: u64) -> Result<f64, ExactError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ExactError::GammaOutOfRange(gamma));
    }
    if ell == 0 {
        return Err(ExactError::InvalidEll { ell, n: u64::MAX });
    }
    let mut r = gamma;
    for l in 1..ell {
        r *= (l as f64 - gamma) / (l as f64 + 1.0);
    }
    Ok(r)
}

/// sum_{j >= ell} r_j(gamma) = ell * r_ell(gamma) / gamma (closed form).
pub fn r_limit_tail(gamma: f64, ell: u64) -> Result<f64, ExactError> {
    Ok(ell as f64 * r_limit(gamma, ell)? / gamma)
}

// ---------------------------------------------------------------------------
// occupancy probabilities S_{k,ell}(pi)
// ---------------------------------------------------------------------------

/// Exact occupancy table S_{k,ell} for k <= k_max, ell <= ell_max, with a
/// per-ell truncation error bound.
#[derive(Debug, Clone)]
pub struct DistinctTable {
    pub k_max: u64,
    pub ell_max: u64,
    values: Vec<f64>, // (k_max+1) x (ell_max+1), row k
    pub err: Vec<f64>,
}

impl DistinctTable {
    pub fn s(&self, k: u64, ell: u64) -> f64 {
        self.values[(k * (self.ell_max + 1) + ell) as usize]
    }
}

/// Dynamic program over atoms: maintain the factorial-normalized coefficients
/// a[k][d] = d! [z^d] e_k, where e_k is the degree-k elementary symmetric
/// accumulation of the per-atom series (e^{pi_x z} - 1) truncated at degree
/// ell_max. Then S_{k,ell} = a[k][ell]. All updates are non-negative, so the
/// table is numerically stable at any size.
///
/// Atoms are processed in order until the unprocessed mass can no longer move
/// any entry by more than `eps` (the displacement at level ell is bounded by
/// ell * remaining mass); the bound actually achieved is reported per ell.
pub fn s_distinct_table(
    spec: &DistributionSpec,
    k_max: u64,
    ell_max: u64,
    eps: f64,
) -> DistinctTable {
    let width = (ell_max + 1) as usize;
    let kk = k_max as usize;
    let mut a = vec![vec![0.0f64; width]; kk + 1];
    a[0][0] = 1.0;
    let mut processed = 0.0f64;
    let mut remaining = 1.0f64;
    let lf = ell_max as f64;
    for &p in spec.materialized() {
        if lf * remaining <= eps {
            break;
        }
        // depth: stop once (ell_max * p)^m / m! falls below resolution
        let mut depth = 1usize;
        let mut bound = lf * p;
        while depth < width - 1 && bound * lf * p / (depth as f64 + 1.0) > 1e-18 {
            bound *= lf * p / (depth as f64 + 1.0);
            depth += 1;
        }
        for k in (1..=kk).rev() {
            // a[k][d] += sum_{m=1..depth} C(d,m) p^m a[k-1][d-m]
            let (lo_rows, hi_rows) = a.split_at_mut(k);
            let lo = &lo_rows[k - 1];
            let hi = &mut hi_rows[0];
            for d in (1..width).rev() {
                let mut add = 0.0f64;
                let mut coeff = 1.0f64; // C(d, m) p^m, built incrementally
                for m in 1..=depth.min(d) {
                    coeff *= p * ((d - m + 1) as f64) / (m as f64);
                    add += coeff * lo[d - m];
                }
                hi[d] += add;
            }
        }
        processed += p;
        remaining = (1.0 - processed).max(0.0);
    }
    let err: Vec<f64> = (0..width)
        .map(|ell| (ell as f64 * remaining).min(1.0) + 1e-13)
        .collect();
    let mut values = Vec::with_capacity((kk + 1) * width);
    for row in &a {
        values.extend_from_slice(row);
    }
    DistinctTable { k_max, ell_max, values, err }
}

/// Probability that `ell` i.i.d. draws occupy exactly `k` distinct atoms.
pub fn s_distinct(spec: &DistributionSpec, k: u64, ell: u64) -> Result<(f64, f64), ExactError> {
    if k < 1 || k > ell {
        return Err(ExactError::InvalidK { k, ell });
    }
    let table = s_distinct_table(spec, k, ell, 1e-12);
    Ok((table.s(k, ell), table.err[ell as usize]))
}

// ---------------------------------------------------------------------------
// degree-limit constants f_k, f_hat_k, f_tilde_k
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitRegime {
    NonCritical,
    SupCritical,
    SubCritical,
}

impl LimitRegime {
    pub fn of(class: RegularityClass) -> Option<Self> {
        match class {
            RegularityClass::NonCritical => Some(Self::NonCritical),
            RegularityClass::SupCritical => Some(Self::SupCritical),
            RegularityClass::SubCritical => Some(Self::SubCritical),
            RegularityClass::Irregular => None,
        }
    }
}

fn check_regime(spec: &DistributionSpec, regime: LimitRegime) -> Result<(), ExactError> {
    match LimitRegime::of(spec.class()) {
        Some(r) if r == regime => Ok(()),
        _ => Err(ExactError::RegimeMismatch { requested: regime, actual: spec.class() }),
    }
}

/// Weight of the ell-term in the degree-limit series for a regime.
fn series_weight(regime: LimitRegime, gamma: f64, ell: u64) -> f64 {
    match regime {
        LimitRegime::NonCritical => r_limit(gamma, ell).unwrap_or(0.0),
        LimitRegime::SupCritical => {
            let lf = ell as f64;
            1.0 / (lf * (lf - 1.0))
        }
        LimitRegime::SubCritical => 1.0 / ell as f64,
    }
}

/// One term of a degree-limit series: weight(ell) * S_{k, ell} (or S_{k, 2 ell}
/// for the undirected graph).
pub fn f_limit_term(
    spec: &DistributionSpec,
    k: u64,
    ell: u64,
    regime: LimitRegime,
    undirected: bool,
) -> Result<(f64, f64), ExactError> {
    check_regime(spec, regime)?;
    if regime == LimitRegime::SubCritical && undirected {
        return Err(ExactError::UndirectedSubCritical);
    }
    let occupancy_ell = if undirected { 2 * ell } else { ell };
    if k < 1 || k > occupancy_ell {
        return Err(ExactError::InvalidK { k, ell: occupancy_ell });
    }
    if regime == LimitRegime::SupCritical && ell < 2 {
        return Err(ExactError::InvalidEll { ell, n: u64::MAX });
    }
    let gamma = spec.gamma().unwrap_or(f64::NAN);
    let w = series_weight(regime, gamma, ell);
    let (s, err) = s_distinct(spec, k, occupancy_ell)?;
    Ok((w * s, w * err))
}

/// Truncated degree-limit series with an explicit remainder bound:
/// - non-critical: sum_{ell >= k} r_ell(gamma) S_{k,ell} (undirected: S_{k,2ell})
/// - sup-critical: sum_{ell >= max(k,2)} S_{k,ell} / (ell (ell-1))
/// - sub-critical: sum_{ell >= k} S_{k,ell} / ell
pub fn f_limit(
    spec: &DistributionSpec,
    k: u64,
    regime: LimitRegime,
    undirected: bool,
    l_max: u64,
) -> Result<(f64, f64), ExactError> {
    check_regime(spec, regime)?;
    if regime == LimitRegime::SubCritical && undirected {
        return Err(ExactError::UndirectedSubCritical);
    }
    if k < 1 {
        return Err(ExactError::InvalidK { k, ell: l_max });
    }
    let gamma = spec.gamma().unwrap_or(f64::NAN);
    let occupancy_floor = if undirected { k.div_ceil(2) } else { k };
    let ell_start = match regime {
        LimitRegime::SupCritical => occupancy_floor.max(2),
        _ => occupancy_floor.max(1),
    };
    if l_max < ell_start {
        return Err(ExactError::InvalidEll { ell: l_max, n: u64::MAX });
    }
    let table_ell = if undirected { 2 * l_max } else { l_max };
    let table = s_distinct_table(spec, k, table_ell, 1e-9);
    let mut value = 0.0f64;
    let mut err = 0.0f64;
    for ell in ell_start..=l_max {
        let occ = if undirected { 2 * ell } else { ell };
        let w = series_weight(regime, gamma, ell);
        value += w * table.s(k, occ);
        err += w * table.err[occ as usize];
    }
    // remainder past l_max: series weights times the occupancy decay bound
    // S_{k,m} <= min(1, C(m,k) sigma_k^{m-k}) with sigma_k the top-k mass
    let sigma: f64 = (1..=k.min(spec.truncation()))
        .map(|x| spec.mass(x).unwrap_or(0.0))
        .sum();
    let mut remainder = 0.0f64;
    if sigma < 1.0 - 1e-9 {
        let mut ell = l_max + 1;
        loop {
            let occ = if undirected { 2 * ell } else { ell };
            let w = series_weight(regime, gamma, ell);
            let ln_bound = ln_binom(occ, k) + (occ - k) as f64 * sigma.ln();
            let term = w * ln_bound.exp().min(1.0);
            remainder += term;
            if term < 1e-16 {
                break;
            }
            ell += 1;
            if ell > l_max + 65_536 {
                remainder = remainder.max(weight_tail_bound(regime, gamma, l_max));
                break;
            }
        }
    } else {
        remainder = weight_tail_bound(regime, gamma, l_max);
    }
    Ok((value, err + remainder))
}

/// Closed-form bound on the sum of series weights past l_max.
fn weight_tail_bound(regime: LimitRegime, gamma: f64, l_max: u64) -> f64 {
    match regime {
        LimitRegime::NonCritical => r_limit_tail(gamma, l_max + 1).unwrap_or(1.0),
        LimitRegime::SupCritical => 1.0 / l_max as f64,
        LimitRegime::SubCritical => 1.0, // sum 1/ell alone diverges; S decay is essential
    }
}

// ---------------------------------------------------------------------------
// leading-order asymptotics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationKind {
    Range,
    Intensity(u64),
    IntensityPlus(u64),
}

/// Leading term of E R_n, E R_{n,ell} or E R_{n,ell+} for regular laws.
pub fn asymptotic_expectation(
    spec: &DistributionSpec,
    n: u64,
    which: ExpectationKind,
) -> Result<f64, ExactError> {
    if n == 0 {
        return Err(ExactError::InvalidN(n));
    }
    let nf = n as f64;
    let phi_inv = spec.phi_inv(nf).ok_or(ExactError::IrregularSpec)?;
    match spec.class() {
        RegularityClass::NonCritical => {
            let g = spec.gamma().unwrap();
            Ok(match which {
                ExpectationKind::Range => gamma(1.0 - g) * phi_inv,
                ExpectationKind::Intensity(l) => {
                    let lf = l as f64;
                    g * gamma(lf - g) / gamma(lf + 1.0) * phi_inv
                }
                ExpectationKind::IntensityPlus(l) if l <= 1 => gamma(1.0 - g) * phi_inv,
                ExpectationKind::IntensityPlus(l) => {
                    let lf = l as f64;
                    gamma(lf - g) / gamma(lf) * phi_inv
                }
            })
        }
        RegularityClass::SubCritical => Ok(match which {
            ExpectationKind::Range | ExpectationKind::IntensityPlus(_) => phi_inv,
            ExpectationKind::Intensity(l) => {
                // phi_0'(log n) / ell; phi_0' is constant for the geometric family
                spec.phi0_prime(nf.ln()).ok_or(ExactError::IrregularSpec)? / l as f64
            }
        }),
        RegularityClass::SupCritical => {
            let g_l1 = spec.g_l1_norm().ok_or(ExactError::IrregularSpec)?;
            let psi_log_n = spec.psi(nf.ln()).ok_or(ExactError::IrregularSpec)?;
            Ok(match which {
                ExpectationKind::Range | ExpectationKind::Intensity(1) => g_l1 * phi_inv * psi_log_n,
                ExpectationKind::IntensityPlus(l) if l <= 1 => g_l1 * phi_inv * psi_log_n,
                ExpectationKind::Intensity(l) => {
                    let lf = l as f64;
                    phi_inv / (lf * (lf - 1.0))
                }
                ExpectationKind::IntensityPlus(l) => phi_inv / (l as f64 - 1.0),
            })
        }
        RegularityClass::Irregular => Err(ExactError::IrregularSpec),
    }
}

// ---------------------------------------------------------------------------
// derivative series
// ---------------------------------------------------------------------------

/// Real-argument derivative series over the materialized atoms:
/// - ell = 0: E^{(k)}(n) = -sum_x (1-pi)^n (log(1-pi))^k
/// - ell >= 1: S_ell^{(k)}(n) = sum_x pi^ell (1-pi)^{n-ell} (log(1-pi))^k
pub fn derivative_series(
    spec: &DistributionSpec,
    ell: u64,
    k: u32,
    n: u64,
) -> Result<f64, ExactError> {
    if k < 1 {
        return Err(ExactError::InvalidDerivativeOrder);
    }
    if n == 0 || (ell >= 1 && ell > n) {
        return Err(ExactError::InvalidN(n));
    }
    let nf = n as f64;
    let lf = ell as f64;
    let mut acc = 0.0f64;
    for &p in spec.materialized() {
        let lq = (-p).ln_1p(); // log(1 - pi) < 0
        let log_factor = lq.powi(k as i32);
        if ell == 0 {
            acc -= (nf * lq).exp() * log_factor;
        } else {
            let ln_term = lf * p.ln() + (nf - lf) * lq;
            if ln_term > -745.0 {
                acc += ln_term.exp() * log_factor;
            }
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// theory report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TheoryRow {
    pub quantity: String,
    pub params: String,
    pub value: f64,
    pub trunc_err: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TheoryReport {
    pub rows: Vec<TheoryRow>,
}

impl TheoryReport {
    fn push(&mut self, quantity: &str, params: String, value: f64, trunc_err: f64) {
        self.rows.push(TheoryRow { quantity: quantity.to_string(), params, value, trunc_err });
    }
}

/// Evaluate the standard set of theory quantities for one spec: expectations
/// at the requested n's, limit fractions, occupancy constants, degree-limit
/// series and leading-term asymptotics.
pub fn theory_report(
    spec: &DistributionSpec,
    ns: &[u64],
    ells: &[u64],
    ks: &[u64],
    l_max: u64,
) -> Result<TheoryReport, ExactError> {
    let mut report = TheoryReport::default();
    for &n in ns {
        let (e, err) = expected_range(spec, n)?;
        report.push("E", format!("n={n}"), e, err);
        if let Ok(a) = asymptotic_expectation(spec, n, ExpectationKind::Range) {
            report.push("E_leading", format!("n={n}"), a, 0.0);
        }
        for &ell in ells {
            if ell > n {
                continue;
            }
            let (s, serr) = s_series(spec, ell, n)?;
            report.push("S_ell", format!("ell={ell},n={n}"), s, serr);
            let (e, eerr) = e_ell(spec, ell, n)?;
            report.push("E_ell", format!("ell={ell},n={n}"), e, eerr);
            let (ep, eperr) = e_ell_plus(spec, ell, n)?;
            report.push("E_ell_plus", format!("ell={ell},n={n}"), ep, eperr);
            if let Ok(a) = asymptotic_expectation(spec, n, ExpectationKind::Intensity(ell)) {
                report.push("E_ell_leading", format!("ell={ell},n={n}"), a, 0.0);
            }
        }
    }
    if let Some(g) = spec.gamma() {
        if g > 0.0 && g < 1.0 {
            for &ell in ells {
                report.push("r_limit", format!("ell={ell}"), r_limit(g, ell)?, 0.0);
            }
        }
    }
    let max_ell = ells.iter().copied().max().unwrap_or(0);
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if max_ell >= 1 && max_k >= 1 {
        let table = s_distinct_table(spec, max_k, max_ell, 1e-9);
        for &k in ks {
            for &ell in ells {
                if k >= 1 && k <= ell {
                    report.push(
                        "S_distinct",
                        format!("k={k},ell={ell}"),
                        table.s(k, ell),
                        table.err[ell as usize],
                    );
                }
            }
        }
    }
    if let Some(regime) = LimitRegime::of(spec.class()) {
        for &k in ks {
            if let Ok((f, err)) = f_limit(spec, k, regime, false, l_max) {
                let name = match regime {
                    LimitRegime::SubCritical => "f_tilde_k",
                    _ => "f_k",
                };
                report.push(name, format!("k={k}"), f, err);
            }
            if regime != LimitRegime::SubCritical {
                if let Ok((f, err)) = f_limit(spec, k, regime, true, l_max.min(256)) {
                    report.push("f_hat_k", format!("k={k}"), f, err);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn fair_two() -> DistributionSpec {
        DistributionSpec::explicit(vec![0.5, 0.5]).unwrap()
    }

    fn power2(m: u64) -> DistributionSpec {
        DistributionSpec::power_law(2.0, m).unwrap()
    }

    #[test]
    fn expected_range_matches_enumeration() {
        let spec = fair_two();
        let (e2, err) = expected_range(&spec, 2).unwrap();
        let brute = oracle::expected_range_brute(&[0.5, 0.5], 2);
        assert!((brute - 1.5).abs() < 1e-15);
        assert!((e2 - brute).abs() <= 1e-12 + err);
        // a lopsided three-atom law, n = 5
        let w = vec![0.6, 0.3, 0.1];
        let spec3 = DistributionSpec::explicit(w.clone()).unwrap();
        let (e5, _) = expected_range(&spec3, 5).unwrap();
        let brute5 = oracle::expected_range_brute(&w, 5);
        assert!((e5 - brute5).abs() < 1e-12, "{e5} vs {brute5}");
    }

    #[test]
    fn expected_range_n1_is_one() {
        for spec in [
            power2(10_000),
            DistributionSpec::geometric(std::f64::consts::LN_2).unwrap(),
            DistributionSpec::log_power(2.0, 10_000).unwrap(),
            fair_two(),
        ] {
            let (e1, err) = expected_range(&spec, 1).unwrap();
            assert!((e1 - 1.0).abs() <= 1e-9 + err, "{e1} (err {err})");
        }
        assert!(matches!(expected_range(&fair_two(), 0), Err(ExactError::InvalidN(0))));
    }

    #[test]
    fn expected_range_power_law_leading_term() {
        let spec = power2(1_000_000);
        let (e, _) = expected_range(&spec, 1_000_000).unwrap();
        let lead = asymptotic_expectation(&spec, 1_000_000, ExpectationKind::Range).unwrap();
        assert!((e / lead - 1.0).abs() <= 0.05, "E = {e}, leading = {lead}");
    }

    #[test]
    fn expected_range_monotone_and_bounded() {
        let spec = fair_two();
        let mut prev = 0.0;
        for n in 1..=12 {
            let (e, _) = expected_range(&spec, n).unwrap();
            assert!(e > prev);
            assert!(e <= (n as f64).min(2.0) + 1e-12);
            prev = e;
        }
    }

    #[test]
    fn s_series_basics() {
        let spec = fair_two();
        // S_1(1) = sum pi = 1
        let (s11, _) = s_series(&spec, 1, 1).unwrap();
        assert!((s11 - 1.0).abs() < 1e-12);
        // S_2(2) = sum pi^2 = 1/2
        let (s22, _) = s_series(&spec, 2, 2).unwrap();
        assert!((s22 - 0.5).abs() < 1e-12);
        assert!(matches!(s_series(&spec, 3, 2), Err(ExactError::InvalidEll { .. })));
        assert!(matches!(s_series(&spec, 0, 2), Err(ExactError::InvalidEll { .. })));
    }

    #[test]
    fn e_ell_ratio_approaches_r2() {
        let spec = power2(1_000_000);
        let n = 1_000_000;
        let (e2, _) = e_ell(&spec, 2, n).unwrap();
        let (e, _) = expected_range(&spec, n).unwrap();
        assert!((e2 / e - 0.125).abs() <= 0.02, "ratio {}", e2 / e);
    }

    #[test]
    fn partition_identity_on_truncated_support() {
        // sum_ell E_ell(n) = E(n) atom-by-atom on the materialized support
        for (spec, n) in [(power2(2000), 60u64), (fair_two(), 40u64)] {
            let e = expected_range_materialized(&spec, n).unwrap();
            let mut total = 0.0;
            for ell in 1..=n {
                total += e_ell_materialized(&spec, ell, n).unwrap();
            }
            assert!((total / e - 1.0).abs() < 1e-9, "{total} vs {e}");
        }
    }

    #[test]
    fn r_limit_values_and_errors() {
        assert!((r_limit(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((r_limit(0.5, 2).unwrap() - 0.125).abs() < 1e-15);
        assert!((r_limit(0.3, 2).unwrap() - 0.3 * 0.7 / 2.0).abs() < 1e-15);
        assert!(matches!(r_limit(0.0, 1), Err(ExactError::GammaOutOfRange(_))));
        assert!(matches!(r_limit(1.0, 1), Err(ExactError::GammaOutOfRange(_))));
        // power-law asymptotics at ell = 40 within 5%
        let r40 = r_limit(0.5, 40).unwrap();
        let approx = 0.5 / gamma(0.5) * (40.0f64).powf(-1.5);
        assert!((r40 / approx - 1.0).abs() < 0.05, "{r40} vs {approx}");
    }

    #[test]
    fn escape_rate_identity() {
        // r_ell / sum_{j>=ell} r_j = gamma / ell, via the exact recursion
        for gamma in [0.1, 0.5, 0.9] {
            let mut tail = 1.0f64; // sum_{j>=1} r_j
            for ell in 1..=100u64 {
                let r = r_limit(gamma, ell).unwrap();
                let claim = r / tail;
                assert!(
                    (claim - gamma / ell as f64).abs() < 1e-9,
                    "gamma={gamma} ell={ell}: {claim}"
                );
                // closed form for the tail agrees with the recursion
                let closed = r_limit_tail(gamma, ell).unwrap();
                assert!((closed / tail - 1.0).abs() < 1e-9);
                tail -= r;
            }
        }
    }

    #[test]
    fn r_limit_power_law_tail_doubling() {
        // log r_ell - log r_{2 ell} ~ (1 + gamma) log 2 at ell = 64, within 2%
        for gamma in [0.25, 0.5, 0.75] {
            let lhs = r_limit(gamma, 64).unwrap().ln() - r_limit(gamma, 128).unwrap().ln();
            let rhs = (1.0 + gamma) * std::f64::consts::LN_2;
            assert!((lhs / rhs - 1.0).abs() < 0.02, "gamma={gamma}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn s_distinct_trivials_and_geometric() {
        let spec = fair_two();
        let (s, _) = s_distinct(&spec, 1, 1).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        // geometric(ln 2): S_{1,2} = sum 4^-x = 1/3
        let geo = DistributionSpec::geometric(std::f64::consts::LN_2).unwrap();
        let (s12, err) = s_distinct(&geo, 1, 2).unwrap();
        assert!((s12 - 1.0 / 3.0).abs() <= 1e-12 + err, "{s12}");
        assert!(matches!(s_distinct(&spec, 3, 2), Err(ExactError::InvalidK { .. })));
    }

    #[test]
    fn s_distinct_matches_brute_force() {
        let spec = power2(1000).truncate_renormalized(6).unwrap();
        let weights: Vec<f64> = (1..=6).map(|x| spec.mass(x).unwrap()).collect();
        for ell in 1..=5u64 {
            for k in 1..=ell {
                let (dp, _) = s_distinct(&spec, k, ell).unwrap();
                let brute = oracle::distinct_occupancy_brute(&weights, k as usize, ell as usize);
                assert!((dp - brute).abs() < 1e-12, "k={k} ell={ell}: {dp} vs {brute}");
            }
        }
    }

    #[test]
    fn s_distinct_rows_sum_to_one() {
        let spec = power2(1000).truncate_renormalized(8).unwrap();
        let table = s_distinct_table(&spec, 8, 8, 0.0);
        for ell in 1..=8u64 {
            let total: f64 = (1..=ell).map(|k| table.s(k, ell)).sum();
            assert!((total - 1.0).abs() < 1e-12, "ell={ell}: {total}");
        }
    }

    #[test]
    fn f_limit_partitions_to_one() {
        let spec = power2(1000);
        let mut total = 0.0;
        let mut err_total = 0.0;
        for k in 1..=8u64 {
            let (f, err) = f_limit(&spec, k, LimitRegime::NonCritical, false, 200).unwrap();
            total += f;
            err_total += err;
        }
        // k > 8 contributes at most sum_{ell > 8} r_ell
        let beyond = r_limit_tail(0.5, 9).unwrap();
        assert!(
            (total - 1.0).abs() <= err_total + beyond + 1e-6,
            "sum f_k = {total} (err {err_total}, beyond {beyond})"
        );
    }

    #[test]
    fn f_limit_term_sup_critical() {
        let spec = DistributionSpec::log_power(2.0, 50_000).unwrap();
        let (term, err) = f_limit_term(&spec, 1, 2, LimitRegime::SupCritical, false).unwrap();
        let (s12, serr) = s_distinct(&spec, 1, 2).unwrap();
        assert!((term - s12 / 2.0).abs() <= err + serr + 1e-12);
        assert!(matches!(
            f_limit_term(&spec, 1, 2, LimitRegime::NonCritical, false),
            Err(ExactError::RegimeMismatch { .. })
        ));
    }

    #[test]
    fn asymptotic_expectation_by_regime() {
        let ln2 = std::f64::consts::LN_2;
        let n = 1_000_000u64;
        // sub-critical: E(n)/phi^-1(n) in 1 +- 0.1, phi^-1(1e6) = log2(1e6)
        let geo = DistributionSpec::geometric(ln2).unwrap();
        let lead = asymptotic_expectation(&geo, n, ExpectationKind::Range).unwrap();
        assert!((lead - (n as f64).log2()).abs() < 1e-9);
        let (e, _) = expected_range(&geo, n).unwrap();
        assert!((e / lead - 1.0).abs() <= 0.1, "E = {e}, lead = {lead}");
        // sub-critical intensity: phi_0' / ell = 1/(a ell)
        let lead1 = asymptotic_expectation(&geo, n, ExpectationKind::Intensity(1)).unwrap();
        assert!((lead1 - 1.0 / ln2).abs() < 1e-9);
        // sup-critical: E_2 leading term is phi^-1(n)/2
        let lp = DistributionSpec::log_power(2.0, 100_000).unwrap();
        let e2 = asymptotic_expectation(&lp, n, ExpectationKind::Intensity(2)).unwrap();
        assert!((e2 - lp.phi_inv(n as f64).unwrap() / 2.0).abs() < 1e-6);
        // irregular laws are rejected
        assert!(matches!(
            asymptotic_expectation(&fair_two(), n, ExpectationKind::Range),
            Err(ExactError::IrregularSpec)
        ));
    }

    #[test]
    fn sup_critical_order_of_growth() {
        // log phi^-1(n) / log n -> 1 and log psi(log n) / log n -> 0:
        // monotone trend over a huge-n grid, thresholds met by n = 1e100.
        let spec = DistributionSpec::log_power(2.0, 10_000).unwrap();
        let grid = [1e8f64, 1e20, 1e50, 1e100];
        let mut prev_ratio = 0.0;
        let mut prev_psi = f64::INFINITY;
        for &n in &grid {
            let ratio = spec.phi_inv(n).unwrap().ln() / n.ln();
            let psi_ratio = spec.psi(n.ln()).unwrap().ln() / n.ln();
            assert!(ratio > prev_ratio, "phi^-1 growth ratio not increasing at n={n}");
            assert!(psi_ratio < prev_psi);
            prev_ratio = ratio;
            prev_psi = psi_ratio;
        }
        let r100 = spec.phi_inv(1e100).unwrap().ln() / 1e100f64.ln();
        assert!((r100 - 1.0).abs() <= 0.05, "ratio at 1e100: {r100}");
        let p100 = spec.psi(1e100f64.ln()).unwrap().ln() / 1e100f64.ln();
        assert!(p100 <= 0.05);
    }

    #[test]
    fn derivative_series_signs_and_ratios() {
        let spec = power2(100_000);
        // (-1)^{k-1} E^{(k)}(n) > 0
        for n in [10u64, 1000, 100_000] {
            for k in 1..=3u32 {
                let d = derivative_series(&spec, 0, k, n).unwrap();
                let signed = if k % 2 == 1 { d } else { -d };
                assert!(signed > 0.0, "k={k} n={n}: {d}");
            }
        }
        // |S_ell'(n)| n / S_ell(n) bounded, and S_{ell+1}(n)/S_ell(n) * n bounded
        for &n in &[1000u64, 10_000, 100_000, 1_000_000] {
            let (s2, _) = s_series(&spec, 2, n).unwrap();
            let d1 = derivative_series(&spec, 2, 1, n).unwrap();
            let ratio = d1.abs() * n as f64 / s2;
            assert!(ratio < 10.0, "n={n}: S_2'(n) n / S_2(n) = {ratio}");
            let (s3, _) = s_series(&spec, 3, n).unwrap();
            let growth = s3 / s2 * n as f64;
            assert!(growth < 10.0, "n={n}: S_3/S_2 * n = {growth}");
        }
        assert!(matches!(
            derivative_series(&spec, 0, 0, 10),
            Err(ExactError::InvalidDerivativeOrder)
        ));
    }

    #[test]
    fn theory_report_has_rows() {
        let spec = power2(10_000);
        let report = theory_report(&spec, &[100, 1000], &[1, 2, 3], &[1, 2], 64).unwrap();
        assert!(report.rows.iter().any(|r| r.quantity == "E"));
        assert!(report.rows.iter().any(|r| r.quantity == "r_limit"));
        assert!(report.rows.iter().any(|r| r.quantity == "S_distinct"));
        assert!(report.rows.iter().any(|r| r.quantity == "f_k"));
    }
}
