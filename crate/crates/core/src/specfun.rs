//! Special functions behind the outage series.
//!
//! Everything here works on the Poisson-mixed gamma form
//!
//! ```text
//! F(x) = sum_i  Pois(i; xi) * P(a + i, x)
//! ```
//!
//! which covers both the single-round gain CDF (`a = 1`) and the
//! non-central chi-squared CDF of the chase-combined gain (`a = L`).
//! Poisson weights are carried in the log domain so that large
//! non-centralities do not overflow `xi^i / i!`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Truncation order used by the fixed policy unless told otherwise.
pub const DEFAULT_FIXED_ORDER: usize = 50;
/// Absolute tail tolerance used by the adaptive policy unless told otherwise.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;
/// Hard cap on the adaptive truncation order.
pub const MAX_ADAPTIVE_ORDER: usize = 100_000;

const MAX_ITERATIONS: usize = 10_000_000;
const EPS: f64 = 1e-17;
const FPMIN: f64 = 1e-300;
/// Below this log-weight a Poisson term underflows to zero in `f64`.
const LOG_UNDERFLOW: f64 = -745.2;

/// How the infinite Poisson-gamma series is cut off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TruncationPolicy {
    /// Keep terms `i = 0..=order`.
    Fixed(usize),
    /// Keep the fewest terms whose certified tail bound is below the tolerance.
    Adaptive { tail_tolerance: f64 },
}

impl TruncationPolicy {
    pub fn fixed(order: usize) -> Self {
        TruncationPolicy::Fixed(order)
    }

    pub fn adaptive(tail_tolerance: f64) -> Result<Self> {
        let policy = TruncationPolicy::Adaptive { tail_tolerance };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Fixed(_) => Ok(()),
            TruncationPolicy::Adaptive { tail_tolerance } => {
                if tail_tolerance.is_finite() && tail_tolerance > 0.0 && tail_tolerance < 1.0 {
                    Ok(())
                } else {
                    domain(format!(
                        "tail tolerance must lie in (0, 1), got {tail_tolerance}"
                    ))
                }
            }
        }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::Adaptive {
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationPolicy::Fixed(order) => write!(f, "fixed:{order}"),
            TruncationPolicy::Adaptive { tail_tolerance } => {
                write!(f, "adaptive:{tail_tolerance:e}")
            }
        }
    }
}

impl FromStr for TruncationPolicy {
    type Err = Error;

    /// Parses `fixed:<order>`, `adaptive:<tolerance>`, or bare `fixed` / `adaptive`.
    fn from_str(s: &str) -> Result<Self> {
        let (mode, arg) = match s.split_once(':') {
            Some((m, a)) => (m.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        match mode {
            "fixed" => {
                let order = match arg {
                    Some(a) => a
                        .parse::<usize>()
                        .map_err(|_| Error::Domain(format!("bad truncation order `{a}`")))?,
                    None => DEFAULT_FIXED_ORDER,
                };
                Ok(TruncationPolicy::Fixed(order))
            }
            "adaptive" => {
                let tol = match arg {
                    Some(a) => a
                        .parse::<f64>()
                        .map_err(|_| Error::Domain(format!("bad tail tolerance `{a}`")))?,
                    None => DEFAULT_TAIL_TOLERANCE,
                };
                TruncationPolicy::adaptive(tol)
            }
            other => domain(format!(
                "unknown truncation mode `{other}` (expected fixed:<n> or adaptive:<tol>)"
            )),
        }
    }
}

impl From<TruncationPolicy> for String {
    fn from(p: TruncationPolicy) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for TruncationPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// `n!` as a float; exact for `n <= 22`.
pub fn factorial(n: u32) -> f64 {
    (2..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Remainder of Stirling's series, `ln Γ(a+1) - [(a+½)ln a - a + ½ln 2π]`, for `a >= 10`.
fn stirling_remainder(a: f64) -> f64 {
    // Bernoulli-number coefficients B_2k / (2k (2k-1)).
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / a;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == x.floor() && x <= 23.0 {
        return factorial(x as u32 - 1).ln();
    }
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + stirling_remainder(x);
    }
    // Shift up into the Stirling range.
    let mut shifted = x;
    let mut product = 1.0;
    while shifted < 10.0 {
        product *= shifted;
        shifted += 1.0;
    }
    ln_gamma_unchecked(shifted) - product.ln()
}

/// Natural log of the gamma function for positive finite arguments.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return domain(format!(
            "ln_gamma requires a positive finite argument, got {x}"
        ));
    }
    Ok(ln_gamma_unchecked(x))
}

/// `ln(1 + t) - t`, accurate near `t = 0`.
fn ln1p_minus(t: f64) -> f64 {
    if t.abs() < 0.25 {
        // -t^2/2 + t^3/3 - t^4/4 + ...
        let mut term = t * t;
        let mut acc: f64 = 0.0;
        let mut k = 2.0;
        let mut sign = -1.0;
        while term.abs() / k > 1e-18 * acc.abs().max(f64::MIN_POSITIVE) {
            acc += sign * term / k;
            term *= t;
            k += 1.0;
            sign = -sign;
            if k > 200.0 {
                break;
            }
        }
        acc
    } else {
        t.ln_1p() - t
    }
}

/// `ln(x^a e^{-x} / Γ(a+1))` for `a > 0`, `x >= 0`.
///
/// This is the common prefactor of both incomplete gamma representations and,
/// for integer `a`, the log of the Poisson(x) mass at `a`.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a < 10.0 {
        a * x.ln() - x - ln_gamma_unchecked(a + 1.0)
    } else {
        let t = (x - a) / a;
        a * ln1p_minus(t) - 0.5 * (2.0 * PI * a).ln() - stirling_remainder(a)
    }
}

fn check_gamma_args(a: f64, x: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return domain(format!("gamma shape must be positive and finite, got {a}"));
    }
    if !(x.is_finite() && x >= 0.0) {
        return domain(format!(
            "gamma argument must be nonnegative and finite, got {x}"
        ));
    }
    Ok(())
}

/// Lower series: returns P(a, x). Best for `x < a + 1`.
fn lower_series(a: f64, x: f64) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    acc.add(term);
    let mut denom = a;
    for _ in 0..MAX_ITERATIONS {
        denom += 1.0;
        term *= x / denom;
        acc.add(term);
        if term < acc.value() * EPS {
            return Ok((ln_prefactor(a, x).exp() * acc.value()).min(1.0));
        }
    }
    Err(Error::NoConvergence(format!(
        "lower gamma series at a={a}, x={x}"
    )))
}

/// Continued fraction (modified Lentz): returns Q(a, x). Best for `x >= a + 1`.
fn upper_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITERATIONS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            let q = (ln_prefactor(a, x) + a.ln()).exp() * h;
            return Ok(q.clamp(0.0, 1.0));
        }
    }
    Err(Error::NoConvergence(format!(
        "upper gamma continued fraction at a={a}, x={x}"
    )))
}

/// Regularized lower incomplete gamma function `P(a, x) = γ(a, x) / Γ(a)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        Ok(1.0 - upper_fraction(a, x)?)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn reg_upper_gamma(a: f64, x: f64) -> Result<f64> {
    check_gamma_args(a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - lower_series(a, x)?)
    } else {
        upper_fraction(a, x)
    }
}

/// Log of the Poisson(`xi`) probability mass at `i`.
pub fn log_poisson_weight(xi: f64, i: u64) -> Result<f64> {
    if !(xi.is_finite() && xi >= 0.0) {
        return domain(format!(
            "Poisson mean must be nonnegative and finite, got {xi}"
        ));
    }
    Ok(log_poisson_weight_unchecked(xi, i))
}

fn log_poisson_weight_unchecked(xi: f64, i: u64) -> f64 {
    match (xi == 0.0, i) {
        (true, 0) => 0.0,
        (true, _) => f64::NEG_INFINITY,
        (false, 0) => -xi,
        (false, i) => ln_prefactor(i as f64, xi),
    }
}

/// Upper bound on `sum_{i > m} Pois(i; xi) P(a + i, x)`.
///
/// `P(a + i, x)` is nonincreasing in `i`, so the remainder is at most the
/// Poisson upper-tail mass `Pr[N > m] = P(m + 1, xi)` times `P(a + m + 1, x)`.
pub fn poisson_gamma_tail_bound(xi: f64, a: f64, x: f64, m: usize) -> Result<f64> {
    if !(xi.is_finite() && xi >= 0.0) {
        return domain(format!(
            "Poisson mean must be nonnegative and finite, got {xi}"
        ));
    }
    check_gamma_args(a, x)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let poisson_tail = reg_lower_gamma(m as f64 + 1.0, xi)?;
    if poisson_tail == 0.0 {
        return Ok(0.0);
    }
    Ok(poisson_tail * reg_lower_gamma(a + m as f64 + 1.0, x)?)
}

/// Smallest order `m` whose tail bound is at most `tolerance`.
pub fn adaptive_order(xi: f64, a: f64, x: f64, tolerance: f64) -> Result<usize> {
    let ok = |m: usize| -> Result<bool> { Ok(poisson_gamma_tail_bound(xi, a, x, m)? <= tolerance) };
    if ok(0)? {
        return Ok(0);
    }
    let mut lo = 0;
    let mut hi = 1;
    while !ok(hi)? {
        lo = hi;
        if hi >= MAX_ADAPTIVE_ORDER {
            return Err(Error::Truncation {
                cap: MAX_ADAPTIVE_ORDER,
                bound: poisson_gamma_tail_bound(xi, a, x, MAX_ADAPTIVE_ORDER)?,
                tolerance,
            });
        }
        hi = (hi * 2).min(MAX_ADAPTIVE_ORDER);
    }
    // Invariant: bound(lo) > tolerance >= bound(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Value of a truncated series together with the order actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub order: usize,
}

fn partial_mixture(
    xi: f64,
    shape: f64,
    x: f64,
    from: usize,
    to: usize,
    acc: &mut CompensatedSum,
) -> Result<()> {
    for i in from..=to {
        let log_w = log_poisson_weight_unchecked(xi, i as u64);
        if log_w < LOG_UNDERFLOW {
            // Past the mode the weights only shrink further.
            if (i as f64) > xi {
                break;
            }
            continue;
        }
        let p = reg_lower_gamma(shape + i as f64, x)?;
        if p == 0.0 {
            // P(shape + i, x) is nonincreasing in i.
            break;
        }
        acc.add(log_w.exp() * p);
    }
    Ok(())
}

/// `sum_{i=0}^{m} Pois(i; xi) P(shape + i, x)` with `m` chosen by `policy`.
///
/// The adaptive policy first meets its tolerance as an absolute bound on the
/// discarded tail, then keeps extending `m` until the bound is also below
/// `tolerance * min(S, max(1 - S, ε))` for the partial sum `S`. Tiny outage
/// values keep their relative accuracy and values near one keep an accurate
/// complement. The result is not clamped.
pub fn poisson_mixed_gamma(
    xi: f64,
    shape: f64,
    x: f64,
    policy: TruncationPolicy,
) -> Result<SeriesValue> {
    if !(xi.is_finite() && xi >= 0.0) {
        return domain(format!(
            "non-centrality must be nonnegative and finite, got {xi}"
        ));
    }
    check_gamma_args(shape, x)?;
    policy.validate()?;
    let mut acc = CompensatedSum::new();
    match policy {
        TruncationPolicy::Fixed(order) => {
            if x > 0.0 {
                partial_mixture(xi, shape, x, 0, order, &mut acc)?;
            }
            Ok(SeriesValue {
                value: acc.value(),
                order,
            })
        }
        TruncationPolicy::Adaptive { tail_tolerance } => {
            let mut order = adaptive_order(xi, shape, x, tail_tolerance)?;
            if x == 0.0 {
                return Ok(SeriesValue { value: 0.0, order });
            }
            partial_mixture(xi, shape, x, 0, order, &mut acc)?;
            // The target only shrinks as S grows, so a few passes settle it.
            for _ in 0..16 {
                let s = acc.value();
                let target = tail_tolerance * s.min((1.0 - s).max(f64::EPSILON));
                if target <= 0.0 || poisson_gamma_tail_bound(xi, shape, x, order)? <= target {
                    break;
                }
                let refined = adaptive_order(xi, shape, x, target)?;
                partial_mixture(xi, shape, x, order + 1, refined, &mut acc)?;
                order = refined;
            }
            Ok(SeriesValue {
                value: acc.value(),
                order,
            })
        }
    }
}
