//! Scaling exponent `β_p`, log-log fits, and numeric checks of the
//! asymptotic-scaling argument: the rate function and concentration of
//! `ν_p(·, n)`, the sign of the weights on the concentration window, the
//! fixed-point constants `Q(x)`, `R(x)`, and the low-`p` lower bound.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::correlation::{
    correlation_series, s_closed, CorrelationSeries, PrecisionMode, DEFAULT_PRECISION,
};
use crate::error::{Error, Result};
use crate::probability::Probability;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BetaValidity {
    Valid,
    /// `p ∈ (1/2, 2/3)`: the prefactor `(1−2p)(2−3p)` is negative and the
    /// window weights are negative.
    SingularAdjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Beta {
    pub value: f64,
    pub validity: BetaValidity,
}

/// `β_p = [log(2−p) − log((1−2p)(2−3p))] / log(2−p)`, using the absolute value
/// of the product so the same expression covers `p > 2/3`.
pub fn beta(p: f64) -> Result<Beta> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
    }
    if (p - 0.5).abs() < 1e-12 || (p - 2.0 / 3.0).abs() < 1e-12 {
        return Err(Error::Singular(p));
    }
    let lambda = 2.0 - p;
    let prod = (1.0 - 2.0 * p) * (2.0 - 3.0 * p);
    let value = (lambda.ln() - prod.abs().ln()) / lambda.ln();
    let validity = if prod > 0.0 { BetaValidity::Valid } else { BetaValidity::SingularAdjacent };
    Ok(Beta { value, validity })
}

/// Power-spectrum exponent `α_p = 1 − β_p`.
pub fn spectral_alpha(p: f64) -> Result<f64> {
    beta(p).map(|b| 1.0 - b.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub p: f64,
    pub beta_theoretical: Option<f64>,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub fit_window: (usize, usize),
    pub residual: f64,
}

/// Ordinary least squares `y = slope·x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Range(format!("{} points, need at least 2", points.len())));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Range("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    Ok((slope, intercept, (rss / m).sqrt()))
}

/// Least-squares line through `(log n, log C(n))` for `n` in the window.
pub fn fit_power_law(series: &CorrelationSeries, window: (usize, usize)) -> Result<ScalingReport> {
    let (lo, hi) = window;
    if lo == 0 || lo >= hi || hi > series.n_max() {
        return Err(Error::Range(format!("window [{lo}, {hi}] invalid for n_max = {}", series.n_max())));
    }
    let mut points = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        let c = series.get(n).expect("n within series");
        if c <= 0.0 {
            return Err(Error::Sign { n, value: c });
        }
        points.push(((n as f64).ln(), c.ln()));
    }
    let (slope, intercept, residual) = least_squares(&points)?;
    let p = series.p().value();
    Ok(ScalingReport {
        p,
        beta_theoretical: beta(p).ok().map(|b| b.value),
        fit_slope: slope,
        fit_intercept: intercept,
        fit_window: window,
        residual,
    })
}

/// `I_p(q) = q/(q+1) log(q/(1−p)) + (1−q)/(q+1) log((1−q)/p)` on `[0, 1]`.
pub fn rate_i(p: f64, q: f64) -> f64 {
    if q <= 0.0 {
        return (1.0 / p).ln();
    }
    if q >= 1.0 {
        return 0.5 * (1.0 / (1.0 - p)).ln();
    }
    q / (q + 1.0) * (q / (1.0 - p)).ln() + (1.0 - q) / (q + 1.0) * ((1.0 - q) / p).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFunctionPoint {
    pub p: f64,
    pub q: f64,
    pub value: f64,
}

pub fn rate_point(p: f64, q: f64) -> RateFunctionPoint {
    RateFunctionPoint { p, q, value: rate_i(p, q) }
}

/// Robbins–Stirling bounds on `ν_p(k+1, n+1)` for `n/2 < k < n`:
/// `exp(−n I_p(n/k − 1) ∓ ε) / sqrt(2π k (n/k − 1)(2 − n/k))` with
/// `ε = 1/(4 min(n−k, 2k−n))`.
pub fn robbins_bounds(p: f64, k: usize, n: usize) -> Option<(f64, f64)> {
    if 2 * k <= n || k >= n {
        return None;
    }
    let (kf, nf) = (k as f64, n as f64);
    let q = nf / kf - 1.0;
    let eps = 1.0 / (4.0 * (n - k).min(2 * k - n) as f64);
    let base = (-nf * rate_i(p, q)).exp() / (2.0 * PI * kf * q * (1.0 - q)).sqrt();
    Some((base * (-eps).exp(), base * eps.exp()))
}

/// `log ν_p(k, n)` from log-gamma; `−∞` outside the support.
pub fn ln_nu(p: f64, k: usize, n: usize) -> f64 {
    if k == 0 || n < k || 2 * k < n + 1 {
        return f64::NEG_INFINITY;
    }
    let (kf, nf) = (k as f64, n as f64);
    ln_gamma(kf) - ln_gamma(nf - kf + 1.0) - ln_gamma(2.0 * kf - nf)
        + (nf - kf) * (1.0 - p).ln()
        + (2.0 * kf - nf - 1.0) * p.ln()
}

/// Concentration width, window endpoints and the free parameter `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSpec {
    pub p: f64,
    pub beta_param: f64,
}

impl WindowSpec {
    pub fn new(p: f64, beta_param: f64) -> Self {
        WindowSpec { p, beta_param }
    }

    /// Default `β = b_p + 1` with `b_p` from the low-`p` lower bound.
    pub fn with_default_beta(p: f64) -> Self {
        WindowSpec { p, beta_param: b_p(p) + 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        2.0 - self.p
    }

    /// `d(x) = sqrt(p(1−p)(2−p)(β+1) log(x) / x)`.
    pub fn d(&self, x: f64) -> f64 {
        let p = self.p;
        (p * (1.0 - p) * (2.0 - p) * (self.beta_param + 1.0) * x.ln() / x).sqrt()
    }

    pub fn ell(&self, x: f64) -> f64 {
        x / (self.lambda() + self.d(x))
    }

    pub fn u(&self, x: f64) -> f64 {
        x / (self.lambda() - self.d(x))
    }

    /// Integer `k` with `ℓ(n) ≤ k ≤ u(n)`.
    pub fn integer_window(&self, n: usize) -> Result<(usize, usize)> {
        let x = n as f64;
        if self.d(x) >= self.lambda() {
            return Err(Error::Range(format!("window unbounded at n = {n}")));
        }
        let lo = self.ell(x).ceil() as usize;
        let hi = self.u(x).floor() as usize;
        if lo > hi {
            return Err(Error::Range(format!("empty window at n = {n}")));
        }
        Ok((lo.max(1), hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationResult {
    pub n: usize,
    pub delta_n: f64,
    pub bound: f64,
    pub tail_mass: f64,
    pub window_mass: f64,
}

impl ConcentrationResult {
    pub fn holds(&self) -> bool {
        self.delta_n <= self.bound
    }
}

/// `δ_n = n^b Σ_{|n/k − (2−p)| > d(n)} ν_p(k, n)` against `n^(−(β−b)/2)`.
pub fn concentration_tail(p: f64, n: usize, beta_param: f64, b: f64) -> Result<ConcentrationResult> {
    if !(beta_param > b && b > 0.0) {
        return Err(Error::InvalidParameter(format!("need β > b > 0, got β = {beta_param}, b = {b}")));
    }
    let spec = WindowSpec::new(p, beta_param);
    let d = spec.d(n as f64);
    let lambda = spec.lambda();
    let (mut tail, mut window) = (0.0, 0.0);
    for k in n.div_ceil(2)..=n {
        let v = ln_nu(p, k, n).exp();
        if ((n as f64 / k as f64) - lambda).abs() > d {
            tail += v;
        } else {
            window += v;
        }
    }
    let nf = n as f64;
    Ok(ConcentrationResult {
        n,
        delta_n: nf.powf(b) * tail,
        bound: nf.powf(-(beta_param - b) / 2.0),
        tail_mass: tail,
        window_mass: window,
    })
}

/// Total `ν` mass, for the partition check `tail + window = S_p(n)`.
pub fn nu_total(p: f64, n: usize) -> f64 {
    s_closed(p, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WindowSign {
    AllPositive,
    AllNegative,
    Mixed,
}

/// `Q_p(k, n) = (1−2p)(2n−3k)(2k−n+1) + p(2n−3k−2)(n−k)`. `W_p(k, n)` equals
/// `Q_p` times a positive factor, so both have the same sign.
pub fn q_factor(p: f64, k: usize, n: usize) -> f64 {
    let (k, n) = (k as f64, n as f64);
    (1.0 - 2.0 * p) * (2.0 * n - 3.0 * k) * (2.0 * k - n + 1.0) + p * (2.0 * n - 3.0 * k - 2.0) * (n - k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScan {
    pub p: f64,
    pub n: usize,
    pub window: (usize, usize),
    pub sign: WindowSign,
    pub positive: usize,
    pub negative: usize,
}

/// Sign of `W_p(k, n)` over the integer window, read off `Q_p` so that it
/// stays meaningful where `W` underflows.
pub fn window_sign_scan(spec: &WindowSpec, n: usize) -> Result<WindowScan> {
    let window = spec.integer_window(n)?;
    let (mut positive, mut negative) = (0, 0);
    for k in window.0..=window.1 {
        let s = q_factor(spec.p, k, n);
        if s > 0.0 {
            positive += 1;
        } else if s < 0.0 {
            negative += 1;
        }
    }
    let sign = match (positive, negative) {
        (_, 0) if positive > 0 => WindowSign::AllPositive,
        (0, _) if negative > 0 => WindowSign::AllNegative,
        _ => WindowSign::Mixed,
    };
    Ok(WindowScan { p: spec.p, n, window, sign, positive, negative })
}

/// Smallest `n₁ ≤ n_hi` with the window sign equal to `expected` for every
/// `n ∈ [n₁, n_hi]`; `None` if it fails already at `n_hi`.
pub fn window_sign_threshold(spec: &WindowSpec, expected: WindowSign, n_hi: usize) -> Option<usize> {
    let mut threshold = None;
    for n in (4..=n_hi).rev() {
        match window_sign_scan(spec, n) {
            Ok(scan) if scan.sign == expected => threshold = Some(n),
            _ => break,
        }
    }
    threshold
}

/// `Σ_{m≥0} sqrt((m+1) / λ^m)` to relative tolerance 1e-15.
pub fn lambda_series(lambda: f64) -> f64 {
    let mut sum = 0.0;
    for m in 0.. {
        let term = ((m as f64 + 1.0) / lambda.powi(m)).sqrt();
        sum += term;
        if term <= 1e-15 * sum && m > 2 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QrConstants {
    pub x: f64,
    pub q: f64,
    pub r: f64,
    pub q_residual: f64,
    pub r_residual: f64,
}

/// Largest `Q ∈ (0, 1)` with `Q = exp(−a/√Q)` and smallest `R > 1` with
/// `R = exp(a/√R)`, where `a = d(x) Σ / λ`. Both iterations start from 1 and
/// are monotone. `Q` exists iff `a ≤ 2/e`.
pub fn qr_constants(x: f64, spec: &WindowSpec) -> Result<QrConstants> {
    let lambda = spec.lambda();
    let a = spec.d(x) * lambda_series(lambda) / lambda;
    if !(a.is_finite()) || a > 2.0 / std::f64::consts::E {
        return Err(Error::Infeasible { x });
    }
    let q = fixed_point(|q| (-a / q.sqrt()).exp())?;
    let r = fixed_point(|r| (a / r.sqrt()).exp())?;
    Ok(QrConstants {
        x,
        q,
        r,
        q_residual: (q - (-a / q.sqrt()).exp()).abs(),
        r_residual: (r - (a / r.sqrt()).exp()).abs(),
    })
}

fn fixed_point(g: impl Fn(f64) -> f64) -> Result<f64> {
    let mut v = 1.0;
    for _ in 0..10_000_000 {
        let next = g(v);
        if (next - v).abs() <= 1e-15 * next.abs() {
            return Ok(next);
        }
        v = next;
    }
    Err(Error::Convergence { iterations: 10_000_000, residual: (g(v) - v).abs() })
}

/// Checks `Q λ^(k−j) x ≤ ℓ^j(λ^k x) ≤ u^j(λ^k x) ≤ R λ^(k−j) x` for
/// `1 ≤ j ≤ k ≤ k_max`. Returns the worst ratio pair `(min ℓ-ratio / Q, max u-ratio / R)`
/// where both must be on the right side of 1.
pub fn iterated_window_check(spec: &WindowSpec, x: f64, k_max: usize) -> Result<(bool, f64, f64)> {
    let qr = qr_constants(x, spec)?;
    let lambda = spec.lambda();
    let mut low = f64::INFINITY;
    let mut high = 0.0f64;
    let mut ordered = true;
    for k in 1..=k_max {
        let start = lambda.powi(k as i32) * x;
        let (mut l, mut u) = (start, start);
        for j in 1..=k {
            l = spec.ell(l);
            u = spec.u(u);
            if !(u.is_finite() && u > 0.0) {
                return Ok((false, low, f64::INFINITY));
            }
            let scale = lambda.powi((k - j) as i32) * x;
            low = low.min(l / (qr.q * scale));
            high = high.max(u / (qr.r * scale));
            ordered &= l <= u;
        }
    }
    Ok((ordered && low >= 1.0 && high <= 1.0, low, high))
}

/// Smallest `x` on the geometric grid `e · 1.25^i` (up to `x_max`) from which
/// `Q(x)` exists, `λ Q(x) ≥ 1`, and the iterated-window sandwich holds at
/// every larger grid point.
pub fn sandwich_threshold(spec: &WindowSpec, k_max: usize, x_max: f64) -> Option<f64> {
    let grid: Vec<f64> = (0..)
        .map(|i| std::f64::consts::E * 1.25f64.powi(i))
        .take_while(|x| *x <= x_max)
        .collect();
    let ok: Vec<bool> = grid
        .par_iter()
        .map(|&x| match (qr_constants(x, spec), iterated_window_check(spec, x, k_max)) {
            (Ok(qr), Ok((holds, _, _))) => holds && spec.lambda() * qr.q >= 1.0,
            _ => false,
        })
        .collect();
    let last_bad = ok.iter().rposition(|b| !b);
    match last_bad {
        None => grid.first().copied(),
        Some(i) if i + 1 < grid.len() => Some(grid[i + 1]),
        Some(_) => None,
    }
}

/// `b_p = 0.60206 + 5.62823 p`.
pub fn b_p(p: f64) -> f64 {
    0.60206 + 5.62823 * p
}

/// Induction factor of the low-`p` lower bound:
///
/// ```text
/// α_p(n) = [ (1−2p)(2−3p)/(2−p) − 2p(1−p)^n − 2^(b−2) (n/3)^(1+b) (4p(1−p))^((n−1)/3) ]
///          / (1 + p^(n+1)(1−2p)) · (3/2)^b
/// ```
///
/// The second term is read as `2p(1−p)^n`, the bound on `|2p(p−1)^n|`; with
/// the signed `(p−1)^n` the stated value `α_{1/10}(25) ≈ 1.0999111` is not
/// reproduced.
pub fn alpha_p(p: f64, n: usize) -> f64 {
    let b = b_p(p);
    let nf = n as f64;
    let lead = (1.0 - 2.0 * p) * (2.0 - 3.0 * p) / (2.0 - p);
    let osc = 2.0 * p * (1.0 - p).powi(n as i32);
    let tail = 2f64.powf(b - 2.0) * (nf / 3.0).powf(1.0 + b) * (4.0 * p * (1.0 - p)).powf((nf - 1.0) / 3.0);
    (lead - osc - tail) / (1.0 + p.powi(n as i32 + 1) * (1.0 - 2.0 * p)) * 1.5f64.powf(b)
}

/// Same display with the signed `(p−1)^n` term, as printed.
pub fn alpha_p_signed(p: f64, n: usize) -> f64 {
    let b = b_p(p);
    let nf = n as f64;
    let lead = (1.0 - 2.0 * p) * (2.0 - 3.0 * p) / (2.0 - p);
    let osc = 2.0 * p * (p - 1.0).powi(n as i32);
    let tail = 2f64.powf(b - 2.0) * (nf / 3.0).powf(1.0 + b) * (4.0 * p * (1.0 - p)).powf((nf - 1.0) / 3.0);
    (lead - osc - tail) / (1.0 + p.powi(n as i32 + 1) * (1.0 - 2.0 * p)) * 1.5f64.powf(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBandResult {
    pub p: f64,
    pub holds: bool,
    /// `min_n C_p(n) n^(b_p)` over the band.
    pub min_ratio: f64,
    pub worst_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogConcavityResult {
    pub p: f64,
    pub holds: bool,
    /// `min_n [log C_p(n) − (−log 4 + 10p log(4 C_{1/10}(n)))]`.
    pub min_margin: f64,
    pub worst_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InductionResult {
    pub p: f64,
    /// Largest `n ≤ cap` reached with `α_p(m) ≥ 1` for all `25 ≤ m ≤ n`.
    pub largest_verified_n: usize,
    /// Direct check `C_p(n) ≥ n^(−b_p)` on `[12, horizon]`.
    pub direct_holds: bool,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowPReport {
    pub alpha_110_25: f64,
    pub alpha_110_25_signed: f64,
    pub b_010: f64,
    pub alpha_decreasing_in_p: bool,
    pub alpha_increasing_in_n: bool,
    pub lower_band: Vec<LowerBandResult>,
    pub log_concavity: Vec<LogConcavityResult>,
    pub induction: Vec<InductionResult>,
}

/// Lower-bound band `C_p(n) ≥ n^(−b_p)` for `n ∈ [n_lo, n_hi]`.
pub fn lower_band(series: &CorrelationSeries, n_lo: usize, n_hi: usize) -> LowerBandResult {
    let p = series.p().value();
    let b = b_p(p);
    let (worst_n, min_ratio) = (n_lo..=n_hi)
        .map(|n| (n, series.get(n).unwrap_or(f64::NAN) * (n as f64).powf(b)))
        .fold((n_lo, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    LowerBandResult { p, holds: min_ratio >= 1.0, min_ratio, worst_n }
}

/// Runs the low-`p` verification chain on a grid of `p ∈ (0, 1/5]`.
pub fn verify_low_p(p_grid: &[f64], induction_cap: usize, direct_horizon: usize) -> Result<LowPReport> {
    let tenth: Probability = "1/10".parse()?;
    let c_tenth = correlation_series(&tenth, 64, PrecisionMode::Rational)?;
    let alpha_decreasing_in_p = (1..10).all(|i| {
        let (p, p2) = (i as f64 / 100.0, (i + 1) as f64 / 100.0);
        (25..=37).all(|n| alpha_p(p, n) > alpha_p(p2, n))
    });
    let alpha_increasing_in_n =
        (1..=10).all(|i| (25..37).all(|n| alpha_p(i as f64 / 100.0, n) < alpha_p(i as f64 / 100.0, n + 1)));

    let per_p: Vec<Result<(LowerBandResult, LogConcavityResult, InductionResult)>> = p_grid
        .par_iter()
        .map(|&p| {
            let prob = Probability::from_f64(p)?;
            let short = correlation_series(&prob, 64, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
            let band = lower_band(&short, 12, 37);

            let (worst_n, min_margin) = (1..=25)
                .map(|n| {
                    let c = short.get(n).unwrap();
                    let rhs = -(4f64.ln()) + 10.0 * p * (4.0 * c_tenth.get(n).unwrap()).ln();
                    (n, c.ln() - rhs)
                })
                .fold((1, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            let concavity = LogConcavityResult { p, holds: min_margin >= -1e-12, min_margin, worst_n };

            let mut largest = if band.holds { 37 } else { 0 };
            for n in 25..=induction_cap {
                if !band.holds {
                    break;
                }
                if alpha_p(p, n) < 1.0 {
                    break;
                }
                largest = largest.max(n);
            }
            let long = correlation_series(&prob, direct_horizon, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
            let direct = lower_band(&long, 12, direct_horizon);
            let induction =
                InductionResult { p, largest_verified_n: largest, direct_holds: direct.holds, horizon: direct_horizon };
            Ok((band, concavity, induction))
        })
        .collect();
    let mut lower = Vec::new();
    let mut concave = Vec::new();
    let mut induction = Vec::new();
    for r in per_p {
        let (a, b, c) = r?;
        lower.push(a);
        concave.push(b);
        induction.push(c);
    }
    Ok(LowPReport {
        alpha_110_25: alpha_p(0.1, 25),
        alpha_110_25_signed: alpha_p_signed(0.1, 25),
        b_010: b_p(0.1),
        alpha_decreasing_in_p,
        alpha_increasing_in_n,
        lower_band: lower,
        log_concavity: concave,
        induction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PStarEstimate {
    pub p_star: f64,
    pub n_max: usize,
    pub iterations: usize,
    /// The estimate is for `C_p(n) > 0` on `n ≤ n_max` only.
    pub caveat: &'static str,
}

/// Is `C_p(n) > 0` for every `n ≤ n_max`?
pub fn positive_up_to(p: f64, n_max: usize) -> Result<bool> {
    let s = correlation_series(&Probability::from_f64(p)?, n_max, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
    Ok(s.values().iter().all(|v| *v > 0.0))
}

/// Bisection of the positivity predicate between `p = 0.1` (positive) and
/// `p = 0.45` (sign change) to width `tol`.
pub fn p_star_estimate(n_max: usize, tol: f64) -> Result<PStarEstimate> {
    if n_max < 100 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} below 100")));
    }
    let (mut lo, mut hi) = (0.1, 0.45);
    if !positive_up_to(lo, n_max)? || positive_up_to(hi, n_max)? {
        return Err(Error::InvalidParameter("positivity predicate does not bracket".into()));
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if positive_up_to(mid, n_max)? {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(PStarEstimate {
        p_star: 0.5 * (lo + hi),
        n_max,
        iterations,
        caveat: "supremum over p of positivity on n <= n_max; a truncated surrogate for p*",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSpectrum {
    /// Angular frequencies `2πm/M`, `m = 0..M/2`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// `None` when fewer than two bins in the band carry mass.
    pub fitted_exponent: Option<f64>,
    pub fit_bins: (usize, usize),
    pub residual: f64,
}

/// Symmetrized sequence `C(0), …, C(N), C(N−1), …, C(1)` of length `2N`.
pub fn symmetrize(values: &[f64]) -> Vec<f64> {
    let n = values.len() - 1;
    values.iter().copied().chain(values[1..n].iter().rev().copied()).collect()
}

/// DFT magnitudes of the symmetrized correlation sequence on `n ∈ [0, hi]`
/// and the exponent `α` of `S(ω) ~ ω^(−α)` fitted over bins
/// `4 ≤ m ≤ M/(2 lo)`, i.e. periods between `2 lo` and `M/4`.
pub fn power_spectrum(values: &[f64], window: (usize, usize)) -> Result<PowerSpectrum> {
    let (lo, hi) = window;
    if lo == 0 || hi < lo + 63 || hi >= values.len() {
        return Err(Error::Range(format!("window [{lo}, {hi}] shorter than 64 points or out of range")));
    }
    let y = symmetrize(&values[..=hi]);
    let m_len = y.len();
    let mut buf: Vec<Complex<f64>> = y.iter().map(|v| Complex::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m_len).process(&mut buf);
    let half = m_len / 2;
    let frequencies: Vec<f64> = (0..=half).map(|m| 2.0 * PI * m as f64 / m_len as f64).collect();
    let magnitudes: Vec<f64> = buf[..=half].iter().map(|c| c.norm()).collect();
    let m_lo = 4;
    let m_hi = (m_len / (2 * lo)).clamp(m_lo + 4, half);
    let points: Vec<(f64, f64)> = (m_lo..=m_hi)
        .filter(|&m| magnitudes[m] > 1e-12 * magnitudes[0])
        .map(|m| (frequencies[m].ln(), magnitudes[m].ln()))
        .collect();
    let (fitted_exponent, residual) = match least_squares(&points) {
        Ok((slope, _, residual)) => (Some(-slope), residual),
        Err(_) => (None, 0.0),
    };
    Ok(PowerSpectrum { frequencies, magnitudes, fitted_exponent, fit_bins: (m_lo, m_hi), residual })
}
