//! Two-site correlation `C_p(n) = μ{x_0 = x_n = 1} − 1/4` from its linear
//! recurrence.
//!
//! The recurrence is
//!
//! ```text
//! C(n) (1 + p^n (1 − 2p)) = Σ_{k<n} C(k) W(k, n),
//! W(k, n) = f ν(k, n) + g ν(k, n−1) + h ν(k, n−2)
//! ```
//!
//! with `f = p(2p − 1)`, `g = (1 − p)(1 − 3p)`, `h = (1 − p)²`, started from
//! `C(1) = 1/(4(1 + 2p))`. Writing `D(m) = Σ_k C(k) ν(k, m)` turns each step
//! into one pass over the column `ν(·, n)`, and the columns themselves obey
//! `ν(k, m) = p ν(k−1, m−1) + (1 − p) ν(k−1, m−2)`.
//!
//! The weights have mixed signs, so double precision loses everything long
//! before `n = 10⁴` when `p` is close to 1/2. Float mode runs the recurrence
//! in binary big floats and keeps a shadow run at twice the precision.

use std::fmt;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::probability::{ratio_to_f64, Probability};

pub const DEFAULT_PRECISION: usize = 256;
pub const DEFAULT_REL_TOL: f64 = 1e-12;
pub const DEFAULT_RATIONAL_CAP: usize = 64;

/// Coefficients `f`, `g`, `h` of the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightKernel {
    pub p: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl WeightKernel {
    pub fn new(p: f64) -> Self {
        WeightKernel { p, f: p * (2.0 * p - 1.0), g: (1.0 - p) * (1.0 - 3.0 * p), h: (1.0 - p).powi(2) }
    }

    /// `W(k, n)`, with out-of-range `ν` terms vanishing.
    pub fn weight(&self, k: usize, n: usize) -> f64 {
        let nu = |m: usize| if m == 0 { 0.0 } else { nu(self.p, k, m) };
        self.f * nu(n) + self.g * nu(n.saturating_sub(1)) + self.h * nu(n.saturating_sub(2))
    }
}

/// `ν_p(k, n) = binom(k−1, n−k) (1−p)^(n−k) p^(2k−n−1)`, zero outside
/// `⌈n/2⌉ ≤ k ≤ n`.
pub fn nu(p: f64, k: usize, n: usize) -> f64 {
    if k == 0 || n < k || 2 * k < n + 1 {
        return 0.0;
    }
    let r = n - k;
    let m = k - 1;
    let mut p_left = (m - r) as i32;
    let mut x = 1.0;
    for i in 1..=r {
        x *= (m - r + i) as f64 / i as f64 * (1.0 - p);
        while x > 1.0 && p_left > 0 {
            x *= p;
            p_left -= 1;
        }
    }
    x * p.powi(p_left)
}

pub fn nu_exact(p: &BigRational, k: usize, n: usize) -> BigRational {
    if k == 0 || n < k || 2 * k < n + 1 {
        return BigRational::zero();
    }
    let c = binomial(BigInt::from(k - 1), BigInt::from(n - k));
    let q = BigRational::one() - p;
    BigRational::from_integer(c) * num_traits::pow(q, n - k) * num_traits::pow(p.clone(), 2 * k - n - 1)
}

pub fn weight_w(p: f64, k: usize, n: usize) -> f64 {
    WeightKernel::new(p).weight(k, n)
}

pub fn weight_w_exact(p: &BigRational, k: usize, n: usize) -> BigRational {
    let one = BigRational::one();
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    let f = p * (&two * p - &one);
    let g = (&one - p) * (&one - &three * p);
    let h = (&one - p) * (&one - p);
    let nu = |m: usize| if m == 0 { BigRational::zero() } else { nu_exact(p, k, m) };
    f * nu(n) + g * nu(n.saturating_sub(1)) + h * nu(n.saturating_sub(2))
}

/// `S_p(n) = (1 − (p−1)^n) / (2 − p)`.
pub fn s_closed(p: f64, n: usize) -> f64 {
    (1.0 - (p - 1.0).powi(n as i32)) / (2.0 - p)
}

/// `S(n+1) = p S(n) + (1−p) S(n−1)` from `S(0) = 0`, `S(1) = 1`.
pub fn s_recursive(p: f64, n: usize) -> f64 {
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..n {
        (a, b) = (b, p * b + (1.0 - p) * a);
    }
    a
}

pub fn s_closed_exact(p: &BigRational, n: usize) -> BigRational {
    let one = BigRational::one();
    (&one - num_traits::pow(p - &one, n)) / (BigRational::from_integer(2.into()) - p)
}

/// Direct exact `Σ_k ν_p(k, n)`. With `p = a/b` every term is put over the
/// common denominator `b^(n−1)`, so the sum runs on integers.
pub fn s_direct_exact(p: &BigRational, n: usize) -> BigRational {
    if n == 0 {
        return BigRational::zero();
    }
    let (a, b) = (p.numer().clone(), p.denom().clone());
    let qb = (&b - &a) * &b;
    let mut pow_a = vec![BigInt::one()];
    for i in 1..n {
        pow_a.push(&pow_a[i - 1] * &a);
    }
    // j = n − k mutations; binom(n−j−1, j) updated in place
    let mut binom = BigInt::one();
    let mut qb_j = BigInt::one();
    let mut total = BigInt::zero();
    for j in 0..=(n - 1) / 2 {
        total += &binom * &qb_j * &pow_a[n - 2 * j - 1];
        if j < (n - 1) / 2 {
            binom = binom * BigInt::from((n - 2 * j - 1) * (n - 2 * j - 2)) / BigInt::from((j + 1) * (n - j - 1));
        }
        qb_j *= &qb;
    }
    BigRational::new(total, num_traits::pow(b, n - 1))
}

/// `S(0..=n_max)` from the two-term recursion.
pub fn s_recursive_exact_table(p: &BigRational, n_max: usize) -> Vec<BigRational> {
    let q = BigRational::one() - p;
    let mut out = vec![BigRational::zero(), BigRational::one()];
    while out.len() <= n_max {
        let k = out.len();
        out.push(p * &out[k - 1] + &q * &out[k - 2]);
    }
    out.truncate(n_max + 1);
    out
}

pub fn s_recursive_exact(p: &BigRational, n: usize) -> BigRational {
    let (mut a, mut b) = (BigRational::zero(), BigRational::one());
    for _ in 0..n {
        let next = p * &b + (BigRational::one() - p) * &a;
        a = std::mem::replace(&mut b, next);
    }
    a
}

/// `Σ_k W(k, n) = f S(n) + g S(n−1) + h S(n−2)` in closed form, for `n ≥ 2`:
/// `(1−2p)(2−3p)/(2−p) − 2p(1+p)(p−1)^n/(2−p)`.
pub fn weight_sum_closed(p: f64, n: usize) -> f64 {
    ((1.0 - 2.0 * p) * (2.0 - 3.0 * p) - 2.0 * p * (1.0 + p) * (p - 1.0).powi(n as i32)) / (2.0 - p)
}

/// The same sum in its commonly quoted form,
/// `(1−2p)(2−3p)/(2−p) − 2p(p−1)^n`. It omits the factor `(1+p)/(2−p)` on
/// the oscillating term.
pub fn weight_sum_printed(p: f64, n: usize) -> f64 {
    (1.0 - 2.0 * p) * (2.0 - 3.0 * p) / (2.0 - p) - 2.0 * p * (p - 1.0).powi(n as i32)
}

fn kernel_exact(p: &BigRational) -> (BigRational, BigRational, BigRational) {
    let one = BigRational::one();
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    (p * (&two * p - &one), (&one - p) * (&one - &three * p), (&one - p) * (&one - p))
}

/// Exact `Σ_k W(k, n)` for `n ≥ 2`. Summing `W` over `k` equals
/// `f S(n) + g S(n−1) + h S(n−2)` term by term, with each `S` summed directly.
pub fn weight_sum_direct_exact(p: &BigRational, n: usize) -> BigRational {
    let (f, g, h) = kernel_exact(p);
    f * s_direct_exact(p, n) + g * s_direct_exact(p, n - 1) + h * s_direct_exact(p, n - 2)
}

pub fn weight_sum_closed_exact(p: &BigRational, n: usize) -> BigRational {
    let one = BigRational::one();
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    ((&one - &two * p) * (&two - &three * p) - &two * p * (&one + p) * num_traits::pow(p - &one, n)) / (&two - p)
}

pub fn weight_sum_printed_exact(p: &BigRational, n: usize) -> BigRational {
    let one = BigRational::one();
    let two = BigRational::from_integer(2.into());
    let three = BigRational::from_integer(3.into());
    (&one - &two * p) * (&two - &three * p) / (&two - p) - &two * p * num_traits::pow(p - &one, n)
}

/// Direct summation of `W(k, n)` over `⌊n/2⌋ ≤ k ≤ n`.
pub fn weight_sum_direct(p: f64, n: usize) -> f64 {
    let kernel = WeightKernel::new(p);
    (n / 2..=n).map(|k| kernel.weight(k, n)).sum()
}

/// `C_p(1) = 1/(4(1 + 2p))`. A nearest-neighbour pair is either the two copies
/// of one expanded symbol or the images of two neighbouring symbols; the
/// stationarity equation for the pair gives this value.
pub fn seed_correlation(p: f64) -> f64 {
    1.0 / (4.0 * (1.0 + 2.0 * p))
}

pub fn seed_correlation_exact(p: &BigRational) -> BigRational {
    let one = BigRational::one();
    &one / (BigRational::from_integer(4.into()) * (&one + p + p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrecisionMode {
    Float { bits: usize },
    Rational,
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionMode::Float { .. } => write!(f, "float"),
            PrecisionMode::Rational => write!(f, "rational"),
        }
    }
}

/// `C_p(n)` for `0 ≤ n ≤ n_max`; index 0 holds `C_p(0) = 1/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    p: Probability,
    values: Vec<f64>,
    exact: Option<Vec<BigRational>>,
    mode: PrecisionMode,
    seed_value: f64,
}

impl CorrelationSeries {
    /// Wraps externally supplied values, e.g. a synthetic series for fitting.
    pub fn from_values(p: Probability, values: Vec<f64>) -> Self {
        let seed_value = values.get(1).copied().unwrap_or(f64::NAN);
        CorrelationSeries { p, values, exact: None, mode: PrecisionMode::Float { bits: 53 }, seed_value }
    }

    pub fn p(&self) -> &Probability {
        &self.p
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn mode(&self) -> PrecisionMode {
        self.mode
    }

    pub fn seed_value(&self) -> f64 {
        self.seed_value
    }

    /// `(n, C_p(n))` for `1 ≤ n ≤ n_max`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().copied().enumerate().skip(1)
    }
}

/// Float mode at the given working precision, with the doubling check and
/// relative tolerance 1e-12.
pub fn correlation_series(p: &Probability, n_max: usize, mode: PrecisionMode) -> Result<CorrelationSeries> {
    match mode {
        PrecisionMode::Float { bits } => correlation_series_float(p, n_max, bits, DEFAULT_REL_TOL),
        PrecisionMode::Rational => correlation_series_rational(p, n_max, DEFAULT_RATIONAL_CAP),
    }
}

pub fn correlation_series_float(
    p: &Probability,
    n_max: usize,
    bits: usize,
    rel_tol: f64,
) -> Result<CorrelationSeries> {
    check_horizon(n_max)?;
    if bits < 53 {
        return Err(Error::InvalidParameter(format!("precision {bits} below 53 bits")));
    }
    let (lo, hi) = rayon::join(|| run_float(p, n_max, bits), || run_float(p, n_max, 2 * bits));
    let (values, used) = match first_disagreement(&lo, &hi, rel_tol) {
        None => (hi, 2 * bits),
        Some(_) => {
            let top = run_float(p, n_max, 4 * bits);
            if let Some(n) = first_disagreement(&hi, &top, rel_tol) {
                return Err(Error::PrecisionExhausted { n, bits: 4 * bits });
            }
            (top, 4 * bits)
        }
    };
    Ok(CorrelationSeries {
        p: p.clone(),
        values,
        exact: None,
        mode: PrecisionMode::Float { bits: used },
        seed_value: seed_correlation(p.value()),
    })
}

/// One float run without the shadow check.
pub fn correlation_series_unchecked(p: &Probability, n_max: usize, bits: usize) -> Result<CorrelationSeries> {
    check_horizon(n_max)?;
    Ok(CorrelationSeries {
        p: p.clone(),
        values: run_float(p, n_max, bits),
        exact: None,
        mode: PrecisionMode::Float { bits },
        seed_value: seed_correlation(p.value()),
    })
}

pub fn correlation_series_rational(p: &Probability, n_max: usize, cap: usize) -> Result<CorrelationSeries> {
    check_horizon(n_max)?;
    if n_max > cap {
        return Err(Error::InvalidParameter(format!("rational horizon {n_max} exceeds cap {cap}")));
    }
    let exact = run_recurrence(Exact(p.exact().clone()), n_max, 0.0)
        .into_iter()
        .map(|Exact(x)| x)
        .collect::<Vec<_>>();
    Ok(CorrelationSeries {
        p: p.clone(),
        values: exact.iter().map(ratio_to_f64).collect(),
        mode: PrecisionMode::Rational,
        seed_value: ratio_to_f64(&exact[1]),
        exact: Some(exact),
    })
}

fn check_horizon(n_max: usize) -> Result<()> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!("n_max must be at least 2, got {n_max}")));
    }
    Ok(())
}

fn first_disagreement(a: &[f64], b: &[f64], rel_tol: f64) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| {
        let scale = x.abs().max(y.abs());
        (x - y).abs() > rel_tol * scale || x.is_nan() || y.is_nan()
    })
}

fn run_float(p: &Probability, n_max: usize, bits: usize) -> Vec<f64> {
    let pf = Big::from_ratio(p.exact(), bits);
    run_recurrence(pf, n_max, p.value().log2()).iter().map(|x| x.0.to_f64().value()).collect()
}

/// Arithmetic needed by the recurrence.
trait Field: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn small(&self, n: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    /// Binary magnitude for trimming negligible column entries; `None`
    /// disables trimming.
    fn log2(&self) -> Option<i64>;
    fn trim_bits(&self) -> Option<i64>;
}

#[derive(Clone)]
struct Exact(BigRational);

impl Field for Exact {
    fn zero_like(&self) -> Self {
        Exact(BigRational::zero())
    }
    fn one_like(&self) -> Self {
        Exact(BigRational::one())
    }
    fn small(&self, n: i64) -> Self {
        Exact(BigRational::from_integer(n.into()))
    }
    fn add(&self, o: &Self) -> Self {
        Exact(&self.0 + &o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        Exact(&self.0 - &o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        Exact(&self.0 * &o.0)
    }
    fn div(&self, o: &Self) -> Self {
        Exact(&self.0 / &o.0)
    }
    fn log2(&self) -> Option<i64> {
        None
    }
    fn trim_bits(&self) -> Option<i64> {
        None
    }
}

type F = FBig<HalfEven, 2>;

#[derive(Clone)]
struct Big(F, usize);

impl Big {
    fn from_ratio(r: &BigRational, bits: usize) -> Self {
        let num = F::from(to_ibig(r.numer())).with_precision(bits).value();
        let den = F::from(to_ibig(r.denom())).with_precision(bits).value();
        Big(num / den, bits)
    }
}

fn to_ibig(x: &BigInt) -> IBig {
    IBig::from_str_radix(&x.to_str_radix(16), 16).expect("valid hex integer")
}

impl Field for Big {
    fn zero_like(&self) -> Self {
        Big(F::ZERO.with_precision(self.1).value(), self.1)
    }
    fn one_like(&self) -> Self {
        self.small(1)
    }
    fn small(&self, n: i64) -> Self {
        Big(F::from(n).with_precision(self.1).value(), self.1)
    }
    fn add(&self, o: &Self) -> Self {
        Big(&self.0 + &o.0, self.1)
    }
    fn sub(&self, o: &Self) -> Self {
        Big(&self.0 - &o.0, self.1)
    }
    fn mul(&self, o: &Self) -> Self {
        Big(&self.0 * &o.0, self.1)
    }
    fn div(&self, o: &Self) -> Self {
        Big(&self.0 / &o.0, self.1)
    }
    fn log2(&self) -> Option<i64> {
        let repr = self.0.repr();
        let (_, words) = repr.significand().as_sign_words();
        let top = words.last().copied().unwrap_or(0);
        if top == 0 {
            return Some(i64::MIN);
        }
        let bit_len = (words.len() as i64 - 1) * 64 + (64 - top.leading_zeros() as i64);
        Some(repr.exponent() as i64 + bit_len)
    }
    fn trim_bits(&self) -> Option<i64> {
        Some(self.1 as i64 + 64)
    }
}

/// Column of `t(k, m) = ν(k, m) / p^(k−1)`, stored from index `start`. The
/// scaling turns the column recurrence into `t(k, m) = t(k−1, m−1) + r t(k−1, m−2)`
/// with `r = (1 − p)/p`, one multiplication per entry.
struct Column<T> {
    start: usize,
    vals: Vec<T>,
}

impl<T: Field> Column<T> {
    fn end(&self) -> usize {
        self.start + self.vals.len()
    }

    fn at(&self, k: usize) -> Option<&T> {
        k.checked_sub(self.start).and_then(|i| self.vals.get(i))
    }

    /// Drops entries whose true size `t p^(k−1)` is below the column maximum
    /// by more than the working precision plus a guard.
    fn trim(&mut self, log2_p: f64) {
        let Some(margin) = self.vals.first().and_then(Field::trim_bits) else { return };
        let mags: Vec<f64> = self
            .vals
            .iter()
            .enumerate()
            .map(|(i, v)| match v.log2() {
                Some(m) if m > i64::MIN => m as f64 + (self.start + i - 1) as f64 * log2_p,
                _ => f64::NEG_INFINITY,
            })
            .collect();
        let max = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cut = max - margin as f64;
        let lo = mags.iter().position(|&m| m >= cut).unwrap_or(0);
        let hi = mags.iter().rposition(|&m| m >= cut).map_or(self.vals.len(), |i| i + 1);
        self.vals.truncate(hi);
        self.vals.drain(..lo);
        self.start += lo;
    }
}

fn run_recurrence<T: Field>(p: T, n_max: usize, log2_p: f64) -> Vec<T> {
    let one = p.one_like();
    let two = p.small(2);
    let q = one.sub(&p);
    let r = q.div(&p);
    let f = p.mul(&two.mul(&p).sub(&one));
    let g = q.mul(&one.sub(&p.small(3).mul(&p)));
    let h = q.mul(&q);
    let one_minus_2p = one.sub(&two.mul(&p));

    let mut c = Vec::with_capacity(n_max + 1);
    c.push(one.div(&p.small(4)));
    c.push(one.div(&p.small(4).mul(&one.add(&two.mul(&p)))));
    // ĉ(k) = C(k) p^(k−1), so that Σ C(k) ν(k, n) = Σ ĉ(k) t(k, n)
    let mut c_hat = vec![p.zero_like(), c[1].clone()];

    // columns m−2 and m−1; t(·, 0) is empty and t(·, 1) = {1: 1}
    let mut col2 = Column { start: 1, vals: Vec::new() };
    let mut col1 = Column { start: 1, vals: vec![one.clone()] };
    let mut d2 = p.zero_like();
    let mut d1 = c[1].clone();
    let mut p_pow = p.clone();

    for n in 2..=n_max {
        let start = col1.start.min(col2.start) + 1;
        let end = col1.end().max(col2.end()) + 1;
        let mut vals = Vec::with_capacity(end - start);
        for k in start..end {
            let b = col2.at(k - 1).map(|v| r.mul(v));
            vals.push(match (col1.at(k - 1), b) {
                (Some(a), Some(b)) => a.add(&b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b,
                (None, None) => p.zero_like(),
            });
        }
        let mut col = Column { start, vals };
        col.trim(log2_p);

        let p_pow_prev = p_pow.clone();
        p_pow = p_pow.mul(&p);
        let mut d_prime = p.zero_like();
        let mut top = None;
        for (i, v) in col.vals.iter().enumerate() {
            let k = col.start + i;
            if k < n {
                d_prime = d_prime.add(&c_hat[k].mul(v));
            } else {
                top = Some(v);
            }
        }
        let rhs = f.mul(&d_prime).add(&g.mul(&d1)).add(&h.mul(&d2));
        let cn = rhs.div(&one.add(&p_pow.mul(&one_minus_2p)));
        let cn_hat = cn.mul(&p_pow_prev);
        let dn = match top {
            Some(v) => d_prime.add(&cn_hat.mul(v)),
            None => d_prime,
        };
        c.push(cn);
        c_hat.push(cn_hat);
        d2 = std::mem::replace(&mut d1, dn);
        col2 = std::mem::replace(&mut col1, col);
    }
    c
}

/// Contraction factor `α(p)` and error `ε_p(n)` for the three p
/// regimes.
pub fn contraction_bound(p: f64, n: usize) -> (f64, f64) {
    let q_n = (1.0 - p).powi(n as i32);
    if p <= 1.0 / 3.0 {
        (1.0 - 2.0 * p, 2.0 * p * q_n)
    } else if p <= 0.5 {
        (p * (3.0 - 4.0 * p) / (2.0 - p), 2.0 * q_n * (1.0 - p - p * p) / (2.0 - p))
    } else {
        (p / (2.0 - p), 2.0 * p * (2.0 * p - 1.0) * q_n / (2.0 - p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionEntry {
    pub n: usize,
    pub ratio: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub violated: bool,
}

/// For each `n ≥ 2`: `|C(n)| / max_{⌊n/2⌋ ≤ k ≤ n} |C(k)|` against `α + ε(n)`.
pub fn decay_contraction_report(series: &CorrelationSeries) -> Vec<ContractionEntry> {
    let p = series.p.value();
    let abs: Vec<f64> = series.values.iter().map(|v| v.abs()).collect();
    (2..=series.n_max())
        .map(|n| {
            let window_max = abs[n / 2..=n].iter().copied().fold(0.0, f64::max);
            let ratio = if window_max > 0.0 { abs[n] / window_max } else { 0.0 };
            let (alpha, epsilon) = contraction_bound(p, n);
            // slack for the f64 rounding of the stored values
            let violated = ratio > (alpha + epsilon) * (1.0 + 1e-12);
            ContractionEntry { n, ratio, alpha, epsilon, violated }
        })
        .collect()
}

/// Absolute tolerance helper for comparing series against exact values.
pub fn max_relative_error(series: &CorrelationSeries, exact: &[BigRational]) -> f64 {
    exact
        .iter()
        .enumerate()
        .skip(1)
        .filter_map(|(n, e)| series.get(n).map(|v| (v, ratio_to_f64(e))))
        .map(|(v, e)| if e == 0.0 { v.abs() } else { ((v - e) / e).abs() })
        .fold(0.0, f64::max)
}

/// True when every value is positive.
pub fn is_positive(series: &CorrelationSeries) -> bool {
    series.values.iter().all(|v| *v > 0.0)
}

/// First `n` with `C(n) ≤ 0`.
pub fn first_non_positive(series: &CorrelationSeries) -> Option<usize> {
    series.values.iter().position(|v| *v <= 0.0)
}

impl CorrelationSeries {
    pub fn exact_value(&self, n: usize) -> Option<&BigRational> {
        self.exact.as_ref().and_then(|e| e.get(n))
    }

    /// True when all values lie in `[−1/4, 1/4]`.
    pub fn in_range(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= 0.25 + 1e-15)
    }

    pub fn is_exact_positive(&self) -> Option<bool> {
        self.exact.as_ref().map(|e| e.iter().all(|x| x.is_positive()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn prob(s: &str) -> Probability {
        s.parse().unwrap()
    }

    /// Length distribution by enumerating s_1..s_(k−1).
    fn nu_enumerated(p: f64, k: usize, n: usize) -> f64 {
        let m = k - 1;
        (0..1u32 << m)
            .filter(|mask| m + mask.count_ones() as usize == n - 1)
            .map(|mask| (1.0 - p).powi(mask.count_ones() as i32) * p.powi((m - mask.count_ones() as usize) as i32))
            .sum()
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu(0.37, 1, 1), 1.0);
        assert_eq!(nu(0.5, 2, 3), 0.5);
        assert!((nu(0.3, 7, 7) - 0.3f64.powi(6)).abs() < 1e-18);
        assert_eq!(nu(0.3, 2, 4), 0.0);
        assert_eq!(nu(0.3, 5, 4), 0.0);
        assert_eq!(nu_exact(&q(1, 2), 2, 3), q(1, 2));
    }

    #[test]
    fn nu_matches_enumeration() {
        for p in [0.1, 0.5, 0.77] {
            for k in 1..=12 {
                for n in 1..=24 {
                    let a = nu(p, k, n);
                    let b = nu_enumerated(p, k, n);
                    assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "p={p} k={k} n={n}");
                }
            }
        }
    }

    #[test]
    fn kernel_signs() {
        assert_eq!(WeightKernel::new(0.5).f, 0.0);
        assert!(WeightKernel::new(1.0 / 3.0).g.abs() < 1e-16);
        assert_eq!(WeightKernel::new(1.0).h, 0.0);
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            let w = WeightKernel::new(p);
            if p <= 0.5 {
                assert!(w.f <= 0.0);
            }
            if p >= 1.0 / 3.0 + 1e-12 {
                assert!(w.g <= 0.0);
            }
            assert!(w.h >= 0.0);
        }
    }

    #[test]
    fn weight_examples() {
        assert!((weight_w(0.1, 1, 2) - 0.63).abs() < 1e-15);
        for n in 2..10 {
            assert_eq!(weight_w(0.5, n, n), 0.0);
        }
    }

    #[test]
    fn weight_sum_identity() {
        // direct summation oracle at p = 0.1, n = 4
        let direct = weight_sum_direct(0.1, 4);
        assert!((direct - 0.639_82).abs() < 1e-5);
        assert!((weight_sum_closed(0.1, 4) - direct).abs() < 1e-15);
        assert!((weight_sum_printed(0.1, 4) - 0.584_569_473_684_210_5).abs() < 1e-15);
        for p in [0.05, 0.3, 0.5, 0.8] {
            for n in 2..120 {
                let d = weight_sum_direct(p, n);
                assert!((weight_sum_closed(p, n) - d).abs() <= 1e-12 * d.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn s_examples() {
        for p in [0.2, 0.5, 0.9] {
            assert_eq!(s_closed(p, 0), 0.0);
            assert!((s_closed(p, 1) - 1.0).abs() < 1e-15);
            assert!((s_closed(p, 2) - p).abs() < 1e-15);
        }
        assert_eq!(s_recursive(0.5, 3), 0.75);
        let p = q(3, 7);
        for n in 0..60 {
            assert_eq!(s_closed_exact(&p, n), s_recursive_exact(&p, n));
            let sum = (0..=n).fold(BigRational::zero(), |acc, k| acc + nu_exact(&p, k, n));
            assert_eq!(sum, s_closed_exact(&p, n));
        }
    }

    #[test]
    fn seed_values() {
        assert!((seed_correlation(1e-12) - 0.25).abs() < 1e-11);
        assert_eq!(seed_correlation_exact(&q(1, 10)), q(5, 24));
        assert_eq!(seed_correlation_exact(&q(1, 2)), q(1, 8));
    }

    #[test]
    fn rational_series_start() {
        let s = correlation_series(&prob("1/10"), 12, PrecisionMode::Rational).unwrap();
        assert_eq!(s.exact_value(1).unwrap(), &q(5, 24));
        assert_eq!(s.exact_value(2).unwrap(), &q(25, 192));
        assert!((s.get(2).unwrap() - 0.130_208_333_333_333_33).abs() < 1e-17);
        assert!(correlation_series(&prob("1/10"), 65, PrecisionMode::Rational).is_err());
    }

    #[test]
    fn float_matches_rational() {
        for p in ["1/10", "2/5", "1/2", "3/4"] {
            let p = prob(p);
            let r = correlation_series(&p, 64, PrecisionMode::Rational).unwrap();
            let f = correlation_series(&p, 64, PrecisionMode::Float { bits: 128 }).unwrap();
            assert!(max_relative_error(&f, r.exact().unwrap()) < 1e-14, "p={p}");
        }
    }

    #[test]
    fn direct_recurrence_oracle() {
        // naive O(n²) evaluation of the printed recurrence in f64
        let p = 0.2;
        let kernel = WeightKernel::new(p);
        let mut c = vec![0.25, seed_correlation(p)];
        for n in 2..=40usize {
            let s: f64 = (n / 2..n).map(|k| c[k] * kernel.weight(k, n)).sum();
            c.push(s / (1.0 + p.powi(n as i32) * (1.0 - 2.0 * p)));
        }
        let series = correlation_series(&Probability::from_f64(p).unwrap(), 40, PrecisionMode::Float { bits: 128 }).unwrap();
        for n in 1..=40 {
            assert!((series.get(n).unwrap() - c[n]).abs() < 1e-13 * c[n].abs(), "n={n}");
        }
    }

    #[test]
    fn tiny_p_is_frozen() {
        let s = correlation_series(&prob("1e-12"), 200, PrecisionMode::Float { bits: 128 }).unwrap();
        assert!(s.values().iter().all(|v| (v - 0.25).abs() < 1e-9));
    }

    #[test]
    fn horizon_validation() {
        assert!(correlation_series(&prob("0.1"), 1, PrecisionMode::Float { bits: 128 }).is_err());
        assert!(correlation_series_float(&prob("0.1"), 10, 32, 1e-12).is_err());
    }

    #[test]
    fn contraction_regimes() {
        assert_eq!(contraction_bound(0.25, 1000).0, 0.5);
        assert!((contraction_bound(0.5, 1000).0 - 1.0 / 3.0).abs() < 1e-16);
        let s = correlation_series(&prob("0.25"), 400, PrecisionMode::Float { bits: 128 }).unwrap();
        assert!(decay_contraction_report(&s).iter().filter(|e| e.n >= 4).all(|e| !e.violated));
    }

    #[test]
    fn direct_exact_sums() {
        for p in ["1/10", "1/2", "2/3", "7/9"] {
            let p: BigRational = p.parse().unwrap();
            let rec = s_recursive_exact_table(&p, 80);
            for n in 0..=80 {
                let brute = (1..=n).fold(BigRational::zero(), |a, k| a + nu_exact(&p, k, n));
                assert_eq!(s_direct_exact(&p, n), brute, "n={n}");
                assert_eq!(s_closed_exact(&p, n), rec[n]);
                if n >= 2 {
                    let w = (n / 2..=n).fold(BigRational::zero(), |a, k| a + weight_w_exact(&p, k, n));
                    assert_eq!(weight_sum_direct_exact(&p, n), w);
                    assert_eq!(weight_sum_closed_exact(&p, n), w);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nu_column_sums_to_s(pp in 0.01f64..0.99, n in 1usize..200) {
            let sum: f64 = (1..=n).map(|k| nu(pp, k, n)).sum();
            let s = s_closed(pp, n);
            prop_assert!((sum - s).abs() <= 1e-12 * s);
            prop_assert!((s_recursive(pp, n) - s).abs() <= 1e-12 * s);
        }

        #[test]
        fn series_within_quarter(pp in 0.01f64..0.99) {
            let s = correlation_series(&Probability::from_f64(pp).unwrap(), 120, PrecisionMode::Float { bits: 128 }).unwrap();
            prop_assert!(s.in_range());
        }
    }
}
