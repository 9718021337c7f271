//! Finite marginal chains `M_ℓ` on words of length `ℓ+1`.
//!
//! `M(b, a)` is the probability that one global substitution step maps a
//! sequence starting with `b` to one starting with `a`. Distributions are row
//! vectors and evolve as `μ ↦ μM`. Words are indexed with symbol 0 as the most
//! significant bit, matching [`Word::from_index`].
//!
//! Each row is built by enumerating substitution prefixes only until `ℓ+1`
//! output symbols exist, so a row has Fibonacci-many leaves rather than
//! `2^(ℓ+1)`.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dynamics::Word;
use crate::error::{Error, Result};
use crate::probability::{ratio_to_f64, Probability};

pub const DEFAULT_ELL_MAX: usize = 12;
pub const DEFAULT_TOL: f64 = 1e-14;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Field element used for matrix entries: `f64` or an exact rational.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_probability(p: &Probability) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn as_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_probability(p: &Probability) -> Self {
        p.value()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_probability(p: &Probability) -> Self {
        p.exact().clone()
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(num.into(), den.into())
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| ratio_to_f64(self))
    }
}

/// Row-stochastic matrix `M_ℓ`, stored as sparse rows of `(target, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    ell: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> TransitionMatrix<T> {
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Number of states, `2^(ℓ+1)`.
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, source: usize) -> &[(usize, T)] {
        &self.rows[source]
    }

    pub fn get(&self, source: usize, target: usize) -> T {
        self.rows[source]
            .iter()
            .find(|(a, _)| *a == target)
            .map(|(_, w)| w.clone())
            .unwrap_or_else(T::zero)
    }

    pub fn row_sum(&self, source: usize) -> T {
        self.rows[source].iter().fold(T::zero(), |acc, (_, w)| acc + w.clone())
    }

    /// `μM`.
    pub fn apply(&self, mu: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.size()];
        for (b, row) in self.rows.iter().enumerate() {
            if mu[b].is_zero() {
                continue;
            }
            for (a, w) in row {
                out[*a] = out[*a].clone() + mu[b].clone() * w.clone();
            }
        }
        out
    }
}

pub fn build_transition<T: Scalar>(ell: usize, p: &Probability) -> Result<TransitionMatrix<T>> {
    build_transition_with_max(ell, p, DEFAULT_ELL_MAX)
}

pub fn build_transition_with_max<T: Scalar>(
    ell: usize,
    p: &Probability,
    ell_max: usize,
) -> Result<TransitionMatrix<T>> {
    if ell > ell_max {
        return Err(Error::Resource { ell, max: ell_max });
    }
    let len = ell + 1;
    let pm = T::from_probability(p);
    let pe = T::one() - pm.clone();
    let pow_m = powers(&pm, len);
    let pow_e = powers(&pe, len);
    let rows = (0..1usize << len)
        .into_par_iter()
        .map(|source| {
            let mut acc: BTreeMap<(usize, usize, usize), u64> = BTreeMap::new();
            enumerate_row(source, len, 0, 0, 0, 0, 0, &mut acc);
            let mut row: BTreeMap<usize, T> = BTreeMap::new();
            for ((target, nm, ne), count) in acc {
                let w = pow_m[nm].clone() * pow_e[ne].clone() * T::from_ratio(count as i64, 1);
                let e = row.entry(target).or_insert_with(T::zero);
                *e = e.clone() + w;
            }
            row.into_iter().collect()
        })
        .collect();
    Ok(TransitionMatrix { ell, rows })
}

fn powers<T: Scalar>(x: &T, n: usize) -> Vec<T> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(T::one());
    for i in 0..n {
        let next = v[i].clone() * x.clone();
        v.push(next);
    }
    v
}

/// Depth-first enumeration of substitution prefixes for one source word,
/// tallying leaves by (target, #modifications, #expansions).
#[allow(clippy::too_many_arguments)]
fn enumerate_row(
    source: usize,
    len: usize,
    pos: usize,
    out: usize,
    out_len: usize,
    nm: usize,
    ne: usize,
    acc: &mut BTreeMap<(usize, usize, usize), u64>,
) {
    if out_len >= len {
        *acc.entry((out, nm, ne)).or_default() += 1;
        return;
    }
    let bit = (source >> (len - 1 - pos)) & 1;
    // expansion: one or two copies, whatever fits
    let (e_out, e_len) = if out_len + 2 <= len {
        ((out << 2) | (bit << 1) | bit, out_len + 2)
    } else {
        ((out << 1) | bit, out_len + 1)
    };
    enumerate_row(source, len, pos + 1, e_out, e_len, nm, ne + 1, acc);
    enumerate_row(source, len, pos + 1, (out << 1) | (bit ^ 1), out_len + 1, nm + 1, ne, acc);
}

/// Probability assignment on `{0,1}^(ℓ+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDistribution<T> {
    ell: usize,
    weights: Vec<T>,
}

impl<T: Scalar> MarginalDistribution<T> {
    pub fn new(ell: usize, weights: Vec<T>) -> Result<Self> {
        if weights.len() != 1 << (ell + 1) {
            return Err(Error::Dimension(format!(
                "{} weights for order {ell}, expected {}",
                weights.len(),
                1usize << (ell + 1)
            )));
        }
        Ok(MarginalDistribution { ell, weights })
    }

    pub fn uniform(ell: usize) -> Self {
        let n = 1i64 << (ell + 1);
        MarginalDistribution { ell, weights: vec![T::from_ratio(1, n); n as usize] }
    }

    pub fn point_mass(word: &Word) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::Dimension("empty word".into()));
        }
        let mut weights = vec![T::zero(); 1 << word.len()];
        weights[word.to_index()] = T::one();
        Ok(MarginalDistribution { ell: word.len() - 1, weights })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn get(&self, word: &Word) -> Option<&T> {
        (word.len() == self.ell + 1).then(|| &self.weights[word.to_index()])
    }

    pub fn total(&self) -> T {
        self.weights.iter().fold(T::zero(), |acc, w| acc + w.clone())
    }

    /// One step of the chain: `μM`.
    pub fn step(&self, m: &TransitionMatrix<T>) -> Result<Self> {
        check_order(m.ell, self.ell)?;
        Ok(MarginalDistribution { ell: self.ell, weights: m.apply(&self.weights) })
    }

    /// `‖μM − μ‖₁`.
    pub fn residual(&self, m: &TransitionMatrix<T>) -> Result<f64> {
        let next = self.step(m)?;
        Ok(l1_distance(&next.weights, &self.weights))
    }

    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        check_order(self.ell, other.ell)?;
        Ok(l1_distance(&self.weights, &other.weights) / 2.0)
    }

    /// Marginal on the first `ℓ` symbols.
    pub fn marginalize_last(&self) -> Result<Self> {
        if self.ell == 0 {
            return Err(Error::Dimension("order 0 has no shorter marginal".into()));
        }
        let weights = self
            .weights
            .chunks(2)
            .map(|pair| pair[0].clone() + pair[1].clone())
            .collect();
        Ok(MarginalDistribution { ell: self.ell - 1, weights })
    }

    pub fn to_f64(&self) -> MarginalDistribution<f64> {
        MarginalDistribution { ell: self.ell, weights: self.weights.iter().map(Scalar::as_f64).collect() }
    }
}

fn check_order(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("order {a} does not match order {b}")));
    }
    Ok(())
}

fn l1_distance<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a.as_f64() - b.as_f64()).abs()).sum()
}

/// Power iteration from the uniform vector until `‖μM − μ‖₁ ≤ tol`.
pub fn stationary(m: &TransitionMatrix<f64>, tol: f64) -> Result<MarginalDistribution<f64>> {
    stationary_with_cap(m, tol, DEFAULT_MAX_ITER)
}

pub fn stationary_with_cap(
    m: &TransitionMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<MarginalDistribution<f64>> {
    let mut mu = MarginalDistribution::<f64>::uniform(m.ell);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = m.apply(&mu.weights);
        // renormalize so rounding drift does not accumulate
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|w| *w /= total);
        residual = l1_distance(&next, &mu.weights);
        mu.weights = next;
        if residual <= tol {
            return Ok(mu);
        }
    }
    Err(Error::Convergence { iterations: max_iter, residual })
}

/// Stationary vector solved exactly, order by order.
///
/// Writing `μ_ℓ(a'x) = (μ_{ℓ-1}(a') + σ(x) d(a')) / 2` with `σ(0) = 1`,
/// `σ(1) = -1`, stationarity reduces to the pair of equations
/// `d(a') = Δ(a') + c·d(ā')` with `c = p^ℓ(1 − 2p)`: the last input symbol only
/// influences the output prefix when every earlier symbol was modified. The
/// result is checked against `μM = μ` before it is returned, so a wrong
/// reduction cannot pass silently.
pub fn stationary_exact<T: Scalar>(ell: usize, p: &Probability) -> Result<MarginalDistribution<T>> {
    stationary_exact_with_max(ell, p, DEFAULT_ELL_MAX)
}

pub fn stationary_exact_with_max<T: Scalar>(
    ell: usize,
    p: &Probability,
    ell_max: usize,
) -> Result<MarginalDistribution<T>> {
    if ell > ell_max {
        return Err(Error::Resource { ell, max: ell_max });
    }
    let half = T::from_ratio(1, 2);
    let pm = T::from_probability(p);
    let mut mu = MarginalDistribution { ell: 0, weights: vec![half.clone(), half.clone()] };
    let mut m = build_transition_with_max::<T>(0, p, ell_max)?;
    for level in 1..=ell {
        m = build_transition_with_max::<T>(level, p, ell_max)?;
        let n = m.size();
        // K(a): lift μ_{ℓ-1} evenly to order ℓ and take one step.
        let lifted: Vec<T> = mu.weights.iter().flat_map(|w| {
            let h = w.clone() * half.clone();
            [h.clone(), h]
        }).collect();
        let k = m.apply(&lifted);
        let c = powers(&pm, level)[level].clone() * (T::one() - pm.clone() - pm.clone());
        let denom = T::one() - c.clone() * c.clone();
        let delta: Vec<T> = (0..n / 2).map(|a| k[2 * a].clone() - k[2 * a + 1].clone()).collect();
        let mask = n / 2 - 1;
        let mut weights = Vec::with_capacity(n);
        for (a, base) in mu.weights.iter().enumerate() {
            let d = (delta[a].clone() + c.clone() * delta[a ^ mask].clone()) / denom.clone();
            weights.push((base.clone() + d.clone()) * half.clone());
            weights.push((base.clone() - d) * half.clone());
        }
        mu = MarginalDistribution { ell: level, weights };
    }
    let next = mu.step(&m)?;
    let exact = next.weights.iter().zip(&mu.weights).all(|(a, b)| {
        let diff = a.clone() - b.clone();
        let scale = if b.as_f64().abs() > 1.0 { b.as_f64().abs() } else { 1.0 };
        diff.is_zero() || diff.as_f64().abs() <= 1e-13 * scale
    });
    if !exact {
        return Err(Error::Convergence { iterations: 0, residual: l1_distance(&next.weights, &mu.weights) });
    }
    Ok(mu)
}

/// Least `n ≤ cap` with every entry of `M^n` positive, from boolean powers.
pub fn primitivity_certificate<T: Scalar>(m: &TransitionMatrix<T>, cap: usize) -> Result<usize> {
    let n = m.size();
    let words = n.div_ceil(64);
    let support: Vec<Vec<usize>> = m
        .rows
        .iter()
        .map(|row| row.iter().filter(|(_, w)| !w.is_zero()).map(|(a, _)| *a).collect())
        .collect();
    let full_row = |bits: &[u64]| (0..n).all(|i| bits[i / 64] >> (i % 64) & 1 == 1);
    let mut power: Vec<Vec<u64>> = support
        .iter()
        .map(|targets| {
            let mut bits = vec![0u64; words];
            targets.iter().for_each(|a| bits[a / 64] |= 1 << (a % 64));
            bits
        })
        .collect();
    for k in 1..=cap {
        if power.iter().all(|r| full_row(r)) {
            return Ok(k);
        }
        // support(M^(k+1))[b] = union of support(M^k)[a] over a in support(M)[b]
        power = support
            .par_iter()
            .map(|targets| {
                let mut bits = vec![0u64; words];
                for a in targets {
                    bits.iter_mut().zip(&power[*a]).for_each(|(x, y)| *x |= y);
                }
                bits
            })
            .collect();
    }
    Err(Error::NotCertified { cap })
}

/// Wielandt's bound `(N − 1)² + 1` on the primitivity exponent.
pub fn wielandt_cap(size: usize) -> usize {
    (size - 1) * (size - 1) + 1
}

/// `max_a |Σ_x μ_hi(a x) − μ_lo(a)|`.
pub fn compatibility_residual<T: Scalar>(
    mu_hi: &MarginalDistribution<T>,
    mu_lo: &MarginalDistribution<T>,
) -> Result<f64> {
    if mu_hi.ell != mu_lo.ell + 1 {
        return Err(Error::Dimension(format!(
            "orders {} and {} do not differ by one",
            mu_hi.ell, mu_lo.ell
        )));
    }
    let marg = mu_hi.marginalize_last()?;
    Ok(marg
        .weights
        .iter()
        .zip(&mu_lo.weights)
        .map(|(a, b)| (a.clone() - b.clone()).as_f64().abs())
        .fold(0.0, f64::max))
}

/// `μ{x_0 = x_n = 1} − 1/4`.
pub fn correlation_from_marginal<T: Scalar>(mu: &MarginalDistribution<T>, n: usize) -> Result<T> {
    if n > mu.ell {
        return Err(Error::Range(format!("distance {n} exceeds order {}", mu.ell)));
    }
    let len = mu.ell + 1;
    let first = 1 << (len - 1);
    let nth = 1 << (len - 1 - n);
    let sum = mu
        .weights
        .iter()
        .enumerate()
        .filter(|(a, _)| a & first != 0 && a & nth != 0)
        .fold(T::zero(), |acc, (_, w)| acc + w.clone());
    Ok(sum - T::from_ratio(1, 4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{apply_global, SubstitutionSymbol, SubstitutionWord};
    use num_traits::Signed;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn prob(s: &str) -> Probability {
        s.parse().unwrap()
    }

    /// Sums over every full substitution word in {e,m}^(ℓ+1).
    fn brute_force(ell: usize, p: &Probability) -> Vec<Vec<BigRational>> {
        let len = ell + 1;
        let n = 1 << len;
        let pm = p.exact().clone();
        let pe = BigRational::one() - pm.clone();
        let mut out = vec![vec![BigRational::zero(); n]; n];
        for b in 0..n {
            let word = Word::from_index(b, len);
            for mask in 0..n {
                let syms: Vec<_> = (0..len)
                    .map(|i| if mask >> i & 1 == 1 { SubstitutionSymbol::Modification } else { SubstitutionSymbol::Expansion })
                    .collect();
                let nm = syms.iter().filter(|s| **s == SubstitutionSymbol::Modification).count();
                let mut w = BigRational::one();
                for _ in 0..nm {
                    w *= pm.clone();
                }
                for _ in nm..len {
                    w *= pe.clone();
                }
                let image = apply_global(&SubstitutionWord::new(syms), &word).unwrap();
                out[b][image.prefix(len).to_index()] += w;
            }
        }
        out
    }

    #[test]
    fn order_zero_matrix() {
        let m = build_transition::<BigRational>(0, &prob("3/10")).unwrap();
        assert_eq!(m.get(0, 0), q(7, 10));
        assert_eq!(m.get(0, 1), q(3, 10));
        assert_eq!(m.get(1, 0), q(3, 10));
        assert_eq!(m.get(1, 1), q(7, 10));
    }

    #[test]
    fn matches_brute_force_up_to_order_4() {
        for p in ["1/2", "1/10", "2/7"] {
            let p = prob(p);
            for ell in 0..=4 {
                let m = build_transition::<BigRational>(ell, &p).unwrap();
                let oracle = brute_force(ell, &p);
                for (b, row) in oracle.iter().enumerate() {
                    for (a, v) in row.iter().enumerate() {
                        assert_eq!(&m.get(b, a), v, "ell={ell} ({b},{a})");
                    }
                }
            }
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let m = build_transition::<BigRational>(3, &prob("3/10")).unwrap();
        assert!((0..m.size()).all(|b| m.row_sum(b) == BigRational::one()));
        let mf = build_transition::<f64>(8, &prob("0.37")).unwrap();
        assert!((0..mf.size()).all(|b| (mf.row_sum(b) - 1.0).abs() <= 1e-14));
    }

    #[test]
    fn order_limit() {
        assert_eq!(
            build_transition::<f64>(13, &prob("0.3")).unwrap_err(),
            Error::Resource { ell: 13, max: 12 }
        );
    }

    #[test]
    fn stationary_order_zero_is_uniform() {
        let m = build_transition::<f64>(0, &prob("0.3")).unwrap();
        let mu = stationary(&m, DEFAULT_TOL).unwrap();
        assert!((mu.weights()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn exact_order_one() {
        let mu = stationary_exact::<BigRational>(1, &prob("1/10")).unwrap();
        let w = mu.weights();
        assert_eq!(w[0], w[3]);
        assert_eq!(w[1], w[2]);
        assert_eq!(w[0].clone() + w[1].clone(), q(1, 2));
        assert_eq!(w[0].clone() + w[3].clone() - q(1, 2), q(5, 12));
        assert_eq!(correlation_from_marginal(&mu, 1).unwrap(), q(5, 24));
    }

    #[test]
    fn exact_and_power_iteration_agree() {
        let p = prob("0.3");
        for ell in 0..=6 {
            let exact = stationary_exact::<f64>(ell, &p).unwrap();
            let m = build_transition::<f64>(ell, &p).unwrap();
            let it = stationary(&m, DEFAULT_TOL).unwrap();
            assert!(exact.total_variation(&it).unwrap() < 1e-12, "ell={ell}");
        }
    }

    #[test]
    fn exact_solve_fixed_point() {
        let p = prob("1/4");
        let mu = stationary_exact::<BigRational>(5, &p).unwrap();
        let m = build_transition::<BigRational>(5, &p).unwrap();
        assert_eq!(mu.step(&m).unwrap(), mu);
        assert!(mu.weights().iter().all(|w| w.is_positive()));
    }

    #[test]
    fn primitivity() {
        let m = build_transition::<f64>(0, &prob("0.5")).unwrap();
        assert_eq!(primitivity_certificate(&m, 10).unwrap(), 1);
        let m2 = build_transition::<f64>(2, &prob("0.5")).unwrap();
        let k = primitivity_certificate(&m2, wielandt_cap(m2.size())).unwrap();
        assert!(k >= 1);
        let a = build_transition::<f64>(4, &prob("0.5")).unwrap();
        let b = build_transition::<f64>(4, &prob("0.01")).unwrap();
        assert_eq!(
            primitivity_certificate(&a, wielandt_cap(32)).unwrap(),
            primitivity_certificate(&b, wielandt_cap(32)).unwrap()
        );
    }

    #[test]
    fn certificate_cap_is_enforced() {
        let m = build_transition::<f64>(3, &prob("0.5")).unwrap();
        let k = primitivity_certificate(&m, 100).unwrap();
        if k > 1 {
            assert_eq!(primitivity_certificate(&m, k - 1), Err(Error::NotCertified { cap: k - 1 }));
        }
    }

    #[test]
    fn compatibility() {
        let p = prob("0.3");
        let lo = stationary(&build_transition(1, &p).unwrap(), DEFAULT_TOL).unwrap();
        let hi = stationary(&build_transition(2, &p).unwrap(), DEFAULT_TOL).unwrap();
        assert!(compatibility_residual(&hi, &lo).unwrap() <= 1e-12);
        let p = prob("0.45");
        let lo = stationary(&build_transition(5, &p).unwrap(), DEFAULT_TOL).unwrap();
        let hi = stationary(&build_transition(6, &p).unwrap(), DEFAULT_TOL).unwrap();
        assert!(compatibility_residual(&hi, &lo).unwrap() <= 1e-10);
        let u2 = MarginalDistribution::<BigRational>::uniform(1);
        let u1 = MarginalDistribution::<BigRational>::uniform(0);
        assert_eq!(compatibility_residual(&u2, &u1).unwrap(), 0.0);
        assert!(compatibility_residual(&u2, &u2).is_err());
    }

    #[test]
    fn correlation_at_distance_zero() {
        let mu = stationary_exact::<BigRational>(3, &prob("2/5")).unwrap();
        assert_eq!(correlation_from_marginal(&mu, 0).unwrap(), q(1, 4));
        assert!(correlation_from_marginal(&mu, 4).is_err());
    }

    #[test]
    fn small_p_limit() {
        let mu = stationary_exact::<f64>(6, &prob("1e-9")).unwrap();
        for n in 0..=6 {
            assert!((correlation_from_marginal(&mu, n).unwrap() - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn convergence_from_point_mass() {
        let p = prob("0.2");
        let m = build_transition::<f64>(4, &p).unwrap();
        let target = stationary(&m, DEFAULT_TOL).unwrap();
        let mut mu = MarginalDistribution::point_mass(&Word::ones(5)).unwrap();
        let mut dists = Vec::new();
        for _ in 0..200 {
            dists.push(mu.total_variation(&target).unwrap());
            mu = mu.step(&m).unwrap();
        }
        assert!(dists.windows(2).skip(5).all(|w| w[1] <= w[0] + 1e-15));
        assert!(*dists.last().unwrap() < 1e-6);
    }

    /// The spectrum is {1, c_0} together with ±c_j of multiplicity 2^(j−1)
    /// for 1 ≤ j ≤ ℓ, where c_j = p^j(1 − 2p). Traces of M^k for k = 1..N
    /// determine all N eigenvalues, so matching them checks the claim without
    /// an eigen-solver.
    #[test]
    fn spectrum_by_power_traces() {
        for (ell, p) in [(1, 0.3), (2, 0.3), (3, 0.3), (3, 0.7), (2, 0.1)] {
            let m = build_transition::<f64>(ell, &Probability::from_f64(p).unwrap()).unwrap();
            let n = m.size();
            let mut dense = vec![vec![0.0; n]; n];
            for (b, row) in dense.iter_mut().enumerate() {
                for (a, w) in m.row(b) {
                    row[*a] = *w;
                }
            }
            let mut power = dense.clone();
            for k in 1..=n as i32 {
                let trace: f64 = (0..n).map(|i| power[i][i]).sum();
                let c = |j: i32| p.powi(j) * (1.0 - 2.0 * p);
                let mut predicted = 1.0 + c(0).powi(k);
                for j in 1..=ell as i32 {
                    let mult = f64::from(1 << (j - 1));
                    predicted += mult * (c(j).powi(k) + (-c(j)).powi(k));
                }
                assert!((trace - predicted).abs() < 1e-12, "ell={ell} p={p} k={k}: {trace} vs {predicted}");
                power = (0..n)
                    .map(|i| (0..n).map(|j| (0..n).map(|l| power[i][l] * dense[l][j]).sum()).collect())
                    .collect();
            }
        }
    }

    #[test]
    fn exact_stationary_is_strictly_positive() {
        for p in ["1/50", "1/10", "1/3", "1/2", "4/5", "49/50"] {
            let mu = stationary_exact::<BigRational>(5, &prob(p)).unwrap();
            assert!(mu.weights().iter().all(|w| w.is_positive()), "p={p}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn stationary_is_flip_symmetric_with_uniform_site_marginal(ell in 0usize..=6, pp in 0.02f64..0.98) {
            let p = Probability::from_f64(pp).unwrap();
            let mu = stationary_exact::<f64>(ell, &p).unwrap();
            let n = mu.weights().len();
            for a in 0..n {
                prop_assert!((mu.weights()[a] - mu.weights()[(n - 1) ^ a]).abs() <= 1e-14);
            }
            let first_one: f64 = mu.weights()[n / 2..].iter().sum();
            prop_assert!((first_one - 0.5).abs() <= 1e-13);
        }
    }
}
