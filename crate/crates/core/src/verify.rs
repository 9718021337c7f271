//! Named verification suites with one machine-readable verdict per check.
//!
//! Checks marked `informational` record claims that do not hold numerically
//! as stated; they are reported but do not decide the overall verdict.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::correlation::{
    correlation_series, decay_contraction_report, max_relative_error, nu, s_closed, s_closed_exact, s_direct_exact,
    s_recursive, s_recursive_exact_table, weight_sum_closed_exact, weight_sum_direct_exact, weight_sum_printed_exact,
    PrecisionMode, DEFAULT_PRECISION,
};
use crate::error::{Error, Result};
use crate::marginals::{
    build_transition, compatibility_residual, correlation_from_marginal, primitivity_certificate, stationary,
    stationary_exact, wielandt_cap, DEFAULT_TOL,
};
use crate::probability::Probability;
use crate::scaling::{
    alpha_p, concentration_tail, nu_total, qr_constants, rate_i, robbins_bounds, sandwich_threshold,
    iterated_window_check, verify_low_p, window_sign_scan, window_sign_threshold, WindowSign, WindowSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Marginals,
    Recurrence,
    Concentration,
    Windows,
    FixedPoints,
    LowP,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Marginals, Suite::Recurrence, Suite::Concentration, Suite::Windows, Suite::FixedPoints, Suite::LowP];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Marginals => "marginals",
            Suite::Recurrence => "recurrence",
            Suite::Concentration => "concentration",
            Suite::Windows => "windows",
            Suite::FixedPoints => "fixedpoints",
            Suite::LowP => "appendixE",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "marginals" => Ok(Suite::Marginals),
            "recurrence" => Ok(Suite::Recurrence),
            "concentration" => Ok(Suite::Concentration),
            "windows" => Ok(Suite::Windows),
            "fixedpoints" => Ok(Suite::FixedPoints),
            "appendixe" => Ok(Suite::LowP),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidParameter(format!("unknown suite '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub informational: bool,
    pub value: Option<f64>,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Checks {
    suite: Suite,
    list: Vec<Check>,
}

impl Checks {
    fn new(suite: Suite) -> Self {
        Checks { suite, list: Vec::new() }
    }

    fn push(&mut self, name: String, passed: bool, value: Option<f64>, expected: Option<f64>, tol: Option<f64>, detail: String) {
        self.list.push(Check {
            suite: self.suite.to_string(),
            name,
            passed,
            informational: false,
            value,
            expected,
            tolerance: tol,
            detail,
        });
    }

    fn close(&mut self, name: impl Into<String>, value: f64, expected: f64, tol: f64) {
        let passed = (value - expected).abs() <= tol;
        self.push(name.into(), passed, Some(value), Some(expected), Some(tol), String::new());
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, bound: f64) {
        self.push(name.into(), value <= bound, Some(value), None, Some(bound), String::new());
    }

    fn flag(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.push(name.into(), passed, None, None, None, detail.into());
    }

    fn informational(&mut self) {
        if let Some(c) = self.list.last_mut() {
            c.informational = true;
        }
    }
}

fn probs(list: &[&str]) -> Result<Vec<Probability>> {
    list.iter().map(|s| s.parse()).collect()
}

/// 19-point grid `p = k/20`, `k = 1..=19`.
pub fn twenty_grid() -> Vec<Probability> {
    (1..20).map(|k| Probability::from_ratio(k, 20).expect("k/20 in (0, 1)")).collect()
}

pub fn run_suite(suite: Suite) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s)?.checks);
            }
            all
        }
        Suite::Marginals => marginals_suite()?,
        Suite::Recurrence => recurrence_suite()?,
        Suite::Concentration => concentration_suite()?,
        Suite::Windows => windows_suite()?,
        Suite::FixedPoints => fixedpoints_suite()?,
        Suite::LowP => low_p_suite()?,
    };
    let passed = checks.iter().all(|c| c.passed || c.informational);
    Ok(VerifyReport { suite: suite.to_string(), passed, checks })
}

fn marginals_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::Marginals);
    for p in probs(&["1/10", "1/4", "1/2", "7/10"])? {
        let mut prev = None;
        for ell in 1..=6 {
            let m = build_transition::<f64>(ell, &p)?;
            let power = stationary(&m, DEFAULT_TOL)?;
            let exact = stationary_exact::<f64>(ell, &p)?;
            c.at_most(format!("stationary_residual_p{p}_l{ell}"), power.residual(&m)?, 1e-12);
            c.at_most(format!("solver_agreement_p{p}_l{ell}"), power.total_variation(&exact)?, 1e-10);
            let size = m.size();
            let flip = (0..size).map(|i| (power.weights()[i] - power.weights()[size - 1 - i]).abs()).fold(0.0, f64::max);
            c.at_most(format!("flip_symmetry_p{p}_l{ell}"), flip, 1e-12);
            let cert = primitivity_certificate(&m, wielandt_cap(size));
            c.flag(format!("primitive_p{p}_l{ell}"), cert.is_ok(), format!("{cert:?}"));
            if let Some(lo) = prev.replace(exact.clone()) {
                c.at_most(format!("compatibility_p{p}_l{ell}"), compatibility_residual(&exact, &lo)?, 1e-12);
            }
        }
    }
    let tenth: Probability = "1/10".parse()?;
    let mu = stationary_exact::<BigRational>(1, &tenth)?;
    let corr = correlation_from_marginal(&mu, 1)?;
    c.flag("exact_correlation_l1_p1/10", corr == BigRational::new(5.into(), 24.into()), format!("{corr}"));
    Ok(c.list)
}

fn recurrence_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::Recurrence);
    for p in probs(&["1/10", "1/4", "1/2"])? {
        let exact = correlation_series(&p, 10, PrecisionMode::Rational)?;
        let float = correlation_series(&p, 10, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
        let mut all_equal = true;
        let mut worst = 0.0f64;
        for n in 1..=10 {
            let mu = stationary_exact::<BigRational>(n, &p)?;
            all_equal &= Some(&correlation_from_marginal(&mu, n)?) == exact.exact_value(n);
            let mu_f = stationary_exact::<f64>(n, &p)?;
            worst = worst.max((correlation_from_marginal(&mu_f, n)? - float.get(n).unwrap()).abs());
        }
        c.flag(format!("dual_method_rational_p{p}"), all_equal, "n <= 10, eigenvector at order n");
        c.at_most(format!("dual_method_float_p{p}"), worst, 1e-10);
    }

    let mut s_float = 0.0f64;
    let mut s_exact = true;
    let mut w_closed = true;
    let mut w_printed = 0.0f64;
    for p in twenty_grid() {
        let (pf, pe) = (p.value(), p.exact());
        let recursive = s_recursive_exact_table(pe, 200);
        for n in 1..=200 {
            let closed = s_closed(pf, n);
            let direct: f64 = (1..=n).map(|k| nu(pf, k, n)).sum();
            s_float = s_float.max(((s_recursive(pf, n) - closed) / closed).abs());
            s_float = s_float.max(((direct - closed) / closed).abs());
            let ce = s_closed_exact(pe, n);
            s_exact &= ce == recursive[n] && ce == s_direct_exact(pe, n);
            if n >= 2 {
                let w = weight_sum_direct_exact(pe, n);
                w_closed &= weight_sum_closed_exact(pe, n) == w;
                let rel = ((weight_sum_printed_exact(pe, n) - &w) / &w).to_f64().unwrap_or(f64::INFINITY);
                w_printed = w_printed.max(rel.abs());
            }
        }
    }
    c.flag("s_closed_exact", s_exact, "S closed = S recursive = sum of nu, rational, n <= 200");
    c.at_most("s_closed_float", s_float, 1e-12);
    c.flag("weight_sum_identity", w_closed, "exact, n = 2..=200");
    c.at_most("weight_sum_identity_as_printed", w_printed, 1e-12);
    c.informational();

    for p in probs(&["1/10", "3/10", "7/10"])? {
        let exact = correlation_series(&p, 64, PrecisionMode::Rational)?;
        let float = correlation_series(&p, 64, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
        c.at_most(format!("float_vs_rational_p{p}"), max_relative_error(&float, exact.exact().unwrap()), 1e-12);
    }

    for k in [1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 13, 15, 18] {
        let p = Probability::from_ratio(k, 20)?;
        let series = correlation_series(&p, 2000, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
        let bad: Vec<usize> =
            decay_contraction_report(&series).into_iter().filter(|e| e.n >= 4 && e.violated).map(|e| e.n).collect();
        c.flag(format!("contraction_p{p}"), bad.is_empty(), format!("violations at {:?}", &bad[..bad.len().min(5)]));
        c.flag(format!("in_range_p{p}"), series.in_range(), "|C(n)| <= 1/4");
    }
    Ok(c.list)
}

fn concentration_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::Concentration);
    for p in [0.1, 0.3, 0.7] {
        for n in [1_000, 10_000, 100_000] {
            let r = concentration_tail(p, n, 2.0, 1.0)?;
            c.push(
                format!("tail_p{p}_n{n}"),
                r.holds(),
                Some(r.delta_n),
                None,
                Some(r.bound),
                "delta_n <= n^(-(beta-b)/2)".into(),
            );
            let total = nu_total(p, n);
            c.at_most(format!("partition_p{p}_n{n}"), ((r.tail_mass + r.window_mass) - total).abs() / total, 1e-9);
        }
    }
    let mut robbins_ok = true;
    for p in [0.05, 0.1, 0.3, 0.5, 0.7, 0.9] {
        for n in 3..=40usize {
            for k in n.div_ceil(2) + 1..n {
                if let Some((lo, hi)) = robbins_bounds(p, k, n) {
                    let v = nu(p, k + 1, n + 1);
                    robbins_ok &= lo <= v && v <= hi;
                }
            }
        }
    }
    c.flag("robbins_sandwich", robbins_ok, "3 <= n <= 40");
    let mut convex = true;
    let mut minimum = true;
    for p in [0.05, 0.2, 0.5, 0.7, 0.95] {
        let h = 1e-3;
        let vals: Vec<f64> = (1..1000).map(|i| rate_i(p, i as f64 * h)).collect();
        convex &= vals.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > 0.0);
        let argmin = (vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 + 1) as f64 * h;
        minimum &= (argmin - (1.0 - p)).abs() <= h;
    }
    c.flag("rate_function_convex", convex, "second differences on a 1e-3 grid");
    c.flag("rate_function_minimum", minimum, "argmin within one grid step of 1 - p");
    Ok(c.list)
}

fn windows_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::Windows);
    for (p, expected) in [
        (0.1, WindowSign::AllPositive),
        (0.3, WindowSign::AllPositive),
        (0.8, WindowSign::AllPositive),
        (0.55, WindowSign::AllNegative),
        (0.58, WindowSign::AllNegative),
        (0.6, WindowSign::AllNegative),
    ] {
        let spec = WindowSpec::with_default_beta(p);
        let scan = window_sign_scan(&spec, 500)?;
        c.flag(
            format!("sign_p{p}_n500"),
            scan.sign == expected,
            format!("{:?}: {} positive, {} negative on {:?}", scan.sign, scan.positive, scan.negative, scan.window),
        );
        if expected == WindowSign::AllNegative {
            // the negative regime only holds for n beyond a threshold
            c.informational();
            let n1 = window_sign_threshold(&spec, expected, 200_000);
            c.flag(format!("sign_threshold_p{p}"), n1.is_some(), format!("n1 = {n1:?}"));
        }
    }
    Ok(c.list)
}

fn fixedpoints_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::FixedPoints);
    let spec = WindowSpec::with_default_beta(0.3);
    let qr = qr_constants(1e4, &spec)?;
    c.at_most("q_residual_p0.3_x1e4", qr.q_residual, 1e-12);
    c.at_most("r_residual_p0.3_x1e4", qr.r_residual, 1e-12);
    let far = qr_constants(1e8, &spec)?;
    c.at_most("one_minus_q_p0.3_x1e8", 1.0 - far.q, 0.01);
    c.at_most("r_minus_one_p0.3_x1e8", far.r - 1.0, 0.01);
    for p in [0.1, 0.3, 0.7] {
        let spec = WindowSpec::with_default_beta(p);
        let x0 = sandwich_threshold(&spec, 20, 1e12);
        c.flag(format!("sandwich_threshold_p{p}"), x0.is_some(), format!("x0 = {x0:?}"));
        for x in [1e6, 1e8, 1e10] {
            let (holds, low, high) = iterated_window_check(&spec, x, 20)?;
            c.flag(format!("sandwich_p{p}_x{x:e}"), holds, format!("min l/Q = {low}, max u/R = {high}"));
        }
    }
    Ok(c.list)
}

fn low_p_suite() -> Result<Vec<Check>> {
    let mut c = Checks::new(Suite::LowP);
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 100.0).collect();
    let report = verify_low_p(&grid, 10_000, 400)?;
    c.close("alpha_110_25", report.alpha_110_25, 1.099_911_1, 1e-6);
    c.close("alpha_110_25_signed_term", report.alpha_110_25_signed, 1.099_911_1, 1e-6);
    c.informational();
    c.close("b_010", report.b_010, 1.164_883, 1e-9);
    c.flag("alpha_decreasing_in_p", report.alpha_decreasing_in_p, "p = 0.01..0.1, n = 25..37");
    c.flag("alpha_increasing_in_n", report.alpha_increasing_in_n, "p = 0.01..0.1, n = 25..37");
    for r in &report.lower_band {
        c.push(format!("lower_band_p{}", r.p), r.holds, Some(r.min_ratio), None, Some(1.0), format!("worst n = {}", r.worst_n));
    }
    for r in &report.log_concavity {
        c.push(
            format!("log_concavity_p{}", r.p),
            r.holds,
            Some(r.min_margin),
            None,
            Some(0.0),
            format!("worst n = {}", r.worst_n),
        );
        c.informational();
    }
    for r in &report.induction {
        c.push(
            format!("induction_p{}", r.p),
            r.direct_holds && r.largest_verified_n >= 37,
            Some(r.largest_verified_n as f64),
            None,
            None,
            format!("direct check to n = {}: {}", r.horizon, r.direct_holds),
        );
    }
    let upper: Vec<f64> = (11..=20).map(|k| k as f64 / 100.0).collect();
    let beyond = verify_low_p(&upper, 10_000, 400)?;
    for (band, ind) in beyond.lower_band.iter().zip(&beyond.induction) {
        c.push(
            format!("lower_band_p{}", band.p),
            band.holds,
            Some(band.min_ratio),
            None,
            Some(1.0),
            format!("alpha_p(25) = {}, induction to {}", alpha_p(band.p, 25), ind.largest_verified_n),
        );
        c.informational();
    }
    Ok(c.list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.iter().chain([Suite::All].iter()) {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), *s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn informational_checks_do_not_fail_report() {
        let report = run_suite(Suite::FixedPoints).unwrap();
        assert!(report.passed, "{:#?}", report.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        let e = run_suite(Suite::LowP).unwrap();
        assert!(e.passed);
        assert!(!e.find("log_concavity_p0.01").unwrap().passed);
    }
}
