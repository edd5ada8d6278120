//! Dual stepsize regions and the parameter rules that guarantee convergence.
//!
//! All inequalities are evaluated exactly in double precision; boundary points
//! of strict inequalities are excluded.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsizeParams {
    pub tau: f64,
    pub s: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub beta: f64,
}

impl StepsizeParams {
    pub fn new(tau: f64, s: f64, sigma1: f64, sigma2: f64, beta: f64) -> Result<Self> {
        let p = Self { tau, s, sigma1, sigma2, beta };
        p.check_well_formed()?;
        Ok(p)
    }

    /// Finite values, `β > 0` and `σ ≥ 0`; region membership is checked by
    /// [`validate_params`].
    pub fn check_well_formed(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("s", self.s),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("beta", self.beta),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.beta <= 0.0 {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(Error::Config(format!(
                "proximal weights must be nonnegative, got sigma1 = {}, sigma2 = {}",
                self.sigma1, self.sigma2
            )));
        }
        Ok(())
    }

    /// Parameters of the same scheme with the groups exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tau: self.s,
            s: self.tau,
            sigma1: self.sigma2,
            sigma2: self.sigma1,
            beta: self.beta,
        }
    }
}

/// `−τ² − s² − τs + τ + s + 1`
pub fn region_quadratic(tau: f64, s: f64) -> f64 {
    -tau * tau - s * s - tau * s + tau + s + 1.0
}

pub fn in_region_k(tau: f64, s: f64) -> bool {
    tau + s > 0.0 && tau <= 1.0 && region_quadratic(tau, s) > 0.0
}

pub fn in_region_kbar(tau: f64, s: f64) -> bool {
    tau + s > 0.0 && s <= 1.0 && region_quadratic(tau, s) > 0.0
}

pub fn in_region_g(tau: f64, s: f64) -> bool {
    tau + s > 0.0 && region_quadratic(tau, s) > 0.0
}

pub fn in_region_k1(tau: f64, s: f64) -> bool {
    tau + s > 0.0 && tau < 1.0 && region_quadratic(tau, s) > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiConstants {
    pub xi2: f64,
    pub xi3: f64,
    pub xi4: f64,
}

pub fn xi_constants(tau: f64, s: f64, beta: f64) -> Result<XiConstants> {
    if !(tau > -1.0) {
        return Err(Error::Domain(format!("xi constants need tau > -1, got {tau}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("xi constants need beta > 0, got {beta}")));
    }
    let t = (1.0 - s) * (1.0 - s) / (1.0 + tau);
    Ok(XiConstants {
        xi2: (2.0 - tau - s - t) * beta,
        xi3: t * beta,
        xi4: (1.0 - tau) / (1.0 + tau),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// x-group first, dual stepsizes τ then s.
    XFirst,
    /// y-group first, dual stepsizes s then τ.
    YFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    None,
    /// `q = 1`, `σ₂ = 0`.
    A,
    /// `p = 1`, `σ₁ = 0`.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    K,
    #[serde(rename = "Kbar")]
    KBar,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamReport {
    pub ok: bool,
    pub failures: Vec<String>,
    pub in_k: bool,
    pub in_kbar: bool,
    pub in_k1: bool,
    /// Sub-region of `G` that justified acceptance. The region proven for the
    /// chosen update order is preferred (`K` for x-first, `K̄` for y-first).
    pub justified_by: Option<Region>,
}

/// Checks `(p, q, params)` against the convergence conditions of the chosen
/// case. Failures are reported, not raised.
pub fn validate_params(
    p: usize,
    q: usize,
    params: &StepsizeParams,
    variant: Variant,
    special_case: SpecialCase,
) -> ParamReport {
    let StepsizeParams { tau, s, sigma1, sigma2, beta } = *params;
    let mut failures = Vec::new();
    if !(beta > 0.0) || !beta.is_finite() {
        failures.push(format!("beta = {beta} must be positive"));
    }
    let strict_sigma = |failures: &mut Vec<String>, name: &str, sigma: f64, count: usize, label: &str| {
        let bound = count as f64 - 1.0;
        if !(sigma > bound) {
            failures.push(format!("{name} = {sigma} must exceed {label} - 1 = {bound}"));
        }
    };
    let zero_sigma = |failures: &mut Vec<String>, name: &str, sigma: f64| {
        if sigma != 0.0 {
            failures.push(format!("{name} = {sigma} must be 0 in this special case"));
        }
    };
    match special_case {
        SpecialCase::None => {
            strict_sigma(&mut failures, "sigma1", sigma1, p, "p");
            strict_sigma(&mut failures, "sigma2", sigma2, q, "q");
        }
        SpecialCase::A => {
            if q != 1 {
                failures.push(format!("special case (a) needs q = 1, got q = {q}"));
            }
            zero_sigma(&mut failures, "sigma2", sigma2);
            strict_sigma(&mut failures, "sigma1", sigma1, p, "p");
        }
        SpecialCase::B => {
            if p != 1 {
                failures.push(format!("special case (b) needs p = 1, got p = {p}"));
            }
            zero_sigma(&mut failures, "sigma1", sigma1);
            strict_sigma(&mut failures, "sigma2", sigma2, q, "q");
        }
    }
    if !(tau + s > 0.0) {
        failures.push(format!("tau + s = {} must be > 0", tau + s));
    }
    let quad = region_quadratic(tau, s);
    if !(quad > 0.0) {
        failures.push(format!("−τ²−s²−τs+τ+s+1 = {quad} ≤ 0 (must be > 0)"));
    }
    let (in_k, in_kbar) = (in_region_k(tau, s), in_region_kbar(tau, s));
    let justified_by = match (failures.is_empty(), variant) {
        (false, _) => None,
        (true, Variant::XFirst) => Some(if in_k { Region::K } else { Region::KBar }),
        (true, Variant::YFirst) => Some(if in_kbar { Region::KBar } else { Region::K }),
    };
    ParamReport {
        ok: failures.is_empty(),
        failures,
        in_k,
        in_kbar,
        in_k1: in_region_k1(tau, s),
        justified_by,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionSample {
    pub tau: f64,
    pub s: f64,
    pub in_k: bool,
    pub in_kbar: bool,
    pub in_g: bool,
}

/// `lo + (hi − lo)·i/(res − 1)` for `i = 0..res`.
pub fn grid_axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution).map(|i| lo + (hi - lo) * (i as f64) / last).collect()
}

/// Row-major samples: τ is the slow index, `s` the fast one.
pub fn region_grid(tau_range: (f64, f64), s_range: (f64, f64), resolution: usize) -> Result<Vec<RegionSample>> {
    if resolution < 2 {
        return Err(Error::Argument(format!("resolution must be at least 2, got {resolution}")));
    }
    for (name, (lo, hi)) in [("tau", tau_range), ("s", s_range)] {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!("{name} range [{lo}, {hi}] is empty or inverted")));
        }
    }
    let taus = grid_axis(tau_range.0, tau_range.1, resolution);
    let ss = grid_axis(s_range.0, s_range.1, resolution);
    let mut out = Vec::with_capacity(resolution * resolution);
    for &tau in &taus {
        for &s in &ss {
            out.push(RegionSample {
                tau,
                s,
                in_k: in_region_k(tau, s),
                in_kbar: in_region_kbar(tau, s),
                in_g: in_region_g(tau, s),
            });
        }
    }
    Ok(out)
}

pub fn write_region_csv<W: Write>(samples: &[RegionSample], mut out: W) -> std::io::Result<()> {
    let mut buf = String::with_capacity(32 * samples.len() + 32);
    buf.push_str("tau,s,in_K,in_Kbar,in_G\n");
    for r in samples {
        let _ = writeln!(
            buf,
            "{},{},{},{},{}",
            r.tau, r.s, r.in_k as u8, r.in_kbar as u8, r.in_g as u8
        );
    }
    out.write_all(buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_examples() {
        assert!(in_region_k(0.8, 1.17));
        assert!(!in_region_k(1.0, 1.0));
        assert_eq!(region_quadratic(1.0, 1.0), 0.0);
        assert!(in_region_k(0.0, 1.618));
        assert!(!in_region_k(0.0, 1.62));
    }

    #[test]
    fn kbar_examples() {
        assert!(in_region_kbar(1.17, 0.8));
        assert!(!in_region_kbar(0.5, 1.2));
        assert!(in_region_k(0.5, 1.2));
        assert!(in_region_kbar(-0.3, 1.0));
    }

    #[test]
    fn g_examples() {
        assert!(!in_region_g(2.0, 0.0));
        assert!(in_region_g(0.5, 0.5));
        assert!(!in_region_g(1.0, 1.0));
        assert!(!in_region_g(0.0, 0.0));
    }

    #[test]
    fn k1_examples() {
        assert!(!in_region_k1(1.0, 0.5));
        assert!(in_region_k(1.0, 0.5));
        assert!(in_region_k1(0.9, 1.09));
        assert!(!in_region_k1(-0.5, 0.4));
    }

    #[test]
    fn xi_examples() {
        let xi = xi_constants(0.0, 1.0, 1.0).unwrap();
        assert_eq!((xi.xi2, xi.xi3, xi.xi4), (1.0, 0.0, 1.0));
        assert_eq!(xi_constants(1.0, 0.3, 2.0).unwrap().xi4, 0.0);
        let xi = xi_constants(0.8, 1.17, 0.06).unwrap();
        let oracle = 0.06 * (2.0 - 1.97 - 0.17f64.powi(2) / 1.8);
        assert!((xi.xi2 - oracle).abs() < 1e-15);
        assert!((xi.xi2 - 0.000837).abs() < 5e-7);
        assert!(matches!(xi_constants(-1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }

    fn params(tau: f64, s: f64, sigma1: f64, sigma2: f64) -> StepsizeParams {
        StepsizeParams { tau, s, sigma1, sigma2, beta: 1.0 }
    }

    #[test]
    fn validate_examples() {
        let r = validate_params(2, 1, &params(0.8, 1.17, 2.0, 3.0), Variant::XFirst, SpecialCase::None);
        assert!(r.ok, "{:?}", r.failures);
        assert_eq!(r.justified_by, Some(Region::K));

        let r = validate_params(2, 1, &params(0.8, 1.17, 1.0, 3.0), Variant::XFirst, SpecialCase::None);
        assert!(!r.ok);
        assert!(r.failures[0].contains("sigma1"));

        let r = validate_params(2, 1, &params(0.9, 1.09, 2.0, 0.0), Variant::XFirst, SpecialCase::A);
        assert!(r.ok, "{:?}", r.failures);
    }

    #[test]
    fn validate_names_region_inequality() {
        let r = validate_params(1, 1, &params(2.0, 0.0, 1.0, 1.0), Variant::XFirst, SpecialCase::None);
        assert!(!r.ok);
        assert!(r.failures.iter().any(|f| f.contains("−τ²−s²−τs+τ+s+1") && f.contains("≤ 0")));
    }

    #[test]
    fn validate_records_kbar_justification() {
        let r = validate_params(1, 1, &params(1.17, 0.8, 1.0, 1.0), Variant::XFirst, SpecialCase::None);
        assert!(r.ok);
        assert_eq!(r.justified_by, Some(Region::KBar));
        let r = validate_params(1, 1, &params(0.5, 0.5, 1.0, 1.0), Variant::YFirst, SpecialCase::None);
        assert_eq!(r.justified_by, Some(Region::KBar));
    }

    #[test]
    fn special_case_shape_rules() {
        let r = validate_params(2, 2, &params(0.5, 0.5, 2.0, 0.0), Variant::XFirst, SpecialCase::A);
        assert!(r.failures.iter().any(|f| f.contains("q = 1")));
        let r = validate_params(1, 2, &params(0.5, 0.5, 0.0, 2.0), Variant::XFirst, SpecialCase::B);
        assert!(r.ok);
        let r = validate_params(1, 1, &params(0.0, 1.0, 0.0, 0.0), Variant::XFirst, SpecialCase::None);
        assert!(!r.ok);
    }

    #[test]
    fn grid_shape_and_origin() {
        let g = region_grid((-1.5, 2.0), (-1.5, 2.0), 8).unwrap();
        assert_eq!(g.len(), 64);
        assert!(g.iter().all(|r| !r.in_k || r.in_g));
        let g = region_grid((-1.0, 1.0), (-1.0, 1.0), 3).unwrap();
        let origin = g[4];
        assert_eq!((origin.tau, origin.s), (0.0, 0.0));
        assert!(!origin.in_k && !origin.in_kbar && !origin.in_g);
    }

    #[test]
    fn grid_rejects_bad_ranges() {
        assert!(region_grid((1.0, 1.0), (0.0, 1.0), 5).is_err());
        assert!(region_grid((0.0, 1.0), (2.0, 1.0), 5).is_err());
        assert!(region_grid((0.0, 1.0), (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn csv_header_and_flags() {
        let g = region_grid((0.0, 1.0), (0.0, 1.0), 2).unwrap();
        let mut buf = Vec::new();
        write_region_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "tau,s,in_K,in_Kbar,in_G");
        assert_eq!(lines[1], "0,0,0,0,0");
        assert_eq!(lines[2], "0,1,1,1,1");
        assert_eq!(lines.len(), 5);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn g_is_union_of_k_and_kbar(tau in -2.0f64..2.5, s in -2.0f64..2.5) {
            prop_assert_eq!(in_region_g(tau, s), in_region_k(tau, s) || in_region_kbar(tau, s));
        }

        #[test]
        fn g_is_symmetric(tau in -2.0f64..2.5, s in -2.0f64..2.5) {
            prop_assert_eq!(in_region_g(tau, s), in_region_g(s, tau));
            prop_assert_eq!(in_region_k(tau, s), in_region_kbar(s, tau));
        }

        #[test]
        fn k1_inside_k(tau in -2.0f64..2.5, s in -2.0f64..2.5) {
            prop_assert!(!in_region_k1(tau, s) || in_region_k(tau, s));
        }

        #[test]
        fn xi2_positive_on_k(tau in -1.0f64..=1.0, s in -1.0f64..2.0, beta in 1e-3f64..10.0) {
            prop_assume!(tau > -1.0 && in_region_k(tau, s));
            let xi = xi_constants(tau, s, beta).unwrap();
            prop_assert!(xi.xi2 > 0.0);
            prop_assert!(xi.xi3 >= 0.0 && xi.xi4 >= 0.0);
        }

        #[test]
        fn swapped_is_involution(tau in -1.0f64..2.0, s in -1.0f64..2.0, a in 0.0f64..4.0, b in 0.0f64..4.0, beta in 0.01f64..5.0) {
            let p = StepsizeParams { tau, s, sigma1: a, sigma2: b, beta };
            prop_assert_eq!(p.swapped().swapped(), p);
        }
    }
}
