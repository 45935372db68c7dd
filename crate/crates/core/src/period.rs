//! Period map of the oscillating characteristics launched from `(0, p₀)`, `0 < p₀ < p_sep`,
//! and the shock-formation time `inf 𝒯/2`.
//!
//! Energy conservation gives `𝒯(p₀) = 4 ∫₀^{q⁺} dq / √(p₀² - 2 g(q))` with `g(q⁺) = p₀²/2`.
//! Substituting `q = q⁺ sin θ` and writing `g(q⁺) - g(q)` through the divided difference `S`
//! turns the integrand into `√(q⁺ (1 + sin θ) / (2 S(q⁺, q⁺ sin θ)))`, which is bounded on
//! `[0, π/2]`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{crossing_events, integrate, FlowOptions};
use crate::model::HamiltonianModel;
use crate::quadrature::integrate_adaptive;
use crate::scalar::{lit, Scalar};

/// One row of the period table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodSample<F> {
    pub p0: F,
    pub period: F,
    pub q_max: F,
}

fn check_periodic<F: Scalar, M: HamiltonianModel<F> + ?Sized>(model: &M, p0: F) -> Result<()> {
    let sep = model.separatrix_momentum();
    if !(p0 > F::zero() && p0 < sep) {
        return Err(Error::Domain(format!(
            "p0 = {p0} outside the oscillation range (0, {sep})"
        )));
    }
    Ok(())
}

/// Turning point `q⁺ ∈ (0, X)` of the orbit from `(0, p₀)`: the root of `g(q) = p₀²/2`, by
/// bisection down to the scalar's resolution.
pub fn turning_point<F, M>(model: &M, p0: F) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    check_periodic(model, p0)?;
    let level = model.g(F::zero()) + p0 * p0 / lit(2.0);
    let (mut lo, mut hi) = (F::zero(), model.cutoff());
    loop {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if model.g(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / lit(2.0))
}

/// `𝒯(p₀)` by adaptive Gauss–Kronrod quadrature of the regularised integrand.
pub fn period_quadrature<F, M>(model: &M, p0: F) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    period_sample(model, p0).map(|s| s.period)
}

pub fn period_sample<F, M>(model: &M, p0: F) -> Result<PeriodSample<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let q_max = turning_point(model, p0)?;
    let two = lit::<F>(2.0);
    let integrand = |theta: F| {
        let s = theta.sin();
        let slope = model.divided_difference(q_max, q_max * s);
        (q_max * (F::one() + s) / (two * slope)).sqrt()
    };
    let rel = lit::<F>(1e-11).max(lit::<F>(100.0) * F::epsilon());
    let quarter = integrate_adaptive(integrand, F::zero(), F::FRAC_PI_2(), F::zero(), rel, 20_000)?;
    Ok(PeriodSample { p0, period: lit::<F>(4.0) * quarter.value, q_max })
}

/// `lim_{p₀→0⁺} 𝒯(p₀) = 2π / √g''(0)`, the small-oscillation period.
pub fn small_oscillation_period<F, M>(model: &M) -> F
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    lit::<F>(2.0) * F::PI() / model.g_second(F::zero()).sqrt()
}

/// `𝒯(p₀)` measured on the integrated orbit: the first rising zero crossing after `t = 0`.
///
/// Restricted to `p₀ ∈ (0.05, p_sep - 0.01)`, away from both singular ends.
pub fn period_by_ode<F, M>(model: &M, p0: F, opts: &FlowOptions<F>) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let sep = model.separatrix_momentum();
    if !(p0 > lit(0.05) && p0 < sep - lit(0.01)) {
        return Err(Error::Domain(format!(
            "p0 = {p0} outside the ODE cross-check range (0.05, {sep} - 0.01)"
        )));
    }
    let mut horizon = lit::<F>(2.0) * small_oscillation_period(model);
    for _ in 0..12 {
        let traj = integrate(model, F::zero(), p0, horizon, opts)?;
        if let Some(c) = crossing_events(&traj, F::zero()).into_iter().find(|c| c.rising) {
            return Ok(c.time);
        }
        horizon = horizon * lit(2.0);
    }
    Err(Error::Domain(format!("no return to q = 0 for p0 = {p0} within t = {horizon}")))
}

/// Smallest `p₀` whose orbit from `(0, p₀)` does not come back to `q = 0` before `period / 2`,
/// i.e. the inverse of `𝒯` at `period`. Returns 0 when `period` does not exceed the
/// small-oscillation period (no orbit has returned yet) or when the model has no oscillating
/// orbits.
pub fn momentum_for_period<F, M>(model: &M, period: F) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let sep = model.separatrix_momentum();
    if sep <= F::zero() || model.g_second(F::zero()) <= F::zero() {
        return Ok(F::zero());
    }
    if period <= small_oscillation_period(model) {
        return Ok(F::zero());
    }
    let (mut lo, mut hi) = (F::zero(), sep);
    loop {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if period_quadrature(model, mid)? < period {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `inf_{p₀} 𝒯(p₀)/2`, extrapolated from `p₀ ∈ {0.04, 0.02, 0.01}` (scaled by `p_sep/√2`).
///
/// `𝒯` is analytic in the energy, hence in `p₀²`; two Richardson levels in `p₀²` remove the
/// `p₀²` and `p₀⁴` terms.
pub fn shock_time<F, M>(model: &M) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let scale = model.separatrix_momentum() / lit::<F>(2.0).sqrt();
    let half = |p: f64| -> Result<F> { Ok(period_quadrature(model, lit::<F>(p) * scale)? / lit(2.0)) };
    let (h4, h2, h1) = (half(0.04)?, half(0.02)?, half(0.01)?);
    let four = lit::<F>(4.0);
    let three = lit::<F>(3.0);
    let r1 = (four * h2 - h4) / three;
    let r2 = (four * h1 - h2) / three;
    Ok((lit::<F>(16.0) * r2 - r1) / lit(15.0))
}

/// Writes the `p0,period,q_max` table preceded by a `#` header line.
pub fn write_period_table<F: Scalar, W: Write>(
    rows: &[PeriodSample<F>],
    header: &str,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "# {header}")?;
    writeln!(out, "p0,period,q_max")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.p0, r.period, r.q_max)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BumpPotential, FlatPotential};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn standard() -> BumpPotential<f64> {
        BumpPotential::standard()
    }

    #[test]
    fn turning_points() {
        let m = standard();
        // (1 - q²)⁴ = 1/2
        let closed = (1.0 - 0.5_f64.powf(0.25)).sqrt();
        assert_abs_diff_eq!(turning_point(&m, 1.0).unwrap(), closed, epsilon = 1e-12);
        assert_abs_diff_eq!(turning_point(&m, 1.0).unwrap(), 0.398_877_907, epsilon = 1e-9);
        for &p0 in &[1e-4, 0.3, 1.2, 1.414] {
            let qp = turning_point(&m, p0).unwrap();
            let cf = (1.0 - (1.0 - p0 * p0 / 2.0).powf(0.25)).sqrt();
            assert_abs_diff_eq!(qp, cf, epsilon = 1e-12);
        }
        assert!(turning_point(&m, 1e-6).unwrap() < 1e-5);
        assert!(turning_point(&m, SQRT_2 - 6e-7).unwrap() > 0.95);
        assert!(turning_point(&m, 0.0).is_err());
        assert!(turning_point(&m, 1.5).is_err());
        assert!(turning_point(&FlatPotential, 0.5).is_err());
    }

    #[test]
    fn small_amplitude_limit() {
        let m = standard();
        assert_abs_diff_eq!(small_oscillation_period(&m), PI / 2.0_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(period_quadrature(&m, 0.01).unwrap(), PI / 2.0_f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn reference_periods() {
        // mpmath (30 digits) on the θ-substituted integral:
        // 𝒯(1.414) = 15.9741616738338585878, 𝒯(0.01)/2 = 1.11073635452788404179
        let m = standard();
        assert_abs_diff_eq!(period_quadrature(&m, 1.414).unwrap(), 15.974_161_673_833_86, epsilon = 1e-7);
        assert_abs_diff_eq!(period_quadrature(&m, 0.01).unwrap() / 2.0, 1.110_736_354_527_884, epsilon = 1e-10);
        // scipy solve_ivp event, rtol 1e-12: 𝒯(1) = 2.6893524507
        assert_abs_diff_eq!(period_quadrature(&m, 1.0).unwrap(), 2.689_352_450_7, epsilon = 1e-9);
    }

    #[test]
    fn ordering_and_blow_up() {
        let m = standard();
        let t = |p| period_quadrature(&m, p).unwrap();
        assert!(t(1.41) > t(1.0) && t(1.0) > t(0.5));
        assert!(t(1.414) > 15.0);
        assert!(t(SQRT_2 - 1.4e-5) > t(1.414));
        assert!(t(SQRT_2 - 6e-8) > 60.0);
    }

    #[test]
    fn ode_agrees_with_quadrature() {
        let m = standard();
        for &p0 in &[0.5, 1.0, 1.3] {
            let q = period_quadrature(&m, p0).unwrap();
            let o = period_by_ode(&m, p0, &FlowOptions::default()).unwrap();
            assert_abs_diff_eq!(q, o, epsilon = 1e-5);
        }
        assert!(period_by_ode(&m, 0.01, &FlowOptions::default()).is_err());
        assert!(period_by_ode(&m, 1.41, &FlowOptions::default()).is_err());
    }

    #[test]
    fn sign_pattern_over_one_period() {
        let m = standard();
        for &p0 in &[0.2, 1.0, 1.35] {
            let period = period_quadrature(&m, p0).unwrap();
            let traj = integrate(&m, 0.0, p0, period * 0.999_999, &FlowOptions::default()).unwrap();
            let events = crossing_events(&traj, 0.0);
            assert_eq!(events.len(), 1, "p0 = {p0}");
            assert!(!events[0].rising);
            assert_abs_diff_eq!(events[0].time, period / 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn shock_time_extrapolation() {
        let m = standard();
        let target = PI / (2.0 * 2.0_f64.sqrt());
        let ts = shock_time(&m).unwrap();
        assert_abs_diff_eq!(ts, target, epsilon = 1e-9);
        let h = |p| period_quadrature(&m, p).unwrap() / 2.0;
        assert!(h(0.04) > h(0.02) && h(0.02) > h(0.01) && h(0.01) > target);
    }

    #[test]
    fn period_inverse() {
        let m = standard();
        assert_eq!(momentum_for_period(&m, 2.0).unwrap(), 0.0);
        assert_eq!(momentum_for_period(&FlatPotential, 5.0).unwrap(), 0.0);
        for &p0 in &[0.3, 1.0, 1.41] {
            let period = period_quadrature(&m, p0).unwrap();
            assert_abs_diff_eq!(momentum_for_period(&m, period).unwrap(), p0, epsilon = 1e-9);
        }
        let far = momentum_for_period(&m, 60.0).unwrap();
        assert!(far < 2.0_f64.sqrt() && 2.0_f64.sqrt() - far < 1e-6);
    }

    #[test]
    fn other_wells() {
        // A = 2, X = 1.5, m = 6: g''(0) = 2·6·2/2.25
        let m = BumpPotential::new(2.0, 1.5, 6).unwrap();
        let inf = small_oscillation_period(&m);
        assert_abs_diff_eq!(inf, 2.0 * PI / (24.0_f64 / 2.25).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(shock_time(&m).unwrap(), inf / 2.0, epsilon = 1e-8);
        let q = period_quadrature(&m, 1.2).unwrap();
        let o = period_by_ode(&m, 1.2, &FlowOptions::default()).unwrap();
        assert_abs_diff_eq!(q, o, epsilon = 1e-5);
    }

    #[test]
    fn table_csv() {
        let m = standard();
        let rows: Vec<_> = [0.5, 1.0].iter().map(|&p| period_sample(&m, p).unwrap()).collect();
        let mut buf = Vec::new();
        write_period_table(&rows, "experiment=period", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap() == "p0,period,q_max");
    }
}
