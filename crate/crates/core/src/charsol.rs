//! Semi-analytic entropy solution for the Riemann datum `±2`: `u(t, x) = 𝓕_p(t, Δ(t, x))` for
//! `x > 0`, extended oddly to `x < 0`, together with its long-time profile.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{crossing_events, integrate, separatrix_orbits};
use crate::model::HamiltonianModel;
use crate::period::momentum_for_period;
use crate::scalar::{lit, sgn, Scalar};
use crate::shooting::{arc_upper_bound, delta_bounded, ArcParam, ShootOptions};

/// Offset used for one-sided traces at `x = 0`.
pub const TRACE_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionSample<F> {
    pub t: F,
    pub x: F,
    pub u: F,
    /// Launch point of the characteristic through `(t, x)` (mirrored for `x < 0`).
    pub q0: F,
    pub p0: F,
    /// Shooting residual in `x`.
    pub residual: F,
}

impl<F: Scalar> SolutionSample<F> {
    /// `u²/2 + g(x) - (p0²/2 + g(q0))`; zero up to the integrator's conservation error.
    pub fn energy_defect<M: HamiltonianModel<F> + ?Sized>(&self, model: &M) -> F {
        model.hamiltonian(self.x, self.u) - model.hamiltonian(self.q0, self.p0)
    }
}

/// `u(t, x)` for `t > 0`, `x ≠ 0`.
pub fn eval_solution<F, M>(model: &M, t: F, x: F, opts: &ShootOptions<F>) -> Result<SolutionSample<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let upper = arc_upper_bound(model, t)?;
    eval_with_bound(model, t, x, upper, opts)
}

fn eval_with_bound<F, M>(model: &M, t: F, x: F, upper: F, opts: &ShootOptions<F>) -> Result<SolutionSample<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if x == F::zero() || !x.is_finite() {
        return Err(Error::Domain(format!("u(t, x) is defined for finite x ≠ 0, got {x}")));
    }
    let d = delta_bounded(model, t, x.abs(), upper, opts)?;
    let sample = SolutionSample { t, x: x.abs(), u: d.terminal.p, q0: d.q0, p0: d.p0, residual: d.residual };
    Ok(if x > F::zero() {
        sample
    } else {
        SolutionSample { x, u: -sample.u, q0: -sample.q0, p0: -sample.p0, residual: -sample.residual, ..sample }
    })
}

/// `u(t, ·)` at every point of `xs` (none of them 0).
pub fn sample_profile<F, M>(model: &M, t: F, xs: &[F], opts: &ShootOptions<F>) -> Result<Vec<SolutionSample<F>>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let upper = arc_upper_bound(model, t)?;
    xs.par_iter().map(|&x| eval_with_bound(model, t, x, upper, opts)).collect()
}

/// Long-time limit `-sgn(x) √(2 (g(X) - g(x)))`.
pub fn asymptotic_profile<F, M>(model: &M, x: F) -> F
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let depth = (model.plateau() - model.g(x)).max(F::zero());
    -sgn(x) * (lit::<F>(2.0) * depth).sqrt()
}

/// Exact traces `(u(t, 0-), u(t, 0+))`: the orbit reaching `0⁺` at time `t` is the one whose
/// half period is `t`, so `u(t, 0+) = -𝒯⁻¹(2t)` (zero before the shock forms).
pub fn origin_traces<F, M>(model: &M, t: F) -> Result<(F, F)>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let p = momentum_for_period(model, lit::<F>(2.0) * t)?;
    Ok((p, -p))
}

/// Jump `u(t, 0-) - u(t, 0+)` from one-sided evaluations at `±ε` and `±2ε`, extrapolated
/// linearly in `ε` (`ε = 1e-4`).
pub fn shock_size<F, M>(model: &M, t: F, opts: &ShootOptions<F>) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let eps = lit::<F>(TRACE_OFFSET);
    let upper = arc_upper_bound(model, t)?;
    let jump = |e: F| -> Result<F> {
        let right = eval_with_bound(model, t, e, upper, opts)?.u;
        // oddness: u(t, -e) = -u(t, e)
        Ok(-right - right)
    };
    let (j1, j2) = (jump(eps)?, jump(eps + eps)?);
    Ok(lit::<F>(2.0) * j1 - j2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport<F> {
    pub x: F,
    pub times: Vec<F>,
    pub values: Vec<F>,
    /// `√(2 (g(X) - g(x)))`.
    pub bound: F,
    /// Indices `k` with `u(t_{k+1}) > u(t_k) + tol`.
    pub increases: Vec<usize>,
    /// Indices with `u(t_k) ≥ bound`.
    pub bound_violations: Vec<usize>,
}

impl<F> MonotonicityReport<F> {
    pub fn passed(&self) -> bool {
        self.increases.is_empty() && self.bound_violations.is_empty()
    }
}

/// Time at which the separatrix orbit from `(0, p_sep)` reaches `x ∈ (0, X)`.
pub fn separatrix_arrival<F, M>(model: &M, x: F, opts: &ShootOptions<F>) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !(x > F::zero() && x < model.cutoff()) {
        return Err(Error::Domain(format!("x = {x} outside (0, X)")));
    }
    let mut horizon = lit::<F>(4.0);
    for _ in 0..10 {
        let (flat, _) = separatrix_orbits(model, horizon, &opts.flow)?;
        if let Some(c) = crossing_events(&flat, x).first() {
            return Ok(c.time);
        }
        horizon = horizon * lit(4.0);
    }
    Err(Error::Domain(format!("separatrix orbit does not reach x = {x}")))
}

/// Checks `u(t₂, x) ≤ u(t₁, x) + tol` for consecutive times and `u < √(2 (g(X) - g(x)))`, for
/// `x ∈ (0, X)` and times after the separatrix orbit has passed `x`.
pub fn time_monotonicity_scan<F, M>(
    model: &M,
    x: F,
    times: &[F],
    tol: F,
    opts: &ShootOptions<F>,
) -> Result<MonotonicityReport<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let arrival = separatrix_arrival(model, x, opts)?;
    if times.iter().any(|&t| t <= arrival) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(format!(
            "times must increase and exceed the separatrix arrival {arrival} at x = {x}"
        )));
    }
    let values: Vec<F> = times
        .par_iter()
        .map(|&t| eval_solution(model, t, x, opts).map(|s| s.u))
        .collect::<Result<_>>()?;
    let bound = -asymptotic_profile(model, x);
    let increases = (0..values.len().saturating_sub(1)).filter(|&k| values[k + 1] > values[k] + tol).collect();
    let bound_violations = (0..values.len()).filter(|&k| values[k] >= bound).collect();
    Ok(MonotonicityReport { x, times: times.to_vec(), values, bound, increases, bound_violations })
}

/// Resolution of the characteristic fan used by [`fan_field`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FanOptions<F> {
    /// Launches on `{0} × (0, 2)`.
    pub fan_rays: usize,
    /// Launches per unit length on `[0, x_max] × {2}`.
    pub line_density: usize,
    pub flow: crate::flow::FlowOptions<F>,
}

impl<F: Scalar> Default for FanOptions<F> {
    fn default() -> Self {
        Self { fan_rays: 4000, line_density: 1000, flow: Default::default() }
    }
}

/// `u` on the tensor grid `times × xs` (row-major in time) by forward integration of a dense
/// set of launches from the arc and piecewise-quadratic interpolation of the resulting graph
/// `{(q(t), p(t))}`. Launches that have come back to `q = 0` are dropped from that time on.
/// Much cheaper than per-point shooting for space-time grids; accuracy is set by the ray density.
pub fn fan_field<F, M>(model: &M, times: &[F], xs: &[F], opts: &FanOptions<F>) -> Result<Vec<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if times.is_empty() || times.iter().any(|&t| !(t > F::zero())) {
        return Err(Error::Domain("fan sampling needs positive times".into()));
    }
    let t_max = times.iter().copied().fold(F::zero(), F::max);
    let x_max = xs.iter().map(|x| x.abs()).fold(F::zero(), F::max);
    let two = lit::<F>(crate::RIEMANN_STATE);
    let n_line = ((x_max.to_f64().unwrap_or(0.0)) * opts.line_density as f64).ceil() as usize + 2;
    let mut arcs: Vec<F> = (0..=n_line)
        .map(|k| -x_max * lit::<F>(1.02) * lit::<F>(k as f64) / lit::<F>(n_line as f64))
        .collect();
    arcs.reverse();
    arcs.extend((1..opts.fan_rays).map(|k| two * lit::<F>(k as f64) / lit::<F>(opts.fan_rays as f64)));

    // per launch: state at each requested time, or None once it has returned to q = 0
    let rays: Vec<Vec<Option<(F, F)>>> = arcs
        .par_iter()
        .map(|&s| {
            let start = ArcParam(s).decode();
            let traj = integrate(model, start.q, start.p, t_max, &opts.flow)?;
            let death = if start.q == F::zero() && s > F::zero() {
                crossing_events(&traj, F::zero()).first().map(|c| c.time)
            } else {
                None
            };
            Ok(times
                .iter()
                .map(|&t| match death {
                    Some(d) if t >= d => None,
                    _ => {
                        let st = traj.state_at(t);
                        Some((st.q, st.p))
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(times.len() * xs.len());
    for (k, _) in times.iter().enumerate() {
        let mut graph: Vec<(F, F)> = rays.iter().filter_map(|r| r[k]).filter(|(q, _)| *q > F::zero()).collect();
        graph.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite positions"));
        for &x in xs {
            let v = interpolate(&graph, x.abs());
            out.push(if x < F::zero() { -v } else { v });
        }
    }
    Ok(out)
}

fn interpolate<F: Scalar>(graph: &[(F, F)], x: F) -> F {
    if graph.is_empty() {
        return F::zero();
    }
    let i = graph.partition_point(|&(q, _)| q < x);
    if i == 0 {
        return graph[0].1;
    }
    if i == graph.len() {
        return graph[i - 1].1;
    }
    let (a, b) = (graph[i - 1], graph[i]);
    if b.0 == a.0 {
        return b.1;
    }
    // quadratic through the nearest third node when one exists
    let c = if i + 1 < graph.len() && (i < 2 || x - a.0 > b.0 - x) {
        graph[i + 1]
    } else if i >= 2 {
        graph[i - 2]
    } else {
        return a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0);
    };
    if c.0 == a.0 || c.0 == b.0 {
        return a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0);
    }
    a.1 * (x - b.0) * (x - c.0) / ((a.0 - b.0) * (a.0 - c.0))
        + b.1 * (x - a.0) * (x - c.0) / ((b.0 - a.0) * (b.0 - c.0))
        + c.1 * (x - a.0) * (x - b.0) / ((c.0 - a.0) * (c.0 - b.0))
}

/// Writes `x,u,u_asymptotic` for one time.
pub fn write_profile_csv<F, M, W>(
    model: &M,
    samples: &[SolutionSample<F>],
    header: &str,
    mut out: W,
) -> io::Result<()>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
    W: Write,
{
    writeln!(out, "# {header}")?;
    writeln!(out, "x,u,u_asymptotic")?;
    for s in samples {
        writeln!(out, "{},{},{}", s.x, s.u, asymptotic_profile(model, s.x))?;
    }
    Ok(())
}
