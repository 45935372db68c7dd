//! The shooting map `Δ(t, x)`: the unique launch point on the arc
//! `([0, ∞) × {2}) ∪ ({0} × (0, 2])` whose orbit sits at `x` at time `t` while staying in `q > 0`
//! on `(0, t)`.
//!
//! The arc is glued at the corner `(0, 2)` into one scalar parameter `s` so that `q(t)` is
//! nonincreasing in `s`; a single bisection then covers both branches. The part of the arc whose
//! orbits have already come back to `q = 0` is cut off through the period map before bisecting.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{propagate, FlowOptions, PhaseState};
use crate::model::HamiltonianModel;
use crate::period::momentum_for_period;
use crate::scalar::{lit, Scalar};

/// Scalar coordinate on the launch arc.
///
/// `s ≤ 0` encodes `(q₀, p₀) = (-s, 2)`; `0 < s < 2` encodes `(0, 2 - s)`. Larger `s` means a
/// smaller datum in the comparison order of the characteristic flow.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ArcParam<F>(pub F);

impl<F: Scalar> ArcParam<F> {
    pub fn decode(self) -> PhaseState<F> {
        let two = lit::<F>(crate::RIEMANN_STATE);
        if self.0 <= F::zero() {
            PhaseState::new(-self.0, two)
        } else {
            PhaseState::new(F::zero(), two - self.0)
        }
    }

    /// Inverse of [`decode`](Self::decode) for points on the arc.
    pub fn encode(state: PhaseState<F>) -> Option<Self> {
        let two = lit::<F>(crate::RIEMANN_STATE);
        if state.p == two && state.q >= F::zero() {
            Some(Self(-state.q))
        } else if state.q == F::zero() && state.p > F::zero() && state.p <= two {
            Some(Self(two - state.p))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions<F> {
    pub flow: FlowOptions<F>,
    /// Target `|𝓕_q(t, Δ(t, x)) - x|`.
    pub tol: F,
    pub max_iterations: usize,
}

impl<F: Scalar> Default for ShootOptions<F> {
    fn default() -> Self {
        Self { flow: FlowOptions::default(), tol: lit(1e-9), max_iterations: 200 }
    }
}

/// Output of [`delta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaResult<F> {
    pub q0: F,
    pub p0: F,
    /// `𝓕_q(t, q0, p0) - x`.
    pub residual: F,
    pub arc: F,
    /// `𝓕(t, q0, p0)`; its momentum is the solution value at `(t, x)`.
    pub terminal: PhaseState<F>,
    /// Smallest interior sample of `q` along the orbit.
    pub min_q: F,
    pub iterations: usize,
    /// `false` when the bracket collapsed to the scalar resolution before `|residual| ≤ tol`,
    /// which happens in a thin band around the separatrix image at large `t`.
    pub converged: bool,
}

enum Probe<F> {
    Reached { end: PhaseState<F>, min_q: F },
    Returned,
}

fn probe<F, M>(model: &M, s: F, t: F, opts: &FlowOptions<F>) -> Result<Probe<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let start = ArcParam(s).decode();
    let mut returned = false;
    let mut min_q = F::infinity();
    let (_, end) = propagate(model, start, t, opts, |time, st| {
        if time > F::zero() && time < t {
            min_q = min_q.min(st.q);
            if st.q <= F::zero() {
                returned = true;
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    Ok(if returned { Probe::Returned } else { Probe::Reached { end, min_q } })
}

/// Upper end of the admissible arc at time `t`: launches beyond it have returned to `q = 0`.
pub fn arc_upper_bound<F, M>(model: &M, t: F) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let floor = momentum_for_period(model, lit::<F>(2.0) * t)?;
    Ok(lit::<F>(crate::RIEMANN_STATE) - floor)
}

/// Solves `𝓕_q(t, q₀, p₀) = x` on the launch arc by bisection in [`ArcParam`].
pub fn delta<F, M>(model: &M, t: F, x: F, opts: &ShootOptions<F>) -> Result<DeltaResult<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !(t > F::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("Δ needs t > 0, got {t}")));
    }
    if !(x > F::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("Δ needs x > 0, got {x}")));
    }
    let hi = arc_upper_bound(model, t)?;
    delta_bounded(model, t, x, hi, opts)
}

/// [`delta`] with a precomputed [`arc_upper_bound`] for `t`, for sweeps at a fixed time.
pub fn delta_bounded<F, M>(
    model: &M,
    t: F,
    x: F,
    upper: F,
    opts: &ShootOptions<F>,
) -> Result<DeltaResult<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !(t > F::zero()) || !t.is_finite() || !(x > F::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("Δ needs t > 0 and x > 0, got ({t}, {x})")));
    }
    let mut lo = -x;
    let mut hi = upper;
    let bracket_failure = |lo: F, hi: F| Error::BracketFailure {
        t: t.to_f64().unwrap_or(f64::NAN),
        x: x.to_f64().unwrap_or(f64::NAN),
        lo: lo.to_f64().unwrap_or(f64::NAN),
        hi: hi.to_f64().unwrap_or(f64::NAN),
    };

    // (s, terminal, min_q) of the admissible probe closest to x
    let mut best: Option<(F, PhaseState<F>, F)> = None;
    let mut consider = |s: F, end: PhaseState<F>, min_q: F| {
        let better = match &best {
            Some((_, b, _)) => (end.q - x).abs() < (b.q - x).abs(),
            None => true,
        };
        if better {
            best = Some((s, end, min_q));
        }
    };

    match probe(model, lo, t, &opts.flow)? {
        Probe::Reached { end, min_q } if end.q >= x => consider(lo, end, min_q),
        _ => return Err(bracket_failure(lo, hi)),
    }
    match probe(model, hi, t, &opts.flow)? {
        Probe::Reached { end, .. } if end.q >= x => return Err(bracket_failure(lo, hi)),
        Probe::Reached { end, min_q } => consider(hi, end, min_q),
        Probe::Returned => {}
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        match probe(model, mid, t, &opts.flow)? {
            Probe::Reached { end, min_q } => {
                consider(mid, end, min_q);
                if (end.q - x).abs() <= opts.tol {
                    converged = true;
                    break;
                }
                if end.q > x {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Probe::Returned => hi = mid,
        }
    }

    let (s, end, min_q) = best.expect("lower bracket end is always admissible");
    if min_q <= F::zero() {
        return Err(Error::PositivityViolation {
            t: t.to_f64().unwrap_or(f64::NAN),
            min_q: min_q.to_f64().unwrap_or(f64::NAN),
        });
    }
    let start = ArcParam(s).decode();
    let residual = end.q - x;
    Ok(DeltaResult {
        q0: start.q,
        p0: start.p,
        residual,
        arc: s,
        terminal: end,
        min_q,
        iterations,
        converged: converged || residual.abs() <= opts.tol,
    })
}

/// Axis-aligned rectangle `[t_min, t_max] × [x_min, x_max]` in `(0, ∞)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect<F> {
    pub t_min: F,
    pub t_max: F,
    pub x_min: F,
    pub x_max: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpFlag<F> {
    /// Grid indices (time, space) of the first node of the pair.
    pub node: (usize, usize),
    /// `true` for a pair along `x`, `false` along `t`.
    pub along_x: bool,
    pub jump: F,
}

/// Discrete continuity report of `Δ` over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport<F> {
    pub times: Vec<F>,
    pub xs: Vec<F>,
    /// `Δ` row-major in (time, space).
    pub launches: Vec<(F, F)>,
    /// Largest `|Δ(a) - Δ(b)|` over neighbouring nodes.
    pub max_modulus: F,
    pub flags: Vec<JumpFlag<F>>,
}

/// Evaluates `Δ` on an `n × n` grid over `rect` and flags neighbour differences exceeding ten
/// times the local scale (the larger of the adjacent differences on the same line and the grid
/// spacing). A degenerate rectangle or `n < 2` yields an empty report.
pub fn delta_continuity_scan<F, M>(
    model: &M,
    rect: Rect<F>,
    n: usize,
    opts: &ShootOptions<F>,
) -> Result<ContinuityReport<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let empty = ContinuityReport {
        times: Vec::new(),
        xs: Vec::new(),
        launches: Vec::new(),
        max_modulus: F::zero(),
        flags: Vec::new(),
    };
    if n < 2 || (rect.t_min == rect.t_max && rect.x_min == rect.x_max) {
        return Ok(empty);
    }
    if !(rect.t_min > F::zero() && rect.x_min > F::zero())
        || rect.t_max < rect.t_min
        || rect.x_max < rect.x_min
    {
        return Err(Error::Domain("continuity scan needs a rectangle in (0, ∞)²".into()));
    }
    let axis = |a: F, b: F| -> Vec<F> {
        (0..n).map(|i| a + (b - a) * lit::<F>(i as f64) / lit::<F>((n - 1) as f64)).collect()
    };
    let times = axis(rect.t_min, rect.t_max);
    let xs = axis(rect.x_min, rect.x_max);
    let launches: Vec<(F, F)> = (0..n * n)
        .into_par_iter()
        .map(|k| delta(model, times[k / n], xs[k % n], opts).map(|d| (d.q0, d.p0)))
        .collect::<Result<_>>()?;

    let dist = |a: (F, F), b: (F, F)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    let mut max_modulus = F::zero();
    let mut flags = Vec::new();
    let ten = lit::<F>(10.0);
    let hx = xs[1] - xs[0];
    let ht = times[1] - times[0];
    for along_x in [true, false] {
        let h = if along_x { hx } else { ht };
        for line in 0..n {
            let at = |j: usize| {
                if along_x {
                    launches[line * n + j]
                } else {
                    launches[j * n + line]
                }
            };
            let diffs: Vec<F> = (0..n - 1).map(|j| dist(at(j), at(j + 1))).collect();
            for (j, &d) in diffs.iter().enumerate() {
                max_modulus = max_modulus.max(d);
                let left = if j > 0 { diffs[j - 1] } else { F::zero() };
                let right = diffs.get(j + 1).copied().unwrap_or(F::zero());
                let scale = left.max(right).max(h);
                if d > ten * scale {
                    let node = if along_x { (line, j) } else { (j, line) };
                    flags.push(JumpFlag { node, along_x, jump: d });
                }
            }
        }
    }
    Ok(ContinuityReport { times, xs, launches, max_modulus, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{flow, flow_q, integrate};
    use crate::model::{BumpPotential, FlatPotential};
    use approx::assert_abs_diff_eq;

    fn standard() -> BumpPotential<f64> {
        BumpPotential::standard()
    }

    #[test]
    fn arc_round_trip() {
        for &s in &[-3.0, -0.5, 0.0, 0.3, 1.9] {
            let back = ArcParam::encode(ArcParam(s).decode()).unwrap();
            assert_abs_diff_eq!(back.0, s, epsilon = 1e-15);
        }
        assert_eq!(ArcParam(0.0_f64).decode(), PhaseState::new(0.0, 2.0));
        assert_eq!(ArcParam(-1.5_f64).decode(), PhaseState::new(1.5, 2.0));
        assert_eq!(ArcParam(0.5_f64).decode(), PhaseState::new(0.0, 1.5));
        assert_eq!(ArcParam::encode(PhaseState::new(0.5, 1.0)), None);
    }

    #[test]
    fn round_trip_and_positivity() {
        let m = standard();
        let opts = ShootOptions::default();
        let d = delta(&m, 2.0, 0.5, &opts).unwrap();
        assert!(d.converged);
        assert!(d.residual.abs() < 1e-9);
        assert_eq!(d.q0, 0.0);
        let q = flow_q(&m, 2.0, d.q0, d.p0, &opts.flow).unwrap();
        assert!((q - 0.5).abs() < 1e-8);
        let traj = integrate(&m, d.q0, d.p0, 2.0, &FlowOptions::with_dt(2.5e-4)).unwrap();
        let min_interior = traj.states()[1..traj.len() - 1].iter().map(|s| s.q).fold(f64::INFINITY, f64::min);
        assert!(min_interior > 0.0);
    }

    #[test]
    fn brute_force_scan_agrees() {
        let m = standard();
        let opts = ShootOptions::default();
        let (t, x) = (2.0, 0.5);
        let d = delta(&m, t, x, &opts).unwrap();
        // 10⁴ arc points, keep the admissible ones and locate the sign change of q(t) - x
        let hi = arc_upper_bound(&m, t).unwrap();
        let lo = -x;
        let n = 10_000;
        let mut prev: Option<(f64, f64)> = None;
        let mut found = None;
        for k in 0..=n {
            let s = lo + (hi - lo) * k as f64 / n as f64;
            let traj = integrate(&m, ArcParam(s).decode().q, ArcParam(s).decode().p, t,
                &FlowOptions { dt_max: 1e-2, energy_tol: 1e-5 }).unwrap();
            let ok = traj.states()[1..traj.len() - 1].iter().all(|st| st.q > 0.0);
            let r = if ok { traj.last().q - x } else { -1.0 };
            if let Some((ps, pr)) = prev {
                if pr >= 0.0 && r < 0.0 {
                    found = Some((ps, s));
                    break;
                }
            }
            prev = Some((s, r));
        }
        let (a, b) = found.expect("sign change");
        assert!(a - 1e-3 <= d.arc && d.arc <= b + 1e-3, "Δ arc {} not in [{a}, {b}]", d.arc);
    }

    #[test]
    fn short_times_recover_the_datum() {
        let m = standard();
        let d = delta(&m, 1e-3, 0.7, &ShootOptions::default()).unwrap();
        assert_abs_diff_eq!(d.q0, 0.7, epsilon = 3e-3);
        assert_abs_diff_eq!(d.p0, 2.0, epsilon = 1e-12);
        let d = delta(&m, 1e-2, 0.7, &ShootOptions::default()).unwrap();
        assert!((d.q0 - 0.7).abs() < 0.03 && d.p0 == 2.0);
    }

    #[test]
    fn monotone_in_x() {
        let m = standard();
        let opts = ShootOptions::default();
        let a = delta(&m, 2.0, 0.3, &opts).unwrap();
        let b = delta(&m, 2.0, 0.6, &opts).unwrap();
        assert_eq!((a.q0, b.q0), (0.0, 0.0));
        assert!(a.p0 < b.p0);
    }

    #[test]
    fn iteration_budget() {
        let m = standard();
        let opts = ShootOptions { tol: 0.0, ..ShootOptions::default() };
        // with tol = 0 bisection runs to the bracket resolution; it halves every step
        let d = delta(&m, 1.0, 0.4, &opts).unwrap();
        let width0 = arc_upper_bound(&m, 1.0).unwrap() + 0.4;
        let steps_to_1e12 = (width0 / 1e-12).log2().ceil() as usize;
        assert!(steps_to_1e12 <= 60);
        assert!(d.iterations >= steps_to_1e12);
        let d = delta(&m, 1.0, 0.4, &ShootOptions::default()).unwrap();
        assert!(d.iterations <= 60);
    }

    #[test]
    fn escaping_and_shifted_branches() {
        let m = standard();
        let opts = ShootOptions::default();
        // far right: launched from (x - 2t, 2) in free flight
        let d = delta(&m, 1.0, 5.0, &opts).unwrap();
        assert_abs_diff_eq!(d.q0, 3.0, epsilon = 1e-9);
        assert_eq!(d.p0, 2.0);
        // homogeneous case: the rarefaction fan u = x / t
        let d = delta(&FlatPotential, 2.0, 1.0, &opts).unwrap();
        assert_eq!(d.q0, 0.0);
        assert_abs_diff_eq!(d.p0, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn long_times_near_the_separatrix() {
        let m = standard();
        let d = delta(&m, 30.0, 0.5, &ShootOptions::default()).unwrap();
        assert_eq!(d.q0, 0.0);
        assert!(d.p0 < 2.0_f64.sqrt() && d.p0 > 1.414);
        assert!(d.residual.abs() < 1e-6);
        let end = flow(&m, 30.0, d.q0, d.p0, &FlowOptions::default()).unwrap();
        assert_eq!(end, d.terminal);
        assert!(d.terminal.p < 0.0);
    }

    #[test]
    fn invalid_arguments() {
        let m = standard();
        let o = ShootOptions::default();
        assert!(delta(&m, 0.0, 0.5, &o).is_err());
        assert!(delta(&m, 1.0, -0.5, &o).is_err());
        assert!(delta(&m, 1.0, f64::NAN, &o).is_err());
    }

    #[test]
    fn continuity_scans() {
        let m = standard();
        let opts = ShootOptions::default();
        let empty = delta_continuity_scan(&m, Rect { t_min: 1.0, t_max: 1.0, x_min: 0.5, x_max: 0.5 }, 10, &opts)
            .unwrap();
        assert!(empty.launches.is_empty() && empty.flags.is_empty());

        let r = delta_continuity_scan(&m, Rect { t_min: 0.5, t_max: 3.0, x_min: 0.1, x_max: 2.0 }, 12, &opts)
            .unwrap();
        assert!(r.flags.is_empty(), "{:?}", r.flags);

        // a line at t = 2 through the separatrix image q♭(2): p0 goes through √2
        let r = delta_continuity_scan(&m, Rect { t_min: 2.0, t_max: 2.2, x_min: 0.6, x_max: 1.0 }, 15, &opts)
            .unwrap();
        assert!(r.flags.is_empty());
        let sep = 2.0_f64.sqrt();
        assert!(r.launches.iter().any(|l| l.1 < sep) && r.launches.iter().any(|l| l.1 > sep));
        assert!(delta_continuity_scan(&m, Rect { t_min: -1.0, t_max: 1.0, x_min: 0.5, x_max: 1.0 }, 4, &opts).is_err());
    }
}
