//! First-order Godunov finite-volume solver for `u_t + (u²/2 + g(x))_x = 0`, written as the
//! Burgers flux plus the pointwise source `-g'(x)`, with forward Euler in time.

use std::io::{self, Write};

use serde::Serialize;

use crate::charsol::asymptotic_profile;
use crate::error::{Error, Result};
use crate::model::HamiltonianModel;
use crate::scalar::{lit, Scalar};

pub const DEFAULT_CFL: f64 = 0.45;

/// Uniform grid of `n` cells on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D<F> {
    pub x_min: F,
    pub x_max: F,
    pub n: usize,
}

impl<F: Scalar> Grid1D<F> {
    pub fn new(x_min: F, x_max: F, n: usize) -> Result<Self> {
        if n < 4 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Domain(format!("grid needs n ≥ 4 and x_min < x_max, got [{x_min}, {x_max}], n = {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn dx(&self) -> F {
        (self.x_max - self.x_min) / lit(self.n as f64)
    }

    /// Centre of cell `i`, computed from the midpoint so that symmetric grids give exactly
    /// mirrored centres.
    pub fn center(&self, i: usize) -> F {
        let two = lit::<F>(2.0);
        let offset = lit::<F>((2 * i + 1) as f64) - lit::<F>(self.n as f64);
        offset * (self.x_max - self.x_min) / (two * lit(self.n as f64)) + (self.x_min + self.x_max) / two
    }

    pub fn centers(&self) -> Vec<F> {
        (0..self.n).map(|i| self.center(i)).collect()
    }
}

/// Cell averages on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellField<F> {
    pub grid: Grid1D<F>,
    pub values: Vec<F>,
}

impl<F: Scalar> CellField<F> {
    pub fn from_fn(grid: Grid1D<F>, f: impl Fn(F) -> F) -> Self {
        let values = (0..grid.n).map(|i| f(grid.center(i))).collect();
        Self { grid, values }
    }

    /// `left` on `x < 0`, `right` on `x > 0`, the mean at a centre lying on 0.
    pub fn riemann(grid: Grid1D<F>, left: F, right: F) -> Self {
        Self::from_fn(grid, |x| {
            if x < F::zero() {
                left
            } else if x > F::zero() {
                right
            } else {
                (left + right) / lit(2.0)
            }
        })
    }

    /// The datum `-2` / `2`.
    pub fn standard_datum(grid: Grid1D<F>) -> Self {
        let r = lit::<F>(crate::RIEMANN_STATE);
        Self::riemann(grid, -r, r)
    }

    pub fn max_abs(&self) -> F {
        self.values.iter().fold(F::zero(), |m, v| m.max(v.abs()))
    }

    /// `Σ dx |u_i - f(x_i)|` over cells whose centre lies in `[a, b]`.
    pub fn l1_distance(&self, f: impl Fn(F) -> F, a: F, b: F) -> F {
        let dx = self.grid.dx();
        (0..self.grid.n)
            .map(|i| (self.grid.center(i), self.values[i]))
            .filter(|(x, _)| *x >= a && *x <= b)
            .map(|(x, u)| (u - f(x)).abs() * dx)
            .sum()
    }

    /// `max_i |u_i + u_{n-1-i}|`; zero for an exactly odd field.
    pub fn odd_symmetry_defect(&self) -> F {
        let n = self.values.len();
        (0..n).map(|i| (self.values[i] + self.values[n - 1 - i]).abs()).fold(F::zero(), F::max)
    }

    /// `u_{n/2-1} - u_{n/2}`, the jump across the middle interface (`n` even).
    pub fn central_jump(&self) -> F {
        let h = self.values.len() / 2;
        self.values[h - 1] - self.values[h]
    }

    pub fn write_csv<M: HamiltonianModel<F> + ?Sized, W: Write>(
        &self,
        model: &M,
        header: &str,
        mut out: W,
    ) -> io::Result<()> {
        writeln!(out, "# {header}")?;
        writeln!(out, "x,u,u_asymptotic")?;
        for (i, u) in self.values.iter().enumerate() {
            let x = self.grid.center(i);
            writeln!(out, "{x},{u},{}", asymptotic_profile(model, x))?;
        }
        Ok(())
    }
}

/// Exact Riemann flux for `u²/2`.
pub fn godunov_flux<F: Scalar>(ul: F, ur: F) -> F {
    let half = lit::<F>(0.5);
    if ul <= ur {
        if ul > F::zero() {
            half * ul * ul
        } else if ur < F::zero() {
            half * ur * ur
        } else {
            F::zero()
        }
    } else {
        half * (ul * ul).max(ur * ur)
    }
}

/// Largest stable step for `cfl`; speeds are floored at 1 so the source stays resolved.
pub fn stable_dt<F: Scalar>(field: &CellField<F>, cfl: F) -> F {
    cfl * field.grid.dx() / field.max_abs().max(F::one())
}

/// One forward-Euler step with zero-gradient boundaries.
pub fn step<F, M>(model: &M, field: &CellField<F>, dt: F, cfl: F) -> Result<CellField<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let dx = field.grid.dx();
    let speed = field.max_abs();
    let bound = if speed > F::zero() { cfl * dx / speed } else { F::infinity() };
    if !(dt > F::zero()) || dt > bound * (F::one() + lit(1e-12)) {
        return Err(Error::CflViolation { dt: dt.to_f64().unwrap_or(f64::NAN), bound: bound.to_f64().unwrap_or(f64::NAN) });
    }
    let u = &field.values;
    let n = u.len();
    let r = dt / dx;
    let fluxes: Vec<F> = (0..=n)
        .map(|k| {
            let l = u[k.saturating_sub(1)];
            let rr = u[k.min(n - 1)];
            godunov_flux(l, rr)
        })
        .collect();
    let values = (0..n)
        .map(|i| u[i] - r * (fluxes[i + 1] - fluxes[i]) - dt * model.g_prime(field.grid.center(i)))
        .collect::<Vec<_>>();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { time: field.grid.center(i).to_f64().unwrap_or(f64::NAN) });
    }
    Ok(CellField { grid: field.grid, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution<F> {
    pub final_field: CellField<F>,
    pub final_time: F,
    /// `(t, field)` for each requested snapshot time in `[0, T]`, in increasing time.
    pub snapshots: Vec<(F, CellField<F>)>,
    pub steps: usize,
}

/// Advances `u0` to time `t_end`, landing exactly on every snapshot time.
pub fn evolve<F, M>(model: &M, u0: &CellField<F>, t_end: F, cfl: F, snapshot_times: &[F]) -> Result<Evolution<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    evolve_with(model, u0, t_end, cfl, snapshot_times, |_, _| std::ops::ControlFlow::Continue(()))
}

/// [`evolve`] with an observer called after every step; `Break` stops the run early.
pub fn evolve_with<F, M>(
    model: &M,
    u0: &CellField<F>,
    t_end: F,
    cfl: F,
    snapshot_times: &[F],
    mut observer: impl FnMut(F, &CellField<F>) -> std::ops::ControlFlow<()>,
) -> Result<Evolution<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !(t_end >= F::zero()) || !(cfl > F::zero()) {
        return Err(Error::Domain(format!("need T ≥ 0 and cfl > 0, got T = {t_end}, cfl = {cfl}")));
    }
    let mut stops: Vec<F> = snapshot_times.iter().copied().filter(|&s| s >= F::zero() && s <= t_end).collect();
    stops.sort_by(|a, b| a.partial_cmp(b).expect("finite snapshot times"));
    stops.dedup();
    let mut field = u0.clone();
    let mut t = F::zero();
    let mut steps = 0;
    let mut snapshots = Vec::with_capacity(stops.len());
    let mut next = 0;
    while next < stops.len() && stops[next] == F::zero() {
        snapshots.push((F::zero(), field.clone()));
        next += 1;
    }
    while t < t_end {
        let target = if next < stops.len() { stops[next] } else { t_end };
        let mut dt = stable_dt(&field, cfl);
        let landing = t + dt >= target;
        if landing {
            dt = target - t;
        }
        field = step(model, &field, dt, cfl)?;
        steps += 1;
        t = if landing { target } else { t + dt };
        while next < stops.len() && stops[next] <= t {
            snapshots.push((stops[next], field.clone()));
            next += 1;
        }
        if observer(t, &field).is_break() {
            break;
        }
    }
    Ok(Evolution { final_field: field, final_time: t, snapshots, steps })
}

/// Jump threshold `√(5 dx)` (0.1 at `dx = 0.002`). A fixed threshold converges to the time
/// the shock reaches that size rather than to its birth, and one proportional to `dx` fires
/// on the steepening gradient before the shock exists; `√dx` makes both biases vanish.
pub fn default_jump_threshold<F: Scalar>(dx: F) -> F {
    (lit::<F>(5.0) * dx).sqrt()
}

/// First time the central jump `u_{n/2-1} - u_{n/2}` exceeds `threshold`, interpolated linearly
/// between the bracketing steps.
pub fn detect_shock_formation<F, M>(model: &M, u0: &CellField<F>, t_max: F, threshold: F, cfl: F) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !u0.grid.n.is_multiple_of(2) {
        return Err(Error::Domain("shock detection needs an even cell count".into()));
    }
    let mut prev = (F::zero(), u0.central_jump());
    let mut found = None;
    evolve_with(model, u0, t_max, cfl, &[], |t, f| {
        let j = f.central_jump();
        if j > threshold {
            let (t0, j0) = prev;
            let w = if j0 < threshold { (threshold - j0) / (j - j0) } else { F::zero() };
            found = Some(t0 + w * (t - t0));
            return std::ops::ControlFlow::Break(());
        }
        prev = (t, j);
        std::ops::ControlFlow::Continue(())
    })?;
    found.ok_or(Error::NotFound { t_max: t_max.to_f64().unwrap_or(f64::NAN) })
}

/// Metadata written alongside snapshot CSVs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub grid: Grid1D<f64>,
    pub dx: f64,
    pub cfl: f64,
    pub times: Vec<f64>,
    pub datum: String,
    pub steps: usize,
    pub shock_formation_time: Option<f64>,
}
