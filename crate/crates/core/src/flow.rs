//! Characteristic system `q̇ = ∂ₚH`, `ṗ = -∂_qH`: fixed-step RK4 in either time direction,
//! the flow map and its projections, dense output and level-crossing events.

use std::io::{self, Write};
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::HamiltonianModel;
use crate::scalar::{lit, Scalar};

/// A point of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseState<F> {
    pub q: F,
    pub p: F,
}

impl<F: Scalar> PhaseState<F> {
    pub fn new(q: F, p: F) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    /// `(q, p) ↦ (-q, -p)`, a symmetry of the flow whenever `g` is even.
    pub fn mirrored(&self) -> Self {
        Self { q: -self.q, p: -self.p }
    }
}

/// Step size and conservation budget of an integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions<F> {
    pub dt_max: F,
    pub energy_tol: F,
}

impl<F: Scalar> Default for FlowOptions<F> {
    /// Energy tolerance is `1e-8`, or `1000 ε` when the scalar type cannot resolve that.
    fn default() -> Self {
        let energy_tol = lit::<F>(1e-8).max(lit::<F>(1e3) * F::epsilon());
        Self { dt_max: lit(1e-3), energy_tol }
    }
}

impl<F: Scalar> FlowOptions<F> {
    pub fn with_dt(dt_max: F) -> Self {
        Self { dt_max, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt_max > F::zero()) || !self.dt_max.is_finite() {
            return Err(Error::Domain(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.energy_tol > F::zero()) {
            return Err(Error::Domain("energy tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Time-sampled orbit. Samples are stored in increasing time order regardless of the
/// integration direction; `rates` holds `(q̇, ṗ)` at each sample for Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    times: Vec<F>,
    states: Vec<PhaseState<F>>,
    rates: Vec<PhaseState<F>>,
    energy0: F,
    max_drift: F,
}

impl<F: Scalar> Trajectory<F> {
    pub fn times(&self) -> &[F] {
        &self.times
    }

    pub fn states(&self) -> &[PhaseState<F>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn energy0(&self) -> F {
        self.energy0
    }

    /// Largest observed `|H(q, p) - H(q₀, p₀)|`.
    pub fn max_energy_drift(&self) -> F {
        self.max_drift
    }

    /// Sample with the smallest time.
    pub fn first(&self) -> PhaseState<F> {
        self.states[0]
    }

    /// Sample with the largest time.
    pub fn last(&self) -> PhaseState<F> {
        self.states[self.states.len() - 1]
    }

    /// Cubic Hermite interpolation of the state at time `t`, clamped to the sampled range.
    pub fn state_at(&self, t: F) -> PhaseState<F> {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return self.states[0];
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        self.hermite(i, t)
    }

    fn hermite(&self, i: usize, t: F) -> PhaseState<F> {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let two = lit::<F>(2.0);
        let three = lit::<F>(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + F::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let (a, b) = (self.states[i], self.states[i + 1]);
        let (da, db) = (self.rates[i], self.rates[i + 1]);
        PhaseState {
            q: h00 * a.q + h10 * h * da.q + h01 * b.q + h11 * h * db.q,
            p: h00 * a.p + h10 * h * da.p + h01 * b.p + h11 * h * db.p,
        }
    }

    /// Writes `t,q,p,H` rows preceded by a single `#` header line.
    pub fn write_csv<W: Write, M: HamiltonianModel<F> + ?Sized>(
        &self,
        model: &M,
        header: &str,
        mut out: W,
    ) -> io::Result<()> {
        writeln!(out, "# {header}")?;
        writeln!(out, "t,q,p,H")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(out, "{},{},{},{}", t, s.q, s.p, model.hamiltonian(s.q, s.p))?;
        }
        Ok(())
    }
}

#[inline]
fn rhs<F: Scalar, M: HamiltonianModel<F> + ?Sized>(model: &M, s: PhaseState<F>) -> PhaseState<F> {
    PhaseState { q: model.dh_dp(s.q, s.p), p: -model.dh_dx(s.q, s.p) }
}

/// One classical Runge–Kutta step of (signed) size `h`.
#[inline]
pub fn rk4_step<F: Scalar, M: HamiltonianModel<F> + ?Sized>(
    model: &M,
    s: PhaseState<F>,
    h: F,
) -> PhaseState<F> {
    let half = h / lit(2.0);
    let k1 = rhs(model, s);
    let k2 = rhs(model, PhaseState { q: s.q + half * k1.q, p: s.p + half * k1.p });
    let k3 = rhs(model, PhaseState { q: s.q + half * k2.q, p: s.p + half * k2.p });
    let k4 = rhs(model, PhaseState { q: s.q + h * k3.q, p: s.p + h * k3.p });
    let sixth = h / lit(6.0);
    let two = lit::<F>(2.0);
    PhaseState {
        q: s.q + sixth * (k1.q + two * k2.q + two * k3.q + k4.q),
        p: s.p + sixth * (k1.p + two * k2.p + two * k3.p + k4.p),
    }
}

/// Steps from `start` over the signed duration `t`, calling `observe(time, state)` after every
/// step (and once for the initial state). Steps have size `dt_max` except the last, which is
/// shortened to land on `t`. The observer may stop the integration early; the state at which it
/// stopped is returned.
pub fn propagate<F, M, O>(
    model: &M,
    start: PhaseState<F>,
    t: F,
    opts: &FlowOptions<F>,
    mut observe: O,
) -> Result<(F, PhaseState<F>)>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
    O: FnMut(F, &PhaseState<F>) -> ControlFlow<()>,
{
    opts.validate()?;
    if !t.is_finite() {
        return Err(Error::Domain(format!("integration time must be finite, got {t}")));
    }
    if !start.is_finite() {
        return Err(Error::NonFinite { time: 0.0 });
    }
    let energy0 = model.hamiltonian(start.q, start.p);
    let mut state = start;
    if observe(F::zero(), &state).is_break() || t == F::zero() {
        return Ok((F::zero(), state));
    }
    let dir = if t > F::zero() { F::one() } else { -F::one() };
    let full = (t.abs() / opts.dt_max).floor();
    let full_steps = full.to_usize().unwrap_or(usize::MAX);
    let remainder = t.abs() - full * opts.dt_max;
    let h = dir * opts.dt_max;
    let total = full_steps + usize::from(remainder > F::zero());
    for k in 1..=total {
        let (step, time) = if k <= full_steps {
            (h, dir * lit::<F>(k as f64) * opts.dt_max)
        } else {
            (dir * remainder, t)
        };
        state = rk4_step(model, state, step);
        if !state.is_finite() {
            return Err(Error::NonFinite { time: time.to_f64().unwrap_or(f64::NAN) });
        }
        let drift = (model.hamiltonian(state.q, state.p) - energy0).abs();
        if drift > opts.energy_tol {
            return Err(Error::EnergyDrift {
                time: time.to_f64().unwrap_or(f64::NAN),
                drift: drift.to_f64().unwrap_or(f64::NAN),
                tol: opts.energy_tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        if observe(time, &state).is_break() {
            return Ok((time, state));
        }
    }
    Ok((t, state))
}

/// Integrates from `(q0, p0)` at time 0 to time `t` (negative `t` integrates backward) and keeps
/// every step.
pub fn integrate<F, M>(model: &M, q0: F, p0: F, t: F, opts: &FlowOptions<F>) -> Result<Trajectory<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    let capacity = (t.abs() / opts.dt_max).to_usize().unwrap_or(0).saturating_add(2);
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let energy0 = model.hamiltonian(q0, p0);
    let mut max_drift = F::zero();
    propagate(model, PhaseState::new(q0, p0), t, opts, |time, s| {
        times.push(time);
        states.push(*s);
        max_drift = max_drift.max((model.hamiltonian(s.q, s.p) - energy0).abs());
        ControlFlow::Continue(())
    })?;
    if t < F::zero() {
        times.reverse();
        states.reverse();
    }
    let rates = states.iter().map(|s| rhs(model, *s)).collect();
    Ok(Trajectory { times, states, rates, energy0, max_drift })
}

/// Terminal state `𝓕(t, q0, p0)`.
pub fn flow<F, M>(model: &M, t: F, q0: F, p0: F, opts: &FlowOptions<F>) -> Result<PhaseState<F>>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    propagate(model, PhaseState::new(q0, p0), t, opts, |_, _| ControlFlow::Continue(()))
        .map(|(_, s)| s)
}

/// Position component `𝓕_q(t, q0, p0)`.
pub fn flow_q<F, M>(model: &M, t: F, q0: F, p0: F, opts: &FlowOptions<F>) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    flow(model, t, q0, p0, opts).map(|s| s.q)
}

/// Momentum component `𝓕_p(t, q0, p0)`.
pub fn flow_p<F, M>(model: &M, t: F, q0: F, p0: F, opts: &FlowOptions<F>) -> Result<F>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    flow(model, t, q0, p0, opts).map(|s| s.p)
}

/// The two distinguished orbits from `q = 0`: the separatrix (`p₀ = √(2(g(X) - g(0)))`) and the
/// escaping orbit launched with the Riemann state `p₀ = 2`.
pub fn separatrix_orbits<F, M>(
    model: &M,
    horizon: F,
    opts: &FlowOptions<F>,
) -> Result<(Trajectory<F>, Trajectory<F>)>
where
    F: Scalar,
    M: HamiltonianModel<F> + ?Sized,
{
    if !(horizon > F::zero()) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let bounded = integrate(model, F::zero(), model.separatrix_momentum(), horizon, opts)?;
    let escaping = integrate(model, F::zero(), lit(crate::RIEMANN_STATE), horizon, opts)?;
    Ok((bounded, escaping))
}

/// A time at which `q` crosses a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing<F> {
    pub time: F,
    /// `true` when `q - level` goes from negative to positive.
    pub rising: bool,
}

/// Times at which `q - level` changes sign, refined by bisection on the Hermite interpolant to
/// `1e-10` (or the scalar's resolution). A sample lying exactly on the level counts once, at the
/// end of the step that reached it; a trajectory starting on the level does not report its
/// initial point.
pub fn crossing_events<F: Scalar>(traj: &Trajectory<F>, level: F) -> Vec<Crossing<F>> {
    let mut out = Vec::new();
    let f = |s: &PhaseState<F>| s.q - level;
    let tol = lit::<F>(1e-10);
    for i in 0..traj.len().saturating_sub(1) {
        let (a, b) = (f(&traj.states[i]), f(&traj.states[i + 1]));
        if a == F::zero() {
            continue;
        }
        if b == F::zero() {
            out.push(Crossing { time: traj.times[i + 1], rising: a < F::zero() });
            continue;
        }
        if (a < F::zero()) == (b < F::zero()) {
            continue;
        }
        let (mut lo, mut hi) = (traj.times[i], traj.times[i + 1]);
        let lo_negative = a < F::zero();
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = (lo + hi) / lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = traj.hermite(i, mid).q - level;
            if (v < F::zero()) == lo_negative {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(Crossing { time: (lo + hi) / lit(2.0), rising: lo_negative });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BumpPotential, FlatPotential};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn standard() -> BumpPotential<f64> {
        BumpPotential::standard()
    }

    #[test]
    fn free_flight_outside_the_well() {
        let s = flow(&standard(), 1.0, 1.5, 2.0, &FlowOptions::default()).unwrap();
        assert_abs_diff_eq!(s.q, 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.p, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_stays_put() {
        for &t in &[0.3, 7.0, -4.0] {
            let s = flow(&standard(), t, 0.0, 0.0, &FlowOptions::default()).unwrap();
            assert_eq!(s, PhaseState::new(0.0, 0.0));
        }
        assert_eq!(flow_p(&standard(), 0.0, 0.3, -1.1, &FlowOptions::default()).unwrap(), -1.1);
    }

    #[test]
    fn last_step_lands_on_target() {
        let tr = integrate(&standard(), 0.0, 1.0, 0.0105, &FlowOptions::default()).unwrap();
        assert_eq!(tr.len(), 12);
        assert_eq!(*tr.times().last().unwrap(), 0.0105);
        let back = integrate(&standard(), 0.0, 1.0, -0.0105, &FlowOptions::default()).unwrap();
        assert_eq!(back.times()[0], -0.0105);
        assert_eq!(back.last(), PhaseState::new(0.0, 1.0));
        assert!(back.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn drift_and_bad_input_are_reported() {
        let coarse = FlowOptions { dt_max: 0.5, energy_tol: 1e-12 };
        assert!(matches!(
            integrate(&standard(), 0.0, 1.0, 5.0, &coarse),
            Err(Error::EnergyDrift { .. })
        ));
        assert!(integrate(&standard(), 0.0, 1.0, f64::INFINITY, &FlowOptions::default()).is_err());
        assert!(integrate(&standard(), 0.0, 1.0, 1.0, &FlowOptions::with_dt(0.0)).is_err());
        assert!(matches!(
            flow(&standard(), 1.0, f64::NAN, 0.0, &FlowOptions::default()),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn energy_conserved_over_long_runs() {
        for &p0 in &[0.3, 1.0, 1.4, 2.0_f64.sqrt(), 1.6, 2.0] {
            for &t in &[30.0, -30.0] {
                let tr = integrate(&standard(), 0.0, p0, t, &FlowOptions::default()).unwrap();
                assert!(tr.max_energy_drift() <= 1e-9, "p0 = {p0}, drift {}", tr.max_energy_drift());
            }
        }
    }

    #[test]
    fn hermite_interpolation_is_accurate() {
        let m = standard();
        let tr = integrate(&m, 0.0, 1.0, 1.0, &FlowOptions::default()).unwrap();
        let fine = flow(&m, 0.4567, 0.0, 1.0, &FlowOptions::with_dt(1e-5)).unwrap();
        let s = tr.state_at(0.4567);
        assert_abs_diff_eq!(s.q, fine.q, epsilon = 1e-11);
        assert_abs_diff_eq!(s.p, fine.p, epsilon = 1e-10);
    }

    #[test]
    fn crossings_of_free_and_mirrored_orbits() {
        let m = standard();
        let free = integrate(&m, 1.5, 2.0, 5.0, &FlowOptions::default()).unwrap();
        assert!(crossing_events(&free, 0.0).is_empty());

        let up = integrate(&m, 0.0, 1.0, 6.0, &FlowOptions::default()).unwrap();
        let down = integrate(&m, 0.0, -1.0, 6.0, &FlowOptions::default()).unwrap();
        let cu = crossing_events(&up, 0.0);
        let cd = crossing_events(&down, 0.0);
        assert_eq!(cu.len(), cd.len());
        assert!(!cu.is_empty());
        for (a, b) in cu.iter().zip(&cd) {
            assert_abs_diff_eq!(a.time, b.time, epsilon = 1e-12);
            assert_eq!(a.rising, !b.rising);
        }
        assert!(!cu[0].rising);
    }

    #[test]
    fn lemma_orbit_classes() {
        let m = standard();
        let opts = FlowOptions::default();
        let (flat, sharp) = separatrix_orbits(&m, 30.0, &opts).unwrap();
        assert_eq!(flat.first().q, 0.0);
        // q♭ increasing and below 1; q♯ increasing and unbounded.
        assert!(flat.states().windows(2).all(|w| w[1].q > w[0].q));
        assert!(flat.last().q < 1.0);
        assert!(sharp.states().windows(2).all(|w| w[1].q > w[0].q));
        for (t, s) in sharp.times().iter().zip(sharp.states()) {
            if *t >= 1.0 {
                assert!(s.q >= 2.0_f64.sqrt() * t - 1.0);
            }
        }
        // mpmath Taylor integration at 25 digits: q♭(10) = 0.98092706185998, q♭(30) = 0.99391781728801.
        // Near the flat top the orbit is sensitive to the rounding of √2 itself.
        assert_abs_diff_eq!(flat.state_at(10.0).q, 0.980_927_061_859_98, epsilon = 1e-8);
        assert_abs_diff_eq!(flat.last().q, 0.993_917_817_288_01, epsilon = 5e-8);
    }

    #[test]
    fn comparison_orders() {
        let m = standard();
        let opts = FlowOptions::default();
        // starts at (q0, 2): strict order preserved
        let starts = [0.0, 0.2, 0.5, 0.9, 1.3];
        let trajs: Vec<_> =
            starts.iter().map(|&q0| integrate(&m, q0, 2.0, 10.0, &opts).unwrap()).collect();
        for w in trajs.windows(2) {
            for (a, b) in w[0].states().iter().zip(w[1].states()).skip(1) {
                assert!(a.q < b.q);
            }
        }
        // starts at (0, p0) with p0 ≥ √2: order for all t > 0
        let ps = [2.0_f64.sqrt(), 1.5, 1.8, 1.99];
        let trajs: Vec<_> =
            ps.iter().map(|&p| integrate(&m, 0.0, p, 10.0, &opts).unwrap()).collect();
        for w in trajs.windows(2) {
            for (a, b) in w[0].states().iter().zip(w[1].states()).skip(1) {
                assert!(a.q < b.q);
            }
        }
    }

    #[test]
    fn homogeneous_rays_are_straight() {
        let s = flow(&FlatPotential, -2.0, 0.3, 0.7, &FlowOptions::default()).unwrap();
        assert_abs_diff_eq!(s.q, 0.3 - 1.4, epsilon = 1e-12);
        let s32 = flow(&BumpPotential::<f32>::standard(), 1.0, 1.5, 2.0, &FlowOptions::default())
            .unwrap();
        assert!((s32.q - 3.5).abs() < 1e-3);
    }

    #[test]
    fn csv_export() {
        let m = standard();
        let tr = integrate(&m, 0.0, 1.0, 0.002, &FlowOptions::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&m, "experiment=test", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# experiment=test");
        assert_eq!(lines[1], "t,q,p,H");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "0,0,1,0.5");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reversibility_and_symmetry(q0 in -1.5f64..1.5, p0 in -2.0f64..2.0, t in 0.1f64..6.0) {
            let m = standard();
            let opts = FlowOptions::default();
            let fwd = flow(&m, t, q0, p0, &opts).unwrap();
            let back = flow(&m, -t, fwd.q, fwd.p, &opts).unwrap();
            prop_assert!((back.q - q0).abs() <= 1e-8 && (back.p - p0).abs() <= 1e-8);
            let mirror = flow(&m, t, -q0, -p0, &opts).unwrap();
            prop_assert!((mirror.q + fwd.q).abs() <= 1e-12 && (mirror.p + fwd.p).abs() <= 1e-12);
        }
    }
}
