//! Inverse design: footprints of backward characteristics, the monotone-footprint test,
//! reconstruction of the vertex datum, round trips through the finite-volume solver, and
//! backward ray fans from a shock point.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{flow, integrate, FlowOptions};
use crate::fvm::{evolve, CellField, Grid1D};
use crate::model::HamiltonianModel;

/// Default tolerance for the monotone test and for gap collapse at tagged shocks.
pub const MONOTONE_TOL: f64 = 1e-6;

/// A tagged discontinuity with one-sided values `w(x-)`, `w(x+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discontinuity {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

/// Sampled profile `w` with optional tagged discontinuities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    xs: Vec<f64>,
    values: Vec<f64>,
    tags: Vec<Discontinuity>,
}

impl Profile {
    pub fn new(xs: Vec<f64>, values: Vec<f64>, mut tags: Vec<Discontinuity>) -> Result<Self> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(Error::Domain("profile needs matching nonempty samples".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("profile samples must be strictly increasing".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !xs.iter().all(finite)
            || !values.iter().all(finite)
            || !tags.iter().all(|d| d.x.is_finite() && d.left.is_finite() && d.right.is_finite())
        {
            return Err(Error::Domain("profile must be finite".into()));
        }
        tags.sort_by(|a, b| a.x.total_cmp(&b.x));
        Ok(Self { xs, values, tags })
    }

    /// Samples `f` at `xs`, skipping points that coincide with a tag.
    pub fn from_fn(xs: &[f64], tags: Vec<Discontinuity>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let kept: Vec<f64> = xs.iter().copied().filter(|x| !tags.iter().any(|d| d.x == *x)).collect();
        let values = kept.iter().map(|&x| f(x)).collect();
        Self::new(kept, values, tags)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tags(&self) -> &[Discontinuity] {
        &self.tags
    }

    /// Piecewise-linear value; across a tag each side interpolates towards its one-sided value,
    /// and constant extension outside the samples.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&s| s < x);
        let (mut a, mut b) = match i {
            0 => ((self.xs[0], self.values[0]), (self.xs[0], self.values[0])),
            _ if i == n => ((self.xs[n - 1], self.values[n - 1]), (self.xs[n - 1], self.values[n - 1])),
            _ => ((self.xs[i - 1], self.values[i - 1]), (self.xs[i], self.values[i])),
        };
        for d in &self.tags {
            if d.x == x {
                return 0.5 * (d.left + d.right);
            }
            if (i == 0 || d.x > a.0) && (i == n || d.x < b.0) {
                if x < d.x {
                    b = (d.x, d.left);
                    if i == 0 {
                        return d.left;
                    }
                } else {
                    a = (d.x, d.right);
                    if i == n {
                        return d.right;
                    }
                }
            }
        }
        if b.0 == a.0 {
            return if i == 0 { b.1 } else { a.1 };
        }
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }
}

/// Which value of the profile a footprint entry was launched with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Launch {
    Sample,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FootEntry {
    pub x: f64,
    pub w: f64,
    pub launch: Launch,
    /// `q(0)` of the backward orbit from `(T, x, w)`.
    pub foot: f64,
    /// `p(0)` of the same orbit.
    pub p0: f64,
}

/// Footprints in increasing `x`; a tag contributes its left launch followed by its right launch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FootprintMap {
    pub horizon: f64,
    pub entries: Vec<FootEntry>,
}

impl FootprintMap {
    pub fn tag_entries(&self) -> impl Iterator<Item = (&FootEntry, &FootEntry)> {
        self.entries
            .windows(2)
            .filter(|w| w[0].launch == Launch::Left && w[1].launch == Launch::Right)
            .map(|w| (&w[0], &w[1]))
    }

    pub fn write_csv<W: Write>(&self, header: &str, mut out: W) -> io::Result<()> {
        writeln!(out, "# {header}")?;
        writeln!(out, "x,w,foot,p0")?;
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.x, e.w, e.foot, e.p0)?;
        }
        Ok(())
    }
}

/// Backward characteristics over `[0, T]` from every sample of `w`.
pub fn footprint<M: HamiltonianModel<f64> + ?Sized>(
    model: &M,
    horizon: f64,
    w: &Profile,
    opts: &FlowOptions<f64>,
) -> Result<FootprintMap> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("footprint needs T > 0, got {horizon}")));
    }
    let mut launches: Vec<(f64, f64, Launch)> = w.xs.iter().zip(&w.values).map(|(&x, &v)| (x, v, Launch::Sample)).collect();
    for d in &w.tags {
        launches.push((d.x, d.left, Launch::Left));
        launches.push((d.x, d.right, Launch::Right));
    }
    launches.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.2 as u8).cmp(&(b.2 as u8))));
    let entries = launches
        .par_iter()
        .map(|&(x, v, launch)| {
            let s = flow(model, -horizon, x, v, opts)?;
            Ok(FootEntry { x, w: v, launch, foot: s.q, p0: s.p })
        })
        .collect::<Result<_>>()?;
    Ok(FootprintMap { horizon, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub monotone: bool,
    /// Indices `j` with `foot_{j+1} < foot_j - tol`.
    pub violations: Vec<usize>,
}

pub fn monotone_test(fm: &FootprintMap, tol: f64) -> MonotoneReport {
    let violations: Vec<usize> =
        fm.entries.windows(2).enumerate().filter(|(_, w)| w[1].foot < w[0].foot - tol).map(|(j, _)| j).collect();
    MonotoneReport { monotone: violations.is_empty(), violations }
}

/// Extremal feet at a tagged discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDiagnostic {
    pub x: f64,
    pub foot_left: f64,
    pub foot_right: f64,
    pub gap: f64,
    pub collapsed: bool,
}

pub fn gap_diagnostics(fm: &FootprintMap, tol: f64) -> Vec<GapDiagnostic> {
    fm.tag_entries()
        .map(|(l, r)| {
            let gap = r.foot - l.foot;
            GapDiagnostic { x: l.x, foot_left: l.foot, foot_right: r.foot, gap, collapsed: gap.abs() <= tol }
        })
        .collect()
}

/// Jump of the reconstructed datum where many feet collapse to one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecordedJump {
    pub x: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    /// Resampled datum; jumps are carried as tags.
    pub datum: Profile,
    /// The graph `{(q(0), p(0))}` actually used, gap fans included.
    pub graph: Vec<(f64, f64)>,
    pub jumps: Vec<RecordedJump>,
    /// Tags whose non-uniqueness gap was filled by a backward ray fan.
    pub filled_gaps: Vec<f64>,
}

/// Candidate vertex datum from a monotone footprint: the graph `{(q(0), p(0))}`, with open gaps
/// at tags filled by the backward ray fan from the shock point, resampled at `grid` by linear
/// interpolation. Clusters of coinciding feet become recorded jumps.
pub fn reconstruct_vertex<M: HamiltonianModel<f64> + ?Sized>(
    model: &M,
    fm: &FootprintMap,
    grid: &[f64],
    tol: f64,
    opts: &FlowOptions<f64>,
) -> Result<Reconstruction> {
    let report = monotone_test(fm, tol);
    if !report.monotone {
        return Err(Error::NonMonotoneFeet { count: report.violations.len() });
    }
    let mut graph: Vec<(f64, f64)> = Vec::with_capacity(fm.entries.len());
    let mut filled_gaps = Vec::new();
    let mut k = 0;
    while k < fm.entries.len() {
        let e = &fm.entries[k];
        graph.push((e.foot, e.p0));
        let next = fm.entries.get(k + 1);
        if let (Launch::Left, Some(r)) = (e.launch, next) {
            if r.launch == Launch::Right && r.foot - e.foot > tol {
                let fan = ray_fan(model, fm.horizon, e.x, e.w, r.w, 201, 2, tol, opts)?;
                let mut last = e.foot;
                for ray in &fan.rays[1..fan.rays.len() - 1] {
                    let (q, p) = (ray.qs[ray.qs.len() - 1], ray.ps[ray.ps.len() - 1]);
                    // keep the monotone part of the fan
                    if q >= last && q <= r.foot {
                        graph.push((q, p));
                        last = q;
                    }
                }
                filled_gaps.push(e.x);
            }
        }
        k += 1;
    }
    // running maximum removes sub-tolerance reversals
    let mut run = f64::NEG_INFINITY;
    for g in &mut graph {
        run = run.max(g.0);
        g.0 = run;
    }

    // clusters: maximal runs of feet within tol of the run's first foot
    let mut jumps = Vec::new();
    let mut nodes: Vec<(f64, f64, f64)> = Vec::new(); // (foot, value from the left, value to the right)
    let mut i = 0;
    while i < graph.len() {
        let mut j = i;
        while j + 1 < graph.len() && graph[j + 1].0 - graph[i].0 <= tol {
            j += 1;
        }
        let foot = graph[i].0;
        let (left, right) = (graph[i].1, graph[j].1);
        if j > i && (right - left).abs() > tol {
            jumps.push(RecordedJump { x: foot, left, right });
        }
        nodes.push((foot, left, right));
        i = j + 1;
    }

    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let n = nodes.partition_point(|node| node.0 < x);
            if n == 0 {
                nodes[0].1
            } else if n == nodes.len() {
                nodes[n - 1].2
            } else if nodes[n].0 == x {
                0.5 * (nodes[n].1 + nodes[n].2)
            } else {
                let (a, b) = (nodes[n - 1], nodes[n]);
                a.2 + (b.1 - a.2) * (x - a.0) / (b.0 - a.0)
            }
        })
        .collect();
    let tags = jumps.iter().map(|j| Discontinuity { x: j.x, left: j.left, right: j.right }).collect();
    let datum = Profile::from_fn(grid, tags, |x| {
        let idx = grid.iter().position(|g| *g == x).expect("grid point");
        values[idx]
    })?;
    Ok(Reconstruction { datum, graph, jumps, filled_gaps })
}

/// `‖a - b‖_{L¹[lo, hi]}` by the trapezoid rule on `n` intervals.
pub fn l1_window(a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let x = lo + i as f64 * h;
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            wgt * (a(x) - b(x)).abs()
        })
        .sum::<f64>()
        * h
}

/// Evolves `datum` for time `T` with the finite-volume solver on `grid` and returns the
/// `L¹(window)` distance of the result to `w`.
pub fn round_trip<M: HamiltonianModel<f64> + ?Sized>(
    model: &M,
    horizon: f64,
    datum: &Profile,
    w: &Profile,
    grid: Grid1D<f64>,
    window: (f64, f64),
    cfl: f64,
) -> Result<f64> {
    let u0 = CellField::from_fn(grid, |x| datum.value_at(x));
    let run = evolve(model, &u0, horizon, cfl, &[])?;
    Ok(run.final_field.l1_distance(|x| w.value_at(x), window.0, window.1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ray {
    /// Momentum at `(T, x0)`.
    pub terminal_momentum: f64,
    /// `q`, `p` on [`RayFan::times`].
    pub qs: Vec<f64>,
    pub ps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayCrossing {
    pub first: usize,
    pub second: usize,
    /// Latest sample time at which the pair's order is reversed.
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayExit {
    pub ray: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayFan {
    /// Common sample times, decreasing from `T` to 0.
    pub times: Vec<f64>,
    pub rays: Vec<Ray>,
    pub crossings: Vec<RayCrossing>,
    pub exits: Vec<RayExit>,
    /// No crossings and no exits: the rays sweep the gap between the extremals.
    pub fills_gap: bool,
}

impl RayFan {
    pub fn extremals_cross(&self) -> bool {
        let last = self.rays.len() - 1;
        self.crossings.iter().any(|c| c.first == 0 && c.second == last)
    }

    pub fn write_csv<W: Write>(&self, header: &str, mut out: W) -> io::Result<()> {
        writeln!(out, "# {header}")?;
        writeln!(out, "ray,p_terminal,t,q,p")?;
        for (k, r) in self.rays.iter().enumerate() {
            for (i, t) in self.times.iter().enumerate() {
                writeln!(out, "{k},{},{t},{},{}", r.terminal_momentum, r.qs[i], r.ps[i])?;
            }
        }
        Ok(())
    }
}

/// Backward orbits from `(T, x0)` with terminal momenta `(1-λ) p_left + λ p_right`, `λ` uniform
/// on `[0, 1]`, sampled at `samples` uniform times per unit of `T` (at least 2 in total).
/// A pair crosses when its order at some sample time in `[0, T)` is reversed by more than
/// `tol` relative to its order just below `T`; a ray exits when it leaves the band between
/// the two extremal rays by more than `tol`.
#[allow(clippy::too_many_arguments)]
pub fn ray_fan<M: HamiltonianModel<f64> + ?Sized>(
    model: &M,
    horizon: f64,
    x0: f64,
    p_left: f64,
    p_right: f64,
    n_rays: usize,
    samples_per_unit: usize,
    tol: f64,
    opts: &FlowOptions<f64>,
) -> Result<RayFan> {
    if n_rays < 2 || !(horizon > 0.0) {
        return Err(Error::Domain(format!("ray fan needs n_rays ≥ 2 and T > 0, got {n_rays}, {horizon}")));
    }
    let m = ((horizon * samples_per_unit as f64).ceil() as usize).max(2);
    let times: Vec<f64> = (0..=m).map(|i| horizon * (1.0 - i as f64 / m as f64)).collect();
    let rays: Vec<Ray> = (0..n_rays)
        .into_par_iter()
        .map(|k| {
            let lambda = k as f64 / (n_rays - 1) as f64;
            let p = (1.0 - lambda) * p_left + lambda * p_right;
            let traj = integrate(model, x0, p, -horizon, opts)?;
            let (qs, ps) = times
                .iter()
                .map(|&t| {
                    let s = traj.state_at(t - horizon);
                    (s.q, s.p)
                })
                .unzip();
            Ok(Ray { terminal_momentum: p, qs, ps })
        })
        .collect::<Result<_>>()?;

    let mut crossings = Vec::new();
    for a in 0..n_rays {
        for b in a + 1..n_rays {
            let sigma = (rays[b].qs[1] - rays[a].qs[1]).signum();
            if rays[b].qs[1] == rays[a].qs[1] {
                continue;
            }
            if let Some(i) = (1..=m).rev().find(|&i| sigma * (rays[b].qs[i] - rays[a].qs[i]) < -tol) {
                crossings.push(RayCrossing { first: a, second: b, time: times[i] });
            }
        }
    }
    let (lo, hi) = (&rays[0], &rays[n_rays - 1]);
    let exits = (1..n_rays - 1)
        .filter_map(|k| {
            (1..=m)
                .find(|&i| {
                    let (a, b) = (lo.qs[i].min(hi.qs[i]), lo.qs[i].max(hi.qs[i]));
                    rays[k].qs[i] < a - tol || rays[k].qs[i] > b + tol
                })
                .map(|i| RayExit { ray: k, time: times[i] })
        })
        .collect::<Vec<_>>();
    let fills_gap = crossings.is_empty() && exits.is_empty();
    Ok(RayFan { times, rays, crossings, exits, fills_gap })
}

/// Everything the inverse-design experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub horizon: f64,
    pub monotone: bool,
    pub violations: Vec<usize>,
    pub gaps: Vec<GapDiagnostic>,
    /// `(x, u₀(x))` of the reconstructed datum, when the test passed.
    pub reconstructed: Option<Vec<(f64, f64)>>,
    pub jumps: Vec<RecordedJump>,
    pub round_trip_l1: Option<f64>,
}

impl DesignReport {
    pub fn assemble(
        horizon: f64,
        mono: MonotoneReport,
        gaps: Vec<GapDiagnostic>,
        rec: Option<&Reconstruction>,
        round_trip_l1: Option<f64>,
    ) -> Self {
        Self {
            horizon,
            monotone: mono.monotone,
            violations: mono.violations,
            gaps,
            reconstructed: rec.map(|r| r.datum.xs().iter().copied().zip(r.datum.values().iter().copied()).collect()),
            jumps: rec.map(|r| r.jumps.clone()).unwrap_or_default(),
            round_trip_l1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BumpPotential, FlatPotential};
    use approx::assert_abs_diff_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn profile_validation_and_values() {
        assert!(Profile::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![]).is_err());
        assert!(Profile::new(vec![0.0], vec![], vec![]).is_err());
        let tag = Discontinuity { x: 0.0, left: 0.5, right: -0.5 };
        let p = Profile::from_fn(&[-1.0, 0.0, 1.0], vec![tag], |x| x).unwrap();
        assert_eq!(p.xs(), &[-1.0, 1.0]);
        assert_eq!(p.value_at(-0.5), -0.25);
        assert_eq!(p.value_at(0.5), 0.25);
        assert_eq!(p.value_at(0.0), 0.0);
        assert_eq!(p.value_at(3.0), 1.0);
        assert_eq!(p.value_at(-3.0), -1.0);
        let tail = Profile::new(vec![0.0], vec![1.0], vec![Discontinuity { x: 1.0, left: 2.0, right: 3.0 }]).unwrap();
        assert_eq!(tail.value_at(0.5), 1.5);
        assert_eq!(tail.value_at(2.0), 3.0);
    }

    #[test]
    fn homogeneous_feet_are_straight() {
        let xs = grid(-3.0, 3.0, 61);
        let w = Profile::from_fn(&xs, vec![], |x| 0.3 * x.sin()).unwrap();
        let fm = footprint(&FlatPotential, 1.5, &w, &FlowOptions::default()).unwrap();
        for e in &fm.entries {
            assert_abs_diff_eq!(e.foot, e.x - 1.5 * e.w, epsilon = 1e-12);
            assert_eq!(e.p0, e.w);
        }
        let c = Profile::from_fn(&xs, vec![], |_| 0.7).unwrap();
        assert!(monotone_test(&footprint(&FlatPotential, 2.0, &c, &FlowOptions::default()).unwrap(), MONOTONE_TOL).monotone);
    }

    #[test]
    fn homogeneous_shock_keeps_its_gap() {
        let tag = Discontinuity { x: 0.0, left: 1.0, right: -1.0 };
        let w = Profile::from_fn(&grid(-2.0, 2.0, 41), vec![tag], |x| if x < 0.0 { 1.0 } else { -1.0 }).unwrap();
        let fm = footprint(&FlatPotential, 1.0, &w, &FlowOptions::default()).unwrap();
        let gaps = gap_diagnostics(&fm, 1e-4);
        assert_eq!(gaps.len(), 1);
        assert_abs_diff_eq!(gaps[0].gap, 2.0, epsilon = 1e-12);
        assert!(!gaps[0].collapsed);
        let rec = reconstruct_vertex(&FlatPotential, &fm, &grid(-3.0, 3.0, 601), MONOTONE_TOL, &FlowOptions::default())
            .unwrap();
        assert_eq!(rec.filled_gaps, vec![0.0]);
        // the compression fan u₀(y) = -y on the gap focuses at (1, 0)
        assert_abs_diff_eq!(rec.datum.value_at(0.5), -0.5, epsilon = 1e-9);
    }

    #[test]
    fn homogeneous_rarefaction_inverts_to_a_step() {
        let (t, a) = (1.0, 1.5);
        let xs = grid(-4.0, 4.0, 801);
        let w = Profile::from_fn(&xs, vec![], |x: f64| (x / t).clamp(-a, a)).unwrap();
        let fm = footprint(&FlatPotential, t, &w, &FlowOptions::default()).unwrap();
        let rec = reconstruct_vertex(&FlatPotential, &fm, &grid(-3.0, 3.0, 1201), MONOTONE_TOL, &FlowOptions::default())
            .unwrap();
        assert_eq!(rec.jumps.len(), 1);
        assert_abs_diff_eq!(rec.jumps[0].x, 0.0, epsilon = 1e-9);
        let step = |x: f64| if x < 0.0 { -a } else { a };
        assert!(l1_window(|x| rec.datum.value_at(x), step, -3.0, 3.0, 6000) < 1e-2);
        let g = Grid1D::new(-4.0, 4.0, 4000).unwrap();
        let err = round_trip(&FlatPotential, t, &rec.datum, &w, g, (-3.0, 3.0), 0.45).unwrap();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn non_monotone_feet_are_rejected() {
        let w = Profile::from_fn(&grid(-2.0, 2.0, 41), vec![], |x| x).unwrap();
        let fm = footprint(&FlatPotential, 2.0, &w, &FlowOptions::default()).unwrap();
        let m = monotone_test(&fm, MONOTONE_TOL);
        assert!(!m.monotone && !m.violations.is_empty());
        let r = reconstruct_vertex(&FlatPotential, &fm, &[0.0], MONOTONE_TOL, &FlowOptions::default());
        assert!(matches!(r, Err(Error::NonMonotoneFeet { .. })));
    }

    #[test]
    fn backward_forward_consistency() {
        let m = BumpPotential::standard();
        let w = Profile::from_fn(&grid(-2.0, 2.0, 21), vec![], |x| crate::charsol::asymptotic_profile(&m, x) + 0.1)
            .unwrap();
        let opts = FlowOptions::default();
        let fm = footprint(&m, 1.0, &w, &opts).unwrap();
        for e in &fm.entries {
            let s = flow(&m, 1.0, e.foot, e.p0, &opts).unwrap();
            assert_abs_diff_eq!(s.q, e.x, epsilon = 1e-7);
            assert_abs_diff_eq!(s.p, e.w, epsilon = 1e-7);
        }
    }

    #[test]
    fn ray_fans() {
        let opts = FlowOptions::default();
        let flat = ray_fan(&FlatPotential, 2.0, 0.0, 1.0, -1.0, 21, 50, 1e-9, &opts).unwrap();
        assert!(flat.fills_gap && flat.crossings.is_empty() && flat.exits.is_empty());
        assert_eq!(flat.times.first(), Some(&2.0));
        assert_eq!(flat.times.last(), Some(&0.0));
        assert_abs_diff_eq!(flat.rays[0].qs[flat.times.len() - 1], -2.0, epsilon = 1e-12);

        let m = BumpPotential::standard();
        let (l, r) = crate::charsol::origin_traces(&m, 2.0).unwrap();
        let fan = ray_fan(&m, 2.0, 0.0, l, r, 41, 50, 1e-6, &opts).unwrap();
        assert!(!fan.fills_gap);
        assert!(!fan.extremals_cross());
        let pair = ray_fan(&m, 2.0, 0.0, l, r, 2, 50, 1e-6, &opts).unwrap();
        assert!(pair.crossings.is_empty());
        assert!(ray_fan(&m, 2.0, 0.0, l, r, 1, 50, 1e-6, &opts).is_err());

        let mut buf = Vec::new();
        pair.write_csv("rays", &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2 + 2 * pair.times.len());
    }
}
