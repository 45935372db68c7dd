use anyhow::{bail, Context, Result};
use hamray::charsol::{asymptotic_profile, origin_traces, sample_profile, shock_size, write_profile_csv, FanOptions};
use hamray::design::{self, footprint, gap_diagnostics, monotone_test, ray_fan, reconstruct_vertex, Discontinuity, Profile};
use hamray::entropy::{self, SweepOptions, TestFunction};
use hamray::flow::{integrate, FlowOptions};
use hamray::fvm::{default_jump_threshold, detect_shock_formation, evolve, CellField, Grid1D, RunMetadata};
use hamray::model::HamiltonianModel;
use hamray::period::{period_sample, shock_time, small_oscillation_period, write_period_table};
use hamray::shooting::ShootOptions;
use hamray::Error;
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::output::{time_tag, Output};
use crate::svg::{line_plot, Series};

type Model = dyn HamiltonianModel<f64>;

const FIGURE_TIMES: [f64; 4] = [0.5, 1.0, 1.2, 2.5];
const ASYMPTOTIC_TIMES: [f64; 4] = [5.0, 10.0, 20.0, 30.0];
const PROBES: [f64; 6] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.5];

pub fn run(cfg: &RunConfig) -> Result<Output> {
    let model = cfg.model.build()?;
    let mut out = Output::new(cfg)?;
    let m = &*model;
    match cfg.experiment {
        Experiment::PhasePortrait => phase_portrait(cfg, m, &mut out)?,
        Experiment::Simulate => simulate(cfg, m, &mut out)?,
        Experiment::Exact => exact(cfg, m, &mut out)?,
        Experiment::Period => period(cfg, m, &mut out)?,
        Experiment::Inverse => inverse(cfg, m, &mut out)?,
        Experiment::Rays => rays(cfg, m, &mut out)?,
        Experiment::EntropyCheck => entropy_check(cfg, m, &mut out)?,
        Experiment::Asymptotics => asymptotics(cfg, m, &mut out)?,
    }
    Ok(out)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn shoot_opts(cfg: &RunConfig) -> ShootOptions<f64> {
    ShootOptions { tol: cfg.tol_or(1e-9), ..Default::default() }
}

fn field_at(f: &CellField<f64>, x: f64) -> f64 {
    let s = (x - f.grid.x_min) / f.grid.dx() - 0.5;
    let i = (s.floor().max(0.0) as usize).min(f.grid.n - 2);
    let w = (s - i as f64).clamp(0.0, 1.0);
    f.values[i] * (1.0 - w) + f.values[i + 1] * w
}

#[derive(Serialize)]
struct OrbitSummary {
    family: &'static str,
    q0: f64,
    p0: f64,
    energy: f64,
    /// `periodic`, `separatrix` or `escaping` from the energy relative to the plateau.
    class: &'static str,
    q_max: f64,
    q_end: f64,
}

fn phase_portrait(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let horizon = cfg.tmax_or(10.0);
    let n = cfg.n_or(6);
    let sep = m.separatrix_momentum();
    let mut launches: Vec<(&'static str, f64, f64)> = Vec::new();
    if sep > 0.0 {
        launches.extend((1..=n).map(|k| ("periodic", 0.0, sep * k as f64 / (n + 1) as f64)));
        launches.push(("separatrix", 0.0, sep));
    }
    let top = hamray::RIEMANN_STATE;
    launches.extend((1..=n).map(|k| ("escaping", 0.0, sep + (top - sep) * k as f64 / n as f64)));
    launches.extend((1..=n).map(|k| ("line", 0.25 * k as f64, top)));

    let opts = FlowOptions::default();
    let stride = 20;
    let mut orbits = Vec::with_capacity(launches.len());
    for &(family, q0, p0) in &launches {
        orbits.push((family, q0, p0, integrate(m, q0, p0, horizon, &opts)?));
    }
    let header = out.header(&format!("horizon={horizon} stride={stride}"), "t, q, p, H dimensionless");
    out.csv("phase_portrait.csv", |w| {
        writeln!(w, "# {header}")?;
        writeln!(w, "orbit,family,q0,p0,t,q,p,H")?;
        for (k, (family, q0, p0, traj)) in orbits.iter().enumerate() {
            let last = traj.len() - 1;
            for (i, (t, s)) in traj.times().iter().zip(traj.states()).enumerate() {
                if i % stride == 0 || i == last {
                    writeln!(w, "{k},{family},{q0},{p0},{t},{},{},{}", s.q, s.p, m.hamiltonian(s.q, s.p))?;
                }
            }
        }
        Ok(())
    })?;
    let plateau = m.plateau();
    let summary: Vec<OrbitSummary> = orbits
        .iter()
        .map(|(family, q0, p0, traj)| {
            let energy = m.hamiltonian(*q0, *p0);
            let class = if (energy - plateau).abs() <= 1e-12 {
                "separatrix"
            } else if energy < plateau && q0.abs() < m.cutoff() {
                "periodic"
            } else {
                "escaping"
            };
            let q_max = traj.states().iter().map(|s| s.q).fold(f64::NEG_INFINITY, f64::max);
            OrbitSummary { family, q0: *q0, p0: *p0, energy, class, q_max, q_end: traj.last().q }
        })
        .collect();
    out.json("phase_portrait.json", &summary)?;
    let pts: Vec<Vec<(f64, f64)>> =
        orbits.iter().map(|(.., traj)| traj.states().iter().step_by(stride).map(|s| (s.q, s.p)).collect()).collect();
    let series: Vec<Series> = orbits
        .iter()
        .zip(&pts)
        .map(|((family, q0, p0, _), p)| Series { label: format!("{family} ({q0}, {p0:.3})"), points: p })
        .collect();
    out.svg("phase_portrait.svg", line_plot("Phase portrait", "q", "p", &series))
}

fn simulate(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let times = cfg.times_or(&FIGURE_TIMES);
    let t_end = cfg.tmax.unwrap_or_else(|| times.iter().copied().fold(0.0, f64::max));
    let grid = Grid1D::new(-4.0, 4.0, cfg.n_or(4000))?;
    let u0 = CellField::standard_datum(grid);
    let run = evolve(m, &u0, t_end, cfg.cfl, &times)?;
    for (t, f) in &run.snapshots {
        let header = out.header(&format!("t={t} n={} cfl={}", grid.n, cfg.cfl), "x, u dimensionless");
        out.csv(&format!("simulate_t{}.csv", time_tag(*t)), |w| f.write_csv(m, &header, w))?;
    }
    let t_star = if grid.n % 2 == 0 {
        match detect_shock_formation(m, &u0, t_end.max(3.0), default_jump_threshold(grid.dx()), cfg.cfl) {
            Ok(t) => Some(t),
            Err(Error::NotFound { .. }) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let meta = RunMetadata {
        grid,
        dx: grid.dx(),
        cfl: cfg.cfl,
        times: run.snapshots.iter().map(|s| s.0).collect(),
        datum: "riemann(-2, 2)".into(),
        steps: run.steps,
        shock_formation_time: t_star,
    };
    out.json("simulate_meta.json", &meta)?;
    let mut pts: Vec<(String, Vec<(f64, f64)>)> = run
        .snapshots
        .iter()
        .map(|(t, f)| (format!("t = {t}"), grid.centers().into_iter().zip(f.values.iter().copied()).collect()))
        .collect();
    pts.push(("asymptotic".into(), grid.centers().into_iter().map(|x| (x, asymptotic_profile(m, x))).collect()));
    let series: Vec<Series> = pts.iter().map(|(l, p)| Series { label: l.clone(), points: p }).collect();
    out.svg("simulate.svg", line_plot("Finite-volume solution", "x", "u", &series))
}

#[derive(Serialize)]
struct ExactMeta {
    t: f64,
    shock_size: f64,
    trace_left: f64,
    trace_right: f64,
    max_residual: f64,
}

fn exact(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let times = cfg.times_or(&FIGURE_TIMES);
    let xs: Vec<f64> = linspace(-4.0, 4.0, cfg.n_or(801)).into_iter().filter(|&x| x != 0.0).collect();
    let opts = shoot_opts(cfg);
    let mut meta = Vec::new();
    let mut curves = Vec::new();
    for &t in &times {
        let samples = sample_profile(m, t, &xs, &opts)?;
        let header = out.header(&format!("t={t} samples={}", xs.len()), "x, u dimensionless");
        out.csv(&format!("exact_t{}.csv", time_tag(t)), |w| write_profile_csv(m, &samples, &header, w))?;
        let (trace_left, trace_right) = if m.separatrix_momentum() > 0.0 { origin_traces(m, t)? } else { (0.0, 0.0) };
        meta.push(ExactMeta {
            t,
            shock_size: shock_size(m, t, &opts)?,
            trace_left,
            trace_right,
            max_residual: samples.iter().map(|s| s.residual.abs()).fold(0.0, f64::max),
        });
        curves.push((format!("t = {t}"), samples.iter().map(|s| (s.x, s.u)).collect::<Vec<_>>()));
    }
    out.json("exact_meta.json", &meta)?;
    curves.push(("asymptotic".into(), xs.iter().map(|&x| (x, asymptotic_profile(m, x))).collect()));
    let series: Vec<Series> = curves.iter().map(|(l, p)| Series { label: l.clone(), points: p }).collect();
    out.svg("exact.svg", line_plot("Characteristic solution", "x", "u", &series))
}

#[derive(Serialize)]
struct PeriodMeta {
    shock_time: f64,
    small_oscillation_half_period: f64,
    first_half_period: f64,
    strictly_increasing: bool,
}

fn period(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let sep = m.separatrix_momentum();
    if !(sep > 0.0) {
        bail!("the model has no periodic orbits (flat potential)");
    }
    let ps = linspace(0.01, sep * 0.99985, cfg.n_or(200));
    let rows = ps.iter().map(|&p| period_sample(m, p)).collect::<hamray::Result<Vec<_>>>()?;
    let header = out.header(&format!("rows={}", rows.len()), "p0, period, q_max dimensionless");
    out.csv("period.csv", |w| write_period_table(&rows, &header, w))?;
    let meta = PeriodMeta {
        shock_time: shock_time(m)?,
        small_oscillation_half_period: 0.5 * small_oscillation_period(m),
        first_half_period: 0.5 * rows[0].period,
        strictly_increasing: rows.windows(2).all(|w| w[1].period > w[0].period),
    };
    out.json("period_meta.json", &meta)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.p0, r.period)).collect();
    out.svg("period.svg", line_plot("Period map", "p0", "period", &[Series { label: "period".into(), points: &pts }]))
}

/// Sampled characteristic solution at time `t` with the exact traces as a tag at 0.
fn solution_profile(cfg: &RunConfig, m: &Model, t: f64, xs: &[f64]) -> Result<Profile> {
    let kept: Vec<f64> = xs.iter().copied().filter(|&x| x != 0.0).collect();
    let samples = sample_profile(m, t, &kept, &shoot_opts(cfg))?;
    let mut tags = Vec::new();
    if m.separatrix_momentum() > 0.0 {
        let (left, right) = origin_traces(m, t)?;
        if left != right {
            tags.push(Discontinuity { x: 0.0, left, right });
        }
    }
    Ok(Profile::new(kept, samples.iter().map(|s| s.u).collect(), tags)?)
}

fn inverse(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let t = cfg.tmax_or(2.0);
    let tol = cfg.tol_or(design::MONOTONE_TOL);
    let w = solution_profile(cfg, m, t, &linspace(-8.0, 8.0, cfg.n_or(2001)))?;
    let flow = FlowOptions::default();
    let fm = footprint(m, t, &w, &flow)?;
    let header = out.header(&format!("T={t}"), "x, w, foot, p0 dimensionless");
    out.csv("inverse_footprint.csv", |wr| fm.write_csv(&header, wr))?;
    let mono = monotone_test(&fm, tol);
    let gaps = gap_diagnostics(&fm, 1e-4);
    let (rec, round) = if mono.monotone {
        let rec = reconstruct_vertex(m, &fm, &linspace(-4.0, 4.0, 8001), tol, &flow)?;
        let grid = Grid1D::new(-4.0, 4.0, 4000)?;
        let err = design::round_trip(m, t, &rec.datum, &w, grid, (-3.0, 3.0), cfg.cfl)?;
        (Some(rec), Some(err))
    } else {
        (None, None)
    };
    if let Some(rec) = &rec {
        let header = out.header(&format!("T={t}"), "x, u0 dimensionless");
        out.csv("inverse_datum.csv", |wr| {
            writeln!(wr, "# {header}")?;
            writeln!(wr, "x,u0")?;
            for (x, u) in rec.datum.xs().iter().zip(rec.datum.values()) {
                writeln!(wr, "{x},{u}")?;
            }
            Ok(())
        })?;
    }
    let report = design::DesignReport::assemble(t, mono, gaps, rec.as_ref(), round);
    out.json("inverse_report.json", &report)?;
    let feet: Vec<(f64, f64)> = fm.entries.iter().map(|e| (e.x, e.foot)).collect();
    out.svg("inverse_footprint.svg", line_plot("Footprint", "x", "foot", &[Series { label: "foot".into(), points: &feet }]))
}

#[derive(Serialize)]
struct RayReport {
    horizon: f64,
    p_left: f64,
    p_right: f64,
    rays: usize,
    crossings: usize,
    exits: usize,
    fills_gap: bool,
    extremals_cross: bool,
    first_crossings: Vec<design::RayCrossing>,
    first_exits: Vec<design::RayExit>,
}

fn rays(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let t = cfg.tmax_or(2.0);
    let (p_left, p_right) = if m.separatrix_momentum() > 0.0 {
        let (l, r) = origin_traces(m, t)?;
        if l == r {
            bail!("no shock at x = 0 by time {t}; choose a later --tmax");
        }
        (l, r)
    } else {
        // flat potential: an illustrative stationary shock 1 | -1
        (1.0, -1.0)
    };
    let fan = ray_fan(m, t, 0.0, p_left, p_right, cfg.n_or(41).max(2), 50, cfg.tol_or(1e-6), &FlowOptions::default())?;
    let header = out.header(&format!("T={t} x0=0"), "t, q, p dimensionless");
    out.csv("rays.csv", |w| fan.write_csv(&header, w))?;
    let report = RayReport {
        horizon: t,
        p_left,
        p_right,
        rays: fan.rays.len(),
        crossings: fan.crossings.len(),
        exits: fan.exits.len(),
        fills_gap: fan.fills_gap,
        extremals_cross: fan.extremals_cross(),
        first_crossings: fan.crossings.iter().take(20).copied().collect(),
        first_exits: fan.exits.iter().take(20).copied().collect(),
    };
    out.json("rays_report.json", &report)?;
    let pts: Vec<Vec<(f64, f64)>> =
        fan.rays.iter().map(|r| r.qs.iter().zip(&fan.times).map(|(&q, &s)| (q, s)).collect()).collect();
    let series: Vec<Series> = pts
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 5 == 0 || *k == pts.len() - 1)
        .map(|(k, p)| Series { label: format!("ray {k}"), points: p })
        .collect();
    out.svg("rays.svg", line_plot("Backward rays", "q", "t", &series))
}

#[derive(Serialize)]
struct NegativeControl {
    phi: TestFunction,
    k: f64,
    residual: f64,
    floor: f64,
    flagged: bool,
}

#[derive(Serialize)]
struct EntropyOutput {
    characteristic: entropy::EntropyReport,
    finite_volume: entropy::EntropyReport,
    negative_control: Option<NegativeControl>,
}

fn entropy_check(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let opts = SweepOptions { n_tests: cfg.n_or(50), seed: cfg.seed, ..Default::default() };
    let t_end = cfg.tmax_or(3.0);
    let exact = entropy::charsol_solution(m, (0.2, t_end, 280), (-2.0, 2.0, 800), &FanOptions::default())?;
    let fv = entropy::fvm_solution(m, (-4.0, 4.0, 1600), t_end, 600, cfg.cfl)?;
    let characteristic = entropy::entropy_sweep(m, &exact, &opts)?;
    let finite_volume = entropy::entropy_sweep(m, &fv, &opts)?;
    let negative_control = if m.separatrix_momentum() > 0.0 {
        let bad = entropy::reversed_shock(m, (0.0, t_end, 600), (-2.0, 2.0, 800))?;
        let phi = TestFunction::new(0.5 * t_end, 0.0, 0.5, 0.5)?;
        let residual = entropy::entropy_residual(m, &bad, &phi, 0.0)?;
        let floor = entropy::residual_floor(&bad, &phi, opts.floor_constant);
        Some(NegativeControl { phi, k: 0.0, residual, floor, flagged: residual < floor })
    } else {
        None
    };
    let header = out.header(&format!("seed={} tests={}", cfg.seed, opts.n_tests), "residual dimensionless");
    out.csv("entropy_cases.csv", |w| {
        writeln!(w, "# {header}")?;
        writeln!(w, "solution,t0,x0,rt,rx,k,residual,floor")?;
        for (name, r) in [("characteristic", &characteristic), ("finite_volume", &finite_volume)] {
            for c in &r.cases {
                writeln!(w, "{name},{},{},{},{},{},{},{}", c.phi.t0, c.phi.x0, c.phi.rt, c.phi.rx, c.k, c.residual, c.floor)?;
            }
        }
        Ok(())
    })?;
    out.json("entropy_report.json", &EntropyOutput { characteristic, finite_volume, negative_control })
}

#[derive(Serialize)]
struct AsymptoticRow {
    t: f64,
    max_error_exact: f64,
    max_error_fvm: f64,
    max_error_exact_inside_well: f64,
    max_error_fvm_inside_well: f64,
}

fn asymptotics(cfg: &RunConfig, m: &Model, out: &mut Output) -> Result<()> {
    let times = cfg.times_or(&ASYMPTOTIC_TIMES);
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let grid = Grid1D::new(-8.0, 8.0, cfg.n_or(8000))?;
    let run = evolve(m, &CellField::standard_datum(grid), t_end, cfg.cfl, &times)?;
    let xs: Vec<f64> = PROBES.iter().flat_map(|&x| [-x, x]).collect();
    let opts = shoot_opts(cfg);
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (t, field) in &run.snapshots {
        let exact = sample_profile(m, *t, &xs, &opts)?;
        let mut row = AsymptoticRow {
            t: *t,
            max_error_exact: 0.0,
            max_error_fvm: 0.0,
            max_error_exact_inside_well: 0.0,
            max_error_fvm_inside_well: 0.0,
        };
        for s in &exact {
            let (ue, uf, ua) = (s.u, field_at(field, s.x), asymptotic_profile(m, s.x));
            row.max_error_exact = row.max_error_exact.max((ue - ua).abs());
            row.max_error_fvm = row.max_error_fvm.max((uf - ua).abs());
            if s.x.abs() < m.cutoff() {
                row.max_error_exact_inside_well = row.max_error_exact_inside_well.max((ue - ua).abs());
                row.max_error_fvm_inside_well = row.max_error_fvm_inside_well.max((uf - ua).abs());
            }
            table.push((*t, s.x, ue, uf, ua));
        }
        rows.push(row);
    }
    let header = out.header(&format!("n={} cfl={}", grid.n, cfg.cfl), "t, x, u dimensionless");
    out.csv("asymptotics.csv", |w| {
        writeln!(w, "# {header}")?;
        writeln!(w, "t,x,u_exact,u_fvm,u_asymptotic")?;
        for (t, x, ue, uf, ua) in &table {
            writeln!(w, "{t},{x},{ue},{uf},{ua}")?;
        }
        Ok(())
    })?;
    out.json("asymptotics.json", &rows).context("writing asymptotics report")
}
