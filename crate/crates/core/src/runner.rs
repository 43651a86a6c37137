//! Scenario execution: certify → solve → sweep → report.
//!
//! [`run_scenario`] drives one scenario end to end. Every declared curvature
//! condition is certified first; checks that depend on a certificate refuse
//! to run against a failed or missing one, and that refusal is recorded as a
//! failure with a note rather than silently skipped. Hard errors inside one
//! scenario (solver aborts, bad windows) fail that scenario without taking
//! down the rest of the run.

use std::path::Path;
use std::time::Instant;

use crate::diffusion::{feynman_kac_check, martingale_check, McCheckReport, McOptions};
use crate::flowcheck::{
    certify_flow, CertifyOptions, ConditionKind, DVariant, FlowCertificate, SampleGrid,
};
use crate::geometry::cutoff::CutoffProfile;
use crate::harnack::bounds::{
    hamilton_margins, integrated_harnack_margin, li_yau_margin, parabolic_harnack_margin,
    sharpness_defect, BoundCheckOptions, LiYauMode,
};
use crate::harnack::HarnackReport;
use crate::heat::{
    derive_fields, max_mass_drift, solve_heat, write_csv, SolveOptions, SpaceGrid, SpaceTimeField,
    TimeGrid,
};
use crate::report::{GridEchoReport, MassReport, RunReport, ScenarioReport};
use crate::scenario::{ChecksSpec, ConfigFile, LiYauModeSpec, McSpec, Scenario};
use crate::{CoreError, Result};

/// Command-line level knobs applied on top of a config.
#[derive(Clone, Copy, Debug)]
pub struct Overrides {
    /// Replaces every scenario's Monte Carlo seed.
    pub seed: Option<u64>,
    /// Multiplies every resolved margin tolerance.
    pub tolerance_scale: f64,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            seed: None,
            tolerance_scale: 1.0,
        }
    }
}

/// Run every scenario in `cfg` (optionally restricted to one by name),
/// writing a JSON report and per-scenario field CSVs into `out_dir` when
/// given.
pub fn run_config(
    cfg: &ConfigFile,
    filter: Option<&str>,
    out_dir: Option<&Path>,
    ov: &Overrides,
) -> Result<RunReport> {
    let selected: Vec<&Scenario> = cfg
        .scenarios
        .iter()
        .filter(|sc| filter.is_none_or(|f| sc.name == f))
        .collect();
    if selected.is_empty() {
        return Err(CoreError::Config(format!(
            "no scenario named '{}' (available: {})",
            filter.unwrap_or(""),
            cfg.scenarios
                .iter()
                .map(|s| s.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut reports = Vec::with_capacity(selected.len());
    for sc in selected {
        match run_scenario_with_field(sc, ov) {
            Ok((rep, field)) => {
                if let Some(dir) = out_dir {
                    let stride_t = (field.n_t() / 100).max(1);
                    let stride_x = (field.n_x() / 400).max(1);
                    write_csv(
                        &field,
                        &dir.join(format!("{}.csv", sc.name)),
                        stride_t,
                        stride_x,
                    )?;
                }
                reports.push(rep);
            }
            Err(e) => reports.push(aborted_report(&sc.name, &e)),
        }
    }
    let run = RunReport::new(reports);
    if let Some(dir) = out_dir {
        run.write_json(&dir.join("report.json"))?;
    }
    Ok(run)
}

pub fn run_scenario(sc: &Scenario, ov: &Overrides) -> Result<ScenarioReport> {
    run_scenario_with_field(sc, ov).map(|(rep, _)| rep)
}

/// Build and solve a scenario's flow without certifying or sweeping anything
/// (for field export).
pub fn solve_scenario(sc: &Scenario) -> Result<SpaceTimeField> {
    let family = sc.geometry.build()?;
    let pot = sc.potential.build(&family)?;
    let space = SpaceGrid::from_chart(&family.chart, sc.grid.n_x)?;
    let time = TimeGrid::new(sc.grid.t0, sc.grid.t1, sc.grid.n_steps)?;
    let u0 = sc.solve.initial.sample(&family.chart, &space.xs)?;
    let solve_opts = SolveOptions {
        scheme: sc.solve.scheme.to_scheme(),
        flux_tolerance: sc.solve.flux_tolerance.unwrap_or(f64::INFINITY),
    };
    solve_heat(&family, &pot, &space, &time, &u0, &solve_opts)
}

/// Cap the global worker-thread count used by path ensembles. Must be called
/// before any parallel work starts; a second call fails.
pub fn configure_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CoreError::Config(format!("could not size the thread pool: {e}")))
}

fn aborted_report(name: &str, err: &CoreError) -> ScenarioReport {
    ScenarioReport {
        name: name.to_string(),
        passed: false,
        tolerance: f64::NAN,
        grid: GridEchoReport {
            n_x: 0,
            n_steps: 0,
            dx: 0.0,
            dt: 0.0,
            t0: 0.0,
            t1: 0.0,
        },
        certificates: Vec::new(),
        checks: Vec::new(),
        mc_checks: Vec::new(),
        mass: None,
        notes: vec![format!("aborted: {err}")],
        runtime_ms: 0,
    }
}

pub fn run_scenario_with_field(
    sc: &Scenario,
    ov: &Overrides,
) -> Result<(ScenarioReport, SpaceTimeField)> {
    let started = Instant::now();
    let family = sc.geometry.build()?;
    let pot = sc.potential.build(&family)?;
    let params = sc.flow.params()?;
    params.validate(family.dim_n())?;

    let gs = &sc.grid;
    let space = SpaceGrid::from_chart(&family.chart, gs.n_x)?;
    let time = TimeGrid::new(gs.t0, gs.t1, gs.n_steps)?;
    let (dx, dt) = (space.dx, time.dt());
    let tolerance = sc.checks.resolve_tolerance(dx, dt) * ov.tolerance_scale;

    let mut notes: Vec<String> = Vec::new();
    let mut passed = true;

    // 1. certificates (threshold −k throughout)
    let cert_grid = SampleGrid::from_axis(
        &family.chart,
        gs.t0,
        gs.t1,
        gs.cert_times,
        gs.cert_points,
        gs.inset,
    )?;
    let mut certificates: Vec<FlowCertificate> = Vec::new();
    for &kind in &sc.flow.conditions {
        let cert = certify_flow(
            &family,
            &pot,
            &params,
            kind,
            -params.k,
            &cert_grid,
            &CertifyOptions::default(),
        )?;
        if !cert.passed {
            passed = false;
            notes.push(format!(
                "condition {kind} fails at level {}: min margin {:.3e} at (t={:.3}, x={:?})",
                -params.k, cert.min_margin, cert.margin_t, cert.margin_x
            ));
        }
        certificates.push(cert);
    }
    let find_cert = |kind: ConditionKind| certificates.iter().find(|c| c.condition == kind);

    // 2. solve
    let u0 = sc.solve.initial.sample(&family.chart, &space.xs)?;
    let solve_opts = SolveOptions {
        scheme: sc.solve.scheme.to_scheme(),
        flux_tolerance: sc.solve.flux_tolerance.unwrap_or(f64::INFINITY),
    };
    let field = solve_heat(&family, &pot, &space, &time, &u0, &solve_opts)?;

    // 3. margin sweeps
    let ck = &sc.checks;
    let time_origin = ck.time_origin.unwrap_or(gs.t0);
    let span = gs.t1 - gs.t0;
    let t_min = ck.t_min.unwrap_or((0.05 * span).max(2.0 * dt));
    let opts = BoundCheckOptions {
        tolerance,
        t_min,
        time_origin,
        ..BoundCheckOptions::default()
    };

    let mut checks: Vec<HarnackReport> = Vec::new();
    let record = |label: &str,
                  result: Result<Vec<HarnackReport>>,
                  checks: &mut Vec<HarnackReport>,
                  notes: &mut Vec<String>,
                  passed: &mut bool| {
        match result {
            Ok(reports) => {
                for r in reports {
                    if !r.passed {
                        *passed = false;
                    }
                    checks.push(r);
                }
            }
            Err(e) => {
                *passed = false;
                notes.push(format!("{label} did not run: {e}"));
            }
        }
    };

    let derived = if ck.hamilton || ck.li_yau.is_some() {
        Some(derive_fields(&family, &field, params.alpha)?)
    } else {
        None
    };

    if ck.hamilton {
        let res = find_cert(ConditionKind::SuperPerelman)
            .ok_or_else(|| {
                CoreError::Certificate("gradient bounds need a certified h + Ric(L) ≥ −K·g".into())
            })
            .and_then(|cert| {
                hamilton_margins(&field, derived.as_ref().unwrap(), cert, params.k, &opts)
            })
            .map(|(sharp, additive)| vec![sharp, additive]);
        record("gradient bound", res, &mut checks, &mut notes, &mut passed);
    }

    if let Some(n_pairs) = ck.integrated_pairs {
        let res = find_cert(ConditionKind::SuperPerelman)
            .ok_or_else(|| {
                CoreError::Certificate(
                    "the integrated two-point bound needs a certified h + Ric(L) ≥ −K·g".into(),
                )
            })
            .and_then(|cert| {
                integrated_harnack_margin(
                    &family,
                    &field,
                    cert,
                    params.k,
                    params.delta,
                    n_pairs,
                    &opts,
                )
            })
            .map(|r| vec![r]);
        record(
            "integrated two-point bound",
            res,
            &mut checks,
            &mut notes,
            &mut passed,
        );
    }

    let standard_cutoff = CutoffProfile::standard();
    if let Some(ly) = &ck.li_yau {
        let (mode, cutoff) = match ly.mode {
            LiYauModeSpec::Compact => (LiYauMode::Compact, None),
            LiYauModeSpec::Complete => (LiYauMode::Complete, Some(&standard_cutoff)),
            LiYauModeSpec::Local { center, radius } => {
                (LiYauMode::Local { center, radius }, Some(&standard_cutoff))
            }
        };
        let res = find_cert(ConditionKind::VariantAlpha)
            .ok_or_else(|| {
                CoreError::Certificate(
                    "the dimensional gradient estimate needs a certified (1−α)h + Ric_m ≥ −K·g"
                        .into(),
                )
            })
            .and_then(|cert| {
                li_yau_margin(
                    &family,
                    &field,
                    derived.as_ref().unwrap(),
                    cert,
                    &params,
                    cutoff,
                    mode,
                    ly.d_variant,
                    &opts,
                )
            })
            .map(|r| vec![r]);
        record(
            "dimensional gradient estimate",
            res,
            &mut checks,
            &mut notes,
            &mut passed,
        );
    }

    if let Some(n_pairs) = ck.parabolic_pairs {
        let res = find_cert(ConditionKind::VariantAlpha)
            .ok_or_else(|| {
                CoreError::Certificate(
                    "the two-point parabolic bound needs a certified (1−α)h + Ric_m ≥ −K·g".into(),
                )
            })
            .and_then(|cert| {
                parabolic_harnack_margin(
                    &family,
                    &field,
                    cert,
                    &params,
                    &standard_cutoff,
                    n_pairs,
                    DVariant::Compact,
                    &opts,
                )
            })
            .map(|r| vec![r]);
        record(
            "two-point parabolic bound",
            res,
            &mut checks,
            &mut notes,
            &mut passed,
        );
    }

    if let Some(sh) = &ck.sharpness {
        let res = derive_fields(&family, &field, 1.0).and_then(|d1| {
            let sharp_opts = BoundCheckOptions {
                tolerance: sh.rel_tolerance,
                ..opts
            };
            sharpness_defect(&field, &d1, sh.m, (sh.window[0], sh.window[1]), &sharp_opts)
                .map(|r| vec![r])
        });
        record(
            "saturation defect",
            res,
            &mut checks,
            &mut notes,
            &mut passed,
        );
    }

    // 4. weighted-mass drift
    let mass = match ck.mass_drift_per_step {
        Some(tol) => {
            let drift = max_mass_drift(&family, &pot, &field)?;
            let ok = drift <= tol;
            if !ok {
                passed = false;
            }
            Some(MassReport {
                max_drift_per_step: drift,
                tolerance: tol,
                passed: ok,
            })
        }
        None => None,
    };

    // 5. Monte Carlo cross-checks
    let mut mc_checks: Vec<McCheckReport> = Vec::new();
    if let Some(mc) = &sc.mc {
        let mco = mc_options(mc, ov);
        for &x in &mc.feynman_kac_points {
            match feynman_kac_check(&family, &pot, &field, x, mc.bias_coeff, &mco) {
                Ok(rep) => {
                    if !rep.passed {
                        passed = false;
                    }
                    mc_checks.push(rep);
                }
                Err(e) => {
                    passed = false;
                    notes.push(format!("path-sample check at x={x} did not run: {e}"));
                }
            }
        }
        if let Some(ncp) = mc.martingale_checkpoints {
            let x = mc
                .martingale_point
                .or_else(|| mc.feynman_kac_points.first().copied())
                .ok_or_else(|| {
                    CoreError::Config(
                        "martingale check needs martingale_point or a feynman_kac point".into(),
                    )
                })?;
            match martingale_check(&family, &pot, &field, x, ncp, mc.bias_coeff, &mco) {
                Ok(reps) => {
                    for rep in reps {
                        if !rep.passed {
                            passed = false;
                        }
                        mc_checks.push(rep);
                    }
                }
                Err(e) => {
                    passed = false;
                    notes.push(format!("martingale check did not run: {e}"));
                }
            }
        }
    }

    let report = ScenarioReport {
        name: sc.name.clone(),
        passed,
        tolerance,
        grid: GridEchoReport {
            n_x: gs.n_x,
            n_steps: gs.n_steps,
            dx,
            dt,
            t0: gs.t0,
            t1: gs.t1,
        },
        certificates,
        checks,
        mc_checks,
        mass,
        notes,
        runtime_ms: started.elapsed().as_millis(),
    };
    Ok((report, field))
}

fn mc_options(mc: &McSpec, ov: &Overrides) -> McOptions {
    McOptions {
        n_paths: mc.n_paths,
        n_steps: mc.n_steps,
        seed: ov.seed.unwrap_or(mc.seed),
    }
}

/// Tolerance resolution used by [`run_scenario_with_field`], exposed for
/// callers that pre-compute grids.
pub fn resolved_tolerance(checks: &ChecksSpec, dx: f64, dt: f64, ov: &Overrides) -> f64 {
    checks.resolve_tolerance(dx, dt) * ov.tolerance_scale
}

// ---------------------------------------------------------------------------
// bundled scenarios
// ---------------------------------------------------------------------------

/// Six ready-made scenarios covering every check the lab implements: an
/// exactly saturating kernel, a weighted static circle with path sampling, a
/// confining well on a line window, both orientations of the round-sphere
/// scaling flow, and a moving metric whose weighted volume is engineered to
/// be time-independent.
pub const BUNDLED_SCENARIOS: &str = r#"
schema_version = 1

[[scenario]]
name = "gaussian_kernel_sharpness"
description = "Flat-line heat kernel: the dimensional gradient functional saturates m/2 and gradient bounds hold with the log-spread slack."

[scenario.geometry]
preset = "static_flat"
chart = { kind = "line", x_min = -8.0, x_max = 8.0 }

[scenario.flow]
k = 0.0
m = 1.0
alpha = 1.0
conditions = ["super_perelman"]

[scenario.grid]
n_x = 2401
n_steps = 900
t0 = 0.1
t1 = 1.0

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "fundamental", sigma = 0.1, center = 0.0 }
flux_tolerance = 1e-6

[scenario.checks]
tol_coeff = 10.0
time_origin = 0.0
t_min = 0.5
hamilton = true
sharpness = { m = 1.0, window = [-3.0, 3.0], rel_tolerance = 1e-3 }

[[scenario]]
name = "static_circle_cosine"
description = "Cosine-weighted circle: curvature level K = 0.4 certified, gradient and two-point bounds swept, backward path sampling cross-checked."

[scenario.geometry]
preset = "static_flat"
chart = { kind = "circle", period = 6.283185307179586 }

[scenario.potential]
preset = "cosine"
amplitude = 0.4

[scenario.flow]
k = 0.4
m = "infinite"
alpha = 1.0
conditions = ["super_perelman"]

[scenario.grid]
n_x = 256
n_steps = 300
t1 = 1.5

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "cosine_bump", amplitude = 0.5 }

[scenario.checks]
tol_coeff = 10.0
hamilton = true
integrated_pairs = 64
mass_drift_per_step = 1e-8

[scenario.mc]
n_paths = 20000
n_steps = 300
seed = 20202
feynman_kac_points = [0.0, 3.141592653589793]
martingale_checkpoints = 4

[[scenario]]
name = "ou_line_confined"
description = "Quadratic well on a truncated line: a strictly positive curvature certificate, gradient bounds, and confined path sampling."

[scenario.geometry]
preset = "static_flat"
chart = { kind = "line", x_min = -6.0, x_max = 6.0 }

[scenario.potential]
preset = "quadratic"
strength = 1.0

[scenario.flow]
k = 0.0
m = "infinite"
alpha = 1.0
conditions = ["super_perelman"]

[scenario.grid]
n_x = 600
n_steps = 300
t1 = 1.5

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "cosine_bump", amplitude = 0.3 }
flux_tolerance = 1e-6

[scenario.checks]
tol_coeff = 10.0
hamilton = true

[scenario.mc]
n_paths = 20000
n_steps = 300
seed = 30303
feynman_kac_points = [0.5]

[[scenario]]
name = "shrinking_sphere_flow"
description = "Round sphere shrinking at its natural rate: both curvature conditions hold at level 0; dimensional and two-point parabolic bounds swept at alpha = 2."

[scenario.geometry]
preset = "ricci_flow_sphere"
dim_n = 2
radius = 1.0

[scenario.flow]
k = 0.0
m = 4.0
alpha = 2.0
gamma = 1.0
conditions = ["super_perelman", "variant_alpha"]

[scenario.grid]
n_x = 160
n_steps = 200
t1 = 0.2

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "cosine_bump", amplitude = 0.3 }

[scenario.checks]
tolerance = 1e-4
t_min = 0.05
hamilton = true
li_yau = { mode = { kind = "compact" }, d_variant = "compact" }
parabolic_pairs = 50

[[scenario]]
name = "expanding_sphere_flow"
description = "Round sphere expanding at the reversed rate: a strict super flow whose alpha-condition degenerates to exact equality at level 0 for alpha = 2."

[scenario.geometry]
preset = "backward_ricci_flow_sphere"
dim_n = 2
radius = 1.0

[scenario.flow]
k = 0.0
m = 4.0
alpha = 2.0
gamma = 1.0
conditions = ["super_perelman", "super_perelman_m", "variant_alpha"]

[scenario.grid]
n_x = 160
n_steps = 200
t1 = 0.3

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "cosine_bump", amplitude = 0.3 }

[scenario.checks]
tolerance = 1e-4
t_min = 0.05
hamilton = true
li_yau = { mode = { kind = "compact" }, d_variant = "complete" }

[[scenario]]
name = "conformal_circle_mass"
description = "Exponentially expanding circle with a drifting cosine weight tuned so the weighted volume is time-independent: discrete mass must not drift."

[scenario.geometry]
preset = "conformal_exponential"
chart = { kind = "circle", period = 6.283185307179586 }
rate = 0.5

[scenario.potential]
preset = "cosine"
amplitude = 0.4
time_slope = 0.5

[scenario.flow]
k = 0.0
m = "infinite"
alpha = 1.0
conditions = ["super_perelman"]

[scenario.grid]
n_x = 200
n_steps = 400
t1 = 1.0

[scenario.solve]
scheme = "crank_nicolson"
initial = { kind = "cosine_bump", amplitude = 0.5 }

[scenario.checks]
tol_coeff = 10.0
hamilton = true
mass_drift_per_step = 1e-8
"#;

pub fn bundled_config() -> Result<ConfigFile> {
    ConfigFile::parse(BUNDLED_SCENARIOS)
}
