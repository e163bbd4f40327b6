use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lingrowth::bvtools::{BVFunction1D, Piece};
use lingrowth::discretize::io;
use lingrowth::flow::{flow_solve_with, monitor_report, write_trajectory_csv};
use lingrowth::geometry::Domain;
use lingrowth::integrand::Integrand;
use lingrowth::par::Exec;
use lingrowth::solver::{continuation_solve, SolveReport};
use lingrowth::verify::*;
use serde::Serialize;

use crate::config::{FlowConfig, RunConfig, Scenario, DEFAULT_SWEEP};
use crate::error::CliError;
use crate::manifest;

/// Everything a subcommand needs besides its own flags.
pub struct Context {
    pub config: Option<RunConfig>,
    /// Directory relative datum paths resolve against.
    pub base: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub suite: Option<String>,
    pub allow_nonconvex_demo: bool,
}

impl Context {
    fn config(&self, command: &str) -> Result<&RunConfig, CliError> {
        self.config
            .as_ref()
            .ok_or_else(|| CliError::Parse(format!("`{command}` needs --config")))
    }

    fn scenario(&self, command: &str) -> Result<Scenario, CliError> {
        self.config(command)?.scenario(&self.base)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out.join(name);
        let file =
            File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write_text(name, &(text + "\n"))
    }

    fn finish(&self, command: &str) -> Result<(), CliError> {
        let config = self.config.as_ref().map(RunConfig::to_toml);
        manifest::write(&self.out, command, self.seed, config)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct StageSummary {
    stage: usize,
    epsilon: f64,
    energy: f64,
    residual: f64,
    iterations: usize,
    backtracks: usize,
    wall_time: f64,
}

impl StageSummary {
    fn new(stage: usize, r: &SolveReport) -> Self {
        StageSummary {
            stage,
            epsilon: r.epsilon,
            energy: r.energy,
            residual: r.residual,
            iterations: r.iterations,
            backtracks: r.backtracks,
            wall_time: r.wall_time,
        }
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    domain: &'a str,
    integrand: &'a str,
    datum: &'a str,
    lambda: f64,
    cells: usize,
    spacing: f64,
    stages: Vec<StageSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jumps: Option<Vec<lingrowth::bvtools::Jump>>,
}

/// `stage,epsilon,energy,residual,iterations,backtracks`; wall time is left
/// out so the table is reproducible byte for byte.
fn write_stages_csv<W: Write>(reports: &[SolveReport], mut w: W) -> Result<(), CliError> {
    writeln!(w, "stage,epsilon,energy,residual,iterations,backtracks")?;
    for (k, r) in reports.iter().enumerate() {
        writeln!(
            w,
            "{k},{},{},{},{},{}",
            r.epsilon, r.energy, r.residual, r.iterations, r.backtracks
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Saves the best iterate of a failed solve before reporting the failure.
fn keep_best(ctx: &Context, err: lingrowth::Error) -> CliError {
    let mut source = &err;
    loop {
        match source {
            lingrowth::Error::Stage { source: s, .. }
            | lingrowth::Error::Flow { source: s, .. } => source = s,
            lingrowth::Error::NonConvergence { best } => {
                if let Ok(mut w) = ctx.create("best_iterate.csv") {
                    let _ = io::write_csv(&best.solution, &mut w);
                }
                let _ = ctx.finish("solve");
                break;
            }
            _ => break,
        }
    }
    err.into()
}

pub fn solve(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.config("solve")?;
    let s = ctx.scenario("solve")?;
    let reports = continuation_solve(&s.datum, &s.phi, config.lambda, &s.schedule)
        .map_err(|e| keep_best(ctx, e))?;
    let last = reports.last().expect("schedule has a stage");
    io::write_csv(&last.solution, ctx.create("solution.csv")?)?;
    write_stages_csv(&reports, ctx.create("stages.csv")?)?;
    let jumps = if s.grid.dim() == 1 {
        let bv = BVFunction1D::from_grid_field(&last.solution)?;
        ctx.write_text("solution_bv.json", &(bv.to_json() + "\n"))?;
        let mut w = ctx.create("jumps.csv")?;
        writeln!(w, "location,height")?;
        for j in bv.jumps() {
            writeln!(w, "{},{}", j.location, j.height)?;
        }
        w.flush()?;
        Some(bv.jumps().to_vec())
    } else {
        None
    };
    ctx.write_json(
        "report.json",
        &SolveSummary {
            domain: &config.domain,
            integrand: &config.integrand,
            datum: &config.datum,
            lambda: config.lambda,
            cells: s.grid.len(),
            spacing: s.grid.spacing(),
            stages: reports
                .iter()
                .enumerate()
                .map(|(k, r)| StageSummary::new(k, r))
                .collect(),
            jumps,
        },
    )?;
    println!(
        "solved {} cells, eps={:.3e}, energy={:.9e}, residual={:.3e}",
        s.grid.len(),
        last.epsilon,
        last.energy,
        last.residual
    );
    ctx.finish("solve")
}

pub fn flow(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.config("flow")?;
    let s = ctx.scenario("flow")?;
    let fc = config.flow.clone().unwrap_or(FlowConfig {
        t_final: 0.2,
        steps: 8,
        dump_states: false,
    });
    let traj = match flow_solve_with(
        &s.datum,
        fc.t_final,
        fc.steps,
        &s.phi,
        &s.weights,
        &s.schedule,
    ) {
        Ok(t) => t,
        Err(lingrowth::Error::Flow {
            step,
            partial,
            source,
        }) => {
            write_trajectory_csv(&partial, ctx.create("trajectory.csv")?)?;
            ctx.finish("flow")?;
            let msg = format!("flow step {step}: {source}");
            return Err(if source.is_non_convergence() {
                CliError::NonConvergence(msg)
            } else {
                CliError::from(*source)
            });
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory_csv(&traj, ctx.create("trajectory.csv")?)?;
    io::write_csv(traj.final_state(), ctx.create("final.csv")?)?;
    if fc.dump_states {
        for (k, state) in traj.states.iter().enumerate() {
            io::write_csv(state, ctx.create(&format!("state_{k:04}.csv"))?)?;
        }
    }
    let mut w = ctx.create("flow_steps.csv")?;
    writeln!(w, "step,time,epsilon,energy,residual,iterations")?;
    for (k, r) in traj.reports.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            k + 1,
            traj.times[k + 1],
            r.epsilon,
            r.energy,
            r.residual,
            r.iterations
        )?;
    }
    w.flush()?;
    let report = monitor_report(&traj);
    ctx.write_text("monitor_violations.txt", &report.violations.join("\n"))?;
    ctx.finish("flow")?;
    let convex = s.grid.domain().is_convex();
    println!(
        "flow to t={} in {} steps: {} monitor violations{}",
        fc.t_final,
        fc.steps,
        report.violations.len(),
        if convex {
            ""
        } else {
            " (non-convex domain, not asserted)"
        }
    );
    if convex && !report.pass() {
        return Err(CliError::Verification(report.violations.join("; ")));
    }
    Ok(())
}

pub const SUITES: [&str; 10] = [
    "config",
    "trace",
    "psiest",
    "dsuest",
    "flow",
    "derivative",
    "gamma",
    "recovery",
    "structure",
    "lshape-demo",
];

fn suite_rows(ctx: &Context, name: &str) -> Result<Vec<EstimateReport>, CliError> {
    let exec = Exec::default();
    let seed = ctx.seed;
    Ok(match name {
        "config" => {
            let config = ctx.config("verify --suite config")?;
            let s = ctx.scenario("verify")?;
            check_psiest(
                &s.datum,
                &s.phi,
                config.lambda,
                &s.weights,
                &s.schedule,
                ctx.allow_nonconvex_demo,
            )?
        }
        "trace" => trace_suite(8, 1000, seed, exec)?,
        "psiest" => psiest_suite(&standard_scenarios(seed), &standard_weights(), false, exec)?,
        "dsuest" => dsuest_suite(20, 256, 0.05, seed, exec)?,
        "flow" => flow_suite(256, 64, 0.3)?,
        "derivative" => derivative_bound_suite(&library_integrands(), &[0.1, 0.01], seed, exec)?,
        "gamma" => {
            let h = 1.0 / 256.0;
            gamma_suite(
                256,
                0.1,
                &lingrowth::solver::ContinuationSchedule::default_for_spacing(h),
            )?
        }
        "recovery" => recovery_suite(exec)?,
        "structure" => structure_suite(seed)?,
        "lshape-demo" => {
            if !ctx.allow_nonconvex_demo {
                return Err(CliError::Parse(
                    "domain not convex: the L-shape suite needs --allow-nonconvex-demo".into(),
                ));
            }
            lshape_demonstration().run(&standard_weights(), true)?
        }
        other => {
            return Err(CliError::Parse(format!(
                "unknown suite `{other}`; expected one of {} or all",
                SUITES.join(", ")
            )))
        }
    })
}

pub fn verify(ctx: &Context) -> Result<(), CliError> {
    let requested = ctx
        .suite
        .clone()
        .or_else(|| ctx.config.as_ref().and_then(|c| c.suite.clone()))
        .unwrap_or_else(|| {
            if ctx.config.is_some() {
                "config".into()
            } else {
                "all".into()
            }
        });
    let names: Vec<&str> = if requested == "all" {
        SUITES
            .iter()
            .copied()
            .filter(|s| *s != "config" || ctx.config.is_some())
            .filter(|s| *s != "lshape-demo" || ctx.allow_nonconvex_demo)
            .collect()
    } else {
        vec![requested.as_str()]
    };
    let mut rows = Vec::new();
    for name in names {
        let suite = suite_rows(ctx, name)?;
        let failed = suite.iter().filter(|r| !r.ok()).count();
        println!(
            "suite {name}: {} rows, {failed} failed{}",
            suite.len(),
            if suite.iter().any(|r| r.demonstration) {
                " (demonstration rows)"
            } else {
                ""
            }
        );
        rows.extend(suite);
    }
    write_reports_csv(&rows, ctx.create("reports.csv")?)?;
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    ctx.write_text("summary.txt", &text)?;
    ctx.finish("verify")?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.ok())
        .map(|r| r.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        for f in &failed {
            eprintln!("{f}");
        }
        Err(CliError::Verification(format!(
            "{} of {} rows failed",
            failed.len(),
            rows.len()
        )))
    }
}

/// `(location, low, high)` when the datum is a single interior step.
fn single_step(bv: &BVFunction1D) -> Option<(f64, f64, f64)> {
    let constant = |p: &Piece| match p {
        Piece::Polynomial { coeffs } => coeffs
            .iter()
            .skip(1)
            .all(|c| *c == 0.0)
            .then(|| coeffs.first().copied().unwrap_or(0.0)),
        Piece::Sampled { .. } => None,
    };
    match (bv.breakpoints(), bv.pieces()) {
        ([c], [left, right]) => Some((*c, constant(left)?, constant(right)?)),
        _ => None,
    }
}

fn default_sweep_config() -> RunConfig {
    RunConfig::parse("domain = \"interval(0,1)\"\nlambda = 0.1\ndatum = \"step(0.5)\"\n")
        .expect("built-in config")
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    let fallback = default_sweep_config();
    let config = ctx.config.as_ref().unwrap_or(&fallback);
    let s = config.scenario(&ctx.base)?;
    let (a, b) = match s.grid.domain() {
        Domain::Interval { a, b } => (*a, *b),
        other => {
            return Err(CliError::Parse(format!(
                "sweep needs a 1D interval, got {other}"
            )))
        }
    };
    let lambdas = config
        .sweep
        .as_ref()
        .map(|s| s.lambdas.clone())
        .unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let step = s.bv.as_ref().and_then(single_step);
    let h = s.grid.spacing();
    let phi: &Integrand = &s.phi;
    let euclidean = phi.spec_string() == Integrand::euclidean(1)?.spec_string();
    let results = Exec::default().map_tasks(lambdas.len(), |k| -> lingrowth::Result<f64> {
        let reports = continuation_solve(&s.datum, phi, lambdas[k], &s.schedule)?;
        extracted_jump(&reports.last().expect("stage").solution)
    });
    let mut w = ctx.create("sweep.csv")?;
    writeln!(w, "lambda,jump_height,expected,abs_error")?;
    let mut worst: f64 = 0.0;
    for (lambda, jump) in lambdas.iter().zip(results) {
        let jump = jump? + 0.0;
        let expected = match step {
            Some((c, low, high)) if euclidean => {
                let u = step_minimizer(a, b, c, low, high, *lambda)?;
                Some(u.jumps().iter().map(|j| j.height).sum::<f64>() + 0.0)
            }
            _ => None,
        };
        match expected {
            Some(e) => {
                worst = worst.max((jump - e).abs());
                writeln!(w, "{lambda},{jump},{e},{}", (jump - e).abs())?;
            }
            None => writeln!(w, "{lambda},{jump},,")?,
        }
    }
    w.flush()?;
    ctx.finish("sweep")?;
    let tol = 2.0 * h + 1e-3;
    println!(
        "sweep over {} values of lambda, worst deviation {worst:.3e} (tolerance {tol:.3e})",
        lambdas.len()
    );
    if worst > tol {
        return Err(CliError::Verification(format!(
            "jump heights deviate from the two-level formula by {worst:.3e}"
        )));
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Parse(format!("{}: missing column `{name}`", path.display())))
}

/// Whitespace-separated tables for gnuplot from the artifacts in `--out`.
pub fn emit_plot_data(ctx: &Context) -> Result<(), CliError> {
    let dir = &ctx.out;
    let mut written = Vec::new();

    let traj = dir.join("trajectory.csv");
    if traj.exists() {
        let (header, rows) = read_table(&traj)?;
        let t = column(&header, "time", &traj)?;
        let tv = column(&header, "gradient_term", &traj)?;
        let mut w = ctx.create("tv.dat")?;
        writeln!(w, "# t TV")?;
        for r in &rows {
            writeln!(w, "{} {}", &r[t], &r[tv])?;
        }
        w.flush()?;
        let mut w = ctx.create("monitors.dat")?;
        writeln!(w, "# {}", header.join(" "))?;
        for r in &rows {
            writeln!(w, "{}", r.iter().collect::<Vec<_>>().join(" "))?;
        }
        w.flush()?;
        written.extend(["tv.dat", "monitors.dat"]);
    }

    for (source, target) in [
        ("solution.csv", "profile.dat"),
        ("final.csv", "final_profile.dat"),
    ] {
        let path = dir.join(source);
        if !path.exists() {
            continue;
        }
        let (header, rows) = read_table(&path)?;
        let x = column(&header, "x", &path)?;
        let y = column(&header, "y", &path)?;
        let v = column(&header, "value", &path)?;
        let planar = rows.iter().any(|r| r[y] != *"0");
        let mut w = ctx.create(target)?;
        if planar {
            writeln!(w, "# x y u")?;
            for r in &rows {
                writeln!(w, "{} {} {}", &r[x], &r[y], &r[v])?;
            }
        } else {
            writeln!(w, "# x u")?;
            for r in &rows {
                writeln!(w, "{} {}", &r[x], &r[v])?;
            }
        }
        w.flush()?;
        written.push(target);
    }

    let reports = dir.join("reports.csv");
    if reports.exists() {
        let (header, rows) = read_table(&reports)?;
        let eps = column(&header, "epsilon", &reports)?;
        let slack = column(&header, "slack", &reports)?;
        let tol = column(&header, "tolerance", &reports)?;
        let pass = column(&header, "pass", &reports)?;
        let name = column(&header, "name", &reports)?;
        let mut w = ctx.create("slack.dat")?;
        writeln!(w, "# epsilon slack tolerance name")?;
        for r in rows
            .iter()
            .filter(|r| !r[eps].is_empty() && &r[pass] == "true")
        {
            writeln!(w, "{} {} {} {}", &r[eps], &r[slack], &r[tol], &r[name])?;
        }
        w.flush()?;
        written.push("slack.dat");
    }

    let sweep = dir.join("sweep.csv");
    if sweep.exists() {
        let (header, rows) = read_table(&sweep)?;
        let mut w = ctx.create("sweep.dat")?;
        writeln!(w, "# {}", header.join(" "))?;
        for r in &rows {
            let cells: Vec<&str> = r
                .iter()
                .map(|c| if c.is_empty() { "NaN" } else { c })
                .collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        w.flush()?;
        written.push("sweep.dat");
    }

    if written.is_empty() {
        return Err(CliError::Parse(format!(
            "missing artifact: {} has no trajectory.csv, solution.csv, final.csv, reports.csv or sweep.csv",
            dir.display()
        )));
    }
    let previous = manifest::read(dir).ok();
    let command = previous
        .as_ref()
        .map_or("emit-plot-data".to_string(), |m| m.command.clone());
    let config = previous.and_then(|m| m.config);
    manifest::write(dir, &command, ctx.seed, config)?;
    println!("wrote {}", written.join(", "));
    Ok(())
}
