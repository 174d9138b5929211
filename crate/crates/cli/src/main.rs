use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;
use trijunction::connection::minimize_connection;
use trijunction::diagnose::SliceThresholds;
use trijunction::par;
use trijunction::solve::SolveConfig;
use trijunction_cli::commands::*;
use trijunction_cli::config::{parse_floats, parse_points, PotentialKind};
use trijunction_cli::pipeline::default_ladder;
use trijunction_cli::{CliError, CliResult, Pipeline};

#[derive(Parser)]
#[command(name = "trijunction", version, about = "Triple-junction minimizers of a three-well energy on large disks")]
struct Cli {
    /// Scale of the canonical potential.
    #[arg(long, global = true, default_value_t = 1.0)]
    scale: f64,
    /// Wells `x1,y1 x2,y2 x3,y3` of a custom product potential.
    #[arg(long, global = true)]
    wells: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the stages listed in a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Certify the potential constants.
    Certify,
    /// Minimizing 1D connection between two wells.
    Connect {
        #[arg(long, default_value = "12")]
        pair: String,
        #[arg(long = "L", default_value_t = 20.0)]
        l: f64,
        #[arg(long, default_value_t = 4001)]
        n: usize,
        /// Profile CSV (eta,u1,u2).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fermat point and triod of three points.
    Fermat {
        /// `"x1,y1 x2,y2 x3,y3"`
        #[arg(long)]
        points: String,
    },
    /// Minimizer of the slice lower-bound function.
    Ystar {
        /// `"yA,yB,yC,xB,xC"`
        #[arg(long)]
        params: String,
    },
    /// Minimize the energy on a disk with triple-junction boundary data.
    Solve {
        #[command(flatten)]
        geo: Geometry,
        #[arg(long, default_value = "triple")]
        seed: String,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value = "lbfgs")]
        step: String,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
        /// Convergence log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Build a competitor field.
    Competitor {
        #[command(flatten)]
        geo: Geometry,
        #[arg(long, default_value = "triple")]
        kind: String,
        #[arg(long, default_value = "competitor.csv")]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Diagnostics on a field file.
    Diagnose {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "phases")]
        what: String,
        /// Comma-separated radii for `blowdown` (default 16, 32, … up to R).
        #[arg(long)]
        ladder: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        gamma: f64,
        /// Interface point cloud CSV (for `interface`).
        #[arg(long)]
        points_out: Option<PathBuf>,
        #[arg(long)]
        slice_amplitude: Option<f64>,
        #[arg(long)]
        slice_slack: Option<f64>,
    },
}

#[derive(clap::Args)]
struct Geometry {
    #[arg(long = "R", default_value_t = 32.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.125)]
    h: f64,
    /// Arc lengths I_1, I_2, I_3 in degrees.
    #[arg(long, default_value = "120,120,120")]
    arcs: String,
    /// Angle of the anchor A in degrees.
    #[arg(long, default_value_t = 90.0)]
    start: f64,
    /// Arclength of the boundary transitions.
    #[arg(long, default_value_t = 12.0)]
    width: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Half-length of the 1D connections.
    #[arg(long = "L", default_value_t = 20.0)]
    l: f64,
    #[arg(long, default_value_t = 4001)]
    n: usize,
}

impl Geometry {
    fn arcs(&self) -> CliResult<[f64; 3]> {
        <[f64; 3]>::try_from(parse_floats(&self.arcs)?).map_err(|_| CliError::Usage("--arcs needs three values".into()))
    }
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn run(cli: Cli) -> CliResult<bool> {
    let kind = match &cli.wells {
        Some(w) => PotentialKind::Custom(parse_points(w)?),
        None => PotentialKind::Canonical,
    };
    let potential = || build_potential(&kind, cli.scale);
    match cli.cmd {
        Cmd::Run { config, quiet } => {
            let mut p = Pipeline::from_file(&config)?;
            p.verbose = !quiet;
            let m = p.run()?;
            for c in &m.checks {
                let value = c.value.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
                eprintln!("{} {}/{}: {value} ({})", if c.passed { "PASS" } else { "FAIL" }, c.stage, c.name, c.threshold);
            }
            println!("{}", p.dir.join("manifest.json").display());
            Ok(m.passed)
        }
        Cmd::Certify => {
            let (_, report) = potential()?;
            print(&serde_json::to_value(&report)?);
            Ok(report.certified)
        }
        Cmd::Connect { pair, l, n, out } => {
            let (ws, _) = potential()?;
            let (i, j) = parse_pair(&pair)?;
            let p = minimize_connection(&ws, i, j, l, n)?;
            if let Some(out) = out {
                write_profile_csv(&p, &out)?;
            }
            print(&serde_json::to_value(connect_summary(&p))?);
            Ok(true)
        }
        Cmd::Fermat { points } => {
            print(&fermat_json(parse_points(&points)?)?);
            Ok(true)
        }
        Cmd::Ystar { params } => {
            print(&ystar_json(&parse_floats(&params)?)?);
            Ok(true)
        }
        Cmd::Solve { geo, seed, tol, max_iter, step, out, log } => {
            let (ws, _) = potential()?;
            let profiles = all_profiles(&ws, geo.l, geo.n)?;
            let s = setup(&ws, &profiles, geo.radius, geo.h, geo.arcs()?, geo.start, geo.width)?;
            let cfg = SolveConfig {
                tol_gradient: tol,
                max_iter,
                step_rule: step.parse()?,
                seed_kind: seed.parse()?,
                ..SolveConfig::new(geo.radius, geo.h)
            };
            let seed = seed_field(cfg.seed_kind, &ws, &profiles, &s, geo.alpha)?;
            let res = run_solve(&cfg, &ws, &s, seed)?;
            write_field(&res.field, &out)?;
            if let Some(log) = log {
                write_log(&res, &log)?;
            }
            print(&serde_json::to_value(res.summary(&cfg))?);
            Ok(res.converged)
        }
        Cmd::Competitor { geo, kind, out, report } => {
            let (ws, _) = potential()?;
            let profiles = all_profiles(&ws, geo.l, geo.n)?;
            let s = setup(&ws, &profiles, geo.radius, geo.h, geo.arcs()?, geo.start, geo.width)?;
            let rep = build_competitor(&kind, &ws, &profiles, &s, geo.alpha)?;
            write_field(&rep.field, &out)?;
            let v = serde_json::to_value(rep.summary())?;
            if let Some(path) = report {
                write_json(&v, &path)?;
            }
            print(&v);
            Ok(true)
        }
        Cmd::Diagnose { field, what, ladder, delta, gamma, points_out, slice_amplitude, slice_slack } => {
            let (ws, _) = potential()?;
            let f = read_field(&field)?;
            let v = match what.as_str() {
                "phases" => serde_json::to_value(diagnose_phases(&f, &ws, delta)?)?,
                "interface" => {
                    let rep = diagnose_interface(&f, &ws, delta, gamma)?;
                    if let Some(p) = points_out {
                        write_points_csv(&rep.points, &p)?;
                    }
                    let mut v = serde_json::to_value(&rep)?;
                    if let Some(obj) = v.as_object_mut() {
                        obj.insert("pointCount".into(), json!(rep.points.len()));
                        obj.remove("points");
                    }
                    v
                }
                "slices" => {
                    let th = SliceThresholds { amplitude: slice_amplitude, slack: slice_slack, margin: None };
                    serde_json::to_value(diagnose_slices(&f, &ws, delta, th)?.0)?
                }
                "blowdown" => {
                    let ladder = match ladder {
                        Some(l) => parse_floats(&l)?,
                        None => default_ladder(f.radius()),
                    };
                    serde_json::to_value(diagnose_blowdown(&f, &ws, &ladder, delta, gamma)?)?
                }
                other => return Err(CliError::Usage(format!("unknown diagnostic '{other}'"))),
            };
            print(&v);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    par::init_from_env();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
