//! `trijunction run <config>`: staged, resumable experiment runs.
//!
//! Layout under `<out>/<runId>/`:
//!
//! ```text
//! manifest.json          RunManifest
//! config.ini             copy of the config
//! stages/<stage>.json    StageRecord (input hash, artifacts, checks, report)
//! certify/report.json
//! connect/profile_<ij>.csv, profile_<ij>.json, summary.json
//! competitor/<kind>.csv, <kind>.json
//! solve/field.csv, log.jsonl, summary.json
//! diagnose/phases.json, interface.json, interface_points.csv, slices.json,
//!          probes.json, sandwich.json
//! blowdown/blowdown.json
//! ```

use crate::commands::*;
use crate::config::{sha256_hex, Config, Stage};
use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use trijunction::connection::Profile1D;
use trijunction::construct::Profiles;
use trijunction::diagnose::{diffuse_interface, lower_bound_for, sector_region, SliceThresholds};
use trijunction::field::Field2D;
use trijunction::par;
use trijunction::potential::WellSystem;
use trijunction::solve::{local_minimality_probe, maximum_principle_check, SolveConfig};

/// One acceptance-tagged check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub passed: bool,
    /// Measured value; `None` when it is not a finite number.
    pub value: Option<f64>,
    pub threshold: String,
    pub units: String,
}

impl Check {
    fn new(stage: Stage, name: &str, passed: bool, value: f64, threshold: impl Into<String>, units: &str) -> Check {
        Check {
            stage: stage.name().into(),
            name: name.into(),
            passed,
            value: value.is_finite().then_some(value),
            threshold: threshold.into(),
            units: units.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    #[serde(rename = "inputHash")]
    pub input_hash: String,
    /// Paths relative to the run directory.
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
    pub report: Value,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(rename = "runId")]
    pub run_id: String,
    pub timestamp: String,
    #[serde(rename = "configHash")]
    pub config_hash: String,
    pub workers: usize,
    pub potential: Value,
    /// `σ_12, σ_13, σ_23` (energy per unit length).
    pub sigma: BTreeMap<String, f64>,
    pub artifacts: BTreeMap<String, Vec<String>>,
    pub checks: Vec<Check>,
    /// Stages reused from a previous run with unchanged inputs.
    pub skipped: Vec<String>,
    pub passed: bool,
    pub notes: Vec<String>,
}

struct State {
    ws: Option<WellSystem>,
    profiles: Option<Profiles>,
    field: Option<Field2D>,
    solved_energy: Option<f64>,
    hashes: BTreeMap<Stage, String>,
}

pub struct Pipeline {
    pub config: Config,
    pub config_text: String,
    pub dir: PathBuf,
    /// Progress messages go here (stderr in the binary).
    pub verbose: bool,
}

impl Pipeline {
    pub fn from_file(path: &Path) -> CliResult<Pipeline> {
        let text = fs::read_to_string(path)?;
        let config = Config::parse(&text)?;
        let base = if config.out_dir.is_relative() {
            path.parent().unwrap_or(Path::new(".")).join(&config.out_dir)
        } else {
            config.out_dir.clone()
        };
        let dir = base.join(config.resolved_run_id());
        Ok(Pipeline { config, config_text: text, dir, verbose: false })
    }

    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn stage_hash(&self, stage: Stage, st: &State) -> String {
        let mut text = format!("stage={}\n", stage.name());
        text.push_str(&self.config.canonical_text(Some(stage.sections())));
        for d in stage.dependencies() {
            text.push_str(&format!("dep:{}={}\n", d.name(), st.hashes.get(d).cloned().unwrap_or_default()));
        }
        sha256_hex(text.as_bytes())
    }

    fn record_path(&self, stage: Stage) -> PathBuf {
        self.dir.join("stages").join(format!("{}.json", stage.name()))
    }

    /// A previous record with the same input hash whose artifacts all exist.
    fn reusable(&self, stage: Stage, hash: &str) -> Option<StageRecord> {
        let text = fs::read_to_string(self.record_path(stage)).ok()?;
        let rec: StageRecord = serde_json::from_str(&text).ok()?;
        (rec.input_hash == hash && rec.artifacts.iter().all(|a| self.dir.join(a).is_file())).then_some(rec)
    }

    pub fn run(&self) -> CliResult<RunManifest> {
        let workers = par::init_from_env();
        for st in Stage::ALL {
            fs::create_dir_all(self.dir.join(st.name()))?;
        }
        fs::create_dir_all(self.dir.join("stages"))?;
        fs::write(self.dir.join("config.ini"), &self.config_text)?;
        let mut state = State { ws: None, profiles: None, field: None, solved_energy: None, hashes: BTreeMap::new() };
        let mut manifest = RunManifest {
            run_id: self.config.resolved_run_id(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            config_hash: self.config.hash(),
            workers,
            potential: Value::Null,
            sigma: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            checks: Vec::new(),
            skipped: Vec::new(),
            passed: true,
            notes: vec![
                "primed anchors for the slice lower bound are taken on |z| = R + h".into(),
            ],
        };
        for stage in Stage::ALL {
            if !self.config.has(stage) {
                continue;
            }
            let hash = self.stage_hash(stage, &state);
            state.hashes.insert(stage, hash.clone());
            let rec = match self.reusable(stage, &hash) {
                Some(rec) => {
                    self.log(&format!("[{stage}] inputs unchanged, reusing artifacts"));
                    self.load(stage, &rec, &mut state)?;
                    manifest.skipped.push(stage.name().into());
                    rec
                }
                None => {
                    self.log(&format!("[{stage}] running"));
                    let t = Instant::now();
                    let (artifacts, checks, report) = self.execute(stage, &mut state)?;
                    let rec = StageRecord {
                        stage: stage.name().into(),
                        input_hash: hash,
                        artifacts,
                        checks,
                        report,
                        seconds: t.elapsed().as_secs_f64(),
                    };
                    write_json(&rec, &self.record_path(stage))?;
                    rec
                }
            };
            match stage {
                Stage::Certify => manifest.potential = rec.report.clone(),
                Stage::Connect => {
                    if let Some(obj) = rec.report.get("sigma").and_then(Value::as_object) {
                        for (k, v) in obj {
                            manifest.sigma.insert(k.clone(), v.as_f64().unwrap_or(f64::NAN));
                        }
                    }
                }
                _ => {}
            }
            let mut arts = rec.artifacts.clone();
            arts.push(format!("stages/{}.json", stage.name()));
            manifest.artifacts.insert(stage.name().into(), arts);
            manifest.checks.extend(rec.checks.iter().cloned());
        }
        manifest.passed = manifest.checks.iter().all(|c| c.passed);
        write_json(&manifest, &self.dir.join("manifest.json"))?;
        Ok(manifest)
    }

    fn ws(&self, st: &State) -> CliResult<WellSystem> {
        st.ws.clone().ok_or_else(|| CliError::Config("potential not available".into()))
    }

    fn setup(&self, ws: &WellSystem, st: &State) -> CliResult<Setup> {
        let c = &self.config;
        let profiles = st.profiles.as_ref().ok_or_else(|| CliError::Config("profiles not available".into()))?;
        setup(ws, profiles, c.radius, c.h, c.arcs, c.start_deg, c.width)
    }

    fn solve_config(&self) -> CliResult<SolveConfig> {
        let c = &self.config;
        Ok(SolveConfig {
            tol_gradient: c.tol,
            max_iter: c.max_iter,
            step_rule: c.step.parse()?,
            seed_kind: c.seed.parse()?,
            ..SolveConfig::new(c.radius, c.h)
        })
    }

    /// Restores the in-memory products of a reused stage.
    fn load(&self, stage: Stage, rec: &StageRecord, st: &mut State) -> CliResult<()> {
        match stage {
            // Certification is cheap and deterministic; re-derive the constants.
            Stage::Certify => st.ws = Some(build_potential(&self.config.potential, self.config.scale)?.0),
            Stage::Connect => {
                let load = |name: &str| -> CliResult<Profile1D> {
                    let text = fs::read_to_string(self.dir.join("connect").join(format!("profile_{name}.json")))?;
                    Ok(serde_json::from_str(&text)?)
                };
                st.profiles = Some(Profiles::new(load("12")?, load("13")?, load("23")?)?);
            }
            Stage::Solve => {
                st.field = Some(read_field(&self.dir.join("solve/field.csv"))?);
                st.solved_energy = rec.report.get("energy").and_then(Value::as_f64);
            }
            Stage::Competitor | Stage::Diagnose | Stage::Blowdown => {}
        }
        Ok(())
    }

    fn execute(&self, stage: Stage, st: &mut State) -> CliResult<(Vec<String>, Vec<Check>, Value)> {
        let c = &self.config;
        let mut arts = Vec::new();
        let mut checks = Vec::new();
        let report = match stage {
            Stage::Certify => {
                let (ws, report) = build_potential(&c.potential, c.scale)?;
                write_json(&report, &self.dir.join("certify/report.json"))?;
                arts.push("certify/report.json".into());
                checks.push(Check::new(stage, "certified", report.certified, report.violations.len() as f64, "0 violations", "count"));
                st.ws = Some(ws);
                serde_json::to_value(&report)?
            }
            Stage::Connect => {
                let ws = self.ws(st)?;
                let profiles = all_profiles(&ws, c.connect_length, c.connect_n)?;
                let mut summaries = Vec::new();
                let mut sig = serde_json::Map::new();
                for p in profiles.0.iter() {
                    let s = connect_summary(p);
                    let csv = format!("connect/profile_{}.csv", s.pair);
                    let js = format!("connect/profile_{}.json", s.pair);
                    write_profile_csv(p, &self.dir.join(&csv))?;
                    write_json(p.as_ref(), &self.dir.join(&js))?;
                    arts.push(csv);
                    arts.push(js);
                    sig.insert(s.pair.clone(), json!(s.sigma));
                    summaries.push(s);
                }
                let sigmas: Vec<f64> = summaries.iter().map(|s| s.sigma).collect();
                let smax = sigmas.iter().cloned().fold(f64::MIN, f64::max);
                let smin = sigmas.iter().cloned().fold(f64::MAX, f64::min);
                let spread = (smax - smin) / smin;
                checks.push(Check::new(stage, "sigma_equal", spread <= 1e-3, spread, "<= 1e-3", "relative"));
                let eq = summaries.iter().map(|s| s.equipartition_defect / s.sigma).fold(0.0, f64::max);
                checks.push(Check::new(stage, "equipartition", eq <= 1e-3, eq, "<= 1e-3", "relative to sigma"));
                let fit = summaries.iter().map(|s| s.fit_residual).fold(0.0, f64::max);
                checks.push(Check::new(stage, "decay_fit", fit < 0.05, fit, "< 0.05", "relative residual"));
                let report = json!({ "sigma": sig, "profiles": summaries, "sigmaUnits": "energy per unit length" });
                write_json(&report, &self.dir.join("connect/summary.json"))?;
                arts.push("connect/summary.json".into());
                st.profiles = Some(profiles);
                report
            }
            Stage::Competitor => {
                let ws = self.ws(st)?;
                let s = self.setup(&ws, st)?;
                let profiles = st.profiles.as_ref().unwrap();
                let mut out = serde_json::Map::new();
                for kind in &c.competitor_kinds {
                    let rep = build_competitor(kind, &ws, profiles, &s, c.alpha)?;
                    let csv = format!("competitor/{kind}.csv");
                    let js = format!("competitor/{kind}.json");
                    write_field(&rep.field, &self.dir.join(&csv))?;
                    write_json(&rep.summary(), &self.dir.join(&js))?;
                    arts.push(csv);
                    arts.push(js);
                    out.insert(kind.clone(), serde_json::to_value(rep.summary())?);
                }
                Value::Object(out)
            }
            Stage::Solve => {
                let ws = self.ws(st)?;
                let s = self.setup(&ws, st)?;
                let cfg = self.solve_config()?;
                let seed = seed_field(cfg.seed_kind, &ws, st.profiles.as_ref().unwrap(), &s, c.alpha)?;
                let res = run_solve(&cfg, &ws, &s, seed)?;
                write_field(&res.field, &self.dir.join("solve/field.csv"))?;
                write_log(&res, &self.dir.join("solve/log.jsonl"))?;
                let summary = res.summary(&cfg);
                write_json(&summary, &self.dir.join("solve/summary.json"))?;
                arts.extend(["solve/field.csv", "solve/log.jsonl", "solve/summary.json"].map(String::from));
                checks.push(Check::new(stage, "converged", res.converged, res.residual, format!("<= {}", cfg.tol_gradient), "max Euler-Lagrange residual"));
                st.solved_energy = Some(res.energy);
                // Downstream stages see the field exactly as a resumed run would.
                st.field = Some(read_field(&self.dir.join("solve/field.csv"))?);
                serde_json::to_value(summary)?
            }
            Stage::Diagnose => self.diagnose(st, &mut arts, &mut checks)?,
            Stage::Blowdown => {
                let ws = self.ws(st)?;
                let f = st.field.as_ref().unwrap();
                let ladder = if c.ladder.is_empty() { default_ladder(f.radius()) } else { c.ladder.clone() };
                let bd = diagnose_blowdown(f, &ws, &ladder, c.delta, c.gamma)?;
                write_json(&bd, &self.dir.join("blowdown/blowdown.json"))?;
                arts.push("blowdown/blowdown.json".into());
                if bd.records.len() >= 3 {
                    let l1 = bd.beta1_fit.map_or(f64::NAN, |f| f.exponent);
                    checks.push(Check::new(stage, "l1_exponent", l1 <= -0.05, l1, "<= -0.05", "log-log slope"));
                    let loc = bd.beta_fit.map_or(f64::NAN, |f| f.exponent);
                    checks.push(Check::new(stage, "localization_exponent", loc < 1.0, loc, "< 1", "log-log slope"));
                    let tail = bd.cauchy.tail_bound.unwrap_or(f64::INFINITY);
                    checks.push(Check::new(stage, "theta_tail_finite", bd.cauchy.summable, tail, "finite geometric tail", "radians"));
                }
                if let Some(fail) = &bd.failure {
                    checks.push(Check::new(stage, "ladder_complete", false, bd.records.len() as f64, fail.clone(), "rungs"));
                }
                serde_json::to_value(&bd)?
            }
        };
        Ok((arts, checks, report))
    }

    fn diagnose(&self, st: &mut State, arts: &mut Vec<String>, checks: &mut Vec<Check>) -> CliResult<Value> {
        let stage = Stage::Diagnose;
        let c = &self.config;
        let ws = self.ws(st)?;
        let f = st.field.as_ref().unwrap();
        let r = f.radius();
        let pd = diagnose_phases(f, &ws, c.delta)?;
        write_json(&pd, &self.dir.join("diagnose/phases.json"))?;
        let (triod, _) = field_triod(f, &ws, c.delta)?;
        let iface = diffuse_interface(f, &ws, c.gamma, &triod, None)?;
        write_json(&iface, &self.dir.join("diagnose/interface.json"))?;
        write_points_csv(&iface.points, &self.dir.join("diagnose/interface_points.csv"))?;
        let th = SliceThresholds { amplitude: c.slice_amplitude, slack: c.slice_slack, margin: None };
        let (sp, _) = diagnose_slices(f, &ws, c.delta, th)?;
        write_json(&sp, &self.dir.join("diagnose/slices.json"))?;
        let probe = local_minimality_probe(f, &ws, c.probe_trials, c.probe_radius, c.probe_seed)?;
        checks.push(Check::new(stage, "local_minimality", probe.passed, probe.min_margin, format!(">= -{}", probe.tolerance), "energy"));
        let margin = iface.localization_radius + f.h();
        let mut mp = Vec::new();
        for i in 0..3 {
            let region = sector_region(triod, i, margin, f.grid.band_radius() - f.h());
            let rep = maximum_principle_check(f, &ws, region, i)?;
            checks.push(Check::new(stage, &format!("maximum_principle_{}", i + 1), rep.passed, rep.r_in - rep.r_bd, format!("<= {}", rep.slack), "distance in target space"));
            mp.push(rep);
        }
        write_json(&json!({ "probe": probe, "maximumPrinciple": mp }), &self.dir.join("diagnose/probes.json"))?;

        // Energy sandwich when the field is a boundary-value solve.
        let mut sandwich = Value::Null;
        if let (Some(profiles), Some(e)) = (st.profiles.as_ref(), st.solved_energy) {
            let sigma = profiles.sigma();
            let s = self.setup(&ws, st)?;
            let upper = build_competitor("triple", &ws, profiles, &s, c.alpha)?.energy.total;
            let allowance = sigma * r.powf(2.0 / 3.0);
            let lower = lower_bound_for(&sp, &triod, r + f.h(), sigma);
            let per_r = e / (r * 3.0 * sigma);
            checks.push(Check::new(stage, "upper_bound", upper >= e, upper - e, ">= 0", "energy"));
            match &lower {
                Ok(lb) => checks.push(Check::new(stage, "lower_bound", e >= lb - allowance, e - (lb - allowance), ">= 0", "energy")),
                Err(err) => checks.push(Check::new(stage, "lower_bound", false, f64::NAN, err.to_string(), "energy")),
            }
            checks.push(Check::new(stage, "energy_per_length", (0.95..=1.05).contains(&per_r), per_r, "in [0.95, 1.05]", "E / (3 sigma R)"));
            sandwich = json!({
                "upper": upper,
                "solved": e,
                "lower": lower.ok(),
                "allowance": allowance,
                "sigma": sigma,
                "energyOverThreeSigmaR": per_r,
                "sliceAmplitude": sp.amplitude,
                "sliceSlack": sp.slack,
            });
            write_json(&sandwich, &self.dir.join("diagnose/sandwich.json"))?;
            arts.push("diagnose/sandwich.json".into());
        }
        arts.extend(
            ["diagnose/phases.json", "diagnose/interface.json", "diagnose/interface_points.csv", "diagnose/slices.json", "diagnose/probes.json"]
                .map(String::from),
        );
        Ok(json!({
            "phases": pd,
            "localizationRadius": iface.localization_radius,
            "ystar": sp.ystar,
            "probeMinMargin": probe.min_margin,
            "sandwich": sandwich,
        }))
    }
}

/// Doubling ladder `16, 32, …` up to `R`.
pub fn default_ladder(r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = 16.0;
    while x <= r * (1.0 + 1e-12) {
        out.push(x);
        x *= 2.0;
    }
    if out.is_empty() {
        out.push(r);
    }
    out
}
