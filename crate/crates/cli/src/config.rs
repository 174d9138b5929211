//! Run configuration: an INI file with one section per stage.

use crate::error::{CliError, CliResult};
use ini::Ini;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use trijunction::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Certify,
    Connect,
    Competitor,
    Solve,
    Diagnose,
    Blowdown,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 6] = [
        Stage::Certify,
        Stage::Connect,
        Stage::Competitor,
        Stage::Solve,
        Stage::Diagnose,
        Stage::Blowdown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Certify => "certify",
            Stage::Connect => "connect",
            Stage::Competitor => "competitor",
            Stage::Solve => "solve",
            Stage::Diagnose => "diagnose",
            Stage::Blowdown => "blowdown",
        }
    }

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Certify => &[],
            Stage::Connect => &[Stage::Certify],
            Stage::Competitor | Stage::Solve => &[Stage::Connect],
            Stage::Diagnose | Stage::Blowdown => &[Stage::Solve],
        }
    }

    /// Config sections whose contents feed the stage.
    pub fn sections(self) -> &'static [&'static str] {
        match self {
            Stage::Certify => &["potential"],
            Stage::Connect => &["connect"],
            Stage::Competitor => &["geometry", "solve", "competitor"],
            Stage::Solve => &["geometry", "solve"],
            Stage::Diagnose => &["geometry", "diagnose"],
            Stage::Blowdown => &["diagnose", "blowdown"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Stage> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown stage '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialKind {
    Canonical,
    /// Product potential `scale * prod |u - a_i|^2` with the given wells.
    Custom([Vec2; 3]),
}

#[derive(Clone, Debug)]
pub struct Config {
    pub run_id: Option<String>,
    pub out_dir: PathBuf,
    pub stages: Vec<Stage>,
    pub potential: PotentialKind,
    pub scale: f64,
    pub connect_length: f64,
    pub connect_n: usize,
    pub arcs: [f64; 3],
    pub start_deg: f64,
    pub width: f64,
    pub radius: f64,
    pub h: f64,
    pub seed: String,
    pub tol: f64,
    pub max_iter: usize,
    pub step: String,
    pub competitor_kinds: Vec<String>,
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
    pub probe_trials: usize,
    pub probe_radius: f64,
    pub probe_seed: u64,
    pub slice_amplitude: Option<f64>,
    pub slice_slack: Option<f64>,
    pub ladder: Vec<f64>,
    /// Canonical `section -> key -> value` view used for hashing.
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("run", &["id", "stages", "out"]),
    ("potential", &["kind", "scale", "wells"]),
    ("connect", &["L", "n"]),
    ("geometry", &["arcs", "start", "width"]),
    ("solve", &["R", "h", "seed", "tol", "max_iter", "step"]),
    ("competitor", &["kinds", "alpha"]),
    ("diagnose", &["delta", "gamma", "probe_trials", "probe_radius", "probe_seed", "slice_amplitude", "slice_slack"]),
    ("blowdown", &["ladder"]),
];

impl Config {
    pub fn parse(text: &str) -> CliResult<Config> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let name = name.unwrap_or("").trim().to_string();
            if props.is_empty() {
                continue;
            }
            let known = KNOWN
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| CliError::Config(format!("unknown section [{name}]")))?;
            let entry = sections.entry(name.clone()).or_default();
            for (k, v) in props.iter() {
                let k = k.trim();
                if !known.1.contains(&k) {
                    return Err(CliError::Config(format!("unknown key '{k}' in [{name}]")));
                }
                entry.insert(k.to_string(), v.trim().to_string());
            }
        }
        let get = |s: &str, k: &str| sections.get(s).and_then(|m| m.get(k)).map(String::as_str);
        let num = |s: &str, k: &str, d: f64| -> CliResult<f64> {
            match get(s, k) {
                None => Ok(d),
                Some(v) => v
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("[{s}] {k} = '{v}' is not a number"))),
            }
        };
        let int = |s: &str, k: &str, d: usize| -> CliResult<usize> {
            match get(s, k) {
                None => Ok(d),
                Some(v) => v
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("[{s}] {k} = '{v}' is not a non-negative integer"))),
            }
        };
        let opt = |s: &str, k: &str| -> CliResult<Option<f64>> {
            get(s, k).map(|_| num(s, k, 0.0)).transpose()
        };

        let stages = match get("run", "stages") {
            None => vec![Stage::Certify, Stage::Connect],
            Some(v) => {
                let mut st = list(v).into_iter().map(|s| s.parse()).collect::<CliResult<Vec<Stage>>>()?;
                st.sort();
                st.dedup();
                st
            }
        };
        for s in &stages {
            for d in s.dependencies() {
                if !stages.contains(d) {
                    return Err(CliError::Config(format!("stage '{s}' requires stage '{d}'")));
                }
            }
        }
        let potential = match get("potential", "kind").unwrap_or("canonical") {
            "canonical" => {
                if get("potential", "wells").is_some() {
                    return Err(CliError::Config("[potential] wells is only valid with kind = custom".into()));
                }
                PotentialKind::Canonical
            }
            "custom" => {
                let w = get("potential", "wells")
                    .ok_or_else(|| CliError::Config("[potential] kind = custom needs wells".into()))?;
                PotentialKind::Custom(parse_points(w)?)
            }
            other => return Err(CliError::Config(format!("unknown potential kind '{other}'"))),
        };
        let arcs = match get("geometry", "arcs") {
            None => [120.0; 3],
            Some(v) => {
                let a = parse_floats(v)?;
                <[f64; 3]>::try_from(a).map_err(|_| CliError::Config("[geometry] arcs needs three values".into()))?
            }
        };
        let ladder = match get("blowdown", "ladder") {
            None => Vec::new(),
            Some(v) => parse_floats(v)?,
        };
        let competitor_kinds = match get("competitor", "kinds") {
            None => vec!["triple".to_string()],
            Some(v) => list(v),
        };
        for k in &competitor_kinds {
            if !["triple", "radial", "twophase"].contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown competitor kind '{k}'")));
            }
        }
        Ok(Config {
            run_id: get("run", "id").map(str::to_string),
            out_dir: PathBuf::from(get("run", "out").unwrap_or("runs")),
            stages,
            potential,
            scale: num("potential", "scale", 1.0)?,
            connect_length: num("connect", "L", 20.0)?,
            connect_n: int("connect", "n", 4001)?,
            arcs,
            start_deg: num("geometry", "start", 90.0)?,
            width: num("geometry", "width", 12.0)?,
            radius: num("solve", "R", 32.0)?,
            h: num("solve", "h", 0.125)?,
            seed: get("solve", "seed").unwrap_or("triple").to_string(),
            tol: num("solve", "tol", 1e-5)?,
            max_iter: int("solve", "max_iter", 20_000)?,
            step: get("solve", "step").unwrap_or("lbfgs").to_string(),
            competitor_kinds,
            alpha: num("competitor", "alpha", 0.5)?,
            delta: num("diagnose", "delta", 0.1)?,
            gamma: num("diagnose", "gamma", 0.1)?,
            probe_trials: int("diagnose", "probe_trials", 100)?,
            probe_radius: num("diagnose", "probe_radius", 2.0)?,
            probe_seed: int("diagnose", "probe_seed", 1)? as u64,
            slice_amplitude: opt("diagnose", "slice_amplitude")?,
            slice_slack: opt("diagnose", "slice_slack")?,
            ladder,
            sections,
        })
    }

    pub fn has(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Canonical text of the given sections: `[name]` headers and `key=value`
    /// lines, both sorted, whitespace trimmed.
    pub fn canonical_text(&self, only: Option<&[&str]>) -> String {
        let mut out = String::new();
        for (name, props) in &self.sections {
            if only.is_some_and(|o| !o.contains(&name.as_str())) {
                continue;
            }
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in props {
                out.push_str(&format!("{k}={v}\n"));
            }
        }
        out
    }

    /// SHA-256 of the canonical text of the whole config.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_text(None).as_bytes())
    }

    pub fn resolved_run_id(&self) -> String {
        self.run_id.clone().unwrap_or_else(|| format!("run-{}", &self.hash()[..12]))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn list(v: &str) -> Vec<String> {
    v.split([',', ' ']).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

pub fn parse_floats(v: &str) -> CliResult<Vec<f64>> {
    list(v)
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("'{s}' is not a number"))))
        .collect()
}

/// Parses `"x1,y1 x2,y2 x3,y3"`.
pub fn parse_points(v: &str) -> CliResult<[Vec2; 3]> {
    let pts: Vec<Vec2> = v
        .split_whitespace()
        .map(|p| {
            let c: Vec<&str> = p.split(',').collect();
            match c.as_slice() {
                [x, y] => match (x.parse::<f64>(), y.parse::<f64>()) {
                    (Ok(x), Ok(y)) => Ok(Vec2::new(x, y)),
                    _ => Err(CliError::Config(format!("bad point '{p}'"))),
                },
                _ => Err(CliError::Config(format!("bad point '{p}', expected x,y"))),
            }
        })
        .collect::<CliResult<_>>()?;
    <[Vec2; 3]>::try_from(pts).map_err(|_| CliError::Config(format!("expected three points in '{v}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_order() {
        let c = Config::parse("[run]\nstages = connect, certify\n").unwrap();
        assert_eq!(c.stages, vec![Stage::Certify, Stage::Connect]);
        assert_eq!(c.radius, 32.0);
        assert_eq!(c.potential, PotentialKind::Canonical);
    }

    #[test]
    fn missing_dependency_is_rejected() {
        let e = Config::parse("[run]\nstages = certify, solve\n").unwrap_err();
        assert!(e.to_string().contains("requires stage 'connect'"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("[solve]\nradius = 3\n").is_err());
        assert!(Config::parse("[nope]\nx = 1\n").is_err());
    }

    #[test]
    fn hash_ignores_layout() {
        let a = Config::parse("[solve]\nR = 16\nh=0.25\n[run]\nstages=certify\n").unwrap();
        let b = Config::parse("[run]\nstages = certify\n\n[solve]\nh = 0.25\nR=16\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = Config::parse("[run]\nstages = certify\n[solve]\nh = 0.25\nR=32\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn points() {
        let p = parse_points("0,0 1,0 0.5,2").unwrap();
        assert_eq!(p[2], Vec2::new(0.5, 2.0));
        assert!(parse_points("0,0 1,0").is_err());
    }
}
