//! Flat `key=value` run configuration.
//!
//! ```text
//! ; comments start with ';' or '#'
//! seed=7
//! population_size=150
//! sigma_ang_deg=15
//! symmetry=c4:15,15
//! ```
//!
//! Symmetry declarations: `c4:cx,cy` (quarter turns about a point in cell
//! units), `mirror:v,x` / `mirror:h,y` (reflection in a vertical or horizontal
//! line), `translation:x` / `translation:y` (period search along an axis)
//! and `translation:x,step,count` (a fixed group of shifts).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::GaConfig;
use crate::symmetry::{Axis, SymmetryGroup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryDecl {
    Group(SymmetryGroup),
    Translation(Axis),
}

impl SymmetryDecl {
    pub fn parse(v: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognised symmetry declaration '{v}'"));
        let (kind, args) = v.split_once(':').ok_or_else(bad)?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        match kind.trim() {
            "c4" => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                Ok(SymmetryDecl::Group(SymmetryGroup::rotation_c4(num(a)?, num(b)?)?))
            }
            "mirror" => {
                let (dir, at) = args.split_once(',').ok_or_else(bad)?;
                let flips = match dir.trim() {
                    "v" => Axis::X,
                    "h" => Axis::Y,
                    _ => return Err(bad()),
                };
                Ok(SymmetryDecl::Group(SymmetryGroup::mirror(flips, num(at)?)?))
            }
            "translation" => {
                let mut parts = args.split(',').map(str::trim);
                let axis = match parts.next() {
                    Some("x") => Axis::X,
                    Some("y") => Axis::Y,
                    _ => return Err(bad()),
                };
                let rest: Vec<&str> = parts.collect();
                match rest[..] {
                    [] => Ok(SymmetryDecl::Translation(axis)),
                    [step, count] => Ok(SymmetryDecl::Group(SymmetryGroup::Translation {
                        axis,
                        step: step.parse().map_err(|_| bad())?,
                        count: count.parse().map_err(|_| bad())?,
                    })),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }

    pub fn to_text(&self) -> String {
        let half = |v: i64| v as f64 / 2.0;
        match self {
            SymmetryDecl::Group(SymmetryGroup::RotationC4 { cx2, cy2 }) => {
                format!("c4:{},{}", half(*cx2), half(*cy2))
            }
            SymmetryDecl::Group(SymmetryGroup::Mirror { flips, at2 }) => {
                let d = if *flips == Axis::X { "v" } else { "h" };
                format!("mirror:{d},{}", half(*at2))
            }
            SymmetryDecl::Group(SymmetryGroup::Translation { axis, step, count }) => {
                format!("translation:{},{step},{count}", axis_name(*axis))
            }
            SymmetryDecl::Translation(axis) => format!("translation:{}", axis_name(*axis)),
        }
    }
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::X => "x",
        Axis::Y => "y",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub ga: GaConfig,
    pub symmetry: Option<SymmetryDecl>,
    /// Defaults to an estimate from the scenario.
    pub max_pattern_breaks: Option<usize>,
    /// Stitching trials.
    pub trials: usize,
    /// Run the final stitching local search over the whole map instead of
    /// only near fragment joints.
    pub full_local_search: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            ga: GaConfig::default(),
            symmetry: None,
            max_pattern_breaks: None,
            trials: 10,
            full_local_search: false,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            fn num<T: std::str::FromStr>(k: &str, v: &str) -> std::result::Result<T, String> {
                v.parse().map_err(|_| format!("bad value '{v}' for {k}"))
            }
            let ga = &mut cfg.ga;
            match k {
                "population_size" => ga.population_size = num(k, v).map_err(err)?,
                "p_mut" => ga.p_mut = num(k, v).map_err(err)?,
                "p_cross" => ga.p_cross = num(k, v).map_err(err)?,
                "p_div" => ga.p_div = num(k, v).map_err(err)?,
                "stall_generations" => ga.stall_generations = num(k, v).map_err(err)?,
                "max_generations" => ga.max_generations = num(k, v).map_err(err)?,
                "max_sensors" => ga.max_sensors = Some(num(k, v).map_err(err)?),
                "seed" => ga.seed = num(k, v).map_err(err)?,
                "mask_count" => ga.mask_count = num(k, v).map_err(err)?,
                "sigma_pos" => ga.sigma_pos_cells = num(k, v).map_err(err)?,
                "sigma_ang_deg" => {
                    ga.sigma_ang_rad = num::<f64>(k, v).map_err(err)?.to_radians()
                }
                "p_add_gene" => ga.p_add_gene = num(k, v).map_err(err)?,
                "symmetry" => {
                    cfg.symmetry = match v {
                        "none" => None,
                        _ => Some(SymmetryDecl::parse(v)?),
                    }
                }
                "max_pattern_breaks" => cfg.max_pattern_breaks = Some(num(k, v).map_err(err)?),
                "trials" => cfg.trials = num(k, v).map_err(err)?,
                "full_local_search" => cfg.full_local_search = num(k, v).map_err(err)?,
                _ => return Err(err(format!("unknown key '{k}'"))),
            }
        }
        cfg.ga.validate()?;
        if cfg.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let ga = &self.ga;
        let mut s = String::new();
        let _ = writeln!(s, "population_size={}", ga.population_size);
        let _ = writeln!(s, "p_mut={}", ga.p_mut);
        let _ = writeln!(s, "p_cross={}", ga.p_cross);
        let _ = writeln!(s, "p_div={}", ga.p_div);
        let _ = writeln!(s, "stall_generations={}", ga.stall_generations);
        let _ = writeln!(s, "max_generations={}", ga.max_generations);
        if let Some(m) = ga.max_sensors {
            let _ = writeln!(s, "max_sensors={m}");
        }
        let _ = writeln!(s, "seed={}", ga.seed);
        let _ = writeln!(s, "mask_count={}", ga.mask_count);
        let _ = writeln!(s, "sigma_pos={}", ga.sigma_pos_cells);
        let _ = writeln!(s, "sigma_ang_deg={}", ga.sigma_ang_rad.to_degrees());
        let _ = writeln!(s, "p_add_gene={}", ga.p_add_gene);
        if let Some(sym) = &self.symmetry {
            let _ = writeln!(s, "symmetry={}", sym.to_text());
        }
        if let Some(b) = self.max_pattern_breaks {
            let _ = writeln!(s, "max_pattern_breaks={b}");
        }
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "full_local_search={}", self.full_local_search);
        s
    }
}
