//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment. Unknown keys, repeated keys
//! and missing units are errors. Frequencies take a unit and an optional
//! `2pi*` prefix:
//!
//! ```text
//! omega_c = 2pi*5 GHz      # ω_c = 2π · 5 GHz = 31.4159... rad/ns
//! kappa   = 0.0209 rad/ns
//! eta     = 2pi*250 MHz
//! ```
//!
//! Without the prefix a GHz or MHz value is read as an angular frequency in
//! units of 10⁹ or 10⁶ rad/s. Times are in ns unless suffixed with `t_pi`,
//! which is resolved against the perturbative dispersive shift of the
//! configured system.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lindblad::InitialQubit;
use crate::model::{self, DrivePlacement};
use crate::ode::{Method, Tolerance};
use crate::protocols::{DriveSpec, Protocol, ProtocolConfig, QubitInitial, SweepAxis, Tier, XiPoints};
use crate::system::SystemParams;

pub const PRESETS: &[&str] = &["paper-transmon"];

/// Named parameter set.
pub fn preset(name: &str) -> Option<SystemParams> {
    match name {
        "paper-transmon" => Some(SystemParams::paper_transmon()),
        _ => None,
    }
}

const KEYS: &[&str] = &[
    "preset",
    "omega_c",
    "omega_q",
    "eta",
    "g",
    "kappa",
    "kappa_over_chi",
    "omega_d",
    "drive_amp",
    "target_npi",
    "target_nss",
    "n_transmon",
    "n_cavity",
    "protocol",
    "tier",
    "drive_branch",
    "qubit_initial",
    "initial_state",
    "t_count_end",
    "xi_points",
    "rtol",
    "atol",
    "method",
    "sample_step",
    "sweep_axis",
    "sweep_values",
];

/// Parsed configuration: system, protocol settings and an optional sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub params: SystemParams,
    pub protocol: ProtocolConfig,
    pub sweep: Option<SweepAxis>,
}

impl RunConfig {
    /// Preset parameters with default protocol settings.
    pub fn from_preset(name: &str) -> Result<Self> {
        let params = preset(name).ok_or_else(|| cfg_err(0, format!("unknown preset `{name}`")))?;
        Ok(RunConfig { preset: Some(name.into()), params, protocol: ProtocolConfig::default(), sweep: None })
    }

    /// Every setting in canonical form; feeding the text back to
    /// [`parse_config`] reproduces the configuration exactly.
    pub fn echo(&self) -> String {
        let p = &self.params;
        let c = &self.protocol;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(name) = &self.preset {
            line("preset", name.clone());
        }
        for (k, v) in [("omega_c", p.omega_c), ("omega_q", p.omega_q), ("eta", p.eta), ("g", p.g), ("kappa", p.kappa), ("omega_d", p.omega_d)] {
            line(k, format!("{v:?} rad/ns"));
        }
        match c.drive {
            DriveSpec::Amplitude(e) => line("drive_amp", format!("{e:?} rad/ns")),
            DriveSpec::TargetNpi(n) => line("target_npi", format!("{n:?}")),
            DriveSpec::TargetNss(n) => line("target_nss", format!("{n:?}")),
        }
        line("n_transmon", p.n_transmon.to_string());
        line("n_cavity", c.n_cavity.map_or("auto".into(), |n| n.to_string()));
        line("protocol", c.protocol.as_str().into());
        line("tier", c.tier.as_str().into());
        line("drive_branch", c.drive_branch.as_str().into());
        line("qubit_initial", c.qubit_initial.as_str().into());
        line("initial_state", c.initial_kind.as_str().into());
        line("t_count_end", format!("{:?} ns", c.t_count_end));
        line(
            "xi_points",
            match c.xi_points {
                XiPoints::Rule => "rule".into(),
                XiPoints::Minimal => "minimal".into(),
                XiPoints::Fixed(m) => m.to_string(),
            },
        );
        line("rtol", format!("{:?}", c.tol.rtol));
        line("atol", format!("{:?}", c.tol.atol));
        line("method", c.tol.method.as_str().into());
        line("sample_step", format!("{:?} ns", c.sample_step));
        if let Some(axis) = &self.sweep {
            line("sweep_axis", axis.name().into());
            let vals: Vec<String> = axis.values().iter().map(|v| format!("{v:?}")).collect();
            let unit = if matches!(axis, SweepAxis::Time(_)) { " ns" } else if matches!(axis, SweepAxis::DriveAmp(_)) { " rad/ns" } else { "" };
            line("sweep_values", format!("{}{unit}", vals.join(", ")));
        }
        s
    }
}

fn cfg_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Config { line, reason: reason.into() }
}

/// Angular frequency in rad/ns.
pub fn parse_frequency(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    let (two_pi, rest) = match t.strip_prefix("2pi*") {
        Some(r) => (true, r.trim_start()),
        None => (false, t),
    };
    let (num, unit) = split_unit(rest);
    let v = parse_number(num)?;
    let scale = match unit {
        "GHz" => 1.0,
        "MHz" => 1e-3,
        "rad/ns" if !two_pi => 1.0,
        "rad/ns" => return Err("`2pi*` cannot be combined with rad/ns".into()),
        "" => return Err(format!("`{t}` needs a unit (GHz, MHz or rad/ns)")),
        u => return Err(format!("unknown frequency unit `{u}`")),
    };
    Ok(v * scale * if two_pi { TAU } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Time {
    Ns(f64),
    TPi(f64),
}

impl Time {
    fn ns(self, t_pi: f64) -> f64 {
        match self {
            Time::Ns(v) => v,
            Time::TPi(v) => v * t_pi,
        }
    }
}

fn parse_time(text: &str) -> std::result::Result<Time, String> {
    let (num, unit) = split_unit(text.trim());
    let v = parse_number(num)?;
    match unit {
        "ns" | "" => Ok(Time::Ns(v)),
        "t_pi" => Ok(Time::TPi(v)),
        u => Err(format!("unknown time unit `{u}` (use ns or t_pi)")),
    }
}

fn wrap(line: usize, key: &str) -> impl Fn(String) -> Error + '_ {
    move |e| cfg_err(line, format!("{key}: {e}"))
}

fn chi_of(params: &SystemParams) -> Result<f64> {
    model::chi_perturbative(params).map_err(|e| cfg_err(0, e.to_string()))
}

fn split_unit(s: &str) -> (&str, &str) {
    match s.find(|c: char| c.is_whitespace()) {
        Some(i) => (&s[..i], s[i..].trim()),
        None => (s, ""),
    }
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// Comma list or `linspace(a, b, n)`, optionally followed by one unit.
fn parse_values(text: &str) -> std::result::Result<(Vec<f64>, String), String> {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix("linspace(") {
        let close = inner.find(')').ok_or("unclosed linspace(")?;
        let args: Vec<&str> = inner[..close].split(',').map(str::trim).collect();
        let unit = inner[close + 1..].trim().to_string();
        if args.len() != 3 {
            return Err("linspace takes (start, stop, count)".into());
        }
        let (a, b) = (parse_number(args[0])?, parse_number(args[1])?);
        let n: usize = args[2].parse().map_err(|_| format!("`{}` is not a count", args[2]))?;
        if n < 2 {
            return Err("linspace needs at least 2 points".into());
        }
        let v = (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect();
        return Ok((v, unit));
    }
    let parts: Vec<&str> = t.split(',').map(str::trim).collect();
    let (last_num, unit) = split_unit(parts.last().copied().unwrap_or(""));
    let mut v = Vec::with_capacity(parts.len());
    for (i, p) in parts.iter().enumerate() {
        v.push(parse_number(if i + 1 == parts.len() { last_num } else { p })?);
    }
    Ok((v, unit.to_string()))
}

fn parse_tag<T>(value: &str, parse: impl Fn(&str) -> Option<T>, options: &str) -> std::result::Result<T, String> {
    parse(value).ok_or_else(|| format!("`{value}` is not one of {options}"))
}

fn placement(s: &str) -> Option<DrivePlacement> {
    [DrivePlacement::AtOmega0, DrivePlacement::AtOmega1, DrivePlacement::Midpoint].into_iter().find(|p| p.as_str() == s)
}

fn initial_kind(s: &str) -> Option<InitialQubit> {
    [InitialQubit::Dressed, InitialQubit::Bare].into_iter().find(|p| p.as_str() == s)
}

fn method(s: &str) -> Option<Method> {
    [Method::Chebyshev, Method::DormandPrince].into_iter().find(|p| p.as_str() == s)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, None)
}

/// Parses `text` on top of `base_preset`; a `preset` key in the text wins.
pub fn parse_config_with(text: &str, base_preset: Option<&str>) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{content}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(cfg_err(line, format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(cfg_err(line, format!("`{k}` has no value")));
        }
        if let Some((prev, _)) = entries.insert(k, (line, v)) {
            return Err(cfg_err(line, format!("`{k}` already set on line {prev}")));
        }
    }
    let get = |k: &str| entries.get(k).copied();
    let at = |k: &str| entries.get(k).map_or(0, |e| e.0);

    let preset_name = get("preset").map(|(_, v)| v).or(base_preset);
    let mut params = match preset_name {
        Some(name) => preset(name).ok_or_else(|| cfg_err(at("preset"), format!("unknown preset `{name}` (known: {})", PRESETS.join(", "))))?,
        None => {
            let missing: Vec<&str> = ["omega_c", "omega_q", "eta", "g"].into_iter().filter(|k| get(k).is_none()).collect();
            if !missing.is_empty() {
                return Err(cfg_err(0, format!("no preset given and missing {}", missing.join(", "))));
            }
            SystemParams { kappa: 0.0, omega_d: 0.0, drive_amp: 0.0, ..SystemParams::paper_transmon() }
        }
    };
    let freq = |k: &str| -> Result<Option<f64>> {
        match get(k) {
            None => Ok(None),
            Some((_, v)) => {
                let f = parse_frequency(v).map_err(wrap(at(k), k))?;
                if !f.is_finite() || f < 0.0 {
                    return Err(cfg_err(at(k), format!("{k} must be finite and nonnegative, got {v}")));
                }
                Ok(Some(f))
            }
        }
    };
    let count = |k: &str| -> Result<Option<usize>> {
        get(k).map(|(l, v)| v.parse::<usize>().map_err(|_| cfg_err(l, format!("{k}: `{v}` is not a count")))).transpose()
    };
    let real = |k: &str| -> Result<Option<f64>> { get(k).map(|(_, v)| parse_number(v).map_err(wrap(at(k), k))).transpose() };

    for (k, slot) in [("omega_c", &mut params.omega_c), ("omega_q", &mut params.omega_q), ("eta", &mut params.eta), ("g", &mut params.g), ("omega_d", &mut params.omega_d)] {
        if let Some(f) = freq(k)? {
            *slot = f;
        }
    }
    if let Some(n) = count("n_transmon")? {
        params.n_transmon = n;
    }
    let mut cfg = ProtocolConfig::default();
    if let Some((l, v)) = get("n_cavity") {
        if v != "auto" {
            let n = v.parse::<usize>().map_err(|_| cfg_err(l, format!("n_cavity: `{v}` is not a count or `auto`")))?;
            params.n_cavity = n;
            cfg.n_cavity = Some(n);
        }
    }

    // κ, and with it t_π-relative times, needs χ of the final parameters.
    match (get("kappa"), get("kappa_over_chi")) {
        (Some(_), Some(_)) => return Err(cfg_err(at("kappa_over_chi"), "set either kappa or kappa_over_chi, not both")),
        (Some(_), None) => params.kappa = freq("kappa")?.unwrap(),
        (None, Some(_)) => {
            let r = real("kappa_over_chi")?.unwrap();
            if !(r >= 0.0 && r.is_finite()) {
                return Err(cfg_err(at("kappa_over_chi"), format!("kappa_over_chi must be finite and nonnegative, got {r}")));
            }
            params.kappa = r * chi_of(&params)?;
        }
        (None, None) => {}
    }
    let drives: Vec<&str> = ["drive_amp", "target_npi", "target_nss"].into_iter().filter(|k| get(k).is_some()).collect();
    if drives.len() > 1 {
        return Err(cfg_err(at(drives[1]), format!("set only one of {}", drives.join(", "))));
    }
    if let Some(&k) = drives.first() {
        cfg.drive = match k {
            "drive_amp" => DriveSpec::Amplitude(freq(k)?.unwrap()),
            "target_npi" => DriveSpec::TargetNpi(real(k)?.unwrap()),
            _ => DriveSpec::TargetNss(real(k)?.unwrap()),
        };
    }

    if let Some((_, v)) = get("protocol") {
        cfg.protocol = parse_tag(v, Protocol::parse, "continuous, sequential").map_err(wrap(at("protocol"), "protocol"))?;
    }
    if let Some((_, v)) = get("tier") {
        cfg.tier = parse_tag(v, Tier::parse, "dispersive-analytic, dispersive-numeric, full-numeric").map_err(wrap(at("tier"), "tier"))?;
    }
    if let Some((_, v)) = get("drive_branch") {
        cfg.drive_branch = parse_tag(v, placement, "at_omega0, at_omega1, midpoint").map_err(wrap(at("drive_branch"), "drive_branch"))?;
    }
    if let Some((_, v)) = get("qubit_initial") {
        cfg.qubit_initial = parse_tag(v, QubitInitial::parse, "ground, excited").map_err(wrap(at("qubit_initial"), "qubit_initial"))?;
    }
    if let Some((_, v)) = get("initial_state") {
        cfg.initial_kind = parse_tag(v, initial_kind, "dressed, bare").map_err(wrap(at("initial_state"), "initial_state"))?;
    }
    if let Some((_, v)) = get("xi_points") {
        cfg.xi_points = match v {
            "rule" => XiPoints::Rule,
            "minimal" => XiPoints::Minimal,
            n => XiPoints::Fixed(n.parse().map_err(|_| cfg_err(at("xi_points"), format!("xi_points: `{n}` is not rule, minimal or a count")))?),
        };
    }
    let mut tol = Tolerance::default();
    if let Some(r) = real("rtol")? {
        tol = Tolerance::relative(r);
    }
    if let Some(a) = real("atol")? {
        tol.atol = a;
    }
    if let Some((_, v)) = get("method") {
        tol.method = parse_tag(v, method, "chebyshev, dormand-prince").map_err(wrap(at("method"), "method"))?;
    }
    cfg.tol = tol;

    let needs_t_pi = |k: &str| get(k).is_some_and(|(_, v)| v.contains("t_pi"));
    let t_pi = if needs_t_pi("t_count_end") || needs_t_pi("sample_step") || needs_t_pi("sweep_values") { PI / chi_of(&params)? } else { f64::NAN };
    if let Some((_, v)) = get("t_count_end") {
        cfg.t_count_end = parse_time(v).map_err(wrap(at("t_count_end"), "t_count_end"))?.ns(t_pi);
    }
    if let Some((_, v)) = get("sample_step") {
        cfg.sample_step = parse_time(v).map_err(wrap(at("sample_step"), "sample_step"))?.ns(t_pi);
    }

    let sweep = match (get("sweep_axis"), get("sweep_values")) {
        (None, None) => None,
        (Some((l, _)), None) | (None, Some((l, _))) => return Err(cfg_err(l, "sweep_axis and sweep_values go together")),
        (Some((_, name)), Some((_, vals))) => {
            let (mut values, unit) = parse_values(vals).map_err(wrap(at("sweep_values"), "sweep_values"))?;
            let scale = match (name, unit.as_str()) {
                ("t" | "time", "ns" | "") => 1.0,
                ("t" | "time", "t_pi") => t_pi,
                ("drive_amp", u) => parse_frequency(&format!("1 {u}")).map_err(wrap(at("sweep_values"), "sweep_values"))?,
                (_, "") => 1.0,
                (_, u) => return Err(cfg_err(at("sweep_values"), format!("sweep_values: unit `{u}` does not fit axis `{name}`"))),
            };
            values.iter_mut().for_each(|v| *v *= scale);
            let axis = SweepAxis::from_name(name, values).ok_or_else(|| {
                cfg_err(at("sweep_axis"), format!("unknown sweep axis `{name}` (kappa_over_chi, t, target_npi, target_nss, drive_amp)"))
            })?;
            Some(axis)
        }
    };

    params.validate().map_err(|e| cfg_err(0, e.to_string()))?;
    cfg.validate().map_err(|e| cfg_err(0, e.to_string()))?;
    Ok(RunConfig { preset: preset_name.map(str::to_string), params, protocol: cfg, sweep })
}
