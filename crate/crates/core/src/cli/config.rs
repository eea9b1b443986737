//! Run configuration: `[section]` headers, `key = value` lines, `#` comments.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::analytic::{HillParams, HillRelations, SeparableParams, Shape};
use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::transport::{NuPlacement, RateEstimate, EXACT_SIZE_CAP};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub width: f64,
    pub length: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { width: 1.0, length: 1.0, nx: 32, ny: 32 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.width, self.length, self.nx, self.ny)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceFamily {
    Ridge,
    Mountain,
    Hill,
    /// Surface (and optionally water depth) read from CSV.
    File,
    /// `H = 0`.
    Flat,
}

impl SurfaceFamily {
    fn name(self) -> &'static str {
        match self {
            Self::Ridge => "ridge",
            Self::Mountain => "mountain",
            Self::Hill => "hill",
            Self::File => "file",
            Self::Flat => "flat",
        }
    }
}

/// Unset parameters take the family defaults: the erosive ridge
/// `H0 = (1 - x)^{3/2}` for ridges and mountains, and a hill centered in a
/// unit square with `c = 0.3`, `beta = -0.25` for hills.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceConfig {
    pub family: SurfaceFamily,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub h1: Option<f64>,
    pub big_h1: Option<f64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub crest: Option<bool>,
    pub beta: Option<f64>,
    pub relations: Option<HillRelations>,
    pub input: Option<String>,
    pub water_input: Option<String>,
    /// Constant water depth for `flat` and for `file` without `water_input`.
    pub depth: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            family: SurfaceFamily::Ridge,
            a: None,
            b: None,
            c: None,
            d: None,
            h1: None,
            big_h1: None,
            x0: None,
            y0: None,
            crest: None,
            beta: None,
            relations: None,
            input: None,
            water_input: None,
            depth: None,
        }
    }
}

impl SurfaceConfig {
    pub fn separable(&self) -> SeparableParams {
        let base = SeparableParams::default();
        let shape = match self.family {
            SurfaceFamily::Mountain => Shape::Mountain,
            _ => Shape::Ridge { crest: self.crest.unwrap_or(false) },
        };
        SeparableParams {
            a: self.a.unwrap_or(if shape == Shape::Mountain { 1.0 } else { base.a }),
            b: self.b.unwrap_or(base.b),
            c: self.c.unwrap_or(base.c),
            d: self.d.unwrap_or(base.d),
            h1: self.h1.unwrap_or(base.h1),
            big_h1: self.big_h1.unwrap_or(base.big_h1),
            x0: self.x0.unwrap_or(base.x0),
            y0: self.y0.unwrap_or(base.y0),
            shape,
        }
    }

    pub fn hill(&self) -> HillParams {
        HillParams::derived(
            self.h1.unwrap_or(1.0),
            self.big_h1.unwrap_or(1.0),
            self.c.unwrap_or(0.3),
            self.beta.unwrap_or(-0.25),
            self.x0.unwrap_or(0.5),
            self.y0.unwrap_or(0.5),
            self.relations.unwrap_or(HillRelations::Published),
        )
    }

    pub fn depth(&self) -> f64 {
        self.depth.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub snapshot_stride: usize,
    pub max_steps: usize,
    pub dt_max: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_end: 0.01,
            cfl_safety: 0.4,
            snapshot_stride: 10,
            max_steps: 1_000_000,
            dt_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub solver: SolverKind,
    pub reg_eps: f64,
    pub eps_mass: f64,
    pub eps_grad: f64,
    /// Snapshot index; negative values count from the end.
    pub snapshot: i64,
    pub nu: NuPlacement,
    pub rate: RateEstimate,
    pub max_iter: usize,
    pub tol: f64,
    pub size_cap: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::Exact,
            reg_eps: 0.01,
            eps_mass: 0.0,
            eps_grad: 1e-10,
            snapshot: -1,
            nu: NuPlacement::Uniform,
            rate: RateEstimate::Instantaneous,
            max_iter: 10_000,
            tol: 1e-9,
            size_cap: EXACT_SIZE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub k_list: Vec<f64>,
    pub n_test_functions: usize,
    pub seed: u64,
    pub ball_stride: usize,
    pub quad_n: usize,
    /// Cells per side for refinement studies.
    pub levels: Vec<usize>,
    pub c_r: f64,
    pub contraction_pairs: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            k_list: vec![0.5, 1.0, 2.0],
            n_test_functions: 5,
            seed: 0,
            ball_stride: 4,
            quad_n: 32,
            levels: vec![32, 64, 128],
            c_r: 1.0,
            contraction_pairs: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec![Format::Csv] }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub surface: SurfaceConfig,
    pub time: TimeConfig,
    pub transport: TransportConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    /// 0 for command-line overrides.
    line: usize,
}

fn err(line: usize, msg: impl Into<String>) -> LabError {
    LabError::Parse { line, message: msg.into() }
}

fn lex(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    let mut section: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("malformed section header `{body}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(err(line, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected `key = value`, got `{body}`")))?;
        let section = section
            .clone()
            .ok_or_else(|| err(line, "key outside of any [section]"))?;
        out.push(Entry {
            section,
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

const SECTIONS: [&str; 6] = ["grid", "surface", "time", "transport", "analysis", "output"];

fn parse_override(text: &str) -> Result<Entry> {
    let bad = || err(0, format!("override `{text}` must look like section.key=value"));
    let (path, value) = text.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    if !SECTIONS.contains(&section) {
        return Err(err(0, format!("override names unknown section [{section}]")));
    }
    Ok(Entry {
        section: section.to_string(),
        key: key.to_string(),
        value: value.trim().to_string(),
        line: 0,
    })
}

impl Entry {
    fn fail(&self, msg: impl std::fmt::Display) -> LabError {
        let origin = if self.line == 0 { " (override)" } else { "" };
        err(self.line, format!("[{}] {}{origin}: {msg}", self.section, self.key))
    }

    fn f64(&self) -> Result<f64> {
        let v: f64 = self.value.parse().map_err(|_| self.fail(format!("`{}` is not a number", self.value)))?;
        if !v.is_finite() {
            return Err(self.fail("must be finite"));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64> {
        let v = self.f64()?;
        if v <= 0.0 {
            return Err(self.fail(format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn nonneg(&self) -> Result<f64> {
        let v = self.f64()?;
        if v < 0.0 {
            return Err(self.fail(format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn int<T: std::str::FromStr>(&self) -> Result<T> {
        self.value.parse().map_err(|_| self.fail(format!("`{}` is not an integer in range", self.value)))
    }

    fn at_least(&self, lo: usize) -> Result<usize> {
        let v: usize = self.int()?;
        if v < lo {
            return Err(self.fail(format!("must be >= {lo}, got {v}")));
        }
        Ok(v)
    }

    fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.fail(format!("`{v}` is not true or false"))),
        }
    }

    fn string(&self) -> Result<String> {
        let v = self.value.trim_matches('"');
        if v.is_empty() {
            return Err(self.fail("must not be empty"));
        }
        Ok(v.to_string())
    }

    fn list(&self) -> Vec<&str> {
        self.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    fn choice<T: Copy>(&self, options: &[(&str, T)]) -> Result<T> {
        options
            .iter()
            .find(|(n, _)| *n == self.value)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.fail(format!("`{}` is not one of {}", self.value, names.join("|")))
            })
    }
}

const FAMILIES: [(&str, SurfaceFamily); 5] = [
    ("ridge", SurfaceFamily::Ridge),
    ("mountain", SurfaceFamily::Mountain),
    ("hill", SurfaceFamily::Hill),
    ("file", SurfaceFamily::File),
    ("flat", SurfaceFamily::Flat),
];
const RELATIONS: [(&str, HillRelations); 2] =
    [("published", HillRelations::Published), ("exact", HillRelations::Exact)];
const SOLVERS: [(&str, SolverKind); 2] = [("exact", SolverKind::Exact), ("sinkhorn", SolverKind::Sinkhorn)];
const NUS: [(&str, NuPlacement); 2] = [("uniform", NuPlacement::Uniform), ("boundary", NuPlacement::Boundary)];
const RATES: [(&str, RateEstimate); 2] =
    [("instantaneous", RateEstimate::Instantaneous), ("centered", RateEstimate::Centered)];
const FORMATS: [(&str, Format); 2] = [("csv", Format::Csv), ("pgm", Format::Pgm)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, x)| *x == v).map(|(n, _)| *n).expect("every variant is named")
}

fn assign(cfg: &mut RunConfig, e: &Entry) -> Result<()> {
    let (s, t, tr, an, out) = (
        &mut cfg.surface,
        &mut cfg.time,
        &mut cfg.transport,
        &mut cfg.analysis,
        &mut cfg.output,
    );
    match (e.section.as_str(), e.key.as_str()) {
        ("grid", "W") => cfg.grid.width = e.positive()?,
        ("grid", "L") => cfg.grid.length = e.positive()?,
        ("grid", "nx") => cfg.grid.nx = e.int()?,
        ("grid", "ny") => cfg.grid.ny = e.int()?,

        ("surface", "family") => s.family = e.choice(&FAMILIES)?,
        ("surface", "a") => s.a = Some(e.f64()?),
        ("surface", "b") => s.b = Some(e.f64()?),
        ("surface", "c") => s.c = Some(e.positive()?),
        ("surface", "d") => s.d = Some(e.f64()?),
        ("surface", "h1") => s.h1 = Some(e.nonneg()?),
        ("surface", "H1") => s.big_h1 = Some(e.positive()?),
        ("surface", "x0") => s.x0 = Some(e.f64()?),
        ("surface", "y0") => s.y0 = Some(e.f64()?),
        ("surface", "crest") => s.crest = Some(e.bool()?),
        ("surface", "beta") => s.beta = Some(e.f64()?),
        ("surface", "relations") => s.relations = Some(e.choice(&RELATIONS)?),
        ("surface", "input") => s.input = Some(e.string()?),
        ("surface", "water_input") => s.water_input = Some(e.string()?),
        ("surface", "depth") => s.depth = Some(e.nonneg()?),

        ("time", "t_end") => t.t_end = e.positive()?,
        ("time", "cfl_safety") => {
            let v = e.positive()?;
            if v > 1.0 {
                return Err(e.fail(format!("must lie in (0, 1], got {v}")));
            }
            t.cfl_safety = v;
        }
        ("time", "snapshot_stride") => t.snapshot_stride = e.at_least(1)?,
        ("time", "max_steps") => t.max_steps = e.at_least(1)?,
        ("time", "dt_max") => t.dt_max = Some(e.positive()?),

        ("transport", "solver") => tr.solver = e.choice(&SOLVERS)?,
        ("transport", "reg_eps") => tr.reg_eps = e.positive()?,
        ("transport", "eps_mass") => tr.eps_mass = e.nonneg()?,
        ("transport", "eps_grad") => tr.eps_grad = e.nonneg()?,
        ("transport", "snapshot") => tr.snapshot = e.int()?,
        ("transport", "nu") => tr.nu = e.choice(&NUS)?,
        ("transport", "rate") => tr.rate = e.choice(&RATES)?,
        ("transport", "max_iter") => tr.max_iter = e.at_least(1)?,
        ("transport", "tol") => tr.tol = e.positive()?,
        ("transport", "size_cap") => tr.size_cap = e.at_least(2)?,

        ("analysis", "k_list") => {
            let v = e
                .list()
                .iter()
                .map(|x| x.parse::<f64>().ok().filter(|k| k.is_finite() && *k > 0.0))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| e.fail("expected a comma-separated list of positive numbers"))?;
            if v.is_empty() {
                return Err(e.fail("must not be empty"));
            }
            an.k_list = v;
        }
        ("analysis", "n_test_functions") => an.n_test_functions = e.at_least(1)?,
        ("analysis", "seed") => an.seed = e.int()?,
        ("analysis", "ball_stride") => an.ball_stride = e.at_least(1)?,
        ("analysis", "quad_n") => an.quad_n = e.at_least(32)?,
        ("analysis", "levels") => {
            let v = e
                .list()
                .iter()
                .map(|x| x.parse::<usize>().ok().filter(|n| *n >= 4))
                .collect::<Option<Vec<usize>>>()
                .ok_or_else(|| e.fail("expected a comma-separated list of cell counts >= 4"))?;
            if v.len() < 2 || v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(e.fail("needs at least two strictly increasing levels"));
            }
            an.levels = v;
        }
        ("analysis", "c_r") => an.c_r = e.positive()?,
        ("analysis", "contraction_pairs") => an.contraction_pairs = e.at_least(1)?,

        ("output", "directory") => out.directory = e.string()?,
        ("output", "formats") => {
            let mut v = Vec::new();
            for name in e.list() {
                let f = FORMATS
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, f)| *f)
                    .ok_or_else(|| e.fail(format!("unknown format `{name}` (csv|pgm)")))?;
                if !v.contains(&f) {
                    v.push(f);
                }
            }
            out.formats = v;
        }
        _ => return Err(e.fail("unknown key")),
    }
    Ok(())
}

/// Checks that span several keys; errors cite the line of the first key
/// involved, or the override that set it.
fn cross_check(cfg: &RunConfig, lines: &HashMap<(String, String), usize>) -> Result<()> {
    let at = |section: &str, keys: &[&str]| {
        keys.iter()
            .find_map(|k| lines.get(&(section.to_string(), k.to_string())).copied())
            .unwrap_or(0)
    };
    if let Err(e) = cfg.grid.spec() {
        let g = &cfg.grid;
        let culprit: &[&str] = if g.nx < 2 {
            &["nx"]
        } else if g.ny < 2 {
            &["ny"]
        } else if !(g.width > 0.0 && g.width.is_finite()) {
            &["W"]
        } else if !(g.length > 0.0 && g.length.is_finite()) {
            &["L"]
        } else {
            &["nx", "ny", "W", "L"]
        };
        return Err(err(at("grid", culprit), format!("grid invariant: {e}")));
    }
    let s = &cfg.surface;
    let surface_line = || at("surface", &["family", "a", "b", "c", "d", "h1", "H1", "x0", "y0", "beta"]);
    match s.family {
        SurfaceFamily::Ridge | SurfaceFamily::Mountain => {
            if s.beta.is_some() || s.relations.is_some() {
                return Err(err(at("surface", &["beta", "relations"]), "beta and relations apply to hills only"));
            }
            if s.family == SurfaceFamily::Mountain && s.crest.is_some() {
                return Err(err(at("surface", &["crest"]), "crest applies to ridges only"));
            }
            s.separable()
                .validate()
                .map_err(|e| err(surface_line(), format!("surface: {e}")))?;
        }
        SurfaceFamily::Hill => {
            if s.a.is_some() || s.b.is_some() || s.crest.is_some() {
                return Err(err(at("surface", &["a", "b", "crest"]), "a, b and crest do not apply to hills"));
            }
            let p = s.hill();
            if let Some(d) = s.d {
                if (d - p.d).abs() > 1e-12 {
                    return Err(err(
                        at("surface", &["d"]),
                        format!("d = {d} disagrees with the derived hill exponent {}", p.d),
                    ));
                }
            }
            p.validate().map_err(|e| err(surface_line(), format!("surface: {e}")))?;
        }
        SurfaceFamily::File => {
            if s.input.is_none() {
                return Err(err(at("surface", &["family"]), "family = file needs `input`"));
            }
        }
        SurfaceFamily::Flat => {}
    }
    if s.family != SurfaceFamily::File && (s.input.is_some() || s.water_input.is_some()) {
        return Err(err(at("surface", &["input", "water_input"]), "input files apply to family = file only"));
    }
    Ok(())
}

fn build(entries: &[Entry]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut lines: HashMap<(String, String), usize> = HashMap::new();
    for e in entries {
        let id = (e.section.clone(), e.key.clone());
        if e.line != 0 {
            if let Some(prev) = lines.get(&id) {
                if *prev != 0 {
                    return Err(e.fail(format!("duplicate key (first set on line {prev})")));
                }
            }
        }
        assign(&mut cfg, e)?;
        lines.insert(id, e.line);
    }
    cross_check(&cfg, &lines)?;
    Ok(cfg)
}

/// Parses a configuration. Missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    build(&lex(text)?)
}

/// Parses a configuration and applies `section.key=value` overrides and an
/// optional seed on top.
pub fn parse_with_overrides(text: &str, overrides: &[String], seed: Option<&str>) -> Result<RunConfig> {
    let mut entries = lex(text)?;
    for o in overrides {
        entries.push(parse_override(o)?);
    }
    if let Some(seed) = seed {
        entries.push(Entry {
            section: "analysis".into(),
            key: "seed".into(),
            value: seed.trim().to_string(),
            line: 0,
        });
    }
    build(&entries)
}

/// Renders a configuration that parses back to the same value. Numbers use
/// the shortest representation that round-trips.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut o = String::new();
    let g = &cfg.grid;
    let _ = writeln!(o, "[grid]\nW = {}\nL = {}\nnx = {}\nny = {}", g.width, g.length, g.nx, g.ny);

    let s = &cfg.surface;
    let _ = writeln!(o, "\n[surface]\nfamily = {}", s.family.name());
    let opt = |o: &mut String, key: &str, v: Option<f64>| {
        if let Some(v) = v {
            let _ = writeln!(o, "{key} = {v}");
        }
    };
    opt(&mut o, "a", s.a);
    opt(&mut o, "b", s.b);
    opt(&mut o, "c", s.c);
    opt(&mut o, "d", s.d);
    opt(&mut o, "h1", s.h1);
    opt(&mut o, "H1", s.big_h1);
    opt(&mut o, "x0", s.x0);
    opt(&mut o, "y0", s.y0);
    if let Some(c) = s.crest {
        let _ = writeln!(o, "crest = {c}");
    }
    opt(&mut o, "beta", s.beta);
    if let Some(r) = s.relations {
        let _ = writeln!(o, "relations = {}", name_of(&RELATIONS, r));
    }
    if let Some(p) = &s.input {
        let _ = writeln!(o, "input = {p}");
    }
    if let Some(p) = &s.water_input {
        let _ = writeln!(o, "water_input = {p}");
    }
    opt(&mut o, "depth", s.depth);

    let t = &cfg.time;
    let _ = writeln!(
        o,
        "\n[time]\nt_end = {}\ncfl_safety = {}\nsnapshot_stride = {}\nmax_steps = {}",
        t.t_end, t.cfl_safety, t.snapshot_stride, t.max_steps
    );
    opt(&mut o, "dt_max", t.dt_max);

    let tr = &cfg.transport;
    let _ = writeln!(
        o,
        "\n[transport]\nsolver = {}\nreg_eps = {}\neps_mass = {}\neps_grad = {}\nsnapshot = {}\nnu = {}\nrate = {}\nmax_iter = {}\ntol = {}\nsize_cap = {}",
        name_of(&SOLVERS, tr.solver),
        tr.reg_eps,
        tr.eps_mass,
        tr.eps_grad,
        tr.snapshot,
        name_of(&NUS, tr.nu),
        name_of(&RATES, tr.rate),
        tr.max_iter,
        tr.tol,
        tr.size_cap
    );

    let an = &cfg.analysis;
    let join = |v: Vec<String>| v.join(", ");
    let _ = writeln!(
        o,
        "\n[analysis]\nk_list = {}\nn_test_functions = {}\nseed = {}\nball_stride = {}\nquad_n = {}\nlevels = {}\nc_r = {}\ncontraction_pairs = {}",
        join(an.k_list.iter().map(|k| k.to_string()).collect()),
        an.n_test_functions,
        an.seed,
        an.ball_stride,
        an.quad_n,
        join(an.levels.iter().map(|k| k.to_string()).collect()),
        an.c_r,
        an.contraction_pairs
    );

    let out = &cfg.output;
    let _ = writeln!(
        o,
        "\n[output]\ndirectory = {}\nformats = {}",
        out.directory,
        join(out.formats.iter().map(|f| name_of(&FORMATS, *f).to_string()).collect())
    );
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("# nothing here\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.grid.nx, 32);
        assert_eq!(cfg.time.t_end, 0.01);
        assert_eq!(cfg.transport.snapshot, -1);
        assert_eq!(cfg.analysis.k_list, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn zero_cells_cite_the_grid_invariant() {
        let e = parse_config("[grid]\nW = 1\nnx = 0\n").unwrap_err();
        match e {
            LabError::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("grid invariant"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let cases = [
            ("[grid]\nnz = 3\n", 2, "nz"),
            ("[time]\n\nt_end = soon\n", 3, "t_end"),
            ("[time]\ncfl_safety = 1.5\n", 2, "cfl_safety"),
            ("[surface]\nfamily = volcano\n", 2, "family"),
            ("[analysis]\nlevels = 64, 32\n", 2, "levels"),
            ("[grid]\nnx = 8\nnx = 9\n", 3, "duplicate"),
        ];
        for (text, want_line, needle) in cases {
            match parse_config(text) {
                Err(LabError::Parse { line, message }) => {
                    assert_eq!(line, want_line, "{text}");
                    assert!(message.contains(needle), "{message}");
                }
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(parse_config("nx = 3\n"), Err(LabError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[mesh]\n"), Err(LabError::Parse { line: 1, .. })));
    }

    #[test]
    fn family_constraints_are_checked() {
        assert!(parse_config("[surface]\nfamily = file\n").is_err());
        assert!(parse_config("[surface]\nfamily = hill\nbeta = 0.1\n").is_err());
        assert!(parse_config("[surface]\nfamily = hill\nd = 0.12\n").is_ok());
        assert!(parse_config("[surface]\nfamily = hill\nd = 0.2\n").is_err());
        assert!(parse_config("[surface]\nfamily = mountain\na = -1\n").is_err());
    }

    #[test]
    fn overrides_and_seed_apply_last() {
        let text = "[grid]\nnx = 8\n[analysis]\nseed = 3\n";
        let cfg = parse_with_overrides(text, &["grid.nx=12".into(), "time.t_end = 0.5".into()], Some("99")).unwrap();
        assert_eq!(cfg.grid.nx, 12);
        assert_eq!(cfg.time.t_end, 0.5);
        assert_eq!(cfg.analysis.seed, 99);
        assert!(matches!(
            parse_with_overrides(text, &["grid.nx".into()], None),
            Err(LabError::Parse { line: 0, .. })
        ));
        assert!(parse_with_overrides(text, &["grid.zz=1".into()], None).is_err());
    }

    #[test]
    fn comments_and_spacing() {
        let cfg = parse_config("  [time]  # run length\n t_end=0.25 # short\n").unwrap();
        assert_eq!(cfg.time.t_end, 0.25);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, (1u32..1000).prop_map(|k| 1.0 / k as f64), Just(1e-300)]
    }

    fn positive() -> impl Strategy<Value = f64> {
        prop_oneof![1e-9f64..1e6, (1u32..1000).prop_map(|k| 1.0 / k as f64)]
    }

    fn surface() -> impl Strategy<Value = SurfaceConfig> {
        let ridge = (
            prop::option::of(finite()),
            prop::option::of(finite()),
            prop::option::of(positive()),
            prop::option::of(finite()),
            prop::option::of(positive()),
            prop::option::of(positive()),
            prop::option::of(any::<bool>()),
        )
            .prop_map(|(a, b, c, d, h1, big, crest)| SurfaceConfig {
                a,
                b,
                c,
                d,
                h1,
                big_h1: big,
                crest,
                ..SurfaceConfig::default()
            });
        let hill = (prop::option::of(-0.49f64..-0.01), prop::option::of(positive()), any::<bool>()).prop_map(
            |(beta, big, exact)| SurfaceConfig {
                family: SurfaceFamily::Hill,
                beta,
                big_h1: big,
                relations: exact.then_some(HillRelations::Exact),
                ..SurfaceConfig::default()
            },
        );
        let file = ("[a-z]{1,8}\\.csv", prop::option::of("[a-z]{1,8}\\.csv"), prop::option::of(positive())).prop_map(
            |(input, water, depth)| SurfaceConfig {
                family: SurfaceFamily::File,
                input: Some(input),
                water_input: water,
                depth,
                ..SurfaceConfig::default()
            },
        );
        let flat = prop::option::of(positive()).prop_map(|depth| SurfaceConfig {
            family: SurfaceFamily::Flat,
            depth,
            ..SurfaceConfig::default()
        });
        prop_oneof![ridge, hill, file, flat]
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        let grid = (positive(), positive(), 2usize..500, 2usize..500)
            .prop_map(|(width, length, nx, ny)| GridConfig { width, length, nx, ny });
        let time = (positive(), 0.01f64..=1.0, 1usize..100, 1usize..100_000, prop::option::of(positive())).prop_map(
            |(t_end, cfl_safety, snapshot_stride, max_steps, dt_max)| TimeConfig {
                t_end,
                cfl_safety,
                snapshot_stride,
                max_steps,
                dt_max,
            },
        );
        let transport = (any::<bool>(), positive(), positive(), -5i64..50, any::<bool>(), any::<bool>(), 1usize..10_000)
            .prop_map(|(sk, reg_eps, tol, snapshot, boundary, centered, max_iter)| TransportConfig {
                solver: if sk { SolverKind::Sinkhorn } else { SolverKind::Exact },
                reg_eps,
                tol,
                snapshot,
                nu: if boundary { NuPlacement::Boundary } else { NuPlacement::Uniform },
                rate: if centered { RateEstimate::Centered } else { RateEstimate::Instantaneous },
                max_iter,
                ..TransportConfig::default()
            });
        let analysis = (prop::collection::vec(positive(), 1..4), any::<u64>(), 32usize..200, 1usize..5).prop_map(
            |(k_list, seed, quad_n, pairs)| AnalysisConfig {
                k_list,
                seed,
                quad_n,
                contraction_pairs: pairs,
                ..AnalysisConfig::default()
            },
        );
        let output = ("[a-z][a-z0-9_/]{0,12}", prop::sample::subsequence(vec![Format::Csv, Format::Pgm], 1..=2))
            .prop_map(|(directory, formats)| OutputConfig { directory, formats });
        (grid, surface(), time, transport, analysis, output).prop_map(|(grid, surface, time, transport, analysis, output)| {
            RunConfig { grid, surface, time, transport, analysis, output }
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_round_trips(cfg in config()) {
            // mountains need nonnegative slopes; skip draws the parser would reject
            prop_assume!(cross_check(&cfg, &HashMap::new()).is_ok());
            let text = serialize_config(&cfg);
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(serialize_config(&back), text);
        }
    }
}
