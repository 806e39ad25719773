//! Scenario configuration files.
//!
//! Scenarios are TOML documents. Every dimensional value is a string holding
//! a number followed by a unit, e.g. `"3.5 m"` or `"180 veh/km"`, so a file
//! never depends on the crate's internal units. The full grammar is
//! described in `docs/config.md`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::Range;

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::error::{ConfigIssue, Error, Result};
use crate::fundamental_diagram::FundamentalDiagram;
use crate::godunov::{BoundarySpec, FluxRule, SimGrid, StepConfig, StepFunction, Topology, CFL_GUARD};
use crate::riemann::RiemannProblem;
use crate::ring::{RingSpec, BOUNDARY_TOL};
use crate::supply_demand::SDState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Density,
    Flux,
    Speed,
    Length,
    Time,
    Vehicles,
}

impl Dim {
    fn name(self) -> &'static str {
        match self {
            Dim::Density => "density",
            Dim::Flux => "flux",
            Dim::Speed => "speed",
            Dim::Length => "length",
            Dim::Time => "time",
            Dim::Vehicles => "vehicle count",
        }
    }

    fn example(self) -> &'static str {
        match self {
            Dim::Density => "\"28 veh/km\"",
            Dim::Flux => "\"0.5 veh/s\"",
            Dim::Speed => "\"27.8 m/s\"",
            Dim::Length => "\"3.5 m\"",
            Dim::Time => "\"0.1 s\"",
            Dim::Vehicles => "\"858.4 veh\"",
        }
    }
}

// unit, dimension, factor to internal units (veh, km, s)
const UNITS: &[(&str, Dim, f64)] = &[
    ("veh/km", Dim::Density, 1.0),
    ("veh/m", Dim::Density, 1000.0),
    ("veh/s", Dim::Flux, 1.0),
    ("veh/min", Dim::Flux, 1.0 / 60.0),
    ("veh/h", Dim::Flux, 1.0 / 3600.0),
    ("km/s", Dim::Speed, 1.0),
    ("m/s", Dim::Speed, 1e-3),
    ("km/h", Dim::Speed, 1.0 / 3600.0),
    ("km", Dim::Length, 1.0),
    ("m", Dim::Length, 1e-3),
    ("s", Dim::Time, 1.0),
    ("min", Dim::Time, 60.0),
    ("h", Dim::Time, 3600.0),
    ("veh", Dim::Vehicles, 1.0),
];

/// Parses `"<number> <unit>"` into internal units.
pub fn parse_quantity(text: &str, dim: Dim) -> std::result::Result<f64, String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
        .or_else(|| text.find(char::is_whitespace))
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let unit = unit.trim();
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot read a number from {text:?}"))?;
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    if unit.is_empty() {
        return Err(format!("{text:?} has no unit; write a {} such as {}", dim.name(), dim.example()));
    }
    match UNITS.iter().find(|u| u.0 == unit) {
        Some(&(_, d, factor)) if d == dim => Ok(value * factor),
        Some(&(_, d, _)) => Err(format!("unit {unit:?} is a {}, expected a {}", d.name(), dim.name())),
        None => Err(format!("unknown unit {unit:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Ring,
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// km.
    pub length: f64,
    pub diagram: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadConfig {
    pub topology: TopologyKind,
    pub segments: Vec<SegmentConfig>,
}

impl RoadConfig {
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `ρ(x) = a(x)·(rho0 + amplitude·sin(2πx/L))` with `a(x)` the lane count
    /// of the local diagram.
    Sinusoid { rho0: f64, amplitude: f64 },
    /// Consecutive `(length km, density veh/km)` pieces covering the road.
    Piecewise(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub dx: f64,
    pub dt: f64,
    pub duration: f64,
    pub record_every: f64,
    pub flux_rule: FluxRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    Density(f64),
    DemandSupply { demand: f64, supply: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiemannConfig {
    pub upstream: String,
    pub downstream: String,
    pub u1: StateSpec,
    pub u2: StateSpec,
    /// Largest `|x/t|` sampled in the profile CSV, km/s.
    pub xi_max: Option<f64>,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingConfig {
    pub vehicles: Option<f64>,
    pub boundary_tolerance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub diagrams: BTreeMap<String, FundamentalDiagram>,
    pub road: Option<RoadConfig>,
    pub initial: Option<InitialCondition>,
    pub boundary: Option<BoundarySpec>,
    pub numerics: Option<Numerics>,
    pub riemann: Option<RiemannConfig>,
    pub ring: Option<RingConfig>,
    pub output: OutputConfig,
    /// Set when the CFL number lies in `(0.95, 1]` and the override was
    /// given.
    pub allow_high_cfl: bool,
}

/// Parses and validates a scenario. All problems are reported together.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_with(text, false)
}

/// As [`parse_config`]; `allow_high_cfl` accepts CFL numbers up to 1.
pub fn parse_config_with(text: &str, allow_high_cfl: bool) -> Result<ScenarioConfig> {
    let root = DeTable::parse(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        Error::Config(vec![ConfigIssue::new(line, e.message().trim().to_string())])
    })?;
    let mut cx = Cx { text, issues: Vec::new() };
    let mut cfg = ScenarioConfig {
        diagrams: BTreeMap::new(),
        road: None,
        initial: None,
        boundary: None,
        numerics: None,
        riemann: None,
        ring: None,
        output: OutputConfig::default(),
        allow_high_cfl,
    };
    let mut numerics_span = 0..0;
    for (key, value) in root.get_ref().iter() {
        let name: &str = key.get_ref();
        let Some(table) = cx.table(value, name) else { continue };
        match name {
            "diagram" => {
                for (dname, dvalue) in table.iter() {
                    let dname: &str = dname.get_ref();
                    if let Some(t) = cx.table(dvalue, &format!("diagram.{dname}")) {
                        if let Some(fd) = parse_diagram(&mut cx, t, dvalue.span(), dname) {
                            cfg.diagrams.insert(dname.to_string(), fd);
                        }
                    }
                }
            }
            "road" => cfg.road = parse_road(&mut cx, table, value.span()),
            "initial" => cfg.initial = parse_initial(&mut cx, table, value.span()),
            "boundary" => cfg.boundary = parse_boundary(&mut cx, table, value.span()),
            "numerics" => {
                numerics_span = value.span();
                cfg.numerics = parse_numerics(&mut cx, table, value.span());
            }
            "riemann" => cfg.riemann = parse_riemann(&mut cx, table, value.span()),
            "ring" => cfg.ring = parse_ring(&mut cx, table, value.span()),
            "output" => {
                let mut s = Section::new(table, value.span(), "output");
                cfg.output.csv = s.opt_string(&mut cx, "csv");
                cfg.output.report = s.opt_string(&mut cx, "report");
                s.finish(&mut cx);
            }
            other => cx.push(key.span(), format!("unknown section [{other}]")),
        }
    }
    cross_check(&mut cx, &cfg, numerics_span);
    if cx.issues.is_empty() {
        Ok(cfg)
    } else {
        cx.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(Error::Config(cx.issues))
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

struct Cx<'t> {
    text: &'t str,
    issues: Vec<ConfigIssue>,
}

impl Cx<'_> {
    fn push(&mut self, span: Range<usize>, msg: impl Into<String>) {
        let line = line_of(self.text, span.start);
        self.issues.push(ConfigIssue::new(Some(line), msg));
    }

    fn table<'a, 'i>(&mut self, v: &'a Spanned<DeValue<'i>>, path: &str) -> Option<&'a DeTable<'i>> {
        match v.get_ref() {
            DeValue::Table(t) => Some(t),
            other => {
                self.push(v.span(), format!("{path} must be a table, found {}", other.type_str()));
                None
            }
        }
    }
}

/// Key lookup over one table that remembers which keys were consumed.
struct Section<'a, 'i> {
    table: &'a DeTable<'i>,
    span: Range<usize>,
    path: String,
    used: Vec<String>,
}

impl<'a, 'i> Section<'a, 'i> {
    fn new(table: &'a DeTable<'i>, span: Range<usize>, path: impl Into<String>) -> Self {
        Self { table, span, path: path.into(), used: Vec::new() }
    }

    fn get(&mut self, key: &str) -> Option<&'a Spanned<DeValue<'i>>> {
        self.used.push(key.to_string());
        let table: &'a DeTable<'i> = self.table;
        table.iter().find(|(k, _)| {
            let k: &str = k.get_ref();
            k == key
        }).map(|(_, v)| v)
    }

    fn missing(&self, cx: &mut Cx, key: &str) {
        cx.push(self.span.clone(), format!("[{}] is missing `{key}`", self.path));
    }

    fn opt_quantity(&mut self, cx: &mut Cx, key: &str, dim: Dim) -> Option<f64> {
        let v = self.get(key)?;
        match v.get_ref() {
            DeValue::String(s) => match parse_quantity(s, dim) {
                Ok(x) => Some(x),
                Err(msg) => {
                    cx.push(v.span(), format!("{}.{key}: {msg}", self.path));
                    None
                }
            },
            DeValue::Integer(_) | DeValue::Float(_) => {
                cx.push(
                    v.span(),
                    format!("{}.{key}: a {} needs a unit, e.g. {}", self.path, dim.name(), dim.example()),
                );
                None
            }
            other => {
                cx.push(v.span(), format!("{}.{key}: expected a quantity string, found {}", self.path, other.type_str()));
                None
            }
        }
    }

    fn quantity(&mut self, cx: &mut Cx, key: &str, dim: Dim) -> Option<f64> {
        if self.get(key).is_none() {
            self.missing(cx, key);
            return None;
        }
        self.opt_quantity(cx, key, dim)
    }

    fn opt_number(&mut self, cx: &mut Cx, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        let parsed = match v.get_ref() {
            DeValue::Integer(i) => i.as_str().replace('_', "").parse::<f64>().ok(),
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().ok(),
            _ => None,
        };
        if parsed.is_none() {
            cx.push(v.span(), format!("{}.{key}: expected a plain number", self.path));
        }
        parsed
    }

    fn opt_string(&mut self, cx: &mut Cx, key: &str) -> Option<String> {
        let v = self.get(key)?;
        match v.get_ref() {
            DeValue::String(s) => Some(s.to_string()),
            other => {
                cx.push(v.span(), format!("{}.{key}: expected a string, found {}", self.path, other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, cx: &mut Cx, key: &str) -> Option<String> {
        if self.get(key).is_none() {
            self.missing(cx, key);
            return None;
        }
        self.opt_string(cx, key)
    }

    fn array(&mut self, cx: &mut Cx, key: &str) -> Option<&'a [Spanned<DeValue<'i>>]> {
        let v = self.get(key)?;
        match v.get_ref() {
            DeValue::Array(a) => Some(a),
            other => {
                cx.push(v.span(), format!("{}.{key}: expected an array, found {}", self.path, other.type_str()));
                None
            }
        }
    }

    fn span_of(&self, key: &str) -> Range<usize> {
        self.table
            .iter()
            .find(|(k, _)| {
                let k: &str = k.get_ref();
                k == key
            })
            .map_or(self.span.clone(), |(_, v)| v.span())
    }

    fn finish(self, cx: &mut Cx) {
        for (k, _) in self.table.iter() {
            let name: &str = k.get_ref();
            if !self.used.iter().any(|u| u == name) {
                cx.push(k.span(), format!("unknown key `{name}` in [{}]", self.path));
            }
        }
    }
}

fn parse_diagram(cx: &mut Cx, t: &DeTable, span: Range<usize>, name: &str) -> Option<FundamentalDiagram> {
    let mut s = Section::new(t, span.clone(), format!("diagram.{name}"));
    let family = s.string(cx, "family");
    let fd = match family.as_deref() {
        Some("greenshields") => {
            let v = s.quantity(cx, "v_free", Dim::Speed);
            let rj = s.quantity(cx, "rho_jam", Dim::Density);
            v.zip(rj).map(|(v, rj)| FundamentalDiagram::greenshields(v, rj))
        }
        Some("triangular") | Some("trapezoidal") => {
            let v = s.quantity(cx, "v_free", Dim::Speed);
            let rj = s.quantity(cx, "rho_jam", Dim::Density);
            let vc = s.opt_quantity(cx, "v_cong", Dim::Speed);
            let rc = s.opt_quantity(cx, "rho_crit", Dim::Density);
            let qmax = s.opt_quantity(cx, "q_max", Dim::Flux).unwrap_or(f64::INFINITY);
            match (v, rj, vc, rc) {
                (Some(v), Some(rj), Some(vc), None) => Some(FundamentalDiagram::trapezoidal(v, vc, rj, qmax)),
                (Some(v), Some(rj), None, Some(rc)) => Some(
                    FundamentalDiagram::triangular_from_critical(v, rc, rj)
                        .and_then(|fd| match fd.family() {
                            crate::fundamental_diagram::Family::Trapezoidal { v_cong, .. } => {
                                FundamentalDiagram::trapezoidal(v, v_cong, rj, qmax)
                            }
                            _ => Ok(fd),
                        }),
                ),
                (_, _, Some(_), Some(_)) => {
                    cx.push(span.clone(), format!("[diagram.{name}] gives both `v_cong` and `rho_crit`; keep one"));
                    None
                }
                (Some(_), Some(_), None, None) => {
                    cx.push(span.clone(), format!("[diagram.{name}] needs `v_cong` or `rho_crit`"));
                    None
                }
                _ => None,
            }
        }
        Some("kerner-konhauser") => {
            let lanes = s.opt_number(cx, "lanes").or(Some(1.0));
            let rj = s.quantity(cx, "rho_jam_lane", Dim::Density);
            let tau = s.quantity(cx, "tau", Dim::Time);
            let ul = s.quantity(cx, "unit_length", Dim::Length);
            match (lanes, rj, tau, ul) {
                (Some(a), Some(rj), Some(tau), Some(ul)) => Some(FundamentalDiagram::kerner_konhauser(a, rj, tau, ul)),
                _ => None,
            }
        }
        Some(other) => {
            let sp = s.span_of("family");
            cx.push(
                sp,
                format!("unknown family {other:?}; use greenshields, triangular, trapezoidal or kerner-konhauser"),
            );
            // consume the remaining keys so only the family is reported
            let keys: Vec<String> = t.iter().map(|(k, _)| k.get_ref().to_string()).collect();
            s.used.extend(keys);
            None
        }
        None => None,
    };
    s.finish(cx);
    match fd? {
        Ok(fd) => Some(fd),
        Err(e) => {
            cx.push(span, format!("[diagram.{name}]: {e}"));
            None
        }
    }
}

fn parse_road(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<RoadConfig> {
    let mut s = Section::new(t, span.clone(), "road");
    let topology = match s.string(cx, "topology").as_deref() {
        Some("ring") => Some(TopologyKind::Ring),
        Some("open") => Some(TopologyKind::Open),
        Some(other) => {
            cx.push(s.span_of("topology"), format!("road.topology: {other:?} is neither \"ring\" nor \"open\""));
            None
        }
        None => None,
    };
    let mut segments = Vec::new();
    let mut ok = true;
    match s.array(cx, "segment") {
        Some(items) if !items.is_empty() => {
            for item in items {
                let Some(st) = cx.table(item, "road.segment") else {
                    ok = false;
                    continue;
                };
                let mut seg = Section::new(st, item.span(), "road.segment");
                let length = seg.quantity(cx, "length", Dim::Length);
                let diagram = seg.string(cx, "diagram");
                seg.finish(cx);
                match (length, diagram) {
                    (Some(l), Some(d)) if l > 0.0 => segments.push(SegmentConfig { length: l, diagram: d }),
                    (Some(_), Some(_)) => {
                        cx.push(item.span(), "road.segment.length must be positive");
                        ok = false;
                    }
                    _ => ok = false,
                }
            }
        }
        Some(_) => {
            cx.push(span.clone(), "[road] needs at least one [[road.segment]]");
            ok = false;
        }
        None => {
            if t.iter().all(|(k, _)| k.get_ref().as_ref() != "segment") {
                s.missing(cx, "segment");
            }
            ok = false;
        }
    }
    s.finish(cx);
    ok.then_some(RoadConfig { topology: topology?, segments })
}

fn parse_initial(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<InitialCondition> {
    let mut s = Section::new(t, span.clone(), "initial");
    let out = match s.string(cx, "kind").as_deref() {
        Some("sinusoid") => {
            let rho0 = s.quantity(cx, "rho0", Dim::Density);
            let amp = s.opt_quantity(cx, "amplitude", Dim::Density).unwrap_or(0.0);
            rho0.map(|rho0| InitialCondition::Sinusoid { rho0, amplitude: amp })
        }
        Some("uniform") => s.quantity(cx, "rho", Dim::Density).map(|r| InitialCondition::Sinusoid { rho0: r, amplitude: 0.0 }),
        Some("piecewise") => {
            let mut pieces = Vec::new();
            let mut ok = true;
            match s.array(cx, "piece") {
                Some(items) => {
                    for item in items {
                        let Some(pt) = cx.table(item, "initial.piece") else {
                            ok = false;
                            continue;
                        };
                        let mut p = Section::new(pt, item.span(), "initial.piece");
                        let l = p.quantity(cx, "length", Dim::Length);
                        let r = p.quantity(cx, "rho", Dim::Density);
                        p.finish(cx);
                        match (l, r) {
                            (Some(l), Some(r)) => pieces.push((l, r)),
                            _ => ok = false,
                        }
                    }
                }
                None => {
                    s.missing(cx, "piece");
                    ok = false;
                }
            }
            ok.then_some(InitialCondition::Piecewise(pieces))
        }
        Some(other) => {
            cx.push(s.span_of("kind"), format!("initial.kind: {other:?} is not sinusoid, uniform or piecewise"));
            let keys: Vec<String> = t.iter().map(|(k, _)| k.get_ref().to_string()).collect();
            s.used.extend(keys);
            None
        }
        None => None,
    };
    s.finish(cx);
    out
}

fn parse_steps(cx: &mut Cx, s: &mut Section, key: &str) -> Option<StepFunction> {
    let items = s.array(cx, key)?;
    let mut steps = Vec::new();
    let mut ok = true;
    for item in items {
        let path = format!("boundary.{key}");
        let Some(t) = cx.table(item, &path) else {
            ok = false;
            continue;
        };
        let mut e = Section::new(t, item.span(), path);
        let start = e.opt_quantity(cx, "from", Dim::Time).unwrap_or(0.0);
        let value = e.quantity(cx, "value", Dim::Flux);
        e.finish(cx);
        match value {
            Some(v) => steps.push((start, v)),
            None => ok = false,
        }
    }
    if !ok {
        return None;
    }
    match StepFunction::new(steps) {
        Ok(f) => Some(f),
        Err(e) => {
            cx.push(s.span_of(key), format!("boundary.{key}: {e}"));
            None
        }
    }
}

fn parse_boundary(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<BoundarySpec> {
    let mut s = Section::new(t, span, "boundary");
    let demand = parse_steps(cx, &mut s, "demand");
    let supply = parse_steps(cx, &mut s, "supply");
    let has = |k: &str| t.iter().any(|(key, _)| key.get_ref().as_ref() == k);
    if !has("demand") {
        s.missing(cx, "demand");
    }
    if !has("supply") {
        s.missing(cx, "supply");
    }
    s.finish(cx);
    Some(BoundarySpec { left_demand: demand?, right_supply: supply? })
}

fn parse_numerics(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<Numerics> {
    let mut s = Section::new(t, span, "numerics");
    let dx = s.quantity(cx, "dx", Dim::Length);
    let dt = s.quantity(cx, "dt", Dim::Time);
    let duration = s.quantity(cx, "duration", Dim::Time);
    let record_every = s.opt_quantity(cx, "record_every", Dim::Time);
    let flux_rule = match s.opt_string(cx, "flux_rule").as_deref() {
        None | Some("supply-demand") => Some(FluxRule::SupplyDemand),
        Some("osher") => Some(FluxRule::Osher),
        Some(other) => {
            cx.push(s.span_of("flux_rule"), format!("numerics.flux_rule: {other:?} is neither \"supply-demand\" nor \"osher\""));
            None
        }
    };
    for (key, v) in [("dx", dx), ("dt", dt)] {
        if matches!(v, Some(x) if x <= 0.0) {
            cx.push(s.span_of(key), format!("numerics.{key} must be positive"));
        }
    }
    if matches!(duration, Some(x) if x < 0.0) {
        cx.push(s.span_of("duration"), "numerics.duration must be nonnegative");
    }
    s.finish(cx);
    let (dx, dt, duration) = (dx?, dt?, duration?);
    if dx <= 0.0 || dt <= 0.0 || duration < 0.0 {
        return None;
    }
    Some(Numerics { dx, dt, duration, record_every: record_every.unwrap_or(duration), flux_rule: flux_rule? })
}

fn parse_state(cx: &mut Cx, s: &mut Section, key: &str) -> Option<StateSpec> {
    let Some(v) = s.get(key) else {
        s.missing(cx, key);
        return None;
    };
    let t = cx.table(v, &format!("riemann.{key}"))?;
    let mut st = Section::new(t, v.span(), format!("riemann.{key}"));
    let rho = st.opt_quantity(cx, "rho", Dim::Density);
    let d = st.opt_quantity(cx, "demand", Dim::Flux);
    let sup = st.opt_quantity(cx, "supply", Dim::Flux);
    let has = |k: &str| t.iter().any(|(key, _)| key.get_ref().as_ref() == k);
    st.finish(cx);
    match (has("rho"), has("demand") || has("supply")) {
        (true, false) => rho.map(StateSpec::Density),
        (false, true) => match (d, sup) {
            (Some(demand), Some(supply)) => Some(StateSpec::DemandSupply { demand, supply }),
            _ => {
                if !(has("demand") && has("supply")) {
                    cx.push(v.span(), format!("riemann.{key} needs both `demand` and `supply`"));
                }
                None
            }
        },
        _ => {
            cx.push(v.span(), format!("riemann.{key} needs either `rho` or `demand` and `supply`"));
            None
        }
    }
}

fn parse_riemann(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<RiemannConfig> {
    let mut s = Section::new(t, span.clone(), "riemann");
    let up = s.string(cx, "upstream");
    let down = s.string(cx, "downstream");
    let u1 = parse_state(cx, &mut s, "u1");
    let u2 = parse_state(cx, &mut s, "u2");
    let xi_max = s.opt_quantity(cx, "xi_max", Dim::Speed);
    let samples = s.opt_number(cx, "samples").unwrap_or(201.0);
    if !(samples >= 2.0 && samples.fract() == 0.0) {
        cx.push(s.span_of("samples"), "riemann.samples must be an integer of at least 2");
    }
    s.finish(cx);
    Some(RiemannConfig { upstream: up?, downstream: down?, u1: u1?, u2: u2?, xi_max, samples: samples as usize })
}

fn parse_ring(cx: &mut Cx, t: &DeTable, span: Range<usize>) -> Option<RingConfig> {
    let mut s = Section::new(t, span, "ring");
    let vehicles = s.opt_quantity(cx, "vehicles", Dim::Vehicles);
    let tol = s.opt_quantity(cx, "boundary_tolerance", Dim::Vehicles).unwrap_or(BOUNDARY_TOL);
    s.finish(cx);
    Some(RingConfig { vehicles, boundary_tolerance: tol })
}

// Checks that need more than one section.
fn cross_check(cx: &mut Cx, cfg: &ScenarioConfig, numerics_span: Range<usize>) {
    let known = |name: &str| cfg.diagrams.contains_key(name);
    let text = cx.text;
    let find_line = |needle: &str| text.find(needle).map(|o| line_of(text, o));
    let mut unresolved = Vec::new();
    if let Some(road) = &cfg.road {
        for seg in &road.segments {
            if !known(&seg.diagram) {
                unresolved.push(seg.diagram.clone());
            }
        }
    }
    if let Some(r) = &cfg.riemann {
        for name in [&r.upstream, &r.downstream] {
            if !known(name) {
                unresolved.push(name.clone());
            }
        }
    }
    unresolved.dedup();
    for name in unresolved {
        let line = find_line(&format!("\"{name}\""));
        cx.issues.push(ConfigIssue::new(line, format!("diagram {name:?} is not defined")));
    }

    let (Some(road), Some(num)) = (&cfg.road, &cfg.numerics) else {
        if let (Some(road), None) = (&cfg.road, &cfg.boundary) {
            if road.topology == TopologyKind::Open {
                cx.issues.push(ConfigIssue::new(find_line("[road]"), "an open road needs a [boundary] section"));
            }
        }
        return;
    };
    if road.topology == TopologyKind::Open && cfg.boundary.is_none() {
        cx.issues.push(ConfigIssue::new(find_line("[road]"), "an open road needs a [boundary] section"));
    }
    for seg in &road.segments {
        let cells = seg.length / num.dx;
        if (cells - cells.round()).abs() > 1e-6 * cells.max(1.0) || cells.round() < 1.0 {
            cx.issues.push(ConfigIssue::new(
                find_line("[[road.segment]]"),
                format!("segment length {} km is not a whole number of cells of {} km", seg.length, num.dx),
            ));
        }
    }
    let vmax = road
        .segments
        .iter()
        .filter_map(|s| cfg.diagrams.get(&s.diagram))
        .map(|fd| fd.max_speed())
        .fold(0.0, f64::max);
    let cfl = vmax * num.dt / num.dx;
    let line = Some(line_of(text, numerics_span.start));
    if cfl > 1.0 {
        cx.issues.push(ConfigIssue::new(line, format!("CFL number {cfl:.4} exceeds 1; reduce dt or enlarge dx")));
    } else if cfl > CFL_GUARD && !cfg.allow_high_cfl {
        cx.issues.push(ConfigIssue::new(
            line,
            format!("CFL number {cfl:.4} exceeds {CFL_GUARD}; pass --override-cfl to run anyway"),
        ));
    }
    if let Some(InitialCondition::Piecewise(pieces)) = &cfg.initial {
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        if (total - road.length()).abs() > 1e-9 * road.length() {
            cx.issues.push(ConfigIssue::new(
                find_line("[initial]"),
                format!("initial pieces cover {total} km but the road is {} km long", road.length()),
            ));
        }
    }
}

impl ScenarioConfig {
    fn section<'a, T>(&self, v: &'a Option<T>, name: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::config(format!("scenario has no [{name}] section")))
    }

    fn diagram(&self, name: &str) -> Result<FundamentalDiagram> {
        self.diagrams
            .get(name)
            .copied()
            .ok_or_else(|| Error::config(format!("diagram {name:?} is not defined")))
    }

    pub fn numerics(&self) -> Result<&Numerics> {
        self.section(&self.numerics, "numerics")
    }

    pub fn road(&self) -> Result<&RoadConfig> {
        self.section(&self.road, "road")
    }

    pub fn step_config(&self) -> Result<StepConfig> {
        let n = self.numerics()?;
        Ok(StepConfig { dt: n.dt, flux_rule: n.flux_rule, allow_high_cfl: self.allow_high_cfl })
    }

    /// The discretised road with its initial densities.
    pub fn build_grid(&self) -> Result<SimGrid> {
        let road = self.road()?;
        let num = self.numerics()?;
        let init = self.section(&self.initial, "initial")?;
        let mut names: Vec<&str> = Vec::new();
        let mut cell_diagram = Vec::new();
        for seg in &road.segments {
            let k = match names.iter().position(|n| *n == seg.diagram) {
                Some(k) => k,
                None => {
                    names.push(&seg.diagram);
                    names.len() - 1
                }
            };
            let cells = (seg.length / num.dx).round() as usize;
            cell_diagram.extend(std::iter::repeat_n(k, cells));
        }
        let diagrams = names.iter().map(|n| self.diagram(n)).collect::<Result<Vec<_>>>()?;
        let dx = num.dx;
        let length = dx * cell_diagram.len() as f64;
        let rho: Vec<f64> = match init {
            InitialCondition::Sinusoid { rho0, amplitude } => cell_diagram
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    // exact cell average of the sinusoid
                    let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
                    let w = 2.0 * PI / length;
                    let mean = rho0 - amplitude * ((w * b).cos() - (w * a).cos()) / (w * dx);
                    diagrams[k].lanes() * mean
                })
                .collect(),
            InitialCondition::Piecewise(pieces) => {
                let mut edges = Vec::with_capacity(pieces.len());
                let mut acc = 0.0;
                for &(l, r) in pieces {
                    acc += l;
                    edges.push((acc, r));
                }
                cell_diagram
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| {
                        let x = (i as f64 + 0.5) * dx;
                        let r = edges.iter().find(|e| x < e.0).or(edges.last()).map_or(0.0, |e| e.1);
                        diagrams[k].lanes() * r
                    })
                    .collect()
            }
        };
        let topology = match road.topology {
            TopologyKind::Ring => Topology::Ring,
            TopologyKind::Open => Topology::Open(self.section(&self.boundary, "boundary")?.clone()),
        };
        SimGrid::new(diagrams, cell_diagram, rho, dx, topology).map_err(|e| match e {
            Error::Domain(msg) => Error::config(format!("road: {msg}")),
            other => other,
        })
    }

    /// Two-link ring from `[road]`, with the vehicle count taken from
    /// `[ring].vehicles` or else integrated from `[initial]`.
    pub fn ring_spec(&self) -> Result<RingSpec> {
        let road = self.road()?;
        if road.topology != TopologyKind::Ring || road.segments.len() != 2 {
            return Err(Error::config("ring analysis needs a ring road with exactly two segments"));
        }
        let fd1 = self.diagram(&road.segments[0].diagram)?;
        let fd2 = self.diagram(&road.segments[1].diagram)?;
        let (l1, l) = (road.segments[0].length, road.length());
        let shell = RingSpec::new(l, l1, fd1, fd2, 0.0).map_err(|e| Error::config(e.to_string()))?;
        let vehicles = match (self.ring.and_then(|r| r.vehicles), &self.initial) {
            (Some(n), _) => n,
            (None, Some(InitialCondition::Sinusoid { rho0, amplitude })) => {
                crate::ring::vehicles_of_initial(&shell, *rho0, *amplitude).map_err(|e| Error::config(e.to_string()))?
            }
            (None, Some(InitialCondition::Piecewise(pieces))) => pieces.iter().map(|(l, r)| l * r).sum(),
            (None, None) => return Err(Error::config("set [ring].vehicles or give an [initial] condition")),
        };
        shell.with_vehicles(vehicles).map_err(|e| Error::config(e.to_string()))
    }

    pub fn boundary_tolerance(&self) -> f64 {
        self.ring.map_or(BOUNDARY_TOL, |r| r.boundary_tolerance)
    }

    pub fn riemann_problem(&self) -> Result<RiemannProblem> {
        let r = self.section(&self.riemann, "riemann")?;
        let fd_up = self.diagram(&r.upstream)?;
        let fd_down = self.diagram(&r.downstream)?;
        let state = |spec: &StateSpec, fd: &FundamentalDiagram| -> Result<SDState> {
            match *spec {
                StateSpec::Density(rho) => SDState::from_density(fd, rho * fd.lanes()),
                StateSpec::DemandSupply { demand, supply } => {
                    let u = SDState::new(demand, supply);
                    u.validate(fd)?;
                    Ok(u)
                }
            }
        };
        let wrap = |e: Error| Error::config(format!("riemann: {e}"));
        let u1 = state(&r.u1, &fd_up).map_err(wrap)?;
        let u2 = state(&r.u2, &fd_down).map_err(wrap)?;
        RiemannProblem::new(fd_up, fd_down, u1, u2).map_err(wrap)
    }
}
