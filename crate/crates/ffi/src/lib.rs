//! C ABI over the `kinwave` core.
//!
//! Every entry point returns a [`KwStatus`]; results travel through out
//! pointers. Diagrams, grids and parsed scenarios are opaque heap handles
//! released with their matching `*_free` function. On failure the message is
//! kept per thread and can be read with [`kw_last_error_message`].
//!
//! # Safety
//!
//! Pointer arguments must be NULL or valid for the access the function
//! documents; NULL is reported as `NullPointer`, never dereferenced. Handles
//! must come from this library and be freed at most once. Array arguments
//! must hold the stated number of elements.

#![allow(clippy::missing_safety_doc, clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kinwave::config::{parse_config, ScenarioConfig};
use kinwave::godunov::{BoundarySpec, SimGrid, StepConfig, StepFunction, Topology};
use kinwave::riemann::{self, Direction, RiemannProblem, Wave, WaveKind};
use kinwave::ring::{predict, RingSpec, Scenario};
use kinwave::{Error, FundamentalDiagram, SDState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KwStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Model = 3,
    State = 4,
    Config = 5,
    Logic = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque fundamental diagram.
pub struct KwDiagram(FundamentalDiagram);

/// Opaque simulation grid.
pub struct KwGrid(SimGrid);

/// Opaque parsed scenario file.
pub struct KwScenario(ScenarioConfig);

/// Demand and supply in veh/s.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwState {
    pub demand: f64,
    pub supply: f64,
}

/// `kind`: 0 none, 1 shock, 2 rarefaction. `direction`: -1 backward,
/// 0 stationary, 1 forward. Speeds in km/s.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwWave {
    pub kind: i32,
    pub direction: i32,
    pub speed_min: f64,
    pub speed_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwRiemannSolution {
    pub boundary_flux: f64,
    pub stat_up: KwState,
    pub stat_down: KwState,
    pub wave_up: KwWave,
    pub wave_down: KwWave,
}

/// `scenario` is one of 'a'..'d'; `l2` is NaN when the profile has no
/// stationary shock.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwRingPrediction {
    pub scenario: c_char,
    pub q: f64,
    pub l2: f64,
    pub threshold_a: f64,
    pub threshold_c: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> KwStatus {
    match e {
        Error::Domain(_) => KwStatus::Domain,
        Error::Model(_) => KwStatus::Model,
        Error::State(_) => KwStatus::State,
        Error::Logic(_) => KwStatus::Logic,
        Error::Config(_) => KwStatus::Config,
        Error::Io { .. } => KwStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> KwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KwStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            KwStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            KwStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn kw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn boxed_diagram(fd: kinwave::Result<FundamentalDiagram>, out: *mut *mut KwDiagram) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    let d = Box::new(KwDiagram(fd?));
    unsafe { out.write(Box::into_raw(d)) };
    Ok(())
}

/// Greenshields diagram. Speeds in km/s, densities in veh/km.
#[no_mangle]
pub unsafe extern "C" fn kw_diagram_greenshields(v_free: f64, rho_jam: f64, out: *mut *mut KwDiagram) -> KwStatus {
    guard(|| boxed_diagram(FundamentalDiagram::greenshields(v_free, rho_jam), out))
}

#[no_mangle]
pub unsafe extern "C" fn kw_diagram_triangular(v_free: f64, v_cong: f64, rho_jam: f64, out: *mut *mut KwDiagram) -> KwStatus {
    guard(|| boxed_diagram(FundamentalDiagram::triangular(v_free, v_cong, rho_jam), out))
}

#[no_mangle]
pub unsafe extern "C" fn kw_diagram_trapezoidal(
    v_free: f64,
    v_cong: f64,
    rho_jam: f64,
    q_max: f64,
    out: *mut *mut KwDiagram,
) -> KwStatus {
    guard(|| boxed_diagram(FundamentalDiagram::trapezoidal(v_free, v_cong, rho_jam, q_max), out))
}

/// `tau` in s, `unit_length` in km.
#[no_mangle]
pub unsafe extern "C" fn kw_diagram_kerner_konhauser(
    lanes: f64,
    rho_jam_lane: f64,
    tau: f64,
    unit_length: f64,
    out: *mut *mut KwDiagram,
) -> KwStatus {
    guard(|| boxed_diagram(FundamentalDiagram::kerner_konhauser(lanes, rho_jam_lane, tau, unit_length), out))
}

/// Releases a diagram. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn kw_diagram_free(d: *mut KwDiagram) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Capacity (veh/s), critical density and jam density (veh/km).
#[no_mangle]
pub unsafe extern "C" fn kw_diagram_info(
    d: *const KwDiagram,
    capacity: *mut f64,
    rho_crit: *mut f64,
    rho_jam: *mut f64,
) -> KwStatus {
    guard(|| {
        let fd = &deref(d, "diagram")?.0;
        write(capacity, fd.capacity(), "capacity")?;
        write(rho_crit, fd.rho_crit(), "rho_crit")?;
        write(rho_jam, fd.rho_jam(), "rho_jam")
    })
}

#[no_mangle]
pub unsafe extern "C" fn kw_diagram_flux(d: *const KwDiagram, rho: f64, out: *mut f64) -> KwStatus {
    guard(|| write(out, deref(d, "diagram")?.0.flux(rho)?, "out"))
}

/// Demand and supply of density `rho`.
#[no_mangle]
pub unsafe extern "C" fn kw_state_from_density(d: *const KwDiagram, rho: f64, out: *mut KwState) -> KwStatus {
    guard(|| {
        let u = SDState::from_density(&deref(d, "diagram")?.0, rho)?;
        write(out, KwState { demand: u.demand, supply: u.supply }, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn kw_state_to_density(d: *const KwDiagram, state: KwState, out: *mut f64) -> KwStatus {
    guard(|| {
        let fd = &deref(d, "diagram")?.0;
        let u = SDState::new(state.demand, state.supply);
        u.validate(fd)?;
        write(out, u.to_density(fd)?, "out")
    })
}

fn wave_of(w: &Wave) -> KwWave {
    KwWave {
        kind: match w.kind {
            WaveKind::None => 0,
            WaveKind::Shock => 1,
            WaveKind::Rarefaction => 2,
        },
        direction: match w.direction {
            Direction::Backward => -1,
            Direction::Zero => 0,
            Direction::Forward => 1,
        },
        speed_min: w.speed_range.0,
        speed_max: w.speed_range.1,
    }
}

fn kw_state(u: &SDState) -> KwState {
    KwState { demand: u.demand, supply: u.supply }
}

/// Riemann problem at the junction of an upstream and a downstream link.
#[no_mangle]
pub unsafe extern "C" fn kw_riemann_solve(
    up: *const KwDiagram,
    down: *const KwDiagram,
    u1: KwState,
    u2: KwState,
    out: *mut KwRiemannSolution,
) -> KwStatus {
    guard(|| {
        let p = RiemannProblem::new(
            deref(up, "up")?.0,
            deref(down, "down")?.0,
            SDState::new(u1.demand, u1.supply),
            SDState::new(u2.demand, u2.supply),
        )?;
        let s = riemann::solve(&p)?;
        let sol = KwRiemannSolution {
            boundary_flux: s.boundary_flux,
            stat_up: kw_state(&s.stat_up),
            stat_down: kw_state(&s.stat_down),
            wave_up: wave_of(&s.wave_up),
            wave_down: wave_of(&s.wave_down),
        };
        write(out, sol, "out")
    })
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn new_grid(
    diagrams: *const *const KwDiagram,
    n_diagrams: usize,
    cell_diagram: *const usize,
    rho: *const f64,
    n_cells: usize,
    dx: f64,
    topology: Topology,
    out: *mut *mut KwGrid,
) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    let fds = slice(diagrams, n_diagrams, "diagrams")?
        .iter()
        .map(|&d| deref(d, "diagrams[i]").map(|d| d.0))
        .collect::<Result<Vec<_>, _>>()?;
    let map = slice(cell_diagram, n_cells, "cell_diagram")?.to_vec();
    let rho = slice(rho, n_cells, "rho")?.to_vec();
    let grid = SimGrid::new(fds, map, rho, dx, topology)?;
    out.write(Box::into_raw(Box::new(KwGrid(grid))));
    Ok(())
}

/// Ring road of `n_cells` cells of length `dx` (km). Cell `i` uses
/// `diagrams[cell_diagram[i]]` and starts at density `rho[i]`.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_new_ring(
    diagrams: *const *const KwDiagram,
    n_diagrams: usize,
    cell_diagram: *const usize,
    rho: *const f64,
    n_cells: usize,
    dx: f64,
    out: *mut *mut KwGrid,
) -> KwStatus {
    guard(|| new_grid(diagrams, n_diagrams, cell_diagram, rho, n_cells, dx, Topology::Ring, out))
}

/// Open road with constant upstream demand and downstream supply (veh/s).
#[no_mangle]
pub unsafe extern "C" fn kw_grid_new_open(
    diagrams: *const *const KwDiagram,
    n_diagrams: usize,
    cell_diagram: *const usize,
    rho: *const f64,
    n_cells: usize,
    dx: f64,
    left_demand: f64,
    right_supply: f64,
    out: *mut *mut KwGrid,
) -> KwStatus {
    guard(|| {
        let b = BoundarySpec {
            left_demand: StepFunction::constant(left_demand),
            right_supply: StepFunction::constant(right_supply),
        };
        new_grid(diagrams, n_diagrams, cell_diagram, rho, n_cells, dx, Topology::Open(b), out)
    })
}

/// Grid described by a scenario file's `[road]`, `[initial]` and
/// `[boundary]` sections.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_from_scenario(s: *const KwScenario, out: *mut *mut KwGrid) -> KwStatus {
    guard(|| {
        let grid = deref(s, "scenario")?.0.build_grid()?;
        write(out, Box::into_raw(Box::new(KwGrid(grid))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn kw_grid_free(g: *mut KwGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Advances `steps` Godunov steps of length `dt` (s). `allow_high_cfl`
/// lifts the 0.95 guard; CFL numbers above 1 always fail.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_step(
    g: *mut KwGrid,
    dt: f64,
    steps: usize,
    allow_high_cfl: bool,
    max_change: *mut f64,
) -> KwStatus {
    guard(|| {
        let grid = &mut deref_mut(g, "grid")?.0;
        let cfl = grid.cfl_number(dt);
        if cfl > kinwave::godunov::CFL_GUARD && !allow_high_cfl {
            return Err(Error::config(format!("CFL number {cfl:.4} above {}", kinwave::godunov::CFL_GUARD)).into());
        }
        let cfg = StepConfig { allow_high_cfl, ..StepConfig::new(dt) };
        let mut last = 0.0;
        for _ in 0..steps {
            last = grid.step(&cfg)?.max_change;
        }
        if !max_change.is_null() {
            max_change.write(last);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn kw_grid_len(g: *const KwGrid, out: *mut usize) -> KwStatus {
    guard(|| write(out, deref(g, "grid")?.0.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn kw_grid_time(g: *const KwGrid, out: *mut f64) -> KwStatus {
    guard(|| write(out, deref(g, "grid")?.0.time(), "out"))
}

/// Total vehicles on the road.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_vehicles(g: *const KwGrid, out: *mut f64) -> KwStatus {
    guard(|| write(out, deref(g, "grid")?.0.vehicles(), "out"))
}

/// Copies the cell densities into `buf`, which must hold `len` values;
/// `len` must equal the cell count.
#[no_mangle]
pub unsafe extern "C" fn kw_grid_densities(g: *const KwGrid, buf: *mut f64, len: usize) -> KwStatus {
    guard(|| {
        let rho = deref(g, "grid")?.0.densities();
        if len != rho.len() {
            return Err(Error::Domain(format!("buffer holds {len} values, grid has {} cells", rho.len())).into());
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(rho);
        Ok(())
    })
}

/// Parses scenario text (TOML, NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn kw_scenario_parse(text: *const c_char, out: *mut *mut KwScenario) -> KwStatus {
    guard(|| {
        if text.is_null() {
            return Err(Fail::Null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Error::config(format!("scenario text is not UTF-8: {e}")))?;
        let cfg = parse_config(s)?;
        write(out, Box::into_raw(Box::new(KwScenario(cfg))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn kw_scenario_free(s: *mut KwScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Stationary profile of a two-link ring holding `vehicles` vehicles.
/// Lengths in km.
#[no_mangle]
pub unsafe extern "C" fn kw_ring_predict(
    length: f64,
    link1_length: f64,
    link1: *const KwDiagram,
    link2: *const KwDiagram,
    vehicles: f64,
    out: *mut KwRingPrediction,
) -> KwStatus {
    guard(|| {
        let spec = RingSpec::new(length, link1_length, deref(link1, "link1")?.0, deref(link2, "link2")?.0, vehicles)?;
        let (threshold_a, threshold_c) = spec.thresholds()?;
        let p = predict(&spec)?;
        let scenario = match p.scenario {
            Scenario::A => b'a',
            Scenario::B => b'b',
            Scenario::C => b'c',
            Scenario::D => b'd',
        } as c_char;
        let pred = KwRingPrediction { scenario, q: p.q, l2: p.l2.unwrap_or(f64::NAN), threshold_a, threshold_c };
        write(out, pred, "out")
    })
}
