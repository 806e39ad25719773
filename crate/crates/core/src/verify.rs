//! Seeded property suite behind `kinwave verify`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fundamental_diagram::FundamentalDiagram;
use crate::godunov::{osher_flux, sd_flux, BoundarySpec, SimGrid, StepConfig, StepFunction, Topology};
use crate::riemann::{boundary_flux, solve, Direction, RiemannProblem, WaveKind};
use crate::ring::{feasibility_table, RingSpec};
use crate::supply_demand::SDState;

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, first_failure: None }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    fn record(&mut self, outcome: Result<bool>, detail: impl FnOnce() -> String) {
        match outcome {
            Ok(ok) => self.check(ok, detail),
            Err(e) => self.check(false, || format!("{}: {e}", detail())),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct VerifySummary {
    pub seed: u64,
    pub trials: usize,
    pub results: Vec<PropertyResult>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.results.iter().all(PropertyResult::passed)
    }
}

impl fmt::Display for VerifySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "trials: {}", self.trials)?;
        for r in &self.results {
            let verdict = if r.passed() { "PASS" } else { "FAIL" };
            write!(f, "{verdict} {} ({} cases, {} failures)", r.name, r.cases, r.failures)?;
            if let Some(d) = &r.first_failure {
                write!(f, ": {d}")?;
            }
            writeln!(f)?;
        }
        write!(f, "result: {}", if self.passed() { "pass" } else { "fail" })
    }
}

/// Diagrams the random suites draw from. Units are internal (km, s).
pub fn sample_diagrams() -> Vec<(&'static str, FundamentalDiagram)> {
    let build = || -> Result<Vec<(&'static str, FundamentalDiagram)>> {
        Ok(vec![
            ("greenshields", FundamentalDiagram::greenshields(0.03, 150.0)?),
            ("triangular", FundamentalDiagram::triangular(0.03, 0.006, 150.0)?),
            ("trapezoidal", FundamentalDiagram::trapezoidal(0.03, 0.006, 150.0, 0.6)?),
            ("kerner-konhauser-1", FundamentalDiagram::kerner_konhauser(1.0, 180.0, 5.0, 0.028)?),
            ("kerner-konhauser-2", FundamentalDiagram::kerner_konhauser(2.0, 180.0, 5.0, 0.028)?),
        ])
    };
    build().expect("built-in diagrams are valid")
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Runs every property with `trials` random cases each.
pub fn cmd_verify(seed: u64, trials: usize) -> VerifySummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fds = sample_diagrams();
    let results = vec![
        sd_identity(&mut rng, &fds, trials),
        state_round_trip(&mut rng, &fds, trials),
        flux_equivalence(&mut rng, &fds, trials),
        case_table(&mut rng, &fds, trials),
        lemma_one(&mut rng, &fds, trials),
        perturbation_invariance(&mut rng, &fds, trials),
        ring_conservation(&mut rng, &fds, trials),
        feasibility(trials),
    ];
    VerifySummary { seed, trials, results }
}

fn pick<'a, R: Rng>(rng: &mut R, fds: &'a [(&'static str, FundamentalDiagram)]) -> &'a (&'static str, FundamentalDiagram) {
    &fds[rng.random_range(0..fds.len())]
}

fn sd_identity<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("demand/supply identities");
    for _ in 0..trials {
        let (name, fd) = pick(rng, fds);
        let rho = rng.random_range(0.0..=fd.rho_jam());
        let outcome = (|| -> Result<bool> {
            let c = fd.capacity();
            let u = SDState::from_density(fd, rho)?;
            let (g, h) = fd.eo_split(rho)?;
            let tol = 1e-12 * c;
            Ok((u.demand.max(u.supply) - c).abs() <= tol
                && (u.demand + g - c).abs() <= tol
                && (u.supply + h - c).abs() <= tol
                && (u.demand.min(u.supply) - fd.flux_unchecked(rho)).abs() <= tol)
        })();
        r.record(outcome, || format!("{name} at rho {rho}"));
    }
    r
}

fn state_round_trip<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("state/density round trip");
    for _ in 0..trials {
        let (name, fd) = pick(rng, fds);
        let rho = rng.random_range(0.0..=fd.rho_jam());
        let outcome = (|| -> Result<bool> {
            let u = SDState::from_density(fd, rho)?;
            let back = SDState::from_density(fd, u.to_density(fd)?)?;
            let tol = 1e-8 * fd.capacity();
            Ok((u.demand - back.demand).abs() <= tol && (u.supply - back.supply).abs() <= tol)
        })();
        r.record(outcome, || format!("{name} at rho {rho}"));
    }
    r
}

fn flux_equivalence<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("supply-demand flux equals Osher flux");
    for _ in 0..trials {
        let (name, fd) = pick(rng, fds);
        let a = rng.random_range(0.0..=fd.rho_jam());
        let b = rng.random_range(0.0..=fd.rho_jam());
        let outcome = (|| -> Result<bool> {
            let sd = sd_flux(fd, a, fd, b)?;
            let os = osher_flux(fd, a, b)?;
            Ok(rel_close(sd, os, 1e-12))
        })();
        r.record(outcome, || format!("{name} at ({a}, {b})"));
    }
    r
}

/// Expected outcome of one homogeneous case, straight from the case list.
struct CaseExpectation {
    stat_up: SDState,
    stat_down: SDState,
    flux: f64,
    up: (WaveKind, Option<Direction>),
    down: (WaveKind, Option<Direction>),
}

const NONE: (WaveKind, Option<Direction>) = (WaveKind::None, None);
const FWD_SHOCK: (WaveKind, Option<Direction>) = (WaveKind::Shock, Some(Direction::Forward));
const BWD_SHOCK: (WaveKind, Option<Direction>) = (WaveKind::Shock, Some(Direction::Backward));
const FWD_RARE: (WaveKind, Option<Direction>) = (WaveKind::Rarefaction, Some(Direction::Forward));
const BWD_RARE: (WaveKind, Option<Direction>) = (WaveKind::Rarefaction, Some(Direction::Backward));

/// Draws states for homogeneous case `k` (1..=6) with capacity `c` and
/// returns them with the tabulated answer.
fn draw_case<R: Rng>(rng: &mut R, k: u8, c: f64) -> (SDState, SDState, CaseExpectation) {
    match k {
        1 => {
            let d1 = frac(rng, c);
            let d2 = if rng.random_bool(0.2) { d1 } else { frac(rng, c) };
            let u1 = SDState::new(d1, c);
            let u2 = SDState::new(d2, c);
            let down = if d1 < d2 { FWD_SHOCK } else if d1 > d2 { FWD_RARE } else { NONE };
            (u1, u2, CaseExpectation { stat_up: u1, stat_down: u1, flux: d1, up: NONE, down })
        }
        2 => {
            let s1 = if rng.random_bool(0.2) { c } else { frac(rng, c) };
            let d2 = if rng.random_bool(0.2) { c } else { frac(rng, c) };
            let u1 = SDState::new(c, s1);
            let u2 = SDState::new(d2, c);
            let cc = SDState::new(c, c);
            let up = if s1 < c { BWD_RARE } else { NONE };
            let down = if d2 < c { FWD_RARE } else { NONE };
            (u1, u2, CaseExpectation { stat_up: cc, stat_down: cc, flux: c, up, down })
        }
        3 => {
            let s2 = frac(rng, c);
            let s1 = match rng.random_range(0..3) {
                0 => s2,
                1 => c,
                _ => frac(rng, c),
            };
            let u1 = SDState::new(c, s1);
            let u2 = SDState::new(c, s2);
            let up = if s1 > s2 { BWD_SHOCK } else if s1 < s2 { BWD_RARE } else { NONE };
            (u1, u2, CaseExpectation { stat_up: u2, stat_down: u2, flux: s2, up, down: NONE })
        }
        4 => {
            let (a, b) = (frac(rng, c), frac(rng, c));
            let (d1, s2) = (a.min(b), a.max(b));
            let s2 = if a == b || rng.random_bool(0.2) { c } else { s2 };
            let u1 = SDState::new(d1, c);
            let u2 = SDState::new(c, s2);
            (u1, u2, CaseExpectation { stat_up: u1, stat_down: u1, flux: d1, up: NONE, down: FWD_SHOCK })
        }
        5 => {
            let (a, b) = (frac(rng, c), frac(rng, c));
            let (s2, d1) = (a.min(b), a.max(b));
            let d1 = if a == b || rng.random_bool(0.2) { c } else { d1 };
            let u1 = SDState::new(d1, c);
            let u2 = SDState::new(c, s2);
            (u1, u2, CaseExpectation { stat_up: u2, stat_down: u2, flux: s2, up: BWD_SHOCK, down: NONE })
        }
        _ => {
            let q = frac(rng, c);
            let u1 = SDState::new(q, c);
            let u2 = SDState::new(c, q);
            (u1, u2, CaseExpectation { stat_up: u1, stat_down: u2, flux: q, up: NONE, down: NONE })
        }
    }
}

// kept away from 0 so every drawn state has a finite density
fn frac<R: Rng>(rng: &mut R, c: f64) -> f64 {
    rng.random_range(0.05..0.95) * c
}

fn wave_matches(w: &crate::riemann::Wave, want: (WaveKind, Option<Direction>)) -> bool {
    w.kind == want.0 && want.1.is_none_or(|d| w.direction == d)
}

fn case_table<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("homogeneous six-case table");
    for t in 0..trials {
        let (name, fd) = pick(rng, fds);
        let k = (t % 6) as u8 + 1;
        let (u1, u2, want) = draw_case(rng, k, fd.capacity());
        let outcome = (|| -> Result<bool> {
            let sol = solve(&RiemannProblem::new(*fd, *fd, u1, u2)?)?;
            Ok(sol.stat_up.approx_eq(&want.stat_up)
                && sol.stat_down.approx_eq(&want.stat_down)
                && sol.boundary_flux == want.flux
                && wave_matches(&sol.wave_up, want.up)
                && wave_matches(&sol.wave_down, want.down))
        })();
        r.record(outcome, || format!("{name}, case {k}, u1 = {u1}, u2 = {u2}"));
    }
    r
}

fn random_state<R: Rng>(rng: &mut R, fd: &FundamentalDiagram) -> Result<SDState> {
    SDState::from_density(fd, rng.random_range(0.0..=fd.rho_jam()))
}

fn lemma_one<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("boundary flux is min{D1, S2} at every step size");
    for _ in 0..trials {
        let (n1, fd1) = pick(rng, fds);
        let (n2, fd2) = pick(rng, fds);
        let rho1 = rng.random_range(0.0..=fd1.rho_jam());
        let rho2 = rng.random_range(0.0..=fd2.rho_jam());
        let outcome = (|| -> Result<bool> {
            let p = RiemannProblem::from_densities(*fd1, *fd2, rho1, rho2)?;
            let q = boundary_flux(&p);
            if q != p.u1.demand.min(p.u2.supply) {
                return Ok(false);
            }
            let dx = 0.01;
            let top = Topology::Open(BoundarySpec {
                left_demand: StepFunction::constant(0.0),
                right_supply: StepFunction::constant(0.0),
            });
            let grid = SimGrid::new(vec![*fd1, *fd2], vec![0, 1], vec![rho1, rho2], dx, top)?;
            let dt_max = 0.9 * dx / fd1.max_speed().max(fd2.max_speed());
            for scale in [1.0, 0.1, 0.01] {
                let mut g = grid.clone();
                g.step(&StepConfig::new(dt_max * scale))?;
                if g.last_fluxes()[1] != q {
                    return Ok(false);
                }
            }
            Ok(true)
        })();
        r.record(outcome, || format!("{n1} | {n2} at ({rho1}, {rho2})"));
    }
    r
}

fn perturbation_invariance<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("invariance under S1 and D2 perturbations");
    for _ in 0..trials {
        let (n1, fd1) = pick(rng, fds);
        let (n2, fd2) = pick(rng, fds);
        let s1_frac: f64 = rng.random_range(0.0..=1.0);
        let d2_frac: f64 = rng.random_range(0.0..=1.0);
        let outcome = (|| -> Result<bool> {
            let u1 = random_state(rng, fd1)?;
            let u2 = random_state(rng, fd2)?;
            // S1 is free only on an over-critical upstream state, D2 only on
            // an under-critical downstream one
            let mut v1 = u1;
            if u1.demand >= fd1.capacity() {
                v1.supply = s1_frac * fd1.capacity();
            }
            let mut v2 = u2;
            if u2.supply >= fd2.capacity() {
                v2.demand = d2_frac * fd2.capacity();
            }
            let a = solve(&RiemannProblem::new(*fd1, *fd2, u1, u2)?)?;
            let b = solve(&RiemannProblem::new(*fd1, *fd2, v1, v2)?)?;
            Ok(a.boundary_flux == b.boundary_flux && a.stat_up == b.stat_up && a.stat_down == b.stat_down)
        })();
        r.record(outcome, || format!("{n1} | {n2}"));
    }
    r
}

fn ring_conservation<R: Rng>(rng: &mut R, fds: &[(&'static str, FundamentalDiagram)], trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("ring conservation and density bounds");
    for _ in 0..trials.min(50) {
        let (n1, fd1) = pick(rng, fds);
        let (n2, fd2) = pick(rng, fds);
        let cells = rng.random_range(4..40);
        let split = rng.random_range(1..cells);
        let map: Vec<usize> = (0..cells).map(|i| usize::from(i >= split)).collect();
        let rho: Vec<f64> = map
            .iter()
            .map(|&k| rng.random_range(0.0..=[fd1, fd2][k].rho_jam()))
            .collect();
        let outcome = (|| -> Result<bool> {
            let dx = 0.01;
            let mut g = SimGrid::new(vec![*fd1, *fd2], map.clone(), rho.clone(), dx, Topology::Ring)?;
            let dt = 0.8 * dx / fd1.max_speed().max(fd2.max_speed());
            let n0 = g.vehicles();
            for _ in 0..500 {
                g.step(&StepConfig::new(dt))?;
            }
            let bounded = (0..g.len()).all(|i| (0.0..=g.diagram_of(i).rho_jam()).contains(&g.densities()[i]));
            Ok(bounded && (g.vehicles() - n0).abs() <= 1e-12 * n0.max(1.0))
        })();
        r.record(outcome, || format!("{n1} | {n2}, {cells} cells"));
    }
    r
}

fn feasibility(trials: usize) -> PropertyResult {
    let mut r = PropertyResult::new("feasibility table has 4 feasible and 5 infeasible cells");
    if trials == 0 {
        return r;
    }
    let outcome = (|| -> Result<bool> {
        let fd1 = FundamentalDiagram::kerner_konhauser(1.0, 180.0, 5.0, 0.028)?;
        let fd2 = FundamentalDiagram::kerner_konhauser(2.0, 180.0, 5.0, 0.028)?;
        let spec = RingSpec::new(16.8, 2.8, fd1, fd2, 858.0)?;
        let feasible = feasibility_table(&spec).iter().flatten().filter(|f| f.is_feasible()).count();
        Ok(feasible == 4)
    })();
    r.record(outcome, || "reference-sized ring".into());
    r
}
