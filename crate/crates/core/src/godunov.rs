//! First-order Godunov (cell transmission) simulator on open or ring roads.

use crate::error::{Error, Result};
use crate::fundamental_diagram::FundamentalDiagram;
use crate::supply_demand::FLUX_TOL;

/// CFL number above which [`run`] refuses to start without an override.
pub const CFL_GUARD: f64 = 0.95;

const OSHER_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxRule {
    SupplyDemand,
    /// Dense-scan Osher flux at homogeneous interfaces. Very slow; meant as
    /// a cross-check.
    Osher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    /// Time step in s.
    pub dt: f64,
    pub flux_rule: FluxRule,
    /// Lets [`run`] proceed with a CFL number in `(0.95, 1]`.
    pub allow_high_cfl: bool,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        Self { dt, flux_rule: FluxRule::SupplyDemand, allow_high_cfl: false }
    }
}

/// Piecewise-constant function of time: `value` holds from `start` until the
/// next entry's start. Times before the first entry take its value.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    steps: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        Self { steps: vec![(0.0, value)] }
    }

    /// `steps` are `(start time in s, value)` pairs in increasing time order.
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::Domain("step function needs at least one value".into()));
        }
        if steps.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain("step function times must increase".into()));
        }
        Ok(Self { steps })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.steps.partition_point(|&(start, _)| start <= t);
        self.steps[idx.saturating_sub(1)].1
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.1)
    }
}

/// Boundary conditions of an open road, in veh/s.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    /// Demand of the virtual cell feeding the first cell.
    pub left_demand: StepFunction,
    /// Supply of the virtual cell receiving from the last cell.
    pub right_supply: StepFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Ring,
    Open(BoundarySpec),
}

/// A road discretised into cells of equal length, each carrying a reference
/// into a small table of diagrams.
#[derive(Debug, Clone)]
pub struct SimGrid {
    diagrams: Vec<FundamentalDiagram>,
    cell_diagram: Vec<usize>,
    rho: Vec<f64>,
    dx: f64,
    topology: Topology,
    time: f64,
    fluxes: Vec<f64>,
    demand: Vec<f64>,
    supply: Vec<f64>,
    max_speed: f64,
}

/// Summary of a single time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Largest `|Δρ|` over cells, veh/km.
    pub max_change: f64,
    /// Vehicles entering through the left boundary (zero on a ring).
    pub inflow: f64,
    /// Vehicles leaving through the right boundary (zero on a ring).
    pub outflow: f64,
}

impl SimGrid {
    /// `dx` in km; `rho[i]` is the density of cell `i` under
    /// `diagrams[cell_diagram[i]]`.
    pub fn new(
        diagrams: Vec<FundamentalDiagram>,
        cell_diagram: Vec<usize>,
        rho: Vec<f64>,
        dx: f64,
        topology: Topology,
    ) -> Result<Self> {
        let n = cell_diagram.len();
        if n < 2 {
            return Err(Error::Domain(format!("a grid needs at least 2 cells, got {n}")));
        }
        if rho.len() != n {
            return Err(Error::Domain(format!("{} densities for {n} cells", rho.len())));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::Domain(format!("cell length must be positive, got {dx}")));
        }
        if let Some(&bad) = cell_diagram.iter().find(|&&k| k >= diagrams.len()) {
            return Err(Error::Domain(format!("cell refers to missing diagram {bad}")));
        }
        let rho = rho
            .iter()
            .zip(&cell_diagram)
            .map(|(&r, &k)| diagrams[k].check_density(r))
            .collect::<Result<Vec<_>>>()?;
        if let Topology::Open(b) = &topology {
            let c_first = diagrams[cell_diagram[0]].capacity();
            let c_last = diagrams[cell_diagram[n - 1]].capacity();
            for (name, f, cap) in [("left demand", &b.left_demand, c_first), ("right supply", &b.right_supply, c_last)] {
                if f.values().any(|v| !(-FLUX_TOL..=cap + FLUX_TOL).contains(&v)) {
                    return Err(Error::Domain(format!("{name} must lie within [0, {cap}] veh/s")));
                }
            }
        }
        let interfaces = match topology {
            Topology::Ring => n,
            Topology::Open(_) => n + 1,
        };
        let max_speed = cell_diagram.iter().map(|&k| diagrams[k].max_speed()).fold(0.0, f64::max);
        Ok(Self {
            max_speed,
            diagrams,
            cell_diagram,
            rho,
            dx,
            topology,
            time: 0.0,
            fluxes: vec![0.0; interfaces],
            demand: vec![0.0; n],
            supply: vec![0.0; n],
        })
    }

    /// Homogeneous road of `n` cells at density `rho`.
    pub fn uniform(fd: FundamentalDiagram, n: usize, dx: f64, rho: f64, topology: Topology) -> Result<Self> {
        Self::new(vec![fd], vec![0; n], vec![rho; n], dx, topology)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn densities(&self) -> &[f64] {
        &self.rho
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn diagram_of(&self, cell: usize) -> &FundamentalDiagram {
        &self.diagrams[self.cell_diagram[cell]]
    }

    pub fn diagram_index(&self, cell: usize) -> usize {
        self.cell_diagram[cell]
    }

    /// Interface fluxes of the most recent step (veh/s). On a ring entry `i`
    /// is the flux into cell `i`; on an open road there is one extra entry
    /// for the right boundary.
    pub fn last_fluxes(&self) -> &[f64] {
        &self.fluxes
    }

    /// Overwrites the density of one cell (validated against its diagram).
    pub fn set_density(&mut self, cell: usize, rho: f64) -> Result<()> {
        self.rho[cell] = self.diagram_of(cell).check_density(rho)?;
        Ok(())
    }

    /// Cell-centre position in km.
    pub fn x_of(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dx
    }

    /// `Σ ρᵢ·dx` in vehicles.
    pub fn vehicles(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.dx
    }

    /// `max |Q′|·dt/dx` over the diagrams in use.
    pub fn cfl_number(&self, dt: f64) -> f64 {
        self.max_speed * dt / self.dx
    }

    pub fn flux_of_cell(&self, cell: usize) -> f64 {
        self.diagram_of(cell).flux_unchecked(self.rho[cell])
    }

    /// Advances the grid by one step of `cfg.dt`.
    pub fn step(&mut self, cfg: &StepConfig) -> Result<StepOutcome> {
        let dt = cfg.dt;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("time step must be positive, got {dt}")));
        }
        let cfl = self.cfl_number(dt);
        if cfl > 1.0 + 1e-12 {
            return Err(Error::config(format!("CFL number {cfl:.4} exceeds 1")));
        }
        self.compute_fluxes(cfg.flux_rule)?;

        let n = self.len();
        let ratio = dt / self.dx;
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let out = match self.topology {
                Topology::Ring => self.fluxes[(i + 1) % n],
                Topology::Open(_) => self.fluxes[i + 1],
            };
            let delta = ratio * (self.fluxes[i] - out);
            let rho_jam = self.diagram_of(i).rho_jam();
            let next = (self.rho[i] + delta).clamp(0.0, rho_jam);
            max_change = max_change.max((next - self.rho[i]).abs());
            self.rho[i] = next;
        }
        self.time += dt;
        let (inflow, outflow) = match self.topology {
            Topology::Ring => (0.0, 0.0),
            Topology::Open(_) => (self.fluxes[0] * dt, self.fluxes[n] * dt),
        };
        Ok(StepOutcome { max_change, inflow, outflow })
    }

    fn compute_fluxes(&mut self, rule: FluxRule) -> Result<()> {
        let n = self.len();
        for i in 0..n {
            let fd = &self.diagrams[self.cell_diagram[i]];
            self.demand[i] = fd.demand_unchecked(self.rho[i]);
            self.supply[i] = fd.supply_unchecked(self.rho[i]);
        }
        let t = self.time;
        match &self.topology {
            Topology::Ring => {
                for i in 0..n {
                    let l = (i + n - 1) % n;
                    self.fluxes[i] = self.demand[l].min(self.supply[i]);
                }
            }
            Topology::Open(b) => {
                self.fluxes[0] = b.left_demand.value_at(t).max(0.0).min(self.supply[0]);
                for i in 1..n {
                    self.fluxes[i] = self.demand[i - 1].min(self.supply[i]);
                }
                self.fluxes[n] = self.demand[n - 1].min(b.right_supply.value_at(t).max(0.0));
            }
        }
        if rule == FluxRule::Osher {
            let inner: Vec<(usize, usize, usize)> = match self.topology {
                Topology::Ring => (0..n).map(|i| (i, (i + n - 1) % n, i)).collect(),
                Topology::Open(_) => (1..n).map(|i| (i, i - 1, i)).collect(),
            };
            for (k, l, r) in inner {
                if self.cell_diagram[l] == self.cell_diagram[r] {
                    self.fluxes[k] = osher_flux(self.diagram_of(l), self.rho[l], self.rho[r])?;
                }
            }
        }
        Ok(())
    }
}

/// Godunov flux between two cells: `min{D_l(ρ_l), S_r(ρ_r)}`.
pub fn sd_flux(fd_left: &FundamentalDiagram, rho_left: f64, fd_right: &FundamentalDiagram, rho_right: f64) -> Result<f64> {
    Ok(fd_left.demand(rho_left)?.min(fd_right.supply(rho_right)?))
}

/// Osher's form of the Godunov flux for a single diagram, by brute force:
/// the minimum of `Q` over `[ρ_l, ρ_r]` when `ρ_l < ρ_r` and the maximum
/// over `[ρ_r, ρ_l]` otherwise.
///
/// The interval is scanned at 10⁴ points and the best sample refined by
/// ternary search between its neighbours.
pub fn osher_flux(fd: &FundamentalDiagram, rho_left: f64, rho_right: f64) -> Result<f64> {
    let rl = fd.check_density(rho_left)?;
    let rr = fd.check_density(rho_right)?;
    if rl == rr {
        return Ok(fd.flux_unchecked(rl));
    }
    let (a, b) = (rl.min(rr), rl.max(rr));
    let sign = if rl < rr { -1.0 } else { 1.0 };
    let f = |r: f64| sign * fd.flux_unchecked(r);
    let h = (b - a) / OSHER_SAMPLES as f64;
    let at = |i: usize| if i == OSHER_SAMPLES { b } else { a + h * i as f64 };
    let mut best = 0;
    let mut best_val = f(a);
    for i in 1..=OSHER_SAMPLES {
        let v = f(at(i));
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    let mut lo = at(best.saturating_sub(1));
    let mut hi = at((best + 1).min(OSHER_SAMPLES));
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let refined = f(0.5 * (lo + hi));
    Ok(sign * best_val.max(refined))
}

/// Engquist-Osher flux `C − g(ρ_l) − h(ρ_r)` for a single diagram.
pub fn engquist_osher_flux(fd: &FundamentalDiagram, rho_left: f64, rho_right: f64) -> Result<f64> {
    let (g, _) = fd.eo_split(rho_left)?;
    let (_, h) = fd.eo_split(rho_right)?;
    Ok(fd.capacity() - (g + h))
}

/// Per-cell values at one recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    /// Speed in km/s.
    pub v: Vec<f64>,
    /// Flux in veh/s.
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub dx: f64,
    pub ring: bool,
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub initial_vehicles: f64,
    pub final_vehicles: f64,
    pub cumulative_inflow: f64,
    pub cumulative_outflow: f64,
    /// Largest per-cell `|Δρ|` in the final step (veh/km); infinite if no
    /// step was taken.
    pub final_max_change: f64,
    /// `(t, max |Δρ|)` at each recorded time after the first.
    pub convergence: Vec<(f64, f64)>,
}

impl SimRecord {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a record always holds the initial snapshot")
    }

    /// `initial + inflow − outflow − final`; zero up to rounding.
    pub fn conservation_error(&self) -> f64 {
        self.initial_vehicles + self.cumulative_inflow - self.cumulative_outflow - self.final_vehicles
    }
}

fn snapshot(grid: &SimGrid) -> Snapshot {
    let n = grid.len();
    let mut v = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let fd = grid.diagram_of(i);
        let rho = grid.rho[i];
        let flux = fd.flux_unchecked(rho);
        q.push(flux);
        v.push(if rho > 0.0 { flux / rho } else { fd.free_speed() });
    }
    Snapshot { t: grid.time, rho: grid.rho.clone(), v, q }
}

/// Steps `grid` for `duration` seconds, recording a snapshot every
/// `record_every` seconds (rounded to whole steps) and at the end.
///
/// A final partial step is taken when `duration` is not a multiple of `dt`.
pub fn run(grid: &mut SimGrid, cfg: &StepConfig, duration: f64, record_every: f64) -> Result<SimRecord> {
    let cfl = grid.cfl_number(cfg.dt);
    if cfl > CFL_GUARD && !cfg.allow_high_cfl {
        return Err(Error::config(format!(
            "CFL number {cfl:.4} exceeds {CFL_GUARD}; pass the override to run anyway"
        )));
    }
    if !(duration >= 0.0) {
        return Err(Error::config(format!("duration must be nonnegative, got {duration}")));
    }
    let full = (duration / cfg.dt + 1e-9).floor() as usize;
    let rest = duration - full as f64 * cfg.dt;
    let every = if record_every > 0.0 { ((record_every / cfg.dt).round() as usize).max(1) } else { usize::MAX };

    let mut record = SimRecord {
        dx: grid.dx,
        ring: matches!(grid.topology, Topology::Ring),
        snapshots: vec![snapshot(grid)],
        steps: 0,
        initial_vehicles: grid.vehicles(),
        final_vehicles: grid.vehicles(),
        cumulative_inflow: 0.0,
        cumulative_outflow: 0.0,
        final_max_change: f64::INFINITY,
        convergence: Vec::new(),
    };
    let tally = |rec: &mut SimRecord, out: StepOutcome| {
        rec.steps += 1;
        rec.cumulative_inflow += out.inflow;
        rec.cumulative_outflow += out.outflow;
        rec.final_max_change = out.max_change;
    };
    for k in 1..=full {
        let out = grid.step(cfg)?;
        tally(&mut record, out);
        if k % every == 0 && (k < full || rest > cfg.dt * 1e-9) {
            record.snapshots.push(snapshot(grid));
            record.convergence.push((grid.time, out.max_change));
        }
    }
    if rest > cfg.dt * 1e-9 {
        let out = grid.step(&StepConfig { dt: rest, ..*cfg })?;
        tally(&mut record, out);
    }
    if record.steps > 0 {
        record.snapshots.push(snapshot(grid));
        record.convergence.push((grid.time, record.final_max_change));
    }
    record.final_vehicles = grid.vehicles();
    Ok(record)
}

/// Thresholds for [`detect_interior_states`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    /// Largest admissible per-step density change (veh/km) for the record to
    /// count as converged.
    pub steady_tol: f64,
    /// Minimum density jump (veh/km) between a cell and both neighbours.
    pub jump: f64,
    /// Length of the uniform run required beside the cell.
    pub run_len: usize,
    /// Spread (veh/km) allowed within a uniform run.
    pub run_tol: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self { steady_tol: 1e-10, jump: 0.5, run_len: 3, run_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorCell {
    pub cell: usize,
    pub flux: f64,
    pub density: f64,
}

/// Finds isolated single-cell states in the final snapshot of a converged
/// record: cells whose density differs from both neighbours by more than
/// `jump` while the runs beside them are uniform.
pub fn detect_interior_states(record: &SimRecord, opts: &DetectOptions) -> Result<Vec<InteriorCell>> {
    if !(record.final_max_change <= opts.steady_tol) {
        return Err(Error::State(format!(
            "record not converged: last step changed density by {:.3e} veh/km (limit {:.1e})",
            record.final_max_change, opts.steady_tol
        )));
    }
    let snap = record.last();
    let n = snap.rho.len() as isize;
    let at = |i: isize| -> Option<f64> {
        if record.ring {
            Some(snap.rho[i.rem_euclid(n) as usize])
        } else if (0..n).contains(&i) {
            Some(snap.rho[i as usize])
        } else {
            None
        }
    };
    let uniform_run = |start: isize, step: isize| -> bool {
        let vals: Option<Vec<f64>> = (0..opts.run_len as isize).map(|k| at(start + k * step)).collect();
        match vals {
            Some(v) if !v.is_empty() => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo <= opts.run_tol
            }
            _ => false,
        }
    };
    let mut found = Vec::new();
    for i in 0..n {
        let rho = snap.rho[i as usize];
        let (Some(left), Some(right)) = (at(i - 1), at(i + 1)) else {
            continue;
        };
        if (rho - left).abs() > opts.jump
            && (rho - right).abs() > opts.jump
            && uniform_run(i - 1, -1)
            && uniform_run(i + 1, 1)
        {
            found.push(InteriorCell { cell: i as usize, flux: snap.q[i as usize], density: rho });
        }
    }
    Ok(found)
}
