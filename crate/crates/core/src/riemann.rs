//! Riemann problem at a linear boundary between two homogeneous links.
//!
//! Link 1 occupies `x < 0` and link 2 occupies `x > 0`. The solution is
//! described by the boundary flux, a stationary state on each side of the
//! boundary, the interior states sitting at `x = 0⁻` and `x = 0⁺`, and one
//! kinematic wave per link connecting the initial state to the stationary
//! state.

use std::fmt;

use crate::error::{Error, Result};
use crate::fundamental_diagram::FundamentalDiagram;
use crate::numeric::golden_section_max;
use crate::supply_demand::{Classification, SDState, FLUX_TOL};

/// Rarefaction edge speeds within this band (km/s) count as zero.
pub const SPEED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannProblem {
    pub fd_up: FundamentalDiagram,
    pub fd_down: FundamentalDiagram,
    pub u1: SDState,
    pub u2: SDState,
}

impl RiemannProblem {
    pub fn new(fd_up: FundamentalDiagram, fd_down: FundamentalDiagram, u1: SDState, u2: SDState) -> Result<Self> {
        u1.validate(&fd_up)?;
        u2.validate(&fd_down)?;
        Ok(Self { fd_up, fd_down, u1, u2 })
    }

    pub fn from_densities(fd_up: FundamentalDiagram, fd_down: FundamentalDiagram, rho1: f64, rho2: f64) -> Result<Self> {
        let u1 = SDState::from_density(&fd_up, rho1)?;
        let u2 = SDState::from_density(&fd_down, rho2)?;
        Ok(Self { fd_up, fd_down, u1, u2 })
    }
}

/// Which side limits the boundary flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCase {
    /// `D₁ < S₂`.
    DemandLimited,
    /// `D₁ > S₂`.
    SupplyLimited,
    /// `D₁ = S₂`: interior states are not unique.
    Balanced,
}

/// Admissible interior states on one side of the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteriorSet {
    Unique(SDState),
    /// Every valid state with `D ≥ min_demand` and `S ≥ min_supply`.
    /// `representative` is the stationary state, which always belongs.
    Family { min_demand: f64, min_supply: f64, representative: SDState },
}

impl InteriorSet {
    pub fn representative(&self) -> SDState {
        match *self {
            InteriorSet::Unique(u) => u,
            InteriorSet::Family { representative, .. } => representative,
        }
    }

    pub fn admits(&self, cand: &SDState) -> bool {
        match self {
            InteriorSet::Unique(u) => u.approx_eq(cand),
            InteriorSet::Family { min_demand, min_supply, .. } => {
                cand.demand >= min_demand - FLUX_TOL && cand.supply >= min_supply - FLUX_TOL
            }
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, InteriorSet::Unique(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    None,
    Shock,
    Rarefaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Backward,
    Forward,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upstream,
    Downstream,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub kind: WaveKind,
    pub direction: Direction,
    /// `(s_min, s_max)` in km/s. Equal for a shock; the characteristic
    /// speeds of the end states for a rarefaction.
    pub speed_range: (f64, f64),
}

impl Wave {
    pub const NONE: Wave = Wave { kind: WaveKind::None, direction: Direction::Zero, speed_range: (0.0, 0.0) };
}

impl fmt::Display for Wave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Backward => "backward",
            Direction::Forward => "forward",
            Direction::Zero => "zero-speed",
        };
        match self.kind {
            WaveKind::None => f.write_str("no wave"),
            WaveKind::Shock => write!(f, "{dir} shock"),
            WaveKind::Rarefaction => write!(f, "{dir} rarefaction"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannSolution {
    pub case: BoundaryCase,
    pub boundary_flux: f64,
    pub stat_up: SDState,
    pub stat_down: SDState,
    pub interior_up: InteriorSet,
    pub interior_down: InteriorSet,
    pub wave_up: Wave,
    pub wave_down: Wave,
}

/// `q = min{D₁, S₂}`.
pub fn boundary_flux(p: &RiemannProblem) -> f64 {
    p.u1.demand.min(p.u2.supply)
}

pub fn solve(p: &RiemannProblem) -> Result<RiemannSolution> {
    let c1 = p.fd_up.capacity();
    let c2 = p.fd_down.capacity();
    let d1 = p.u1.demand;
    let s2 = p.u2.supply;
    let q = boundary_flux(p);

    let case = if (d1 - s2).abs() <= FLUX_TOL {
        BoundaryCase::Balanced
    } else if d1 < s2 {
        BoundaryCase::DemandLimited
    } else {
        BoundaryCase::SupplyLimited
    };

    let (stat_up, stat_down) = match case {
        BoundaryCase::DemandLimited => (SDState::new(d1, c1), SDState::new(d1, c2)),
        BoundaryCase::SupplyLimited => (SDState::new(c1, s2), SDState::new(c2, s2)),
        BoundaryCase::Balanced => (SDState::new(d1, c1), SDState::new(c2, s2)),
    };

    let (interior_up, interior_down) = match case {
        BoundaryCase::Balanced => (
            balanced_family(stat_up, d1, c1),
            balanced_family(stat_down, s2, c2),
        ),
        _ => (InteriorSet::Unique(stat_up), InteriorSet::Unique(stat_down)),
    };

    let wave_up = classify_wave(&p.fd_up, &p.u1, &stat_up, Side::Upstream)?;
    let wave_down = classify_wave(&p.fd_down, &stat_down, &p.u2, Side::Downstream)?;

    Ok(RiemannSolution {
        case,
        boundary_flux: q,
        stat_up,
        stat_down,
        interior_up,
        interior_down,
        wave_up,
        wave_down,
    })
}

// With D₁ = S₂ = q the interior state on either side only has to keep both
// of its components at or above q.
fn balanced_family(stat: SDState, q: f64, capacity: f64) -> InteriorSet {
    if (q - capacity).abs() <= FLUX_TOL {
        InteriorSet::Unique(stat)
    } else {
        InteriorSet::Family { min_demand: q, min_supply: q, representative: stat }
    }
}

/// Wave solving the homogeneous Riemann problem `left | right` on a link
/// governed by `fd`.
///
/// Upstream-link waves must not travel forward and downstream-link waves
/// must not travel backward; a violation means the caller built an
/// inadmissible stationary state and is reported as [`Error::Logic`].
pub fn classify_wave(fd: &FundamentalDiagram, left: &SDState, right: &SDState, side: Side) -> Result<Wave> {
    if left.approx_eq(right) {
        return Ok(Wave::NONE);
    }
    let rho_l = left.to_density(fd)?;
    let rho_r = right.to_density(fd)?;
    let q_l = fd.flux_unchecked(rho_l);
    let q_r = fd.flux_unchecked(rho_r);

    let wave = if rho_l < rho_r {
        let dq = q_r - q_l;
        if dq.abs() <= FLUX_TOL {
            Wave { kind: WaveKind::Shock, direction: Direction::Zero, speed_range: (0.0, 0.0) }
        } else {
            let sigma = dq / (rho_r - rho_l);
            let direction = if sigma > 0.0 { Direction::Forward } else { Direction::Backward };
            Wave { kind: WaveKind::Shock, direction, speed_range: (sigma, sigma) }
        }
    } else if rho_l > rho_r {
        let a = fd.char_speed_toward(rho_l, rho_r)?;
        let b = fd.char_speed_toward(rho_r, rho_l)?;
        let (lo, hi) = (a.min(b), a.max(b));
        let direction = if hi <= SPEED_TOL && lo < -SPEED_TOL {
            Direction::Backward
        } else if lo >= -SPEED_TOL && hi > SPEED_TOL {
            Direction::Forward
        } else if hi.abs() <= SPEED_TOL && lo.abs() <= SPEED_TOL {
            Direction::Zero
        } else {
            return Err(Error::Logic(format!(
                "transonic rarefaction ({lo}, {hi}) km/s on the {side:?} link"
            )));
        };
        Wave { kind: WaveKind::Rarefaction, direction, speed_range: (lo, hi) }
    } else {
        // distinct states on a capacity plateau share one density
        return Ok(Wave::NONE);
    };

    let admissible = match side {
        Side::Upstream => wave.direction != Direction::Forward,
        Side::Downstream => wave.direction != Direction::Backward,
    };
    if !admissible {
        return Err(Error::Logic(format!("{wave} is inadmissible on the {side:?} link")));
    }
    Ok(wave)
}

/// Theorem-1 test on link 1: `cand = (D₁, C₁)` or `cand = (C₁, S)` with
/// `S < D₁`. The capacity is read off `u1` as `max{D₁, S₁}`.
pub fn admissible_stationary_up(u1: &SDState, cand: &SDState) -> bool {
    let c1 = u1.demand.max(u1.supply);
    let unchanged = cand.approx_eq(&SDState::new(u1.demand, c1));
    let congested = (cand.demand - c1).abs() <= FLUX_TOL && cand.supply < u1.demand - FLUX_TOL;
    unchanged || congested
}

/// Theorem-1 test on link 2: `cand = (C₂, S₂)` or `cand = (D, C₂)` with
/// `D < S₂`.
pub fn admissible_stationary_down(u2: &SDState, cand: &SDState) -> bool {
    let c2 = u2.demand.max(u2.supply);
    let unchanged = cand.approx_eq(&SDState::new(c2, u2.supply));
    let free = (cand.supply - c2).abs() <= FLUX_TOL && cand.demand < u2.supply - FLUX_TOL;
    unchanged || free
}

/// Interior state test at `x = 0⁻` for the stationary state `stat`.
pub fn admissible_interior_up(stat: &SDState, cand: &SDState) -> bool {
    let c1 = stat.demand.max(stat.supply);
    match stat.classification(c1) {
        Classification::StrictlyOverCritical => stat.approx_eq(cand),
        _ => cand.supply >= stat.demand - FLUX_TOL,
    }
}

/// Interior state test at `x = 0⁺` for the stationary state `stat`.
pub fn admissible_interior_down(stat: &SDState, cand: &SDState) -> bool {
    let c2 = stat.demand.max(stat.supply);
    match stat.classification(c2) {
        Classification::StrictlyUnderCritical => stat.approx_eq(cand),
        _ => cand.demand >= stat.supply - FLUX_TOL,
    }
}

/// Boundary flux implied by a pair of interior states: `min{D(0⁻), S(0⁺)}`.
pub fn entropy_flux(interior_up: &SDState, interior_down: &SDState) -> f64 {
    interior_up.demand.min(interior_down.supply)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryPair {
    BothUC,
    BothOC,
    UpUcDownOc,
    /// Link 1 strictly over-critical with link 2 strictly under-critical.
    Forbidden,
}

pub fn stationary_pair_check(stat_up: &SDState, stat_down: &SDState) -> Result<StationaryPair> {
    let q_up = stat_up.flux();
    let q_down = stat_down.flux();
    if (q_up - q_down).abs() > FLUX_TOL {
        return Err(Error::State(format!("stationary fluxes differ: {q_up} upstream, {q_down} downstream")));
    }
    let up = stat_up.classification(stat_up.demand.max(stat_up.supply));
    let down = stat_down.classification(stat_down.demand.max(stat_down.supply));
    Ok(
        if up == Classification::StrictlyOverCritical && down == Classification::StrictlyUnderCritical {
            StationaryPair::Forbidden
        } else if up.is_under_critical() && down.is_under_critical() {
            StationaryPair::BothUC
        } else if up.is_over_critical() && down.is_over_critical() {
            StationaryPair::BothOC
        } else {
            StationaryPair::UpUcDownOc
        },
    )
}

/// A point of the self-similar solution `ρ(x/t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    /// `x/t` in km/s.
    pub xi: f64,
    /// 1 or 2.
    pub link: u8,
    pub rho: f64,
    pub flux: f64,
    pub state: SDState,
}

/// Samples the self-similar density profile at the given values of `x/t`.
///
/// Rarefaction fans are filled by inverting `Q′` between the end states.
pub fn sample_profile(p: &RiemannProblem, sol: &RiemannSolution, xis: &[f64]) -> Result<Vec<ProfilePoint>> {
    let up = link_sampler(&p.fd_up, &p.u1, &sol.stat_up, &sol.wave_up, true)?;
    let down = link_sampler(&p.fd_down, &sol.stat_down, &p.u2, &sol.wave_down, false)?;
    xis.iter()
        .map(|&xi| {
            let (fd, sampler, link) = if xi < 0.0 { (&p.fd_up, &up, 1) } else { (&p.fd_down, &down, 2) };
            let rho = sampler.density_at(fd, xi);
            let state = SDState::from_density(fd, rho)?;
            Ok(ProfilePoint { xi, link, rho, flux: fd.flux_unchecked(rho), state })
        })
        .collect()
}

struct LinkSampler {
    rho_left: f64,
    rho_right: f64,
    wave: Wave,
    /// The stationary state sits on the right of the wave on link 1.
    upstream: bool,
}

fn link_sampler(fd: &FundamentalDiagram, left: &SDState, right: &SDState, wave: &Wave, upstream: bool) -> Result<LinkSampler> {
    Ok(LinkSampler {
        rho_left: left.to_density(fd)?,
        rho_right: right.to_density(fd)?,
        wave: *wave,
        upstream,
    })
}

impl LinkSampler {
    fn density_at(&self, fd: &FundamentalDiagram, xi: f64) -> f64 {
        if self.wave.kind == WaveKind::None {
            return if self.upstream { self.rho_right } else { self.rho_left };
        }
        osher_density(fd, self.rho_left, self.rho_right, xi)
    }
}

/// Entropy solution of `left | right` at `x/t = xi`: the minimiser of
/// `Q(ρ) − ξρ` over `[ρ_l, ρ_r]` when `ρ_l < ρ_r`, the maximiser over
/// `[ρ_r, ρ_l]` otherwise. On a non-concave diagram this also resolves
/// shocks with an attached fan, which a single-wave label cannot describe.
fn osher_density(fd: &FundamentalDiagram, rho_l: f64, rho_r: f64, xi: f64) -> f64 {
    let (lo, hi, sign) = if rho_l <= rho_r { (rho_l, rho_r, -1.0) } else { (rho_r, rho_l, 1.0) };
    let g = |r: f64| sign * (fd.flux_unchecked(r) - xi * r);
    if hi - lo <= 0.0 {
        return lo;
    }
    let n = 2000;
    let h = (hi - lo) / n as f64;
    let mut best = lo;
    let mut g_best = g(lo);
    for k in 1..=n {
        let r = if k == n { hi } else { lo + k as f64 * h };
        let v = g(r);
        if v > g_best {
            best = r;
            g_best = v;
        }
    }
    let (a, b) = ((best - h).max(lo), (best + h).min(hi));
    let x = golden_section_max(g, a, b, 1e-12 * fd.rho_jam());
    if g(x) <= g_best {
        return best;
    }
    // inside a fan Q′(ρ) = ξ; the golden bracket alone stops near √ε
    let slope = |r: f64| fd.char_speed(r).map(|c| c - xi).unwrap_or(f64::NAN);
    let (sa, sb) = (slope(a), slope(b));
    if !(sa * sb < 0.0) {
        return x;
    }
    let (mut a, mut b) = (a, b);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (slope(m) < 0.0) == (sa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    let polished = 0.5 * (a + b);
    if g(polished) >= g(x) - 1e-15 * g(x).abs().max(1.0) {
        polished
    } else {
        x
    }
}
