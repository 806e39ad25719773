//! Traffic states in supply-demand coordinates.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::fundamental_diagram::FundamentalDiagram;

/// Absolute tolerance (veh/s) for flux equalities that drive case logic.
pub const FLUX_TOL: f64 = 1e-9;

/// Supply-demand ratio `γ = D/S` on `[0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Finite(f64),
    /// `S = 0 < D`: a jammed state.
    Infinite,
}

impl Gamma {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Gamma::Infinite)
    }

    /// Finite value, or `f64::INFINITY` for the sentinel.
    pub fn value(&self) -> f64 {
        match *self {
            Gamma::Finite(g) => g,
            Gamma::Infinite => f64::INFINITY,
        }
    }

    /// `1/γ`, mapping `∞` to zero and zero to `∞`.
    pub fn recip(&self) -> Gamma {
        match *self {
            Gamma::Infinite => Gamma::Finite(0.0),
            Gamma::Finite(0.0) => Gamma::Infinite,
            Gamma::Finite(g) => Gamma::Finite(1.0 / g),
        }
    }
}

impl PartialOrd for Gamma {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Gamma::Infinite, Gamma::Infinite) => Some(Ordering::Equal),
            (Gamma::Infinite, Gamma::Finite(_)) => Some(Ordering::Greater),
            (Gamma::Finite(_), Gamma::Infinite) => Some(Ordering::Less),
            (Gamma::Finite(a), Gamma::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Finite(g) => write!(f, "{g}"),
            Gamma::Infinite => f.write_str("inf"),
        }
    }
}

/// Congestion level of a state relative to its diagram's capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// `D = S = C`.
    Critical,
    /// `D < S = C`.
    StrictlyUnderCritical,
    /// `S < D = C`.
    StrictlyOverCritical,
}

impl Classification {
    /// UC: `D ≤ S`, i.e. critical or strictly under-critical.
    pub fn is_under_critical(self) -> bool {
        !matches!(self, Classification::StrictlyOverCritical)
    }

    /// OC: `S ≤ D`.
    pub fn is_over_critical(self) -> bool {
        !matches!(self, Classification::StrictlyUnderCritical)
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Critical => "critical",
            Classification::StrictlyUnderCritical => "SUC",
            Classification::StrictlyOverCritical => "SOC",
        }
    }
}

/// A traffic state `(D, S)` in veh/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDState {
    pub demand: f64,
    pub supply: f64,
}

impl SDState {
    pub fn new(demand: f64, supply: f64) -> Self {
        Self { demand, supply }
    }

    /// Builds a state from its ratio `γ` on a diagram of capacity `capacity`.
    pub fn from_gamma(capacity: f64, gamma: Gamma) -> Result<Self> {
        match gamma {
            Gamma::Infinite => Ok(Self::new(capacity, 0.0)),
            Gamma::Finite(g) if g.is_nan() || g < 0.0 => {
                Err(Error::Domain(format!("ratio {g} must be nonnegative")))
            }
            Gamma::Finite(g) if g <= 1.0 => Ok(Self::new(capacity * g, capacity)),
            Gamma::Finite(g) => Ok(Self::new(capacity, capacity / g)),
        }
    }

    pub fn from_density(fd: &FundamentalDiagram, rho: f64) -> Result<Self> {
        let rho = fd.check_density(rho)?;
        Ok(Self::new(fd.demand_unchecked(rho), fd.supply_unchecked(rho)))
    }

    /// Checks the state against `fd`: nonnegative components with
    /// `max{D, S} = C` within [`FLUX_TOL`].
    pub fn validate(&self, fd: &FundamentalDiagram) -> Result<()> {
        let c = fd.capacity();
        let ok = self.demand >= -FLUX_TOL
            && self.supply >= -FLUX_TOL
            && (self.demand.max(self.supply) - c).abs() <= FLUX_TOL;
        if ok {
            Ok(())
        } else {
            Err(Error::State(format!(
                "state (D={}, S={}) is inconsistent with capacity {c}",
                self.demand, self.supply
            )))
        }
    }

    pub fn to_density(&self, fd: &FundamentalDiagram) -> Result<f64> {
        self.validate(fd)?;
        if self.demand <= self.supply {
            fd.inv_demand(self.demand.clamp(0.0, fd.capacity()))
        } else {
            fd.inv_supply(self.supply.clamp(0.0, fd.capacity()))
        }
    }

    pub fn flux(&self) -> f64 {
        self.demand.min(self.supply)
    }

    pub fn gamma(&self) -> Result<Gamma> {
        if self.demand <= 0.0 && self.supply <= 0.0 {
            return Err(Error::State("ratio undefined for D = S = 0".into()));
        }
        if self.supply <= 0.0 {
            return Ok(Gamma::Infinite);
        }
        Ok(Gamma::Finite(self.demand / self.supply))
    }

    /// Classification against capacity `capacity`, with [`FLUX_TOL`] for the
    /// equalities.
    pub fn classification(&self, capacity: f64) -> Classification {
        let d_full = (self.demand - capacity).abs() <= FLUX_TOL;
        let s_full = (self.supply - capacity).abs() <= FLUX_TOL;
        match (d_full, s_full) {
            (true, true) => Classification::Critical,
            (true, false) => Classification::StrictlyOverCritical,
            (false, true) => Classification::StrictlyUnderCritical,
            // inconsistent state; fall back on the larger component
            (false, false) if self.demand < self.supply => Classification::StrictlyUnderCritical,
            (false, false) => Classification::StrictlyOverCritical,
        }
    }

    /// Componentwise comparison within [`FLUX_TOL`].
    pub fn approx_eq(&self, other: &SDState) -> bool {
        (self.demand - other.demand).abs() <= FLUX_TOL && (self.supply - other.supply).abs() <= FLUX_TOL
    }
}

impl fmt::Display for SDState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(D={:.4}, S={:.4})", self.demand, self.supply)
    }
}

/// `(D(ρ), S(ρ))`.
pub fn from_density(fd: &FundamentalDiagram, rho: f64) -> Result<SDState> {
    SDState::from_density(fd, rho)
}

pub fn to_density(fd: &FundamentalDiagram, u: &SDState) -> Result<f64> {
    u.to_density(fd)
}

/// `q(U) = min{D, S}`.
pub fn flux_of(u: &SDState) -> f64 {
    u.flux()
}

pub fn gamma_of(u: &SDState) -> Result<Gamma> {
    u.gamma()
}
