//! Unimodal flux-density relations and the demand/supply transforms built on
//! them.
//!
//! Units are fixed throughout the crate: density in veh/km, flux in veh/s,
//! length in km, time in s and therefore speed in km/s. Constructors take
//! their parameters in these units; use [`M_PER_S`] or [`KM_PER_H`] to
//! convert a speed, e.g. `27.8 * M_PER_S`.

use crate::error::{Error, Result};
use crate::numeric::{bisect_nondecreasing, bisect_nonincreasing, golden_section_max};
use crate::supply_demand::Gamma;

/// One metre per second expressed in km/s.
pub const M_PER_S: f64 = 1e-3;
/// One kilometre per hour expressed in km/s.
pub const KM_PER_H: f64 = 1.0 / 3600.0;

/// Densities this far outside `[0, rho_jam]` are clamped instead of rejected.
pub const DENSITY_SLACK: f64 = 1e-9;
/// Fluxes this far above capacity are clamped instead of rejected.
pub const FLUX_SLACK: f64 = 1e-9;

/// Number of samples used by the unimodality check and the speed bound.
const SAMPLE_POINTS: usize = 1000;

// Kerner-Konhauser speed law constants.
const KK_SCALE: f64 = 5.0461;
const KK_OFFSET: f64 = 0.25;
const KK_WIDTH: f64 = 0.06;
const KK_SHIFT: f64 = 3.72e-6;

/// Parameters of a flux-density law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `Q(ρ) = v_free·ρ·(1 − ρ/rho_jam)`.
    Greenshields { v_free: f64, rho_jam: f64 },
    /// `Q(ρ) = min{v_free·ρ, v_cong·(rho_jam − ρ), q_max}`. A pure triangle
    /// has `q_max = ∞`.
    Trapezoidal { v_free: f64, v_cong: f64, rho_jam: f64, q_max: f64 },
    /// `Q(ρ) = ρ·V(ρ)` with the Kerner-Konhauser speed law scaled by the
    /// number of lanes.
    KernerKonhauser { lanes: f64, rho_jam_lane: f64, tau: f64, unit_length: f64 },
}

/// A unimodal flux-density relation with its derived critical point.
///
/// Values are immutable after construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalDiagram {
    family: Family,
    rho_jam: f64,
    /// Left edge of the capacity plateau (the critical density).
    rho_crit: f64,
    /// Right edge of the capacity plateau; equals `rho_crit` without plateau.
    rho_crit_right: f64,
    capacity: f64,
    max_speed: f64,
}

impl FundamentalDiagram {
    pub fn greenshields(v_free: f64, rho_jam: f64) -> Result<Self> {
        require_positive("v_free", v_free)?;
        require_positive("rho_jam", rho_jam)?;
        let rho_crit = 0.5 * rho_jam;
        Ok(Self {
            family: Family::Greenshields { v_free, rho_jam },
            rho_jam,
            rho_crit,
            rho_crit_right: rho_crit,
            capacity: 0.25 * v_free * rho_jam,
            max_speed: v_free,
        })
    }

    /// Triangular diagram with free-flow speed `v_free` and congested wave
    /// speed magnitude `v_cong`.
    pub fn triangular(v_free: f64, v_cong: f64, rho_jam: f64) -> Result<Self> {
        Self::trapezoidal(v_free, v_cong, rho_jam, f64::INFINITY)
    }

    /// Triangular diagram specified through its critical density, with
    /// `v_cong = v_free·rho_crit/(rho_jam − rho_crit)`.
    pub fn triangular_from_critical(v_free: f64, rho_crit: f64, rho_jam: f64) -> Result<Self> {
        if !(rho_crit > 0.0 && rho_crit < rho_jam) {
            return Err(Error::Domain(format!(
                "critical density {rho_crit} must lie strictly inside (0, {rho_jam})"
            )));
        }
        Self::triangular(v_free, v_free * rho_crit / (rho_jam - rho_crit), rho_jam)
    }

    /// Trapezoidal diagram: a triangle truncated at `q_max`.
    pub fn trapezoidal(v_free: f64, v_cong: f64, rho_jam: f64, q_max: f64) -> Result<Self> {
        require_positive("v_free", v_free)?;
        require_positive("v_cong", v_cong)?;
        require_positive("rho_jam", rho_jam)?;
        if !(q_max > 0.0) {
            return Err(Error::Domain(format!("q_max must be positive, got {q_max}")));
        }
        // apex of the untruncated triangle
        let apex = v_cong * rho_jam / (v_free + v_cong);
        let peak = v_free * apex;
        let (rho_crit, rho_crit_right, capacity) = if q_max < peak {
            (q_max / v_free, rho_jam - q_max / v_cong, q_max)
        } else {
            (apex, apex, peak)
        };
        Ok(Self {
            family: Family::Trapezoidal { v_free, v_cong, rho_jam, q_max },
            rho_jam,
            rho_crit,
            rho_crit_right,
            capacity,
            max_speed: v_free.max(v_cong),
        })
    }

    /// Kerner-Konhauser diagram for `lanes` lanes. `tau` in s and
    /// `unit_length` in km set the speed scale `unit_length/tau`.
    ///
    /// The jam density is the zero of the speed law, which lies a hair above
    /// `lanes·rho_jam_lane` because of the small constant offset in the law.
    pub fn kerner_konhauser(lanes: f64, rho_jam_lane: f64, tau: f64, unit_length: f64) -> Result<Self> {
        require_positive("lanes", lanes)?;
        require_positive("rho_jam_lane", rho_jam_lane)?;
        require_positive("tau", tau)?;
        require_positive("unit_length", unit_length)?;
        let family = Family::KernerKonhauser { lanes, rho_jam_lane, tau, unit_length };
        let nominal = lanes * rho_jam_lane;
        let speed = |rho: f64| kk_speed(lanes, rho_jam_lane, tau, unit_length, rho);
        if speed(2.0 * nominal) >= 0.0 {
            return Err(Error::Model("speed law has no zero below twice the jam density".into()));
        }
        let rho_jam = bisect_nonincreasing(speed, 0.0, 0.5 * nominal, 2.0 * nominal, 1e-14 * nominal);
        let flux = move |rho: f64| rho * kk_speed(lanes, rho_jam_lane, tau, unit_length, rho);
        let (rho_crit, capacity) = find_critical_of(flux, rho_jam)?;
        let max_speed = sampled_max_speed(flux, rho_jam, rho_crit);
        Ok(Self {
            family,
            rho_jam,
            rho_crit,
            rho_crit_right: rho_crit,
            capacity,
            max_speed,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rho_jam(&self) -> f64 {
        self.rho_jam
    }

    pub fn rho_crit(&self) -> f64 {
        self.rho_crit
    }

    /// Right edge of the capacity plateau (equals [`Self::rho_crit`] for
    /// diagrams without a plateau).
    pub fn rho_crit_right(&self) -> f64 {
        self.rho_crit_right
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Upper bound on `|Q′|`, used for the CFL condition.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Free-flow speed `V(0) = Q′(0)`.
    pub fn free_speed(&self) -> f64 {
        match self.family {
            Family::Greenshields { v_free, .. } | Family::Trapezoidal { v_free, .. } => v_free,
            Family::KernerKonhauser { lanes, rho_jam_lane, tau, unit_length } => {
                kk_speed(lanes, rho_jam_lane, tau, unit_length, 0.0)
            }
        }
    }

    /// Number of lanes represented by the diagram (1 unless the family
    /// carries an explicit lane count).
    pub fn lanes(&self) -> f64 {
        match self.family {
            Family::KernerKonhauser { lanes, .. } => lanes,
            _ => 1.0,
        }
    }

    /// Validates a density and clamps it into `[0, rho_jam]`.
    pub fn check_density(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho < -DENSITY_SLACK || rho > self.rho_jam + DENSITY_SLACK {
            return Err(Error::Domain(format!(
                "density {rho} outside [0, {}] veh/km",
                self.rho_jam
            )));
        }
        Ok(rho.clamp(0.0, self.rho_jam))
    }

    fn check_flux(&self, what: &str, value: f64) -> Result<f64> {
        if value.is_nan() || value < -FLUX_SLACK || value > self.capacity + FLUX_SLACK {
            return Err(Error::Domain(format!(
                "{what} {value} outside [0, {}] veh/s",
                self.capacity
            )));
        }
        Ok(value.clamp(0.0, self.capacity))
    }

    /// `Q(ρ)` in veh/s.
    pub fn flux(&self, rho: f64) -> Result<f64> {
        Ok(self.flux_unchecked(self.check_density(rho)?))
    }

    /// `Q(ρ)` without domain validation; `rho` must already lie in
    /// `[0, rho_jam]`.
    pub fn flux_unchecked(&self, rho: f64) -> f64 {
        match self.family {
            Family::Greenshields { v_free, rho_jam } => v_free * rho * (1.0 - rho / rho_jam),
            Family::Trapezoidal { v_free, v_cong, rho_jam, q_max } => {
                (v_free * rho).min(v_cong * (rho_jam - rho)).min(q_max).max(0.0)
            }
            Family::KernerKonhauser { lanes, rho_jam_lane, tau, unit_length } => {
                (rho * kk_speed(lanes, rho_jam_lane, tau, unit_length, rho)).max(0.0)
            }
        }
    }

    /// Space-mean speed `Q(ρ)/ρ` in km/s, with `V(0)` at zero density.
    pub fn speed(&self, rho: f64) -> Result<f64> {
        let rho = self.check_density(rho)?;
        if rho <= 0.0 {
            return Ok(self.free_speed());
        }
        Ok(self.flux_unchecked(rho) / rho)
    }

    /// Demand `D(ρ) = Q(min{ρ, rho_crit})`.
    pub fn demand(&self, rho: f64) -> Result<f64> {
        Ok(self.demand_unchecked(self.check_density(rho)?))
    }

    pub(crate) fn demand_unchecked(&self, rho: f64) -> f64 {
        if rho >= self.rho_crit {
            self.capacity
        } else {
            self.flux_unchecked(rho)
        }
    }

    /// Supply `S(ρ) = Q(max{ρ, rho_crit})`.
    pub fn supply(&self, rho: f64) -> Result<f64> {
        Ok(self.supply_unchecked(self.check_density(rho)?))
    }

    pub(crate) fn supply_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.rho_crit {
            self.capacity
        } else {
            self.flux_unchecked(rho)
        }
    }

    /// The unique under-critical density with `D(ρ) = d`.
    ///
    /// At `d = capacity` this is the left edge of any capacity plateau.
    pub fn inv_demand(&self, d: f64) -> Result<f64> {
        let d = self.check_flux("demand", d)?;
        if d >= self.capacity {
            return Ok(self.rho_crit);
        }
        if d <= 0.0 {
            return Ok(0.0);
        }
        Ok(match self.family {
            Family::Trapezoidal { v_free, .. } => (d / v_free).min(self.rho_crit),
            _ => bisect_nondecreasing(
                |r| self.flux_unchecked(r),
                d,
                0.0,
                self.rho_crit,
                1e-12 * self.rho_jam,
            ),
        })
    }

    /// The unique over-critical density with `S(ρ) = s`.
    ///
    /// At `s = capacity` this is the right edge of any capacity plateau.
    pub fn inv_supply(&self, s: f64) -> Result<f64> {
        let s = self.check_flux("supply", s)?;
        if s >= self.capacity {
            return Ok(self.rho_crit_right);
        }
        if s <= 0.0 {
            return Ok(self.rho_jam);
        }
        Ok(match self.family {
            Family::Trapezoidal { v_cong, rho_jam, .. } => (rho_jam - s / v_cong).max(self.rho_crit_right),
            _ => bisect_nonincreasing(
                |r| self.flux_unchecked(r),
                s,
                self.rho_crit,
                self.rho_jam,
                1e-12 * self.rho_jam,
            ),
        })
    }

    /// Inverse flux-density relation `R(γ)` in terms of the demand/supply
    /// ratio: `D⁻¹(Cγ)` for `γ ≤ 1` and `S⁻¹(C/γ)` above.
    pub fn rho_of_gamma(&self, gamma: Gamma) -> Result<f64> {
        match gamma {
            Gamma::Infinite => Ok(self.rho_jam),
            Gamma::Finite(g) if g.is_nan() || g < 0.0 => {
                Err(Error::Domain(format!("ratio {g} must be nonnegative")))
            }
            Gamma::Finite(g) if g <= 1.0 => self.inv_demand(self.capacity * g),
            Gamma::Finite(g) => self.inv_supply(self.capacity / g),
        }
    }

    /// Engquist-Osher splitting `(g, h)` of `f(k) = C − Q(rho_crit − k)` at
    /// `k = rho_crit − ρ`.
    pub fn eo_split(&self, rho: f64) -> Result<(f64, f64)> {
        let rho = self.check_density(rho)?;
        let k = self.rho_crit - rho;
        let f = |k: f64| self.capacity - self.flux_unchecked(self.rho_crit - k);
        let g = if k >= 0.0 { f(k) } else { 0.0 };
        // inside a plateau the transformed flux vanishes as well
        let h = if k <= 0.0 { f(k).max(0.0) } else { 0.0 };
        Ok((g, h))
    }

    /// Characteristic speed `Q′(ρ)` in km/s.
    ///
    /// Smooth families use a central difference; the critical point returns
    /// exactly zero. Kinked diagrams return the left slope at a kink.
    pub fn char_speed(&self, rho: f64) -> Result<f64> {
        let rho = self.check_density(rho)?;
        Ok(self.slope(rho, -1.0))
    }

    /// Characteristic speed at `rho` evaluated on the side facing `toward`.
    ///
    /// This is the speed at the edge of a rarefaction fan spanning
    /// `[rho, toward]`; it only differs from [`Self::char_speed`] at kinks.
    pub fn char_speed_toward(&self, rho: f64, toward: f64) -> Result<f64> {
        let rho = self.check_density(rho)?;
        let toward = self.check_density(toward)?;
        let dir = if toward > rho { 1.0 } else { -1.0 };
        Ok(self.slope(rho, dir))
    }

    fn slope(&self, rho: f64, dir: f64) -> f64 {
        match self.family {
            Family::Greenshields { v_free, rho_jam } => v_free * (1.0 - 2.0 * rho / rho_jam),
            Family::Trapezoidal { v_free, v_cong, .. } => {
                // probe a hair to the requested side of any kink
                let probe = rho + dir * 1e-12 * self.rho_jam;
                if probe < self.rho_crit {
                    v_free
                } else if probe <= self.rho_crit_right {
                    0.0
                } else {
                    -v_cong
                }
            }
            Family::KernerKonhauser { .. } => {
                if (rho - self.rho_crit).abs() <= 1e-12 * self.rho_jam {
                    return 0.0;
                }
                let d = central_difference(|r| self.flux_unchecked(r), rho, self.rho_jam);
                // the stencil may straddle the peak; unimodality fixes the sign
                if rho < self.rho_crit {
                    d.max(0.0)
                } else {
                    d.min(0.0)
                }
            }
        }
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

fn kk_speed(lanes: f64, rho_jam_lane: f64, tau: f64, unit_length: f64, rho: f64) -> f64 {
    let z = (rho / (lanes * rho_jam_lane) - KK_OFFSET) / KK_WIDTH;
    KK_SCALE * (1.0 / (1.0 + z.exp()) - KK_SHIFT) * (unit_length / tau)
}

fn central_difference<F: Fn(f64) -> f64>(q: F, rho: f64, rho_jam: f64) -> f64 {
    let h = 1e-6 * rho_jam;
    let lo = (rho - h).max(0.0);
    let hi = (rho + h).min(rho_jam);
    (q(hi) - q(lo)) / (hi - lo)
}

fn sampled_max_speed<F: Fn(f64) -> f64>(q: F, rho_jam: f64, rho_crit: f64) -> f64 {
    let n = 10 * SAMPLE_POINTS;
    (0..=n)
        .map(|i| rho_jam * i as f64 / n as f64)
        .chain(std::iter::once(rho_crit))
        .map(|r| central_difference(&q, r, rho_jam).abs())
        .fold(0.0, f64::max)
}

/// Locates the critical density and capacity of a flux law `q` on
/// `[0, rho_jam]`.
///
/// The law is sampled on a 1000-point grid; a sample profile that rises again
/// after falling is rejected as non-unimodal. The maximiser is then refined by
/// golden-section search to a bracket narrower than `1e-10·rho_jam`.
pub fn find_critical_of<F: Fn(f64) -> f64>(q: F, rho_jam: f64) -> Result<(f64, f64)> {
    let n = SAMPLE_POINTS;
    let samples: Vec<f64> = (0..=n).map(|i| q(rho_jam * i as f64 / n as f64)).collect();
    let peak = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() || peak <= 0.0 {
        return Err(Error::Model("flux law has no positive maximum".into()));
    }
    let tol = 1e-12 * peak;
    let mut falling = false;
    for w in samples.windows(2) {
        let delta = w[1] - w[0];
        if delta < -tol {
            falling = true;
        } else if falling && delta > tol {
            return Err(Error::Model("flux law is not unimodal on the sample grid".into()));
        }
    }
    let best = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = rho_jam * best.saturating_sub(1) as f64 / n as f64;
    let hi = rho_jam * (best + 1).min(n) as f64 / n as f64;
    let rho_crit = golden_section_max(&q, lo, hi, 1e-10 * rho_jam);
    Ok((rho_crit, q(rho_crit)))
}

/// Critical density and capacity of a diagram.
pub fn find_critical(fd: &FundamentalDiagram) -> Result<(f64, f64)> {
    match fd.family {
        Family::KernerKonhauser { .. } => find_critical_of(|r| fd.flux_unchecked(r), fd.rho_jam),
        _ => Ok((fd.rho_crit, fd.capacity)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gs() -> FundamentalDiagram {
        FundamentalDiagram::greenshields(1.0, 4.0).unwrap()
    }

    fn kk(lanes: f64) -> FundamentalDiagram {
        FundamentalDiagram::kerner_konhauser(lanes, 180.0, 5.0, 0.028).unwrap()
    }

    #[test]
    fn greenshields_flux_examples() {
        let fd = gs();
        assert_eq!(fd.flux(0.0).unwrap(), 0.0);
        assert_eq!(fd.flux(2.0).unwrap(), 1.0);
        assert_eq!(fd.capacity(), 1.0);
        assert_eq!(fd.rho_crit(), 2.0);
        assert_eq!(find_critical(&fd).unwrap(), (2.0, 1.0));
    }

    #[test]
    fn flux_rejects_out_of_domain_density() {
        let fd = gs();
        assert!(matches!(fd.flux(-0.1), Err(Error::Domain(_))));
        assert!(matches!(fd.flux(4.1), Err(Error::Domain(_))));
        // small floating drift is clamped
        assert_eq!(fd.flux(4.0 + 1e-10).unwrap(), 0.0);
        assert_eq!(fd.flux(-1e-10).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_triangle_critical_density() {
        let fd = FundamentalDiagram::trapezoidal(1.0, 1.0, 4.0, 1e9).unwrap();
        assert_eq!(fd.rho_crit(), 2.0);
        assert_eq!(fd.capacity(), 2.0);
        let fd = FundamentalDiagram::triangular_from_critical(1.0, 1.0, 4.0).unwrap();
        assert!((fd.rho_crit() - 1.0).abs() < 1e-15);
        if let Family::Trapezoidal { v_cong, .. } = fd.family() {
            assert!((v_cong - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn trapezoid_plateau_edges() {
        let fd = FundamentalDiagram::trapezoidal(1.0, 0.5, 6.0, 1.5).unwrap();
        assert_eq!(fd.rho_crit(), 1.5);
        assert_eq!(fd.rho_crit_right(), 3.0);
        assert_eq!(fd.inv_demand(1.5).unwrap(), 1.5);
        assert_eq!(fd.inv_supply(1.5).unwrap(), 3.0);
        assert_eq!(fd.demand(2.5).unwrap(), 1.5);
        assert_eq!(fd.supply(2.5).unwrap(), 1.5);
        assert_eq!(fd.eo_split(2.5).unwrap(), (0.0, 0.0));
        assert_eq!(fd.char_speed_toward(1.5, 0.0).unwrap(), 1.0);
        assert_eq!(fd.char_speed_toward(1.5, 2.0).unwrap(), 0.0);
        assert_eq!(fd.char_speed_toward(3.0, 4.0).unwrap(), -0.5);
    }

    #[test]
    fn demand_and_supply_examples() {
        let fd = gs();
        assert_eq!(fd.demand(0.0).unwrap(), 0.0);
        assert_eq!(fd.demand(4.0).unwrap(), fd.capacity());
        assert_eq!(fd.demand(1.0).unwrap(), 0.75);
        assert_eq!(fd.supply(0.0).unwrap(), fd.capacity());
        assert_eq!(fd.supply(4.0).unwrap(), 0.0);
        assert_eq!(fd.supply(3.0).unwrap(), 0.75);
    }

    #[test]
    fn inverse_maps_at_the_ends() {
        for fd in [gs(), kk(1.0), FundamentalDiagram::triangular(1.0, 0.25, 5.0).unwrap()] {
            assert_eq!(fd.inv_demand(fd.capacity()).unwrap(), fd.rho_crit());
            assert_eq!(fd.inv_supply(0.0).unwrap(), fd.rho_jam());
            assert_eq!(fd.inv_demand(0.0).unwrap(), 0.0);
            assert!(matches!(fd.inv_demand(fd.capacity() * 1.01), Err(Error::Domain(_))));
            assert!(matches!(fd.inv_supply(-0.5), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn greenshields_inverse_demand_closed_form() {
        let fd = gs();
        // D(1) = 0.75
        assert!((fd.inv_demand(0.75).unwrap() - 1.0).abs() < 1e-10);
        assert!((fd.inv_supply(0.75).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rho_of_gamma_limits() {
        let fd = gs();
        assert_eq!(fd.rho_of_gamma(Gamma::Finite(0.0)).unwrap(), 0.0);
        assert_eq!(fd.rho_of_gamma(Gamma::Finite(1.0)).unwrap(), fd.rho_crit());
        assert_eq!(fd.rho_of_gamma(Gamma::Infinite).unwrap(), fd.rho_jam());
        assert!(matches!(fd.rho_of_gamma(Gamma::Finite(-1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn eo_split_examples() {
        let fd = gs();
        assert_eq!(fd.eo_split(2.0).unwrap(), (0.0, 0.0));
        assert_eq!(fd.eo_split(0.0).unwrap(), (1.0, 0.0));
        assert_eq!(fd.eo_split(1.0).unwrap(), (0.25, 0.0));
        assert_eq!(fd.eo_split(3.0).unwrap(), (0.0, 0.25));
    }

    #[test]
    fn greenshields_char_speed() {
        let fd = gs();
        assert_eq!(fd.char_speed(3.0).unwrap(), -0.5);
        assert_eq!(fd.char_speed(2.5).unwrap(), -0.25);
        assert_eq!(fd.char_speed(2.0).unwrap(), 0.0);
    }

    #[test]
    fn kerner_konhauser_paper_values() {
        let one = kk(1.0);
        let two = kk(2.0);
        assert!((one.free_speed() / M_PER_S - 27.8).abs() < 0.1);
        assert!((one.capacity() - 0.7091).abs() < 5e-5);
        assert!((two.capacity() - 2.0 * one.capacity()).abs() < 1e-12);
        assert!((one.rho_crit() - 35.8944).abs() < 5e-5);
        assert!((two.rho_of_gamma(Gamma::Finite(0.5)).unwrap() - 26.4162).abs() < 5e-5);
        assert!((two.inv_supply(one.capacity()).unwrap() - 118.3550).abs() < 5e-5);
        // jam density sits just above the nominal lane jam density
        assert!(one.rho_jam() > 180.0 && one.rho_jam() < 180.05);
        assert!(one.flux(one.rho_jam()).unwrap() < 1e-9);
        let (rc, cap) = find_critical(&one).unwrap();
        assert_eq!((rc, cap), (one.rho_crit(), one.capacity()));
    }

    #[test]
    fn kerner_konhauser_speed_bound_is_free_speed() {
        let fd = kk(1.0);
        assert!((fd.max_speed() - fd.free_speed()).abs() < 1e-8);
    }

    #[test]
    fn non_unimodal_law_is_a_model_error() {
        // two humps
        let q = |r: f64| (r * std::f64::consts::PI / 2.0).sin().abs() * (4.0 - r);
        assert!(matches!(find_critical_of(q, 4.0), Err(Error::Model(_))));
    }

    #[test]
    fn unimodal_samples_and_capacity_is_the_maximum() {
        for fd in [gs(), kk(1.0), kk(2.0), FundamentalDiagram::trapezoidal(1.0, 0.5, 6.0, 1.5).unwrap()] {
            let n = 1000;
            let samples: Vec<f64> =
                (0..=n).map(|i| fd.flux_unchecked(fd.rho_jam() * i as f64 / n as f64)).collect();
            let max = samples.iter().copied().fold(0.0, f64::max);
            assert!(fd.capacity() >= max * (1.0 - 1e-6));
            assert!((fd.capacity() - max).abs() <= 1e-6 * fd.capacity() + 1e-3 * fd.capacity());
            for (i, w) in samples.windows(2).enumerate() {
                let rho = fd.rho_jam() * i as f64 / n as f64;
                if rho + fd.rho_jam() / n as f64 <= fd.rho_crit() {
                    assert!(w[1] >= w[0] - 1e-12);
                } else if rho >= fd.rho_crit() {
                    assert!(w[1] <= w[0] + 1e-12);
                }
            }
            assert!(fd.flux_unchecked(0.0).abs() <= 1e-9);
            assert!(fd.flux_unchecked(fd.rho_jam()).abs() <= 1e-9);
        }
    }
}
