//! Asymptotic stationary states of a ring road made of two homogeneous links.
//!
//! Link 1 (the bottleneck) covers `[0, L1]` and link 2 covers `[L1, L]`;
//! traffic flows towards increasing `x` and wraps from `L` back to `0`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::fundamental_diagram::FundamentalDiagram;
use crate::numeric::{bisect_nondecreasing, bisect_nonincreasing};
use crate::supply_demand::Gamma;

/// Default distance (veh) within which a vehicle count is treated as sitting
/// exactly on a scenario threshold.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSpec {
    /// Ring length `L` in km.
    pub length: f64,
    /// Length `L1` of link 1 in km.
    pub link1_length: f64,
    pub fd1: FundamentalDiagram,
    pub fd2: FundamentalDiagram,
    /// Total number of vehicles `N`.
    pub vehicles: f64,
}

impl RingSpec {
    pub fn new(length: f64, link1_length: f64, fd1: FundamentalDiagram, fd2: FundamentalDiagram, vehicles: f64) -> Result<Self> {
        if !(link1_length > 0.0 && link1_length < length && length.is_finite()) {
            return Err(Error::Domain(format!(
                "link 1 length {link1_length} km must lie strictly inside (0, {length}) km"
            )));
        }
        if !(fd1.capacity() < fd2.capacity()) {
            return Err(Error::Domain(format!(
                "link 1 must be the bottleneck: C1={} is not below C2={}",
                fd1.capacity(),
                fd2.capacity()
            )));
        }
        let spec = Self { length, link1_length, fd1, fd2, vehicles: 0.0 };
        let max = spec.jam_vehicles();
        if !(0.0..=max).contains(&vehicles) {
            return Err(Error::Domain(format!("vehicle count {vehicles} outside [0, {max}]")));
        }
        Ok(Self { vehicles, ..spec })
    }

    pub fn link2_length(&self) -> f64 {
        self.length - self.link1_length
    }

    /// Vehicles on a fully jammed ring.
    pub fn jam_vehicles(&self) -> f64 {
        self.fd1.rho_jam() * self.link1_length + self.fd2.rho_jam() * self.link2_length()
    }

    pub fn with_vehicles(&self, vehicles: f64) -> Result<Self> {
        Self::new(self.length, self.link1_length, self.fd1, self.fd2, vehicles)
    }

    pub fn thresholds(&self) -> Result<(f64, f64)> {
        ring_thresholds(self.length, self.link1_length, &self.fd1, &self.fd2)
    }
}

/// `(N_a, N_c)`: the largest count for which both links stay under-critical
/// and the count at which link 2 is uniformly over-critical at flux `C1`.
///
/// `L1 = L` is accepted and collapses both values to `R1(1)·L`.
pub fn ring_thresholds(length: f64, link1_length: f64, fd1: &FundamentalDiagram, fd2: &FundamentalDiagram) -> Result<(f64, f64)> {
    if !(link1_length > 0.0 && link1_length <= length) {
        return Err(Error::Domain(format!("link 1 length {link1_length} km outside (0, {length}] km")));
    }
    let ratio = fd1.capacity() / fd2.capacity();
    let l2 = length - link1_length;
    let base = fd1.rho_crit() * link1_length;
    let n_a = base + fd2.rho_of_gamma(Gamma::Finite(ratio))? * l2;
    let n_c = base + fd2.rho_of_gamma(Gamma::Finite(1.0 / ratio))? * l2;
    Ok((n_a, n_c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Both links under-critical.
    A,
    /// Link 1 critical, stationary shock on link 2.
    B,
    /// Link 1 critical, link 2 strictly over-critical.
    C,
    /// Both links strictly over-critical.
    D,
}

impl Scenario {
    pub fn label(self) -> &'static str {
        match self {
            Scenario::A => "a",
            Scenario::B => "b",
            Scenario::C => "c",
            Scenario::D => "d",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::A => "both links under-critical",
            Scenario::B => "link 1 critical, stationary shock on link 2",
            Scenario::C => "link 1 critical, link 2 strictly over-critical",
            Scenario::D => "both links strictly over-critical",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Uniform piece of the predicted profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// km.
    pub start: f64,
    /// km.
    pub end: f64,
    /// 1 or 2.
    pub link: u8,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteSide {
    /// Just upstream of the position.
    Minus,
    /// Just downstream of the position.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorSite {
    /// km along the ring; `L` denotes the upstream side of `x = 0`.
    pub position: f64,
    pub side: SiteSide,
}

impl InteriorSite {
    /// Index of the cell holding this site on a ring of `n` cells of length
    /// `dx`.
    pub fn cell(&self, dx: f64, n: usize) -> usize {
        let u = self.position / dx;
        let eps = 1e-9;
        let idx = match self.side {
            SiteSide::Minus => (u - eps).ceil() as i64 - 1,
            SiteSide::Plus => (u + eps).floor() as i64,
        };
        idx.rem_euclid(n as i64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingPrediction {
    pub scenario: Scenario,
    /// Asymptotic flux in veh/s.
    pub q: f64,
    /// Shock position on link 2 (km), scenario b only.
    pub l2: Option<f64>,
    pub segments: Vec<Segment>,
    /// Candidate interior-state locations. Scenario b lists both sides of
    /// the shock.
    pub interior_sites: Vec<InteriorSite>,
}

impl RingPrediction {
    pub fn density_at(&self, x: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| x >= s.start && x < s.end)
            .or(self.segments.last())
            .map_or(0.0, |s| s.rho)
    }

    pub fn vehicles(&self) -> f64 {
        self.segments.iter().map(|s| s.rho * (s.end - s.start)).sum()
    }
}

pub fn predict(spec: &RingSpec) -> Result<RingPrediction> {
    predict_with_tolerance(spec, BOUNDARY_TOL)
}

/// As [`predict`], treating counts within `tol` vehicles of a threshold as
/// lying on it.
pub fn predict_with_tolerance(spec: &RingSpec, tol: f64) -> Result<RingPrediction> {
    let (n_a, n_c) = spec.thresholds()?;
    let n = spec.vehicles;
    let (l, l1) = (spec.length, spec.link1_length);
    let (c1, c2) = (spec.fd1.capacity(), spec.fd2.capacity());
    let r1 = |g: f64| spec.fd1.rho_of_gamma(Gamma::Finite(g));
    let r2 = |g: f64| spec.fd2.rho_of_gamma(Gamma::Finite(g));
    let two_links = |q: f64, rho1: f64, rho2: f64, scenario: Scenario, sites: Vec<InteriorSite>| RingPrediction {
        scenario,
        q,
        l2: None,
        segments: vec![
            Segment { start: 0.0, end: l1, link: 1, rho: rho1 },
            Segment { start: l1, end: l, link: 2, rho: rho2 },
        ],
        interior_sites: sites,
    };

    if (n - n_a).abs() <= tol {
        let site = InteriorSite { position: l, side: SiteSide::Minus };
        return Ok(two_links(c1, r1(1.0)?, r2(c1 / c2)?, Scenario::A, vec![site]));
    }
    if n < n_a {
        let count = |q: f64| {
            r1(q / c1).unwrap_or(f64::NAN) * l1 + r2(q / c2).unwrap_or(f64::NAN) * (l - l1)
        };
        let q = bisect_nondecreasing(count, n, 0.0, c1, 1e-10 * c1);
        return Ok(two_links(q, r1(q / c1)?, r2(q / c2)?, Scenario::A, Vec::new()));
    }
    if (n - n_c).abs() <= tol {
        let site = InteriorSite { position: l1, side: SiteSide::Plus };
        return Ok(two_links(c1, r1(1.0)?, r2(c2 / c1)?, Scenario::C, vec![site]));
    }
    if n < n_c {
        let rho_free = r2(c1 / c2)?;
        let rho_cong = r2(c2 / c1)?;
        let base = r1(1.0)? * l1;
        let l2 = (n - base + rho_free * l1 - rho_cong * l) / (rho_free - rho_cong);
        return Ok(RingPrediction {
            scenario: Scenario::B,
            q: c1,
            l2: Some(l2),
            segments: vec![
                Segment { start: 0.0, end: l1, link: 1, rho: r1(1.0)? },
                Segment { start: l1, end: l2, link: 2, rho: rho_free },
                Segment { start: l2, end: l, link: 2, rho: rho_cong },
            ],
            interior_sites: vec![
                InteriorSite { position: l2, side: SiteSide::Minus },
                InteriorSite { position: l2, side: SiteSide::Plus },
            ],
        });
    }
    // both links congested; the count falls as q grows
    let count = |q: f64| {
        let g1 = Gamma::Finite(c1 / q);
        let g2 = Gamma::Finite(c2 / q);
        spec.fd1.rho_of_gamma(g1).unwrap_or(f64::NAN) * l1 + spec.fd2.rho_of_gamma(g2).unwrap_or(f64::NAN) * (l - l1)
    };
    let q = bisect_nonincreasing(count, n, 0.0, c1, 1e-10 * c1);
    let rho1 = spec.fd1.rho_of_gamma(Gamma::Finite(c1 / q))?;
    let rho2 = spec.fd2.rho_of_gamma(Gamma::Finite(c2 / q))?;
    Ok(two_links(q, rho1, rho2, Scenario::D, Vec::new()))
}

/// `∫₀^{L1} a₁(ρ₀ + A sin(2πx/L)) dx + ∫_{L1}^{L} a₂(ρ₀ + A sin(2πx/L)) dx`
/// with `aᵢ` the lane count of each link's diagram.
pub fn vehicles_of_initial(spec: &RingSpec, rho0: f64, amplitude: f64) -> Result<f64> {
    let (l, l1) = (spec.length, spec.link1_length);
    for (fd, a, b) in [(&spec.fd1, 0.0, l1), (&spec.fd2, l1, l)] {
        let lanes = fd.lanes();
        let (lo, hi) = sinusoid_range(rho0, amplitude, l, a, b);
        if lanes * lo < -1e-9 || lanes * hi > fd.rho_jam() + 1e-9 {
            return Err(Error::Domain(format!(
                "initial density {:.4}..{:.4} veh/km leaves [0, {:.4}] on [{a}, {b}] km",
                lanes * lo,
                lanes * hi,
                fd.rho_jam()
            )));
        }
    }
    let integral = |a: f64, b: f64| rho0 * (b - a) - amplitude * l / (2.0 * PI) * ((2.0 * PI * b / l).cos() - (2.0 * PI * a / l).cos());
    Ok(spec.fd1.lanes() * integral(0.0, l1) + spec.fd2.lanes() * integral(l1, l))
}

// Range of ρ₀ + A sin(2πx/L) on [a, b].
fn sinusoid_range(rho0: f64, amplitude: f64, l: f64, a: f64, b: f64) -> (f64, f64) {
    let f = |x: f64| rho0 + amplitude * (2.0 * PI * x / l).sin();
    let mut candidates = vec![f(a), f(b)];
    for x in [0.25 * l, 0.75 * l] {
        if x > a && x < b {
            candidates.push(f(x));
        }
    }
    let lo = candidates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = (panels.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

/// Stationary pattern of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkPattern {
    /// Uniform under-critical `(q, C)`.
    UC,
    /// Stationary shock: `(q, C)` upstream of `(C, q)`.
    SS,
    /// Uniform strictly over-critical `(C, q)`.
    SOC,
}

impl LinkPattern {
    pub const ALL: [LinkPattern; 3] = [LinkPattern::UC, LinkPattern::SS, LinkPattern::SOC];

    pub fn label(self) -> &'static str {
        match self {
            LinkPattern::UC => "UC",
            LinkPattern::SS => "SS",
            LinkPattern::SOC => "SOC",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible { scenario: Scenario },
    Infeasible { reason: String },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// `table[i][j]` for link 1 in pattern `LinkPattern::ALL[i]` and link 2 in
/// `LinkPattern::ALL[j]`.
pub type FeasibilityTable = [[Feasibility; 3]; 3];

// A flux component that is either the unknown q or a link capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Sym {
    Q,
    Cap(u8),
}

/// Decides which pairs of link patterns can coexist on the ring.
///
/// Every pattern fixes the end states of its link in terms of the unknown
/// flux `q`. Each of the two boundaries must pass `q = min{D_up, S_down}`,
/// which either pins `q` to a capacity or bounds it from above; the pair is
/// feasible when these requirements agree with the pattern's own bounds
/// (`q ≤ C` for UC, `q < C` for SS and SOC).
pub fn feasibility_table(spec: &RingSpec) -> FeasibilityTable {
    let caps = [spec.fd1.capacity(), spec.fd2.capacity()];
    let cell = |p1: LinkPattern, p2: LinkPattern| classify_pair(p1, p2, caps);
    LinkPattern::ALL.map(|p1| LinkPattern::ALL.map(|p2| cell(p1, p2)))
}

fn classify_pair(p1: LinkPattern, p2: LinkPattern, caps: [f64; 2]) -> Feasibility {
    // (D, S) at the upstream and downstream ends of link k (1-based)
    let ends = |p: LinkPattern, k: u8| -> ((Sym, Sym), (Sym, Sym)) {
        let uc = (Sym::Q, Sym::Cap(k));
        let oc = (Sym::Cap(k), Sym::Q);
        match p {
            LinkPattern::UC => (uc, uc),
            LinkPattern::SS => (uc, oc),
            LinkPattern::SOC => (oc, oc),
        }
    };
    let (head1, tail1) = ends(p1, 1);
    let (head2, tail2) = ends(p2, 2);

    // bounds: (capacity index, strict)
    let mut bounds: Vec<(u8, bool)> = Vec::new();
    for (p, k) in [(p1, 1u8), (p2, 2u8)] {
        bounds.push((k, p != LinkPattern::UC));
    }
    let mut pinned: Vec<u8> = Vec::new();
    // x = L1 (link 1 into link 2), then x = 0 (link 2 into link 1)
    for (up, down) in [(tail1, head2), (tail2, head1)] {
        match (up.0, down.1) {
            (Sym::Q, Sym::Q) => {}
            (Sym::Q, Sym::Cap(k)) | (Sym::Cap(k), Sym::Q) => bounds.push((k, false)),
            (Sym::Cap(a), Sym::Cap(b)) => pinned.push(if caps[a as usize - 1] <= caps[b as usize - 1] { a } else { b }),
        }
    }
    let value = |k: u8| caps[k as usize - 1];
    if let Some(&k) = pinned.first() {
        if let Some(&other) = pinned.iter().find(|&&j| value(j) != value(k)) {
            return Feasibility::Infeasible { reason: format!("q=C{k} contradicts q=C{other}") };
        }
        for &(j, strict) in &bounds {
            let violated = if strict { value(k) >= value(j) } else { value(k) > value(j) };
            if violated {
                let op = if strict { "<" } else { "<=" };
                return Feasibility::Infeasible { reason: format!("q=C{k} contradicts q{op}C{j}") };
            }
        }
    }
    let scenario = match (p1, p2) {
        (LinkPattern::UC, LinkPattern::UC) => Scenario::A,
        (LinkPattern::UC, LinkPattern::SS) => Scenario::B,
        (LinkPattern::UC, LinkPattern::SOC) => Scenario::C,
        (LinkPattern::SOC, LinkPattern::SOC) => Scenario::D,
        _ => {
            return Feasibility::Infeasible {
                reason: format!("no scenario for ({}, {})", p1.label(), p2.label()),
            }
        }
    };
    Feasibility::Feasible { scenario }
}

#[cfg(test)]
mod tests {
    use super::*;

    const L_UNIT: f64 = 0.028;

    fn kk(lanes: f64) -> FundamentalDiagram {
        FundamentalDiagram::kerner_konhauser(lanes, 180.0, 5.0, L_UNIT).unwrap()
    }

    fn spec(n: f64) -> RingSpec {
        RingSpec::new(600.0 * L_UNIT, 100.0 * L_UNIT, kk(1.0), kk(2.0), n).unwrap()
    }

    #[test]
    fn thresholds_match_published_values() {
        let (n1, n3) = spec(0.0).thresholds().unwrap();
        assert!((n1 - 470.3311).abs() < 5e-4);
        assert!((n3 - 1757.4746).abs() < 5e-4);
    }

    #[test]
    fn single_link_ring_collapses_thresholds() {
        let fd = kk(1.0);
        let (a, c) = ring_thresholds(1.0, 1.0, &fd, &kk(2.0)).unwrap();
        assert_eq!(a, c);
        assert!((a - fd.rho_crit()).abs() < 1e-12);
    }

    #[test]
    fn scenario_b_shock_position() {
        let s = spec(0.0);
        let n = vehicles_of_initial(&s, 28.0, 3.0).unwrap();
        assert!((n - 858.3893).abs() < 5e-5);
        let p = predict(&s.with_vehicles(n).unwrap()).unwrap();
        assert_eq!(p.scenario, Scenario::B);
        assert!((p.l2.unwrap() / L_UNIT - 449.2561).abs() < 5e-4);
        assert!((p.vehicles() - n).abs() <= 1e-6 * n);
    }

    #[test]
    fn scenario_boundaries_and_sites() {
        let (n1, n3) = spec(0.0).thresholds().unwrap();
        let a = predict(&spec(n1)).unwrap();
        assert_eq!(a.scenario, Scenario::A);
        assert_eq!(a.q, kk(1.0).capacity());
        assert_eq!(a.interior_sites, vec![InteriorSite { position: 600.0 * L_UNIT, side: SiteSide::Minus }]);
        let c = predict(&spec(n3)).unwrap();
        assert_eq!(c.scenario, Scenario::C);
        assert!((c.segments[1].rho - 118.3550).abs() < 5e-5);
        assert_eq!(c.interior_sites[0].side, SiteSide::Plus);
        assert!(predict(&spec(0.5 * n1)).unwrap().interior_sites.is_empty());
        let d = predict(&spec(2000.0)).unwrap();
        assert_eq!(d.scenario, Scenario::D);
        assert!(d.interior_sites.is_empty());
        assert!((d.vehicles() - 2000.0).abs() < 1e-6 * 2000.0);
    }

    #[test]
    fn rho0_at_first_threshold() {
        let n = vehicles_of_initial(&spec(0.0), 15.4007, 3.0).unwrap();
        assert!((n - 470.3311).abs() < 1e-3);
    }

    #[test]
    fn uniform_initial_count() {
        let fd = FundamentalDiagram::greenshields(1.0, 10.0).unwrap();
        let big = FundamentalDiagram::greenshields(2.0, 10.0).unwrap();
        let s = RingSpec::new(2.0, 1.0, fd, big, 0.0).unwrap();
        assert!((vehicles_of_initial(&s, 3.0, 0.0).unwrap() - 6.0).abs() < 1e-12);
        assert!(vehicles_of_initial(&s, 9.0, 3.0).is_err());
    }

    #[test]
    fn simpson_matches_closed_form() {
        let s = spec(0.0);
        let l = s.length;
        let f = |x: f64| 28.0 + 3.0 * (2.0 * PI * x / l).sin();
        let num = simpson(f, 0.0, s.link1_length, 10_000) + 2.0 * simpson(f, s.link1_length, l, 10_000);
        let exact = vehicles_of_initial(&s, 28.0, 3.0).unwrap();
        assert!((num - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn site_cells() {
        let dx = L_UNIT;
        assert_eq!(InteriorSite { position: 600.0 * dx, side: SiteSide::Minus }.cell(dx, 600), 599);
        assert_eq!(InteriorSite { position: 100.0 * dx, side: SiteSide::Plus }.cell(dx, 600), 100);
        assert_eq!(InteriorSite { position: 100.0 * dx, side: SiteSide::Minus }.cell(dx, 600), 99);
        assert_eq!(InteriorSite { position: 449.3 * dx, side: SiteSide::Minus }.cell(dx, 600), 449);
    }

    #[test]
    fn feasibility_matches_table() {
        let t = feasibility_table(&spec(0.0));
        let feasible: Vec<(usize, usize)> =
            (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| t[i][j].is_feasible()).collect();
        assert_eq!(feasible, vec![(0, 0), (0, 1), (0, 2), (2, 2)]);
        for (i, j) in [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1)] {
            assert_eq!(t[i][j], Feasibility::Infeasible { reason: "q=C1 contradicts q<C1".into() });
        }
    }

    #[test]
    fn spec_validation() {
        assert!(RingSpec::new(1.0, 1.0, kk(1.0), kk(2.0), 0.0).is_err());
        assert!(RingSpec::new(1.0, 0.5, kk(2.0), kk(1.0), 0.0).is_err());
        assert!(RingSpec::new(1.0, 0.5, kk(1.0), kk(2.0), 1e6).is_err());
    }
}
