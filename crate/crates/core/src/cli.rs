//! Subcommand bodies, report/CSV writers and the report reader.
//!
//! Reports are `key: value` lines with numbers printed to four decimals.
//! CSV files carry units in their headers and six significant digits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::fundamental_diagram::{Family, FundamentalDiagram};
use crate::godunov::{detect_interior_states, run, DetectOptions, SimRecord};
use crate::riemann::{sample_profile, solve, BoundaryCase, InteriorSet, RiemannSolution};
use crate::ring::{feasibility_table, predict_with_tolerance, Feasibility, LinkPattern, RingPrediction, RingSpec, SiteSide};
use crate::supply_demand::{SDState, FLUX_TOL};

/// Header of the simulation snapshot CSV.
pub const SNAPSHOT_HEADER: &str = "t,cell,x_km,rho_veh_km,v_m_s,q_veh_s";
pub const RIEMANN_HEADER: &str = "xi_m_s,link,rho_veh_km,q_veh_s,demand_veh_s,supply_veh_s";
pub const RING_HEADER: &str = "segment,x_start_km,x_end_km,link,rho_veh_km,q_veh_s";

/// Files written by a subcommand, plus the report text.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: String,
    pub report_path: PathBuf,
    pub csv_path: PathBuf,
}

/// Formats `x` with six significant digits, switching to exponent notation
/// for very large or small magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..15).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // "-0.00000" style results collapse to zero
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

fn f4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn output_paths(cfg: &ScenarioConfig, out: &Path, csv: &str, report: &str) -> (PathBuf, PathBuf) {
    let csv = out.join(cfg.output.csv.as_deref().unwrap_or(csv));
    let report = out.join(cfg.output.report.as_deref().unwrap_or(report));
    (csv, report)
}

/// Reads a report back into `key -> value` pairs. Repeated keys keep every
/// value, in order.
pub fn parse_report(text: &str) -> BTreeMap<String, Vec<String>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(':') {
            map.entry(k.trim().to_string()).or_default().push(v.trim().to_string());
        }
    }
    map
}

/// First value of `key` in a parsed report, read as a number.
pub fn report_number(map: &BTreeMap<String, Vec<String>>, key: &str) -> Option<f64> {
    map.get(key)?.first()?.split_whitespace().next()?.parse().ok()
}

fn state_line(s: &SDState, fd: &FundamentalDiagram) -> String {
    let rho = s.to_density(fd).map(f4).unwrap_or_else(|_| "?".into());
    format!(
        "D {} S {} veh/s, rho {} veh/km, {}",
        f4(s.demand),
        f4(s.supply),
        rho,
        s.classification(fd.capacity()).label()
    )
}

fn interior_line(set: &InteriorSet, fd: &FundamentalDiagram) -> String {
    match set {
        InteriorSet::Unique(u) => format!("unique, {}", state_line(u, fd)),
        InteriorSet::Family { min_demand, min_supply, .. } => {
            format!("family, D >= {} and S >= {} veh/s", f4(*min_demand), f4(*min_supply))
        }
    }
}

fn flux_label(q: f64, c1: f64, c2: f64) -> String {
    let same = (c1 - c2).abs() <= FLUX_TOL;
    if same && (q - c1).abs() <= FLUX_TOL {
        "q=C".into()
    } else if (q - c1).abs() <= FLUX_TOL {
        "q=C1".into()
    } else if (q - c2).abs() <= FLUX_TOL {
        "q=C2".into()
    } else {
        format!("q={}", f4(q))
    }
}

pub fn riemann_report(cfg: &ScenarioConfig, sol: &RiemannSolution) -> Result<String> {
    let p = cfg.riemann_problem()?;
    let (c1, c2) = (p.fd_up.capacity(), p.fd_down.capacity());
    let case = match sol.case {
        BoundaryCase::DemandLimited => "demand-limited (D1 < S2)",
        BoundaryCase::SupplyLimited => "supply-limited (D1 > S2)",
        BoundaryCase::Balanced => "balanced (D1 = S2)",
    };
    let speeds = |w: &crate::riemann::Wave| {
        format!("{} .. {}", f4(w.speed_range.0 * 1e3), f4(w.speed_range.1 * 1e3))
    };
    let mut r = String::new();
    let _ = writeln!(r, "# riemann");
    let _ = writeln!(r, "capacity_up_veh_s: {}", f4(c1));
    let _ = writeln!(r, "capacity_down_veh_s: {}", f4(c2));
    let _ = writeln!(r, "u1: {}", state_line(&p.u1, &p.fd_up));
    let _ = writeln!(r, "u2: {}", state_line(&p.u2, &p.fd_down));
    let _ = writeln!(r, "case: {case}");
    let _ = writeln!(r, "boundary_flux_veh_s: {}", f4(sol.boundary_flux));
    let _ = writeln!(r, "stationary_up: {}", state_line(&sol.stat_up, &p.fd_up));
    let _ = writeln!(r, "stationary_down: {}", state_line(&sol.stat_down, &p.fd_down));
    let _ = writeln!(r, "interior_up: {}", interior_line(&sol.interior_up, &p.fd_up));
    let _ = writeln!(r, "interior_down: {}", interior_line(&sol.interior_down, &p.fd_down));
    let _ = writeln!(r, "wave_up: {}", sol.wave_up);
    let _ = writeln!(r, "wave_up_speed_m_s: {}", speeds(&sol.wave_up));
    let _ = writeln!(r, "wave_down: {}", sol.wave_down);
    let _ = writeln!(r, "wave_down_speed_m_s: {}", speeds(&sol.wave_down));
    let _ = writeln!(r, "summary: {} / {}, {}", sol.wave_up, sol.wave_down, flux_label(sol.boundary_flux, c1, c2));
    Ok(r)
}

pub fn cmd_riemann(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput> {
    let p = cfg.riemann_problem()?;
    let sol = solve(&p)?;
    let rc = cfg.riemann.as_ref().expect("riemann_problem checked the section");
    let xi_max = rc.xi_max.unwrap_or(1.2 * p.fd_up.max_speed().max(p.fd_down.max_speed()));
    let n = rc.samples;
    let xis: Vec<f64> = (0..n).map(|i| -xi_max + 2.0 * xi_max * i as f64 / (n - 1) as f64).collect();
    let points = sample_profile(&p, &sol, &xis)?;
    let mut csv = String::from(RIEMANN_HEADER);
    csv.push('\n');
    for pt in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            sig6(pt.xi * 1e3),
            pt.link,
            sig6(pt.rho),
            sig6(pt.flux),
            sig6(pt.state.demand),
            sig6(pt.state.supply)
        );
    }
    let report = riemann_report(cfg, &sol)?;
    let (csv_path, report_path) = output_paths(cfg, out, "riemann_profile.csv", "riemann_report.txt");
    write_file(&csv_path, &csv)?;
    write_file(&report_path, &report)?;
    Ok(CommandOutput { report, report_path, csv_path })
}

/// Snapshot CSV in the fixed column layout of [`SNAPSHOT_HEADER`].
pub fn snapshot_csv(record: &SimRecord) -> String {
    let mut csv = String::with_capacity(64 * record.snapshots.len() * record.last().rho.len());
    csv.push_str(SNAPSHOT_HEADER);
    csv.push('\n');
    for snap in &record.snapshots {
        for (i, ((rho, v), q)) in snap.rho.iter().zip(&snap.v).zip(&snap.q).enumerate() {
            let x = (i as f64 + 0.5) * record.dx;
            let _ = writeln!(csv, "{},{i},{},{},{},{}", sig6(snap.t), sig6(x), sig6(*rho), sig6(v * 1e3), sig6(*q));
        }
    }
    csv
}

pub fn cmd_simulate(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput> {
    let mut grid = cfg.build_grid()?;
    let step = cfg.step_config()?;
    let num = *cfg.numerics()?;
    let cfl = grid.cfl_number(num.dt);
    let record = run(&mut grid, &step, num.duration, num.record_every)?;

    let mut r = String::new();
    let _ = writeln!(r, "# simulate");
    let _ = writeln!(r, "cells: {}", grid.len());
    let _ = writeln!(r, "dx_m: {}", f4(grid.dx() * 1e3));
    let _ = writeln!(r, "dt_s: {}", f4(num.dt));
    let _ = writeln!(r, "cfl: {}", f4(cfl));
    let _ = writeln!(r, "steps: {}", record.steps);
    let _ = writeln!(r, "final_time_s: {}", f4(grid.time()));
    let _ = writeln!(r, "vehicles_initial_veh: {}", f4(record.initial_vehicles));
    let _ = writeln!(r, "inflow_veh: {}", f4(record.cumulative_inflow));
    let _ = writeln!(r, "outflow_veh: {}", f4(record.cumulative_outflow));
    let _ = writeln!(r, "vehicles_final_veh: {}", f4(record.final_vehicles));
    let _ = writeln!(r, "conservation_error_veh: {:.3e}", record.conservation_error());
    let _ = writeln!(r, "last_max_change_veh_km: {:.3e}", record.final_max_change);

    let strict = DetectOptions::default();
    match detect_interior_states(&record, &strict) {
        Ok(cells) => {
            let _ = writeln!(r, "converged: yes");
            write_interior_cells(&mut r, &cells, &record);
        }
        Err(_) => {
            let _ = writeln!(r, "converged: no (threshold {:.0e} veh/km per step)", strict.steady_tol);
            let loose = DetectOptions { steady_tol: f64::INFINITY, ..strict };
            if let Ok(cells) = detect_interior_states(&record, &loose) {
                let _ = writeln!(r, "# provisional, from the unconverged final snapshot");
                write_interior_cells(&mut r, &cells, &record);
            }
        }
    }
    if let Ok(spec) = cfg.ring_spec() {
        if let Ok(pred) = predict_with_tolerance(&spec, cfg.boundary_tolerance()) {
            let snap = record.last();
            let devs: Vec<f64> = snap
                .rho
                .iter()
                .enumerate()
                .map(|(i, rho)| (rho - pred.density_at((i as f64 + 0.5) * record.dx)).abs())
                .collect();
            let tol = 1e-2 * spec.fd1.rho_jam().min(spec.fd2.rho_jam());
            let _ = writeln!(r, "predicted_scenario: {}", pred.scenario);
            let _ = writeln!(r, "max_deviation_from_prediction_veh_km: {}", f4(devs.iter().copied().fold(0.0, f64::max)));
            let _ = writeln!(r, "cells_off_prediction: {} (beyond {} veh/km)", devs.iter().filter(|&&d| d > tol).count(), f4(tol));
            if let Some(l2) = pred.l2 {
                let _ = writeln!(r, "predicted_shock_cell: {}", (l2 / record.dx).floor());
            }
        }
    }

    let (csv_path, report_path) = output_paths(cfg, out, "snapshots.csv", "simulate_report.txt");
    write_file(&csv_path, &snapshot_csv(&record))?;
    write_file(&report_path, &r)?;
    Ok(CommandOutput { report: r, report_path, csv_path })
}

fn write_interior_cells(r: &mut String, cells: &[crate::godunov::InteriorCell], record: &SimRecord) {
    let _ = writeln!(r, "interior_cells: {}", cells.len());
    for c in cells {
        let _ = writeln!(
            r,
            "interior_cell: {} x {} km, rho {} veh/km, q {} veh/s",
            c.cell,
            f4((c.cell as f64 + 0.5) * record.dx),
            f4(c.density),
            f4(c.flux)
        );
    }
}

fn unit_length_of(fd: &FundamentalDiagram) -> Option<f64> {
    match fd.family() {
        Family::KernerKonhauser { unit_length, .. } => Some(unit_length),
        _ => None,
    }
}

pub fn ring_report(spec: &RingSpec, pred: &RingPrediction) -> Result<String> {
    let (n_a, n_c) = spec.thresholds()?;
    let mut r = String::new();
    let _ = writeln!(r, "# ring-predict");
    let _ = writeln!(r, "length_km: {}", f4(spec.length));
    let _ = writeln!(r, "link1_length_km: {}", f4(spec.link1_length));
    let _ = writeln!(r, "capacity_1_veh_s: {}", f4(spec.fd1.capacity()));
    let _ = writeln!(r, "capacity_2_veh_s: {}", f4(spec.fd2.capacity()));
    let _ = writeln!(r, "vehicles_veh: {}", f4(spec.vehicles));
    let _ = writeln!(r, "threshold_a_veh: {}", f4(n_a));
    let _ = writeln!(r, "threshold_c_veh: {}", f4(n_c));
    let _ = writeln!(r, "scenario: {} ({})", pred.scenario, pred.scenario.description());
    let _ = writeln!(r, "q_veh_s: {}", f4(pred.q));
    if let Some(l2) = pred.l2 {
        let _ = writeln!(r, "l2_km: {}", f4(l2));
        if let Some(l) = unit_length_of(&spec.fd1) {
            let _ = writeln!(r, "l2_unit_lengths: {}", f4(l2 / l));
        }
    }
    for (i, s) in pred.segments.iter().enumerate() {
        let _ = writeln!(
            r,
            "segment: {i} from {} to {} km, link {}, rho {} veh/km",
            f4(s.start),
            f4(s.end),
            s.link,
            f4(s.rho)
        );
    }
    let _ = writeln!(r, "profile_vehicles_veh: {}", f4(pred.vehicles()));
    if pred.interior_sites.is_empty() {
        let _ = writeln!(r, "interior_sites: none");
    }
    for site in &pred.interior_sites {
        let side = match site.side {
            SiteSide::Minus => "minus",
            SiteSide::Plus => "plus",
        };
        let _ = writeln!(r, "interior_site: {} km {side}", f4(site.position));
    }
    let table = feasibility_table(spec);
    for (i, p1) in LinkPattern::ALL.iter().enumerate() {
        for (j, p2) in LinkPattern::ALL.iter().enumerate() {
            let verdict = match &table[i][j] {
                Feasibility::Feasible { scenario } => format!("feasible, scenario {scenario}"),
                Feasibility::Infeasible { reason } => format!("infeasible, {reason}"),
            };
            let _ = writeln!(r, "feasibility: link1 {} link2 {}: {verdict}", p1.label(), p2.label());
        }
    }
    Ok(r)
}

pub fn cmd_ring_predict(cfg: &ScenarioConfig, out: &Path) -> Result<CommandOutput> {
    let spec = cfg.ring_spec()?;
    let pred = predict_with_tolerance(&spec, cfg.boundary_tolerance())?;
    let report = ring_report(&spec, &pred)?;
    let mut csv = String::from(RING_HEADER);
    csv.push('\n');
    for (i, s) in pred.segments.iter().enumerate() {
        let fd = if s.link == 1 { &spec.fd1 } else { &spec.fd2 };
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{}",
            sig6(s.start),
            sig6(s.end),
            s.link,
            sig6(s.rho),
            sig6(fd.flux_unchecked(s.rho))
        );
    }
    let (csv_path, report_path) = output_paths(cfg, out, "ring_profile.csv", "ring_report.txt");
    write_file(&csv_path, &csv)?;
    write_file(&report_path, &report)?;
    Ok(CommandOutput { report, report_path, csv_path })
}
