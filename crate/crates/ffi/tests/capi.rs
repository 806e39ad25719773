use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use kinwave_ffi::*;

fn kk(lanes: f64) -> *mut KwDiagram {
    let mut d = ptr::null_mut();
    let s = unsafe { kw_diagram_kerner_konhauser(lanes, 180.0, 5.0, 0.028, &mut d) };
    assert_eq!(s, KwStatus::Ok);
    d
}

fn last_error() -> String {
    let p = kw_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn diagram_capacity_and_errors() {
    let d = kk(1.0);
    let (mut c, mut rc, mut rj) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(kw_diagram_info(d, &mut c, &mut rc, &mut rj), KwStatus::Ok);
        assert!((c - 0.7091).abs() < 5e-4);
        let mut q = 0.0;
        assert_eq!(kw_diagram_flux(d, rj + 1.0, &mut q), KwStatus::Domain);
        assert!(last_error().contains("density"), "{}", last_error());
        assert_eq!(kw_diagram_flux(ptr::null(), 1.0, &mut q), KwStatus::NullPointer);
        assert_eq!(kw_diagram_flux(d, 1.0, ptr::null_mut()), KwStatus::NullPointer);
        let mut bad = ptr::null_mut();
        assert_eq!(kw_diagram_greenshields(-1.0, 10.0, &mut bad), KwStatus::Domain);
        assert!(bad.is_null());
        kw_diagram_free(d);
        kw_diagram_free(ptr::null_mut());
    }
}

#[test]
fn riemann_through_the_abi() {
    let mut d = ptr::null_mut();
    let mut sol = std::mem::MaybeUninit::<KwRiemannSolution>::uninit();
    unsafe {
        assert_eq!(kw_diagram_greenshields(1.0, 4.0, &mut d), KwStatus::Ok);
        let u1 = KwState { demand: 1.0, supply: 0.6 };
        let u2 = KwState { demand: 0.9, supply: 1.0 };
        assert_eq!(kw_riemann_solve(d, d, u1, u2, sol.as_mut_ptr()), KwStatus::Ok);
        let sol = sol.assume_init();
        assert_eq!(sol.boundary_flux, 1.0);
        assert_eq!((sol.wave_up.kind, sol.wave_up.direction), (2, -1));
        assert_eq!((sol.wave_down.kind, sol.wave_down.direction), (2, 1));

        let mut out = std::mem::MaybeUninit::<KwRiemannSolution>::uninit();
        let broken = KwState { demand: 0.5, supply: 0.5 };
        assert_eq!(kw_riemann_solve(d, d, broken, u2, out.as_mut_ptr()), KwStatus::State);
        kw_diagram_free(d);
    }
}

#[test]
fn ring_grid_conserves_vehicles() {
    let (one, two) = (kk(1.0), kk(2.0));
    let fds = [one as *const KwDiagram, two as *const KwDiagram];
    let map = [0usize, 0, 1, 1, 1, 1, 1, 1];
    let rho = [20.0, 50.0, 40.0, 80.0, 200.0, 300.0, 10.0, 0.0];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(kw_grid_new_ring(fds.as_ptr(), 2, map.as_ptr(), rho.as_ptr(), 8, 0.028, &mut g), KwStatus::Ok);
        let (mut n0, mut n1, mut change) = (0.0, 0.0, 0.0);
        kw_grid_vehicles(g, &mut n0);
        assert_eq!(kw_grid_step(g, 0.8, 1000, false, &mut change), KwStatus::Ok);
        kw_grid_vehicles(g, &mut n1);
        assert!((n1 - n0).abs() < 1e-12 * n0);
        let mut t = 0.0;
        kw_grid_time(g, &mut t);
        assert!((t - 800.0).abs() < 1e-9);
        assert_eq!(kw_grid_step(g, 5.0, 1, true, &mut change), KwStatus::Config);
        let mut buf = [0.0; 8];
        assert_eq!(kw_grid_densities(g, buf.as_mut_ptr(), 8), KwStatus::Ok);
        assert_eq!(kw_grid_densities(g, buf.as_mut_ptr(), 3), KwStatus::Domain);
        kw_grid_free(g);
        kw_diagram_free(one);
        kw_diagram_free(two);
    }
}

#[test]
fn scenario_parse_reports_config_errors() {
    let text = c"[numerics]\ndx = \"3 parsecs\"\n";
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(kw_scenario_parse(text.as_ptr(), &mut s), KwStatus::Config);
        assert!(last_error().contains("line 2"), "{}", last_error());
        let ok = c"[diagram.g]\nfamily = \"greenshields\"\nv_free = \"1 km/s\"\nrho_jam = \"4 veh/km\"\n[road]\ntopology = \"ring\"\n[[road.segment]]\nlength = \"1 km\"\ndiagram = \"g\"\n[initial]\nkind = \"uniform\"\nrho = \"1 veh/km\"\n[numerics]\ndx = \"100 m\"\ndt = \"0.05 s\"\nduration = \"1 s\"\n";
        assert_eq!(kw_scenario_parse(ok.as_ptr(), &mut s), KwStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(kw_grid_from_scenario(s, &mut g), KwStatus::Ok);
        let mut n = 0;
        kw_grid_len(g, &mut n);
        assert_eq!(n, 10);
        kw_grid_free(g);
        kw_scenario_free(s);
    }
}

#[test]
fn ring_prediction_matches_core() {
    let (one, two) = (kk(1.0), kk(2.0));
    let mut p = std::mem::MaybeUninit::<KwRingPrediction>::uninit();
    unsafe {
        assert_eq!(kw_ring_predict(16.8, 2.8, one, two, 858.3893, p.as_mut_ptr()), KwStatus::Ok);
        let p = p.assume_init();
        assert_eq!(p.scenario as u8, b'b');
        assert!((p.l2 / 0.028 - 449.2561).abs() < 0.5);
        kw_diagram_free(one);
        kw_diagram_free(two);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kinwave.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in ["kw_diagram_greenshields", "kw_riemann_solve", "kw_grid_step", "kw_last_error_message", "KW_STATUS_PANIC"] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

// Builds and runs tests/c/smoke.c against the static library when a C
// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let profile_dir = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = profile_dir.join("libkinwave_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} not built", lib.display());
        return;
    }
    let exe = tmp.join("kinwave_smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("scenario b"), "{stdout}");
}
