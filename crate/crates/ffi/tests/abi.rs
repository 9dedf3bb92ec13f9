use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use devilstick_ffi::*;

fn model() -> *mut DsModel {
    let mut p = DsParams::default();
    let mut s = DsSpec::default();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(ds_params_uniform_rod(0.1, 0.5, &mut p), DsStatus::Ok);
        assert_eq!(ds_spec_symmetric(PI / 6.0, 0.6131, 3.0, 0.5, &mut s), DsStatus::Ok);
        assert_eq!(ds_model_new(&p, &s, &mut m), DsStatus::Ok);
    }
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { ds_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

const X0: DsState = DsState {
    hx: 0.7,
    hy: 2.5,
    theta: PI / 6.0,
    vx: 0.9,
    vy: -2.0,
    omega: -5.7,
};

#[test]
fn invalid_model_is_rejected_with_message() {
    let p = DsParams {
        m: -1.0,
        ell: 0.5,
        j: 1.0,
        g: 9.81,
    };
    let mut s = DsSpec::default();
    let mut m = ptr::null_mut();
    unsafe {
        ds_spec_symmetric(PI / 6.0, 0.6131, 3.0, 0.5, &mut s);
        assert_eq!(ds_model_new(&p, &s, &mut m), DsStatus::InvalidArgument);
    }
    assert!(m.is_null());
    assert!(last_error().contains('m'), "{}", last_error());
}

#[test]
fn null_pointers_are_reported() {
    let mut cmd = DsCommand::default();
    let st = unsafe { ds_dvhc_control(ptr::null(), &X0, 1, true, &mut cmd) };
    assert_eq!(st, DsStatus::NullPointer);
    assert!(last_error().contains("model"));
    unsafe {
        ds_model_free(ptr::null_mut());
        ds_episode_free(ptr::null_mut());
        ds_stabilizer_free(ptr::null_mut());
        assert_eq!(ds_episode_len(ptr::null()), 0);
    }
}

#[test]
fn control_then_step_lands_on_schedule() {
    let m = model();
    let mut cmd = DsCommand::default();
    let mut next = DsState::default();
    let mut via_advance = DsState::default();
    let mut delta = 0.0;
    let p = {
        let mut p = DsParams::default();
        unsafe { ds_params_uniform_rod(0.1, 0.5, &mut p) };
        p
    };
    unsafe {
        assert_eq!(ds_dvhc_control(m, &X0, 1, true, &mut cmd), DsStatus::Ok);
        assert_eq!(ds_hybrid_step(&p, &X0, &cmd, &mut next), DsStatus::Ok);
        assert_eq!(
            ds_advance(m, &X0, 1, cmd.impulse, cmd.offset, &mut via_advance, &mut delta),
            DsStatus::Ok
        );
        assert_eq!(ds_dvhc_control(m, &X0, 0, true, &mut cmd), DsStatus::InvalidArgument);
        ds_model_free(m);
    }
    assert!((next.theta - 5.0 * PI / 6.0).abs() < 1e-9);
    assert!((via_advance.hx - next.hx).abs() < 1e-12);
    assert!(delta > 0.0);
}

#[test]
fn wrong_rotation_sign_has_its_own_code() {
    let m = model();
    let x = DsState { omega: 5.7, ..X0 };
    let mut cmd = DsCommand::default();
    let st = unsafe { ds_dvhc_control(m, &x, 1, true, &mut cmd) };
    unsafe { ds_model_free(m) };
    assert_eq!(st, DsStatus::WrongRotationSign);
}

#[test]
fn orbit_and_stabilizer() {
    let m = model();
    let mut orbit = DsOrbit::default();
    let mut stab = ptr::null_mut();
    let (mut a, mut b, mut k, mut z) = ([0.0; 25], [0.0; 10], [0.0; 10], [0.0; 5]);
    let mut rho = 0.0;
    unsafe {
        assert_eq!(ds_design_orbit(m, f64::NAN, &mut orbit), DsStatus::Ok);
        assert_eq!(ds_design_orbit(m, 1.0, &mut orbit), DsStatus::NoOrbit);
        assert_eq!(ds_design_orbit(m, -4.1888, &mut orbit), DsStatus::Ok);
        assert_eq!(ds_stabilizer_new(m, -4.1888, true, &mut stab), DsStatus::Ok);
        assert_eq!(
            ds_stabilizer_matrices(stab, a.as_mut_ptr(), b.as_mut_ptr(), k.as_mut_ptr(), z.as_mut_ptr()),
            DsStatus::Ok
        );
        assert_eq!(ds_stabilizer_spectral_radius(stab, &mut rho), DsStatus::Ok);
    }
    assert!((orbit.delta_odd - 0.5).abs() < 1e-4);
    assert!((orbit.r_star - 0.0308).abs() < 1e-4);
    assert!((a[0] - 0.25).abs() < 1e-6 && (a[6] - 0.25).abs() < 1e-6);
    assert!((b[2] - 4.2847).abs() < 2e-2);
    assert!((k[0] - 0.0961).abs() < 5e-3);
    assert!((z[1] - 3.0).abs() < 1e-3);
    assert!(rho < 1.0);

    let mut ep = ptr::null_mut();
    let mut rec = DsStepRecord::default();
    unsafe {
        assert_eq!(ds_episode_run(m, &X0, 20, stab, &mut ep), DsStatus::Ok);
        assert_eq!(ds_episode_status(ep), DsStatus::Ok);
        assert_eq!(ds_episode_len(ep), 20);
        assert_eq!(ds_episode_record(ep, 18, &mut rec), DsStatus::Ok);
        assert_eq!(ds_episode_record(ep, 20, &mut rec), DsStatus::OutOfRange);
        assert_eq!(ds_episode_record(ep, 18, &mut rec), DsStatus::Ok);
        ds_episode_free(ep);
        ds_stabilizer_free(stab);
        ds_model_free(m);
    }
    assert_eq!(rec.k, 19);
    assert!((rec.omega + 4.1888).abs() < 1e-3);
}

#[test]
fn failed_episode_reports_cause() {
    let m = model();
    let x = DsState { theta: 1.0, ..X0 };
    let mut ep = ptr::null_mut();
    unsafe {
        assert_eq!(ds_episode_run(m, &x, 5, ptr::null(), &mut ep), DsStatus::Ok);
        assert_eq!(ds_episode_status(ep), DsStatus::OffSchedule);
        assert_eq!(ds_episode_len(ep), 0);
        ds_episode_free(ep);
        ds_model_free(m);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/devilstick.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        }
    }
}

/// Compiles a small C program against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = dir.join("../../target/debug");
    let lib = target.join("libdevilstick_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout)
    );
}
