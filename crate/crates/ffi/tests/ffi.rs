use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ada2ms::optim::ada2ms_step;
use ada2ms::params::{init_state, HyperParams, ParamTensor};
use ada2ms_ffi::*;

struct Handle(*mut Ada2msOptimizer);

impl Handle {
    fn new(kind: Ada2msOptimizerKind, hp: Option<Ada2msHyperParams>) -> Self {
        let mut out = ptr::null_mut();
        let hp_ptr = hp.as_ref().map_or(ptr::null(), |h| h as *const _);
        let s = unsafe { ada2ms_optimizer_new(kind, hp_ptr, &mut out) };
        assert_eq!(s, Ada2msStatus::Ok);
        Handle(out)
    }

    fn add(&self, name: &str, shape: &[usize], values: &[f64]) -> Ada2msStatus {
        let name = CString::new(name).unwrap();
        unsafe {
            ada2ms_optimizer_add_tensor(
                self.0,
                name.as_ptr(),
                shape.as_ptr(),
                shape.len(),
                values.as_ptr(),
                values.len(),
            )
        }
    }

    fn step(&self, grads: &[f64], lr: f64, alpha: f64) -> Ada2msStatus {
        unsafe { ada2ms_optimizer_step(self.0, grads.as_ptr(), grads.len(), lr, alpha) }
    }

    fn values(&self, index: usize, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        let s = unsafe { ada2ms_optimizer_get_values(self.0, index, out.as_mut_ptr(), len) };
        assert_eq!(s, Ada2msStatus::Ok);
        out
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { ada2ms_optimizer_free(self.0) }
    }
}

fn last_error() -> String {
    let needed = unsafe { ada2ms_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; needed];
    unsafe { ada2ms_last_error_message(buf.as_mut_ptr() as *mut c_char, needed) };
    String::from_utf8(buf[..needed - 1].to_vec()).unwrap()
}

#[test]
fn steps_match_the_library() {
    let hp = Ada2msHyperParams {
        beta1: 0.9,
        beta2: 0.99,
        epsilon: 1e-12,
        lambda: 0.05,
    };
    let h = Handle::new(Ada2msOptimizerKind::Ada2ms, Some(hp));
    let w = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
    let b = [0.1, -0.2];
    assert_eq!(h.add("w", &[2, 3], &w), Ada2msStatus::Ok);
    assert_eq!(h.add("b", &[2], &b), Ada2msStatus::Ok);

    let mut params = vec![
        ParamTensor::new("w", vec![2, 3], w.to_vec()).unwrap(),
        ParamTensor::new("b", vec![2], b.to_vec()).unwrap(),
    ];
    let mut state = init_state(&params).unwrap();
    let hp: HyperParams = hp.into();
    for t in 1..=20 {
        let flat: Vec<f64> = (0..8)
            .map(|i| ((t * 7 + i * 3) % 11) as f64 / 5.0 - 1.0)
            .collect();
        let alpha = 1.0 - t as f64 / 20.0;
        assert_eq!(h.step(&flat, 1e-2, alpha), Ada2msStatus::Ok);
        let grads = vec![flat[..6].to_vec(), flat[6..].to_vec()];
        ada2ms_step(&mut params, &mut state, &grads, 1e-2, alpha, &hp).unwrap();
    }
    assert_eq!(h.values(0, 6), params[0].values());
    assert_eq!(h.values(1, 2), params[1].values());
    let mut t = 0;
    assert_eq!(
        unsafe { ada2ms_optimizer_step_count(h.0, &mut t) },
        Ada2msStatus::Ok
    );
    assert_eq!(t, 20);
}

#[test]
fn errors_are_reported_and_leave_state_unchanged() {
    let h = Handle::new(Ada2msOptimizerKind::Adamw, None);
    assert_eq!(h.add("x", &[2], &[1.0, 2.0]), Ada2msStatus::Ok);
    assert_eq!(h.add("x", &[1], &[1.0]), Ada2msStatus::InvalidArgument);
    assert!(last_error().contains("x"));
    assert_eq!(h.add("y", &[2], &[1.0]), Ada2msStatus::InvalidArgument);

    assert_eq!(h.step(&[1.0], 0.1, 1.0), Ada2msStatus::ShapeMismatch);
    assert_eq!(h.step(&[1.0, f64::NAN], 0.1, 1.0), Ada2msStatus::NonFinite);
    assert_eq!(h.values(0, 2), vec![1.0, 2.0]);
    assert_eq!(h.step(&[1.0, 1.0], 0.1, 1.0), Ada2msStatus::Ok);
    assert_eq!(h.add("z", &[1], &[0.0]), Ada2msStatus::StateError);

    let mut out = [0.0; 3];
    let s = unsafe { ada2ms_optimizer_get_values(h.0, 0, out.as_mut_ptr(), 3) };
    assert_eq!(s, Ada2msStatus::ShapeMismatch);
    let s = unsafe { ada2ms_optimizer_step(ptr::null_mut(), ptr::null(), 0, 0.1, 1.0) };
    assert_eq!(s, Ada2msStatus::NullPointer);

    let bad = Ada2msHyperParams {
        beta1: 1.5,
        beta2: 0.99,
        epsilon: 1e-12,
        lambda: 0.0,
    };
    let mut out = ptr::null_mut();
    let s = unsafe { ada2ms_optimizer_new(Ada2msOptimizerKind::Ada2ms, &bad, &mut out) };
    assert_eq!(s, Ada2msStatus::InvalidArgument);
    assert!(out.is_null());
}

#[test]
fn error_message_truncates_safely() {
    let h = Handle::new(Ada2msOptimizerKind::Sgdm, None);
    assert_eq!(h.step(&[1.0], 0.1, 1.0), Ada2msStatus::ShapeMismatch);
    let mut buf = [0x7f as c_char; 4];
    let needed = unsafe { ada2ms_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(needed > 4);
    assert_eq!(buf[3], 0);
}

#[test]
fn schedules_and_alignment() {
    let mut lr = 0.0;
    let s = unsafe { ada2ms_lr_at(Ada2msLrKind::Wsds, 1e-2, 1000, 50, &mut lr) };
    assert_eq!((s, lr), (Ada2msStatus::Ok, 1e-2));
    let s = unsafe { ada2ms_lr_at(Ada2msLrKind::Wsd, 1e-2, 1000, 1001, &mut lr) };
    assert_eq!(s, Ada2msStatus::InvalidArgument);

    let mut a = 0.0;
    for (t, want) in [(60, 1.0), (80, 0.5), (100, 0.0)] {
        assert_eq!(
            unsafe { ada2ms_alpha_at(100, 0.6, t, &mut a) },
            Ada2msStatus::Ok
        );
        assert_eq!(a, want);
    }

    let (mut eta, mut lambda) = (0.0, 0.0);
    let s = unsafe { ada2ms_align(5.34e-4, 0.01, 50.0, 1.0, &mut eta, &mut lambda) };
    assert_eq!(s, Ada2msStatus::Ok);
    assert!((eta * lambda - 5.34e-6).abs() <= 1e-15);
    let s = unsafe { ada2ms_align(5.34e-4, 0.01, 0.0, 1.0, &mut eta, &mut lambda) };
    assert_eq!(s, Ada2msStatus::InvalidArgument);

    let mut hp = Ada2msHyperParams {
        beta1: 0.0,
        beta2: 0.0,
        epsilon: 0.0,
        lambda: 1.0,
    };
    assert_eq!(
        unsafe { ada2ms_hyperparams_default(&mut hp) },
        Ada2msStatus::Ok
    );
    assert_eq!(
        (hp.beta1, hp.beta2, hp.epsilon, hp.lambda),
        (0.9, 0.99, 1e-12, 0.0)
    );
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/ada2ms.h")).unwrap();
    let source = std::fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.strip_prefix("pub unsafe extern \"C\" fn "))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 10);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    for ty in [
        "typedef struct Ada2msOptimizer Ada2msOptimizer;",
        "ADA2MS_STATUS_NON_FINITE = 4",
    ] {
        assert!(header.contains(ty), "{ty}");
    }
}

fn static_lib() -> PathBuf {
    // target/<profile>/deps/<test binary> -> target/<profile>/libada2ms_ffi.a
    let exe = std::env::current_exe().unwrap();
    exe.parent()
        .and_then(Path::parent)
        .unwrap()
        .join("libada2ms_ffi.a")
}

#[test]
fn c_program_links_against_static_library() {
    let lib = static_lib();
    assert!(lib.exists(), "{} not built", lib.display());
    let out_dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let exe = out_dir.join("ada2ms_smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let build = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "exit {:?}: {stdout}",
        run.status.code()
    );
    assert!(stdout.contains("status=3"), "{stdout}");
}
