use std::ffi::{CStr, CString};
use std::ptr;

use freeinit_core::model::{save_model, NetConfig, Network};
use freeinit_core::sampler::{freeinit_sample, FreeInitConfig};
use freeinit_core::schedule::ScheduleSpec;
use freeinit_core::{NoiseSchedule, RngState};
use freeinit_ffi::*;

fn ok(status: FiStatus) {
    if status != FiStatus::Ok {
        let msg = unsafe { CStr::from_ptr(fi_last_error()) };
        panic!("{status:?}: {}", msg.to_string_lossy());
    }
}

fn data(t: *const FiTensor) -> Vec<f32> {
    let mut dims = [0usize; 4];
    unsafe {
        ok(fi_tensor_shape(t, dims.as_mut_ptr()));
        let mut buf = vec![0f32; dims.iter().product()];
        ok(fi_tensor_copy_data(t, buf.as_mut_ptr(), buf.len()));
        buf
    }
}

fn gaussian(dims: [usize; 4], seed: u64, stream: &str) -> *mut FiTensor {
    let name = CString::new(stream).unwrap();
    let mut t = ptr::null_mut();
    unsafe { ok(fi_tensor_gaussian(dims[0], dims[1], dims[2], dims[3], seed, name.as_ptr(), &mut t)) };
    t
}

fn small_net() -> Network<f32> {
    let cfg = NetConfig {
        frames: 4,
        channels: 1,
        height: 8,
        width: 8,
        hidden: 4,
        res_blocks: 1,
        time_features: 8,
        classes: 2,
        timesteps: 1000,
    };
    let mut net = Network::new(cfg, 3).unwrap();
    // the output head starts at zero; give it some signal
    let mut rng = RngState::new(11);
    for p in net.params_mut() {
        *p += 0.05 * rng.next_normal() as f32;
    }
    net
}

#[test]
fn tensor_roundtrip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("x.fin").to_str().unwrap()).unwrap();
    let t = gaussian([3, 2, 4, 5], 7, "eps");
    let mut back = ptr::null_mut();
    unsafe {
        ok(fi_tensor_save(t, path.as_ptr()));
        ok(fi_tensor_load(path.as_ptr(), &mut back));
    }
    assert_eq!(data(t), data(back));
    let expected = freeinit_core::tensorio::gaussian_tensor(
        freeinit_core::Shape::new(3, 2, 4, 5).unwrap(),
        &mut RngState::substream(7, "eps"),
    )
    .unwrap();
    assert_eq!(data(t), expected.data());
    unsafe {
        fi_tensor_free(t);
        fi_tensor_free(back);
    }
}

#[test]
fn from_data_checks_length() {
    let dims = [1usize, 1, 2, 2];
    let values = [1f32, 2.0, 3.0];
    let mut t = ptr::null_mut();
    let status = unsafe { fi_tensor_from_data(dims.as_ptr(), values.as_ptr(), values.len(), &mut t) };
    assert_eq!(status, FiStatus::ShapeMismatch);
    assert!(t.is_null());
    let msg = unsafe { CStr::from_ptr(fi_last_error()) }.to_string_lossy().into_owned();
    assert!(msg.contains("length"), "{msg}");
}

#[test]
fn null_handles_are_rejected() {
    let mut out = 0.0;
    assert_eq!(unsafe { fi_temporal_consistency(ptr::null(), &mut out) }, FiStatus::NullPointer);
    assert_eq!(unsafe { fi_schedule_sd(ptr::null_mut()) }, FiStatus::NullPointer);
    unsafe {
        fi_tensor_free(ptr::null_mut());
        fi_model_free(ptr::null_mut());
    }
}

#[test]
fn copy_data_reports_small_buffer() {
    let t = gaussian([2, 1, 2, 2], 0, "eps");
    let mut buf = [0f32; 3];
    assert_eq!(unsafe { fi_tensor_copy_data(t, buf.as_mut_ptr(), 3) }, FiStatus::BufferTooSmall);
    unsafe { fi_tensor_free(t) };
}

#[test]
fn schedule_and_q_sample() {
    let mut s = ptr::null_mut();
    let mut abar = 0.0;
    unsafe {
        ok(fi_schedule_new(FiScheduleKind::Linear, 1000, 1e-4, 0.02, &mut s));
        ok(fi_schedule_alpha_bar(s, 1000, &mut abar));
    }
    assert!((abar - 4.035_829_765_375_683_3e-5).abs() / abar < 1e-9);
    assert_eq!(unsafe { fi_schedule_alpha_bar(s, 1001, &mut abar) }, FiStatus::InvalidArgument);

    let z0 = gaussian([2, 1, 4, 4], 1, "z0");
    let eps = gaussian([2, 1, 4, 4], 1, "eps");
    let mut zt = ptr::null_mut();
    unsafe { ok(fi_q_sample(s, z0, 500, eps, &mut zt)) };
    let a = NoiseSchedule::from_spec(ScheduleSpec::LINEAR).unwrap().alpha_bar(500).unwrap();
    let (x, e, z) = (data(z0), data(eps), data(zt));
    for i in 0..z.len() {
        let want = a.sqrt() * x[i] as f64 + (1.0 - a).sqrt() * e[i] as f64;
        assert!((z[i] as f64 - want).abs() < 1e-5);
    }
    unsafe {
        fi_schedule_free(s);
        fi_tensor_free(z0);
        fi_tensor_free(eps);
        fi_tensor_free(zt);
    }
}

#[test]
fn band_split_adds_up() {
    let x = gaussian([4, 1, 8, 8], 2, "x");
    let eta = gaussian([4, 1, 8, 8], 2, "eta");
    let mut m = ptr::null_mut();
    let (mut lo, mut hi, mut mixed, mut same) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        ok(fi_mask_new(FiFilterFamily::Gaussian, 0.25, 4, 4, 8, 8, &mut m));
        ok(fi_low_pass(x, m, &mut lo));
        ok(fi_high_pass(x, m, &mut hi));
        ok(fi_reinitialize_noise(x, eta, m, &mut mixed));
        ok(fi_reinitialize_noise(x, x, m, &mut same));
    }
    let (xv, l, h, s) = (data(x), data(lo), data(hi), data(same));
    for i in 0..xv.len() {
        assert!((l[i] + h[i] - xv[i]).abs() < 1e-5);
        assert!((s[i] - xv[i]).abs() < 1e-5);
    }
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fi_mask_new(FiFilterFamily::Ideal, 0.0, 1, 4, 8, 8, &mut bad) }, FiStatus::InvalidArgument);
    let other = gaussian([2, 1, 8, 8], 0, "x");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { fi_low_pass(other, m, &mut out) }, FiStatus::ShapeMismatch);
    unsafe {
        for t in [x, eta, lo, hi, mixed, same, other] {
            fi_tensor_free(t);
        }
        fi_mask_free(m);
    }
}

#[test]
fn consistency_of_static_video_is_one() {
    let dims = [3usize, 1, 2, 2];
    let frame = [0.0f32, 1.0, 2.0, 4.0];
    let values: Vec<f32> = frame.iter().copied().cycle().take(12).collect();
    let mut t = ptr::null_mut();
    let mut score = 0.0;
    unsafe {
        ok(fi_tensor_from_data(dims.as_ptr(), values.as_ptr(), values.len(), &mut t));
        ok(fi_temporal_consistency(t, &mut score));
        fi_tensor_free(t);
    }
    assert!((score - 1.0).abs() < 1e-12);
}

#[test]
fn coarse_to_fine_budgets() {
    let mut buf = [0usize; 4];
    unsafe { ok(fi_coarse_to_fine_steps(50, 4, buf.as_mut_ptr(), 4)) };
    assert_eq!(buf, [13, 25, 38, 50]);
    assert_eq!(unsafe { fi_coarse_to_fine_steps(50, 4, buf.as_mut_ptr(), 3) }, FiStatus::BufferTooSmall);
    assert_eq!(unsafe { fi_coarse_to_fine_steps(3, 4, buf.as_mut_ptr(), 4) }, FiStatus::InvalidArgument);
}

#[test]
fn sampling_matches_core() {
    let dir = tempfile::tempdir().unwrap();
    let net = small_net();
    save_model(&net, ScheduleSpec::SD, 3, None, dir.path()).unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    let mut dims = [0usize; 4];
    unsafe {
        ok(fi_model_load(path.as_ptr(), &mut model));
        ok(fi_model_shape(model, dims.as_mut_ptr()));
    }
    assert_eq!(dims, [4, 1, 8, 8]);

    let mut params = fi_sample_params_default();
    params.iterations = 2;
    params.ddim_steps = 5;
    params.seed = 9;
    params.class_label = 1;
    let mut out = ptr::null_mut();
    unsafe { ok(fi_freeinit_sample(model, &params, &mut out)) };

    let config = FreeInitConfig {
        iterations: 2,
        ddim_steps: 5,
        seed: 9,
        ..FreeInitConfig::default()
    };
    let want = freeinit_sample(&net, &config, Some(1), &NoiseSchedule::sd()).unwrap();
    assert_eq!(data(out), want.final_z0.data());

    params.class_label = 2;
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fi_freeinit_sample(model, &params, &mut bad) }, FiStatus::InvalidArgument);
    unsafe {
        fi_tensor_free(out);
        fi_model_free(model);
    }
}

#[test]
fn missing_model_dir() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { fi_model_load(path.as_ptr(), &mut model) }, FiStatus::MissingArtifact);
    let name = unsafe { CStr::from_ptr(fi_status_name(FiStatus::MissingArtifact)) };
    assert_eq!(name.to_str().unwrap(), "missing artifact");
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/freeinit.h");
    for name in [
        "fi_last_error",
        "fi_tensor_gaussian",
        "fi_tensor_load",
        "fi_tensor_save",
        "fi_tensor_free",
        "fi_schedule_sd",
        "fi_q_sample",
        "fi_mask_new",
        "fi_reinitialize_noise",
        "fi_model_load",
        "fi_freeinit_sample",
        "fi_coarse_to_fine_steps",
        "typedef struct FiTensor FiTensor",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/freeinit.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
