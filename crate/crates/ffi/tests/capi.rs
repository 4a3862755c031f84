use std::collections::BTreeMap;
use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use siseg::experiments::{generate_signal_image, trial_rng};
use siseg::hypothesis::NoiseModel;
use siseg::inference::{naive_p, selective_p_pipeline, PipelineOptions};
use siseg::network::{forward, init, save_network};
use siseg_ffi::*;

fn load(path: &Path) -> *mut SisegNetwork {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { siseg_network_load(c.as_ptr(), 0, &mut net) }, SisegStatus::Ok);
    assert!(!net.is_null());
    net
}

fn last_error() -> String {
    let p = siseg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn load_segment_and_infer() {
    let dir = tempfile::tempdir().unwrap();
    let spec = init::cnn4(8, 8, init::REFERENCE_CNN_SEED).unwrap();
    let manifest = save_network(&spec, dir.path(), "network", BTreeMap::new()).unwrap();
    let net = load(&manifest);

    let (mut h, mut w) = (0, 0);
    assert_eq!(unsafe { siseg_network_shape(net, &mut h, &mut w) }, SisegStatus::Ok);
    assert_eq!((h, w), (8, 8));

    let (image, _) = generate_signal_image(8, 8, 3.0, &mut trial_rng(3, 0)).unwrap();
    let values = image.values();
    let mut labels = vec![9u8; 64];
    assert_eq!(
        unsafe { siseg_segment(net, values.as_ptr(), values.len(), labels.as_mut_ptr()) },
        SisegStatus::Ok
    );
    let mask = forward(&spec, &image).unwrap();
    let expected: Vec<u8> = mask.labels().iter().map(|&l| l as u8).collect();
    assert_eq!(labels, expected);

    let options = SisegInferOptions {
        sigma: 1.0,
        range_sigmas: 20.0,
        over_conditioned: 1,
    };
    let mut out = std::mem::MaybeUninit::<SisegInferResult>::uninit();
    assert_eq!(
        unsafe { siseg_infer(net, values.as_ptr(), values.len(), &options, out.as_mut_ptr()) },
        SisegStatus::Ok
    );
    let out = unsafe { out.assume_init() };
    let direct = selective_p_pipeline(
        &spec,
        &image,
        &NoiseModel::isotropic(1.0).unwrap(),
        PipelineOptions {
            over_conditioned: true,
            ..Default::default()
        },
    )
    .unwrap();
    let r = direct.result().unwrap();
    assert_eq!(out.detected, 1);
    assert_eq!(out.object_pixels, r.object_pixels);
    assert_eq!(out.p_selective, r.p_selective);
    assert_eq!(out.p_naive, r.p_naive);
    assert_eq!(out.p_oc, r.p_oc.unwrap());
    assert_eq!(out.region_count, r.region_count);
    assert_eq!(out.truncation_intervals, r.truncation.intervals().len());

    assert_eq!(
        unsafe { siseg_segment(net, values.as_ptr(), 10, labels.as_mut_ptr()) },
        SisegStatus::InvalidArgument
    );
    assert!(last_error().contains("expected 64 values"));

    unsafe { siseg_network_free(net) };
    unsafe { siseg_network_free(ptr::null_mut()) };
}

#[test]
fn p_value_functions() {
    let mut p = 0.0;
    assert_eq!(unsafe { siseg_naive_p(1.5, 2.0, &mut p) }, SisegStatus::Ok);
    assert_eq!(p, naive_p(1.5, 2.0));
    assert!(siseg_last_error().is_null());

    let bounds = [0.0, f64::INFINITY];
    assert_eq!(unsafe { siseg_truncated_p(1.959964, 1.0, bounds.as_ptr(), 1, &mut p) }, SisegStatus::Ok);
    assert!((p - 0.05).abs() < 1e-4);

    let overlapping = [0.0, 2.0, 1.0, 3.0];
    let status = unsafe { siseg_truncated_p(0.5, 1.0, overlapping.as_ptr(), 2, &mut p) };
    assert_ne!(status, SisegStatus::Ok);
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { siseg_naive_p(1.0, -1.0, &mut p) }, SisegStatus::InvalidArgument);
    assert_eq!(unsafe { siseg_naive_p(1.0, 1.0, ptr::null_mut()) }, SisegStatus::NullPointer);
    assert_eq!(last_error(), "out is null");
}

#[test]
fn load_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = ptr::null_mut();
    let missing = CString::new(dir.path().join("none.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { siseg_network_load(missing.as_ptr(), 0, &mut net) }, SisegStatus::Io);
    assert!(net.is_null());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "format = \"other\"\ninput_height = 2\ninput_width = 2\nlayers = []\n").unwrap();
    let bad = CString::new(bad.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { siseg_network_load(bad.as_ptr(), 0, &mut net) }, SisegStatus::Format);
    assert_eq!(unsafe { siseg_network_load(ptr::null(), 0, &mut net) }, SisegStatus::NullPointer);

    let version = unsafe { CStr::from_ptr(siseg_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/siseg.h")).unwrap();
    for name in [
        "siseg_last_error",
        "siseg_version",
        "siseg_network_load",
        "siseg_network_free",
        "siseg_network_shape",
        "siseg_segment",
        "siseg_infer",
        "siseg_naive_p",
        "siseg_truncated_p",
        "SISEG_STATUS_PATH_EXPLOSION",
        "typedef struct SisegNetwork SisegNetwork",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
