use std::ffi::{CStr, CString};
use std::ptr;

use qpmap_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qpmap_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(qpmap_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_round_trips_through_text() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(qpmap_config_new(ptr::null(), &mut cfg), QpmapStatus::Ok);
        let key = CString::new("x_steps").unwrap();
        let val = CString::new("17").unwrap();
        assert_eq!(qpmap_config_set(cfg, key.as_ptr(), val.as_ptr()), QpmapStatus::Ok);

        let mut text = ptr::null_mut();
        assert_eq!(qpmap_config_render(cfg, &mut text), QpmapStatus::Ok);
        let rendered = CStr::from_ptr(text).to_str().unwrap().to_owned();
        assert!(rendered.contains("x_steps = 17") || rendered.contains("x_steps=17"), "{rendered}");

        let mut back = ptr::null_mut();
        assert_eq!(qpmap_config_parse(text, &mut back), QpmapStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(qpmap_config_render(back, &mut again), QpmapStatus::Ok);
        assert_eq!(CStr::from_ptr(again).to_str().unwrap(), rendered);

        qpmap_string_free(text);
        qpmap_string_free(again);
        qpmap_config_free(cfg);
        qpmap_config_free(back);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("no-such-window").unwrap();
        assert_eq!(qpmap_config_new(bad.as_ptr(), &mut cfg), QpmapStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("no-such-window"));

        assert_eq!(qpmap_config_new(ptr::null(), ptr::null_mut()), QpmapStatus::NullPointer);

        let text = CString::new("[grid]\nnope = 1\n").unwrap();
        assert_eq!(qpmap_config_parse(text.as_ptr(), &mut cfg), QpmapStatus::Config);

        let mut v = 0.0;
        assert_eq!(qpmap_first_bound(1.5, &mut v), QpmapStatus::Domain);
        assert_eq!(qpmap_first_bound(2.5, &mut v), QpmapStatus::Ok);
        assert!((v - 0.2).abs() < 1e-15);

        assert_eq!(qpmap_flm_lyapunov(5.0, 0.5, 0.0, 0.5, 100, &mut v), QpmapStatus::Diverged);
        let mut cell = std::mem::zeroed::<QpmapCell>();
        assert_eq!(qpmap_flm_classify(f64::NAN, 0.0, &mut cell), QpmapStatus::InvalidArgument);

        // null handles are accepted by the destructors
        qpmap_config_free(ptr::null_mut());
        qpmap_grid_free(ptr::null_mut());
        qpmap_string_free(ptr::null_mut());
    }
}

#[test]
fn logistic_lyapunov_through_the_abi() {
    // unforced logistic map: Λ = ln|2 − α| on the stable fixed point
    let mut v = 0.0;
    let s = unsafe { qpmap_flm_lyapunov(2.5, 0.0, 0.0, 0.3, 10_000, &mut v) };
    assert_eq!(s, QpmapStatus::Ok);
    assert!((v - 0.5f64.ln()).abs() < 1e-3, "{v}");
}

#[test]
fn scan_grid_cells_match_direct_classification() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(qpmap_config_new(ptr::null(), &mut cfg), QpmapStatus::Ok);
        for (k, v) in [("x_min", "2.4"), ("x_max", "3.5"), ("x_steps", "3"), ("y_min", "0"), ("y_max", "0.01"), ("y_steps", "2")] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(qpmap_config_set(cfg, k.as_ptr(), v.as_ptr()), QpmapStatus::Ok);
        }
        let mut grid = ptr::null_mut();
        assert_eq!(qpmap_scan_run(cfg, &mut grid), QpmapStatus::Ok);
        let (mut nx, mut ny, mut errored) = (0, 0, 99);
        assert_eq!(qpmap_grid_shape(grid, &mut nx, &mut ny, &mut errored), QpmapStatus::Ok);
        assert_eq!((nx, ny, errored), (3, 2, 0));

        let mut cell = std::mem::zeroed::<QpmapCell>();
        assert_eq!(qpmap_grid_cell(grid, 3, 0, &mut cell), QpmapStatus::InvalidArgument);
        assert_eq!(qpmap_grid_cell(grid, 0, 1, &mut cell), QpmapStatus::Ok);
        assert_eq!((cell.x, cell.y), (2.4, 0.01));
        assert_eq!(cell.label, QpmapClass::ReducibleCurve);
        assert!(cell.lyapunov < 0.0);
        assert_eq!(cell.period, 1);

        let mut direct = std::mem::zeroed::<QpmapCell>();
        assert_eq!(qpmap_flm_classify(2.4, 0.01, &mut direct), QpmapStatus::Ok);
        assert_eq!(direct, cell);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/grid.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        assert_eq!(qpmap_grid_write_csv(grid, cpath.as_ptr()), QpmapStatus::Ok);
        let csv = std::fs::read_to_string(&path).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("alpha,epsilon,class"));

        qpmap_grid_free(grid);
        qpmap_config_free(cfg);
    }
}
