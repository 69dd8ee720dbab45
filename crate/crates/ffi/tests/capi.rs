// SPDX-License-Identifier: MIT OR Apache-2.0

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use sepp_cpd_ffi::*;

fn last_error() -> String {
    let p = sepp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn series_round_trip_and_errors() {
    let counts: Vec<u32> = (0..12).collect();
    let mut series = ptr::null_mut();
    unsafe {
        assert_eq!(sepp_series_new(counts.as_ptr(), 3, 4, &mut series), SeppStatus::Ok);
        assert_eq!(sepp_series_dim(series), 3);
        assert_eq!(sepp_series_len(series), 4);
        let mut x = 0;
        assert_eq!(sepp_series_count(series, 2, 3, &mut x), SeppStatus::Ok);
        assert_eq!(x, 7);
        assert_eq!(sepp_series_count(series, 4, 1, &mut x), SeppStatus::InvalidInput);
        assert!(last_error().contains("out of range"));
        sepp_series_free(series);

        let mut bad = ptr::null_mut();
        assert_eq!(sepp_series_new(counts.as_ptr(), 12, 1, &mut bad), SeppStatus::InvalidInput);
        assert!(bad.is_null());
        assert_eq!(sepp_series_new(ptr::null(), 3, 4, &mut bad), SeppStatus::NullPointer);
        assert_eq!(sepp_series_dim(ptr::null()), 0);
        sepp_series_free(ptr::null_mut());
    }
}

#[test]
fn reads_csv_and_names_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    std::fs::write(&good, "t,x1,x2\n1,0,1\n2,3,4\n3,1,1\n").unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x1,x2\n1,0,1\n2,x,4\n").unwrap();
    let mut series = ptr::null_mut();
    unsafe {
        let path = CString::new(good.to_str().unwrap()).unwrap();
        assert_eq!(sepp_series_read_csv(path.as_ptr(), &mut series), SeppStatus::Ok);
        assert_eq!(sepp_series_len(series), 3);
        sepp_series_free(series);
        let path = CString::new(bad.to_str().unwrap()).unwrap();
        assert_eq!(sepp_series_read_csv(path.as_ptr(), &mut series), SeppStatus::Parse);
        assert!(last_error().contains("line 3"));
    }
}

#[test]
fn simulate_detect_and_score() {
    let mut series = ptr::null_mut();
    let mut model = SeppModel { intercept: 0.0, clip: 0.0 };
    let mut truth = [0usize; 4];
    let mut truth_len = 0;
    unsafe {
        let status = sepp_simulate_setting(
            b'a' as std::ffi::c_char,
            0.35,
            9,
            &mut series,
            &mut model,
            truth.as_mut_ptr(),
            truth.len(),
            &mut truth_len,
        );
        assert_eq!(status, SeppStatus::Ok);
        assert_eq!(&truth[..truth_len], &[151]);
        assert_eq!((model.intercept, model.clip), (0.5, 6.0));
        assert_eq!((sepp_series_len(series), sepp_series_dim(series)), (300, 30));

        let mut params = sepp_detect_params_default(300, 30);
        params.gamma = 1e12;
        let mut report = ptr::null_mut();
        assert_eq!(sepp_detect(series, model, &params, &mut report), SeppStatus::Ok);
        assert_eq!(sepp_report_num_change_points(report), 0);
        assert!(sepp_report_objective(report).is_finite());
        let json = sepp_report_to_json(report);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        sepp_string_free(json);
        assert!(text.contains("\"change_points\":[]"));
        sepp_report_free(report);

        params.lambda = -1.0;
        assert_eq!(sepp_detect(series, model, &params, &mut report), SeppStatus::InvalidInput);
        assert!(last_error().contains("lambda"));
        sepp_series_free(series);

        let status = sepp_simulate_setting(
            b'b' as std::ffi::c_char,
            301.0,
            1,
            &mut series,
            &mut model,
            ptr::null_mut(),
            0,
            &mut truth_len,
        );
        assert_eq!(status, SeppStatus::InvalidInput);

        let (mut value, mut flag) = (0u64, false);
        let a = [148usize, 290];
        let b = [151usize];
        assert_eq!(sepp_hausdorff(a.as_ptr(), 2, b.as_ptr(), 1, 300, &mut value, &mut flag), SeppStatus::Ok);
        assert_eq!((value, flag), (139, false));
        assert_eq!(sepp_hausdorff(ptr::null(), 0, b.as_ptr(), 1, 300, &mut value, &mut flag), SeppStatus::Ok);
        assert_eq!((value, flag), (300, true));
    }
}

#[test]
fn default_params_detect_small_series() {
    let counts: Vec<u32> = [0u32, 1, 0, 2, 1, 0, 5, 6, 4, 7, 5, 6]
        .iter()
        .flat_map(|&x| [x, x / 2])
        .collect();
    let mut series = ptr::null_mut();
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(sepp_series_new(counts.as_ptr(), 2, 12, &mut series), SeppStatus::Ok);
        let model = SeppModel { intercept: 0.5, clip: 4.0 };
        assert_eq!(sepp_detect(series, model, ptr::null(), &mut report), SeppStatus::Ok);
        let n = sepp_report_num_change_points(report);
        let mut buf = vec![0usize; n];
        assert_eq!(sepp_report_change_points(report, buf.as_mut_ptr(), n), n);
        assert!(buf.iter().all(|&p| (2..=12).contains(&p)));
        sepp_report_free(report);
        sepp_series_free(series);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/sepp_cpd.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "sepp_series_new",
        "sepp_series_read_csv",
        "sepp_simulate_setting",
        "sepp_detect",
        "sepp_report_change_points",
        "sepp_report_objective",
        "sepp_hausdorff",
        "sepp_last_error_message",
        "typedef struct SeppSeries SeppSeries",
        "SEPP_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "sepp_cpd.h"

int main(void) {
    SeppSeries *series = NULL;
    SeppModel model;
    size_t truth[2];
    size_t truth_len = 0;
    if (sepp_simulate_setting('b', 180, 3, &series, &model, truth, 2, &truth_len) != SEPP_STATUS_OK) {
        fprintf(stderr, "%s\n", sepp_last_error_message());
        return 1;
    }
    SeppDetectParams params = sepp_detect_params_default(sepp_series_len(series), sepp_series_dim(series));
    SeppReport *report = NULL;
    if (sepp_detect(series, model, &params, &report) != SEPP_STATUS_OK) {
        fprintf(stderr, "%s\n", sepp_last_error_message());
        return 1;
    }
    printf("%zu %zu %zu %zu\n", truth_len, truth[0], truth[1], sepp_report_num_change_points(report));
    sepp_report_free(report);
    sepp_series_free(series);
    if (sepp_series_new(NULL, 1, 1, &series) != SEPP_STATUS_NULL_POINTER) return 2;
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    // target/<profile>/deps/capi-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libsepp_cpd_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("2 61 121 "), "unexpected output {text}");
}
