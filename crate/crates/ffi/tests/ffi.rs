use rmab_ffi::*;
use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rmab_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn ranking(ids: &[u64]) -> *mut RmabRanking {
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { rmab_ranking_new(ids.as_ptr(), ids.len(), &mut r) },
        RmabStatus::Ok
    );
    r
}

#[test]
fn q_values_match_hand_solution() {
    let mut q = [0.0; 4];
    let st = unsafe { rmab_q_values(0.0, 0.0, 1.0, 1.0, 0.5, 0.0, q.as_mut_ptr()) };
    assert_eq!(st, RmabStatus::Ok);
    let expect = [0.5, 1.0, 1.5, 2.0];
    for (a, b) in q.iter().zip(expect) {
        assert!((a - b).abs() < 1e-5, "{q:?}");
    }
}

#[test]
fn myopic_index_is_zero() {
    let mut w = f64::NAN;
    let st = unsafe { rmab_whittle_index(0.2, 0.7, 0.6, 0.9, 0.0, 1, 0.0, &mut w) };
    assert_eq!(st, RmabStatus::Ok);
    assert_eq!(w, 0.0);
    let st = unsafe { rmab_whittle_index(0.2, 0.7, 0.6, 0.9, 1.0, 1, 0.0, &mut w) };
    assert_eq!(st, RmabStatus::InvalidArgument);
    assert!(last_error().contains("discount"), "{}", last_error());
}

#[test]
fn baseline_values() {
    let (mut e, mut b, mut valid, mut c) = (0.0, 0.0, false, 0.0);
    unsafe {
        assert_eq!(
            rmab_expected_random_error(3000, 200, &mut e),
            RmabStatus::Ok
        );
        assert_eq!(
            rmab_random_error_std_bound(3000, 200, &mut b, &mut valid),
            RmabStatus::Ok
        );
        assert_eq!(
            rmab_sigma_multiple(0.495, 0.0204, 0.436, &mut c),
            RmabStatus::Ok
        );
        assert_eq!(
            rmab_expected_random_error(3, 4, &mut e),
            RmabStatus::InvalidArgument
        );
    }
    assert!(valid);
    assert!((b - 0.0204).abs() < 1e-4);
    assert!((c - 2.892).abs() < 1e-3);

    let (mut mean, mut sd) = (0.0, 0.0);
    let st = unsafe { rmab_monte_carlo_random_error(100, 1, 20_000, 3, &mut mean, &mut sd) };
    assert_eq!(st, RmabStatus::Ok);
    assert!((mean - 0.495).abs() < 4.0 * sd / (20_000f64).sqrt());
}

#[test]
fn ranking_metrics_through_handles() {
    let p = ranking(&[1, 2, 3, 4]);
    let o = ranking(&[2, 1, 3, 4]);
    let (mut s, mut k, mut pos, mut len) = (0.0, 0.0, 0, 0);
    unsafe {
        assert_eq!(rmab_spearman_topk(p, o, 2, &mut s), RmabStatus::Ok);
        assert_eq!(rmab_kendall_topk(p, o, 2, &mut k), RmabStatus::Ok);
        assert_eq!(rmab_ranking_rank(o, 1, &mut pos), RmabStatus::Ok);
        assert_eq!(rmab_ranking_len(o, &mut len), RmabStatus::Ok);
        assert_eq!(
            rmab_ranking_rank(o, 9, &mut pos),
            RmabStatus::InvalidArgument
        );
        assert_eq!(
            rmab_spearman_topk(p, o, 5, &mut s),
            RmabStatus::InvalidArgument
        );
        rmab_ranking_free(p);
        rmab_ranking_free(o);
        rmab_ranking_free(ptr::null_mut());
    }
    assert_eq!(s, 0.25);
    assert!((k - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(len, 4);

    let ids = [10u64, 11, 12];
    let idx = [0.1, 0.5, 0.5];
    let mut r = ptr::null_mut();
    let mut order = [0u64; 3];
    unsafe {
        assert_eq!(
            rmab_ranking_from_indices(ids.as_ptr(), idx.as_ptr(), 3, &mut r),
            RmabStatus::Ok
        );
        assert_eq!(rmab_ranking_ids(r, order.as_mut_ptr(), 3), RmabStatus::Ok);
        rmab_ranking_free(r);
    }
    assert_eq!(order, [11, 12, 10]);

    let dup = [1u64, 1];
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { rmab_ranking_new(dup.as_ptr(), 2, &mut r) },
        RmabStatus::InvalidArgument
    );
    assert!(r.is_null());
}

#[test]
fn null_pointers_are_rejected() {
    unsafe {
        assert_eq!(
            rmab_ranking_new(ptr::null(), 3, &mut ptr::null_mut()),
            RmabStatus::NullPointer
        );
        assert_eq!(
            rmab_ranking_len(ptr::null(), &mut 0),
            RmabStatus::NullPointer
        );
        assert_eq!(
            rmab_study_step(ptr::null_mut(), &mut 0),
            RmabStatus::NullPointer
        );
        assert_eq!(
            rmab_q_values(0.5, 0.5, 0.5, 0.5, 0.5, 0.0, ptr::null_mut()),
            RmabStatus::NullPointer
        );
    }
}

#[test]
fn study_lifecycle() {
    let mut cohort = ptr::null_mut();
    let mut study = ptr::null_mut();
    let mut n = 0;
    unsafe {
        assert_eq!(
            rmab_cohort_synthetic(200, 0.1, 4, &mut cohort),
            RmabStatus::Ok
        );
        assert_eq!(rmab_cohort_len(cohort, &mut n), RmabStatus::Ok);
        assert_eq!(
            rmab_study_new(cohort, RmabPolicy::Whittle, 10, 0.5, 9, &mut study),
            RmabStatus::Ok
        );
        rmab_cohort_free(cohort);
        let mut engaging = 0;
        let mut buf = [0u64; 16];
        let mut len = 0;
        for _ in 0..3 {
            assert_eq!(rmab_study_step(study, &mut engaging), RmabStatus::Ok);
            assert!(engaging <= 200);
            assert_eq!(
                rmab_study_last_selection(study, buf.as_mut_ptr(), buf.len(), &mut len),
                RmabStatus::Ok
            );
            assert_eq!(len, 10);
        }
        let mut drops = 0;
        assert_eq!(rmab_study_drops(study, &mut drops), RmabStatus::Ok);
        rmab_study_free(study);
    }
    assert_eq!(n, 200);
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("rmab.h").exists());
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("librmab_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no cc or static library");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include "rmab.h"
#include <stdio.h>
int main(void) {
    double w = -1.0, e = 0.0;
    if (rmab_whittle_index(0.0, 0.0, 1.0, 1.0, 0.5, 1, 0.0, &w) != RMAB_STATUS_OK) return 1;
    if (rmab_expected_random_error(100, 1, &e) != RMAB_STATUS_OK) return 2;
    if (rmab_expected_random_error(1, 2, &e) != RMAB_STATUS_INVALID_ARGUMENT) return 3;
    if (rmab_last_error_message()[0] == '\0') return 4;
    printf("%.4f %.4f\n", w, e);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{:?}", out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.5000 0.4950");
    let _ = std::fs::remove_dir_all(&dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rmab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
