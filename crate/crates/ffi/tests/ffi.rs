use std::ffi::{CStr, CString};
use std::ptr;

use marginbn_ffi::*;

fn last_error() -> String {
    let p = mbn_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Class, a noisy copy of it, and a feature that copies the first one.
fn toy_values() -> (Vec<usize>, Vec<u32>) {
    let mut values = Vec::new();
    for m in 0..30u32 {
        let c = m % 2;
        let a = if m % 7 == 0 { 1 - c } else { c };
        let b = if m % 5 == 0 { 1 - a } else { a };
        values.extend([c, a, b]);
    }
    (vec![2, 2, 2], values)
}

fn toy_dataset() -> *mut MbnDataset {
    let (cards, values) = toy_values();
    let mut ds = ptr::null_mut();
    let status = unsafe { mbn_dataset_from_values(cards.as_ptr(), 3, values.as_ptr(), 30, &mut ds) };
    assert_eq!(status, MbnStatus::Ok);
    ds
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mbn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn learn_predict_and_round_trip() {
    let ds = toy_dataset();
    unsafe {
        assert_eq!(mbn_dataset_num_vars(ds), 3);
        assert_eq!(mbn_dataset_num_samples(ds), 30);

        let mut opts = std::mem::zeroed::<MbnLearnOptions>();
        assert_eq!(mbn_learn_options_default(&mut opts), MbnStatus::Ok);
        assert_eq!(opts.score, MBN_SCORE_SM);
        assert_eq!(opts.max_parents, 2);
        assert!((opts.gamma - 9f64.ln()).abs() < 1e-12);

        let mut clf = ptr::null_mut();
        let mut info = std::mem::zeroed::<MbnSolveInfo>();
        assert_eq!(mbn_learn(ds, &opts, &mut clf, &mut info), MbnStatus::Ok);
        assert!(!clf.is_null());
        assert_eq!(info.status, MBN_SOLVE_OPTIMAL);
        assert_eq!(info.gap_percent, 0.0);
        assert!(info.objective <= info.upper_bound + 1e-7);
        assert!(info.nodes >= 1);
        assert_eq!(mbn_classifier_num_vars(clf), 3);

        let mut class = usize::MAX;
        assert_eq!(
            mbn_classifier_predict(clf, [1u32, 1].as_ptr(), 2, &mut class),
            MbnStatus::Ok
        );
        assert_eq!(class, 1);
        let mut margin = f64::NAN;
        assert_eq!(
            mbn_classifier_margin(clf, [1u32, 1, 1].as_ptr(), 3, &mut margin),
            MbnStatus::Ok
        );
        assert!(margin > 0.0);

        let mut len = 0;
        assert_eq!(
            mbn_classifier_parents(clf, 1, ptr::null_mut(), 0, &mut len),
            MbnStatus::Ok
        );
        let mut buf = vec![usize::MAX; len];
        assert_eq!(
            mbn_classifier_parents(clf, 1, buf.as_mut_ptr(), len, &mut len),
            MbnStatus::Ok
        );
        assert!(buf.is_empty() || buf[0] == 0, "feature parents start with the class");

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("model.json").to_str().unwrap()).unwrap();
        assert_eq!(mbn_classifier_save(clf, path.as_ptr()), MbnStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(mbn_classifier_load(path.as_ptr(), &mut loaded), MbnStatus::Ok);
        let mut again = f64::NAN;
        assert_eq!(
            mbn_classifier_margin(loaded, [1u32, 1, 1].as_ptr(), 3, &mut again),
            MbnStatus::Ok
        );
        assert_eq!(margin, again);

        mbn_classifier_free(loaded);
        mbn_classifier_free(clf);
        mbn_dataset_free(ds);
    }
}

#[test]
fn mdl_and_null_options_work() {
    let ds = toy_dataset();
    unsafe {
        let mut clf = ptr::null_mut();
        assert_eq!(mbn_learn(ds, ptr::null(), &mut clf, ptr::null_mut()), MbnStatus::Ok);
        mbn_classifier_free(clf);

        let mut opts = std::mem::zeroed::<MbnLearnOptions>();
        mbn_learn_options_default(&mut opts);
        opts.score = MBN_SCORE_MDL;
        opts.gamma = f64::NAN;
        let mut info = std::mem::zeroed::<MbnSolveInfo>();
        assert_eq!(mbn_learn(ds, &opts, &mut clf, &mut info), MbnStatus::Ok);
        assert_eq!(info.status, MBN_SOLVE_OPTIMAL);
        mbn_classifier_free(clf);
        mbn_dataset_free(ds);
    }
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.csv");
    std::fs::write(&file, "x,label\n1,a\n2,b\n1,a\n2,b\n").unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(mbn_dataset_load_csv(path.as_ptr(), 1, 0, &mut ds), MbnStatus::Ok);
        assert_eq!(mbn_dataset_num_samples(ds), 4);
        assert_eq!(mbn_dataset_num_vars(ds), 2);
        mbn_dataset_free(ds);

        let missing = CString::new(dir.path().join("nope.csv").to_str().unwrap()).unwrap();
        let mut ds = ptr::null_mut();
        assert_eq!(mbn_dataset_load_csv(missing.as_ptr(), 0, 0, &mut ds), MbnStatus::Io);
        assert!(ds.is_null());
        assert!(last_error().contains("nope.csv"));
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let ds = toy_dataset();
    unsafe {
        let mut clf = ptr::null_mut();
        assert_eq!(
            mbn_learn(ptr::null(), ptr::null(), &mut clf, ptr::null_mut()),
            MbnStatus::NullPointer
        );
        assert!(last_error().contains("dataset"));
        assert_eq!(
            mbn_learn(ds, ptr::null(), ptr::null_mut(), ptr::null_mut()),
            MbnStatus::NullPointer
        );

        let mut opts = std::mem::zeroed::<MbnLearnOptions>();
        mbn_learn_options_default(&mut opts);
        opts.score = 9;
        assert_eq!(
            mbn_learn(ds, &opts, &mut clf, ptr::null_mut()),
            MbnStatus::InvalidArgument
        );
        mbn_learn_options_default(&mut opts);
        opts.time_limit = -1.0;
        assert_eq!(
            mbn_learn(ds, &opts, &mut clf, ptr::null_mut()),
            MbnStatus::InvalidArgument
        );
        assert!(clf.is_null());

        assert_eq!(mbn_learn(ds, ptr::null(), &mut clf, ptr::null_mut()), MbnStatus::Ok);
        let mut class = 0;
        // Wrong feature count, then an out-of-range state.
        assert_ne!(
            mbn_classifier_predict(clf, [0u32].as_ptr(), 1, &mut class),
            MbnStatus::Ok
        );
        assert_ne!(
            mbn_classifier_predict(clf, [0u32, 5].as_ptr(), 2, &mut class),
            MbnStatus::Ok
        );
        let mut len = 0;
        assert_eq!(
            mbn_classifier_parents(clf, 7, ptr::null_mut(), 0, &mut len),
            MbnStatus::InvalidArgument
        );
        mbn_classifier_free(clf);

        // State beyond its declared cardinality.
        let mut bad = ptr::null_mut();
        let status = mbn_dataset_from_values([2usize, 2].as_ptr(), 2, [0u32, 0, 1, 3].as_ptr(), 2, &mut bad);
        assert_ne!(status, MbnStatus::Ok);
        assert!(bad.is_null());

        mbn_dataset_free(ptr::null_mut());
        mbn_classifier_free(ptr::null_mut());
        mbn_dataset_free(ds);
    }
}

#[test]
fn timeout_without_incumbent_is_distinct() {
    let mut values = Vec::new();
    let mut state = 12345u64;
    for _ in 0..150 * 8 {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        values.push(((state >> 33) % 3) as u32);
    }
    let cards = [3usize; 8];
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            mbn_dataset_from_values(cards.as_ptr(), 8, values.as_ptr(), 150, &mut ds),
            MbnStatus::Ok
        );
        let mut opts = std::mem::zeroed::<MbnLearnOptions>();
        mbn_learn_options_default(&mut opts);
        opts.time_limit = 1e-6;
        let mut clf = ptr::null_mut();
        let mut info = std::mem::zeroed::<MbnSolveInfo>();
        assert_eq!(mbn_learn(ds, &opts, &mut clf, &mut info), MbnStatus::NoIncumbent);
        assert!(clf.is_null());
        assert_eq!(info.status, MBN_SOLVE_NO_INCUMBENT);
        assert!(info.objective.is_nan());
        assert!(info.gap_percent.is_infinite());
        mbn_dataset_free(ds);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/marginbn.h")).unwrap();
    for name in [
        "mbn_version",
        "mbn_last_error",
        "mbn_learn_options_default",
        "mbn_dataset_load_csv",
        "mbn_dataset_from_values",
        "mbn_dataset_free",
        "mbn_learn",
        "mbn_classifier_predict",
        "mbn_classifier_margin",
        "mbn_classifier_parents",
        "mbn_classifier_save",
        "mbn_classifier_load",
        "mbn_classifier_free",
        "typedef struct MbnDataset MbnDataset;",
        "MBN_STATUS_NO_INCUMBENT = 7",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/marginbn.h");
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
