use std::ffi::{CStr, CString};
use std::ptr;

use bonsai::targets::{MiniLang, Target};
use bonsai_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(bonsai_last_error()) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    bonsai_string_free(s);
    out
}

#[test]
fn grammar_and_sampling() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(bonsai_grammar_builtin(cstr("toy").as_ptr(), &mut g), BonsaiStatus::Ok);
        let mut text = ptr::null_mut();
        assert_eq!(bonsai_sample(g, 1, 2, 1, 5, &mut text), BonsaiStatus::Ok);
        let s = take(text);
        assert!(["", "pass", "pass pass"].contains(&s.as_str()), "{s}");
        assert_eq!(bonsai_sample(g, 0, 1, 1, 5, &mut text), BonsaiStatus::Config);
        assert!(last_error().contains("at least 1"));
        bonsai_grammar_free(g);

        let mut bad = ptr::null_mut();
        assert_eq!(bonsai_grammar_parse(cstr("s : t ;").as_ptr(), &mut bad), BonsaiStatus::Grammar);
        assert!(bad.is_null());
        assert_eq!(bonsai_grammar_parse(ptr::null(), &mut bad), BonsaiStatus::NullArgument);
        let mut ok = ptr::null_mut();
        assert_eq!(bonsai_grammar_parse(cstr("s : \"x\" ;").as_ptr(), &mut ok), BonsaiStatus::Ok);
        bonsai_grammar_free(ok);
    }
}

#[test]
fn target_execution_matches_core() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(bonsai_target_new(cstr("minilang").as_ptr(), ptr::null(), &mut t), BonsaiStatus::Ok);
        let mut fb = ptr::null_mut();
        assert_eq!(bonsai_target_execute(t, cstr("a0 : int = 1 a0 = \"s\"").as_ptr(), &mut fb), BonsaiStatus::Ok);
        assert!(!bonsai_feedback_valid(fb));
        let n = bonsai_feedback_coverage_len(fb);
        let mut buf = vec![0u32; n + 4];
        assert_eq!(bonsai_feedback_coverage(fb, buf.as_mut_ptr(), buf.len()), n);
        buf.truncate(n);
        let expected: Vec<u32> = MiniLang::new().execute("a0 : int = 1 a0 = \"s\"").coverage.iter().collect();
        assert_eq!(buf, expected);
        assert!(buf.iter().all(|&b| b < bonsai_target_total_branches(t)));
        bonsai_feedback_free(fb);
        bonsai_target_free(t);

        let mut none = ptr::null_mut();
        assert_eq!(bonsai_target_new(cstr("nope").as_ptr(), ptr::null(), &mut none), BonsaiStatus::Target);
        assert!(none.is_null());
    }
}

#[test]
fn lattice_is_deterministic_across_jobs() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(bonsai_target_new(cstr("arith").as_ptr(), ptr::null(), &mut t), BonsaiStatus::Ok);
        let texts = |jobs| {
            let mut c = ptr::null_mut();
            assert_eq!(bonsai_run_lattice(t, 2, 2, 2, true, 300, 11, jobs, &mut c), BonsaiStatus::Ok);
            let out: Vec<String> = (0..bonsai_corpus_len(c))
                .map(|i| {
                    let mut s = ptr::null_mut();
                    assert_eq!(bonsai_corpus_text(c, i, &mut s), BonsaiStatus::Ok);
                    take(s)
                })
                .collect();
            assert!(bonsai_corpus_executions(c) > 0);
            bonsai_corpus_free(c);
            out
        };
        let a = texts(1);
        assert!(!a.is_empty());
        assert_eq!(a, texts(3));

        let mut c = ptr::null_mut();
        assert_eq!(bonsai_fuzz(t, 1, 1, 1, BonsaiMode::Unrestricted, 200, 3, &mut c), BonsaiStatus::Ok);
        assert_eq!(bonsai_corpus_executions(c), 200);
        let dir = tempfile::tempdir().unwrap();
        let path = cstr(dir.path().to_str().unwrap());
        assert_eq!(bonsai_corpus_save(c, path.as_ptr()), BonsaiStatus::Ok);
        assert!(dir.path().join("input_0.txt").exists());
        let mut s = ptr::null_mut();
        assert_eq!(bonsai_corpus_text(c, usize::MAX, &mut s), BonsaiStatus::OutOfRange);
        bonsai_corpus_free(c);
        bonsai_target_free(t);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(bonsai_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
