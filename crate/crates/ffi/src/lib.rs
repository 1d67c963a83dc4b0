//! C ABI over the bonsai toolkit.
//!
//! Objects are opaque handles created by `*_new`/`*_parse`/run functions and
//! released with the matching `*_free`. Functions that can fail return a
//! [`BonsaiStatus`]; the message of the most recent failure on the calling
//! thread is available from [`bonsai_last_error`]. Strings handed out by the
//! library are released with [`bonsai_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use bonsai::fuzzer::{cbgf_run, random_seed, Corpus, FuzzerConfig, ValidityMode};
use bonsai::grammar::{parse_grammar, Grammar};
use bonsai::lattice::{bonsai_run, splitmix64, LatticeSpec, NodeTemplate};
use bonsai::sampler::{prng, sample, ChoiceSource, SizeBounds};
use bonsai::targets::{self, ExecutionFeedback, Target};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BonsaiStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Grammar = 3,
    Config = 4,
    Target = 5,
    Runtime = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BonsaiMode {
    Restricted = 0,
    Unrestricted = 1,
}

impl From<BonsaiMode> for ValidityMode {
    fn from(m: BonsaiMode) -> Self {
        match m {
            BonsaiMode::Restricted => ValidityMode::Restricted,
            BonsaiMode::Unrestricted => ValidityMode::Unrestricted,
        }
    }
}

pub struct BonsaiGrammar {
    inner: Grammar,
}

pub struct BonsaiTarget {
    inner: Arc<dyn Target>,
}

pub struct BonsaiFeedback {
    inner: ExecutionFeedback,
    branches: Vec<u32>,
}

pub struct BonsaiCorpus {
    inner: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BonsaiStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: BonsaiStatus, msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(status, msg.into()))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, stores a failure message, and maps the outcome to a status.
fn guard(f: impl FnOnce() -> Outcome<()>) -> BonsaiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BonsaiStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BonsaiStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return fail(BonsaiStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(BonsaiStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().map_or_else(|| fail(BonsaiStatus::NullArgument, format!("{what} is null")), Ok)
}

fn out_arg<T>(p: *mut T, what: &str) -> Outcome<()> {
    if p.is_null() {
        fail(BonsaiStatus::NullArgument, format!("{what} is null"))
    } else {
        Ok(())
    }
}

fn bounds(m: u32, n: u32, d: u32) -> Outcome<SizeBounds> {
    SizeBounds::new(m, n, d).or_else(|e| fail(BonsaiStatus::Config, e.to_string()))
}

fn c_string(s: &str) -> Outcome<*mut c_char> {
    CString::new(s).map(CString::into_raw).or_else(|_| fail(BonsaiStatus::Runtime, "text contains a NUL byte"))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bonsai_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bonsai_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bonsai_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses EBNF grammar source.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bonsai_grammar_parse(source: *const c_char, out: *mut *mut BonsaiGrammar) -> BonsaiStatus {
    guard(|| {
        let src = str_arg(source, "source")?;
        out_arg(out, "out")?;
        let g = parse_grammar(src).or_else(|e| fail(BonsaiStatus::Grammar, e.to_string()))?;
        *out = Box::into_raw(Box::new(BonsaiGrammar { inner: g }));
        Ok(())
    })
}

/// Loads a bundled grammar: `minilang`, `arith` or `toy`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bonsai_grammar_builtin(name: *const c_char, out: *mut *mut BonsaiGrammar) -> BonsaiStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        out_arg(out, "out")?;
        let src = bonsai::grammars::builtin(name)
            .map_or_else(|| fail(BonsaiStatus::Config, format!("no bundled grammar `{name}`")), Ok)?;
        let g = parse_grammar(src).or_else(|e| fail(BonsaiStatus::Grammar, e.to_string()))?;
        *out = Box::into_raw(Box::new(BonsaiGrammar { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a live grammar handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn bonsai_grammar_free(g: *mut BonsaiGrammar) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Samples one input within bounds `(m, n, d)`; free the text with
/// [`bonsai_string_free`].
///
/// # Safety
/// `g` must be a live grammar handle and `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bonsai_sample(
    g: *const BonsaiGrammar,
    m: u32,
    n: u32,
    d: u32,
    seed: u64,
    out_text: *mut *mut c_char,
) -> BonsaiStatus {
    guard(|| {
        let g = ref_arg(g, "grammar")?;
        out_arg(out_text, "out_text")?;
        let b = bounds(m, n, d)?;
        let mut rng = prng(seed);
        let s = sample(&g.inner, b, &mut ChoiceSource::fresh(&mut rng))
            .or_else(|e| fail(BonsaiStatus::Runtime, e.to_string()))?;
        *out_text = c_string(&s.text)?;
        Ok(())
    })
}

/// Creates a target by name (`minilang`, `arith`, `ext:<command>`). `g` may
/// be null to use the target's bundled grammar; it is copied, not retained.
///
/// # Safety
/// `name` must be a NUL-terminated string, `g` null or live, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bonsai_target_new(
    name: *const c_char,
    g: *const BonsaiGrammar,
    out: *mut *mut BonsaiTarget,
) -> BonsaiStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        out_arg(out, "out")?;
        let grammar = g.as_ref().map(|g| g.inner.clone());
        let t = targets::resolve(name, grammar).or_else(|e| fail(BonsaiStatus::Target, e.to_string()))?;
        *out = Box::into_raw(Box::new(BonsaiTarget { inner: t }));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a live target handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn bonsai_target_free(t: *mut BonsaiTarget) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of branch identifiers the target can report.
///
/// # Safety
/// `t` must be a live target handle.
#[no_mangle]
pub unsafe extern "C" fn bonsai_target_total_branches(t: *const BonsaiTarget) -> u32 {
    t.as_ref().map_or(0, |t| t.inner.total_branches())
}

/// Runs the target on one input.
///
/// # Safety
/// `t` must be live, `input` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bonsai_target_execute(
    t: *const BonsaiTarget,
    input: *const c_char,
    out: *mut *mut BonsaiFeedback,
) -> BonsaiStatus {
    guard(|| {
        let t = ref_arg(t, "target")?;
        let input = str_arg(input, "input")?;
        out_arg(out, "out")?;
        let fb = t.inner.execute(input);
        let branches = fb.coverage.iter().collect();
        *out = Box::into_raw(Box::new(BonsaiFeedback { inner: fb, branches }));
        Ok(())
    })
}

/// # Safety
/// `fb` must be a live feedback handle.
#[no_mangle]
pub unsafe extern "C" fn bonsai_feedback_valid(fb: *const BonsaiFeedback) -> bool {
    fb.as_ref().is_some_and(|f| f.inner.valid)
}

/// # Safety
/// `fb` must be a live feedback handle.
#[no_mangle]
pub unsafe extern "C" fn bonsai_feedback_coverage_len(fb: *const BonsaiFeedback) -> usize {
    fb.as_ref().map_or(0, |f| f.branches.len())
}

/// Copies up to `cap` covered branch identifiers, ascending, into `buf`
/// and returns how many were copied.
///
/// # Safety
/// `fb` must be live and `buf` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn bonsai_feedback_coverage(fb: *const BonsaiFeedback, buf: *mut u32, cap: usize) -> usize {
    let (Some(f), false) = (fb.as_ref(), buf.is_null()) else {
        return 0;
    };
    let k = f.branches.len().min(cap);
    ptr::copy_nonoverlapping(f.branches.as_ptr(), buf, k);
    k
}

/// # Safety
/// `fb` must be null or a live feedback handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn bonsai_feedback_free(fb: *mut BonsaiFeedback) {
    if !fb.is_null() {
        drop(Box::from_raw(fb));
    }
}

/// Runs one coverage-guided bounded fuzzer from a single random seed.
///
/// # Safety
/// `t` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bonsai_fuzz(
    t: *const BonsaiTarget,
    m: u32,
    n: u32,
    d: u32,
    mode: BonsaiMode,
    budget: u64,
    seed: u64,
    out: *mut *mut BonsaiCorpus,
) -> BonsaiStatus {
    guard(|| {
        let t = ref_arg(t, "target")?;
        out_arg(out, "out")?;
        let target = t.inner.as_ref();
        let cfg = FuzzerConfig::new(bounds(m, n, d)?, mode.into(), budget, seed);
        let first = random_seed(target, target.grammar(), &cfg, splitmix64(seed))
            .or_else(|e| fail(BonsaiStatus::Runtime, e.to_string()))?;
        let corpus = cbgf_run(target, target.grammar(), &cfg, &[first]);
        let failure = corpus.failure.clone();
        *out = Box::into_raw(Box::new(BonsaiCorpus { inner: corpus }));
        match failure {
            Some(f) => fail(BonsaiStatus::Runtime, f),
            None => Ok(()),
        }
    })
}

/// Runs the lattice up to `(m, n, d)` and returns the top node's corpus.
/// On node failure the status is `BONSAI_STATUS_RUNTIME` and `*out` still
/// receives the corpus.
///
/// # Safety
/// `t` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bonsai_run_lattice(
    t: *const BonsaiTarget,
    m: u32,
    n: u32,
    d: u32,
    extended: bool,
    node_budget: u64,
    seed: u64,
    jobs: usize,
    out: *mut *mut BonsaiCorpus,
) -> BonsaiStatus {
    guard(|| {
        let t = ref_arg(t, "target")?;
        out_arg(out, "out")?;
        let target = t.inner.as_ref();
        let spec = LatticeSpec::new(bounds(m, n, d)?, extended);
        let run = bonsai_run(target, target.grammar(), spec, NodeTemplate::new(node_budget, seed), jobs);
        let failures: Vec<String> = run.failures().iter().map(|(n, f)| format!("{n}: {f}")).collect();
        *out = Box::into_raw(Box::new(BonsaiCorpus { inner: run.final_corpus().clone() }));
        if failures.is_empty() {
            Ok(())
        } else {
            fail(BonsaiStatus::Runtime, failures.join("; "))
        }
    })
}

/// # Safety
/// `c` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn bonsai_corpus_len(c: *const BonsaiCorpus) -> usize {
    c.as_ref().map_or(0, |c| c.inner.len())
}

/// Target executions the run consumed.
///
/// # Safety
/// `c` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn bonsai_corpus_executions(c: *const BonsaiCorpus) -> u64 {
    c.as_ref().map_or(0, |c| c.inner.executions)
}

/// Copies member `index`'s text; free it with [`bonsai_string_free`].
///
/// # Safety
/// `c` must be live and `out_text` valid.
#[no_mangle]
pub unsafe extern "C" fn bonsai_corpus_text(
    c: *const BonsaiCorpus,
    index: usize,
    out_text: *mut *mut c_char,
) -> BonsaiStatus {
    guard(|| {
        let c = ref_arg(c, "corpus")?;
        out_arg(out_text, "out_text")?;
        let input = c
            .inner
            .inputs()
            .get(index)
            .map_or_else(|| fail(BonsaiStatus::OutOfRange, format!("index {index} of {}", c.inner.len())), Ok)?;
        *out_text = c_string(&input.text)?;
        Ok(())
    })
}

/// Writes the corpus as `input_<k>.txt` / `input_<k>.meta.json` into `dir`.
///
/// # Safety
/// `c` must be live and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bonsai_corpus_save(c: *const BonsaiCorpus, dir: *const c_char) -> BonsaiStatus {
    guard(|| {
        let c = ref_arg(c, "corpus")?;
        let dir = str_arg(dir, "dir")?;
        c.inner.save(Path::new(dir)).or_else(|e| fail(BonsaiStatus::Runtime, format!("{dir}: {e}")))
    })
}

/// # Safety
/// `c` must be null or a live corpus handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn bonsai_corpus_free(c: *mut BonsaiCorpus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}
