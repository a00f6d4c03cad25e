//! C interface to `rmab-core`.
//!
//! Every function returns an [`RmabStatus`] and writes results through out
//! pointers. On failure the message is available from
//! [`rmab_last_error_message`] on the same thread until the next call.
//! Handles returned through `out` pointers are owned by the caller and must
//! be released with the matching `_free` function.

use rmab_core::baseline::{
    expected_random_error, monte_carlo_random_error, random_error_std_bound, sigma_multiple,
};
use rmab_core::metrics::{kendall_topk, spearman_topk};
use rmab_core::ranking::rank_by_index;
use rmab_core::simulator::{generate_cohort, Arm, CohortSpec, Policy, Study, StudyConfig};
use rmab_core::{
    ArmId, DiscountFactor, Error, IndexSolver, Ranking, TransitionModel, WhittleEntry,
};
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The index bisection could not bracket a sign change.
    BracketFailure = 3,
    NotConverged = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmabPolicy {
    Whittle = 0,
    Random = 1,
    RoundRobin = 2,
    Csoc = 3,
}

impl From<RmabPolicy> for Policy {
    fn from(p: RmabPolicy) -> Self {
        match p {
            RmabPolicy::Whittle => Policy::Whittle,
            RmabPolicy::Random => Policy::Random,
            RmabPolicy::RoundRobin => Policy::RoundRobin,
            RmabPolicy::Csoc => Policy::Csoc,
        }
    }
}

/// Ordered arm ids.
pub struct RmabRanking(Ranking);

/// A generated cohort.
pub struct RmabCohort(Vec<Arm>);

/// A study advanced one week at a time.
pub struct RmabStudy(Study);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RmabStatus {
    match e {
        Error::BracketFailure { .. } => RmabStatus::BracketFailure,
        Error::NotConverged { .. } => RmabStatus::NotConverged,
        Error::Arm { source, .. } => status_of(source),
        Error::InvalidArgument(_) | Error::InvalidTransition { .. } | Error::Schema { .. } => {
            RmabStatus::InvalidArgument
        }
        _ => RmabStatus::Internal,
    }
}

struct Fail(RmabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(RmabStatus::NullPointer, format!("`{name}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RmabStatus {
    set_last_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RmabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside rmab".into());
            RmabStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message describing the last failure on this thread; empty after success.
///
/// The pointer stays valid until the next rmab call on this thread.
#[no_mangle]
pub extern "C" fn rmab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rmab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn solver(beta: f64, tol: f64) -> Result<IndexSolver, Fail> {
    let s = IndexSolver::new(DiscountFactor::new(beta)?);
    Ok(if tol > 0.0 { s.with_index_tol(tol) } else { s })
}

/// Whittle index of `state` for the model `pSA = P(S, A -> 1)`.
///
/// A non-positive `tol` selects the default tolerance.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_whittle_index(
    p00: f64,
    p10: f64,
    p01: f64,
    p11: f64,
    beta: f64,
    state: u8,
    tol: f64,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        if state > 1 {
            return Err(Fail(
                RmabStatus::InvalidArgument,
                format!("state {state} is not 0 or 1"),
            ));
        }
        let model = TransitionModel::new(p00, p10, p01, p11)?;
        *out = solver(beta, tol)?.index(&model, state)?;
        Ok(())
    })
}

/// Q-values under passive subsidy `lambda`, written as `out[2 * state + action]`.
///
/// # Safety
/// `out` must be valid for writing four doubles.
#[no_mangle]
pub unsafe extern "C" fn rmab_q_values(
    p00: f64,
    p10: f64,
    p01: f64,
    p11: f64,
    beta: f64,
    lambda: f64,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = TransitionModel::new(p00, p10, p01, p11)?;
        let q = solver(beta, 0.0)?.q_values(&model, lambda)?;
        for s in 0..2u8 {
            for a in 0..2u8 {
                *out.add(2 * s as usize + a as usize) = q.get(s, a);
            }
        }
        Ok(())
    })
}

/// Expected top-k footrule error of a uniformly random order.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_expected_random_error(
    n: usize,
    k: usize,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        *self::out(out, "out")? = expected_random_error(n, k)?;
        Ok(())
    })
}

/// Standard-deviation bound of the random error and whether it is proven for `(n, k)`.
///
/// # Safety
/// `bound` and `valid` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_random_error_std_bound(
    n: usize,
    k: usize,
    bound: *mut f64,
    valid: *mut bool,
) -> RmabStatus {
    guard(|| {
        let (b, v) = (out(bound, "bound")?, out(valid, "valid")?);
        let r = random_error_std_bound(n, k)?;
        *b = r.bound;
        *v = r.valid;
        Ok(())
    })
}

/// `(expected - observed) / bound`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_sigma_multiple(
    expected: f64,
    bound: f64,
    observed: f64,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        *self::out(out, "out")? = sigma_multiple(expected, bound, observed)?;
        Ok(())
    })
}

/// Monte Carlo mean and sample standard deviation of the random error.
///
/// # Safety
/// `mean` and `std_dev` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_monte_carlo_random_error(
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
    mean: *mut f64,
    std_dev: *mut f64,
) -> RmabStatus {
    guard(|| {
        let (m, s) = (out(mean, "mean")?, out(std_dev, "std_dev")?);
        let r = monte_carlo_random_error(n, k, trials, seed)?;
        *m = r.mean;
        *s = r.std;
        Ok(())
    })
}

/// Ranking from an explicit order of distinct ids.
///
/// # Safety
/// `ids` must point to `len` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_new(
    ids: *const u64,
    len: usize,
    out: *mut *mut RmabRanking,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let ids = slice(ids, len, "ids")?;
        let r = Ranking::new(ids.iter().copied().map(ArmId).collect())?;
        *out = Box::into_raw(Box::new(RmabRanking(r)));
        Ok(())
    })
}

/// Ranking by descending index, ties by ascending id.
///
/// # Safety
/// `ids` and `indices` must point to `len` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_from_indices(
    ids: *const u64,
    indices: *const f64,
    len: usize,
    out: *mut *mut RmabRanking,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let ids = slice(ids, len, "ids")?;
        let indices = slice(indices, len, "indices")?;
        let entries: Vec<WhittleEntry> = ids
            .iter()
            .zip(indices)
            .map(|(&id, &index)| WhittleEntry {
                arm_id: ArmId(id),
                state: 0,
                index,
            })
            .collect();
        *out = Box::into_raw(Box::new(RmabRanking(rank_by_index(&entries)?)));
        Ok(())
    })
}

/// # Safety
/// `ranking` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_len(
    ranking: *const RmabRanking,
    out: *mut usize,
) -> RmabStatus {
    guard(|| {
        *self::out(out, "out")? = handle(ranking, "ranking")?.0.len();
        Ok(())
    })
}

/// 1-based position of `id`.
///
/// # Safety
/// `ranking` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_rank(
    ranking: *const RmabRanking,
    id: u64,
    out: *mut usize,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let r = handle(ranking, "ranking")?;
        *out = r.0.rank(ArmId(id)).ok_or_else(|| {
            Fail(
                RmabStatus::InvalidArgument,
                format!("arm {id} is not ranked"),
            )
        })?;
        Ok(())
    })
}

/// Copies the first `min(cap, len)` ids into `buf`.
///
/// # Safety
/// `ranking` must be a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_ids(
    ranking: *const RmabRanking,
    buf: *mut u64,
    cap: usize,
) -> RmabStatus {
    guard(|| {
        let r = handle(ranking, "ranking")?;
        if cap > 0 && buf.is_null() {
            return Err(null("buf"));
        }
        for (i, id) in r.0.as_slice().iter().take(cap).enumerate() {
            *buf.add(i) = id.0;
        }
        Ok(())
    })
}

/// # Safety
/// `ranking` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rmab_ranking_free(ranking: *mut RmabRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

/// Top-k Spearman footrule error of `predicted` against `observed`.
///
/// # Safety
/// Both handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_spearman_topk(
    predicted: *const RmabRanking,
    observed: *const RmabRanking,
    k: usize,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let (p, o) = (
            handle(predicted, "predicted")?,
            handle(observed, "observed")?,
        );
        *out = spearman_topk(&p.0, &o.0, k)?.overall;
        Ok(())
    })
}

/// Top-k Kendall error of `predicted` against `observed`.
///
/// # Safety
/// Both handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_kendall_topk(
    predicted: *const RmabRanking,
    observed: *const RmabRanking,
    k: usize,
    out: *mut f64,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let (p, o) = (
            handle(predicted, "predicted")?,
            handle(observed, "observed")?,
        );
        *out = kendall_topk(&p.0, &o.0, k)?;
        Ok(())
    })
}

/// The built-in three-group synthetic cohort of `n` arms.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_cohort_synthetic(
    n: usize,
    prediction_noise: f64,
    seed: u64,
    out: *mut *mut RmabCohort,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let mut spec = CohortSpec::synthetic(n);
        spec.prediction_noise = prediction_noise;
        *out = Box::into_raw(Box::new(RmabCohort(generate_cohort(&spec, seed)?)));
        Ok(())
    })
}

/// # Safety
/// `cohort` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_cohort_len(cohort: *const RmabCohort, out: *mut usize) -> RmabStatus {
    guard(|| {
        *self::out(out, "out")? = handle(cohort, "cohort")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `cohort` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rmab_cohort_free(cohort: *mut RmabCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Starts a study on a copy of `cohort`.
///
/// # Safety
/// `cohort` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_study_new(
    cohort: *const RmabCohort,
    policy: RmabPolicy,
    budget_k: usize,
    beta: f64,
    seed: u64,
    out: *mut *mut RmabStudy,
) -> RmabStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let cohort = handle(cohort, "cohort")?;
        let config = StudyConfig {
            beta: DiscountFactor::new(beta)?,
            ..StudyConfig::new(0, budget_k, policy.into(), seed)
        };
        *out = Box::into_raw(Box::new(RmabStudy(Study::new(cohort.0.clone(), config)?)));
        Ok(())
    })
}

/// Runs one week; writes the number of engaging arms afterwards.
///
/// # Safety
/// `study` must be a live handle; `engaging` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_study_step(
    study: *mut RmabStudy,
    engaging: *mut usize,
) -> RmabStatus {
    guard(|| {
        let engaging = out(engaging, "engaging")?;
        let study = study.as_mut().ok_or_else(|| null("study"))?;
        *engaging = study.0.step_week()?.engaging_count;
        Ok(())
    })
}

/// Arms acted on in the most recent week, in selection order.
///
/// Writes the full count to `len` and copies at most `cap` ids into `buf`.
///
/// # Safety
/// `study` must be a live handle; `buf` must hold `cap` values; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_study_last_selection(
    study: *const RmabStudy,
    buf: *mut u64,
    cap: usize,
    len: *mut usize,
) -> RmabStatus {
    guard(|| {
        let len = out(len, "len")?;
        let study = handle(study, "study")?;
        let selected = study
            .0
            .log()
            .weeks
            .last()
            .map(|w| w.selected.as_slice())
            .unwrap_or(&[]);
        *len = selected.len();
        if cap > 0 && buf.is_null() {
            return Err(null("buf"));
        }
        for (i, id) in selected.iter().take(cap).enumerate() {
            *buf.add(i) = id.0;
        }
        Ok(())
    })
}

/// Engaging-to-non-engaging transitions so far.
///
/// # Safety
/// `study` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rmab_study_drops(study: *const RmabStudy, out: *mut usize) -> RmabStatus {
    guard(|| {
        *self::out(out, "out")? = handle(study, "study")?.0.log().drops();
        Ok(())
    })
}

/// # Safety
/// `study` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rmab_study_free(study: *mut RmabStudy) {
    if !study.is_null() {
        drop(Box::from_raw(study));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(rmab_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn golden_index() {
        let mut w = 0.0;
        let st = unsafe { rmab_whittle_index(0.0, 0.0, 1.0, 1.0, 0.5, 0, 0.0, &mut w) };
        assert_eq!(st, RmabStatus::Ok);
        assert!(last_error().is_empty());
        assert!((w - 0.5).abs() < 1e-3);
    }

    #[test]
    fn errors_set_message() {
        let mut w = 0.0;
        let st = unsafe { rmab_whittle_index(1.5, 0.0, 0.0, 0.0, 0.5, 0, 0.0, &mut w) };
        assert_eq!(st, RmabStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        let st = unsafe { rmab_whittle_index(0.5, 0.5, 0.5, 0.5, 0.5, 0, 0.0, ptr::null_mut()) };
        assert_eq!(st, RmabStatus::NullPointer);
        assert!(last_error().contains("out"));
    }

    #[test]
    fn status_maps_nested_arm_errors() {
        let e = Error::Arm {
            arm: ArmId(1),
            source: Box::new(Error::NotConverged {
                sweeps: 1,
                residual: 1.0,
            }),
        };
        assert_eq!(status_of(&e), RmabStatus::NotConverged);
    }
}
