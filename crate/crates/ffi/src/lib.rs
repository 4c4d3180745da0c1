//! C ABI over the benchmark's closed-form metrics and the latch simulator.
//!
//! Conventions:
//!
//! * Every function returns a `PB_*` status code; outputs go through `out`
//!   pointers. [`pb_last_error`] returns a thread-local message for the most
//!   recent failure on the calling thread; the pointer stays valid until the
//!   next failing call on that thread.
//! * Strings returned through `out` parameters are owned by the caller and
//!   must be released with [`pb_string_free`]. `pb_version` returns a static
//!   string that must not be freed.
//! * The simulator handle is opaque; create with [`pb_simulator_new`], use
//!   from any thread (one call at a time per handle), release with
//!   [`pb_simulator_free`].
//! * Panics never cross the boundary; they surface as [`PB_ERR_PANIC`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pivotbench::metrics::{
    fit_attention_curve, mcnemar_exact, paired_significance, resilience_lift,
};
use pivotbench::sim::{
    predicted_joint_success, probe_trajectory, retrieval_prob, simulate_response,
    simulate_with_protocol, CurveParams, ProbeSpec, SimParams,
};

pub const PB_OK: i32 = 0;
pub const PB_ERR_NULL_ARG: i32 = 1;
pub const PB_ERR_UTF8: i32 = 2;
pub const PB_ERR_JSON: i32 = 3;
pub const PB_ERR_COMPUTE: i32 = 4;
pub const PB_ERR_PANIC: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(code: i32, message: &str) -> i32 {
    set_error(message);
    code
}

fn guarded<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => fail(PB_ERR_PANIC, "panic across the FFI boundary"),
    }
}

/// Message for the most recent failure on this thread; empty string when no
/// failure has occurred yet.
#[no_mangle]
pub extern "C" fn pb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn pb_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Releases a string produced by this library.
///
/// # Safety
///
/// `s` must be null or a pointer previously returned through an `out`
/// parameter of this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Amendment-passing accuracy: `successes / n_scored`.
///
/// # Safety
///
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_apa(successes: u64, n_scored: u64, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(PB_ERR_NULL_ARG, "out is null");
        }
        if n_scored == 0 {
            return fail(PB_ERR_COMPUTE, "n_scored must be positive");
        }
        if successes > n_scored {
            return fail(PB_ERR_COMPUTE, "successes exceed n_scored");
        }
        *out = successes as f64 / n_scored as f64;
        PB_OK
    })
}

/// Resilience lift `(apa_strategy - apa_vanilla) / apa_vanilla`; rejects a
/// zero baseline.
///
/// # Safety
///
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_resilience_lift(
    apa_strategy: f64,
    apa_vanilla: f64,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(PB_ERR_NULL_ARG, "out is null");
        }
        match resilience_lift(apa_strategy, apa_vanilla) {
            Ok(lift) => {
                *out = lift;
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

/// Quadratic attention curve `clamp(alpha * (x - 0.5)^2 + gamma, 0, 1)`.
///
/// # Safety
///
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_retrieval_prob(alpha: f64, gamma: f64, x: f64, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(PB_ERR_NULL_ARG, "out is null");
        }
        let curve = CurveParams { alpha, gamma };
        match retrieval_prob(&curve, x) {
            Ok(p) => {
                *out = p;
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

/// Joint success of a fact list: the product of per-fact probabilities.
///
/// # Safety
///
/// `probs` must be null or valid for reading `len` `f64`s; `out` must be
/// null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_predicted_joint_success(
    probs: *const f64,
    len: usize,
    out: *mut f64,
) -> i32 {
    guarded(|| {
        if probs.is_null() || out.is_null() {
            return fail(PB_ERR_NULL_ARG, "probs or out is null");
        }
        let slice = std::slice::from_raw_parts(probs, len);
        match predicted_joint_success(slice) {
            Ok(p) => {
                *out = p;
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

/// Least-squares fit of `y = alpha * (x - 0.5)^2 + gamma`. `out_sse` may be
/// null when the residual is not needed.
///
/// # Safety
///
/// `xs` and `ys` must be null or valid for reading `len` `f64`s each; each
/// non-null `out_*` pointer must be valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_fit_attention_curve(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out_alpha: *mut f64,
    out_gamma: *mut f64,
    out_sse: *mut f64,
) -> i32 {
    guarded(|| {
        if xs.is_null() || ys.is_null() || out_alpha.is_null() || out_gamma.is_null() {
            return fail(PB_ERR_NULL_ARG, "xs, ys, out_alpha, or out_gamma is null");
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let ys = std::slice::from_raw_parts(ys, len);
        let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
        match fit_attention_curve(&points) {
            Ok(fit) => {
                *out_alpha = fit.alpha;
                *out_gamma = fit.gamma;
                if !out_sse.is_null() {
                    *out_sse = fit.sse;
                }
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

/// Paired significance over two 0/1 outcome arrays of equal length:
/// two-sided paired t and exact McNemar. `out_t_statistic` may be null; when
/// the t statistic is undefined (degenerate differences) it is set to NaN.
///
/// # Safety
///
/// `a` and `b` must be null or valid for reading `len` bytes each; each
/// non-null `out_*` pointer must be valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_paired_significance(
    a: *const u8,
    b: *const u8,
    len: usize,
    out_t_p: *mut f64,
    out_mcnemar_p: *mut f64,
    out_t_statistic: *mut f64,
) -> i32 {
    guarded(|| {
        if a.is_null() || b.is_null() || out_t_p.is_null() || out_mcnemar_p.is_null() {
            return fail(PB_ERR_NULL_ARG, "a, b, out_t_p, or out_mcnemar_p is null");
        }
        let a = std::slice::from_raw_parts(a, len);
        let b = std::slice::from_raw_parts(b, len);
        let pairs: Vec<(bool, bool)> =
            a.iter().zip(b.iter()).map(|(&x, &y)| (x != 0, y != 0)).collect();
        match paired_significance(&pairs) {
            Ok(sig) => {
                *out_t_p = sig.t_p;
                *out_mcnemar_p = sig.mcnemar_p;
                if !out_t_statistic.is_null() {
                    *out_t_statistic = sig.t_statistic.unwrap_or(f64::NAN);
                }
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

/// Exact two-sided McNemar p-value from discordant counts.
///
/// # Safety
///
/// `out` must be null or valid for writing one `f64`.
#[no_mangle]
pub unsafe extern "C" fn pb_mcnemar_exact(b: u64, c: u64, out: *mut f64) -> i32 {
    guarded(|| {
        if out.is_null() {
            return fail(PB_ERR_NULL_ARG, "out is null");
        }
        *out = mcnemar_exact(b, c);
        PB_OK
    })
}

struct SimulatorState {
    params: SimParams,
}

/// Opaque simulator handle.
pub struct PbSimulator {
    _private: [u8; 0],
}

/// Creates a simulator from a JSON parameter object (same schema as the
/// `[simulator]` config section; missing fields take their defaults; pass
/// `"{}"` for all defaults). Returns null on error; consult
/// [`pb_last_error`].
///
/// # Safety
///
/// `params_json` must be null or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pb_simulator_new(params_json: *const c_char) -> *mut PbSimulator {
    let result = catch_unwind(AssertUnwindSafe(|| {
        if params_json.is_null() {
            set_error("params_json is null");
            return std::ptr::null_mut();
        }
        let raw = match CStr::from_ptr(params_json).to_str() {
            Ok(raw) => raw,
            Err(e) => {
                set_error(&format!("params_json is not UTF-8: {e}"));
                return std::ptr::null_mut();
            }
        };
        let params: SimParams = match serde_json::from_str(raw) {
            Ok(params) => params,
            Err(e) => {
                set_error(&format!("params_json: {e}"));
                return std::ptr::null_mut();
            }
        };
        if let Err(e) = params.validate() {
            set_error(&e.to_string());
            return std::ptr::null_mut();
        }
        Box::into_raw(Box::new(SimulatorState { params })) as *mut PbSimulator
    }));
    match result {
        Ok(ptr) => ptr,
        Err(_) => {
            set_error("panic across the FFI boundary");
            std::ptr::null_mut()
        }
    }
}

/// Releases a simulator handle. Null is a no-op.
///
/// # Safety
///
/// `sim` must be null or a handle from [`pb_simulator_new`], not yet freed;
/// no other thread may be using it.
#[no_mangle]
pub unsafe extern "C" fn pb_simulator_free(sim: *mut PbSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim as *mut SimulatorState));
    }
}

/// Simulates one completion for a probe trajectory described as JSON
/// (`{"token_count": .., "fact_positions": [..], "chained": bool,
/// "update_position": x|null, "seed": n}`). `draw_seed` drives the draw
/// stream; `protocol_steps` of 0 means no protocol. On success `*out` holds
/// a JSON object `{"trajectory_id", "expected_signal", "response"}` owned by
/// the caller (release with [`pb_string_free`]).
///
/// # Safety
///
/// `sim` must be null or a live handle from [`pb_simulator_new`];
/// `probe_json` must be null or a valid NUL-terminated string; `out` must be
/// null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn pb_simulator_respond(
    sim: *const PbSimulator,
    probe_json: *const c_char,
    draw_seed: u64,
    protocol_steps: u32,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        if sim.is_null() || probe_json.is_null() || out.is_null() {
            return fail(PB_ERR_NULL_ARG, "sim, probe_json, or out is null");
        }
        let state = &*(sim as *const SimulatorState);
        let raw = match CStr::from_ptr(probe_json).to_str() {
            Ok(raw) => raw,
            Err(e) => return fail(PB_ERR_UTF8, &format!("probe_json is not UTF-8: {e}")),
        };
        let spec: ProbeSpec = match serde_json::from_str(raw) {
            Ok(spec) => spec,
            Err(e) => return fail(PB_ERR_JSON, &format!("probe_json: {e}")),
        };
        let trajectory = probe_trajectory(&spec);
        let response = if protocol_steps == 0 {
            simulate_response(&trajectory, &state.params.curve, &state.params.latch, draw_seed)
        } else {
            simulate_with_protocol(
                &trajectory,
                &state.params.curve,
                &state.params.latch,
                draw_seed,
                protocol_steps,
            )
        };
        let response = match response {
            Ok(text) => text,
            Err(e) => return fail(PB_ERR_COMPUTE, &e.to_string()),
        };
        let body = serde_json::json!({
            "trajectory_id": trajectory.id,
            "expected_signal": trajectory.expected_signal,
            "response": response,
        });
        let encoded = match serde_json::to_string(&body) {
            Ok(encoded) => encoded,
            Err(e) => return fail(PB_ERR_COMPUTE, &e.to_string()),
        };
        match CString::new(encoded) {
            Ok(cstring) => {
                *out = cstring.into_raw();
                PB_OK
            }
            Err(e) => fail(PB_ERR_COMPUTE, &e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_static_and_nul_terminated() {
        let ptr = pb_version();
        let s = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap();
        assert_eq!(s, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_args_are_rejected_with_message() {
        let code = unsafe { pb_apa(1, 2, std::ptr::null_mut()) };
        assert_eq!(code, PB_ERR_NULL_ARG);
        let msg = unsafe { CStr::from_ptr(pb_last_error()) }.to_str().unwrap();
        assert!(!msg.is_empty());
    }
}
