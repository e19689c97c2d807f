//! C ABI over the geogate library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `gg_*_free`. Every fallible call returns a [`GgStatus`];
//! on failure the message is kept per thread and can be read with
//! [`gg_last_error_length`] and [`gg_last_error_message`]. Panics never
//! unwind into the caller; they surface as `GG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use geogate::engine::{bessel_j, propagate_qubit};
use geogate::gates::{build_condition_i, build_condition_ii, build_condition_iii, su2_infidelity, GateRecipe, GateTarget};
use geogate::robustness::{sweep_intermediate, ErrorModel, FidelityGrid};
use geogate::synthesis::{ControlPulse, SynthesisConfig};
use geogate::twoqubit::{iswap_fidelity, IswapDesign, SimOptions, TwoQubitMetric, TwoQubitParams};
use geogate::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GgStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Bad argument or configuration (exit code 1 on the command line).
    InvalidArgument = 2,
    /// Solver or physics failure (exit code 2 on the command line).
    PhysicsFailure = 3,
    Io = 4,
    /// An index was outside the object.
    OutOfBounds = 5,
    Panic = 6,
}

/// Condition-(i), (ii) or (iii) recipe for a single-qubit gate.
pub struct GgRecipe(GateRecipe);

/// Sampled control pulse.
pub struct GgPulse(ControlPulse);

/// Two-dimensional fidelity sweep.
pub struct GgGrid(FidelityGrid);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Failures inside the wrappers before they are mapped onto status codes.
enum Fail {
    Null(&'static str),
    Bounds(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> GgStatus {
    match e {
        Error::Io(_) => GgStatus::Io,
        e if e.is_physics_failure() => GgStatus::PhysicsFailure,
        _ => GgStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> GgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GgStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GgStatus::NullPointer
        }
        Ok(Err(Fail::Bounds(msg))) => {
            set_error(msg);
            GgStatus::OutOfBounds
        }
        Ok(Err(Fail::Core(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            GgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidConfig(format!("{what} is not valid UTF-8"))))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn gate(text: &str) -> Result<GateTarget, Fail> {
    Ok(GateTarget::parse(text)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, without the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn gg_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let borrowed = e.borrow();
        let bytes = borrowed.as_ref().map_or(&[][..], |c| c.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Bessel function `J_k(x)` for `|k| <= 64`, `|x| <= 50`.
///
/// # Safety
/// `value` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn gg_bessel_j(k: i32, x: f64, value: *mut f64) -> GgStatus {
    guard(|| {
        *out(value, "value")? = bessel_j(k, x)?;
        Ok(())
    })
}

/// Condition-(i) recipe with start latitude `chi0` and intermediate
/// latitudes `chi1`, `chi2` (radians). `gate` uses the notation `h`,
/// `rx:pi`, `rz:pi/4`.
///
/// # Safety
/// `gate` must be a NUL-terminated string; `recipe` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_condition_i(
    gate: *const c_char,
    chi0: f64,
    chi1: f64,
    chi2: f64,
    recipe: *mut *mut GgRecipe,
) -> GgStatus {
    guard(|| {
        let slot = out(recipe, "recipe")?;
        let r = build_condition_i(&self::gate(text(gate, "gate")?)?, chi0, chi1, chi2)?;
        *slot = Box::into_raw(Box::new(GgRecipe(r)));
        Ok(())
    })
}

/// Condition-(ii) recipe found by the built-in solver.
///
/// # Safety
/// As [`gg_recipe_condition_i`].
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_condition_ii(gate: *const c_char, recipe: *mut *mut GgRecipe) -> GgStatus {
    guard(|| {
        let slot = out(recipe, "recipe")?;
        let r = build_condition_ii(&self::gate(text(gate, "gate")?)?, None)?;
        *slot = Box::into_raw(Box::new(GgRecipe(r)));
        Ok(())
    })
}

/// Condition-(iii) recipe starting at latitude `chi0`.
///
/// # Safety
/// As [`gg_recipe_condition_i`].
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_condition_iii(gate: *const c_char, chi0: f64, recipe: *mut *mut GgRecipe) -> GgStatus {
    guard(|| {
        let slot = out(recipe, "recipe")?;
        let r = build_condition_iii(&self::gate(text(gate, "gate")?)?, chi0)?;
        *slot = Box::into_raw(Box::new(GgRecipe(r)));
        Ok(())
    })
}

/// Infidelity of the recipe's ideal boundary operator against its target.
///
/// # Safety
/// `recipe` must come from a `gg_recipe_*` constructor; `value` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_infidelity(recipe: *const GgRecipe, value: *mut f64) -> GgStatus {
    guard(|| {
        let r = handle(recipe, "recipe")?;
        *out(value, "value")? = r.0.infidelity;
        Ok(())
    })
}

/// Release a recipe; null is ignored.
///
/// # Safety
/// `recipe` must be null or an unreleased handle.
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_free(recipe: *mut GgRecipe) {
    if !recipe.is_null() {
        drop(Box::from_raw(recipe));
    }
}

/// Synthesize the pulse of a recipe. `omega_max` is in rad/µs,
/// `detuning_ratio >= 1` bounds the latitude detuning.
///
/// # Safety
/// `recipe` must be a live handle; `pulse` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_recipe_synthesize(
    recipe: *const GgRecipe,
    omega_max: f64,
    samples_per_segment: usize,
    detuning_ratio: f64,
    pulse: *mut *mut GgPulse,
) -> GgStatus {
    guard(|| {
        let r = handle(recipe, "recipe")?;
        let slot = out(pulse, "pulse")?;
        let cfg = SynthesisConfig::new(omega_max)
            .with_samples(samples_per_segment)
            .with_detuning_ratio(detuning_ratio);
        *slot = Box::into_raw(Box::new(GgPulse(r.0.pulse(&cfg)?)));
        Ok(())
    })
}

/// Number of samples and sample spacing (µs) of a pulse.
///
/// # Safety
/// `pulse` must be a live handle; `n` and `dt` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_pulse_shape(pulse: *const GgPulse, n: *mut usize, dt: *mut f64) -> GgStatus {
    guard(|| {
        let p = handle(pulse, "pulse")?;
        *out(n, "n")? = p.0.n;
        *out(dt, "dt")? = p.0.dt;
        Ok(())
    })
}

/// Copy the `(omega, phi, delta)` samples into caller arrays of length `len`,
/// which must equal the pulse length. Any array may be null to skip it.
///
/// # Safety
/// Non-null arrays must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gg_pulse_samples(
    pulse: *const GgPulse,
    omega: *mut f64,
    phi: *mut f64,
    delta: *mut f64,
    len: usize,
) -> GgStatus {
    guard(|| {
        let p = &handle(pulse, "pulse")?.0;
        if len != p.n {
            return Err(Fail::Bounds(format!("buffer length {len} differs from pulse length {}", p.n)));
        }
        for (src, dst) in [(&p.omega, omega), (&p.phi, phi), (&p.delta, delta)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
            }
        }
        Ok(())
    })
}

/// Propagate a pulse on a two-level system and compare with `gate`.
///
/// # Safety
/// `pulse` must be a live handle, `gate` a NUL-terminated string, `value`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gg_pulse_gate_infidelity(pulse: *const GgPulse, gate: *const c_char, value: *mut f64) -> GgStatus {
    guard(|| {
        let p = handle(pulse, "pulse")?;
        let g = self::gate(text(gate, "gate")?)?;
        let ideal = g
            .su2()
            .ok_or_else(|| Fail::Core(Error::InvalidConfig("gate is not a single-qubit gate".into())))?;
        *out(value, "value")? = su2_infidelity(&ideal, &propagate_qubit(&p.0));
        Ok(())
    })
}

/// Write a pulse as JSON.
///
/// # Safety
/// `pulse` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gg_pulse_write_json(pulse: *const GgPulse, path: *const c_char) -> GgStatus {
    guard(|| {
        let p = handle(pulse, "pulse")?;
        p.0.write_json(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Release a pulse; null is ignored.
///
/// # Safety
/// `pulse` must be null or an unreleased handle.
#[no_mangle]
pub unsafe extern "C" fn gg_pulse_free(pulse: *mut GgPulse) {
    if !pulse.is_null() {
        drop(Box::from_raw(pulse));
    }
}

/// Fidelity over the intermediate latitudes of condition-(i) recipes for
/// `gate` under systematic and ZZ errors of relative `strength`.
///
/// # Safety
/// `gate` must be a NUL-terminated string; `grid` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_sweep_intermediate(
    gate: *const c_char,
    grid_n: usize,
    strength: f64,
    seed: u64,
    omega_max: f64,
    samples_per_segment: usize,
    detuning_ratio: f64,
    grid: *mut *mut GgGrid,
) -> GgStatus {
    guard(|| {
        let slot = out(grid, "grid")?;
        let g = self::gate(text(gate, "gate")?)?;
        let cfg = SynthesisConfig::new(omega_max)
            .with_samples(samples_per_segment)
            .with_detuning_ratio(detuning_ratio);
        let em = ErrorModel::new(strength, strength, seed);
        *slot = Box::into_raw(Box::new(GgGrid(sweep_intermediate(&g, grid_n, &em, &cfg)?)));
        Ok(())
    })
}

/// Read a grid from its CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `grid` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_read_csv(path: *const c_char, grid: *mut *mut GgGrid) -> GgStatus {
    guard(|| {
        let slot = out(grid, "grid")?;
        let g = FidelityGrid::read_csv(&PathBuf::from(text(path, "path")?))?;
        *slot = Box::into_raw(Box::new(GgGrid(g)));
        Ok(())
    })
}

/// Number of points on each axis.
///
/// # Safety
/// `grid` must be a live handle; `n1`, `n2` writable.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_shape(grid: *const GgGrid, n1: *mut usize, n2: *mut usize) -> GgStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        *out(n1, "n1")? = g.axis1.values.len();
        *out(n2, "n2")? = g.axis2.values.len();
        Ok(())
    })
}

/// Axis coordinates and fidelity of cell `(i, j)`.
///
/// # Safety
/// `grid` must be a live handle; output pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_cell(
    grid: *const GgGrid,
    i: usize,
    j: usize,
    a1: *mut f64,
    a2: *mut f64,
    fidelity: *mut f64,
) -> GgStatus {
    guard(|| {
        let g = &handle(grid, "grid")?.0;
        let f = g
            .fidelity
            .get(i)
            .and_then(|row| row.get(j))
            .ok_or_else(|| Fail::Bounds(format!("cell ({i}, {j}) is outside the grid")))?;
        for (dst, v) in [(a1, g.axis1.values[i]), (a2, g.axis2.values[j]), (fidelity, *f)] {
            if let Some(d) = dst.as_mut() {
                *d = v;
            }
        }
        Ok(())
    })
}

/// Best cell of the grid.
///
/// # Safety
/// `grid` must be a live handle; output pointers writable or null.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_argmax(grid: *const GgGrid, i: *mut usize, j: *mut usize, fidelity: *mut f64) -> GgStatus {
    guard(|| {
        let (bi, bj, f) = handle(grid, "grid")?.0.argmax();
        if let Some(d) = i.as_mut() {
            *d = bi;
        }
        if let Some(d) = j.as_mut() {
            *d = bj;
        }
        if let Some(d) = fidelity.as_mut() {
            *d = f;
        }
        Ok(())
    })
}

/// Write the grid as CSV next to its JSON manifest.
///
/// # Safety
/// `grid` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_write_csv(grid: *const GgGrid, path: *const c_char) -> GgStatus {
    guard(|| {
        let g = handle(grid, "grid")?;
        g.0.write_csv(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// Release a grid; null is ignored.
///
/// # Safety
/// `grid` must be null or an unreleased handle.
#[no_mangle]
pub unsafe extern "C" fn gg_grid_free(grid: *mut GgGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// iSWAP fidelity of the default two-transmon device at qubit splitting
/// `delta1` (rad/µs) and peak modulation depth `beta`. Dissipative runs are
/// scored over product states, closed runs by the trace fidelity; both allow
/// local Z corrections.
///
/// # Safety
/// `fidelity` and `leakage` must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn gg_iswap_fidelity(
    delta1: f64,
    beta: f64,
    with_decoherence: bool,
    fidelity: *mut f64,
    leakage: *mut f64,
) -> GgStatus {
    guard(|| {
        let base = TwoQubitParams::default();
        let base = if with_decoherence { base } else { base.closed() };
        let p = TwoQubitParams { beta, ..base.with_delta1(delta1) };
        let opts = SimOptions { decoherence: with_decoherence, ..SimOptions::default() };
        let metric = if with_decoherence { TwoQubitMetric::ProductStates } else { TwoQubitMetric::Trace };
        let (fit, res) = iswap_fidelity(&p, &IswapDesign::default(), &opts, metric)?;
        if let Some(d) = fidelity.as_mut() {
            *d = fit.fidelity;
        }
        if let Some(d) = leakage.as_mut() {
            *d = res.leakage;
        }
        Ok(())
    })
}
