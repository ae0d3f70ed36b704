//! C ABI for the ribbon simulation library.
//!
//! Handles are opaque; every function returns a status code and reports
//! detail through `rf_last_error`. All functions are safe to call from any
//! thread, but a handle must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ribbonflow::config::{Preset, RunConfig};
use ribbonflow::fe::assemble_matrices;
use ribbonflow::flow::FlowDriver;
use ribbonflow::frames::discretize_initial;
use ribbonflow::mesh::Mesh;
use ribbonflow::vec3;

/// ABI revision; bumped on any breaking change to this header.
pub const RF_ABI_VERSION: u32 = 1;

/// Status code returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Energy breakdown of the current state, all components in energy units.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RfEnergy {
    pub total: f64,
    pub bend: f64,
    pub twist: f64,
    pub psi: f64,
    pub penalty1: f64,
    pub penalty2: f64,
    pub pure_bend: f64,
    pub pure_twist: f64,
}

/// Opaque simulation handle.
pub struct RfSimulation {
    config: RunConfig,
    driver: Option<FlowDriver>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> RfStatus>(body: F) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RfStatus::Panic
        }
    }
}

impl RfSimulation {
    fn ensure_driver(&mut self) -> Result<&mut FlowDriver, String> {
        if self.driver.is_none() {
            let params = self.config.flow_params().map_err(|e| e.to_string())?;
            let mesh = Mesh::uniform(self.config.preset.length(), self.config.n)
                .map_err(|e| e.to_string())?;
            let (curve, director) = self.config.preset.samplers();
            let (initial, bc) =
                discretize_initial(&curve, &director, &mesh).map_err(|e| e.to_string())?;
            let matrices = assemble_matrices(&mesh);
            let driver =
                FlowDriver::new(&initial, &bc, &params, &matrices).map_err(|e| e.to_string())?;
            self.driver = Some(driver);
        }
        Ok(self.driver.as_mut().unwrap())
    }
}

/// ABI revision of this library.
#[no_mangle]
pub extern "C" fn rf_abi_version() -> u32 {
    RF_ABI_VERSION
}

/// Message describing the most recent failure on the calling thread. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Create a simulation for a named preset ("moebius" or "helix") on a
/// uniform mesh with `n` elements. The default parameter schedule applies
/// until overridden via `rf_simulation_set_param`.
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_new(
    preset: *const c_char,
    n: u32,
    out: *mut *mut RfSimulation,
) -> RfStatus {
    guard(|| {
        if preset.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RfStatus::NullPointer;
        }
        let name = match unsafe { CStr::from_ptr(preset) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("preset is not valid UTF-8");
                return RfStatus::InvalidArgument;
            }
        };
        let preset = match Preset::parse(name) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return RfStatus::InvalidArgument;
            }
        };
        if n < 2 {
            set_error(format!("need at least 2 elements, got {n}"));
            return RfStatus::InvalidArgument;
        }
        let sim = Box::new(RfSimulation {
            config: RunConfig::new(preset, n as usize),
            driver: None,
        });
        unsafe { *out = Box::into_raw(sim) };
        RfStatus::Ok
    })
}

/// Override one scalar parameter before the first step. Keys: "tau",
/// "delta", "eps1", "eps2", "horizon", "steps", "eps_stop".
///
/// # Safety
/// `sim` must come from `rf_simulation_new` and `key` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_set_param(
    sim: *mut RfSimulation,
    key: *const c_char,
    value: f64,
) -> RfStatus {
    guard(|| {
        if sim.is_null() || key.is_null() {
            set_error("null pointer argument");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        if sim.driver.is_some() {
            set_error("parameters are frozen once the simulation has started");
            return RfStatus::InvalidArgument;
        }
        let key = match unsafe { CStr::from_ptr(key) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("key is not valid UTF-8");
                return RfStatus::InvalidArgument;
            }
        };
        let outcome = match key {
            "steps" => {
                if value < 0.0 || value.fract() != 0.0 {
                    Err(format!("steps must be a nonnegative integer, got {value}"))
                } else {
                    sim.config.steps = Some(value as usize);
                    sim.config.horizon = None;
                    Ok(())
                }
            }
            "horizon" => {
                sim.config.horizon = Some(value);
                sim.config.steps = None;
                Ok(())
            }
            "tau" => {
                sim.config.tau = Some(value);
                Ok(())
            }
            "delta" => {
                sim.config.delta = Some(value);
                Ok(())
            }
            "eps1" => {
                sim.config.eps1 = Some(value);
                Ok(())
            }
            "eps2" => {
                sim.config.eps2 = Some(value);
                Ok(())
            }
            "eps_stop" => {
                sim.config.eps_stop = Some(value);
                Ok(())
            }
            other => Err(format!("unknown parameter `{other}`")),
        };
        match outcome.and_then(|()| {
            sim.config
                .flow_params()
                .map(|_| ())
                .map_err(|e| e.to_string())
        }) {
            Ok(()) => RfStatus::Ok,
            Err(e) => {
                set_error(e);
                RfStatus::InvalidArgument
            }
        }
    })
}

/// Advance by up to `max_steps` iterations (stopping early at the budget or
/// the configured tolerance) and report how many were actually performed.
///
/// # Safety
/// `sim` must come from `rf_simulation_new`; `completed` may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_advance(
    sim: *mut RfSimulation,
    max_steps: u64,
    completed: *mut u64,
) -> RfStatus {
    guard(|| {
        if sim.is_null() {
            set_error("null simulation handle");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        let driver = match sim.ensure_driver() {
            Ok(d) => d,
            Err(e) => {
                set_error(e);
                return RfStatus::InvalidArgument;
            }
        };
        let mut done = 0u64;
        for _ in 0..max_steps {
            match driver.advance() {
                Ok(Some(_)) => done += 1,
                Ok(None) => break,
                Err(e) => {
                    set_error(e.to_string());
                    return RfStatus::SolverFailure;
                }
            }
        }
        if !completed.is_null() {
            unsafe { *completed = done };
        }
        RfStatus::Ok
    })
}

/// Energy breakdown of the current state.
///
/// # Safety
/// `sim` must come from `rf_simulation_new` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_energy(
    sim: *mut RfSimulation,
    out: *mut RfEnergy,
) -> RfStatus {
    guard(|| {
        if sim.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        let driver = match sim.ensure_driver() {
            Ok(d) => d,
            Err(e) => {
                set_error(e);
                return RfStatus::InvalidArgument;
            }
        };
        let e = driver.energy();
        unsafe {
            *out = RfEnergy {
                total: e.total,
                bend: e.bend,
                twist: e.twist,
                psi: e.psi,
                penalty1: e.penalty1,
                penalty2: e.penalty2,
                pure_bend: e.pure_bend(),
                pure_twist: e.pure_twist(),
            };
        }
        RfStatus::Ok
    })
}

/// Number of mesh nodes (N + 1).
///
/// # Safety
/// `sim` must come from `rf_simulation_new` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_node_count(
    sim: *mut RfSimulation,
    out: *mut u32,
) -> RfStatus {
    guard(|| {
        if sim.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        unsafe { *out = (sim.config.n + 1) as u32 };
        RfStatus::Ok
    })
}

/// Copy the nodal frame into `buffer` as 13 doubles per node:
/// x, y, y', b, and the reconstructed normal d = y' x b.
/// `len` is the buffer length in doubles and must be at least 13 (N + 1).
///
/// # Safety
/// `sim` must come from `rf_simulation_new`; `buffer` must point to at
/// least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_frame(
    sim: *mut RfSimulation,
    buffer: *mut f64,
    len: usize,
) -> RfStatus {
    guard(|| {
        if sim.is_null() || buffer.is_null() {
            set_error("null pointer argument");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        let needed = 13 * (sim.config.n + 1);
        if len < needed {
            set_error(format!("buffer holds {len} doubles, need {needed}"));
            return RfStatus::BufferTooSmall;
        }
        let driver = match sim.ensure_driver() {
            Ok(d) => d,
            Err(e) => {
                set_error(e);
                return RfStatus::InvalidArgument;
            }
        };
        let state = driver.state();
        let mesh = state.mesh();
        let out = unsafe { std::slice::from_raw_parts_mut(buffer, needed) };
        for j in 0..mesh.node_count() {
            let y = state.y.node_value(j);
            let dy = state.y.node_derivative(j);
            let b = state.b.node_value(j);
            let d = vec3::cross(dy, b);
            let row = &mut out[13 * j..13 * (j + 1)];
            row[0] = mesh.node(j);
            row[1..4].copy_from_slice(&y);
            row[4..7].copy_from_slice(&dy);
            row[7..10].copy_from_slice(&b);
            row[10..13].copy_from_slice(&d);
        }
        RfStatus::Ok
    })
}

/// Maximal nodal violations of the unit-length constraints.
///
/// # Safety
/// `sim` must come from `rf_simulation_new`; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_drift(
    sim: *mut RfSimulation,
    drift_y: *mut f64,
    drift_b: *mut f64,
) -> RfStatus {
    guard(|| {
        if sim.is_null() {
            set_error("null simulation handle");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        let driver = match sim.ensure_driver() {
            Ok(d) => d,
            Err(e) => {
                set_error(e);
                return RfStatus::InvalidArgument;
            }
        };
        let (dy, db) = driver.state().check_nodal_constraints();
        if !drift_y.is_null() {
            unsafe { *drift_y = dy };
        }
        if !drift_b.is_null() {
            unsafe { *drift_b = db };
        }
        RfStatus::Ok
    })
}

/// Completed and planned iteration counts.
///
/// # Safety
/// `sim` must come from `rf_simulation_new`; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_progress(
    sim: *mut RfSimulation,
    completed: *mut u64,
    planned: *mut u64,
) -> RfStatus {
    guard(|| {
        if sim.is_null() {
            set_error("null simulation handle");
            return RfStatus::NullPointer;
        }
        let sim = unsafe { &mut *sim };
        let driver = match sim.ensure_driver() {
            Ok(d) => d,
            Err(e) => {
                set_error(e);
                return RfStatus::InvalidArgument;
            }
        };
        if !completed.is_null() {
            unsafe { *completed = driver.steps_completed() as u64 };
        }
        if !planned.is_null() {
            unsafe { *planned = driver.planned_steps() as u64 };
        }
        RfStatus::Ok
    })
}

/// Destroy a handle; a null pointer is a no-op.
///
/// # Safety
/// `sim` must come from `rf_simulation_new` and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn rf_simulation_free(sim: *mut RfSimulation) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}
