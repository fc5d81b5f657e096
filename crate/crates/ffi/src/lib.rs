//! C ABI for `featurelab`.
//!
//! Models, generators, posteriors and allocations are opaque handles created
//! by `fl_*_new`/`fl_*_parse`/`fl_*` constructors and released with the
//! matching `fl_*_free`. Every fallible call returns an [`FlStatus`]; on a
//! non-zero status `fl_last_error_message` describes the failure on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use featurelab::alloc::{FeatureAllocation, Partition, SuffStats};
use featurelab::numerics::tabulated::TabulatedDensity;
use featurelab::schema::Model;
use featurelab::{crm, sp, species, EvalConfig, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed text or an argument outside the model's domain.
    InvalidArgument = 2,
    /// Quadrature did not converge or a posterior degenerated.
    NumericFailure = 3,
    /// The operation does not apply to this kind of model.
    WrongModelKind = 4,
    RecursionViolated = 5,
    /// An output buffer is shorter than required.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Kinds reported by `fl_model_kind`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlModelKind {
    Crm = 0,
    ScaledProcess = 1,
    Species = 2,
}

/// A parsed model together with its numerical settings.
pub struct FlModel {
    model: Model,
    cfg: EvalConfig,
}

/// A seeded ChaCha20 generator.
pub struct FlRng(ChaCha20Rng);

/// A tabulated posterior density of the scale.
pub struct FlPosterior(TabulatedDensity);

/// A feature allocation (or, for species models, a partition stored as one
/// feature per customer).
pub struct FlAllocation(FeatureAllocation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> FlStatus {
    match e {
        e if e.is_numeric_failure() => FlStatus::NumericFailure,
        Error::UnsupportedIntensity(_) => FlStatus::WrongModelKind,
        Error::RecursionViolated { .. } => FlStatus::RecursionViolated,
        _ => FlStatus::InvalidArgument,
    }
}

struct Fail(FlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FlStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> FlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FlStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FlStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn wrong_kind(op: &str) -> Fail {
    Fail(FlStatus::WrongModelKind, format!("{op} does not apply to this model"))
}

unsafe fn stats(n: usize, m: *const usize, k: usize) -> Result<SuffStats, Fail> {
    Ok(SuffStats::new(n, slice(m, k, "m")?.to_vec())?)
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a model from JSON or shorthand text, with numerical settings from
/// `config_json` (null for defaults).
///
/// # Safety
/// `text` and a non-null `config_json` must be NUL-terminated strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_model_parse(text: *const c_char, config_json: *const c_char, out: *mut *mut FlModel) -> FlStatus {
    guard(|| {
        let model = Model::parse(c_str(text, "text")?)?;
        let cfg = if config_json.is_null() {
            EvalConfig::default()
        } else {
            let cfg: EvalConfig = serde_json::from_str(c_str(config_json, "config_json")?)
                .map_err(|e| Fail(FlStatus::InvalidArgument, format!("bad config: {e}")))?;
            cfg.validate()?;
            cfg
        };
        put(out, FlModel { model, cfg })
    })
}

/// # Safety
/// `model` must come from `fl_model_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_model_free(model: *mut FlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_model_kind(model: *const FlModel, out: *mut FlModelKind) -> FlStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        *as_mut(out, "out")? = match m.model {
            Model::Crm(_) => FlModelKind::Crm,
            Model::Sp(_) => FlModelKind::ScaledProcess,
            Model::Species(_) => FlModelKind::Species,
        };
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_rng_new(seed: u64, out: *mut *mut FlRng) -> FlStatus {
    guard(|| put(out, FlRng(ChaCha20Rng::seed_from_u64(seed))))
}

/// # Safety
/// `rng` must come from `fl_rng_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_rng_free(rng: *mut FlRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Predictive law of a CRM model, or of a scaled process conditioned on
/// `psi` (ignored for CRM models). `known_probs` receives `k` values.
///
/// # Safety
/// `m` points to `k` counts; `known_probs` to room for `k` values.
#[no_mangle]
pub unsafe extern "C" fn fl_predictive(
    model: *const FlModel,
    n: usize,
    m: *const usize,
    k: usize,
    psi: f64,
    new_rate: *mut f64,
    known_probs: *mut f64,
) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let s = stats(n, m, k)?;
        let law = match &h.model {
            Model::Crm(lam) => crm::predictive(lam, &s, &h.cfg)?,
            Model::Sp(sm) => sp::conditional_predictive(sm, &s, psi, &h.cfg)?,
            Model::Species(_) => return Err(wrong_kind("fl_predictive")),
        };
        *as_mut(new_rate, "new_rate")? = law.new_rate;
        out_slice(known_probs, k, "known_probs")?.copy_from_slice(&law.known_probs);
        Ok(())
    })
}

/// Marginal new-feature pmf of a scaled process on `0..=y_max`, the mass
/// beyond `y_max`, and the marginal inclusion probabilities of the `k`
/// known features.
///
/// # Safety
/// `m` points to `k` counts, `pmf` to `y_max + 1` values, `known_means` to
/// `k` values.
#[no_mangle]
pub unsafe extern "C" fn fl_marginal_predictive(
    model: *const FlModel,
    n: usize,
    m: *const usize,
    k: usize,
    y_max: usize,
    pmf: *mut f64,
    tail_mass: *mut f64,
    known_means: *mut f64,
) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let Model::Sp(sm) = &h.model else {
            return Err(wrong_kind("fl_marginal_predictive"));
        };
        let law = sp::marginal_predictive(sm, &stats(n, m, k)?, Some(y_max), &h.cfg)?;
        let dst = out_slice(pmf, y_max + 1, "pmf")?;
        if law.new_pmf.len() > dst.len() {
            return Err(Fail(FlStatus::BufferTooSmall, "pmf buffer too small".into()));
        }
        dst.fill(0.0);
        dst[..law.new_pmf.len()].copy_from_slice(&law.new_pmf);
        *as_mut(tail_mass, "tail_mass")? = law.tail_mass;
        out_slice(known_means, k, "known_means")?.copy_from_slice(&law.known_means);
        Ok(())
    })
}

/// Species predictive given block sizes: `p_new` and one probability per
/// block in `p_old`.
///
/// # Safety
/// `blocks` and `p_old` point to `k` values.
#[no_mangle]
pub unsafe extern "C" fn fl_species_predictive(
    model: *const FlModel,
    blocks: *const usize,
    k: usize,
    p_new: *mut f64,
    p_old: *mut f64,
) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let Model::Species(g) = &h.model else {
            return Err(wrong_kind("fl_species_predictive"));
        };
        let b = slice(blocks, k, "blocks")?.to_vec();
        let part = Partition::new(b.iter().sum(), b)?;
        let law = species::gibbs_predictive(g, &part)?;
        *as_mut(p_new, "p_new")? = law.p_new;
        out_slice(p_old, k, "p_old")?.copy_from_slice(&law.p_old);
        Ok(())
    })
}

/// Posterior of the scale of a scaled-process model.
///
/// # Safety
/// `m` points to `k` counts; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_psi_posterior(
    model: *const FlModel,
    n: usize,
    m: *const usize,
    k: usize,
    out: *mut *mut FlPosterior,
) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let Model::Sp(sm) = &h.model else {
            return Err(wrong_kind("fl_psi_posterior"));
        };
        put(out, FlPosterior(sp::psi_posterior(sm, &stats(n, m, k)?, &h.cfg)?))
    })
}

/// Number of grid nodes in a posterior.
///
/// # Safety
/// `post` must be a live handle; `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_posterior_len(post: *const FlPosterior, len: *mut usize) -> FlStatus {
    guard(|| {
        *as_mut(len, "len")? = as_ref(post, "posterior")?.0.len();
        Ok(())
    })
}

/// Copies abscissae, density and cdf values. Any output pointer may be null
/// to skip it; the others need `len` entries.
///
/// # Safety
/// Non-null outputs must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn fl_posterior_values(
    post: *const FlPosterior,
    len: usize,
    a: *mut f64,
    density: *mut f64,
    cdf: *mut f64,
) -> FlStatus {
    guard(|| {
        let d = &as_ref(post, "posterior")?.0;
        if len < d.len() {
            return Err(Fail(FlStatus::BufferTooSmall, format!("need {} entries, got {len}", d.len())));
        }
        let n = d.len();
        if !a.is_null() {
            out_slice(a, n, "a")?.copy_from_slice(&d.grid);
        }
        if !density.is_null() {
            out_slice(density, n, "density")?.copy_from_slice(&d.density());
        }
        if !cdf.is_null() {
            out_slice(cdf, n, "cdf")?.copy_from_slice(&d.cdf);
        }
        Ok(())
    })
}

/// Inverse-CDF draw from a posterior.
///
/// # Safety
/// Handles must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_posterior_sample(post: *const FlPosterior, rng: *mut FlRng, out: *mut f64) -> FlStatus {
    guard(|| {
        let d = &as_ref(post, "posterior")?.0;
        let r = as_mut(rng, "rng")?;
        *as_mut(out, "out")? = sp::sample_psi_from(&mut r.0, d)?;
        Ok(())
    })
}

/// # Safety
/// `post` must come from `fl_psi_posterior` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_posterior_free(post: *mut FlPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// Draws `n` customers. Species models give one feature per block.
///
/// # Safety
/// Handles must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_sample(model: *const FlModel, rng: *mut FlRng, n: usize, out: *mut *mut FlAllocation) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let r = &mut as_mut(rng, "rng")?.0;
        let z = match &h.model {
            Model::Crm(lam) => crm::sample_allocation(r, lam, n, &h.cfg)?,
            Model::Sp(sm) => sp::sample_allocation(r, sm, n, &h.cfg)?,
            Model::Species(g) => {
                let labels = species::sample_labels(r, g, n)?;
                let k = labels.iter().map(|&l| l + 1).max().unwrap_or(0);
                let cols = (0..k).map(|b| (0..n).filter(|&j| labels[j] == b).collect()).collect();
                FeatureAllocation::from_columns(n, cols)?
            }
        };
        put(out, FlAllocation(z))
    })
}

/// Parses an allocation from JSON lines, one array of feature ids per
/// customer.
///
/// # Safety
/// `jsonl` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_parse(jsonl: *const c_char, out: *mut *mut FlAllocation) -> FlStatus {
    guard(|| {
        let (z, _) = FeatureAllocation::from_jsonl(c_str(jsonl, "jsonl")?)?;
        put(out, FlAllocation(z))
    })
}

/// Number of customers and features.
///
/// # Safety
/// `alloc` must be live; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_shape(alloc: *const FlAllocation, n: *mut usize, k: *mut usize) -> FlStatus {
    guard(|| {
        let z = &as_ref(alloc, "allocation")?.0;
        if !n.is_null() {
            *n = z.n();
        }
        if !k.is_null() {
            *k = z.k();
        }
        Ok(())
    })
}

/// Feature frequencies `m_i`, one per feature.
///
/// # Safety
/// `m` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_counts(alloc: *const FlAllocation, m: *mut usize, len: usize) -> FlStatus {
    guard(|| {
        let s = as_ref(alloc, "allocation")?.0.suff_stats();
        if len < s.m.len() {
            return Err(Fail(FlStatus::BufferTooSmall, format!("need {} entries, got {len}", s.m.len())));
        }
        out_slice(m, s.m.len(), "m")?.copy_from_slice(&s.m);
        Ok(())
    })
}

/// The allocation as JSON lines in a new string released with
/// `fl_string_free`.
///
/// # Safety
/// `alloc` must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_to_jsonl(alloc: *const FlAllocation, out: *mut *mut c_char) -> FlStatus {
    guard(|| {
        let s = as_ref(alloc, "allocation")?.0.to_jsonl();
        let c = CString::new(s).map_err(|e| Fail(FlStatus::InvalidArgument, e.to_string()))?;
        *as_mut(out, "out")? = c.into_raw();
        Ok(())
    })
}

/// Log probability of an allocation under a CRM or scaled-process model.
///
/// # Safety
/// Handles must be live; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_log_prob(model: *const FlModel, alloc: *const FlAllocation, out: *mut f64) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let z = &as_ref(alloc, "allocation")?.0;
        *as_mut(out, "out")? = match &h.model {
            Model::Crm(lam) => crm::allocation_log_prob(lam, z, &h.cfg)?,
            Model::Sp(sm) => sp::allocation_log_prob(sm, z, &h.cfg)?,
            Model::Species(_) => return Err(wrong_kind("fl_allocation_log_prob")),
        };
        Ok(())
    })
}

/// # Safety
/// `alloc` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_allocation_free(alloc: *mut FlAllocation) {
    if !alloc.is_null() {
        drop(Box::from_raw(alloc));
    }
}

/// Log probability of a label sequence under a species model.
///
/// # Safety
/// `labels` points to `n` values; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fl_eppf_log_prob(model: *const FlModel, labels: *const usize, n: usize, out: *mut f64) -> FlStatus {
    guard(|| {
        let h = as_ref(model, "model")?;
        let Model::Species(g) = &h.model else {
            return Err(wrong_kind("fl_eppf_log_prob"));
        };
        *as_mut(out, "out")? = species::eppf_log_prob(g, slice(labels, n, "labels")?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
