//! C interface to hsigen.
//!
//! Objects cross the boundary as opaque handles created by `*_new` / `*_load`
//! functions and released by the matching `*_free`. Every fallible call
//! returns an [`HsigenStatus`]; on failure the message is kept per thread
//! and can be copied out with [`hsigen_last_error`]. Panics are caught and
//! reported as `HSIGEN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hsigen::body::write_obj;
use hsigen::generator::{load_checkpoint, Generator, GeneratorConfig, GeneratorError};
use hsigen::pipeline::{
    contact_score, generate_interaction, non_collision_score, run_mhsi, Interaction, PipelineConfig, PipelineError,
};
use hsigen::scene::{build_scene, Scene};
use hsigen::textparse::parse_description;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsigenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Match = 4,
    Generate = 5,
    Optimize = 6,
    Scene = 7,
    Io = 8,
    Config = 9,
    Metric = 10,
    OutOfRange = 11,
    Panic = 12,
}

/// A validated scene.
pub struct HsigenScene(Scene);

/// A generator network with its weights.
pub struct HsigenGenerator(Generator);

/// One placed person.
pub struct HsigenInteraction(Interaction);

/// The people of a multi-person run, accepted or not.
pub struct HsigenMhsi(Vec<Interaction>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(HsigenStatus, String);

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Parse(_) | PipelineError::NotSinglePerson(_) => HsigenStatus::Parse,
            PipelineError::Match(_) => HsigenStatus::Match,
            PipelineError::Generate(_) | PipelineError::Body(_) => HsigenStatus::Generate,
            PipelineError::Optimize(_) => HsigenStatus::Optimize,
            PipelineError::Scene(_) => HsigenStatus::Scene,
            PipelineError::Io(_) | PipelineError::Dataset(_) => HsigenStatus::Io,
            PipelineError::Config(_) => HsigenStatus::Config,
            PipelineError::Metric(_) => HsigenStatus::Metric,
        };
        Failure(status, e.to_string())
    }
}

impl From<GeneratorError> for Failure {
    fn from(e: GeneratorError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(HsigenStatus::Io, e.to_string())
    }
}

fn fail(status: HsigenStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, recording its error message and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HsigenStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (HsigenStatus::Ok, String::new()),
        Ok(Err(Failure(s, m))) => (s, m),
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (HsigenStatus::Panic, m)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(HsigenStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(HsigenStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| fail(HsigenStatus::NullPointer, "null handle"))
}

unsafe fn out<'a, T>(o: *mut T) -> Result<&'a mut T, Failure> {
    o.as_mut().ok_or_else(|| fail(HsigenStatus::NullPointer, "null output pointer"))
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hsigen_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a scene from a scene document.
///
/// # Safety
/// `document` must be a NUL-terminated string; `scene` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_scene_new(document: *const c_char, scene: *mut *mut HsigenScene) -> HsigenStatus {
    guard(|| {
        let slot = out(scene)?;
        let s = build_scene(text(document)?).map_err(|e| PipelineError::from(e))?;
        *slot = Box::into_raw(Box::new(HsigenScene(s)));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or come from [`hsigen_scene_new`].
#[no_mangle]
pub unsafe extern "C" fn hsigen_scene_free(scene: *mut HsigenScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Creates an untrained generator: the default size, or the small test
/// size when `tiny` is true.
///
/// # Safety
/// `generator` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_generator_new(seed: u64, tiny: bool, generator: *mut *mut HsigenGenerator) -> HsigenStatus {
    guard(|| {
        let slot = out(generator)?;
        let cfg = if tiny { GeneratorConfig::tiny() } else { GeneratorConfig::default() };
        *slot = Box::into_raw(Box::new(HsigenGenerator(Generator::new(cfg, seed)?)));
        Ok(())
    })
}

/// Loads a generator checkpoint written by `hsigen train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `generator` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_generator_load(path: *const c_char, generator: *mut *mut HsigenGenerator) -> HsigenStatus {
    guard(|| {
        let slot = out(generator)?;
        let g = load_checkpoint(File::open(text(path)?)?)?;
        *slot = Box::into_raw(Box::new(HsigenGenerator(g)));
        Ok(())
    })
}

/// # Safety
/// `generator` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn hsigen_generator_free(generator: *mut HsigenGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Number of people described by `description`.
///
/// # Safety
/// `description` must be a NUL-terminated string; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_count_people(description: *const c_char, count: *mut usize) -> HsigenStatus {
    guard(|| {
        let slot = out(count)?;
        *slot = parse_description(text(description)?).map_err(PipelineError::from)?.len();
        Ok(())
    })
}

/// Generates and refines one person with the default pipeline settings.
///
/// # Safety
/// Handles must be valid; `description` must be a NUL-terminated string;
/// `interaction` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_generate(
    generator: *const HsigenGenerator,
    scene: *const HsigenScene,
    description: *const c_char,
    seed: u64,
    interaction: *mut *mut HsigenInteraction,
) -> HsigenStatus {
    guard(|| {
        let slot = out(interaction)?;
        let (g, s) = (handle(generator)?, handle(scene)?);
        let cfg = PipelineConfig::default();
        let it = generate_interaction(&g.0, &s.0, text(description)?, seed, &cfg.optimize.weights, &cfg)?;
        *slot = Box::into_raw(Box::new(HsigenInteraction(it)));
        Ok(())
    })
}

/// # Safety
/// `interaction` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_free(interaction: *mut HsigenInteraction) {
    if !interaction.is_null() {
        drop(Box::from_raw(interaction));
    }
}

/// Whether the person passed the loss threshold and relation checks.
///
/// # Safety
/// `interaction` must be valid and `accepted` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_accepted(interaction: *const HsigenInteraction, accepted: *mut bool) -> HsigenStatus {
    guard(|| {
        *out(accepted)? = handle(interaction)?.0.accepted;
        Ok(())
    })
}

/// Weighted total loss after refinement.
///
/// # Safety
/// `interaction` must be valid and `total` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_total_loss(interaction: *const HsigenInteraction, total: *mut f64) -> HsigenStatus {
    guard(|| {
        *out(total)? = handle(interaction)?.0.total;
        Ok(())
    })
}

/// Copies the body vertices as xyz triples into `xyz`, which holds `len`
/// doubles. `count` receives the vertex count; pass a null `xyz` to query it.
///
/// # Safety
/// `xyz` must be null or point to `len` writable doubles; `count` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_vertices(
    interaction: *const HsigenInteraction,
    xyz: *mut f64,
    len: usize,
    count: *mut usize,
) -> HsigenStatus {
    guard(|| {
        let verts = &handle(interaction)?.0.mesh.vertices;
        *out(count)? = verts.len();
        if xyz.is_null() {
            return Ok(());
        }
        if len < 3 * verts.len() {
            return Err(fail(HsigenStatus::OutOfRange, format!("buffer holds {len} doubles, need {}", 3 * verts.len())));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, 3 * verts.len());
        for (d, v) in dst.chunks_exact_mut(3).zip(verts) {
            d.copy_from_slice(&[v.x, v.y, v.z]);
        }
        Ok(())
    })
}

/// Contact and non-collision scores of the refined body in `scene`.
///
/// # Safety
/// Handles must be valid; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_scores(
    interaction: *const HsigenInteraction,
    scene: *const HsigenScene,
    contact_eps: f64,
    contact: *mut f64,
    non_collision: *mut f64,
) -> HsigenStatus {
    guard(|| {
        let (it, s) = (handle(interaction)?, handle(scene)?);
        let (c, n) = (out(contact)?, out(non_collision)?);
        *c = contact_score(&it.0.mesh, &s.0, contact_eps)?;
        *n = non_collision_score(&it.0.mesh, &s.0);
        Ok(())
    })
}

/// Writes the body as a Wavefront OBJ file.
///
/// # Safety
/// `interaction` must be valid; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_write_obj(interaction: *const HsigenInteraction, path: *const c_char) -> HsigenStatus {
    guard(|| {
        let it = handle(interaction)?;
        let mut w = BufWriter::new(File::create(text(path)?)?);
        write_obj(&it.0.mesh, &mut w)?;
        Ok(())
    })
}

/// Writes the interaction record (binding, losses, flags, parameters) as JSON.
///
/// # Safety
/// `interaction` must be valid; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hsigen_interaction_write_json(interaction: *const HsigenInteraction, path: *const c_char) -> HsigenStatus {
    guard(|| {
        let it = handle(interaction)?;
        let w = BufWriter::new(File::create(text(path)?)?);
        serde_json::to_writer_pretty(w, &it.0.record()).map_err(|e| fail(HsigenStatus::Io, e.to_string()))
    })
}

/// Places every person of `description` in turn. People that fail before
/// a body exists are left out; see the log for their errors.
///
/// # Safety
/// Handles must be valid; `description` a NUL-terminated string; `mhsi` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_mhsi(
    generator: *const HsigenGenerator,
    scene: *const HsigenScene,
    description: *const c_char,
    seed: u64,
    mhsi: *mut *mut HsigenMhsi,
) -> HsigenStatus {
    guard(|| {
        let slot = out(mhsi)?;
        let (g, s) = (handle(generator)?, handle(scene)?);
        let cfg = PipelineConfig::default();
        let outcome = run_mhsi(&g.0, &s.0, text(description)?, seed, &cfg.optimize.weights, &cfg)?;
        *slot = Box::into_raw(Box::new(HsigenMhsi(outcome.interactions)));
        Ok(())
    })
}

/// Number of placed people.
///
/// # Safety
/// `mhsi` must be valid and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_mhsi_len(mhsi: *const HsigenMhsi, count: *mut usize) -> HsigenStatus {
    guard(|| {
        *out(count)? = handle(mhsi)?.0.len();
        Ok(())
    })
}

/// Copies the `index`-th person into a new interaction handle, to be
/// released with [`hsigen_interaction_free`].
///
/// # Safety
/// `mhsi` must be valid and `interaction` writable.
#[no_mangle]
pub unsafe extern "C" fn hsigen_mhsi_get(mhsi: *const HsigenMhsi, index: usize, interaction: *mut *mut HsigenInteraction) -> HsigenStatus {
    guard(|| {
        let slot = out(interaction)?;
        let all = &handle(mhsi)?.0;
        let it = all.get(index).ok_or_else(|| fail(HsigenStatus::OutOfRange, format!("index {index} of {}", all.len())))?;
        *slot = Box::into_raw(Box::new(HsigenInteraction(it.clone())));
        Ok(())
    })
}

/// # Safety
/// `mhsi` must be null or come from [`hsigen_mhsi`].
#[no_mangle]
pub unsafe extern "C" fn hsigen_mhsi_free(mhsi: *mut HsigenMhsi) {
    if !mhsi.is_null() {
        drop(Box::from_raw(mhsi));
    }
}
