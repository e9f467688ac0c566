//! C ABI for rglab.
//!
//! Every function returns an [`RglabStatus`]; results go through out-pointers.
//! On failure, [`rglab_last_error`] holds a message for the calling thread.
//! Objects are opaque handles released with their `_free` function.
//! Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rglab::error::Error;
use rglab::graph::{sample_graph, shift_matrix, Graph};
use rglab::kernel::{KernelModel, ShiftKind};
use rglab::limit::LimitOperator;
use rglab::spectral::sym_eig;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RglabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    Shape = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RglabShift {
    /// `A / (n alpha)`.
    Adjacency = 0,
    /// `D^{-1/2} A D^{-1/2}`.
    Laplacian = 1,
}

impl From<RglabShift> for ShiftKind {
    fn from(s: RglabShift) -> Self {
        match s {
            RglabShift::Adjacency => ShiftKind::NormalizedAdjacency,
            RglabShift::Laplacian => ShiftKind::NormalizedLaplacian,
        }
    }
}

/// Latent-position kernel model.
pub struct RglabModel(KernelModel);

/// Sampled graph with its latent positions.
pub struct RglabGraph(Graph);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> RglabStatus {
    match e {
        Error::InvalidModel(_) | Error::DegenerateModel(_) | Error::Domain(_) => RglabStatus::InvalidModel,
        Error::Shape(_) | Error::Representation(_) => RglabStatus::Shape,
        Error::NonFinite | Error::EigenFailure | Error::DegenerateExperiment(_) => RglabStatus::Numerical,
        Error::Io(_) => RglabStatus::Io,
        _ => RglabStatus::InvalidArgument,
    }
}

struct Fail(RglabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RglabStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RglabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RglabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RglabStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn model_ref<'a>(m: *const RglabModel) -> Result<&'a KernelModel, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn graph_ref<'a>(g: *const RglabGraph) -> Result<&'a Graph, Fail> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

/// Message for the last failed call on this thread; empty if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rglab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Block model with `k` communities: `c` is `k × k`, `p` has `k` entries.
///
/// # Safety
/// `c` and `p` must point to `k * k` and `k` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn rglab_model_sbm(k: usize, c: *const f64, p: *const f64, out: *mut *mut RglabModel) -> RglabStatus {
    guard(|| {
        let c = slice(c, k * k, "c")?;
        let p = slice(p, k, "p")?;
        let rows = c.chunks(k.max(1)).map(<[f64]>::to_vec).collect();
        put(out, RglabModel(KernelModel::sbm(rows, p.to_vec())?))
    })
}

/// Gaussian kernel on `[-1, 1]` with the given bandwidth.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn rglab_model_gaussian(bandwidth: f64, out: *mut *mut RglabModel) -> RglabStatus {
    guard(|| put(out, RglabModel(KernelModel::gaussian(bandwidth)?)))
}

/// # Safety
/// `model` must come from a constructor above and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rglab_model_free(model: *mut RglabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The `q` largest limit-operator eigenvalues, descending.
///
/// # Safety
/// `model` must be live and `out` must hold `q` doubles.
#[no_mangle]
pub unsafe extern "C" fn rglab_limit_eigenvalues(
    model: *const RglabModel,
    shift: RglabShift,
    q: usize,
    out: *mut f64,
) -> RglabStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = slice_mut(out, q, "out")?;
        let sys = LimitOperator::new(m, shift.into())?.eigenpairs(q)?;
        out.copy_from_slice(&sys.values[..q]);
        Ok(())
    })
}

/// Samples an `n`-node graph with edge probabilities `alpha · w(x_i, x_j)`.
///
/// # Safety
/// `model` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rglab_graph_sample(
    model: *const RglabModel,
    n: usize,
    alpha: f64,
    seed: u64,
    out: *mut *mut RglabGraph,
) -> RglabStatus {
    guard(|| {
        let m = model_ref(model)?;
        put(out, RglabGraph(sample_graph(m, n, alpha, seed)?))
    })
}

/// # Safety
/// `graph` must come from [`rglab_graph_sample`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rglab_graph_free(graph: *mut RglabGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Node count and undirected edge count.
///
/// # Safety
/// `graph` must be live; null out-pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn rglab_graph_size(graph: *const RglabGraph, nodes: *mut usize, edges: *mut usize) -> RglabStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        if !nodes.is_null() {
            *nodes = g.n();
        }
        if !edges.is_null() {
            *edges = g.edge_count();
        }
        Ok(())
    })
}

/// Copies the `n × n` shift matrix into `out` (`len` doubles available).
///
/// # Safety
/// `graph` must be live and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rglab_graph_shift(graph: *const RglabGraph, shift: RglabShift, out: *mut f64, len: usize) -> RglabStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        let n = g.n();
        if len < n * n {
            return Err(Fail(RglabStatus::Shape, format!("buffer holds {len}, need {}", n * n)));
        }
        let out = slice_mut(out, n * n, "out")?;
        let s = shift_matrix(g, shift.into());
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = s[(i, j)];
            }
        }
        Ok(())
    })
}

/// The `q` leading eigenpairs of the shift matrix: `values` gets `q` doubles,
/// `vectors` gets `n × q` (column `i` is eigenvector `i`, unit norm). `vectors` may be null.
///
/// # Safety
/// `graph` must be live and the buffers sized as described.
#[no_mangle]
pub unsafe extern "C" fn rglab_graph_eigenpairs(
    graph: *const RglabGraph,
    shift: RglabShift,
    q: usize,
    values: *mut f64,
    vectors: *mut f64,
) -> RglabStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        let n = g.n();
        if q == 0 || q > n {
            return Err(Fail(RglabStatus::InvalidArgument, format!("q = {q} outside 1..={n}")));
        }
        let eig = sym_eig(shift_matrix(g, shift.into()).as_ref())?;
        slice_mut(values, q, "values")?.copy_from_slice(&eig.values[..q]);
        if !vectors.is_null() {
            let out = slice_mut(vectors, n * q, "vectors")?;
            for i in 0..q {
                for (k, v) in eig.vector(i).into_iter().enumerate() {
                    out[k * q + i] = v;
                }
            }
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rglab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
