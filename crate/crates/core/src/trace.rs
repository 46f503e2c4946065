//! Instrumented memory and access traces.
//!
//! Oblivious code in this crate keeps every piece of potentially observable
//! state in an [`InstrumentedBuffer`] (or a [`TraceRegion`] for file-backed
//! storage). While a [`TraceSession`] is open on the current thread, each
//! element access appends one [`AccessEvent`] to the session's trace. Two runs
//! over inputs of the same public shape are oblivious iff their traces are
//! equal event for event.
//!
//! Traces are recorded at `(region, element offset)` granularity, which is the
//! strictest observer; page-granular views are derived with
//! [`AccessTrace::page_project`].
//!
//! Region ids are numbered from zero at the start of every session, so buffers
//! that should be compared across runs must be created inside the session.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::marker::PhantomData;
use std::mem;

use thiserror::Error;

/// Default cap on the number of events held by one session.
pub const DEFAULT_EVENT_CAP: usize = 100_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace exceeded its cap of {cap} events")]
    CapExceeded { cap: usize },
    #[error("malformed trace dump at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    fn tag(self) -> char {
        match self {
            AccessKind::Read => 'R',
            AccessKind::Write => 'W',
        }
    }
}

/// Opaque name of one instrumented memory region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AccessEvent {
    pub kind: AccessKind,
    pub region: RegionId,
    /// Element index within the region.
    pub offset: u64,
    /// Bytes per element.
    pub width: u32,
}

impl fmt::Display for AccessEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.kind.tag(),
            self.region,
            self.offset,
            self.width
        )
    }
}

/// Ordered record of every instrumented touch, in program order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AccessTrace {
    events: Vec<AccessEvent>,
}

impl AccessTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<AccessEvent>) -> Self {
        Self { events }
    }

    pub fn events(&self) -> &[AccessEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AccessEvent> {
        self.events.iter()
    }

    pub fn count(&self, kind: AccessKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Index of the first event at which the traces differ. A strict prefix
    /// diverges at the shorter length.
    pub fn first_divergence(&self, other: &AccessTrace) -> Option<usize> {
        let common = self.events.len().min(other.events.len());
        match (0..common).find(|&i| self.events[i] != other.events[i]) {
            Some(i) => Some(i),
            None if self.events.len() != other.events.len() => Some(common),
            None => None,
        }
    }

    /// Coarsens offsets to `floor(offset * width / page_bytes)` and collapses
    /// consecutive events that land on the same `(kind, region, page)`.
    ///
    /// # Panics
    ///
    /// If `page_bytes` is zero.
    pub fn page_project(&self, page_bytes: u64) -> AccessTrace {
        assert!(page_bytes > 0, "page size must be positive");
        let mut events: Vec<AccessEvent> = Vec::new();
        for e in &self.events {
            let page = e.offset * u64::from(e.width) / page_bytes;
            let projected = AccessEvent { offset: page, ..*e };
            if events.last() != Some(&projected) {
                events.push(projected);
            }
        }
        AccessTrace { events }
    }

    /// Writes one `R|W <region> <offset> <width>` line per event.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{e}")?;
        }
        out.flush()
    }

    pub fn read_dump<R: BufRead>(input: R) -> Result<AccessTrace, TraceError> {
        let mut events = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| TraceError::Parse {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            events.push(parse_event(&line).map_err(|reason| TraceError::Parse {
                line: line_no,
                reason,
            })?);
        }
        Ok(AccessTrace { events })
    }
}

fn parse_event(line: &str) -> Result<AccessEvent, String> {
    let mut parts = line.split(' ');
    let kind = match parts.next() {
        Some("R") => AccessKind::Read,
        Some("W") => AccessKind::Write,
        other => return Err(format!("bad access kind {other:?}")),
    };
    let mut field = |name: &str| -> Result<u64, String> {
        parts
            .next()
            .ok_or_else(|| format!("missing {name}"))?
            .parse::<u64>()
            .map_err(|e| format!("bad {name}: {e}"))
    };
    let region = field("region")?;
    let offset = field("offset")?;
    let width = field("width")?;
    if parts.next().is_some() {
        return Err("trailing fields".into());
    }
    Ok(AccessEvent {
        kind,
        region: RegionId(u32::try_from(region).map_err(|e| e.to_string())?),
        offset,
        width: u32::try_from(width).map_err(|e| e.to_string())?,
    })
}

impl<'a> IntoIterator for &'a AccessTrace {
    type Item = &'a AccessEvent;
    type IntoIter = std::slice::Iter<'a, AccessEvent>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

/// True iff both traces hold identical events in identical order.
pub fn trace_equal(a: &AccessTrace, b: &AccessTrace) -> bool {
    a.events == b.events
}

struct Sink {
    events: Vec<AccessEvent>,
    cap: usize,
    overflowed: bool,
}

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
    static SESSION_OPEN: Cell<bool> = const { Cell::new(false) };
    static NEXT_REGION: Cell<u32> = const { Cell::new(0) };
    static SINK: RefCell<Sink> = const {
        RefCell::new(Sink { events: Vec::new(), cap: DEFAULT_EVENT_CAP, overflowed: false })
    };
}

/// Whether a session is currently collecting events on this thread.
#[inline]
pub fn is_recording() -> bool {
    ACTIVE.with(Cell::get)
}

#[inline(never)]
#[cold]
fn push_event(event: AccessEvent) {
    SINK.with_borrow_mut(|sink| {
        if sink.events.len() >= sink.cap {
            sink.overflowed = true;
            ACTIVE.set(false);
        } else {
            sink.events.push(event);
        }
    });
}

fn next_region() -> RegionId {
    NEXT_REGION.with(|n| {
        let id = n.get();
        n.set(id.wrapping_add(1));
        RegionId(id)
    })
}

/// An open recording session on the current thread.
///
/// Only one session may be open per thread. Dropping the session without
/// calling [`TraceSession::finish`] discards the events.
pub struct TraceSession {
    // Sessions are bound to the thread whose thread-local sink they own.
    _not_send: PhantomData<*const ()>,
}

impl TraceSession {
    pub fn start() -> Self {
        Self::with_cap(DEFAULT_EVENT_CAP)
    }

    /// # Panics
    ///
    /// If a session is already open on this thread.
    pub fn with_cap(cap: usize) -> Self {
        assert!(
            !SESSION_OPEN.with(Cell::get),
            "a trace session is already open on this thread"
        );
        SESSION_OPEN.set(true);
        NEXT_REGION.set(0);
        SINK.with_borrow_mut(|sink| {
            sink.events.clear();
            sink.cap = cap;
            sink.overflowed = false;
        });
        ACTIVE.set(true);
        TraceSession {
            _not_send: PhantomData,
        }
    }

    /// Events recorded so far.
    pub fn len(&self) -> usize {
        SINK.with_borrow(|sink| sink.events.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn finish(self) -> Result<AccessTrace, TraceError> {
        ACTIVE.set(false);
        let (events, overflowed, cap) = SINK.with_borrow_mut(|sink| {
            (mem::take(&mut sink.events), sink.overflowed, sink.cap)
        });
        if overflowed {
            return Err(TraceError::CapExceeded { cap });
        }
        Ok(AccessTrace { events })
    }
}

impl Drop for TraceSession {
    fn drop(&mut self) {
        ACTIVE.set(false);
        SESSION_OPEN.set(false);
        SINK.with_borrow_mut(|sink| {
            sink.events.clear();
            sink.overflowed = false;
        });
    }
}

/// Runs `f` inside a fresh session and returns its result with the trace.
pub fn capture<R>(f: impl FnOnce() -> R) -> Result<(R, AccessTrace), TraceError> {
    capture_with_cap(DEFAULT_EVENT_CAP, f)
}

pub fn capture_with_cap<R>(
    cap: usize,
    f: impl FnOnce() -> R,
) -> Result<(R, AccessTrace), TraceError> {
    let session = TraceSession::with_cap(cap);
    let out = f();
    let trace = session.finish()?;
    Ok((out, trace))
}

/// Identity of one instrumented memory, used by storage that is not a plain
/// in-memory vector (e.g. block files).
#[derive(Clone, Debug)]
pub struct TraceRegion {
    id: RegionId,
    width: u32,
    recording: bool,
}

impl TraceRegion {
    pub fn new(width: u32) -> Self {
        Self {
            id: next_region(),
            width,
            recording: true,
        }
    }

    pub fn id(&self) -> RegionId {
        self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    #[inline]
    pub fn note(&self, kind: AccessKind, offset: usize) {
        if self.recording && is_recording() {
            push_event(AccessEvent {
                kind,
                region: self.id,
                offset: offset as u64,
                width: self.width,
            });
        }
    }

    #[inline]
    pub fn note_read(&self, offset: usize) {
        self.note(AccessKind::Read, offset);
    }

    #[inline]
    pub fn note_write(&self, offset: usize) {
        self.note(AccessKind::Write, offset);
    }
}

/// A vector whose element accesses are recorded into the active session.
///
/// Indices passed to [`read`](Self::read) and [`write`](Self::write) are
/// public; an out-of-range index is a programming error and panics.
#[derive(Clone)]
pub struct InstrumentedBuffer<T> {
    region: TraceRegion,
    data: Vec<T>,
}

impl<T> InstrumentedBuffer<T> {
    pub fn new(data: Vec<T>) -> Self {
        Self::with_width(data, mem::size_of::<T>() as u32)
    }

    pub fn with_width(data: Vec<T>, width: u32) -> Self {
        Self {
            region: TraceRegion::new(width),
            data,
        }
    }

    pub fn filled(len: usize, value: T) -> Self
    where
        T: Clone,
    {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn region(&self) -> RegionId {
        self.region.id()
    }

    pub fn elem_width(&self) -> u32 {
        self.region.width()
    }

    pub fn recording(&self) -> bool {
        self.region.recording()
    }

    pub fn set_recording(&mut self, on: bool) {
        self.region.set_recording(on);
    }

    #[inline]
    pub fn read(&self, i: usize) -> T
    where
        T: Copy,
    {
        let v = self.data[i];
        self.region.note_read(i);
        v
    }

    #[inline]
    pub fn read_ref(&self, i: usize) -> &T {
        let v = &self.data[i];
        self.region.note_read(i);
        v
    }

    #[inline]
    pub fn write(&mut self, i: usize, v: T) {
        self.data[i] = v;
        self.region.note_write(i);
    }

    /// Untraced view of the contents, for setup and test oracles.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Untraced mutable view, for setup code whose shape is public.
    pub fn as_mut_slice_untraced(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<T> {
        self.data
    }
}

impl<T: fmt::Debug> fmt::Debug for InstrumentedBuffer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InstrumentedBuffer")
            .field("region", &self.region.id())
            .field("width", &self.region.width())
            .field("len", &self.data.len())
            .finish()
    }
}

/// Outcome of comparing the traces of one input pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOutcome {
    pub pair: usize,
    pub events: usize,
    /// First differing event index, `None` when the traces are identical.
    pub divergence: Option<usize>,
    pub left: Option<AccessEvent>,
    pub right: Option<AccessEvent>,
}

impl PairOutcome {
    pub fn passed(&self) -> bool {
        self.divergence.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvarianceReport {
    pub outcomes: Vec<PairOutcome>,
}

impl InvarianceReport {
    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(PairOutcome::passed)
    }
}

/// Runs `run` over `pairs` pairs of inputs drawn from `gen` and compares the
/// raw traces of each pair. Inputs are generated inside the session so their
/// regions get the same ids in both runs.
pub fn check_invariance<I, G, F>(
    pairs: usize,
    mut gen: G,
    mut run: F,
) -> Result<InvarianceReport, TraceError>
where
    G: FnMut(usize, usize) -> I,
    F: FnMut(I),
{
    let mut report = InvarianceReport::default();
    for pair in 0..pairs {
        let ((), left) = capture(|| run(gen(pair, 0)))?;
        let ((), right) = capture(|| run(gen(pair, 1)))?;
        let divergence = left.first_divergence(&right);
        let at = |t: &AccessTrace| divergence.and_then(|i| t.events().get(i).copied());
        report.outcomes.push(PairOutcome {
            pair,
            events: left.len(),
            divergence,
            left: at(&left),
            right: at(&right),
        });
    }
    Ok(report)
}
