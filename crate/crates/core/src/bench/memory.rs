//! Allocation high-water mark probe.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static INSTALLED: AtomicUsize = AtomicUsize::new(0);

/// Counting wrapper around the system allocator. A binary opts in with
/// `#[global_allocator] static A: PeakAlloc = PeakAlloc;`; without it every
/// measurement reads as unavailable. Memory that native libraries obtain
/// outside the Rust allocator is not seen.
pub struct PeakAlloc;

unsafe impl GlobalAlloc for PeakAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc_zeroed(layout);
        if !ptr.is_null() {
            record_alloc(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let out = System.realloc(ptr, layout, new_size);
        if !out.is_null() {
            CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
            record_alloc(new_size);
        }
        out
    }
}

fn record_alloc(size: usize) {
    INSTALLED.store(1, Ordering::Relaxed);
    let now = CURRENT.fetch_add(size, Ordering::Relaxed) + size;
    PEAK.fetch_max(now, Ordering::Relaxed);
}

/// A measurement span: the peak is reset on creation.
#[derive(Debug)]
pub struct MemorySpan {
    baseline: usize,
}

impl MemorySpan {
    pub fn start() -> Self {
        let baseline = CURRENT.load(Ordering::Relaxed);
        PEAK.store(baseline, Ordering::Relaxed);
        MemorySpan { baseline }
    }

    /// Bytes above the starting level at the high-water mark, or `None` when
    /// [`PeakAlloc`] is not the global allocator.
    pub fn peak_delta(&self) -> Option<u64> {
        if INSTALLED.load(Ordering::Relaxed) == 0 {
            return None;
        }
        Some(PEAK.load(Ordering::Relaxed).saturating_sub(self.baseline) as u64)
    }
}
