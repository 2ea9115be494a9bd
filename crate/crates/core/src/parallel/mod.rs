//! Worker team, barriers, staged reductions and halo exchange.

mod exchange;
mod team;
mod topology;

use std::marker::PhantomData;
use std::ops::Range;

pub use exchange::{build_exchange_plan, halo_exchange, ExchangePlan, HaloBuffer, LeafPlan, PeerExport, PeerImport};
pub use team::{staged_sum, Barrier, Scope, Team, Worker};
pub use topology::Topology;

/// Shared handle to an interleaved buffer that workers mutate in disjoint
/// row ranges.
#[derive(Clone, Copy)]
pub(crate) struct SharedRows<'a> {
    ptr: *mut f64,
    nrows: usize,
    m: usize,
    _data: PhantomData<&'a mut [f64]>,
}

unsafe impl Send for SharedRows<'_> {}
unsafe impl Sync for SharedRows<'_> {}

impl<'a> SharedRows<'a> {
    pub(crate) fn new(data: &'a mut [f64], m: usize) -> Self {
        debug_assert!(m > 0 && data.len() % m == 0);
        SharedRows {
            ptr: data.as_mut_ptr(),
            nrows: data.len() / m.max(1),
            m,
            _data: PhantomData,
        }
    }

    /// # Safety
    /// No other live reference may overlap `rows` while the returned slice
    /// is in use.
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn rows_mut(&self, rows: Range<usize>) -> &'a mut [f64] {
        assert!(rows.start <= rows.end && rows.end <= self.nrows);
        std::slice::from_raw_parts_mut(self.ptr.add(rows.start * self.m), rows.len() * self.m)
    }

    /// # Safety
    /// Nobody may write `rows` while the returned slice is in use.
    pub(crate) unsafe fn rows(&self, rows: Range<usize>) -> &'a [f64] {
        assert!(rows.start <= rows.end && rows.end <= self.nrows);
        std::slice::from_raw_parts(self.ptr.add(rows.start * self.m), rows.len() * self.m)
    }
}
