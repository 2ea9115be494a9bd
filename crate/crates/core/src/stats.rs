//! Per-kernel operation counters.
//!
//! Every blas/blas2 kernel call records how many vector sweeps it read and
//! wrote, a flop estimate, and whether a zero-flag shortcut let it skip the
//! arithmetic.

use std::collections::BTreeMap;
use std::ops::AddAssign;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelCounters {
    pub calls: u64,
    /// Calls resolved by a zero-flag shortcut without the arithmetic body.
    pub skipped: u64,
    /// Full passes over a vector operand that were read.
    pub read_passes: u64,
    /// Full passes over a vector operand that were written.
    pub write_passes: u64,
    pub flops: u64,
}

impl AddAssign for KernelCounters {
    fn add_assign(&mut self, o: Self) {
        self.calls += o.calls;
        self.skipped += o.skipped;
        self.read_passes += o.read_passes;
        self.write_passes += o.write_passes;
        self.flops += o.flops;
    }
}

#[derive(Debug, Default)]
pub struct Counters {
    inner: Mutex<BTreeMap<&'static str, KernelCounters>>,
}

impl Counters {
    pub fn record(&self, kernel: &'static str, delta: KernelCounters) {
        let mut map = self.inner.lock().unwrap();
        *map.entry(kernel).or_default() += delta;
    }

    pub fn get(&self, kernel: &str) -> KernelCounters {
        self.inner
            .lock()
            .unwrap()
            .get(kernel)
            .copied()
            .unwrap_or_default()
    }

    pub fn snapshot(&self) -> BTreeMap<&'static str, KernelCounters> {
        self.inner.lock().unwrap().clone()
    }

    pub fn total(&self) -> KernelCounters {
        let mut t = KernelCounters::default();
        for c in self.inner.lock().unwrap().values() {
            t += *c;
        }
        t
    }

    pub fn reset(&self) {
        self.inner.lock().unwrap().clear();
    }
}

/// Counter delta for one executed call.
pub(crate) fn pass(reads: u64, writes: u64, flops: u64) -> KernelCounters {
    KernelCounters {
        calls: 1,
        skipped: 0,
        read_passes: reads,
        write_passes: writes,
        flops,
    }
}

/// Counter delta for a call short-circuited by a zero flag.
pub(crate) fn skip(reads: u64, writes: u64) -> KernelCounters {
    KernelCounters {
        calls: 1,
        skipped: 1,
        read_passes: reads,
        write_passes: writes,
        flops: 0,
    }
}
