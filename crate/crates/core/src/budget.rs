use std::cell::Cell;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Wall-clock and work limits shared by the expensive operations.
///
/// Work units are a rough proxy for allocated formula nodes and table cells;
/// the CLI maps a memory cap in megabytes onto them.
#[derive(Debug, Clone)]
pub struct Budget {
    deadline: Option<Instant>,
    max_units: Option<u64>,
    used: Cell<u64>,
}

/// Approximate bytes per work unit when translating a memory cap.
pub const BYTES_PER_UNIT: u64 = 256;

impl Default for Budget {
    fn default() -> Self {
        Self::unlimited()
    }
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget {
            deadline: None,
            max_units: None,
            used: Cell::new(0),
        }
    }

    pub fn new(limit_ms: Option<u64>, limit_mem_mb: Option<u64>) -> Self {
        Budget {
            deadline: limit_ms.map(|ms| Instant::now() + Duration::from_millis(ms)),
            max_units: limit_mem_mb.map(|mb| mb.saturating_mul(1 << 20) / BYTES_PER_UNIT),
            used: Cell::new(0),
        }
    }

    pub fn with_units(max_units: u64) -> Self {
        Budget {
            deadline: None,
            max_units: Some(max_units),
            used: Cell::new(0),
        }
    }

    /// Charge `units` of work and fail once either limit is exceeded.
    pub fn charge(&self, units: u64) -> Result<()> {
        let used = self.used.get().saturating_add(units);
        self.used.set(used);
        if let Some(max) = self.max_units {
            if used > max {
                return Err(Error::ResourceLimit(format!(
                    "work limit of {max} units exceeded"
                )));
            }
        }
        self.check_time()
    }

    pub fn check_time(&self) -> Result<()> {
        if let Some(d) = self.deadline {
            if Instant::now() > d {
                return Err(Error::ResourceLimit("time limit exceeded".into()));
            }
        }
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_limit_trips() {
        let b = Budget::with_units(10);
        assert!(b.charge(6).is_ok());
        assert!(matches!(b.charge(6), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn zero_deadline_trips() {
        let b = Budget::new(Some(0), None);
        std::thread::sleep(Duration::from_millis(2));
        assert!(b.check_time().is_err());
    }
}
