use serde::Serialize;

/// Per-group scratch budget mirroring a 48 KiB shared-memory block.
pub const DEFAULT_SCRATCH_BUDGET: usize = 49152;

/// Lanes per worker group unless overridden.
pub const DEFAULT_GROUP_SIZE: usize = 512;

/// Upper clamp on sub-GLCM copies per group.
pub const MAX_COPIES: usize = 8;

/// Bytes per sub-GLCM counter.
pub const COUNTER_BYTES: usize = 4;

/// Environment variable that overrides the detected worker count.
pub const WORKERS_ENV: &str = "TEXTURE_FORGE_WORKERS";

/// Geometry of a privatized run.
///
/// A worker group owns `copies` private sub-GLCMs of `copy_bytes` each.
/// Within a group, anchors are dealt round-robin to `group_size` lanes and
/// lane `i` votes into copy `i mod copies`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExecutionPlan {
    pub levels: usize,
    pub worker_count: usize,
    pub group_size: usize,
    pub copies: usize,
    pub scratch_budget: usize,
    pub groups_per_unit: usize,
    pub copy_bytes: usize,
    /// Set when the budget cannot hold two groups of one copy each.
    pub degraded: bool,
}

/// Chooses copies per group from the scratch budget.
///
/// With two concurrent groups per unit, `R = floor(budget / (2 S))` clamped
/// to `[1, MAX_COPIES]`, where `S = L² * 4`. A budget that only fits a single
/// copy drops to one group per unit; one that fits none still yields `R = 1`
/// with `degraded` set.
pub fn plan(levels: usize, scratch_budget: usize, worker_count: usize) -> ExecutionPlan {
    let copy_bytes = levels * levels * COUNTER_BYTES;
    let mut groups_per_unit = 2;
    let mut degraded = false;

    let fit = scratch_budget / (groups_per_unit * copy_bytes).max(1);
    let mut copies = fit.clamp(1, MAX_COPIES);
    if fit == 0 {
        degraded = true;
        if copy_bytes <= scratch_budget {
            groups_per_unit = 1;
        }
    }

    let fits = |r: usize, nb: usize| r * copy_bytes * nb <= scratch_budget;
    // empirical floors, applied only where the budget allows them
    if levels <= 8 && copies < 4 && fits(4, groups_per_unit) {
        copies = 4;
    }
    if levels == 32 && copies < 2 && fits(2, groups_per_unit) {
        copies = 2;
    }

    ExecutionPlan {
        levels,
        worker_count: worker_count.max(1),
        group_size: DEFAULT_GROUP_SIZE,
        copies,
        scratch_budget,
        groups_per_unit,
        copy_bytes,
        degraded,
    }
}

impl ExecutionPlan {
    /// Overrides the copy count; zero is raised to one.
    pub fn with_copies(mut self, copies: usize) -> Self {
        self.copies = copies.max(1);
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.worker_count = workers.max(1);
        self
    }

    pub fn with_group_size(mut self, group_size: usize) -> Self {
        self.group_size = group_size.max(1);
        self
    }

    /// Scratch demand of all concurrent groups on one unit.
    pub fn scratch_bytes(&self) -> usize {
        self.copies * self.copy_bytes * self.groups_per_unit
    }

    /// `R >= 1` and `R * S * n_b <= budget`.
    pub fn is_legal(&self) -> bool {
        self.copies >= 1 && self.scratch_bytes() <= self.scratch_budget
    }
}

/// Worker count from `TEXTURE_FORGE_WORKERS`, else the detected parallelism.
pub fn detect_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
