//! Sparse pairwise trust with timestamped exponential decay.
//!
//! Each stored entry keeps the trust value at the step it was last written.
//! Reading it at a later step multiplies by `(1 - r_alpha)^elapsed`, so the
//! per-step cost is proportional to the number of messages rather than N².
//! An eager mode that decays every entry on every step is kept for checking
//! that both give the same effective values.

use rustc_hash::FxHashMap;

/// Agent index in `0..N`.
pub type AgentId = u32;

/// Discrete time step.
pub type Step = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayMode {
    #[default]
    Lazy,
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustEntry {
    pub alpha: f64,
    pub last_update: Step,
}

/// One `(receiver, sender, effective alpha)` record of a trust snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRecord {
    pub receiver: AgentId,
    pub sender: AgentId,
    pub alpha: f64,
}

/// Storage layout. Both hold the same sparse contract: absent pairs read as
/// zero and only written pairs count as touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One hash map per receiver, memory proportional to touched pairs.
    Sparse,
    /// A flat N×N slot array with an "absent" marker.
    Dense,
}

impl Layout {
    /// Largest population stored densely by [`Layout::auto`].
    pub const DENSE_MAX_N: usize = 1024;

    /// Dense for populations up to [`Layout::DENSE_MAX_N`], sparse above.
    pub fn auto(n: usize) -> Self {
        if n <= Self::DENSE_MAX_N {
            Layout::Dense
        } else {
            Layout::Sparse
        }
    }
}

const ABSENT: Step = Step::MAX;

/// Cached powers of the retention factor for short elapsed times.
const POWER_CACHE: usize = 4096;

#[derive(Debug, Clone)]
enum Slots {
    Sparse(Vec<FxHashMap<AgentId, TrustEntry>>),
    Dense { n: usize, slots: Vec<TrustEntry> },
}

#[derive(Debug, Clone)]
pub struct TrustStore {
    slots: Slots,
    n: usize,
    retention: f64,
    powers: Vec<f64>,
    mode: DecayMode,
}

impl TrustStore {
    pub fn new(n: usize, r_alpha: f64, mode: DecayMode) -> Self {
        Self::with_layout(n, r_alpha, mode, Layout::auto(n))
    }

    pub fn with_layout(n: usize, r_alpha: f64, mode: DecayMode, layout: Layout) -> Self {
        let retention = 1.0 - r_alpha;
        let mut powers = Vec::with_capacity(POWER_CACHE);
        let mut acc = 1.0;
        for _ in 0..POWER_CACHE {
            powers.push(acc);
            acc *= retention;
        }
        let slots = match layout {
            Layout::Sparse => Slots::Sparse(vec![FxHashMap::default(); n]),
            Layout::Dense => Slots::Dense {
                n,
                slots: vec![
                    TrustEntry {
                        alpha: 0.0,
                        last_update: ABSENT,
                    };
                    n * n
                ],
            },
        };
        TrustStore {
            slots,
            n,
            retention,
            powers,
            mode,
        }
    }

    pub fn mode(&self) -> DecayMode {
        self.mode
    }

    pub fn layout(&self) -> Layout {
        match self.slots {
            Slots::Sparse(_) => Layout::Sparse,
            Slots::Dense { .. } => Layout::Dense,
        }
    }

    pub fn population(&self) -> usize {
        self.n
    }

    /// Number of stored (touched) ordered pairs.
    pub fn len(&self) -> usize {
        match &self.slots {
            Slots::Sparse(rows) => rows.iter().map(|r| r.len()).sum(),
            Slots::Dense { slots, .. } => slots.iter().filter(|e| e.last_update != ABSENT).count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn entry(&self, receiver: AgentId, sender: AgentId) -> Option<&TrustEntry> {
        match &self.slots {
            Slots::Sparse(rows) => rows[receiver as usize].get(&sender),
            Slots::Dense { n, slots } => {
                let e = &slots[receiver as usize * n + sender as usize];
                (e.last_update != ABSENT).then_some(e)
            }
        }
    }

    /// Trust of `receiver` in `sender` as seen at step `t`. Absent pairs read as 0.
    #[inline]
    pub fn effective_alpha(&self, receiver: AgentId, sender: AgentId, t: Step) -> f64 {
        match self.entry(receiver, sender) {
            Some(e) => self.decayed(e, t),
            None => 0.0,
        }
    }

    #[inline]
    fn decayed(&self, e: &TrustEntry, t: Step) -> f64 {
        debug_assert!(t >= e.last_update, "read before last write");
        let elapsed = t - e.last_update;
        match self.powers.get(elapsed as usize) {
            Some(f) => e.alpha * f,
            None => e.alpha * self.retention.powi(elapsed.min(i32::MAX as u64) as i32),
        }
    }

    /// Stores `alpha` as the value of the pair at step `t`, clamped to [-1, 1].
    pub fn set(&mut self, receiver: AgentId, sender: AgentId, alpha: f64, t: Step) {
        let entry = TrustEntry {
            alpha: alpha.clamp(-1.0, 1.0),
            last_update: t,
        };
        match &mut self.slots {
            Slots::Sparse(rows) => {
                rows[receiver as usize].insert(sender, entry);
            }
            Slots::Dense { n, slots } => slots[receiver as usize * *n + sender as usize] = entry,
        }
    }

    /// Moves the store's clock from `t` to `t + 1`. Lazy stores do nothing;
    /// eager stores multiply every entry by `1 - r_alpha`.
    pub fn advance(&mut self, t: Step) {
        if self.mode != DecayMode::Eager {
            return;
        }
        let retention = self.retention;
        let tick = |e: &mut TrustEntry| {
            debug_assert_eq!(e.last_update, t);
            e.alpha *= retention;
            e.last_update = t + 1;
        };
        match &mut self.slots {
            Slots::Sparse(rows) => rows.iter_mut().flat_map(|r| r.values_mut()).for_each(tick),
            Slots::Dense { slots, .. } => slots
                .iter_mut()
                .filter(|e| e.last_update != ABSENT)
                .for_each(tick),
        }
    }

    /// Effective values of all stored pairs at step `t`, ordered by (receiver, sender).
    pub fn snapshot(&self, t: Step) -> Vec<TrustRecord> {
        let mut out = Vec::with_capacity(self.len());
        match &self.slots {
            Slots::Sparse(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let start = out.len();
                    out.extend(row.iter().map(|(&j, e)| TrustRecord {
                        receiver: i as AgentId,
                        sender: j,
                        alpha: self.decayed(e, t),
                    }));
                    out[start..].sort_unstable_by_key(|r| r.sender);
                }
            }
            Slots::Dense { n, slots } => {
                for (idx, e) in slots.iter().enumerate() {
                    if e.last_update != ABSENT {
                        out.push(TrustRecord {
                            receiver: (idx / n) as AgentId,
                            sender: (idx % n) as AgentId,
                            alpha: self.decayed(e, t),
                        });
                    }
                }
            }
        }
        out
    }

    /// Effective values of stored pairs at step `t`, in no particular order.
    pub fn effective_values(&self, t: Step) -> Vec<f64> {
        match &self.slots {
            Slots::Sparse(rows) => rows
                .iter()
                .flat_map(|row| row.values().map(|e| self.decayed(e, t)))
                .collect(),
            Slots::Dense { slots, .. } => slots
                .iter()
                .filter(|e| e.last_update != ABSENT)
                .map(|e| self.decayed(e, t))
                .collect(),
        }
    }
}
