use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use super::{trending, DynamicsError, KineticsConfig, MassTable, TrendingEntry};
use crate::ingest::{HourBucket, UserId};

/// Velocities and last-step accelerations at the end of one hour.
///
/// Users absent from `velocity` are at rest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub hour: u64,
    pub velocity: BTreeMap<UserId, f64>,
    pub acceleration: BTreeMap<UserId, f64>,
}

impl Snapshot {
    /// All users at rest.
    pub fn at_rest(hour: u64) -> Self {
        Snapshot {
            hour,
            ..Default::default()
        }
    }

    pub fn velocity_of(&self, user: &UserId) -> f64 {
        self.velocity.get(user).copied().unwrap_or(0.0)
    }
}

/// Per-user velocity state advanced one sealed hour at a time.
///
/// The state is sparse: users who were never pushed, or who have decayed
/// back to rest, are not stored. Every processed hour is kept in a bounded
/// ring, and hours ending a checkpoint period are kept for good.
#[derive(Debug, Clone)]
pub struct Kinetics {
    cfg: KineticsConfig,
    masses: MassTable,
    velocity: BTreeMap<UserId, f64>,
    acceleration: BTreeMap<UserId, f64>,
    next_hour: u64,
    ring: VecDeque<Arc<Snapshot>>,
    ring_capacity: usize,
    checkpoint_period: Option<u64>,
    checkpoints: BTreeMap<u64, Arc<Snapshot>>,
}

impl Kinetics {
    pub const DEFAULT_RING: usize = 168;

    pub fn new(cfg: KineticsConfig, masses: MassTable) -> Result<Self, DynamicsError> {
        cfg.validate()?;
        Ok(Kinetics {
            cfg,
            masses,
            velocity: BTreeMap::new(),
            acceleration: BTreeMap::new(),
            next_hour: 0,
            ring: VecDeque::new(),
            ring_capacity: Self::DEFAULT_RING,
            checkpoint_period: None,
            checkpoints: BTreeMap::new(),
        })
    }

    /// Keep a permanent snapshot at every hour `h` with `(h + 1) % period == 0`.
    pub fn with_checkpoint_period(mut self, period: u64) -> Self {
        self.checkpoint_period = (period > 0).then_some(period);
        self
    }

    pub fn with_ring_capacity(mut self, capacity: usize) -> Self {
        self.ring_capacity = capacity;
        self
    }

    pub fn config(&self) -> &KineticsConfig {
        &self.cfg
    }

    pub fn masses(&self) -> &MassTable {
        &self.masses
    }

    /// Last processed hour, if any.
    pub fn last_hour(&self) -> Option<u64> {
        self.next_hour.checked_sub(1)
    }

    pub fn velocity(&self, user: &UserId) -> f64 {
        self.velocity.get(user).copied().unwrap_or(0.0)
    }

    pub fn acceleration(&self, user: &UserId) -> f64 {
        self.acceleration.get(user).copied().unwrap_or(0.0)
    }

    pub fn velocities(&self) -> &BTreeMap<UserId, f64> {
        &self.velocity
    }

    /// Applies one hour of force. `bucket.hour_index` must be the next hour.
    pub fn step_hour(&mut self, bucket: &HourBucket) -> Result<(), DynamicsError> {
        if bucket.hour_index != self.next_hour {
            return Err(DynamicsError::NonContiguous {
                expected: self.next_hour,
                got: bucket.hour_index,
            });
        }
        let zeta = self.cfg.zeta;
        let force = self.cfg.force(bucket);
        let mut velocity = BTreeMap::new();
        let mut acceleration = BTreeMap::new();

        let mut update = |user: &UserId, v: f64, f: u32| {
            let pushed = if f > 0 {
                v + f as f64 / self.masses.mass(user)
            } else {
                v
            };
            let next = (pushed - zeta).max(0.0);
            let a = next - v;
            if next > 0.0 {
                velocity.insert(user.clone(), next);
            }
            if a != 0.0 {
                acceleration.insert(user.clone(), a);
            }
        };
        for (user, &v) in &self.velocity {
            update(user, v, force.get(user).copied().unwrap_or(0));
        }
        for (user, &f) in force {
            if f > 0 && !self.velocity.contains_key(user) {
                update(user, 0.0, f);
            }
        }

        self.velocity = velocity;
        self.acceleration = acceleration;
        let hour = self.next_hour;
        self.next_hour += 1;
        self.record(hour);
        Ok(())
    }

    /// Steps through force-free hours until `hour` is the next one to process.
    pub fn advance_to(&mut self, hour: u64) -> Result<(), DynamicsError> {
        while self.next_hour < hour {
            self.step_hour(&HourBucket::empty(self.next_hour))?;
        }
        Ok(())
    }

    /// Steps through any gap before `bucket`, then applies it.
    pub fn ingest(&mut self, bucket: &HourBucket) -> Result<(), DynamicsError> {
        self.advance_to(bucket.hour_index)?;
        self.step_hour(bucket)
    }

    /// Ingests a whole bucket sequence and pins the final hour.
    pub fn replay<'a, I>(&mut self, buckets: I) -> Result<Option<u64>, DynamicsError>
    where
        I: IntoIterator<Item = &'a HourBucket>,
    {
        for b in buckets {
            self.ingest(b)?;
        }
        Ok(self.checkpoint_now())
    }

    fn record(&mut self, hour: u64) {
        let due = self
            .checkpoint_period
            .is_some_and(|p| (hour + 1) % p == 0);
        if self.ring_capacity == 0 && !due {
            return;
        }
        let snap = Arc::new(self.current_snapshot(hour));
        if self.ring_capacity > 0 {
            if self.ring.len() == self.ring_capacity {
                self.ring.pop_front();
            }
            self.ring.push_back(Arc::clone(&snap));
        }
        if due {
            self.checkpoints.insert(hour, snap);
        }
    }

    fn current_snapshot(&self, hour: u64) -> Snapshot {
        Snapshot {
            hour,
            velocity: self.velocity.clone(),
            acceleration: self.acceleration.clone(),
        }
    }

    /// Pins the current state as a permanent checkpoint.
    pub fn checkpoint_now(&mut self) -> Option<u64> {
        let hour = self.last_hour()?;
        let snap = self
            .ring
            .back()
            .filter(|s| s.hour == hour)
            .cloned()
            .unwrap_or_else(|| Arc::new(self.current_snapshot(hour)));
        self.checkpoints.insert(hour, snap);
        Some(hour)
    }

    pub fn checkpoints(&self) -> impl Iterator<Item = &Snapshot> {
        self.checkpoints.values().map(Arc::as_ref)
    }

    /// Retained snapshot for `hour`.
    pub fn snapshot_at(&self, hour: u64) -> Result<Arc<Snapshot>, DynamicsError> {
        let last = self.last_hour().ok_or(DynamicsError::BoundaryAhead(hour))?;
        if hour > last {
            return Err(DynamicsError::BoundaryAhead(hour));
        }
        if hour == last {
            return Ok(Arc::new(self.current_snapshot(hour)));
        }
        if let Some(s) = self.checkpoints.get(&hour) {
            return Ok(Arc::clone(s));
        }
        self.ring
            .iter()
            .find(|s| s.hour == hour)
            .cloned()
            .ok_or(DynamicsError::UnknownBoundary(hour))
    }

    /// Velocity of `user` at the end of `hour`; untracked users are at 0.
    pub fn velocity_at(&self, user: &UserId, hour: u64) -> Result<f64, DynamicsError> {
        Ok(self.snapshot_at(hour)?.velocity_of(user))
    }

    /// Trending users between two retained hours.
    pub fn trending(
        &self,
        from_hour: u64,
        to_hour: u64,
        threshold: f64,
        k: usize,
    ) -> Result<Vec<TrendingEntry>, DynamicsError> {
        let from = self.snapshot_at(from_hour)?;
        let to = self.snapshot_at(to_hour)?;
        Ok(trending(&from, &to, threshold, k))
    }
}
