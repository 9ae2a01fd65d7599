use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::Snapshot;
use crate::ingest::UserId;

#[derive(Debug, Clone, PartialEq)]
pub struct TrendingEntry {
    pub user: UserId,
    pub from_hour: u64,
    pub to_hour: u64,
    /// Velocity gained over the window.
    pub acceleration: f64,
    /// `acceleration / v_from`; infinite when the user started at rest.
    pub relative_increase: f64,
}

/// Users whose velocity grew by at least `threshold` (relative) between the
/// two snapshots, ordered by absolute gain (ties by handle), top `k`.
pub fn trending(from: &Snapshot, to: &Snapshot, threshold: f64, k: usize) -> Vec<TrendingEntry> {
    if k == 0 {
        return Vec::new();
    }
    let users: BTreeSet<&UserId> = from.velocity.keys().chain(to.velocity.keys()).collect();
    let mut out: Vec<TrendingEntry> = users
        .into_iter()
        .filter_map(|user| {
            let before = from.velocity_of(user);
            let gain = to.velocity_of(user) - before;
            if gain <= 0.0 {
                return None;
            }
            let relative = if before == 0.0 {
                f64::INFINITY
            } else {
                gain / before
            };
            (relative >= threshold).then(|| TrendingEntry {
                user: user.clone(),
                from_hour: from.hour,
                to_hour: to.hour,
                acceleration: gain,
                relative_increase: relative,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.acceleration
            .partial_cmp(&a.acceleration)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.user.cmp(&b.user))
    });
    out.truncate(k);
    out
}
