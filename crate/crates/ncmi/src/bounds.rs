//! Closed-form completion-time bounds, evaluated directly from a scenario's
//! Wants sets and loss parameters.
//!
//! Lossy bounds describe the expected completion time, so each comes in a
//! pre-ceiling real form (what Monte Carlo means are compared against) and
//! the ceiled integer form.

use serde::Serialize;

use crate::error::Result;
use crate::grouping::{group_wants, GroupVector};
use crate::model::{DeviceId, Instance, Scenario};

fn ceil_div(a: usize, b: usize) -> u32 {
    a.div_ceil(b) as u32
}

fn ceil_f(x: f64) -> u32 {
    x.ceil().max(0.0) as u32
}

/// Both forms of one bound value.
#[derive(Copy, Clone, Debug, Serialize)]
pub struct BoundValue {
    pub real: f64,
    pub ceiled: u32,
}

impl BoundValue {
    fn from_real(real: f64) -> Self {
        BoundValue { real, ceiled: ceil_f(real) }
    }
}

fn wants_sizes(instance: &Instance) -> Vec<usize> {
    instance.wants.iter().map(|w| w.len()).collect()
}

/// Upper bound for the lossless batch scheduler:
/// `max(|source-only|, (max|W| + min|W|)/3, max|W|/2)`, ceiled.
pub fn ub_batch_lossless(wants_sizes: &[usize], source_only: usize) -> BoundValue {
    let max_w = wants_sizes.iter().copied().max().unwrap_or(0);
    let min_w = wants_sizes.iter().copied().min().unwrap_or(0);
    let real = (source_only as f64)
        .max((max_w + min_w) as f64 / 3.0)
        .max(max_w as f64 / 2.0);
    let ceiled = (source_only as u32)
        .max(ceil_div(max_w + min_w, 3))
        .max(ceil_div(max_w, 2));
    BoundValue { real, ceiled }
}

/// Lower bound for any lossless scheme: `max(|source-only|, max|W|/2)`.
pub fn lb_lossless(wants_sizes: &[usize], source_only: usize) -> BoundValue {
    let max_w = wants_sizes.iter().copied().max().unwrap_or(0);
    let real = (source_only as f64).max(max_w as f64 / 2.0);
    let ceiled = (source_only as u32).max(ceil_div(max_w, 2));
    BoundValue { real, ceiled }
}

/// Upper bound for the lossless instant scheduler, from the first-slot
/// groups: `min(max(M/2, c), max(c, (2 min|W| + d)/3, (min|W| + d)/2))`
/// with `c` source-only vectors and `d` ready vectors.
pub fn ub_instant_lossless(instance: &Instance) -> BoundValue {
    let groups = group_wants(&instance.wants);
    let c = groups.source_only.len();
    let d = groups.local_ready.len();
    let min_w = wants_sizes(instance).into_iter().min().unwrap_or(0);
    let m = instance.m;
    let real = (m as f64 / 2.0).max(c as f64).min(
        (c as f64)
            .max((2 * min_w + d) as f64 / 3.0)
            .max((min_w + d) as f64 / 2.0),
    );
    let ceiled = ceil_div(m, 2).max(c as u32).min(
        (c as u32)
            .max(ceil_div(2 * min_w + d, 3))
            .max(ceil_div(min_w + d, 2)),
    );
    BoundValue { real, ceiled }
}

/// Terms of the lossy batch upper bound.
#[derive(Clone, Debug, Serialize)]
pub struct BatchLossyBound {
    /// Device with the smallest Wants set (the first local transmitter).
    pub min_wants_device: DeviceId,
    /// Peer taking the longest to drain at joint rate from that transmitter.
    pub bottleneck_device: DeviceId,
    pub t_min_device: f64,
    pub t_bottleneck: f64,
    pub t_joint: f64,
    /// Set when the case-split denominator was non-positive and the single
    /// joint-rate branch was used.
    pub degenerate_condition: bool,
    pub exclusive_term: f64,
    pub bound: BoundValue,
}

/// Upper bound on the expected completion time of the lossy batch scheduler.
pub fn ub_batch_lossy(instance: &Instance) -> BatchLossyBound {
    let w = wants_sizes(instance);
    let eta = &instance.loss.eta;
    let eps = &instance.loss.eps;
    let n = instance.n;

    let x = (0..n).min_by_key(|&i| (w[i], i)).expect("devices");
    let r = (0..n)
        .filter(|&i| i != x)
        .max_by(|&a, &b| {
            let fa = w[a] as f64 / (2.0 - eta[a] - eps[x][a]);
            let fb = w[b] as f64 / (2.0 - eta[b] - eps[x][b]);
            fa.partial_cmp(&fb).unwrap().then(b.cmp(&a))
        })
        .expect("at least two devices");

    let wx = w[x] as f64;
    let wr = w[r] as f64;
    let joint_rate_r = 2.0 - eta[r] - eps[x][r];
    let cond_denom = 1.0 - eta[r] - eps[x][r] + eta[x];

    let t_min_device = (wr * (1.0 - eps[r][x])
        + wx * (1.0 + 2.0 * eta[x] - 2.0 * eta[r] + eps[r][x] - 2.0 * eps[x][r]))
        / (cond_denom * (3.0 - 2.0 * eta[x] - eps[r][x]));
    let t_bottleneck = (wr * (1.0 - 2.0 * eta[r] - eps[x][r] + 2.0 * eta[x])
        + wx * (1.0 - eps[x][r]))
        / (cond_denom * (3.0 - 2.0 * eta[r] - eps[x][r]));

    let degenerate = cond_denom <= 0.0;
    let t_joint = if !degenerate && (wr - wx) / cond_denom <= wx / (1.0 - eta[x]) {
        t_min_device.max(t_bottleneck)
    } else {
        wr / joint_rate_r
    };

    let prod_eta: f64 = eta.iter().product();
    let exclusive_term = instance.source_only.len() as f64 / (1.0 - prod_eta);
    let real = exclusive_term.max(t_joint);
    BatchLossyBound {
        min_wants_device: x,
        bottleneck_device: r,
        t_min_device,
        t_bottleneck,
        t_joint,
        degenerate_condition: degenerate,
        exclusive_term,
        bound: BoundValue::from_real(real),
    }
}

/// Terms of the lossy instant upper bound.
#[derive(Clone, Debug, Serialize)]
pub struct InstantLossyBound {
    pub t_src_exclusive: f64,
    pub t_src_split: f64,
    pub t_src_ready: f64,
    pub t_loc_split: f64,
    pub t_loc_ready: f64,
    /// Chosen (partial, residual) transmitters per split vector.
    pub split_transmitters: Vec<(DeviceId, DeviceId)>,
    pub bound: BoundValue,
}

fn best_partial_transmitter(v: &GroupVector, eps: &[Vec<f64>]) -> DeviceId {
    (0..v.n_devices())
        .max_by(|&a, &b| {
            let score = |x: usize| -> f64 {
                (0..v.n_devices())
                    .filter(|&n| v.entries[n] != v.entries[x])
                    .map(|n| 1.0 - eps[x][n])
                    .sum()
            };
            score(a).partial_cmp(&score(b)).unwrap().then(b.cmp(&a))
        })
        .expect("devices")
}

/// Upper bound on the expected completion time of the lossy instant
/// scheduler, from the first-slot groups.
pub fn ub_instant_lossy(instance: &Instance) -> InstantLossyBound {
    let groups = group_wants(&instance.wants);
    let eta = &instance.loss.eta;
    let eps = &instance.loss.eps;
    let max_eta = eta.iter().copied().fold(0.0f64, f64::max);

    let t_src_exclusive = groups.source_only.len() as f64 / (1.0 - max_eta);
    let t_src_split = groups.local_split.len() as f64 / (1.0 - max_eta);
    let t_src_ready: f64 = groups
        .local_ready
        .iter()
        .map(|v| {
            let worst = v.targets().iter().map(|&n| eta[n]).fold(0.0f64, f64::max);
            1.0 / (1.0 - worst)
        })
        .sum();

    let mut t_loc_split = 0.0;
    let mut split_transmitters = Vec::new();
    for v in &groups.local_split {
        let x = best_partial_transmitter(v, eps);
        let own = v.entries[x];
        let worst_partial = (0..v.n_devices())
            .filter(|&n| v.entries[n] != own)
            .map(|n| eps[x][n])
            .fold(0.0f64, f64::max);
        let residual_targets: Vec<DeviceId> =
            (0..v.n_devices()).filter(|&n| v.entries[n] == own).collect();
        let x_prime = (0..v.n_devices())
            .filter(|&i| v.entries[i] != own)
            .max_by(|&a, &b| {
                let score = |i: usize| -> f64 {
                    residual_targets.iter().map(|&n| 1.0 - eps[i][n]).sum()
                };
                score(a).partial_cmp(&score(b)).unwrap().then(b.cmp(&a))
            })
            .expect("split vector has two distinct entries");
        let worst_residual =
            residual_targets.iter().map(|&n| eps[x_prime][n]).fold(0.0f64, f64::max);
        t_loc_split += 1.0 / (1.0 - worst_partial) + 1.0 / (1.0 - worst_residual);
        split_transmitters.push((x, x_prime));
    }

    let t_loc_ready: f64 = groups
        .local_ready
        .iter()
        .map(|v| {
            let targets = v.targets();
            let x = v
                .holders()
                .into_iter()
                .max_by(|&a, &b| {
                    let score =
                        |i: usize| -> f64 { targets.iter().map(|&n| 1.0 - eps[i][n]).sum() };
                    score(a).partial_cmp(&score(b)).unwrap().then(b.cmp(&a))
                })
                .expect("ready vector has a holder");
            let worst = targets.iter().map(|&n| eps[x][n]).fold(0.0f64, f64::max);
            1.0 / (1.0 - worst)
        })
        .sum();

    let local = t_loc_ready + t_loc_split;
    let src_rest = t_src_ready + t_src_split;
    let real = if local + src_rest == 0.0 {
        t_src_exclusive
    } else {
        t_src_exclusive.max(local * (t_src_exclusive + src_rest) / (local + src_rest))
    };
    InstantLossyBound {
        t_src_exclusive,
        t_src_split,
        t_src_ready,
        t_loc_split,
        t_loc_ready,
        split_transmitters,
        bound: BoundValue::from_real(real),
    }
}

/// Lower bound on the expected completion time of any coding scheme:
/// `max(|source-only| / (1 - prod eta), max_n min_{x != n} |W_n| / (2 - eta_n - eps_xn))`.
pub fn lb_lossy(instance: &Instance) -> BoundValue {
    let w = wants_sizes(instance);
    let eta = &instance.loss.eta;
    let eps = &instance.loss.eps;
    let n = instance.n;
    let prod_eta: f64 = eta.iter().product();
    let exclusive = instance.source_only.len() as f64 / (1.0 - prod_eta);
    let device_term = (0..n)
        .map(|d| {
            (0..n)
                .filter(|&x| x != d)
                .map(|x| w[d] as f64 / (2.0 - eta[d] - eps[x][d]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);
    BoundValue::from_real(exclusive.max(device_term))
}

/// All six bounds of a scenario, as printed by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct AllBounds {
    pub ub_batch_lossless: u32,
    pub ub_instant_lossless: u32,
    pub lb_lossless: u32,
    pub ub_batch_lossy: BoundValue,
    pub ub_instant_lossy: BoundValue,
    pub lb_lossy: BoundValue,
}

pub fn all_bounds(scenario: &Scenario) -> Result<AllBounds> {
    let instance = Instance::build(scenario)?;
    let sizes = wants_sizes(&instance);
    let mc = instance.source_only.len();
    Ok(AllBounds {
        ub_batch_lossless: ub_batch_lossless(&sizes, mc).ceiled,
        ub_instant_lossless: ub_instant_lossless(&instance).ceiled,
        lb_lossless: lb_lossless(&sizes, mc).ceiled,
        ub_batch_lossy: ub_batch_lossy(&instance).bound,
        ub_instant_lossy: ub_instant_lossy(&instance).bound,
        lb_lossy: lb_lossy(&instance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scenario;

    fn instance(wants: &[&[usize]]) -> Instance {
        Instance::build(&Scenario::lossless(wants, 0)).unwrap()
    }

    #[test]
    fn batch_lossless_bound_values() {
        assert_eq!(ub_batch_lossless(&[3, 3, 3], 1).ceiled, 2);
        assert_eq!(ub_batch_lossless(&[0, 0], 0).ceiled, 0);
        assert_eq!(ub_batch_lossless(&[5, 1], 0).ceiled, 3);
    }

    #[test]
    fn lossless_lower_bound_values() {
        assert_eq!(lb_lossless(&[3, 3, 3], 1).ceiled, 2);
        assert_eq!(lb_lossless(&[0, 0, 0], 0).ceiled, 0);
        assert_eq!(lb_lossless(&[4, 1], 0).ceiled, 2);
    }

    #[test]
    fn instant_lossless_bound_values() {
        // ten-packet instance: min(5, max(1, 3, 2.5)) = 3
        let inst = instance(&[&[1, 2, 4, 7, 9], &[1, 2, 5, 7, 10], &[1, 3, 6, 8]]);
        assert_eq!(ub_instant_lossless(&inst).ceiled, 3);
        // five-packet instance: min(max(2.5,1), max(1, 5/3, 1.5)) = 2
        let inst = instance(&[&[1, 4], &[1, 2, 3], &[1, 4, 5]]);
        assert_eq!(ub_instant_lossless(&inst).ceiled, 2);
        let inst = Instance::build(&Scenario::lossless(&[&[], &[]], 0)).unwrap();
        assert_eq!(ub_instant_lossless(&inst).ceiled, 0);
    }

    #[test]
    fn lossy_lower_bound_values() {
        // lossless reduction
        let inst = instance(&[&[1, 2, 3], &[1, 4, 5], &[1, 6, 7]]);
        assert_eq!(lb_lossy(&inst).ceiled, 2);
        assert_eq!(lb_lossless(&[3, 3, 3], 1).ceiled, lb_lossy(&inst).ceiled);
        // |source-only|=2, eta=0.5 both, eps=0, |W|=2 -> ceil(max(2/0.75, 2/1.5)) = 3
        let mut s = Scenario::lossless(&[&[1, 2], &[1, 2]], 0);
        s.eta = vec![0.5, 0.5];
        let inst = Instance::build(&s).unwrap();
        let b = lb_lossy(&inst);
        assert!((b.real - 2.0 / 0.75).abs() < 1e-12);
        assert_eq!(b.ceiled, 3);
    }

    #[test]
    fn batch_lossy_reduces_to_lossless_at_zero_loss() {
        let inst = instance(&[&[1, 2, 3], &[1, 4, 5], &[1, 6, 7]]);
        let b = ub_batch_lossy(&inst);
        assert!(!b.degenerate_condition);
        assert_eq!(b.bound.ceiled, ub_batch_lossless(&[3, 3, 3], 1).ceiled);
        // at zero loss both joint terms collapse to (|W_r| + |W_x|) / 3
        assert!((b.t_min_device - 2.0).abs() < 1e-12);
        assert!((b.t_bottleneck - 2.0).abs() < 1e-12);
    }

    #[test]
    fn instant_lossy_reduces_to_known_value_at_zero_loss() {
        let inst = instance(&[&[1, 2, 4, 7, 9], &[1, 2, 5, 7, 10], &[1, 3, 6, 8]]);
        let b = ub_instant_lossy(&inst);
        assert!((b.t_src_exclusive - 1.0).abs() < 1e-12);
        assert!((b.t_src_split - 3.0).abs() < 1e-12);
        assert!((b.t_src_ready - 1.0).abs() < 1e-12);
        assert!((b.t_loc_ready - 1.0).abs() < 1e-12);
        assert!((b.t_loc_split - 6.0).abs() < 1e-12);
        assert!((b.bound.real - 35.0 / 11.0).abs() < 1e-12);
        assert_eq!(b.bound.ceiled, 4);
    }

    #[test]
    fn lb_is_below_ub_with_uniform_losses() {
        let mut s = Scenario::lossless(&[&[1, 4], &[1, 2, 3], &[1, 4, 5]], 0);
        s.eta = vec![0.2; 3];
        s.eps = vec![vec![0.2; 3]; 3];
        let inst = Instance::build(&s).unwrap();
        let lb = lb_lossy(&inst);
        let ub_b = ub_batch_lossy(&inst);
        let ub_i = ub_instant_lossy(&inst);
        assert!(lb.real <= ub_b.bound.real + 1e-9);
        assert!(lb.real <= ub_i.bound.real + 1e-9);
    }
}
