//! Batch (rateless) slot planner and runner.
//!
//! Every transmitted packet is a random linear combination: the source
//! combines everything still missing somewhere, a chosen device combines its
//! whole knowledge. A device is done at full rank, when all of its wanted
//! packets decode at once.
//!
//! The lossless planner picks the device with the largest knowledge as the
//! local transmitter. The lossy planner scores each candidate transmitter by
//! the expected number of targeted receivers that would get its packet and
//! picks the maximum.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use crate::coding::{random_combination, random_combination_of_rows};
use crate::error::{Error, Result};
use crate::field::{Field, Fp61, Gf256};
use crate::model::{
    all_satisfied, deliver_slot, expected_from_device, init_states, pick_max_by, runner_rng,
    CodingMode, DeviceId, Instance, KnowledgeState, PlannedPacket, RunOptions, RunRecorder,
    RunResult, SatisfactionMode, Scenario, SpanDesc, TieBreak, TransmissionPlan,
};

const RUNNER_TAG: u64 = 0x62617463; // "batc"

/// Packets not yet decodable at every device (the source's combining set).
fn union_missing<F: Field>(states: &[KnowledgeState<F>], m: usize) -> BTreeSet<usize> {
    let mut missing = BTreeSet::new();
    for i in 0..m {
        if states.iter().any(|s| !s.decoded().contains(&i)) {
            missing.insert(i);
        }
    }
    missing
}

/// Devices for which a fresh combination from `x`'s knowledge is innovative.
fn targeted_receivers<F: Field>(states: &[KnowledgeState<F>], x: DeviceId) -> Vec<DeviceId> {
    (0..states.len())
        .filter(|&k| k != x && !states[k].subspace.contains_space(&states[x].subspace))
        .collect()
}

/// Per-device expected successful receivers of a knowledge broadcast
/// (the lossy local selection scores).
pub fn batch_lossy_scores<F: Field>(
    states: &[KnowledgeState<F>],
    eps: &[Vec<f64>],
) -> Vec<f64> {
    (0..states.len())
        .map(|n| {
            targeted_receivers(states, n)
                .iter()
                .map(|&k| 1.0 - eps[n][k])
                .sum()
        })
        .collect()
}

/// True once every device has met the local stop rule: `|W_n| - |M_c|`
/// innovative packets over D2D, or `|W_n|` innovative packets in total.
fn local_quota_met<F: Field>(states: &[KnowledgeState<F>], instance: &Instance) -> bool {
    let mc = instance.source_only.len() as u32;
    states.iter().all(|s| {
        let w = s.initial_wants.len() as u32;
        s.innovative_d2d >= w.saturating_sub(mc) || s.innovative_total >= w
    })
}

fn source_packet<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    expected_eta: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Option<PlannedPacket<F>>> {
    let missing = union_missing(states, instance.m);
    if missing.is_empty() {
        return Ok(None);
    }
    let targets: Vec<DeviceId> =
        (0..states.len()).filter(|&n| !states[n].subspace.is_full()).collect();
    let expected = targets.iter().map(|&n| 1.0 - expected_eta[n]).sum();
    let vector = random_combination(instance.m, &missing, rng)?;
    Ok(Some(PlannedPacket {
        span: SpanDesc::Support(missing),
        vector,
        targets,
        expected_successful: expected,
        constituents: None,
    }))
}

fn local_packet<F: Field>(
    states: &[KnowledgeState<F>],
    x: DeviceId,
    targets: Vec<DeviceId>,
    expected: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(DeviceId, PlannedPacket<F>)> {
    let rows = states[x].subspace.rows().to_vec();
    let vector = random_combination_of_rows(&rows, rng)?;
    Ok((x, PlannedPacket {
        span: SpanDesc::Rows(rows),
        vector,
        targets,
        expected_successful: expected,
        constituents: None,
    }))
}

/// Lossless slot plan: the largest-knowledge device broadcasts a combination
/// of everything it has; the local transmission is omitted once every device
/// has met its stop quota or no receiver would gain anything.
pub fn plan_batch_lossless<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let zeros = vec![0.0; states.len()];
    let source = source_packet(states, instance, &zeros, rng)?;
    let mut local = None;
    if !local_quota_met(states, instance) {
        let candidates: Vec<(DeviceId, usize)> =
            (0..states.len()).map(|n| (n, states[n].rank())).collect();
        let x = pick_max_by(candidates, tie, rng).expect("nonempty device set");
        let targets = targeted_receivers(states, x);
        if !targets.is_empty() {
            let expected = targets.len() as f64;
            local = Some(local_packet(states, x, targets, expected, rng)?);
        }
    }
    Ok(TransmissionPlan { source, local, fallback_cellular: false })
}

/// Lossy slot plan: transmitter with the maximum expected number of
/// successful receivers; the local transmission is omitted only when no
/// device's knowledge is innovative for anyone. Deterministic ties prefer
/// the larger knowledge, then the lower device id.
pub fn plan_batch_lossy<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let source = source_packet(states, instance, &instance.loss.eta, rng)?;
    let scores = batch_lossy_scores(states, &instance.loss.eps);
    let x = match tie {
        TieBreak::Seeded => {
            let candidates: Vec<(DeviceId, f64)> = scores.iter().copied().enumerate().collect();
            pick_max_by(candidates, tie, rng)
        }
        TieBreak::Deterministic => {
            let candidates: Vec<(DeviceId, (f64, usize))> = scores
                .iter()
                .enumerate()
                .map(|(n, &s)| (n, (s, states[n].rank())))
                .collect();
            pick_max_by(candidates, tie, rng)
        }
    }
    .expect("nonempty device set");
    let mut local = None;
    let targets = targeted_receivers(states, x);
    if !targets.is_empty() {
        let expected = expected_from_device(x, &targets, &instance.loss);
        local = Some(local_packet(states, x, targets, expected, rng)?);
    }
    Ok(TransmissionPlan { source, local, fallback_cellular: false })
}

pub fn run_batch(scenario: &Scenario, lossy: bool, opts: &RunOptions) -> Result<RunResult> {
    let instance = Instance::build(scenario)?;
    match instance.mode {
        CodingMode::Idealized => run_batch_impl::<Fp61>(&instance, lossy, opts),
        CodingMode::Concrete => run_batch_impl::<Gf256>(&instance, lossy, opts),
    }
}

fn run_batch_impl<F: Field>(
    instance: &Instance,
    lossy: bool,
    opts: &RunOptions,
) -> Result<RunResult> {
    // with all-zero stage-two losses the lossy selection rule reduces to the
    // lossless one; run that discipline directly so the traces coincide
    let lossy = lossy && !instance.loss.is_stage2_lossless();
    let mut rng = runner_rng(instance, RUNNER_TAG, lossy);
    let mut states: Vec<KnowledgeState<F>> = init_states(instance);
    let mut rec = RunRecorder::new(&states, SatisfactionMode::Rank, opts.record_trace);
    let cap = instance.slot_cap();
    while !all_satisfied(&states, SatisfactionMode::Rank) {
        if rec.slots >= cap {
            return Err(Error::Runaway { slots: rec.slots, cap });
        }
        let plan = if lossy {
            plan_batch_lossy(&states, instance, opts.tie_break, &mut rng)?
        } else {
            plan_batch_lossless(&states, instance, opts.tie_break, &mut rng)?
        };
        let outcomes = deliver_slot(
            &mut states,
            &plan,
            &instance.loss,
            instance.mode,
            !lossy,
            &mut rng,
        )?;
        rec.after_slot(instance, &states, SatisfactionMode::Rank, &plan, outcomes);
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expected_from_source;

    fn example_two() -> Scenario {
        Scenario::lossless(&[&[1, 2, 3], &[1, 4, 5], &[1, 6, 7]], 17)
    }

    #[test]
    fn lossless_three_device_instance_completes_in_two_slots() {
        let opts = RunOptions { record_trace: true, ..RunOptions::default() };
        let r = run_batch(&example_two(), false, &opts).unwrap();
        assert_eq!(r.completion_time, 2);
        assert_eq!(r.per_device_satisfaction_slot, vec![2, 2, 2]);
    }

    #[test]
    fn lossless_first_slot_plan_matches_worked_example() {
        let scenario = example_two();
        let instance = Instance::build(&scenario).unwrap();
        let states: Vec<KnowledgeState<Fp61>> = init_states(&instance);
        let mut rng = runner_rng(&instance, RUNNER_TAG, false);
        let plan =
            plan_batch_lossless(&states, &instance, TieBreak::Deterministic, &mut rng).unwrap();
        let src = plan.source.unwrap();
        match &src.span {
            SpanDesc::Support(s) => assert_eq!(s.len(), 7, "combines p1..p7"),
            _ => panic!("source combines a support set"),
        }
        let (x, pkt) = plan.local.unwrap();
        assert_eq!(x, 0, "rank tie broken to the lowest id");
        // device A combines its Has set {p4..p7}
        assert_eq!(pkt.vector.support(), vec![3, 4, 5, 6]);
        assert_eq!(pkt.targets, vec![1, 2]);
    }

    #[test]
    fn lossless_slot_gives_two_ranks_to_receivers_and_one_to_the_transmitter() {
        let scenario = example_two();
        let instance = Instance::build(&scenario).unwrap();
        let mut states: Vec<KnowledgeState<Fp61>> = init_states(&instance);
        let mut rng = runner_rng(&instance, RUNNER_TAG, false);
        let plan =
            plan_batch_lossless(&states, &instance, TieBreak::Deterministic, &mut rng).unwrap();
        let before: Vec<usize> = states.iter().map(|s| s.rank()).collect();
        deliver_slot(&mut states, &plan, &instance.loss, CodingMode::Idealized, true, &mut rng)
            .unwrap();
        assert_eq!(states[0].rank(), before[0] + 1, "transmitter hears only the source");
        assert_eq!(states[1].rank(), before[1] + 2);
        assert_eq!(states[2].rank(), before[2] + 2);
    }

    #[test]
    fn empty_wants_completes_immediately() {
        // one packet must exist to keep the universe nonempty for the peer
        let scenario = Scenario::lossless(&[&[], &[1]], 3);
        let r = run_batch(&scenario, false, &RunOptions::default()).unwrap();
        assert_eq!(r.per_device_satisfaction_slot[0], 0);
        assert_eq!(r.completion_time, 1);
    }

    #[test]
    fn single_unsatisfied_device_served_by_peer_in_one_slot() {
        // W_A = {1}, W_B empty: B holds p1 and transmits it
        let scenario = Scenario::lossless(&[&[1], &[]], 5);
        let opts = RunOptions { record_trace: true, ..RunOptions::default() };
        let r = run_batch(&scenario, false, &opts).unwrap();
        assert_eq!(r.completion_time, 1);
        assert_eq!(r.trace[0].local_transmitter, Some(1));
    }

    #[test]
    fn lossy_scores_match_worked_example() {
        let mut scenario = example_two();
        scenario.eta = vec![0.35, 0.4, 0.45];
        scenario.eps = vec![
            vec![0.0, 0.1, 0.3],
            vec![0.1, 0.0, 0.2],
            vec![0.3, 0.2, 0.0],
        ];
        let instance = Instance::build(&scenario).unwrap();
        let states: Vec<KnowledgeState<Fp61>> = init_states(&instance);
        let scores = batch_lossy_scores(&states, &instance.loss.eps);
        assert!((scores[0] - 1.6).abs() < 1e-12);
        assert!((scores[1] - 1.7).abs() < 1e-12);
        assert!((scores[2] - 1.5).abs() < 1e-12);
        let src_expected = expected_from_source(&[0, 1, 2], &instance.loss);
        assert!((src_expected - 1.8).abs() < 1e-12);
        let mut rng = runner_rng(&instance, RUNNER_TAG, true);
        let plan =
            plan_batch_lossy(&states, &instance, TieBreak::Deterministic, &mut rng).unwrap();
        assert_eq!(plan.local.unwrap().0, 1, "device B maximizes the score");
    }

    #[test]
    fn lossy_with_zero_losses_matches_lossless_completion() {
        let scenario = example_two();
        let opts =
            RunOptions { tie_break: TieBreak::Deterministic, record_trace: false };
        let lossless = run_batch(&scenario, false, &opts).unwrap();
        let lossy = run_batch(&scenario, true, &opts).unwrap();
        assert_eq!(lossless.completion_time, 2);
        assert_eq!(lossy.completion_time, 2);
    }

    #[test]
    fn lossy_run_terminates_and_respects_loss() {
        let mut scenario = example_two();
        scenario.eta = vec![0.3; 3];
        scenario.eps = vec![vec![0.3; 3]; 3];
        let r = run_batch(&scenario, true, &RunOptions::default()).unwrap();
        assert!(r.completion_time >= 2);
    }
}
