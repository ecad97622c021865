//! Instantly-decodable slot planner and runner.
//!
//! Packets are XOR combinations built by the grouping pass; every successful
//! targeted receiver decodes exactly one missing packet on arrival, nothing
//! is buffered.
//!
//! Lossless variant: groups are built once. The source walks the queues in
//! the order source-only, split, ready, consuming from the front; the local
//! interface consumes ready then split vectors from the back (splitting a
//! vector into a partial now and its residual next slot), so the two
//! interfaces drain a queue from opposite ends.
//!
//! Lossy variant: regroups every slot and picks by expected successful
//! receivers; the local choice is the global maximum over all ready vectors
//! and all partial splits.

use std::collections::{BTreeSet, VecDeque};

use rand_chacha::ChaCha8Rng;

use crate::coding::xor_combination;
use crate::error::{Error, Result};
use crate::field::{Field, Fp61, Gf256};
use crate::grouping::{group_wants, split_local, GroupVector, Groups};
use crate::model::{
    all_satisfied, deliver_slot, init_states, pick_max_by, runner_rng, CodingMode, DeviceId,
    Instance, KnowledgeState, LossModel, PlannedPacket, RunOptions, RunRecorder, RunResult,
    SatisfactionMode, Scenario, SpanDesc, TieBreak, TransmissionPlan,
};

const RUNNER_TAG: u64 = 0x696e7374; // "inst"

fn idnc_packet<F: Field>(
    m: usize,
    v: &GroupVector,
    targets: Vec<DeviceId>,
    expected: f64,
) -> Result<PlannedPacket<F>> {
    let constituents = v.constituents();
    let vector = xor_combination(m, &constituents)?;
    Ok(PlannedPacket {
        span: SpanDesc::Support(constituents.clone()),
        vector,
        targets,
        expected_successful: expected,
        constituents: Some(constituents),
    })
}

// ---------------------------------------------------------------------------
// Lossless planner state
// ---------------------------------------------------------------------------

/// Queues of unsent vectors, kept in creation order, plus the residual of a
/// split still owed by the local interface.
pub struct InstantQueues {
    pub source_only: VecDeque<GroupVector>,
    pub local_split: VecDeque<GroupVector>,
    pub local_ready: VecDeque<GroupVector>,
    pub pending_residual: Option<GroupVector>,
}

impl InstantQueues {
    pub fn from_groups(groups: Groups) -> Self {
        InstantQueues {
            source_only: groups.source_only.into(),
            local_split: groups.local_split.into(),
            local_ready: groups.local_ready.into(),
            pending_residual: None,
        }
    }
}

/// The transmitter whose partial covers the most receivers; ties to the
/// lowest id.
fn split_transmitter(v: &GroupVector) -> DeviceId {
    let mut best = 0;
    let mut best_count = 0;
    for x in 0..v.n_devices() {
        let count = v.entries.iter().filter(|e| **e != v.entries[x]).count();
        if count > best_count {
            best = x;
            best_count = count;
        }
    }
    best
}

/// One lossless slot: the source consumes the head of source-only, then
/// split, then ready; the local interface sends a pending residual first,
/// else the tail of ready, else splits the tail of split.
pub fn plan_instant_lossless<F: Field>(
    queues: &mut InstantQueues,
    m: usize,
) -> Result<TransmissionPlan<F>> {
    let source = if let Some(v) = queues.source_only.pop_front() {
        Some(v)
    } else if let Some(v) = queues.local_split.pop_front() {
        Some(v)
    } else {
        queues.local_ready.pop_front()
    };
    let source = match source {
        Some(v) => {
            let targets = v.targets();
            let expected = targets.len() as f64;
            Some(idnc_packet(m, &v, targets, expected)?)
        }
        None => None,
    };

    let local = if let Some(res) = queues.pending_residual.take() {
        // lowest-id device that holds the residual's packet
        let x = *res.holders().first().ok_or_else(|| {
            Error::Invariant("split residual has no eligible transmitter".into())
        })?;
        let targets = res.targets();
        let expected = targets.len() as f64;
        Some((x, idnc_packet(m, &res, targets, expected)?))
    } else if let Some(v) = queues.local_ready.pop_back() {
        let x = *v.holders().first().expect("ready vector has a holder");
        let targets = v.targets();
        let expected = targets.len() as f64;
        Some((x, idnc_packet(m, &v, targets, expected)?))
    } else if let Some(v) = queues.local_split.pop_back() {
        let x = split_transmitter(&v);
        let (partial, residual) = split_local(&v, x)?;
        queues.pending_residual = Some(residual);
        let targets = partial.targets();
        let expected = targets.len() as f64;
        Some((x, idnc_packet(m, &partial, targets, expected)?))
    } else {
        None
    };

    Ok(TransmissionPlan { source, local, fallback_cellular: false })
}

// ---------------------------------------------------------------------------
// Lossy planner
// ---------------------------------------------------------------------------

/// Index of a vector within the slot's fresh groups.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
enum Picked {
    SourceOnly(usize),
    Split(usize),
    Ready(usize),
}

fn source_pick(groups: &Groups, loss: &LossModel, tie: TieBreak, rng: &mut ChaCha8Rng) -> Option<Picked> {
    if !groups.source_only.is_empty() {
        return Some(Picked::SourceOnly(0));
    }
    if !groups.local_split.is_empty() {
        return Some(Picked::Split(0));
    }
    if groups.local_ready.is_empty() {
        return None;
    }
    let candidates: Vec<(Picked, f64)> = groups
        .local_ready
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let score: f64 = v.targets().iter().map(|&n| 1.0 - loss.eta[n]).sum();
            (Picked::Ready(i), score)
        })
        .collect();
    pick_max_by(candidates, tie, rng)
}

/// One lossy slot over freshly built groups. The local candidate set is
/// every ready vector from each of its holders and every split vector's
/// partial from each device, minus whatever the source claimed this slot;
/// the candidate with the maximum expected number of successful receivers
/// wins. Deterministic ties prefer ready vectors over partials, later
/// creation over earlier, then the lower transmitter id.
pub fn plan_instant_lossy<F: Field>(
    groups: &Groups,
    m: usize,
    loss: &LossModel,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let source_choice = source_pick(groups, loss, tie, rng);
    let source = match source_choice {
        Some(Picked::SourceOnly(i)) => {
            let v = &groups.source_only[i];
            let targets = v.targets();
            let expected = targets.iter().map(|&n| 1.0 - loss.eta[n]).sum();
            Some(idnc_packet(m, v, targets, expected)?)
        }
        Some(Picked::Split(i)) => {
            let v = &groups.local_split[i];
            let targets = v.targets();
            let expected = targets.iter().map(|&n| 1.0 - loss.eta[n]).sum();
            Some(idnc_packet(m, v, targets, expected)?)
        }
        Some(Picked::Ready(i)) => {
            let v = &groups.local_ready[i];
            let targets = v.targets();
            let expected = targets.iter().map(|&n| 1.0 - loss.eta[n]).sum();
            Some(idnc_packet(m, v, targets, expected)?)
        }
        None => None,
    };

    // (vector id, transmitter, score); preference order for deterministic ties
    let mut candidates: Vec<((Picked, DeviceId), f64)> = Vec::new();
    for (i, v) in groups.local_ready.iter().enumerate().rev() {
        if source_choice == Some(Picked::Ready(i)) {
            continue;
        }
        let targets = v.targets();
        for x in v.holders() {
            let score: f64 = targets.iter().map(|&n| 1.0 - loss.eps[x][n]).sum();
            candidates.push(((Picked::Ready(i), x), score));
        }
    }
    for (i, v) in groups.local_split.iter().enumerate().rev() {
        if source_choice == Some(Picked::Split(i)) {
            continue;
        }
        for x in 0..v.n_devices() {
            let score: f64 = (0..v.n_devices())
                .filter(|&n| v.entries[n] != v.entries[x])
                .map(|n| 1.0 - loss.eps[x][n])
                .sum();
            candidates.push(((Picked::Split(i), x), score));
        }
    }

    let local = match pick_max_by(candidates, tie, rng) {
        Some((Picked::Ready(i), x)) => {
            let v = &groups.local_ready[i];
            let targets = v.targets();
            let expected = targets.iter().map(|&n| 1.0 - loss.eps[x][n]).sum();
            Some((x, idnc_packet(m, v, targets, expected)?))
        }
        Some((Picked::Split(i), x)) => {
            let (partial, _residual) = split_local(&groups.local_split[i], x)?;
            let targets = partial.targets();
            let expected = targets.iter().map(|&n| 1.0 - loss.eps[x][n]).sum();
            Some((x, idnc_packet(m, &partial, targets, expected)?))
        }
        _ => None,
    };

    Ok(TransmissionPlan { source, local, fallback_cellular: false })
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

pub fn run_instant(scenario: &Scenario, lossy: bool, opts: &RunOptions) -> Result<RunResult> {
    let instance = Instance::build(scenario)?;
    match instance.mode {
        CodingMode::Idealized => run_instant_impl::<Fp61>(&instance, lossy, opts),
        CodingMode::Concrete => run_instant_impl::<Gf256>(&instance, lossy, opts),
    }
}

fn wants_remaining<F: Field>(states: &[KnowledgeState<F>]) -> Vec<BTreeSet<usize>> {
    states.iter().map(|s| s.wants_remaining()).collect()
}

fn run_instant_impl<F: Field>(
    instance: &Instance,
    lossy: bool,
    opts: &RunOptions,
) -> Result<RunResult> {
    // with all-zero stage-two losses the per-slot regrouping and scoring
    // reduce to the lossless discipline; run that directly
    let lossy = lossy && !instance.loss.is_stage2_lossless();
    let mut rng = runner_rng(instance, RUNNER_TAG, lossy);
    let mut states: Vec<KnowledgeState<F>> = init_states(instance);
    let mut rec = RunRecorder::new(&states, SatisfactionMode::Decoded, opts.record_trace);
    let cap = instance.slot_cap();
    let mut queues = if lossy {
        None
    } else {
        Some(InstantQueues::from_groups(group_wants(&instance.wants)))
    };
    while !all_satisfied(&states, SatisfactionMode::Decoded) {
        if rec.slots >= cap {
            return Err(Error::Runaway { slots: rec.slots, cap });
        }
        let plan = match queues.as_mut() {
            Some(q) => plan_instant_lossless(q, instance.m)?,
            None => {
                let groups = group_wants(&wants_remaining(&states));
                plan_instant_lossy(&groups, instance.m, &instance.loss, opts.tie_break, &mut rng)?
            }
        };
        if plan.is_idle() {
            return Err(Error::Invariant(
                "instant planner produced an idle slot with unsatisfied devices".into(),
            ));
        }
        let outcomes = deliver_slot(
            &mut states,
            &plan,
            &instance.loss,
            instance.mode,
            !lossy,
            &mut rng,
        )?;
        rec.after_slot(instance, &states, SatisfactionMode::Decoded, &plan, outcomes);
    }
    Ok(rec.finish())
}
