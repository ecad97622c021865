//! Comparison schemes: no coding over both interfaces, and single-interface
//! batch/instant coding over cellular or D2D links.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::coding::{random_combination, random_combination_of_rows};
use crate::error::{Error, Result};
use crate::field::{Field, Fp61, Gf256};
use crate::grouping::{group_wants, split_local, GroupVector, Groups};
use crate::instant::InstantQueues;
use crate::model::{
    all_satisfied, deliver_slot, init_states, pick_max_by, runner_rng, CodingMode, DeviceId,
    Instance, KnowledgeState, LossModel, PlannedPacket, RunOptions, RunRecorder, RunResult,
    SatisfactionMode, Scenario, SpanDesc, TieBreak, TransmissionPlan,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BaselineScheme {
    /// Uncoded packets on both interfaces, most-receivers-first.
    NoncMulti,
    /// Batch coding from the source only.
    NcsiBatchCell,
    /// Batch coding over D2D only; source-exclusive packets are fetched
    /// uncoded over cellular first.
    NcsiBatchD2d,
    /// Instantly decodable packets from the source only.
    NcsiInstantCell,
    /// Instantly decodable packets over D2D only, with the same cellular
    /// fallback for source-exclusive packets.
    NcsiInstantD2d,
}

impl BaselineScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineScheme::NoncMulti => "nonc-multi",
            BaselineScheme::NcsiBatchCell => "ncsi-batch-cell",
            BaselineScheme::NcsiBatchD2d => "ncsi-batch-d2d",
            BaselineScheme::NcsiInstantCell => "ncsi-instant-cell",
            BaselineScheme::NcsiInstantD2d => "ncsi-instant-d2d",
        }
    }
}

impl FromStr for BaselineScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonc-multi" => Ok(BaselineScheme::NoncMulti),
            "ncsi-batch-cell" => Ok(BaselineScheme::NcsiBatchCell),
            "ncsi-batch-d2d" => Ok(BaselineScheme::NcsiBatchD2d),
            "ncsi-instant-cell" => Ok(BaselineScheme::NcsiInstantCell),
            "ncsi-instant-d2d" => Ok(BaselineScheme::NcsiInstantD2d),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

pub fn run_baseline(
    scenario: &Scenario,
    scheme: BaselineScheme,
    lossy: bool,
    opts: &RunOptions,
) -> Result<RunResult> {
    let instance = Instance::build(scenario)?;
    match instance.mode {
        CodingMode::Idealized => run_baseline_impl::<Fp61>(&instance, scheme, lossy, opts),
        CodingMode::Concrete => run_baseline_impl::<Gf256>(&instance, scheme, lossy, opts),
    }
}

fn run_baseline_impl<F: Field>(
    instance: &Instance,
    scheme: BaselineScheme,
    lossy: bool,
    opts: &RunOptions,
) -> Result<RunResult> {
    let lossy = lossy && !instance.loss.is_stage2_lossless();
    // planning scores use the real losses only in the lossy variant
    let eff_loss = if lossy { instance.loss.clone() } else { LossModel::lossless(instance.n) };
    let tag = 0x6261_7365 + scheme as u64; // "base" + scheme
    let mut rng = runner_rng(instance, tag, lossy);
    let mut states: Vec<KnowledgeState<F>> = init_states(instance);
    let mode = match scheme {
        BaselineScheme::NcsiBatchCell | BaselineScheme::NcsiBatchD2d => SatisfactionMode::Rank,
        _ => SatisfactionMode::Decoded,
    };
    let mut rec = RunRecorder::new(&states, mode, opts.record_trace);
    let cap = instance.slot_cap();

    // per-scheme persistent state
    let mut pending_exclusive: Vec<usize> = instance.source_only.iter().copied().collect();
    let mut queues = match scheme {
        BaselineScheme::NcsiInstantCell if !lossy => {
            Some(InstantQueues::from_groups(group_wants(&instance.wants)))
        }
        _ => None,
    };

    while !all_satisfied(&states, mode) {
        if rec.slots >= cap {
            return Err(Error::Runaway { slots: rec.slots, cap });
        }
        let plan: TransmissionPlan<F> = match scheme {
            BaselineScheme::NoncMulti => {
                plan_nonc(&states, instance, &eff_loss, opts.tie_break, &mut rng)?
            }
            BaselineScheme::NcsiBatchCell => plan_batch_cell(&states, instance, &eff_loss, &mut rng)?,
            BaselineScheme::NcsiBatchD2d => plan_batch_d2d(
                &states,
                instance,
                &mut pending_exclusive,
                opts.tie_break,
                &mut rng,
            )?,
            BaselineScheme::NcsiInstantCell => match queues.as_mut() {
                Some(q) => plan_instant_cell_queued(q, instance)?,
                None => plan_instant_cell_fresh(&states, instance)?,
            },
            BaselineScheme::NcsiInstantD2d => {
                plan_instant_d2d(&states, instance, &eff_loss, opts.tie_break, &mut rng)?
            }
        };
        if plan.is_idle() {
            return Err(Error::Invariant(format!(
                "{} produced an idle slot with unsatisfied devices",
                scheme.as_str()
            )));
        }
        let outcomes =
            deliver_slot(&mut states, &plan, &instance.loss, instance.mode, !lossy, &mut rng)?;
        rec.after_slot(instance, &states, mode, &plan, outcomes);
    }
    Ok(rec.finish())
}

fn uncoded_packet<F: Field>(
    m: usize,
    p: usize,
    targets: Vec<DeviceId>,
    expected: f64,
) -> PlannedPacket<F> {
    let constituents: BTreeSet<usize> = [p].into();
    PlannedPacket {
        span: SpanDesc::Support(constituents.clone()),
        vector: crate::coding::CoeffVector::unit(m, p),
        targets,
        expected_successful: expected,
        constituents: Some(constituents),
    }
}

fn idnc_from_vector<F: Field>(
    m: usize,
    v: &GroupVector,
    targets: Vec<DeviceId>,
    expected: f64,
) -> Result<PlannedPacket<F>> {
    let constituents = v.constituents();
    let vector = crate::coding::xor_combination(m, &constituents)?;
    Ok(PlannedPacket {
        span: SpanDesc::Support(constituents.clone()),
        vector,
        targets,
        expected_successful: expected,
        constituents: Some(constituents),
    })
}

// --- no network coding, both interfaces ------------------------------------

fn plan_nonc<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    eff_loss: &LossModel,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let wants: Vec<BTreeSet<usize>> = states.iter().map(|s| s.wants_remaining()).collect();
    let missing: BTreeSet<usize> = wants.iter().flatten().copied().collect();

    let src_candidates: Vec<(usize, f64)> = missing
        .iter()
        .map(|&p| {
            let score: f64 = (0..states.len())
                .filter(|&n| wants[n].contains(&p))
                .map(|n| 1.0 - eff_loss.eta[n])
                .sum();
            (p, score)
        })
        .collect();
    let src_pick = pick_max_by(src_candidates, tie, rng);
    let source = src_pick.map(|p| {
        let targets: Vec<DeviceId> =
            (0..states.len()).filter(|&n| wants[n].contains(&p)).collect();
        let expected = targets.iter().map(|&n| 1.0 - eff_loss.eta[n]).sum();
        uncoded_packet(instance.m, p, targets, expected)
    });

    let mut loc_candidates: Vec<((usize, DeviceId), f64)> = Vec::new();
    for &p in &missing {
        if src_pick == Some(p) {
            continue;
        }
        for x in 0..states.len() {
            if !states[x].decoded().contains(&p) {
                continue;
            }
            let targets: Vec<DeviceId> =
                (0..states.len()).filter(|&n| n != x && wants[n].contains(&p)).collect();
            if targets.is_empty() {
                continue;
            }
            let score: f64 = targets.iter().map(|&n| 1.0 - eff_loss.eps[x][n]).sum();
            loc_candidates.push(((p, x), score));
        }
    }
    let local = pick_max_by(loc_candidates, tie, rng).map(|(p, x)| {
        let targets: Vec<DeviceId> =
            (0..states.len()).filter(|&n| n != x && wants[n].contains(&p)).collect();
        let expected = targets.iter().map(|&n| 1.0 - eff_loss.eps[x][n]).sum();
        (x, uncoded_packet(instance.m, p, targets, expected))
    });

    Ok(TransmissionPlan { source, local, fallback_cellular: false })
}

// --- single-interface batch coding ------------------------------------------

fn union_missing<F: Field>(states: &[KnowledgeState<F>], m: usize) -> BTreeSet<usize> {
    (0..m).filter(|i| states.iter().any(|s| !s.decoded().contains(i))).collect()
}

fn plan_batch_cell<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    eff_loss: &LossModel,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let missing = union_missing(states, instance.m);
    if missing.is_empty() {
        return Ok(TransmissionPlan::idle());
    }
    let targets: Vec<DeviceId> =
        (0..states.len()).filter(|&n| !states[n].subspace.is_full()).collect();
    let expected = targets.iter().map(|&n| 1.0 - eff_loss.eta[n]).sum();
    let vector = random_combination(instance.m, &missing, rng)?;
    Ok(TransmissionPlan {
        source: Some(PlannedPacket {
            span: SpanDesc::Support(missing),
            vector,
            targets,
            expected_successful: expected,
            constituents: None,
        }),
        local: None,
        fallback_cellular: false,
    })
}

fn plan_batch_d2d<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    pending_exclusive: &mut Vec<usize>,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    // source-exclusive packets go out uncoded over cellular until some device
    // holds them; the D2D interface idles on those slots
    pending_exclusive.retain(|p| !states.iter().any(|s| s.decoded().contains(p)));
    if let Some(&p) = pending_exclusive.first() {
        let targets: Vec<DeviceId> = (0..states.len())
            .filter(|&n| states[n].wants_remaining().contains(&p))
            .collect();
        let expected = targets.iter().map(|&n| 1.0 - instance.loss.eta[n]).sum();
        return Ok(TransmissionPlan {
            source: Some(uncoded_packet(instance.m, p, targets, expected)),
            local: None,
            fallback_cellular: true,
        });
    }

    let candidates: Vec<(DeviceId, usize)> =
        (0..states.len()).map(|n| (n, states[n].rank())).collect();
    let x = pick_max_by(candidates, tie, rng).expect("nonempty device set");
    let targets: Vec<DeviceId> = (0..states.len())
        .filter(|&k| k != x && !states[k].subspace.contains_space(&states[x].subspace))
        .collect();
    if targets.is_empty() {
        return Err(Error::Invariant(
            "d2d batch transmitter has no receiver to serve".into(),
        ));
    }
    let expected = targets.iter().map(|&k| 1.0 - instance.loss.eps[x][k]).sum();
    let rows = states[x].subspace.rows().to_vec();
    let vector = random_combination_of_rows(&rows, rng)?;
    Ok(TransmissionPlan {
        source: None,
        local: Some((x, PlannedPacket {
            span: SpanDesc::Rows(rows),
            vector,
            targets,
            expected_successful: expected,
            constituents: None,
        })),
        fallback_cellular: false,
    })
}

// --- single-interface instant coding ----------------------------------------

fn plan_instant_cell_queued<F: Field>(
    queues: &mut InstantQueues,
    instance: &Instance,
) -> Result<TransmissionPlan<F>> {
    let v = queues
        .source_only
        .pop_front()
        .or_else(|| queues.local_split.pop_front())
        .or_else(|| queues.local_ready.pop_front());
    let Some(v) = v else {
        return Ok(TransmissionPlan::idle());
    };
    let targets = v.targets();
    let expected = targets.len() as f64;
    Ok(TransmissionPlan {
        source: Some(idnc_from_vector(instance.m, &v, targets, expected)?),
        local: None,
        fallback_cellular: false,
    })
}

fn plan_instant_cell_fresh<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
) -> Result<TransmissionPlan<F>> {
    let wants: Vec<BTreeSet<usize>> = states.iter().map(|s| s.wants_remaining()).collect();
    let groups = group_wants(&wants);
    let v = groups
        .source_only
        .first()
        .or_else(|| groups.local_split.first())
        .or_else(|| groups.local_ready.first());
    let Some(v) = v else {
        return Ok(TransmissionPlan::idle());
    };
    let targets = v.targets();
    let expected = targets.iter().map(|&n| 1.0 - instance.loss.eta[n]).sum();
    Ok(TransmissionPlan {
        source: Some(idnc_from_vector(instance.m, v, targets, expected)?),
        local: None,
        fallback_cellular: false,
    })
}

fn plan_instant_d2d<F: Field>(
    states: &[KnowledgeState<F>],
    instance: &Instance,
    eff_loss: &LossModel,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<TransmissionPlan<F>> {
    let wants: Vec<BTreeSet<usize>> = states.iter().map(|s| s.wants_remaining()).collect();
    let groups: Groups = group_wants(&wants);

    // packets wanted by everyone exist only at the source
    if let Some(v) = groups.source_only.first() {
        let targets = v.targets();
        let expected = targets.iter().map(|&n| 1.0 - instance.loss.eta[n]).sum();
        return Ok(TransmissionPlan {
            source: Some(idnc_from_vector(instance.m, v, targets, expected)?),
            local: None,
            fallback_cellular: true,
        });
    }

    #[derive(Copy, Clone, PartialEq, Eq)]
    enum Pick {
        Ready(usize),
        Split(usize),
    }
    let mut candidates: Vec<((Pick, DeviceId), f64)> = Vec::new();
    for (i, v) in groups.local_ready.iter().enumerate().rev() {
        let targets = v.targets();
        for x in v.holders() {
            let score: f64 = targets.iter().map(|&n| 1.0 - eff_loss.eps[x][n]).sum();
            candidates.push(((Pick::Ready(i), x), score));
        }
    }
    for (i, v) in groups.local_split.iter().enumerate().rev() {
        for x in 0..v.n_devices() {
            let score: f64 = (0..v.n_devices())
                .filter(|&n| v.entries[n] != v.entries[x])
                .map(|n| 1.0 - eff_loss.eps[x][n])
                .sum();
            candidates.push(((Pick::Split(i), x), score));
        }
    }
    let local = match pick_max_by(candidates, tie, rng) {
        Some((Pick::Ready(i), x)) => {
            let v = &groups.local_ready[i];
            let targets = v.targets();
            let expected = targets.iter().map(|&n| 1.0 - eff_loss.eps[x][n]).sum();
            Some((x, idnc_from_vector(instance.m, v, targets, expected)?))
        }
        Some((Pick::Split(i), x)) => {
            let (partial, _) = split_local(&groups.local_split[i], x)?;
            let targets = partial.targets();
            let expected = targets.iter().map(|&n| 1.0 - eff_loss.eps[x][n]).sum();
            Some((x, idnc_from_vector(instance.m, &partial, targets, expected)?))
        }
        None => None,
    };
    Ok(TransmissionPlan { source: None, local, fallback_cellular: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::run_batch;

    /// Four packets, one missing per device except two at the last.
    fn fig_missing() -> Scenario {
        Scenario::lossless(&[&[1], &[2], &[3, 4]], 13)
    }

    #[test]
    fn nonc_multi_needs_two_slots_for_four_uncoded_packets() {
        let opts = RunOptions { tie_break: TieBreak::Deterministic, record_trace: true };
        let r = run_baseline(&fig_missing(), BaselineScheme::NoncMulti, false, &opts).unwrap();
        assert_eq!(r.completion_time, 2);
        for slot in &r.trace {
            for pkt in slot.source.iter().chain(slot.local.iter()) {
                assert_eq!(pkt.packets.len(), 1, "uncoded packets only");
            }
        }
    }

    #[test]
    fn batch_cell_needs_the_largest_wants_set() {
        let r = run_baseline(
            &fig_missing(),
            BaselineScheme::NcsiBatchCell,
            false,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(r.completion_time, 2);
    }

    #[test]
    fn instant_d2d_pairs_packets_across_devices() {
        let opts = RunOptions { tie_break: TieBreak::Deterministic, record_trace: true };
        let r =
            run_baseline(&fig_missing(), BaselineScheme::NcsiInstantD2d, false, &opts).unwrap();
        assert_eq!(r.completion_time, 2);
        for slot in &r.trace {
            assert!(slot.source.is_none(), "no source-exclusive packets here");
        }
    }

    #[test]
    fn batch_d2d_fetches_exclusive_packets_over_cellular_first() {
        // p1 is wanted by everyone
        let scenario = Scenario::lossless(&[&[1, 2], &[1, 3], &[1, 4]], 29);
        let opts = RunOptions { tie_break: TieBreak::Deterministic, record_trace: true };
        let r = run_baseline(&scenario, BaselineScheme::NcsiBatchD2d, false, &opts).unwrap();
        assert!(r.trace[0].fallback_cellular);
        assert_eq!(r.trace[0].source.as_ref().unwrap().packets, vec![1]);
        assert!(r.trace[1..].iter().all(|s| !s.fallback_cellular));
    }

    #[test]
    fn instant_cell_sends_groups_in_class_order() {
        // groups: source-only {1}, split {2+4}? -- W_A={1,4},W_B={1,2,3},W_C={1,4,5}
        let scenario = Scenario::lossless(&[&[1, 4], &[1, 2, 3], &[1, 4, 5]], 7);
        let opts = RunOptions { tie_break: TieBreak::Deterministic, record_trace: true };
        let r =
            run_baseline(&scenario, BaselineScheme::NcsiInstantCell, false, &opts).unwrap();
        assert_eq!(r.completion_time, 3);
        let sent: Vec<Vec<usize>> =
            r.trace.iter().map(|s| s.source.as_ref().unwrap().packets.clone()).collect();
        assert_eq!(sent, vec![vec![1], vec![2, 4], vec![3, 5]]);
    }

    #[test]
    fn dual_interface_batch_dominates_single_interface() {
        for seed in 0..20 {
            let mut rng = crate::rng::derive_rng(seed, &[555]);
            let scenario = crate::model::run_stage_one(12, 4, &[0.4; 4], &mut rng).unwrap();
            if scenario.packets.is_empty() {
                continue;
            }
            let opts = RunOptions::default();
            let t_ncmi = run_batch(&scenario, false, &opts).unwrap().completion_time;
            let t_cell =
                run_baseline(&scenario, BaselineScheme::NcsiBatchCell, false, &opts)
                    .unwrap()
                    .completion_time;
            let t_d2d = run_baseline(&scenario, BaselineScheme::NcsiBatchD2d, false, &opts)
                .unwrap()
                .completion_time;
            assert!(t_ncmi <= t_cell, "seed {seed}: {t_ncmi} > cell {t_cell}");
            assert!(t_ncmi <= t_d2d, "seed {seed}: {t_ncmi} > d2d {t_d2d}");
        }
    }
}
