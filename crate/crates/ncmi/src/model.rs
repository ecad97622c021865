//! Problem instances, the two-stage timeline, per-slot delivery over the two
//! interfaces, and device knowledge bookkeeping.
//!
//! Stage one broadcasts every packet of a file over the cellular link; losses
//! there define each device's Has/Wants sets. Stage two is the repair phase
//! this crate simulates slot by slot: one packet from the source over
//! cellular and (optionally) one packet from a device over D2D, delivered
//! simultaneously. Completion time is the number of stage-two slots until
//! every device can decode everything it wants.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{random_combination, CoeffVector, Subspace};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::rng::derive_rng;

pub type DeviceId = usize;
pub type PacketId = usize;

/// Slot cap factor; a run longer than `50 * M` slots is treated as a bug.
pub const SLOT_CAP_FACTOR: u32 = 50;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodingMode {
    /// Innovation decided by span inclusion; coefficients live in a field
    /// large enough that generic draws never collide in practice.
    #[default]
    Idealized,
    /// GF(2^8) coefficients; an unlucky dependent draw consumes the slot.
    Concrete,
}

/// Per-link Bernoulli loss probabilities. All strictly below one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossModel {
    /// Stage-one cellular loss per device.
    pub eta_stage1: Vec<f64>,
    /// Stage-two cellular loss per device.
    pub eta: Vec<f64>,
    /// D2D loss `eps[k][l]` from transmitter k to receiver l; diagonal unused.
    pub eps: Vec<Vec<f64>>,
}

impl LossModel {
    pub fn lossless(n: usize) -> Self {
        LossModel { eta_stage1: vec![0.0; n], eta: vec![0.0; n], eps: vec![vec![0.0; n]; n] }
    }

    /// True when every stage-two loss probability is zero, in which case the
    /// lossy scheduler variants reduce to their lossless disciplines.
    pub fn is_stage2_lossless(&self) -> bool {
        self.eta.iter().all(|&p| p == 0.0)
            && self.eps.iter().flatten().all(|&p| p == 0.0)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let check = |p: f64, what: &str| {
            if !(0.0..1.0).contains(&p) {
                Err(Error::Config(format!("{what} probability {p} outside [0,1)")))
            } else {
                Ok(())
            }
        };
        if self.eta_stage1.len() != n || self.eta.len() != n || self.eps.len() != n {
            return Err(Error::Config("loss model size does not match device count".into()));
        }
        for &p in &self.eta_stage1 {
            check(p, "stage-one cellular loss")?;
        }
        for &p in &self.eta {
            check(p, "cellular loss")?;
        }
        for row in &self.eps {
            if row.len() != n {
                return Err(Error::Config("eps matrix is not N x N".into()));
            }
            for &p in row {
                check(p, "d2d loss")?;
            }
        }
        Ok(())
    }
}

/// A problem instance: the packet universe (union of Wants sets), the Wants
/// set of each device, loss parameters, coding mode, and master seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub n_devices: usize,
    pub packets: Vec<PacketId>,
    pub wants: Vec<Vec<PacketId>>,
    pub eta_stage1: Vec<f64>,
    pub eta: Vec<f64>,
    pub eps: Vec<Vec<f64>>,
    #[serde(default)]
    pub coding_mode: CodingMode,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    /// A lossless scenario built from Wants sets alone.
    pub fn lossless(wants: &[&[PacketId]], seed: u64) -> Self {
        let n = wants.len();
        let packets: BTreeSet<PacketId> = wants.iter().flat_map(|w| w.iter().copied()).collect();
        let loss = LossModel::lossless(n);
        Scenario {
            n_devices: n,
            packets: packets.into_iter().collect(),
            wants: wants.iter().map(|w| w.to_vec()).collect(),
            eta_stage1: loss.eta_stage1,
            eta: loss.eta,
            eps: loss.eps,
            coding_mode: CodingMode::Idealized,
            seed,
        }
    }

    pub fn loss(&self) -> LossModel {
        LossModel {
            eta_stage1: self.eta_stage1.clone(),
            eta: self.eta.clone(),
            eps: self.eps.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_devices < 2 {
            return Err(Error::Config("at least two devices are required".into()));
        }
        if self.wants.len() != self.n_devices {
            return Err(Error::Config("wants list does not match device count".into()));
        }
        let universe: BTreeSet<PacketId> = self.packets.iter().copied().collect();
        if universe.len() != self.packets.len() {
            return Err(Error::Config("duplicate packet ids".into()));
        }
        let mut wanted: BTreeSet<PacketId> = BTreeSet::new();
        for w in &self.wants {
            for p in w {
                if !universe.contains(p) {
                    return Err(Error::Config(format!("wanted packet {p} is not in the universe")));
                }
                wanted.insert(*p);
            }
        }
        if wanted != universe {
            return Err(Error::Config(
                "every packet in the universe must be wanted by at least one device".into(),
            ));
        }
        self.loss().validate(self.n_devices)
    }
}

/// Dense-index view of a validated scenario. Runners work with packet
/// indices `0..m`; ids are mapped back only at the trace boundary.
#[derive(Clone, Debug)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub packet_ids: Vec<PacketId>,
    pub index_of: BTreeMap<PacketId, usize>,
    /// Initial Wants sets, index space.
    pub wants: Vec<BTreeSet<usize>>,
    /// Initial Has sets (complement within the universe), index space.
    pub has: Vec<BTreeSet<usize>>,
    /// Packets wanted by every device (deliverable only by the source).
    pub source_only: BTreeSet<usize>,
    pub loss: LossModel,
    pub mode: CodingMode,
    pub seed: u64,
}

impl Instance {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let mut packet_ids = scenario.packets.clone();
        packet_ids.sort_unstable();
        let index_of: BTreeMap<PacketId, usize> =
            packet_ids.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let m = packet_ids.len();
        let wants: Vec<BTreeSet<usize>> = scenario
            .wants
            .iter()
            .map(|w| w.iter().map(|p| index_of[p]).collect())
            .collect();
        let has: Vec<BTreeSet<usize>> =
            wants.iter().map(|w| (0..m).filter(|i| !w.contains(i)).collect()).collect();
        let source_only = wants
            .iter()
            .fold(None::<BTreeSet<usize>>, |acc, w| match acc {
                None => Some(w.clone()),
                Some(a) => Some(a.intersection(w).copied().collect()),
            })
            .unwrap_or_default();
        Ok(Instance {
            n: scenario.n_devices,
            m,
            packet_ids,
            index_of,
            wants,
            has,
            source_only,
            loss: scenario.loss(),
            mode: scenario.coding_mode,
            seed: scenario.seed,
        })
    }

    pub fn slot_cap(&self) -> u32 {
        SLOT_CAP_FACTOR * (self.m.max(1) as u32)
    }

    pub fn ids(&self, indices: &BTreeSet<usize>) -> Vec<PacketId> {
        indices.iter().map(|&i| self.packet_ids[i]).collect()
    }
}

/// Runs the stage-one broadcast: each packet of `1..=universe_size` is lost
/// at device n independently with probability `stage1_loss[n]`; packets
/// received everywhere drop out of the universe.
pub fn run_stage_one(
    universe_size: usize,
    n_devices: usize,
    stage1_loss: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Scenario> {
    if n_devices < 2 {
        return Err(Error::Config("at least two devices are required".into()));
    }
    if stage1_loss.len() != n_devices {
        return Err(Error::Config("stage-one loss vector does not match device count".into()));
    }
    for &p in stage1_loss {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("stage-one loss {p} outside [0,1)")));
        }
    }
    let mut wants: Vec<Vec<PacketId>> = vec![Vec::new(); n_devices];
    let mut packets: Vec<PacketId> = Vec::new();
    for p in 1..=universe_size {
        let mut lost_somewhere = false;
        for (n, w) in wants.iter_mut().enumerate() {
            if rng.gen_bool(stage1_loss[n]) {
                w.push(p);
                lost_somewhere = true;
            }
        }
        if lost_somewhere {
            packets.push(p);
        }
    }
    Ok(Scenario {
        n_devices,
        packets,
        wants,
        eta_stage1: stage1_loss.to_vec(),
        // stage-two cellular loss defaults to the stage-one value
        eta: stage1_loss.to_vec(),
        eps: vec![vec![0.0; n_devices]; n_devices],
        coding_mode: CodingMode::Idealized,
        seed: 0,
    })
}

// ---------------------------------------------------------------------------
// Knowledge state
// ---------------------------------------------------------------------------

/// How "done" is judged for a device.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SatisfactionMode {
    /// Batch coding: satisfied at full rank (everything decodable at once).
    Rank,
    /// Instant coding and uncoded schemes: satisfied when the Wants set is
    /// fully decoded.
    Decoded,
}

/// One device's knowledge: its subspace (seeded with the unit vectors of the
/// initial Has set), plus the innovative-arrival counters the stop rules use.
#[derive(Clone, Debug)]
pub struct KnowledgeState<F: Field> {
    pub device: DeviceId,
    pub initial_has: BTreeSet<usize>,
    pub initial_wants: BTreeSet<usize>,
    pub subspace: Subspace<F>,
    pub innovative_d2d: u32,
    pub innovative_total: u32,
}

impl<F: Field> KnowledgeState<F> {
    pub fn new(device: DeviceId, m: usize, has: &BTreeSet<usize>, wants: &BTreeSet<usize>) -> Self {
        KnowledgeState {
            device,
            initial_has: has.clone(),
            initial_wants: wants.clone(),
            subspace: Subspace::from_units(m, has),
            innovative_d2d: 0,
            innovative_total: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.subspace.rank()
    }

    pub fn decoded(&self) -> &BTreeSet<usize> {
        self.subspace.decoded()
    }

    pub fn wants_remaining(&self) -> BTreeSet<usize> {
        self.initial_wants.difference(self.decoded()).copied().collect()
    }

    pub fn satisfied(&self, mode: SatisfactionMode) -> bool {
        match mode {
            SatisfactionMode::Rank => self.subspace.is_full(),
            SatisfactionMode::Decoded => {
                self.initial_wants.iter().all(|p| self.decoded().contains(p))
            }
        }
    }
}

pub fn init_states<F: Field>(instance: &Instance) -> Vec<KnowledgeState<F>> {
    (0..instance.n)
        .map(|d| KnowledgeState::new(d, instance.m, &instance.has[d], &instance.wants[d]))
        .collect()
}

pub fn all_satisfied<F: Field>(states: &[KnowledgeState<F>], mode: SatisfactionMode) -> bool {
    states.iter().all(|s| s.satisfied(mode))
}

// ---------------------------------------------------------------------------
// Transmission plans
// ---------------------------------------------------------------------------

/// The space a coded packet was drawn from, for span-based innovation
/// decisions in idealized mode.
#[derive(Clone, Debug)]
pub enum SpanDesc<F: Field> {
    /// Span of the unit vectors of a packet-index set.
    Support(BTreeSet<usize>),
    /// Snapshot of a transmitter's knowledge basis at planning time.
    Rows(Vec<CoeffVector<F>>),
}

impl<F: Field> SpanDesc<F> {
    fn contained_in(&self, sub: &Subspace<F>) -> bool {
        match self {
            SpanDesc::Support(s) => s.iter().all(|i| sub.decoded().contains(i)),
            SpanDesc::Rows(rows) => sub.contains_rows(rows),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<CoeffVector<F>> {
        match self {
            SpanDesc::Support(s) => random_combination(m, s, rng),
            SpanDesc::Rows(rows) => crate::coding::random_combination_of_rows(rows, rng),
        }
    }
}

/// One planned broadcast on one interface.
#[derive(Clone, Debug)]
pub struct PlannedPacket<F: Field> {
    pub span: SpanDesc<F>,
    /// The concrete coefficients actually transmitted.
    pub vector: CoeffVector<F>,
    /// Receivers for which the packet is innovative at planning time.
    pub targets: Vec<DeviceId>,
    /// Expected number of targeted receivers that get the packet.
    pub expected_successful: f64,
    /// For instantly decodable packets: the combined packet indices. Each
    /// successful targeted receiver decodes its unique missing constituent.
    pub constituents: Option<BTreeSet<usize>>,
}

/// One slot's decision: at most one packet per interface.
#[derive(Clone, Debug)]
pub struct TransmissionPlan<F: Field> {
    pub source: Option<PlannedPacket<F>>,
    pub local: Option<(DeviceId, PlannedPacket<F>)>,
    /// Marks a cellular-only fallback slot in single-interface D2D schemes.
    pub fallback_cellular: bool,
}

impl<F: Field> TransmissionPlan<F> {
    pub fn idle() -> Self {
        TransmissionPlan { source: None, local: None, fallback_cellular: false }
    }

    pub fn is_idle(&self) -> bool {
        self.source.is_none() && self.local.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((t, pkt)) = &self.local {
            if pkt.targets.contains(t) {
                return Err(Error::Invariant(format!("device {t} targets itself")));
            }
        }
        Ok(())
    }
}

/// Expected successful receivers for a source broadcast to `targets`.
pub fn expected_from_source(targets: &[DeviceId], loss: &LossModel) -> f64 {
    targets.iter().map(|&n| 1.0 - loss.eta[n]).sum()
}

/// Expected successful receivers for a D2D broadcast from `t` to `targets`.
pub fn expected_from_device(t: DeviceId, targets: &[DeviceId], loss: &LossModel) -> f64 {
    targets.iter().map(|&n| 1.0 - loss.eps[t][n]).sum()
}

// ---------------------------------------------------------------------------
// Delivery
// ---------------------------------------------------------------------------

/// Per-device outcome of one slot. `None` means no packet on that interface
/// reached for this device (no transmission, or the device was the local
/// transmitter).
#[derive(Clone, Debug, Default, Serialize)]
pub struct DeviceOutcome {
    pub src_received: Option<bool>,
    pub src_innovative: bool,
    pub d2d_received: Option<bool>,
    pub d2d_innovative: bool,
    pub decoded_now: Vec<PacketId>,
}

fn process_arrival<F: Field>(
    state: &mut KnowledgeState<F>,
    pkt: &PlannedPacket<F>,
    mode: CodingMode,
    via_d2d: bool,
    rng: &mut ChaCha8Rng,
    decoded_now: &mut Vec<usize>,
) -> Result<bool> {
    let innovative = match (&pkt.constituents, mode) {
        // Instantly decodable packet: a targeted receiver decodes its unique
        // missing constituent; everyone else gains nothing (no buffering).
        (Some(constituents), _) => {
            if !pkt.targets.contains(&state.device) {
                false
            } else {
                let wants = state.wants_remaining();
                let missing: Vec<usize> =
                    constituents.iter().filter(|p| wants.contains(p)).copied().collect();
                if missing.len() != 1 {
                    return Err(Error::Invariant(format!(
                        "packet over {constituents:?} is not instantly decodable at device {} \
                         (missing {missing:?})",
                        state.device
                    )));
                }
                let p = missing[0];
                let unit = CoeffVector::unit(state.subspace.dim_ambient(), p);
                let inserted = state.subspace.insert_if_innovative(&unit)?;
                debug_assert!(inserted);
                decoded_now.push(p);
                true
            }
        }
        // Concrete coding: the drawn coefficients decide.
        (None, CodingMode::Concrete) => {
            let before = state.decoded().clone();
            let inserted = state.subspace.insert_if_innovative(&pkt.vector)?;
            if inserted {
                decoded_now.extend(state.decoded().difference(&before).copied());
            }
            inserted
        }
        // Idealized coding: the span decides; the stored vector only has to
        // carry the new dimension, so redraw in the vanishing case where the
        // transmitted draw collapses against this receiver's basis.
        (None, CodingMode::Idealized) => {
            if pkt.span.contained_in(&state.subspace) {
                false
            } else {
                let before = state.decoded().clone();
                let mut inserted = state.subspace.insert_if_innovative(&pkt.vector)?;
                while !inserted {
                    let fresh = pkt.span.draw(state.subspace.dim_ambient(), rng)?;
                    inserted = state.subspace.insert_if_innovative(&fresh)?;
                }
                decoded_now.extend(state.decoded().difference(&before).copied());
                true
            }
        }
    };
    if innovative {
        state.innovative_total += 1;
        if via_d2d {
            state.innovative_d2d += 1;
        }
    }
    Ok(innovative)
}

/// Delivers one slot's plan: the cellular copy reaches device n with
/// probability `1 - eta[n]`, the D2D copy with probability `1 - eps[t][n]`,
/// independently; the local transmitter hears only the cellular copy. Each
/// device processes its cellular arrival before its D2D arrival.
///
/// With `lossless` set, every copy arrives and no randomness is consumed for
/// deliveries.
pub fn deliver_slot<F: Field>(
    states: &mut [KnowledgeState<F>],
    plan: &TransmissionPlan<F>,
    loss: &LossModel,
    mode: CodingMode,
    lossless: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DeviceOutcome>> {
    plan.validate()?;
    let mut outcomes: Vec<DeviceOutcome> = vec![DeviceOutcome::default(); states.len()];
    for n in 0..states.len() {
        let mut decoded_now = Vec::new();
        if let Some(pkt) = &plan.source {
            let received = lossless || !rng.gen_bool(loss.eta[n]);
            outcomes[n].src_received = Some(received);
            if received {
                outcomes[n].src_innovative =
                    process_arrival(&mut states[n], pkt, mode, false, rng, &mut decoded_now)?;
            }
        }
        if let Some((t, pkt)) = &plan.local {
            if *t != n {
                let received = lossless || !rng.gen_bool(loss.eps[*t][n]);
                outcomes[n].d2d_received = Some(received);
                if received {
                    outcomes[n].d2d_innovative =
                        process_arrival(&mut states[n], pkt, mode, true, rng, &mut decoded_now)?;
                }
            }
        }
        outcomes[n].decoded_now = decoded_now;
    }
    Ok(outcomes)
}

// ---------------------------------------------------------------------------
// Run results and traces
// ---------------------------------------------------------------------------

/// Trace summary of one planned packet (ids, not coefficients).
#[derive(Clone, Debug, Serialize)]
pub struct PacketTrace {
    pub kind: &'static str,
    /// Packet ids combined or spanned by the transmission.
    pub packets: Vec<PacketId>,
    pub targets: Vec<DeviceId>,
    pub expected_successful: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlotTrace {
    pub slot: u32,
    pub source: Option<PacketTrace>,
    pub local_transmitter: Option<DeviceId>,
    pub local: Option<PacketTrace>,
    pub fallback_cellular: bool,
    pub outcomes: Vec<DeviceOutcome>,
}

/// Result of one stage-two run.
#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    /// Number of stage-two slots until every device was satisfied.
    pub completion_time: u32,
    /// Slot at which each device became satisfied; 0 if satisfied at start.
    pub per_device_satisfaction_slot: Vec<u32>,
    pub trace: Vec<SlotTrace>,
}

pub fn packet_trace<F: Field>(instance: &Instance, pkt: &PlannedPacket<F>) -> PacketTrace {
    let (kind, packets) = match &pkt.constituents {
        Some(c) => ("idnc", instance.ids(c)),
        None => match &pkt.span {
            SpanDesc::Support(s) => ("rlnc", instance.ids(s)),
            SpanDesc::Rows(_) => ("rlnc-knowledge", instance.ids(&pkt.vector.support().into_iter().collect())),
        },
    };
    PacketTrace {
        kind,
        packets,
        targets: pkt.targets.clone(),
        expected_successful: pkt.expected_successful,
    }
}

/// Shared slot-loop bookkeeping for all runners.
pub struct RunRecorder {
    pub record_trace: bool,
    pub trace: Vec<SlotTrace>,
    pub satisfied_at: Vec<u32>,
    pub slots: u32,
}

impl RunRecorder {
    pub fn new<F: Field>(states: &[KnowledgeState<F>], mode: SatisfactionMode, record_trace: bool) -> Self {
        let satisfied_at = states.iter().map(|s| if s.satisfied(mode) { 0 } else { u32::MAX }).collect();
        RunRecorder { record_trace, trace: Vec::new(), satisfied_at, slots: 0 }
    }

    pub fn after_slot<F: Field>(
        &mut self,
        instance: &Instance,
        states: &[KnowledgeState<F>],
        mode: SatisfactionMode,
        plan: &TransmissionPlan<F>,
        outcomes: Vec<DeviceOutcome>,
    ) {
        self.slots += 1;
        for (n, s) in states.iter().enumerate() {
            if self.satisfied_at[n] == u32::MAX && s.satisfied(mode) {
                self.satisfied_at[n] = self.slots;
            }
        }
        if self.record_trace {
            let mut outcomes = outcomes;
            for o in outcomes.iter_mut() {
                for p in o.decoded_now.iter_mut() {
                    *p = instance.packet_ids[*p];
                }
            }
            self.trace.push(SlotTrace {
                slot: self.slots,
                source: plan.source.as_ref().map(|p| packet_trace(instance, p)),
                local_transmitter: plan.local.as_ref().map(|(t, _)| *t),
                local: plan.local.as_ref().map(|(_, p)| packet_trace(instance, p)),
                fallback_cellular: plan.fallback_cellular,
                outcomes,
            });
        }
    }

    pub fn finish(self) -> RunResult {
        let t = self.slots;
        RunResult {
            completion_time: t,
            per_device_satisfaction_slot: self
                .satisfied_at
                .into_iter()
                .map(|s| if s == u32::MAX { t } else { s })
                .collect(),
            trace: self.trace,
        }
    }
}

/// Options shared by every runner.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub tie_break: TieBreak,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tie_break: TieBreak::Seeded, record_trace: false }
    }
}

/// How argmax ties are resolved in the planners.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TieBreak {
    /// Uniform among maximizers, from the run's seeded stream.
    Seeded,
    /// Fixed preference order; used by golden-trace tests.
    Deterministic,
}

/// Picks the maximizer of `key` over `items`. Keys compare exactly; for
/// seeded ties one maximizer is drawn uniformly, for deterministic ties the
/// first in iteration order wins (callers order candidates by preference).
pub fn pick_max_by<T, K: PartialOrd + Copy>(
    items: Vec<(T, K)>,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Option<T> {
    let mut best: Vec<T> = Vec::new();
    let mut best_key: Option<K> = None;
    for (item, key) in items {
        match best_key {
            None => {
                best_key = Some(key);
                best.push(item);
            }
            Some(k) => {
                if key > k {
                    best_key = Some(key);
                    best.clear();
                    best.push(item);
                } else if key == k {
                    best.push(item);
                }
            }
        }
    }
    if best.is_empty() {
        return None;
    }
    let idx = match tie {
        TieBreak::Deterministic => 0,
        TieBreak::Seeded => rng.gen_range(0..best.len()),
    };
    Some(best.swap_remove(idx))
}

/// Derives the runner RNG for a scheme tag over this instance's seed.
pub fn runner_rng(instance: &Instance, tag: u64, lossy: bool) -> ChaCha8Rng {
    derive_rng(instance.seed, &[tag, lossy as u64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Fp61;

    #[test]
    fn stage_one_no_loss_leaves_empty_universe() {
        let mut rng = derive_rng(3, &[]);
        let s = run_stage_one(10, 5, &[0.0; 5], &mut rng).unwrap();
        assert!(s.packets.is_empty());
        assert!(s.wants.iter().all(|w| w.is_empty()));
    }

    #[test]
    fn stage_one_universe_is_union_of_wants() {
        let mut rng = derive_rng(4, &[]);
        let s = run_stage_one(50, 3, &[0.3, 0.4, 0.5], &mut rng).unwrap();
        let union: BTreeSet<PacketId> = s.wants.iter().flatten().copied().collect();
        assert_eq!(union, s.packets.iter().copied().collect());
        s.validate().unwrap();
    }

    #[test]
    fn stage_one_loss_rate_matches_expectation() {
        // E[|W_n|] = 100 * 0.4 = 40, averaged over 500 seeds, tolerance 3
        let mut total = 0usize;
        let trials = 500;
        for seed in 0..trials {
            let mut rng = derive_rng(seed, &[9]);
            let s = run_stage_one(100, 5, &[0.4; 5], &mut rng).unwrap();
            total += s.wants.iter().map(|w| w.len()).sum::<usize>();
            assert!(s.packets.len() <= 100);
        }
        let mean = total as f64 / (trials * 5) as f64;
        assert!((mean - 40.0).abs() < 3.0, "mean wants size {mean}");
    }

    #[test]
    fn scenario_rejects_unwanted_packets() {
        let mut s = Scenario::lossless(&[&[1, 2], &[3]], 0);
        s.packets.push(9);
        assert!(matches!(s.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn delivery_frequency_matches_loss() {
        // single targeted device behind a 0.5-loss cellular link
        let scenario = Scenario {
            eta: vec![0.5, 0.0],
            ..Scenario::lossless(&[&[1], &[2]], 1)
        };
        let instance = Instance::build(&scenario).unwrap();
        let mut rng = derive_rng(6, &[]);
        let mut received = 0u32;
        let trials = 10_000;
        for _ in 0..trials {
            let mut states: Vec<KnowledgeState<Fp61>> = init_states(&instance);
            let support: BTreeSet<usize> = [0usize].into();
            let vector = random_combination(instance.m, &support, &mut rng).unwrap();
            let plan = TransmissionPlan {
                source: Some(PlannedPacket {
                    span: SpanDesc::Support(support.clone()),
                    vector,
                    targets: vec![0],
                    expected_successful: 0.5,
                    constituents: None,
                }),
                local: None,
                fallback_cellular: false,
            };
            let outcomes = deliver_slot(
                &mut states,
                &plan,
                &instance.loss,
                CodingMode::Idealized,
                false,
                &mut rng,
            )
            .unwrap();
            if outcomes[0].src_received == Some(true) {
                received += 1;
            }
        }
        let freq = received as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "delivery frequency {freq}");
    }

    #[test]
    fn lossless_delivery_consumes_no_randomness() {
        let scenario = Scenario::lossless(&[&[1], &[2]], 1);
        let instance = Instance::build(&scenario).unwrap();
        let mut rng = derive_rng(6, &[1]);
        let mut states: Vec<KnowledgeState<Fp61>> = init_states(&instance);
        let support: BTreeSet<usize> = [0usize, 1].into();
        let vector = random_combination(instance.m, &support, &mut rng).unwrap();
        let before = rng.clone();
        let plan = TransmissionPlan {
            source: Some(PlannedPacket {
                span: SpanDesc::Support(support),
                vector,
                targets: vec![0, 1],
                expected_successful: 2.0,
                constituents: None,
            }),
            local: None,
            fallback_cellular: false,
        };
        deliver_slot(&mut states, &plan, &instance.loss, CodingMode::Idealized, true, &mut rng)
            .unwrap();
        assert_eq!(rng, before);
        assert_eq!(states[0].rank(), 2);
        assert_eq!(states[1].rank(), 2);
    }
}
