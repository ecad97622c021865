//! Brute-force optimal completion time for tiny lossless instances, used to
//! validate the bounds and schedulers from an independent direction.
//!
//! The search works at the subspace level under idealized innovation
//! semantics: per slot the source either idles or broadcasts a generic
//! combination spanning the whole universe, and the local interface either
//! idles or has one device broadcast a generic combination of its entire
//! knowledge. Iterative deepening returns the minimum number of slots after
//! which every device reaches full rank.

use std::collections::BTreeSet;

use rand_chacha::ChaCha8Rng;

use crate::coding::{random_combination, random_combination_of_rows, Subspace};
use crate::error::{Error, Result};
use crate::field::Fp61;
use crate::model::{Instance, Scenario};
use crate::rng::derive_rng;

pub const MAX_DEVICES: usize = 3;
pub const MAX_PACKETS: usize = 4;

fn all_full(states: &[Subspace<Fp61>]) -> bool {
    states.iter().all(|s| s.is_full())
}

fn apply_slot(
    states: &[Subspace<Fp61>],
    m: usize,
    source: bool,
    local: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Subspace<Fp61>>> {
    let mut next = states.to_vec();
    if source {
        let full: BTreeSet<usize> = (0..m).collect();
        let v = random_combination::<Fp61, _>(m, &full, rng)?;
        for s in next.iter_mut() {
            if !s.is_full() {
                let mut inserted = s.insert_if_innovative(&v)?;
                while !inserted {
                    let fresh = random_combination::<Fp61, _>(m, &full, rng)?;
                    inserted = s.insert_if_innovative(&fresh)?;
                }
            }
        }
    }
    if let Some(x) = local {
        if states[x].rank() > 0 {
            let rows = states[x].rows().to_vec();
            let v = random_combination_of_rows(&rows, rng)?;
            for (k, s) in next.iter_mut().enumerate() {
                if k != x && !s.contains_rows(&rows) {
                    let mut inserted = s.insert_if_innovative(&v)?;
                    while !inserted {
                        let fresh = random_combination_of_rows(&rows, rng)?;
                        inserted = s.insert_if_innovative(&fresh)?;
                    }
                }
            }
        }
    }
    Ok(next)
}

fn search(
    states: &[Subspace<Fp61>],
    n: usize,
    m: usize,
    depth: u32,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    if all_full(states) {
        return Ok(true);
    }
    if depth == 0 {
        return Ok(false);
    }
    for source in [true, false] {
        for local in std::iter::once(None).chain((0..n).map(Some)) {
            if !source && local.is_none() {
                continue; // an idle slot never helps
            }
            let next = apply_slot(states, m, source, local, rng)?;
            if search(&next, n, m, depth - 1, rng)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Minimum number of lossless slots to satisfy every device, by exhaustive
/// search. Limited to `N <= 3`, `M <= 4`.
pub fn optimal_completion_time(scenario: &Scenario) -> Result<u32> {
    let instance = Instance::build(scenario)?;
    if instance.n > MAX_DEVICES {
        return Err(Error::TooLarge(format!(
            "exhaustive search handles at most {MAX_DEVICES} devices, got {}",
            instance.n
        )));
    }
    if instance.m > MAX_PACKETS {
        return Err(Error::TooLarge(format!(
            "exhaustive search handles at most {MAX_PACKETS} packets, got {}",
            instance.m
        )));
    }
    let mut rng = derive_rng(instance.seed, &[0x6f72_6163]); // "orac"
    let states: Vec<Subspace<Fp61>> = (0..instance.n)
        .map(|d| Subspace::from_units(instance.m, &instance.has[d]))
        .collect();
    // a full-span source broadcast serves every unsatisfied device each slot,
    // so the answer is at most the largest rank deficit
    let cap = instance
        .wants
        .iter()
        .map(|w| w.len() as u32)
        .max()
        .unwrap_or(0);
    for depth in 0..=cap {
        if search(&states, instance.n, instance.m, depth, &mut rng)? {
            return Ok(depth);
        }
    }
    Err(Error::Invariant("exhaustive search failed to complete within its cap".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_joint_slot_suffices_for_the_four_packet_instance() {
        let scenario = Scenario::lossless(&[&[1], &[2], &[3, 4]], 1);
        assert_eq!(optimal_completion_time(&scenario).unwrap(), 1);
    }

    #[test]
    fn empty_wants_need_no_slots() {
        let mut scenario = Scenario::lossless(&[&[1], &[1]], 1);
        scenario.packets.clear();
        scenario.wants = vec![vec![], vec![]];
        assert_eq!(optimal_completion_time(&scenario).unwrap(), 0);
    }

    #[test]
    fn disjoint_pair_exchange_takes_one_slot() {
        let scenario = Scenario::lossless(&[&[1], &[2]], 1);
        assert_eq!(optimal_completion_time(&scenario).unwrap(), 1);
    }

    #[test]
    fn source_exclusive_packets_force_slots() {
        // both devices want both packets: nothing in the local area
        let scenario = Scenario::lossless(&[&[1, 2], &[1, 2]], 1);
        assert_eq!(optimal_completion_time(&scenario).unwrap(), 2);
    }

    #[test]
    fn size_limits_are_enforced() {
        let scenario = Scenario::lossless(&[&[1, 2, 3, 4, 5], &[1]], 1);
        assert!(matches!(
            optimal_completion_time(&scenario),
            Err(Error::TooLarge(_))
        ));
    }
}
