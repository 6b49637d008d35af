//! Seeded random instance factories for the test suites. Everything here is
//! deterministic in the seed.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::classic;
use crate::model::{AgentId, IncrementalInstance, Matching, PreferenceList, PreferenceProfile};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random complete strict roommates profile on `n` agents.
pub fn complete_strict_sr(rng: &mut TestRng, n: usize) -> PreferenceProfile {
    let lists = (0..n)
        .map(|i| {
            let mut others: Vec<u32> = (0..n as u32).filter(|&j| j as usize != i).collect();
            others.shuffle(rng);
            others
        })
        .collect();
    PreferenceProfile::from_strict_lists(lists).unwrap()
}

/// Random strict roommates profile where every mutual acceptance is kept with
/// probability `density` (acceptance stays symmetric).
pub fn incomplete_strict_sr(rng: &mut TestRng, n: usize, density: f64) -> PreferenceProfile {
    let mut accepted = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                accepted[i][j] = true;
                accepted[j][i] = true;
            }
        }
    }
    let lists = (0..n)
        .map(|i| {
            let mut others: Vec<u32> = (0..n as u32)
                .filter(|&j| accepted[i][j as usize])
                .collect();
            others.shuffle(rng);
            others
        })
        .collect();
    PreferenceProfile::from_strict_lists(lists).unwrap()
}

/// Random complete strict marriage profile with sides `0..nu` and `nu..nu+nw`.
pub fn complete_strict_sm(rng: &mut TestRng, nu: usize, nw: usize) -> PreferenceProfile {
    let n = nu + nw;
    let lists = (0..n)
        .map(|i| {
            let mut others: Vec<u32> = if i < nu {
                (nu as u32..n as u32).collect()
            } else {
                (0..nu as u32).collect()
            };
            others.shuffle(rng);
            others
        })
        .collect();
    let left: BTreeSet<AgentId> = (0..nu as u32).map(AgentId).collect();
    PreferenceProfile::from_strict_lists(lists)
        .unwrap()
        .with_bipartition(&left)
}

/// Applies one random adjacent transposition to some agent's list, returning
/// the changed profile. Only agents with at least two accepted agents are
/// touched.
pub fn one_adjacent_swap(rng: &mut TestRng, profile: &PreferenceProfile) -> PreferenceProfile {
    let n = profile.n();
    let candidates: Vec<AgentId> = profile
        .agents()
        .filter(|&a| profile.list(a).accepted_count() >= 2)
        .collect();
    let a = candidates[rng.gen_range(0..candidates.len())];
    let mut order: Vec<AgentId> = profile.list(a).accepted().collect();
    let i = rng.gen_range(0..order.len() - 1);
    order.swap(i, i + 1);
    let lists = profile
        .agents()
        .map(|x| {
            if x == a {
                let tiers = order.iter().map(|&b| vec![b]).collect();
                PreferenceList::new(n, x, tiers).unwrap()
            } else {
                profile.list(x).clone()
            }
        })
        .collect();
    let out = PreferenceProfile::new(lists);
    match profile.bipartition() {
        Some(bi) => out.with_bipartition(&bi.left_agents().collect()),
        None => out,
    }
}

/// Merges random adjacent entries of each list into ties: every agent ends up
/// with at most `max_ties` ties of exactly size 2, placed at random.
pub fn inject_ties(
    rng: &mut TestRng,
    profile: &PreferenceProfile,
    tied_agents: usize,
    ties_per_agent: usize,
) -> PreferenceProfile {
    let n = profile.n();
    let mut agents: Vec<AgentId> = profile
        .agents()
        .filter(|&a| profile.list(a).accepted_count() >= 2)
        .collect();
    agents.shuffle(rng);
    agents.truncate(tied_agents);
    let lists = profile
        .agents()
        .map(|x| {
            if !agents.contains(&x) {
                return profile.list(x).clone();
            }
            let order: Vec<AgentId> = profile.list(x).accepted().collect();
            let mut tiers: Vec<Vec<AgentId>> = order.iter().map(|&b| vec![b]).collect();
            for _ in 0..ties_per_agent {
                if tiers.len() < 2 {
                    break;
                }
                let i = rng.gen_range(0..tiers.len() - 1);
                let merged = tiers.remove(i + 1);
                tiers[i].extend(merged);
            }
            PreferenceList::new(n, x, tiers).unwrap()
        })
        .collect();
    let out = PreferenceProfile::new(lists);
    match profile.bipartition() {
        Some(bi) => out.with_bipartition(&bi.left_agents().collect()),
        None => out,
    }
}

/// Random complete profile derived from a random weak master list with at
/// most `max_classes` indifference classes.
pub fn weak_master_list_profile(
    rng: &mut TestRng,
    n: usize,
    max_classes: usize,
) -> (PreferenceProfile, Vec<Vec<AgentId>>) {
    let mut order: Vec<AgentId> = (0..n as u32).map(AgentId).collect();
    order.shuffle(rng);
    let classes = rng.gen_range(1..=max_classes.min(n));
    // Random composition of n into `classes` parts.
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(classes - 1).collect();
    cuts.sort_unstable();
    cuts.push(n);
    let mut tiers: Vec<Vec<AgentId>> = Vec::new();
    let mut start = 0;
    for c in cuts {
        let mut t: Vec<AgentId> = order[start..c].to_vec();
        t.sort();
        tiers.push(t);
        start = c;
    }
    let lists = (0..n)
        .map(|i| {
            let a = AgentId(i as u32);
            let restricted: Vec<Vec<AgentId>> = tiers
                .iter()
                .map(|t| t.iter().copied().filter(|&x| x != a).collect())
                .filter(|t: &Vec<AgentId>| !t.is_empty())
                .collect();
            PreferenceList::new(n, a, restricted).unwrap()
        })
        .collect();
    (PreferenceProfile::new(lists), tiers)
}

/// Random strict profile derived from a random strict master list; each
/// unordered pair of agents accepts each other with probability `density`.
pub fn strict_master_list_profile(
    rng: &mut TestRng,
    n: usize,
    density: f64,
) -> (PreferenceProfile, Vec<AgentId>) {
    let mut order: Vec<AgentId> = (0..n as u32).map(AgentId).collect();
    order.shuffle(rng);
    let mut accepted = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                accepted[i][j] = true;
                accepted[j][i] = true;
            }
        }
    }
    let lists = (0..n)
        .map(|i| {
            let a = AgentId(i as u32);
            let tiers = order
                .iter()
                .copied()
                .filter(|&x| x != a && accepted[i][x.idx()])
                .map(|x| vec![x])
                .collect();
            PreferenceList::new(n, a, tiers).unwrap()
        })
        .collect();
    (PreferenceProfile::new(lists), order)
}

/// A random incremental roommates instance with a stable initial matching:
/// P1 is sampled until it admits a stable matching, M1 is the one found by
/// the roommates algorithm, and P2 applies `swaps` adjacent transpositions.
pub fn random_isr_instance(
    rng: &mut TestRng,
    n: usize,
    complete: bool,
    swaps: usize,
) -> IncrementalInstance {
    loop {
        let p1 = if complete {
            complete_strict_sr(rng, n)
        } else {
            incomplete_strict_sr(rng, n, 0.7)
        };
        match classic::find_stable_sr(&p1).unwrap() {
            Some(m1) => {
                let mut p2 = p1.clone();
                for _ in 0..swaps {
                    p2 = one_adjacent_swap(rng, &p2);
                }
                return IncrementalInstance::new(p1, p2, m1, u64::MAX);
            }
            None => continue,
        }
    }
}

/// A random bipartite incremental instance (strict P1); P2 applies `swaps`
/// transpositions and then injects ties.
pub fn random_ismt_instance(
    rng: &mut TestRng,
    nu: usize,
    nw: usize,
    swaps: usize,
    tied_agents: usize,
    ties_per_agent: usize,
) -> IncrementalInstance {
    let p1 = complete_strict_sm(rng, nu, nw);
    let m1 = classic::find_stable_sm(&p1).unwrap();
    let mut p2 = p1.clone();
    for _ in 0..swaps {
        p2 = one_adjacent_swap(rng, &p2);
    }
    let p2 = inject_ties(rng, &p2, tied_agents, ties_per_agent);
    IncrementalInstance::new(p1, p2, m1, u64::MAX)
}

/// A random matching over the mutually-accepted pairs of a profile; used for
/// fuzzing checkers. Each acceptable pair is considered in random order and
/// kept with probability `density` when both endpoints are still free.
pub fn random_matching(rng: &mut TestRng, profile: &PreferenceProfile, density: f64) -> Matching {
    let mut pairs: Vec<(AgentId, AgentId)> = Vec::new();
    for a in profile.agents() {
        for b in profile.list(a).accepted() {
            if a < b && profile.accepts(b, a) {
                pairs.push((a, b));
            }
        }
    }
    pairs.shuffle(rng);
    let mut m = Matching::empty(profile.n());
    for (a, b) in pairs {
        if !m.is_matched(a) && !m.is_matched(b) && rng.gen_bool(density) {
            m.add_pair(crate::model::Pair::new(a, b)).unwrap();
        }
    }
    m
}
