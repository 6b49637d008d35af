//! Marriage solvers for profiles with ties: partner guessing for the tied
//! agents, and full tie-break enumeration.

use std::collections::BTreeSet;

use crate::incremental::max_overlap_stable_bipartite;
use crate::model::{
    symmetric_difference_count, AgentId, IncrementalInstance, Matching, Pair, PreferenceList,
    PreferenceProfile,
};
use crate::{Error, Limits, SolveOutcome};

/// Agents with at least one tie in the changed profile.
fn tied_agents(p2: &PreferenceProfile) -> Vec<AgentId> {
    p2.agents().filter(|&a| p2.list(a).tie_count() > 0).collect()
}

/// Exact solver guessing the target partner of every tied agent.
///
/// For each guess, the remaining agents form a strict marriage instance:
/// wherever a guessed agent prefers a free agent b to its own target, b must
/// end up strictly better than that guessed agent, so everyone b would rank
/// below it is dropped from b's list. Guessed agents are removed entirely. A
/// maximum-overlap stable matching of the reduced instance is recombined with
/// the guessed pairs and kept only if the whole matching is weakly stable.
pub fn solve_ismt_xp(instance: &IncrementalInstance, limits: &Limits) -> Result<SolveOutcome, Error> {
    let p2 = &instance.profile2;
    p2.bipartition()
        .ok_or_else(|| Error::invalid("the ties solver requires a bipartite profile"))?;
    let tied = tied_agents(p2);
    if tied.len() > limits.tied_agents {
        return Err(Error::ResourceLimit {
            what: "agents with ties for partner guessing",
            need: tied.len() as u128,
            limit: limits.tied_agents as u128,
        });
    }

    let mut best: Option<(u64, Matching)> = None;
    let mut partners: Vec<Option<AgentId>> = vec![None; tied.len()];
    enumerate_partner_guesses(p2, &tied, 0, &mut partners, &mut |partners| {
        if let Some(m) = run_guess(instance, &tied, partners, limits)? {
            let diff = symmetric_difference_count(&instance.m1, &m);
            let better = match &best {
                None => true,
                Some((bd, bm)) => diff < *bd || (diff == *bd && m.cmp_lex(bm).is_lt()),
            };
            if better {
                best = Some((diff, m));
            }
        }
        Ok(())
    })?;

    Ok(match best {
        Some((d, m)) => SolveOutcome::solved(m, d),
        None => SolveOutcome::Infeasible,
    })
}

/// All involution-consistent partner guesses for the tied agents, partners
/// ascending by id. A tied agent may stay unmatched only when its own list
/// is incomplete.
fn enumerate_partner_guesses(
    p2: &PreferenceProfile,
    tied: &[AgentId],
    at: usize,
    partners: &mut Vec<Option<AgentId>>,
    f: &mut impl FnMut(&[Option<AgentId>]) -> Result<(), Error>,
) -> Result<(), Error> {
    if at == tied.len() {
        return f(partners);
    }
    let a = tied[at];
    // Already claimed by an earlier tied agent.
    if let Some(i) = (0..at).find(|&i| partners[i] == Some(a)) {
        partners[at] = Some(tied[i]);
        return enumerate_partner_guesses(p2, tied, at + 1, partners, f);
    }
    let mut options: Vec<AgentId> = p2
        .list(a)
        .accepted()
        .filter(|&b| p2.accepts(b, a))
        .collect();
    options.sort();
    for b in options {
        // An earlier tied agent already bound to someone else cannot be b's.
        if let Some(j) = tied.iter().position(|&t| t == b) {
            if j < at && partners[j] != Some(a) {
                continue;
            }
        }
        // b may already be taken as the guessed partner of an earlier agent.
        if (0..at).any(|i| partners[i] == Some(b)) {
            continue;
        }
        partners[at] = Some(b);
        enumerate_partner_guesses(p2, tied, at + 1, partners, f)?;
    }
    let side_size = match p2.bipartition() {
        Some(bi) => {
            if bi.is_left(a) {
                bi.right_agents().count()
            } else {
                bi.left_agents().count()
            }
        }
        None => p2.n() - 1,
    };
    if p2.list(a).accepted_count() < side_size {
        partners[at] = None;
        enumerate_partner_guesses(p2, tied, at + 1, partners, f)?;
    }
    Ok(())
}

fn run_guess(
    instance: &IncrementalInstance,
    tied: &[AgentId],
    partners: &[Option<AgentId>],
    limits: &Limits,
) -> Result<Option<Matching>, Error> {
    let p2 = &instance.profile2;
    let n = p2.n();

    // Fixed side of the guess: tied agents and their guessed partners.
    let mut fixed_partner: Vec<Option<AgentId>> = vec![None; n];
    let mut fixed = vec![false; n];
    for (i, &a) in tied.iter().enumerate() {
        fixed[a.idx()] = true;
        if let Some(b) = partners[i] {
            fixed[b.idx()] = true;
            fixed_partner[a.idx()] = Some(b);
            fixed_partner[b.idx()] = Some(a);
        }
    }

    // Whenever a fixed agent prefers a free agent b to its target, b must be
    // matched strictly better than that fixed agent.
    let mut banned: Vec<BTreeSet<AgentId>> = vec![BTreeSet::new(); n];
    for a in p2.agents() {
        if !fixed[a.idx()] {
            continue;
        }
        let target_rank = fixed_partner[a.idx()].map(|t| p2.list(a).tier_of(t).unwrap());
        for b in p2.list(a).accepted() {
            if fixed[b.idx()] || !p2.accepts(b, a) {
                continue;
            }
            let a_wants = match target_rank {
                None => true,
                Some(tr) => p2.list(a).tier_of(b).unwrap() < tr,
            };
            if a_wants {
                let rank_a = p2.list(b).tier_of(a).expect("acceptance is symmetric");
                for c in p2.list(b).accepted() {
                    if !fixed[c.idx()] && p2.list(b).tier_of(c).unwrap() > rank_a {
                        banned[b.idx()].insert(c);
                    }
                }
            }
        }
    }

    let lists = p2
        .agents()
        .map(|x| {
            if fixed[x.idx()] {
                return PreferenceList::empty(n);
            }
            let tiers: Vec<Vec<AgentId>> = p2
                .list(x)
                .tiers()
                .iter()
                .map(|tier| {
                    tier.iter()
                        .copied()
                        .filter(|y| {
                            !fixed[y.idx()]
                                && !banned[x.idx()].contains(y)
                                && !banned[y.idx()].contains(&x)
                        })
                        .collect()
                })
                .filter(|t: &Vec<AgentId>| !t.is_empty())
                .collect();
            PreferenceList::new(n, x, tiers).expect("reduced list stays valid")
        })
        .collect();
    let bi = p2.bipartition().expect("checked by the caller");
    let reduced = PreferenceProfile::new(lists).with_bipartition(&bi.left_agents().collect());
    debug_assert!(reduced.is_strict(), "all tied agents are fixed");

    let Some((sub, _)) = max_overlap_stable_bipartite(&reduced, &instance.m1, limits)? else {
        return Ok(None);
    };

    let mut m = sub;
    let guessed: BTreeSet<Pair> = tied
        .iter()
        .zip(partners)
        .filter_map(|(&a, p)| p.map(|b| Pair::new(a, b)))
        .collect();
    for p in guessed {
        if m.is_matched(p.lo()) || m.is_matched(p.hi()) {
            return Ok(None);
        }
        m.add_pair(p).expect("guessed pairs are disjoint");
    }
    if p2.is_stable(&m) {
        Ok(Some(m))
    } else {
        Ok(None)
    }
}

/// Exact solver enumerating every way of breaking the ties of the changed
/// profile and solving the resulting strict instances; a matching is weakly
/// stable exactly when it is stable under some such linearization.
pub fn solve_ismt_tiebreak(
    instance: &IncrementalInstance,
    limits: &Limits,
) -> Result<SolveOutcome, Error> {
    let p2 = &instance.profile2;
    let bi = p2
        .bipartition()
        .ok_or_else(|| Error::invalid("the ties solver requires a bipartite profile"))?;
    let summed: usize = p2.agents().map(|a| p2.list(a).summed_tie_size()).sum();
    if summed > limits.summed_tie_size {
        return Err(Error::ResourceLimit {
            what: "summed tie size for tie-break enumeration",
            need: summed as u128,
            limit: limits.summed_tie_size as u128,
        });
    }
    let left: BTreeSet<AgentId> = bi.left_agents().collect();

    let mut best: Option<(u64, Matching)> = None;
    let mut lists: Vec<Vec<Vec<AgentId>>> =
        p2.agents().map(|a| p2.list(a).tiers().to_vec()).collect();
    enumerate_linearizations(p2, 0, 0, &mut lists, &mut |lists| {
        let strict = PreferenceProfile::new(
            lists
                .iter()
                .enumerate()
                .map(|(i, tiers)| {
                    let flat: Vec<Vec<AgentId>> = tiers
                        .iter()
                        .flat_map(|t| t.iter().map(|&x| vec![x]))
                        .collect();
                    PreferenceList::new(p2.n(), AgentId(i as u32), flat)
                        .expect("linearized list stays valid")
                })
                .collect(),
        )
        .with_bipartition(&left);
        let (m, _) = max_overlap_stable_bipartite(&strict, &instance.m1, limits)?.ok_or_else(
            || Error::Internal("a marriage instance always has a stable matching".into()),
        )?;
        debug_assert!(p2.is_stable(&m), "stability under a tie-break is weak stability");
        let diff = symmetric_difference_count(&instance.m1, &m);
        let better = match &best {
            None => true,
            Some((bd, bm)) => diff < *bd || (diff == *bd && m.cmp_lex(bm).is_lt()),
        };
        if better {
            best = Some((diff, m));
        }
        Ok(())
    })?;

    Ok(match best {
        Some((d, m)) => SolveOutcome::solved(m, d),
        None => SolveOutcome::Infeasible,
    })
}

/// Visits every profile obtained by permuting each tie independently, agents
/// ascending, tiers in order, permutations lexicographic.
fn enumerate_linearizations(
    p2: &PreferenceProfile,
    agent: usize,
    tier: usize,
    lists: &mut Vec<Vec<Vec<AgentId>>>,
    f: &mut impl FnMut(&Vec<Vec<Vec<AgentId>>>) -> Result<(), Error>,
) -> Result<(), Error> {
    if agent == p2.n() {
        return f(lists);
    }
    if tier >= lists[agent].len() {
        return enumerate_linearizations(p2, agent + 1, 0, lists, f);
    }
    if lists[agent][tier].len() < 2 {
        return enumerate_linearizations(p2, agent, tier + 1, lists, f);
    }
    let mut perm: Vec<AgentId> = lists[agent][tier].clone();
    perm.sort();
    loop {
        lists[agent][tier] = perm.clone();
        enumerate_linearizations(p2, agent, tier + 1, lists, f)?;
        if !next_permutation(&mut perm) {
            break;
        }
    }
    perm.sort();
    lists[agent][tier] = perm;
    Ok(())
}

fn next_permutation(v: &mut [AgentId]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{classic, gen, oracle};

    #[test]
    fn no_ties_reduces_to_plain_marriage_solver() {
        let mut rng = gen::rng(11);
        for _ in 0..10 {
            let inst = gen::random_ismt_instance(&mut rng, 3, 3, 1, 0, 0);
            let limits = Limits::default();
            let xp = solve_ismt_xp(&inst, &limits).unwrap();
            let tb = solve_ismt_tiebreak(&inst, &limits).unwrap();
            let plain = crate::incremental::solve_ism(&inst, &limits).unwrap();
            assert_eq!(xp.diff(), plain.diff());
            assert_eq!(tb.diff(), plain.diff());
        }
    }

    #[test]
    fn one_tied_agent_matches_oracle() {
        let mut rng = gen::rng(23);
        for _ in 0..15 {
            let inst = gen::random_ismt_instance(&mut rng, 3, 3, 1, 1, 1);
            let xp = solve_ismt_xp(&inst, &Limits::default()).unwrap();
            let want = oracle::brute_force_incremental(&inst, 12).unwrap();
            assert_eq!(xp.diff(), want.diff());
        }
    }

    #[test]
    fn single_tie_linearizations_match_oracle() {
        let mut rng = gen::rng(31);
        for _ in 0..15 {
            let inst = gen::random_ismt_instance(&mut rng, 4, 4, 1, 1, 1);
            let tb = solve_ismt_tiebreak(&inst, &Limits::default()).unwrap();
            let want = oracle::brute_force_incremental(&inst, 12).unwrap();
            assert_eq!(tb.diff(), want.diff());
        }
    }

    #[test]
    fn every_linearization_output_is_weakly_stable() {
        let mut rng = gen::rng(47);
        let inst = gen::random_ismt_instance(&mut rng, 4, 4, 2, 2, 1);
        let out = solve_ismt_tiebreak(&inst, &Limits::default()).unwrap();
        let m = out.matching().expect("marriage instances are feasible");
        assert!(inst.profile2.is_stable(m));
    }

    #[test]
    fn complete_instance_keeps_tied_agents_matched() {
        // With complete preferences every stable matching is perfect, so a
        // guess leaving a tied agent unmatched can never survive the final
        // stability check.
        let p1 = gen::complete_strict_sm(&mut gen::rng(3), 2, 2);
        let m1 = classic::find_stable_sm(&p1).unwrap();
        let p2 = gen::inject_ties(&mut gen::rng(4), &p1, 1, 1);
        let inst = IncrementalInstance::new(p1, p2, m1, u64::MAX);
        let xp = solve_ismt_xp(&inst, &Limits::default()).unwrap();
        let want = oracle::brute_force_incremental(&inst, 12).unwrap();
        assert_eq!(xp.diff(), want.diff());
        assert!(xp.matching().unwrap().is_perfect());
    }

    #[test]
    fn bounds_are_enforced() {
        let mut rng = gen::rng(9);
        let inst = gen::random_ismt_instance(&mut rng, 4, 4, 1, 3, 2);
        let limits = Limits {
            tied_agents: 1,
            summed_tie_size: 1,
            ..Limits::default()
        };
        assert!(matches!(
            solve_ismt_xp(&inst, &limits),
            Err(Error::ResourceLimit { .. })
        ));
        assert!(matches!(
            solve_ismt_tiebreak(&inst, &limits),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
