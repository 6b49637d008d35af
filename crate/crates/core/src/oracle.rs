//! Exponential-time ground truth for small instances: exhaustive enumeration
//! of all weakly stable matchings, and the incremental problem solved by
//! scanning them.

use crate::model::{
    symmetric_difference_count, AgentId, IncrementalInstance, Matching, Pair, PreferenceProfile,
};
use crate::{Error, SolveOutcome};

/// All matchings stable under weak stability, sorted lexicographically.
///
/// Backtracking over the agents in id order. Each agent is either paired with
/// a later, still-free acceptable agent or deliberately left unmatched; with
/// incomplete preferences non-maximal matchings can be stable, so the
/// unmatched branch is explored too. A branch is abandoned as soon as two
/// finally-placed agents block the partial matching: their partners can only
/// get fixed later for agents that are still free, never for placed ones.
pub fn enumerate_stable(
    profile: &PreferenceProfile,
    max_agents: usize,
) -> Result<Vec<Matching>, Error> {
    let n = profile.n();
    if n > max_agents {
        return Err(Error::ResourceLimit {
            what: "agents for exhaustive stable-matching enumeration",
            need: n as u128,
            limit: max_agents as u128,
        });
    }
    let mut out = Vec::new();
    let mut m = Matching::empty(n);
    let mut decided = vec![false; n];
    search(profile, 0, &mut m, &mut decided, &mut out);
    out.sort_by(|a, b| a.cmp_lex(b));
    Ok(out)
}

fn search(
    profile: &PreferenceProfile,
    at: usize,
    m: &mut Matching,
    decided: &mut Vec<bool>,
    out: &mut Vec<Matching>,
) {
    let n = profile.n();
    let mut at = at;
    while at < n && decided[at] {
        at += 1;
    }
    if at == n {
        debug_assert!(profile.is_stable(m));
        out.push(m.clone());
        return;
    }
    let a = AgentId(at as u32);

    // Branch: pair a with each later free acceptable agent.
    let mut candidates: Vec<AgentId> = profile
        .list(a)
        .accepted()
        .filter(|b| b.idx() > at && !decided[b.idx()])
        .collect();
    candidates.sort();
    for b in candidates {
        if !profile.accepts(b, a) {
            continue;
        }
        m.update_to_contain(Pair::new(a, b));
        decided[at] = true;
        decided[b.idx()] = true;
        if !blocks_with_decided(profile, m, decided, a) && !blocks_with_decided(profile, m, decided, b)
        {
            search(profile, at + 1, m, decided, out);
        }
        m.unmatch(a);
        decided[at] = false;
        decided[b.idx()] = false;
    }

    // Branch: leave a unmatched for good.
    decided[at] = true;
    if !blocks_with_decided(profile, m, decided, a) {
        search(profile, at + 1, m, decided, out);
    }
    decided[at] = false;
}

/// Does `a` form a blocking pair with any already-decided agent?
fn blocks_with_decided(
    profile: &PreferenceProfile,
    m: &Matching,
    decided: &[bool],
    a: AgentId,
) -> bool {
    profile
        .list(a)
        .accepted()
        .any(|b| decided[b.idx()] && profile.is_blocking(m, a, b))
}

/// Exact optimum of the incremental problem by enumeration: a stable-in-P2
/// matching minimizing the symmetric difference to `m1`, lexicographically
/// least among ties. Honors the forced-pair set when present. `Infeasible`
/// when P2 admits no stable matching (or none containing the forced pairs).
pub fn brute_force_incremental(
    instance: &IncrementalInstance,
    max_agents: usize,
) -> Result<SolveOutcome, Error> {
    let all = enumerate_stable(&instance.profile2, max_agents)?;
    let mut best: Option<(u64, Matching)> = None;
    for m in all {
        if let Some(forced) = &instance.forced {
            if !forced.iter().all(|&p| m.contains(p)) {
                continue;
            }
        }
        let d = symmetric_difference_count(&instance.m1, &m);
        let better = match &best {
            None => true,
            Some((bd, bm)) => d < *bd || (d == *bd && m.cmp_lex(bm).is_lt()),
        };
        if better {
            best = Some((d, m));
        }
    }
    Ok(match best {
        Some((d, m)) => SolveOutcome::solved(m, d),
        None => SolveOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PreferenceProfile;
    use std::collections::BTreeSet;

    fn strict(lists: Vec<Vec<u32>>) -> PreferenceProfile {
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    #[test]
    fn odd_cycle_enumerates_empty() {
        let p = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        assert!(enumerate_stable(&p, 12).unwrap().is_empty());
    }

    #[test]
    fn mutual_pair_is_the_unique_stable_matching() {
        let p = strict(vec![vec![1], vec![0]]);
        let all = enumerate_stable(&p, 12).unwrap();
        assert_eq!(all, vec![Matching::from_pairs(2, &[(0, 1)]).unwrap()]);
    }

    #[test]
    fn all_tied_bipartite_means_every_perfect_matching_is_stable() {
        // 2+2 complete bipartite, every list a single tie.
        let p = PreferenceProfile::from_tier_lists(vec![
            vec![vec![2, 3]],
            vec![vec![2, 3]],
            vec![vec![0, 1]],
            vec![vec![0, 1]],
        ])
        .unwrap()
        .with_bipartition(&[AgentId(0), AgentId(1)].into_iter().collect());
        let all = enumerate_stable(&p, 12).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(Matching::is_perfect));
    }

    #[test]
    fn unfiltered_reference_agrees_on_small_instances() {
        // Cross-check the pruned search against a filter over all matchings.
        let p = strict(vec![
            vec![1, 2, 3],
            vec![0, 3, 2],
            vec![3, 0, 1],
            vec![2, 1, 0],
        ]);
        let pruned: BTreeSet<Vec<Pair>> = enumerate_stable(&p, 12)
            .unwrap()
            .into_iter()
            .map(|m| m.pairs())
            .collect();
        let mut naive = BTreeSet::new();
        all_matchings(&p, 0, &mut Matching::empty(4), &mut |m| {
            if p.is_stable(m) {
                naive.insert(m.pairs());
            }
        });
        assert_eq!(pruned, naive);
    }

    pub(crate) fn all_matchings(
        profile: &PreferenceProfile,
        at: usize,
        m: &mut Matching,
        f: &mut impl FnMut(&Matching),
    ) {
        let n = profile.n();
        let mut at = at;
        while at < n && m.is_matched(AgentId(at as u32)) {
            at += 1;
        }
        if at == n {
            f(m);
            return;
        }
        let a = AgentId(at as u32);
        all_matchings(profile, at + 1, m, f);
        let candidates: Vec<AgentId> = profile
            .list(a)
            .accepted()
            .filter(|b| b.idx() > at && !m.is_matched(*b) && profile.accepts(*b, a))
            .collect();
        for b in candidates {
            m.update_to_contain(Pair::new(a, b));
            all_matchings(profile, at + 1, m, f);
            m.unmatch(a);
        }
    }

    #[test]
    fn brute_force_identity_when_nothing_changes() {
        let p = strict(vec![vec![1], vec![0]]);
        let m1 = Matching::from_pairs(2, &[(0, 1)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        let out = brute_force_incremental(&inst, 12).unwrap();
        assert_eq!(out, SolveOutcome::solved(m1, 0));
    }

    #[test]
    fn brute_force_infeasible_on_odd_cycle_target() {
        let p1 = strict(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        let m1 = Matching::from_pairs(3, &[(0, 1)]).unwrap();
        assert!(p1.is_stable(&m1));
        let p2 = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        let inst = IncrementalInstance::new(p1, p2, m1, 4);
        assert_eq!(
            brute_force_incremental(&inst, 12).unwrap(),
            SolveOutcome::Infeasible
        );
    }

    #[test]
    fn bound_is_enforced() {
        let p = strict(vec![vec![1], vec![0]]);
        assert!(matches!(
            enumerate_stable(&p, 1),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
