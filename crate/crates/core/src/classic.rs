//! Classic stable-matching subroutines: deferred acceptance for marriage
//! instances, Irving's algorithm for roommates instances with incomplete
//! strict lists, and the stable-pair test built on top of it.

use std::collections::{BTreeSet, VecDeque};

use crate::model::{AgentId, Matching, Pair, PreferenceProfile};
use crate::Error;

/// A stable matching of a bipartite (marriage) instance. Ties are broken to a
/// strict order first: within each tier, ascending agent id. The left side of
/// the bipartition proposes.
pub fn find_stable_sm(profile: &PreferenceProfile) -> Result<Matching, Error> {
    let bi = profile
        .bipartition()
        .ok_or_else(|| Error::invalid("deferred acceptance requires a bipartite profile"))?;
    let n = profile.n();

    // Strict rank of each agent in each list after the deterministic tie-break.
    let mut rank = vec![vec![u32::MAX; n]; n];
    let mut order: Vec<Vec<AgentId>> = vec![Vec::new(); n];
    for a in profile.agents() {
        let mut r = 0u32;
        for tier in profile.list(a).tiers() {
            let mut tier = tier.clone();
            tier.sort();
            for b in tier {
                rank[a.idx()][b.idx()] = r;
                order[a.idx()].push(b);
                r += 1;
            }
        }
    }

    let mut next = vec![0usize; n];
    let mut partner: Vec<Option<AgentId>> = vec![None; n];
    let mut queue: VecDeque<AgentId> = bi.left_agents().collect();
    while let Some(m) = queue.pop_front() {
        loop {
            let Some(&w) = order[m.idx()].get(next[m.idx()]) else {
                break;
            };
            next[m.idx()] += 1;
            match partner[w.idx()] {
                None => {
                    partner[w.idx()] = Some(m);
                    partner[m.idx()] = Some(w);
                    break;
                }
                Some(m2) => {
                    if rank[w.idx()][m.idx()] < rank[w.idx()][m2.idx()] {
                        partner[m2.idx()] = None;
                        partner[w.idx()] = Some(m);
                        partner[m.idx()] = Some(w);
                        queue.push_back(m2);
                        break;
                    }
                }
            }
        }
    }

    let mut matching = Matching::empty(n);
    for a in profile.agents() {
        if let Some(b) = partner[a.idx()] {
            if a < b {
                matching.add_pair(Pair::new(a, b))?;
            }
        }
    }
    debug_assert!(profile.is_stable(&matching));
    Ok(matching)
}

/// Mutable preference table used by Irving's algorithm.
struct Table {
    /// prefs[x] = x's strict order.
    prefs: Vec<Vec<AgentId>>,
    /// pos[x][y] = position of y in x's list, usize::MAX if unaccepted.
    pos: Vec<Vec<usize>>,
    alive: Vec<Vec<bool>>,
    alive_count: Vec<usize>,
    /// held[y] = x means y currently holds the proposal of x.
    held: Vec<Option<AgentId>>,
    /// engaged[x] = y means x's proposal is held by y.
    engaged: Vec<Option<AgentId>>,
    queue: VecDeque<AgentId>,
}

impl Table {
    fn new(profile: &PreferenceProfile) -> Result<Self, Error> {
        if !profile.is_strict() {
            return Err(Error::invalid("this algorithm requires strict preferences"));
        }
        let n = profile.n();
        let mut prefs = Vec::with_capacity(n);
        let mut pos = vec![vec![usize::MAX; n]; n];
        for a in profile.agents() {
            let list: Vec<AgentId> = profile.list(a).accepted().collect();
            for (i, &b) in list.iter().enumerate() {
                pos[a.idx()][b.idx()] = i;
            }
            prefs.push(list);
        }
        let alive: Vec<Vec<bool>> = prefs.iter().map(|l| vec![true; l.len()]).collect();
        let alive_count = prefs.iter().map(Vec::len).collect();
        Ok(Table {
            prefs,
            pos,
            alive,
            alive_count,
            held: vec![None; n],
            engaged: vec![None; n],
            queue: VecDeque::new(),
        })
    }

    fn first(&self, x: AgentId) -> Option<AgentId> {
        self.alive[x.idx()]
            .iter()
            .position(|&a| a)
            .map(|i| self.prefs[x.idx()][i])
    }

    fn second(&self, x: AgentId) -> Option<AgentId> {
        self.alive[x.idx()]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .nth(1)
            .map(|(i, _)| self.prefs[x.idx()][i])
    }

    fn last(&self, x: AgentId) -> Option<AgentId> {
        self.alive[x.idx()]
            .iter()
            .rposition(|&a| a)
            .map(|i| self.prefs[x.idx()][i])
    }

    fn prefers(&self, a: AgentId, x: AgentId, y: AgentId) -> bool {
        self.pos[a.idx()][x.idx()] < self.pos[a.idx()][y.idx()]
    }

    /// Removes the pair from both lists and breaks any engagement it carried,
    /// requeueing the agent that lost its proposal.
    fn delete_pair(&mut self, x: AgentId, y: AgentId) {
        let px = self.pos[x.idx()][y.idx()];
        if px == usize::MAX || !self.alive[x.idx()][px] {
            return;
        }
        let py = self.pos[y.idx()][x.idx()];
        self.alive[x.idx()][px] = false;
        self.alive[y.idx()][py] = false;
        self.alive_count[x.idx()] -= 1;
        self.alive_count[y.idx()] -= 1;
        if self.held[y.idx()] == Some(x) {
            self.held[y.idx()] = None;
            self.engaged[x.idx()] = None;
            self.queue.push_back(x);
        }
        if self.held[x.idx()] == Some(y) {
            self.held[x.idx()] = None;
            self.engaged[y.idx()] = None;
            self.queue.push_back(y);
        }
    }

    /// Runs the proposal loop until the queue drains. Returns false when some
    /// agent that still had options ran out of them while `strict_failure`
    /// demands existence (the phase-2 emptiness criterion).
    fn propose_all(&mut self, fail_on_empty: bool) -> bool {
        while let Some(x) = self.queue.pop_front() {
            if self.engaged[x.idx()].is_some() {
                continue;
            }
            loop {
                let Some(y) = self.first(x) else {
                    if fail_on_empty {
                        return false;
                    }
                    break;
                };
                match self.held[y.idx()] {
                    None => {
                        self.accept(x, y);
                        break;
                    }
                    Some(z) if self.prefers(y, x, z) => {
                        self.delete_pair(y, z);
                        self.accept(x, y);
                        break;
                    }
                    Some(_) => {
                        self.delete_pair(x, y);
                    }
                }
            }
        }
        true
    }

    /// y holds x's proposal; y then drops everyone it likes less than x.
    fn accept(&mut self, x: AgentId, y: AgentId) {
        self.held[y.idx()] = Some(x);
        self.engaged[x.idx()] = Some(y);
        let cut = self.pos[y.idx()][x.idx()];
        let worse: Vec<AgentId> = self.prefs[y.idx()]
            .iter()
            .enumerate()
            .skip(cut + 1)
            .filter(|(i, _)| self.alive[y.idx()][*i])
            .map(|(_, &w)| w)
            .collect();
        for w in worse {
            self.delete_pair(y, w);
        }
    }
}

/// A stable matching of a strict roommates instance, or `None` when the
/// instance admits no stable matching. Incomplete lists are allowed; agents
/// whose reduced list empties in the proposal phase are unmatched in every
/// stable matching. Phase 2 eliminates all-or-nothing cycles starting from
/// the lowest-id agent with more than one remaining entry.
pub fn find_stable_sr(profile: &PreferenceProfile) -> Result<Option<Matching>, Error> {
    let n = profile.n();
    let mut t = Table::new(profile)?;

    t.queue.extend((0..n as u32).map(AgentId).filter(|a| t.alive_count[a.idx()] > 0));
    t.propose_all(false);

    loop {
        let Some(start) = (0..n as u32)
            .map(AgentId)
            .find(|a| t.alive_count[a.idx()] >= 2)
        else {
            break;
        };
        // Chase second/last pointers until an agent repeats; the repeated
        // suffix is an all-or-nothing cycle.
        let mut seq: Vec<AgentId> = Vec::new();
        let mut seen = vec![usize::MAX; n];
        let mut p = start;
        let cycle_from = loop {
            if seen[p.idx()] != usize::MAX {
                break seen[p.idx()];
            }
            seen[p.idx()] = seq.len();
            seq.push(p);
            let b = t
                .second(p)
                .ok_or_else(|| Error::Internal("cycle chase left the reduced table".into()))?;
            p = t
                .last(b)
                .ok_or_else(|| Error::Internal("cycle chase hit an empty list".into()))?;
        };
        let cycle = &seq[cycle_from..];
        let firsts: Vec<(AgentId, AgentId)> = cycle
            .iter()
            .map(|&a| {
                t.first(a)
                    .map(|f| (a, f))
                    .ok_or_else(|| Error::Internal("cycle member with empty list".into()))
            })
            .collect::<Result<_, _>>()?;
        for (a, f) in firsts {
            t.delete_pair(a, f);
        }
        if !t.propose_all(true) {
            return Ok(None);
        }
    }

    let mut matching = Matching::empty(n);
    for a in (0..n as u32).map(AgentId) {
        if let Some(b) = t.first(a) {
            if a < b {
                matching.add_pair(Pair::new(a, b))?;
            } else if t.first(b) != Some(a) {
                return Err(Error::Internal("reduced table is not symmetric".into()));
            }
        }
    }
    debug_assert!(profile.is_stable(&matching));
    Ok(Some(matching))
}

/// The set of matched agents. For strict profiles this set is the same for
/// every stable matching of the instance.
pub fn matched_set(_profile: &PreferenceProfile, matching: &Matching) -> BTreeSet<AgentId> {
    matching.matched_agents()
}

/// All pairs that appear in at least one stable matching of a strict
/// roommates instance, or `None` when no stable matching exists.
///
/// Per-pair test: truncate both lists at the partner (so the two agents
/// become each other's worst remaining option, dropping the competitors below
/// the partner symmetrically) and rerun the roommates algorithm. In the
/// truncated instance every stable matching contains the pair if any does, so
/// membership in the returned matching decides the question.
pub fn stable_pairs(profile: &PreferenceProfile) -> Result<Option<BTreeSet<Pair>>, Error> {
    if !profile.is_strict() {
        return Err(Error::invalid("stable pairs are computed for strict profiles only"));
    }
    if find_stable_sr(profile)?.is_none() {
        return Ok(None);
    }
    let mut out = BTreeSet::new();
    for a in profile.agents() {
        for b in profile.list(a).accepted() {
            if b < a || !profile.accepts(b, a) {
                continue;
            }
            let truncated = truncate_at(profile, a, b);
            if let Some(m) = find_stable_sr(&truncated)? {
                if m.partner(a) == Some(b) {
                    out.insert(Pair::new(a, b));
                }
            }
        }
    }
    Ok(Some(out))
}

/// Drops everything below `b` in `a`'s list and everything below `a` in
/// `b`'s, with symmetric cleanup of the removed acceptances.
fn truncate_at(profile: &PreferenceProfile, a: AgentId, b: AgentId) -> PreferenceProfile {
    let n = profile.n();
    let mut removed: Vec<(AgentId, AgentId)> = Vec::new();
    for (agent, below) in [(a, b), (b, a)] {
        let list = profile.list(agent);
        let cut = list.tier_of(below).expect("pair must be mutually accepted");
        for x in list.accepted() {
            if list.tier_of(x).unwrap() > cut {
                removed.push((agent, x));
            }
        }
    }
    let gone = |x: AgentId, y: AgentId| {
        removed
            .iter()
            .any(|&(u, v)| (u == x && v == y) || (u == y && v == x))
    };
    let lists = profile
        .agents()
        .map(|x| {
            let tiers: Vec<Vec<AgentId>> = profile
                .list(x)
                .tiers()
                .iter()
                .map(|tier| tier.iter().copied().filter(|&y| !gone(x, y)).collect())
                .filter(|t: &Vec<AgentId>| !t.is_empty())
                .collect();
            crate::model::PreferenceList::new(n, x, tiers).expect("filtered list stays valid")
        })
        .collect();
    PreferenceProfile::new(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn strict(lists: Vec<Vec<u32>>) -> PreferenceProfile {
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    fn bipartite(lists: Vec<Vec<u32>>, left: &[u32]) -> PreferenceProfile {
        let left: BTreeSet<AgentId> = left.iter().map(|&i| AgentId(i)).collect();
        strict(lists).with_bipartition(&left)
    }

    #[test]
    fn sm_single_pair() {
        let p = bipartite(vec![vec![1], vec![0]], &[0]);
        let m = find_stable_sm(&p).unwrap();
        assert_eq!(m.pairs(), vec![Pair::new(AgentId(0), AgentId(1))]);
    }

    #[test]
    fn sm_identical_lists_assortative() {
        // men 0..3 with lists 3>4>5, women 3..6 with lists 0>1>2
        let p = bipartite(
            vec![
                vec![3, 4, 5],
                vec![3, 4, 5],
                vec![3, 4, 5],
                vec![0, 1, 2],
                vec![0, 1, 2],
                vec![0, 1, 2],
            ],
            &[0, 1, 2],
        );
        let m = find_stable_sm(&p).unwrap();
        let expected = Matching::from_pairs(6, &[(0, 3), (1, 4), (2, 5)]).unwrap();
        assert_eq!(m, expected);
        // the instance has exactly one stable matching
        let all = oracle::enumerate_stable(&p, 8).unwrap();
        assert_eq!(all, vec![expected]);
    }

    #[test]
    fn sm_with_ties_weakly_stable() {
        let p = PreferenceProfile::from_tier_lists(vec![
            vec![vec![2, 3]],
            vec![vec![2], vec![3]],
            vec![vec![0], vec![1]],
            vec![vec![1], vec![0]],
        ])
        .unwrap()
        .with_bipartition(&[AgentId(0), AgentId(1)].into_iter().collect());
        let m = find_stable_sm(&p).unwrap();
        assert!(p.is_stable(&m));
    }

    #[test]
    fn sm_rejects_roommates_profile() {
        let p = strict(vec![vec![1], vec![0]]);
        assert!(find_stable_sm(&p).is_err());
    }

    #[test]
    fn sr_odd_cycle_has_no_stable_matching() {
        // 0: 1>2, 1: 2>0, 2: 0>1 plus everyone ranks the fourth agent last
        // is the classic 3-cycle; without agent 3 it has no stable matching.
        let p = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        assert_eq!(find_stable_sr(&p).unwrap(), None);
    }

    #[test]
    fn sr_four_cycle_has_stable_matching() {
        // 0: 1>3, 1: 2>0, 2: 3>1, 3: 0>2 (a 4-cycle)
        let p = strict(vec![vec![1, 3], vec![2, 0], vec![3, 1], vec![0, 2]]);
        let m = find_stable_sr(&p).unwrap().expect("stable matching exists");
        assert!(p.is_stable(&m));
    }

    #[test]
    fn sr_rejects_ties() {
        let p = PreferenceProfile::from_tier_lists(vec![
            vec![vec![1, 2]],
            vec![vec![0]],
            vec![vec![0]],
        ])
        .unwrap();
        assert!(find_stable_sr(&p).is_err());
    }

    #[test]
    fn sr_incomplete_leaves_agent_unmatched() {
        // 2 only accepts 0, but 0 and 1 are mutual first choices.
        let p = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let m = find_stable_sr(&p).unwrap().unwrap();
        assert_eq!(m.partner(AgentId(0)), Some(AgentId(1)));
        assert_eq!(m.partner(AgentId(2)), None);
    }

    #[test]
    fn matched_set_trivial_cases() {
        let p = strict(vec![vec![1], vec![0]]);
        let m = find_stable_sr(&p).unwrap().unwrap();
        assert_eq!(matched_set(&p, &m).len(), 2);
        let empty = PreferenceProfile::from_strict_lists(vec![]).unwrap();
        assert!(matched_set(&empty, &Matching::empty(0)).is_empty());
    }

    #[test]
    fn stable_pairs_unique_matching() {
        let p = strict(vec![vec![1], vec![0], vec![3], vec![2]]);
        let sp = stable_pairs(&p).unwrap().unwrap();
        let want: BTreeSet<Pair> = [
            Pair::new(AgentId(0), AgentId(1)),
            Pair::new(AgentId(2), AgentId(3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(sp, want);
    }

    #[test]
    fn stable_pairs_four_cycle_all_edges() {
        // Both pairings of the 4-cycle are stable, so all four edges occur.
        let p = strict(vec![vec![1, 3], vec![2, 0], vec![3, 1], vec![0, 2]]);
        let sp = stable_pairs(&p).unwrap().unwrap();
        let want: BTreeSet<Pair> = [
            Pair::new(AgentId(0), AgentId(1)),
            Pair::new(AgentId(1), AgentId(2)),
            Pair::new(AgentId(2), AgentId(3)),
            Pair::new(AgentId(0), AgentId(3)),
        ]
        .into_iter()
        .collect();
        assert_eq!(sp, want);
    }

    #[test]
    fn stable_pairs_none_when_unsolvable() {
        let p = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        assert_eq!(stable_pairs(&p).unwrap(), None);
    }
}
