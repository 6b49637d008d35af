//! Master-list and few-outlier algorithms: detection of a shared order, the
//! linear-time solver for strict master lists, the per-class greedy for weak
//! master lists with complete preferences, and enumeration of all stable
//! matchings when all but few agents follow one strict list.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    symmetric_difference_count, AgentId, IncrementalInstance, Matching, Pair, PreferenceProfile,
};
use crate::{Error, Limits, SolveOutcome};

/// A weak order over all agents of an instance from which individual lists
/// are derived by restriction to the accepted set.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MasterList {
    tiers: Vec<Vec<AgentId>>,
}

impl MasterList {
    pub fn new(n: usize, tiers: Vec<Vec<AgentId>>) -> Result<Self, Error> {
        let mut seen = vec![false; n];
        for t in &tiers {
            for &a in t {
                if a.idx() >= n || seen[a.idx()] {
                    return Err(Error::invalid(
                        "master list must cover every agent exactly once",
                    ));
                }
                seen[a.idx()] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::invalid(
                "master list must cover every agent exactly once",
            ));
        }
        Ok(MasterList { tiers })
    }

    pub fn tiers(&self) -> &[Vec<AgentId>] {
        &self.tiers
    }

    pub fn is_strict(&self) -> bool {
        self.tiers.iter().all(|t| t.len() == 1)
    }

    /// Agents in master order, tier by tier, ids ascending within a tier.
    pub fn order(&self) -> Vec<AgentId> {
        self.tiers.iter().flatten().copied().collect()
    }

    pub fn tier_of(&self, a: AgentId) -> usize {
        self.tiers
            .iter()
            .position(|t| t.contains(&a))
            .expect("master list covers every agent")
    }

    /// Is the list of `a` exactly this order restricted to its accepted set?
    pub fn derives(&self, profile: &PreferenceProfile, a: AgentId) -> bool {
        let restricted: Vec<Vec<AgentId>> = self
            .tiers
            .iter()
            .map(|t| {
                let mut t: Vec<AgentId> = t
                    .iter()
                    .copied()
                    .filter(|&x| x != a && profile.accepts(a, x))
                    .collect();
                t.sort();
                t
            })
            .filter(|t| !t.is_empty())
            .collect();
        let own: Vec<Vec<AgentId>> = profile
            .list(a)
            .tiers()
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.sort();
                t
            })
            .collect();
        restricted == own
    }
}

/// Partition into followers of one strict master list and arbitrary outliers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OutlierPartition {
    pub followers: BTreeSet<AgentId>,
    pub outliers: BTreeSet<AgentId>,
}

impl OutlierPartition {
    pub fn new(n: usize, outliers: BTreeSet<AgentId>) -> Self {
        let followers = (0..n as u32)
            .map(AgentId)
            .filter(|a| !outliers.contains(a))
            .collect();
        OutlierPartition { followers, outliers }
    }
}

/// Builds one candidate order from pairwise comparisons voted on by `voters`
/// and returns it when it is consistent with every agent in `check`. Pairs
/// no voter can rank are ordered by id; the verification pass makes the
/// construction exact whenever preferences are complete.
fn consistent_master_list(
    profile: &PreferenceProfile,
    voters: &[AgentId],
    check: &[AgentId],
) -> Option<MasterList> {
    let n = profile.n();
    if n == 0 {
        return MasterList::new(0, Vec::new()).ok();
    }
    fn find(group: &mut Vec<usize>, i: usize) -> usize {
        if group[i] != i {
            let r = find(group, group[i]);
            group[i] = r;
            r
        } else {
            i
        }
    }
    let verdict = |x: AgentId, y: AgentId| -> Option<Ordering> {
        voters
            .iter()
            .find(|&&z| z != x && z != y && profile.accepts(z, x) && profile.accepts(z, y))
            .map(|&z| profile.list(z).compare(x, y))
    };
    let mut group: Vec<usize> = (0..n).collect();
    let mut edges: Vec<(AgentId, AgentId)> = Vec::new();
    for x in profile.agents() {
        for y in profile.agents().filter(|&y| y > x) {
            match verdict(x, y) {
                Some(Ordering::Equal) => {
                    let (rx, ry) = (find(&mut group, x.idx()), find(&mut group, y.idx()));
                    group[rx] = ry;
                }
                Some(Ordering::Less) => edges.push((x, y)),
                Some(Ordering::Greater) => edges.push((y, x)),
                None => {}
            }
        }
    }
    let mut members: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for a in profile.agents() {
        let r = find(&mut group, a.idx());
        members.entry(r).or_default().push(a);
    }
    let reps: Vec<usize> = members.keys().copied().collect();
    let rep_pos: BTreeMap<usize, usize> = reps.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); reps.len()];
    let mut indeg = vec![0usize; reps.len()];
    for (x, y) in edges {
        let gx = rep_pos[&find(&mut group, x.idx())];
        let gy = rep_pos[&find(&mut group, y.idx())];
        if gx == gy {
            return None; // strict comparison inside a tied group
        }
        if succ[gx].insert(gy) {
            indeg[gy] += 1;
        }
    }
    // Kahn's algorithm, lowest member id first for determinism.
    let min_id = |g: usize| members[&reps[g]].iter().min().copied().unwrap();
    let mut ready: BTreeSet<(AgentId, usize)> = (0..reps.len())
        .filter(|&g| indeg[g] == 0)
        .map(|g| (min_id(g), g))
        .collect();
    let mut tiers: Vec<Vec<AgentId>> = Vec::new();
    while let Some(&(id, g)) = ready.iter().next() {
        ready.remove(&(id, g));
        let mut tier = members[&reps[g]].clone();
        tier.sort();
        tiers.push(tier);
        for &h in &succ[g] {
            indeg[h] -= 1;
            if indeg[h] == 0 {
                ready.insert((min_id(h), h));
            }
        }
    }
    if tiers.iter().map(Vec::len).sum::<usize>() != n {
        return None; // contradictory order
    }
    let master = MasterList::new(n, tiers).ok()?;
    check
        .iter()
        .all(|&a| master.derives(profile, a))
        .then_some(master)
}

/// A master list every agent of the profile derives its list from, if one
/// exists. Exact for complete preferences; for incomplete ones a consistent
/// candidate is constructed greedily and then verified.
pub fn detect_master_list(profile: &PreferenceProfile) -> Option<MasterList> {
    let all: Vec<AgentId> = profile.agents().collect();
    consistent_master_list(profile, &all, &all)
}

/// Followers of a given strict master list: agents with complete preferences
/// derived from it. Everyone else is an outlier.
pub fn follower_partition(profile: &PreferenceProfile, master: &MasterList) -> OutlierPartition {
    let n = profile.n();
    let outliers = profile
        .agents()
        .filter(|&a| profile.list(a).accepted_count() != n - 1 || !master.derives(profile, a))
        .collect();
    OutlierPartition::new(n, outliers)
}

/// Searches for the strict master list maximizing the follower count:
/// candidates are every complete strict list with its owner inserted at
/// every position. Returns the list and its partition.
pub fn best_outlier_partition(
    profile: &PreferenceProfile,
) -> Option<(MasterList, OutlierPartition)> {
    let n = profile.n();
    let mut best: Option<(MasterList, OutlierPartition)> = None;
    for a in profile.agents() {
        let list = profile.list(a);
        if !list.is_strict() || list.accepted_count() != n - 1 {
            continue;
        }
        let base: Vec<AgentId> = list.accepted().collect();
        for pos in 0..=base.len() {
            let mut order = base.clone();
            order.insert(pos, a);
            let master = MasterList::new(n, order.into_iter().map(|x| vec![x]).collect())
                .expect("candidate covers all agents");
            let part = follower_partition(profile, &master);
            let better = match &best {
                None => true,
                Some((_, bp)) => part.followers.len() > bp.followers.len(),
            };
            if better {
                best = Some((master, part));
            }
        }
    }
    best
}

/// Linear-time solver for a strict target profile derived from one strict
/// master list (incomplete lists allowed): repeatedly match the top-ranked
/// so-far-unmatched agent of the master list to the best remaining agent it
/// accepts. The result is the unique stable matching of the profile.
pub fn solve_strict_master_list(instance: &IncrementalInstance) -> Result<SolveOutcome, Error> {
    let p2 = &instance.profile2;
    if !p2.is_strict() {
        return Err(Error::invalid("the master-list solver requires strict preferences"));
    }
    let master = detect_master_list(p2)
        .ok_or_else(|| Error::invalid("the target profile is not derived from one master list"))?;
    if !master.is_strict() {
        return Err(Error::invalid("the target master list contains ties"));
    }
    let order = master.order();
    let mut m = Matching::empty(p2.n());
    for (i, &a) in order.iter().enumerate() {
        if m.is_matched(a) {
            continue;
        }
        // The best remaining acceptable agent is the earliest remaining one
        // in the master order, since a's list is the master list restricted.
        let partner = order[i + 1..]
            .iter()
            .copied()
            .find(|&b| !m.is_matched(b) && p2.mutually_accept(a, b));
        if let Some(b) = partner {
            m.add_pair(Pair::new(a, b))?;
        }
    }
    debug_assert!(p2.is_stable(&m));
    let diff = symmetric_difference_count(&instance.m1, &m);
    Ok(SolveOutcome::solved(m, diff))
}

/// Per-class greedy for a complete roommates target profile derived from one
/// weak master list. Classes are processed top to bottom while maximizing
/// the overlap with the initial matching; parity forces at most one agent
/// per class boundary to be matched across it, tracked by a carry agent.
pub fn solve_weak_master_list_complete(
    instance: &IncrementalInstance,
) -> Result<SolveOutcome, Error> {
    let p2 = &instance.profile2;
    if p2.bipartition().is_some() || !p2.is_complete() {
        return Err(Error::invalid(
            "the weak-master-list solver requires complete roommates preferences",
        ));
    }
    let master = detect_master_list(p2)
        .ok_or_else(|| Error::invalid("the target profile is not derived from one master list"))?;
    let m2 = weak_master_list_matching(&master, &instance.m1, p2.n());
    debug_assert!(p2.is_stable(&m2));
    let diff = symmetric_difference_count(&instance.m1, &m2);
    Ok(SolveOutcome::solved(m2, diff))
}

/// The greedy itself, exposed for seeding tests: builds a stable matching of
/// any profile derived from `master` maximizing the overlap with `m1`.
pub(crate) fn weak_master_list_matching(
    master: &MasterList,
    m1: &Matching,
    n: usize,
) -> Matching {
    let classes: Vec<Vec<AgentId>> = master
        .tiers()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.sort();
            t
        })
        .collect();
    let q = classes.len();
    let mut m2 = Matching::empty(n);
    let mut carry: Option<AgentId> = None;

    // Adds the pairs of `m1` lying inside `group` to `m2`; returns leftovers.
    let add_m1_within = |m2: &mut Matching, group: &[AgentId]| -> Vec<AgentId> {
        for &a in group {
            if let Some(b) = m1.partner(a) {
                if a < b && group.contains(&b) {
                    m2.update_to_contain(Pair::new(a, b));
                }
            }
        }
        group.iter().copied().filter(|&a| !m2.is_matched(a)).collect()
    };
    let pair_ascending = |m2: &mut Matching, rest: &[AgentId]| {
        for ch in rest.chunks(2) {
            if let [a, b] = ch {
                m2.update_to_contain(Pair::new(*a, *b));
            }
        }
    };

    for i in 0..q {
        let mut group = classes[i].clone();
        if let Some(c) = carry {
            group.push(c);
        }
        if group.len() % 2 == 0 {
            // Case 1: the class closes; everything pairs up inside.
            let rest = add_m1_within(&mut m2, &group);
            pair_ascending(&mut m2, &rest);
            carry = None;
            continue;
        }
        // Case 2a: an initial pair straddling into the next class keeps its
        // lower endpoint back as the carry, preserving that pair.
        let straddler = if i + 1 < q {
            classes[i]
                .iter()
                .copied()
                .find(|&b| m1.partner(b).is_some_and(|p| classes[i + 1].contains(&p)))
        } else {
            None
        };
        if let Some(b1) = straddler {
            let group2: Vec<AgentId> = group.iter().copied().filter(|&x| x != b1).collect();
            let rest = add_m1_within(&mut m2, &group2);
            pair_ascending(&mut m2, &rest);
            carry = Some(b1);
            continue;
        }
        let class_pairs: Vec<Pair> = classes[i]
            .iter()
            .filter_map(|&a| {
                m1.partner(a)
                    .filter(|&b| a < b && classes[i].contains(&b))
                    .map(|b| Pair::new(a, b))
            })
            .collect();
        if !class_pairs.is_empty() && class_pairs.len() * 2 == classes[i].len() {
            // Case 2b: the initial matching is perfect on the class; break
            // its least pair to absorb the carry.
            let broken = class_pairs[0];
            let c = carry.expect("an odd group over an even class has a carry");
            for &p in &class_pairs[1..] {
                m2.update_to_contain(p);
            }
            m2.update_to_contain(Pair::new(c, broken.lo()));
            carry = Some(broken.hi());
            continue;
        }
        // Case 2c: pair up what m1 gives, hand the carry the least leftover,
        // and push the last class agent onward.
        let mut rest = add_m1_within(&mut m2, &group);
        if let Some(c) = carry {
            if rest.contains(&c) {
                rest.retain(|&x| x != c);
                let first = rest.remove(0);
                m2.update_to_contain(Pair::new(c, first));
            }
        }
        let leftover = rest.pop().expect("an odd group leaves one agent over");
        pair_ascending(&mut m2, &rest);
        carry = Some(leftover);
    }
    m2
}

/// Checks the per-class boundary structure every stable matching of a
/// complete weak-master-list profile must have: agents pair inside their
/// class except that an odd prefix sum forces one agent towards the previous
/// class, an odd inclusive sum forces one towards the next, and only an odd
/// total leaves one last-class agent unmatched.
pub fn check_class_boundary_structure(master: &MasterList, matching: &Matching) -> bool {
    let classes = master.tiers();
    let q = classes.len();
    let mut cum = 0usize;
    for (i, class) in classes.iter().enumerate() {
        let before_odd = cum % 2 == 1;
        cum += class.len();
        let incl_odd = cum % 2 == 1;
        let mut to_prev = 0usize;
        let mut to_next = 0usize;
        let mut unmatched = 0usize;
        for &a in class.iter() {
            match matching.partner(a) {
                None => unmatched += 1,
                Some(b) => {
                    let cb = master.tier_of(b);
                    if cb == i {
                    } else if i > 0 && cb == i - 1 {
                        to_prev += 1;
                    } else if cb == i + 1 {
                        to_next += 1;
                    } else {
                        return false; // pair spans non-adjacent classes
                    }
                }
            }
        }
        if to_prev != usize::from(before_odd) {
            return false;
        }
        if i + 1 < q {
            if to_next != usize::from(incl_odd) || unmatched != 0 {
                return false;
            }
        } else if to_next != 0 || unmatched != usize::from(incl_odd) {
            return false;
        }
    }
    true
}

/// All stable matchings of a strict complete profile whose followers share
/// one strict master list, by guessing which outliers pair up among
/// themselves and sweeping the master list greedily for the rest. Each
/// guess admits at most one stable matching.
pub fn enumerate_with_outliers(
    profile: &PreferenceProfile,
    partition: &OutlierPartition,
    limits: &Limits,
) -> Result<Vec<Matching>, Error> {
    let n = profile.n();
    if !profile.is_strict() {
        return Err(Error::invalid("the outlier enumeration requires strict preferences"));
    }
    if partition.outliers.len() > limits.outliers {
        return Err(Error::ResourceLimit {
            what: "outliers for stable-matching enumeration",
            need: partition.outliers.len() as u128,
            limit: limits.outliers as u128,
        });
    }
    for a in profile.agents() {
        if profile.list(a).accepted_count() != n - 1 {
            return Err(Error::invalid(format!(
                "agent {a} has an incomplete list; the outlier enumeration needs complete lists"
            )));
        }
    }
    let followers: Vec<AgentId> = partition.followers.iter().copied().collect();
    let master = consistent_master_list(profile, &followers, &followers)
        .ok_or_else(|| Error::invalid("the followers do not share a single strict master list"))?;
    if !master.is_strict() {
        return Err(Error::invalid("the followers' master list contains ties"));
    }
    let order = master.order();

    let outliers: Vec<AgentId> = partition.outliers.iter().copied().collect();
    let mut results: Vec<Matching> = Vec::new();
    // Subsets by bitmask ascending, then all pairings lexicographically.
    for mask in 0..(1u32 << outliers.len()) {
        let sstar: Vec<AgentId> = outliers
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &a)| a)
            .collect();
        if sstar.len() % 2 != 0 {
            continue;
        }
        let mut pairing = Matching::empty(n);
        enumerate_pairings(&sstar, &mut pairing, &mut |pairing| {
            if let Some(m) = run_outlier_guess(profile, partition, &order, pairing) {
                results.push(m);
            }
        });
    }
    results.sort_by(|a, b| a.cmp_lex(b));
    results.dedup();
    Ok(results)
}

/// All perfect matchings on `agents`, lexicographically: the least free
/// agent pairs with each larger free agent in turn.
fn enumerate_pairings(agents: &[AgentId], m: &mut Matching, f: &mut impl FnMut(&Matching)) {
    let Some(&a) = agents.iter().find(|&&a| !m.is_matched(a)) else {
        f(m);
        return;
    };
    let free: Vec<AgentId> = agents
        .iter()
        .copied()
        .filter(|&b| b > a && !m.is_matched(b))
        .collect();
    for b in free {
        m.add_pair(Pair::new(a, b)).expect("free agents pair cleanly");
        enumerate_pairings(agents, m, f);
        m.unmatch(a);
    }
}

fn run_outlier_guess(
    profile: &PreferenceProfile,
    partition: &OutlierPartition,
    order: &[AgentId],
    pairing: &Matching,
) -> Option<Matching> {
    let sweep: Vec<AgentId> = order
        .iter()
        .copied()
        .filter(|a| !pairing.is_matched(*a))
        .collect();
    let is_follower = |a: AgentId| partition.followers.contains(&a);
    let mut m = pairing.clone();

    loop {
        let unmatched: Vec<AgentId> =
            sweep.iter().copied().filter(|&a| !m.is_matched(a)).collect();
        if unmatched.len() <= 1 {
            break;
        }
        let a = unmatched[0];
        if !is_follower(a) {
            // An outlier outside the guessed set pairs with its favourite
            // remaining follower, or the guess is hopeless.
            let fav = profile
                .list(a)
                .accepted()
                .filter(|&b| is_follower(b) && !m.is_matched(b))
                .min_by_key(|&b| profile.list(a).tier_of(b).unwrap());
            let b = fav?;
            m.update_to_contain(Pair::new(a, b));
            continue;
        }
        // `a` is the best follower still free: it pairs with the next free
        // follower unless one of the outliers sitting between them in the
        // master order takes it first.
        let apos = sweep.iter().position(|&x| x == a).unwrap();
        let next_follower = sweep[apos + 1..]
            .iter()
            .copied()
            .find(|&b| is_follower(b) && !m.is_matched(b));
        let limit = match next_follower {
            Some(b) => sweep.iter().position(|&x| x == b).unwrap(),
            None => sweep.len(),
        };
        let between: Vec<AgentId> = sweep[apos + 1..limit]
            .iter()
            .copied()
            .filter(|&b| !is_follower(b))
            .collect();
        let mut temp = m.clone();
        for b in between {
            if temp.is_matched(b) {
                continue;
            }
            let fav = profile
                .list(b)
                .accepted()
                .filter(|&c| is_follower(c) && !temp.is_matched(c))
                .min_by_key(|&c| profile.list(b).tier_of(c).unwrap());
            match fav {
                Some(c) => temp.update_to_contain(Pair::new(b, c)),
                None => break,
            }
        }
        if temp.is_matched(a) {
            m = temp;
        } else if let Some(b) = next_follower {
            m.update_to_contain(Pair::new(a, b));
        } else {
            return None;
        }
    }
    profile.is_stable(&m).then_some(m)
}

/// Minimum-difference element of the outlier enumeration over the changed
/// profile, or `Infeasible` when it is empty.
pub fn solve_isr_outliers(
    instance: &IncrementalInstance,
    partition: &OutlierPartition,
    limits: &Limits,
) -> Result<SolveOutcome, Error> {
    let all = enumerate_with_outliers(&instance.profile2, partition, limits)?;
    let mut best: Option<(u64, Matching)> = None;
    for m in all {
        let diff = symmetric_difference_count(&instance.m1, &m);
        let better = match &best {
            None => true,
            Some((bd, bm)) => diff < *bd || (diff == *bd && m.cmp_lex(bm).is_lt()),
        };
        if better {
            best = Some((diff, m));
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
    use crate::{gen, oracle};

    fn strict(lists: Vec<Vec<u32>>) -> PreferenceProfile {
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    #[test]
    fn detects_shared_complete_strict_list() {
        // Master list 0 > 1 > 2 > 3.
        let p = strict(vec![
            vec![1, 2, 3],
            vec![0, 2, 3],
            vec![0, 1, 3],
            vec![0, 1, 2],
        ]);
        let master = detect_master_list(&p).unwrap();
        assert!(master.is_strict());
        assert_eq!(
            master.order(),
            vec![AgentId(0), AgentId(1), AgentId(2), AgentId(3)]
        );
    }

    #[test]
    fn detects_weak_list_with_example_tiers() {
        // Master list 0 > (1 2 3) > (4 5): three indifference classes.
        let tiers = vec![vec![0u32], vec![1, 2, 3], vec![4, 5]];
        let n = 6;
        let lists = (0..n as u32)
            .map(|a| {
                tiers
                    .iter()
                    .map(|t| t.iter().copied().filter(|&x| x != a).collect::<Vec<u32>>())
                    .filter(|t| !t.is_empty())
                    .collect()
            })
            .collect();
        let p = PreferenceProfile::from_tier_lists(lists).unwrap();
        let master = detect_master_list(&p).unwrap();
        let want: Vec<Vec<AgentId>> = vec![
            vec![AgentId(0)],
            vec![AgentId(1), AgentId(2), AgentId(3)],
            vec![AgentId(4), AgentId(5)],
        ];
        assert_eq!(master.tiers(), &want[..]);
    }

    #[test]
    fn incompatible_lists_have_no_master() {
        let p = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        assert!(detect_master_list(&p).is_none());
    }

    #[test]
    fn strict_master_list_solver_matches_oracle_uniquely() {
        let mut rng = gen::rng(5);
        for _ in 0..20 {
            let n = 8;
            let (p2, _) = gen::strict_master_list_profile(&mut rng, n, 0.8);
            let p1 = gen::complete_strict_sr(&mut rng, n);
            let Some(m1) = crate::classic::find_stable_sr(&p1).unwrap() else {
                continue;
            };
            let inst = IncrementalInstance::new(p1, p2.clone(), m1, u64::MAX);
            let got = solve_strict_master_list(&inst).unwrap();
            let all = oracle::enumerate_stable(&p2, 12).unwrap();
            assert_eq!(all.len(), 1, "master-list instances have one stable matching");
            assert_eq!(got.matching().unwrap(), &all[0]);
        }
    }

    #[test]
    fn strict_master_list_identity_when_profiles_equal() {
        let (p, _) = gen::strict_master_list_profile(&mut gen::rng(8), 6, 1.0);
        let m1 = crate::classic::find_stable_sr(&p).unwrap().unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        let out = solve_strict_master_list(&inst).unwrap();
        assert_eq!(out, SolveOutcome::solved(m1, 0));
    }

    #[test]
    fn weak_master_list_all_tied_costs_nothing_extra() {
        // One big class: every perfect matching is stable, so the solver
        // must return the initial matching itself when that is perfect.
        let n = 6;
        let lists = (0..n as u32)
            .map(|a| vec![(0..n as u32).filter(|&x| x != a).collect::<Vec<u32>>()])
            .collect();
        let p2 = PreferenceProfile::from_tier_lists(lists).unwrap();
        let p1 = gen::complete_strict_sr(&mut gen::rng(13), n);
        let m1 = crate::classic::find_stable_sr(&p1).unwrap().unwrap();
        let inst = IncrementalInstance::new(p1, p2, m1.clone(), 0);
        let out = solve_weak_master_list_complete(&inst).unwrap();
        assert_eq!(out.diff(), Some(0));
        assert_eq!(out.matching().unwrap(), &m1);
    }

    #[test]
    fn weak_master_list_matches_oracle() {
        let mut rng = gen::rng(77);
        for _ in 0..25 {
            let n = 8;
            let (p2, _) = gen::weak_master_list_profile(&mut rng, n, 4);
            let (p1, _) = gen::weak_master_list_profile(&mut rng, n, 4);
            let m1 = {
                let master1 = detect_master_list(&p1).unwrap();
                let seed = weak_master_list_matching(&master1, &Matching::empty(n), n);
                assert!(p1.is_stable(&seed));
                seed
            };
            let inst = IncrementalInstance::new(p1, p2.clone(), m1, u64::MAX);
            let got = solve_weak_master_list_complete(&inst).unwrap();
            let want = oracle::brute_force_incremental(&inst, 12).unwrap();
            assert_eq!(got.diff(), want.diff());
            let master2 = detect_master_list(&p2).unwrap();
            assert!(check_class_boundary_structure(
                &master2,
                got.matching().unwrap()
            ));
        }
    }

    #[test]
    fn outlier_enumeration_empty_set_gives_unique_matching() {
        let n = 6;
        let order: Vec<u32> = (0..n as u32).collect();
        let lists = (0..n as u32)
            .map(|a| order.iter().copied().filter(|&x| x != a).collect())
            .collect();
        let p = strict(lists);
        let part = OutlierPartition::new(n, BTreeSet::new());
        let all = enumerate_with_outliers(&p, &part, &Limits::default()).unwrap();
        let want = oracle::enumerate_stable(&p, 12).unwrap();
        assert_eq!(all, want);
        assert_eq!(all.len(), 1);
    }

    /// Complete strict profile where the last `outliers` agents have random
    /// lists and everyone else follows the identity master list.
    pub(crate) fn random_outlier_profile(
        rng: &mut gen::TestRng,
        n: usize,
        outliers: usize,
    ) -> PreferenceProfile {
        use rand::seq::SliceRandom;
        let lists = (0..n as u32)
            .map(|a| {
                let mut order: Vec<u32> = (0..n as u32).filter(|&x| x != a).collect();
                if a as usize >= n - outliers {
                    order.shuffle(rng);
                }
                order
            })
            .collect();
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    #[test]
    fn outlier_enumeration_matches_oracle() {
        let mut rng = gen::rng(19);
        for _ in 0..20 {
            let n = 8;
            let outliers = 3;
            let p = random_outlier_profile(&mut rng, n, outliers);
            let part = OutlierPartition::new(
                n,
                (0..outliers as u32)
                    .map(|i| AgentId(n as u32 - 1 - i))
                    .collect(),
            );
            let all = enumerate_with_outliers(&p, &part, &Limits::default()).unwrap();
            let want = oracle::enumerate_stable(&p, 12).unwrap();
            assert_eq!(all, want);
        }
    }

    #[test]
    fn outlier_bound_is_enforced() {
        let p = random_outlier_profile(&mut gen::rng(2), 8, 4);
        let part = OutlierPartition::new(8, (4..8).map(AgentId).collect());
        let limits = Limits { outliers: 3, ..Limits::default() };
        assert!(matches!(
            enumerate_with_outliers(&p, &part, &limits),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn solve_isr_outliers_matches_oracle() {
        let mut rng = gen::rng(29);
        for _ in 0..10 {
            let n = 8;
            let p2 = random_outlier_profile(&mut rng, n, 2);
            let p1 = gen::complete_strict_sr(&mut rng, n);
            let Some(m1) = crate::classic::find_stable_sr(&p1).unwrap() else {
                continue;
            };
            let part =
                OutlierPartition::new(n, [AgentId(6), AgentId(7)].into_iter().collect());
            let inst = IncrementalInstance::new(p1, p2, m1, u64::MAX);
            let got = solve_isr_outliers(&inst, &part, &Limits::default()).unwrap();
            let want = oracle::brute_force_incremental(&inst, 12).unwrap();
            assert_eq!(got.diff(), want.diff());
        }
    }

    #[test]
    fn best_partition_recovers_planted_outliers() {
        let p = random_outlier_profile(&mut gen::rng(3), 8, 2);
        let (_, part) = best_outlier_partition(&p).unwrap();
        // Planted outliers may accidentally follow the list, so the detected
        // outlier set is at most the planted one.
        assert!(part.outliers.len() <= 2);
        assert!(part
            .outliers
            .iter()
            .all(|a| [AgentId(6), AgentId(7)].contains(a)));
    }
}
