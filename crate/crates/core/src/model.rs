//! Agents, weak preference orders, matchings and the stability predicates
//! everything else is built on.
//!
//! Agents are dense indices `0..n`. A preference list is an ordered sequence
//! of tiers (tier 0 most preferred); a list is strict when every tier is a
//! singleton. Being unmatched is strictly worse than any accepted partner.

use std::collections::BTreeSet;
use std::fmt;

use crate::Error;

/// Dense agent index, unique per instance. The order on ids is used for all
/// deterministic tie-breaking.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub u32);

impl AgentId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered agent pair, stored with the smaller id first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Pair(AgentId, AgentId);

impl Pair {
    pub fn new(a: AgentId, b: AgentId) -> Self {
        assert_ne!(a, b, "a pair must consist of two distinct agents");
        if a < b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    #[inline]
    pub fn lo(self) -> AgentId {
        self.0
    }

    #[inline]
    pub fn hi(self) -> AgentId {
        self.1
    }

    pub fn contains(self, a: AgentId) -> bool {
        self.0 == a || self.1 == a
    }

    pub fn other(self, a: AgentId) -> AgentId {
        debug_assert!(self.contains(a));
        if self.0 == a {
            self.1
        } else {
            self.0
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.0, self.1)
    }
}

/// A potential partner in a comparison: an agent, or the distinguished
/// "unmatched" sentinel ranked strictly below every accepted agent.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Partner {
    Agent(AgentId),
    Unmatched,
}

impl From<Option<AgentId>> for Partner {
    fn from(o: Option<AgentId>) -> Self {
        match o {
            Some(a) => Partner::Agent(a),
            None => Partner::Unmatched,
        }
    }
}

const UNRANKED: u32 = u32::MAX;

/// One agent's weak order over the agents it accepts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PreferenceList {
    tiers: Vec<Vec<AgentId>>,
    /// tier index per agent id, `UNRANKED` for unaccepted agents.
    rank: Vec<u32>,
}

impl PreferenceList {
    /// Builds a list from tiers. Tiers must be non-empty, disjoint, and must
    /// not contain `owner`.
    pub fn new(n: usize, owner: AgentId, tiers: Vec<Vec<AgentId>>) -> Result<Self, Error> {
        let mut rank = vec![UNRANKED; n];
        for (t, tier) in tiers.iter().enumerate() {
            if tier.is_empty() {
                return Err(Error::invalid("empty preference tier"));
            }
            for &a in tier {
                if a == owner {
                    return Err(Error::invalid(format!(
                        "agent {owner} appears in its own preference list"
                    )));
                }
                if a.idx() >= n {
                    return Err(Error::invalid(format!("unknown agent id {a}")));
                }
                if rank[a.idx()] != UNRANKED {
                    return Err(Error::invalid(format!(
                        "agent {a} appears twice in the list of {owner}"
                    )));
                }
                rank[a.idx()] = t as u32;
            }
        }
        Ok(PreferenceList { tiers, rank })
    }

    pub fn empty(n: usize) -> Self {
        PreferenceList { tiers: Vec::new(), rank: vec![UNRANKED; n] }
    }

    pub fn tiers(&self) -> &[Vec<AgentId>] {
        &self.tiers
    }

    #[inline]
    pub fn accepts(&self, a: AgentId) -> bool {
        self.rank[a.idx()] != UNRANKED
    }

    /// Tier index of `a`, if accepted (0 = most preferred).
    #[inline]
    pub fn tier_of(&self, a: AgentId) -> Option<u32> {
        let r = self.rank[a.idx()];
        (r != UNRANKED).then_some(r)
    }

    pub fn accepted(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.tiers.iter().flatten().copied()
    }

    pub fn accepted_count(&self) -> usize {
        self.tiers.iter().map(Vec::len).sum()
    }

    pub fn is_strict(&self) -> bool {
        self.tiers.iter().all(|t| t.len() == 1)
    }

    /// Number of tiers of size at least two.
    pub fn tie_count(&self) -> usize {
        self.tiers.iter().filter(|t| t.len() >= 2).count()
    }

    /// Sum of the sizes of all tiers of size at least two.
    pub fn summed_tie_size(&self) -> usize {
        self.tiers.iter().map(|t| t.len()).filter(|&l| l >= 2).sum()
    }

    /// Relation of `x` vs `y` in this list; both must be accepted.
    pub fn compare(&self, x: AgentId, y: AgentId) -> std::cmp::Ordering {
        self.rank[x.idx()].cmp(&self.rank[y.idx()])
    }
}

/// Two-sided partition of the agents for marriage instances.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Bipartition {
    /// `true` for agents of the first side.
    left: Vec<bool>,
}

impl Bipartition {
    pub fn new(n: usize, left_side: &BTreeSet<AgentId>) -> Self {
        let mut left = vec![false; n];
        for a in left_side {
            left[a.idx()] = true;
        }
        Bipartition { left }
    }

    #[inline]
    pub fn same_side(&self, a: AgentId, b: AgentId) -> bool {
        self.left[a.idx()] == self.left[b.idx()]
    }

    #[inline]
    pub fn is_left(&self, a: AgentId) -> bool {
        self.left[a.idx()]
    }

    pub fn left_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.left
            .iter()
            .enumerate()
            .filter(|(_, &l)| l)
            .map(|(i, _)| AgentId(i as u32))
    }

    pub fn right_agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.left
            .iter()
            .enumerate()
            .filter(|(_, &l)| !l)
            .map(|(i, _)| AgentId(i as u32))
    }
}

/// Weak preference orders of all agents, plus an optional bipartition.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PreferenceProfile {
    lists: Vec<PreferenceList>,
    bipartition: Option<Bipartition>,
}

impl PreferenceProfile {
    pub fn new(lists: Vec<PreferenceList>) -> Self {
        PreferenceProfile { lists, bipartition: None }
    }

    /// Convenience constructor for strict profiles given as ranked id lists.
    pub fn from_strict_lists(lists: Vec<Vec<u32>>) -> Result<Self, Error> {
        let n = lists.len();
        let mut out = Vec::with_capacity(n);
        for (i, l) in lists.into_iter().enumerate() {
            let tiers = l.into_iter().map(|a| vec![AgentId(a)]).collect();
            out.push(PreferenceList::new(n, AgentId(i as u32), tiers)?);
        }
        Ok(PreferenceProfile::new(out))
    }

    /// Convenience constructor for weak profiles given as tier lists of ids.
    pub fn from_tier_lists(lists: Vec<Vec<Vec<u32>>>) -> Result<Self, Error> {
        let n = lists.len();
        let mut out = Vec::with_capacity(n);
        for (i, l) in lists.into_iter().enumerate() {
            let tiers = l
                .into_iter()
                .map(|t| t.into_iter().map(AgentId).collect())
                .collect();
            out.push(PreferenceList::new(n, AgentId(i as u32), tiers)?);
        }
        Ok(PreferenceProfile::new(out))
    }

    pub fn with_bipartition(mut self, left_side: &BTreeSet<AgentId>) -> Self {
        self.bipartition = Some(Bipartition::new(self.n(), left_side));
        self
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n() as u32).map(AgentId)
    }

    pub fn list(&self, a: AgentId) -> &PreferenceList {
        &self.lists[a.idx()]
    }

    pub fn lists(&self) -> &[PreferenceList] {
        &self.lists
    }

    pub fn bipartition(&self) -> Option<&Bipartition> {
        self.bipartition.as_ref()
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartition.is_some()
    }

    pub fn is_strict(&self) -> bool {
        self.lists.iter().all(PreferenceList::is_strict)
    }

    /// Complete in the roommates sense: every agent accepts all others
    /// (restricted to the other side under a bipartition).
    pub fn is_complete(&self) -> bool {
        self.agents().all(|a| {
            let want = match &self.bipartition {
                Some(b) => self
                    .agents()
                    .filter(|&x| x != a && !b.same_side(a, x))
                    .count(),
                None => self.n() - 1,
            };
            self.list(a).accepted_count() == want
        })
    }

    pub fn accepts(&self, a: AgentId, b: AgentId) -> bool {
        self.lists[a.idx()].accepts(b)
    }

    pub fn mutually_accept(&self, a: AgentId, b: AgentId) -> bool {
        self.accepts(a, b) && self.accepts(b, a)
    }

    /// Does `a` weakly prefer `x` to `y`? Unmatched is strictly below every
    /// accepted agent.
    pub fn weakly_prefers(&self, a: AgentId, x: Partner, y: Partner) -> Result<bool, Error> {
        let rank = |p: Partner| -> Result<u64, Error> {
            match p {
                Partner::Unmatched => Ok(u64::MAX),
                Partner::Agent(b) => self
                    .list(a)
                    .tier_of(b)
                    .map(u64::from)
                    .ok_or_else(|| Error::invalid(format!("agent {a} does not accept {b}"))),
            }
        };
        Ok(rank(x)? <= rank(y)?)
    }

    /// Does `a` strictly prefer `x` to `y`?
    pub fn strictly_prefers(&self, a: AgentId, x: Partner, y: Partner) -> Result<bool, Error> {
        Ok(self.weakly_prefers(a, x, y)? && !self.weakly_prefers(a, y, x)?)
    }

    /// Unchecked strict comparison against the current partner of `a`; `b`
    /// must be accepted by `a`. Hot path of all stability scans.
    #[inline]
    pub(crate) fn prefers_to_partner(
        &self,
        a: AgentId,
        b: AgentId,
        partner: Option<AgentId>,
    ) -> bool {
        let lb = &self.lists[a.idx()];
        let rb = lb.rank[b.idx()];
        debug_assert_ne!(rb, UNRANKED);
        match partner {
            None => true,
            Some(p) => rb < lb.rank[p.idx()],
        }
    }

    /// Do `a` and `b` block `matching`? Requires mutual acceptance and strict
    /// preference over the current partners on both sides (weak stability).
    pub fn is_blocking(&self, matching: &Matching, a: AgentId, b: AgentId) -> bool {
        a != b
            && self.mutually_accept(a, b)
            && self.prefers_to_partner(a, b, matching.partner(a))
            && self.prefers_to_partner(b, a, matching.partner(b))
    }

    /// Stability under weak stability: no blocking pair exists.
    pub fn is_stable(&self, matching: &Matching) -> bool {
        self.find_blocking_pair(matching).is_none()
    }

    /// Lexicographically least blocking pair, if any.
    pub fn find_blocking_pair(&self, matching: &Matching) -> Option<Pair> {
        let n = self.n() as u32;
        for a in 0..n {
            let a = AgentId(a);
            for b in (a.0 + 1)..n {
                let b = AgentId(b);
                if self.is_blocking(matching, a, b) {
                    return Some(Pair::new(a, b));
                }
            }
        }
        None
    }

    /// Checks that acceptance is symmetric and within-side acceptance is
    /// absent under a bipartition.
    pub fn acceptance_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for a in self.agents() {
            for b in self.list(a).accepted() {
                if !self.accepts(b, a) {
                    out.push(Violation::AsymmetricAcceptance { a, b });
                }
                if let Some(bi) = &self.bipartition {
                    if bi.same_side(a, b) {
                        out.push(Violation::SameSideAcceptance { a, b });
                    }
                }
            }
        }
        out
    }
}

/// Sum over all agents of per-agent pairwise order disagreements. Infinite
/// when some agent's acceptance sets differ between the profiles.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SwapDistance {
    Finite(u64),
    Infinite,
}

impl SwapDistance {
    pub fn finite(self) -> Option<u64> {
        match self {
            SwapDistance::Finite(d) => Some(d),
            SwapDistance::Infinite => None,
        }
    }
}

/// Swap distance between two profiles over the same agent set. Each unordered
/// pair whose relative order differs (strict flip, tie created, or tie
/// destroyed) counts once, so a single adjacent transposition has distance 1.
pub fn swap_distance(p1: &PreferenceProfile, p2: &PreferenceProfile) -> SwapDistance {
    if p1.n() != p2.n() {
        return SwapDistance::Infinite;
    }
    let mut total = 0u64;
    for a in p1.agents() {
        let l1 = p1.list(a);
        let l2 = p2.list(a);
        let acc: Vec<AgentId> = l1.accepted().collect();
        if acc.len() != l2.accepted_count() || acc.iter().any(|&x| !l2.accepts(x)) {
            return SwapDistance::Infinite;
        }
        for (i, &x) in acc.iter().enumerate() {
            for &y in &acc[i + 1..] {
                if l1.compare(x, y) != l2.compare(x, y) {
                    total += 1;
                }
            }
        }
    }
    SwapDistance::Finite(total)
}

/// The set of agents whose preference lists differ between the two profiles.
pub fn modified_agents(p1: &PreferenceProfile, p2: &PreferenceProfile) -> Vec<AgentId> {
    p1.agents()
        .filter(|&a| p1.list(a) != p2.list(a))
        .collect()
}

/// A set of disjoint unordered agent pairs with O(1) partner lookup.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matching {
    partner: Vec<Option<AgentId>>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Matching { partner: vec![None; n] }
    }

    pub fn from_pairs(n: usize, pairs: &[(u32, u32)]) -> Result<Self, Error> {
        let mut m = Matching::empty(n);
        for &(a, b) in pairs {
            m.add_pair(Pair::new(AgentId(a), AgentId(b)))?;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.partner.len()
    }

    #[inline]
    pub fn partner(&self, a: AgentId) -> Option<AgentId> {
        self.partner[a.idx()]
    }

    pub fn is_matched(&self, a: AgentId) -> bool {
        self.partner[a.idx()].is_some()
    }

    pub fn contains(&self, p: Pair) -> bool {
        self.partner(p.lo()) == Some(p.hi())
    }

    pub fn len(&self) -> usize {
        self.partner.iter().flatten().count() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.partner.iter().all(Option::is_none)
    }

    pub fn is_perfect(&self) -> bool {
        self.partner.iter().all(Option::is_some)
    }

    /// Adds a pair; both endpoints must be unmatched.
    pub fn add_pair(&mut self, p: Pair) -> Result<(), Error> {
        if self.is_matched(p.lo()) || self.is_matched(p.hi()) {
            return Err(Error::invalid(format!(
                "pair {p} overlaps an existing pair of the matching"
            )));
        }
        self.partner[p.lo().idx()] = Some(p.hi());
        self.partner[p.hi().idx()] = Some(p.lo());
        Ok(())
    }

    /// Removes the pair containing `a`, if any.
    pub fn unmatch(&mut self, a: AgentId) {
        if let Some(b) = self.partner[a.idx()].take() {
            self.partner[b.idx()] = None;
        }
    }

    /// Deletes all pairs containing either endpoint, then inserts the pair.
    pub fn update_to_contain(&mut self, p: Pair) {
        self.unmatch(p.lo());
        self.unmatch(p.hi());
        self.partner[p.lo().idx()] = Some(p.hi());
        self.partner[p.hi().idx()] = Some(p.lo());
    }

    /// Pairs sorted lexicographically; the canonical form used for ordering
    /// and display.
    pub fn pairs(&self) -> Vec<Pair> {
        let mut out = Vec::new();
        for (i, p) in self.partner.iter().enumerate() {
            if let Some(b) = p {
                let a = AgentId(i as u32);
                if a < *b {
                    out.push(Pair(a, *b));
                }
            }
        }
        out
    }

    pub fn matched_agents(&self) -> BTreeSet<AgentId> {
        self.partner
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_some())
            .map(|(i, _)| AgentId(i as u32))
            .collect()
    }

    pub fn unmatched_agents(&self) -> Vec<AgentId> {
        self.partner
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_none())
            .map(|(i, _)| AgentId(i as u32))
            .collect()
    }

    /// Every pair must be mutually accepted under `profile`.
    pub fn is_valid_for(&self, profile: &PreferenceProfile) -> bool {
        self.pairs()
            .iter()
            .all(|p| profile.mutually_accept(p.lo(), p.hi()))
    }

    /// Lexicographic order on the sorted pair lists.
    pub fn cmp_lex(&self, other: &Matching) -> std::cmp::Ordering {
        self.pairs().cmp(&other.pairs())
    }
}

/// Pairs appearing in exactly one of the two matchings, with the count.
pub fn symmetric_difference(m1: &Matching, m2: &Matching) -> (BTreeSet<Pair>, usize) {
    let p1: BTreeSet<Pair> = m1.pairs().into_iter().collect();
    let p2: BTreeSet<Pair> = m2.pairs().into_iter().collect();
    let diff: BTreeSet<Pair> = p1.symmetric_difference(&p2).copied().collect();
    let count = diff.len();
    (diff, count)
}

pub fn symmetric_difference_count(m1: &Matching, m2: &Matching) -> u64 {
    symmetric_difference(m1, m2).1 as u64
}

/// An incremental problem: two profiles over the same agents, a matching
/// stable in the first, a budget, and optionally a forced subset of `m1`.
#[derive(Clone, Debug)]
pub struct IncrementalInstance {
    pub profile1: PreferenceProfile,
    pub profile2: PreferenceProfile,
    pub m1: Matching,
    pub k: u64,
    pub forced: Option<BTreeSet<Pair>>,
}

impl IncrementalInstance {
    pub fn new(
        profile1: PreferenceProfile,
        profile2: PreferenceProfile,
        m1: Matching,
        k: u64,
    ) -> Self {
        IncrementalInstance { profile1, profile2, m1, k, forced: None }
    }

    pub fn n(&self) -> usize {
        self.profile1.n()
    }

    pub fn swap_distance(&self) -> SwapDistance {
        swap_distance(&self.profile1, &self.profile2)
    }
}

/// A single validation failure, carrying its location.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Violation {
    AsymmetricAcceptance { a: AgentId, b: AgentId },
    SameSideAcceptance { a: AgentId, b: AgentId },
    AgentCountMismatch { n1: usize, n2: usize },
    MatchingPairUnaccepted { pair: Pair },
    InitialMatchingUnstable { blocking: Pair },
    ForcedPairNotInM1 { pair: Pair },
    InfiniteSwapDistance,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AsymmetricAcceptance { a, b } => {
                write!(f, "agent {a} accepts {b} but {b} does not accept {a}")
            }
            Violation::SameSideAcceptance { a, b } => {
                write!(f, "agents {a} and {b} are on the same side but accept each other")
            }
            Violation::AgentCountMismatch { n1, n2 } => {
                write!(f, "profiles have {n1} and {n2} agents")
            }
            Violation::MatchingPairUnaccepted { pair } => {
                write!(f, "matching pair {pair} is not mutually accepted")
            }
            Violation::InitialMatchingUnstable { blocking } => {
                write!(f, "initial matching unstable: {blocking} blocks it in the first profile")
            }
            Violation::ForcedPairNotInM1 { pair } => {
                write!(f, "forced pair {pair} is not part of the initial matching")
            }
            Violation::InfiniteSwapDistance => {
                write!(f, "acceptance sets differ between the profiles (infinite swap distance)")
            }
        }
    }
}

/// Full instance validation: acceptance symmetry and bipartition consistency
/// in both profiles, stability of `m1` in the first profile, forced pairs
/// inside `m1`, and finite swap distance.
pub fn validate_instance(instance: &IncrementalInstance) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if instance.profile1.n() != instance.profile2.n() {
        out.push(Violation::AgentCountMismatch {
            n1: instance.profile1.n(),
            n2: instance.profile2.n(),
        });
        return Err(out);
    }
    out.extend(instance.profile1.acceptance_violations());
    out.extend(instance.profile2.acceptance_violations());
    for pair in instance.m1.pairs() {
        if !instance.profile1.mutually_accept(pair.lo(), pair.hi()) {
            out.push(Violation::MatchingPairUnaccepted { pair });
        }
    }
    if out.is_empty() {
        if let Some(blocking) = instance.profile1.find_blocking_pair(&instance.m1) {
            out.push(Violation::InitialMatchingUnstable { blocking });
        }
    }
    if let Some(forced) = &instance.forced {
        for &pair in forced {
            if !instance.m1.contains(pair) {
                out.push(Violation::ForcedPairNotInM1 { pair });
            }
        }
    }
    if instance.swap_distance() == SwapDistance::Infinite {
        out.push(Violation::InfiniteSwapDistance);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict(lists: Vec<Vec<u32>>) -> PreferenceProfile {
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    #[test]
    fn weakly_prefers_tier_order() {
        // 0: 1 > 2
        let p = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let (b, c) = (Partner::Agent(AgentId(1)), Partner::Agent(AgentId(2)));
        assert!(p.weakly_prefers(AgentId(0), b, c).unwrap());
        assert!(!p.weakly_prefers(AgentId(0), c, b).unwrap());
        assert!(p.strictly_prefers(AgentId(0), b, c).unwrap());
    }

    #[test]
    fn weakly_prefers_tie_symmetry() {
        // 0: (1 2)
        let p = PreferenceProfile::from_tier_lists(vec![
            vec![vec![1, 2]],
            vec![vec![0]],
            vec![vec![0]],
        ])
        .unwrap();
        let (b, c) = (Partner::Agent(AgentId(1)), Partner::Agent(AgentId(2)));
        assert!(p.weakly_prefers(AgentId(0), b, c).unwrap());
        assert!(p.weakly_prefers(AgentId(0), c, b).unwrap());
        assert!(!p.strictly_prefers(AgentId(0), b, c).unwrap());
        assert!(!p.strictly_prefers(AgentId(0), c, b).unwrap());
    }

    #[test]
    fn any_accepted_agent_beats_unmatched() {
        let p = strict(vec![vec![1, 2], vec![0], vec![0]]);
        assert!(p
            .strictly_prefers(AgentId(0), Partner::Agent(AgentId(2)), Partner::Unmatched)
            .unwrap());
        assert!(!p
            .weakly_prefers(AgentId(0), Partner::Unmatched, Partner::Agent(AgentId(2)))
            .unwrap());
    }

    #[test]
    fn unknown_agent_is_invalid_argument() {
        let p = strict(vec![vec![1], vec![0]]);
        assert!(p
            .weakly_prefers(AgentId(0), Partner::Agent(AgentId(1)), Partner::Unmatched)
            .is_ok());
        // 0 does not accept itself ranked; comparing an unaccepted agent errors
        let q = strict(vec![vec![1], vec![0], vec![]]);
        assert!(q
            .weakly_prefers(AgentId(0), Partner::Agent(AgentId(2)), Partner::Unmatched)
            .is_err());
    }

    #[test]
    fn blocking_mutual_first_choices() {
        // 0: 1>2, 1: 0>3, M = {{0,2},{1,3}}
        let p = strict(vec![vec![1, 2], vec![0, 3], vec![0], vec![1]]);
        let m = Matching::from_pairs(4, &[(0, 2), (1, 3)]).unwrap();
        assert!(p.is_blocking(&m, AgentId(0), AgentId(1)));
        assert!(p.is_blocking(&m, AgentId(1), AgentId(0)));
        assert!(!p.is_stable(&m));
    }

    #[test]
    fn own_pair_never_blocks() {
        let p = strict(vec![vec![1], vec![0]]);
        let m = Matching::from_pairs(2, &[(0, 1)]).unwrap();
        assert!(!p.is_blocking(&m, AgentId(0), AgentId(1)));
        assert!(p.is_stable(&m));
    }

    #[test]
    fn tie_does_not_block_weak_stability() {
        // 0: (1 2), matched to 2: no strict preference for 1
        let p = PreferenceProfile::from_tier_lists(vec![
            vec![vec![1, 2]],
            vec![vec![0]],
            vec![vec![0]],
        ])
        .unwrap();
        let m = Matching::from_pairs(3, &[(0, 2)]).unwrap();
        assert!(!p.is_blocking(&m, AgentId(0), AgentId(1)));
    }

    #[test]
    fn empty_profile_empty_matching_stable() {
        let p = strict(vec![vec![], vec![]]);
        let m = Matching::empty(2);
        assert!(p.is_stable(&m));
    }

    #[test]
    fn two_agents_empty_matching_blocked() {
        let p = strict(vec![vec![1], vec![0]]);
        let m = Matching::empty(2);
        assert!(!p.is_stable(&m));
    }

    #[test]
    fn symmetric_difference_counts() {
        let m = Matching::from_pairs(4, &[(0, 1)]).unwrap();
        assert_eq!(symmetric_difference(&m, &m).1, 0);
        let m2 = Matching::from_pairs(4, &[(0, 2)]).unwrap();
        assert_eq!(symmetric_difference(&m, &m2).1, 2);
    }

    #[test]
    fn swap_distance_single_inversion() {
        let p1 = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let p2 = strict(vec![vec![2, 1], vec![0], vec![0]]);
        assert_eq!(swap_distance(&p1, &p2), SwapDistance::Finite(1));
        assert_eq!(swap_distance(&p1, &p1), SwapDistance::Finite(0));
    }

    #[test]
    fn swap_distance_infinite_on_different_acceptance() {
        let p1 = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let p2 = strict(vec![vec![1], vec![0], vec![]]);
        assert_eq!(swap_distance(&p1, &p2), SwapDistance::Infinite);
    }

    #[test]
    fn tie_creation_counts_once() {
        let p1 = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let p2 = PreferenceProfile::from_tier_lists(vec![
            vec![vec![1, 2]],
            vec![vec![0]],
            vec![vec![0]],
        ])
        .unwrap();
        assert_eq!(swap_distance(&p1, &p2), SwapDistance::Finite(1));
    }

    #[test]
    fn validate_detects_unstable_m1() {
        let p = strict(vec![vec![1, 2], vec![0, 3], vec![0], vec![1]]);
        let m1 = Matching::from_pairs(4, &[(0, 2), (1, 3)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1, 0);
        let errs = validate_instance(&inst).unwrap_err();
        assert!(errs
            .iter()
            .any(|v| matches!(v, Violation::InitialMatchingUnstable { .. })));
    }

    #[test]
    fn validate_detects_forced_pair_outside_m1() {
        let p = strict(vec![vec![1], vec![0], vec![3], vec![2]]);
        let m1 = Matching::from_pairs(4, &[(0, 1)]).unwrap();
        let mut inst = IncrementalInstance::new(p.clone(), p, m1, 0);
        inst.forced = Some([Pair::new(AgentId(2), AgentId(3))].into_iter().collect());
        let errs = validate_instance(&inst).unwrap_err();
        assert!(errs
            .iter()
            .any(|v| matches!(v, Violation::ForcedPairNotInM1 { .. })));
    }

    #[test]
    fn validate_ok_instance() {
        let p = strict(vec![vec![1], vec![0], vec![3], vec![2]]);
        let m1 = Matching::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1, 0);
        assert!(validate_instance(&inst).is_ok());
    }
}
