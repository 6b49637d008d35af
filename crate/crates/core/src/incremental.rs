//! Exact incremental solvers for the tie-free cases.
//!
//! The roommates solver guesses how every agent close to the preference
//! change is matched in the target matching, then repairs the remaining
//! blocking pairs by propagating "best case" / "worst case" bounds along
//! stable pairs until a stable matching is reached. Both matchings are made
//! perfect first by a linear-time preprocessing that adds pendant and dummy
//! agents and shifts the budget accordingly.

use std::collections::BTreeSet;

use crate::classic;
use crate::model::{
    modified_agents, symmetric_difference_count, AgentId, IncrementalInstance, Matching, Pair,
    PreferenceList, PreferenceProfile, SwapDistance,
};
use crate::{Error, Limits, SolveOutcome};

const NO_RANK: u32 = u32::MAX;

/// Result of the perfectization preprocessing: an equivalent instance whose
/// initial matching is perfect and whose changed profile admits a perfect
/// stable matching, plus the data needed to translate answers back.
#[derive(Clone, Debug)]
pub struct Perfectized {
    pub instance: IncrementalInstance,
    /// Agents `0..original_n` are the original ones; the rest are added.
    pub original_n: usize,
    /// Budget increase of the pendant step (`|A2 \ A1|`).
    pub pendant_shift: u64,
    /// Budget increase of the dummy-pairing step (`3x/2`).
    pub dummy_shift: u64,
}

impl Perfectized {
    /// Total budget shift: `k' - k`.
    pub fn k_shift(&self) -> u64 {
        self.pendant_shift + self.dummy_shift
    }

    /// Drops every pair that touches an added agent.
    pub fn translate_back(&self, m: &Matching) -> Matching {
        let mut out = Matching::empty(self.original_n);
        for p in m.pairs() {
            if p.hi().idx() < self.original_n {
                out.add_pair(p).expect("translated pairs stay disjoint");
            }
        }
        out
    }
}

fn push_list_tail(
    list: &PreferenceList,
    n_new: usize,
    owner: AgentId,
    tail: AgentId,
) -> PreferenceList {
    let mut tiers: Vec<Vec<AgentId>> = list.tiers().to_vec();
    tiers.push(vec![tail]);
    PreferenceList::new(n_new, owner, tiers).expect("extended list stays valid")
}

fn widen_list(list: &PreferenceList, n_new: usize, owner: AgentId) -> PreferenceList {
    PreferenceList::new(n_new, owner, list.tiers().to_vec()).expect("widened list stays valid")
}

/// Transforms a strict roommates instance into an equivalent one where the
/// initial matching is perfect and the changed profile admits a perfect
/// stable matching. Returns `None` when the changed profile admits no stable
/// matching at all, in which case the original instance is a no-instance.
///
/// First, every agent left unmatched by the stable matchings of the changed
/// profile gets a pendant agent appended at the end of its lists; pendants of
/// agents also unmatched initially join the initial matching, and the budget
/// grows by the number of the remaining pendants. Second, the agents still
/// unmatched initially get dummy partners that pair up among themselves in
/// the target, with the budget growing by three halves of their number.
pub fn perfectize(instance: &IncrementalInstance) -> Result<Option<Perfectized>, Error> {
    if !instance.profile1.is_strict() || !instance.profile2.is_strict() {
        return Err(Error::invalid("perfectization requires strict preferences"));
    }
    let Some(m2) = classic::find_stable_sr(&instance.profile2)? else {
        return Ok(None);
    };
    let n = instance.n();
    let a1: BTreeSet<AgentId> = instance.m1.unmatched_agents().into_iter().collect();
    let a2: BTreeSet<AgentId> = m2.unmatched_agents().into_iter().collect();

    // Step 1: pendant agents for everyone unmatched in the target profile.
    let pendants: Vec<AgentId> = a2.iter().copied().collect();
    // Step 2: dummies for agents unmatched initially but matched in the target.
    let leftover: Vec<AgentId> = a1.difference(&a2).copied().collect();
    let x = leftover.len();
    if x % 2 != 0 {
        return Err(Error::Internal(
            "odd number of initially-unmatched agents after pendant insertion".into(),
        ));
    }

    let n_new = n + pendants.len() + x;
    let pendant_id = |i: usize| AgentId((n + i) as u32);
    let dummy_id = |i: usize| AgentId((n + pendants.len() + i) as u32);

    let mut lists1: Vec<PreferenceList> = Vec::with_capacity(n_new);
    let mut lists2: Vec<PreferenceList> = Vec::with_capacity(n_new);
    for a in instance.profile1.agents() {
        let mut l1 = widen_list(instance.profile1.list(a), n_new, a);
        let mut l2 = widen_list(instance.profile2.list(a), n_new, a);
        if let Some(i) = pendants.iter().position(|&p| p == a) {
            l1 = push_list_tail(&l1, n_new, a, pendant_id(i));
            l2 = push_list_tail(&l2, n_new, a, pendant_id(i));
        }
        if let Some(i) = leftover.iter().position(|&p| p == a) {
            l1 = push_list_tail(&l1, n_new, a, dummy_id(i));
            l2 = push_list_tail(&l2, n_new, a, dummy_id(i));
        }
        lists1.push(l1);
        lists2.push(l2);
    }
    for (i, &a) in pendants.iter().enumerate() {
        let owner = pendant_id(i);
        let l = PreferenceList::new(n_new, owner, vec![vec![a]])?;
        lists1.push(l.clone());
        lists2.push(l);
    }
    for (i, &a) in leftover.iter().enumerate() {
        let owner = dummy_id(i);
        // 1-based pairing: odd index partners the next dummy, even the previous.
        let mate = if (i + 1) % 2 == 1 {
            dummy_id(i + 1)
        } else {
            dummy_id(i - 1)
        };
        let l = PreferenceList::new(n_new, owner, vec![vec![a], vec![mate]])?;
        lists1.push(l.clone());
        lists2.push(l);
    }

    let mut m1 = Matching::empty(n_new);
    for p in instance.m1.pairs() {
        m1.add_pair(p)?;
    }
    let mut pendant_shift = 0u64;
    for (i, &a) in pendants.iter().enumerate() {
        if a1.contains(&a) {
            m1.add_pair(Pair::new(a, pendant_id(i)))?;
        } else {
            pendant_shift += 1;
        }
    }
    for (i, &a) in leftover.iter().enumerate() {
        m1.add_pair(Pair::new(a, dummy_id(i)))?;
    }
    let dummy_shift = (3 * x / 2) as u64;

    let out = IncrementalInstance::new(
        PreferenceProfile::new(lists1),
        PreferenceProfile::new(lists2),
        m1,
        instance
            .k
            .saturating_add(pendant_shift)
            .saturating_add(dummy_shift),
    );
    debug_assert!(out.m1.is_perfect());
    debug_assert!(out.profile1.is_stable(&out.m1));
    Ok(Some(Perfectized {
        instance: out,
        original_n: n,
        pendant_shift,
        dummy_shift,
    }))
}

/// Read-only data shared by all guesses of one solver run.
struct GuessCtx {
    n: usize,
    /// rank2[a][b]: position of b in a's list of the changed profile.
    rank2: Vec<Vec<u32>>,
    /// Stable-pair partners of each agent, sorted best-first for that agent.
    stable_neighbors: Vec<Vec<AgentId>>,
    stable_pair: Vec<Vec<bool>>,
    /// Partner in the (perfect) initial matching.
    m1p: Vec<AgentId>,
    m1: Matching,
    k: u64,
}

impl GuessCtx {
    fn build(instance: &IncrementalInstance) -> Result<Self, Error> {
        let n = instance.n();
        let p2 = &instance.profile2;
        let mut rank2 = vec![vec![NO_RANK; n]; n];
        for a in p2.agents() {
            for (r, tier) in p2.list(a).tiers().iter().enumerate() {
                for &b in tier {
                    rank2[a.idx()][b.idx()] = r as u32;
                }
            }
        }
        let Some(pairs) = classic::stable_pairs(p2)? else {
            return Err(Error::Internal(
                "perfectized target profile lost its stable matching".into(),
            ));
        };
        let mut stable_pair = vec![vec![false; n]; n];
        let mut stable_neighbors: Vec<Vec<AgentId>> = vec![Vec::new(); n];
        for p in &pairs {
            stable_pair[p.lo().idx()][p.hi().idx()] = true;
            stable_pair[p.hi().idx()][p.lo().idx()] = true;
            stable_neighbors[p.lo().idx()].push(p.hi());
            stable_neighbors[p.hi().idx()].push(p.lo());
        }
        for a in 0..n {
            stable_neighbors[a].sort_by_key(|b| rank2[a][b.idx()]);
        }
        let m1p = (0..n)
            .map(|a| {
                instance
                    .m1
                    .partner(AgentId(a as u32))
                    .ok_or_else(|| Error::Internal("initial matching is not perfect".into()))
            })
            .collect::<Result<_, _>>()?;
        Ok(GuessCtx {
            n,
            rank2,
            stable_neighbors,
            stable_pair,
            m1p,
            m1: instance.m1.clone(),
            k: instance.k,
        })
    }

    #[inline]
    fn rank(&self, a: AgentId, b: AgentId) -> u32 {
        self.rank2[a.idx()][b.idx()]
    }

    /// Strictly prefers x to y in the changed profile.
    #[inline]
    fn prefers(&self, a: AgentId, x: AgentId, y: AgentId) -> bool {
        self.rank(a, x) < self.rank(a, y)
    }
}

/// One initialization guess: a target partner for every agent whose list
/// changed (and for their initial partners), the pair sets H and F, and an
/// improves/worsens bit for each initial partner of a fixed agent.
#[derive(Clone, Debug)]
pub struct Guess {
    /// Aligned with the solver's sorted B set.
    pub assignment: Vec<AgentId>,
    pub h_set: Vec<Pair>,
    pub f_set: Vec<Pair>,
    /// Aligned with the sorted fixed agents whose initial partner is free;
    /// `true` means that partner improves on its initial pair.
    pub orientation: Vec<bool>,
}

/// Mutable state of one guess run.
pub struct GuessState {
    pub m: Matching,
    pub bc: Vec<Option<AgentId>>,
    pub wc: Vec<Option<AgentId>>,
    pub x_set: Vec<bool>,
    pub f_set: BTreeSet<Pair>,
    pub h_set: BTreeSet<Pair>,
}

impl GuessState {
    fn set_bc(&mut self, ctx: &GuessCtx, c: AgentId, v: AgentId) {
        if let Some(old) = self.bc[c.idx()] {
            debug_assert!(
                ctx.rank(c, old) <= ctx.rank(c, v),
                "best case may only get worse over a run"
            );
        }
        self.bc[c.idx()] = Some(v);
    }

    fn set_wc(&mut self, ctx: &GuessCtx, c: AgentId, v: AgentId) {
        if let Some(old) = self.wc[c.idx()] {
            debug_assert!(
                ctx.rank(c, v) <= ctx.rank(c, old),
                "worst case may only get better over a run"
            );
        }
        self.wc[c.idx()] = Some(v);
    }

    /// Loop-head consistency checks; compiled out in release builds.
    #[cfg(debug_assertions)]
    fn check_invariants(&self, ctx: &GuessCtx) {
        for c in 0..ctx.n {
            let a = AgentId(c as u32);
            let bc = self.bc[c];
            let wc = self.wc[c];
            // A differently-matched agent always carries a bound.
            if self.m.partner(a) != Some(ctx.m1p[c]) {
                assert!(
                    bc.is_some() || wc.is_some(),
                    "agent {a} lost its pair silently"
                );
            }
            // Bounds bracket the initial partner for free agents.
            if !self.x_set[c] {
                if let Some(b) = bc {
                    assert!(
                        ctx.rank(a, ctx.m1p[c]) <= ctx.rank(a, b),
                        "best case of {a} beats its initial partner"
                    );
                }
                if let Some(w) = wc {
                    assert!(
                        ctx.rank(a, w) <= ctx.rank(a, ctx.m1p[c]),
                        "worst case of {a} is worse than its initial partner"
                    );
                }
            }
            // At most one non-trivial bound, unless both agree.
            if let (Some(b), Some(w)) = (bc, wc) {
                assert!(
                    b == w || self.x_set[c],
                    "contradictory bounds survived on {a}"
                );
            }
            // A matched agent with a bound is matched exactly to it.
            if let Some(p) = self.m.partner(a) {
                if let Some(b) = bc {
                    assert_eq!(p, b, "agent {a} matched away from its best case");
                }
                if let Some(w) = wc {
                    assert_eq!(p, w, "agent {a} matched away from its worst case");
                }
            }
        }
    }
}

/// Applies a guess to a perfectized instance: rewires the matching to the
/// guessed pairs and H, fixes the bounds of the guessed agents, orients the
/// freed initial partners and processes F. `None` means the guess is
/// rejected outright.
pub fn initialization(
    instance: &IncrementalInstance,
    guess: &Guess,
) -> Result<Option<GuessState>, Error> {
    let ctx = GuessCtx::build(instance)?;
    Ok(init_state(&ctx, &b_agents(instance), guess))
}

/// Agents whose lists changed, plus their initial partners.
fn b_agents(instance: &IncrementalInstance) -> Vec<AgentId> {
    let mut set: BTreeSet<AgentId> = BTreeSet::new();
    for a in modified_agents(&instance.profile2, &instance.profile1) {
        set.insert(a);
        if let Some(p) = instance.m1.partner(a) {
            set.insert(p);
        }
    }
    set.into_iter().collect()
}

fn init_state(ctx: &GuessCtx, b: &[AgentId], guess: &Guess) -> Option<GuessState> {
    let n = ctx.n;
    let mut state = GuessState {
        m: ctx.m1.clone(),
        bc: vec![None; n],
        wc: vec![None; n],
        x_set: vec![false; n],
        f_set: guess.f_set.iter().copied().collect(),
        h_set: guess.h_set.iter().copied().collect(),
    };

    // Guessed pairs plus H form one constraint set; an agent claimed by two
    // different pairs means two fixed agents were guessed the same partner.
    let mut constraint: Vec<Option<AgentId>> = vec![None; n];
    let mut add = |x: AgentId, y: AgentId| -> bool {
        match constraint[x.idx()] {
            None => {
                constraint[x.idx()] = Some(y);
                true
            }
            Some(prev) => prev == y,
        }
    };
    for (i, &a) in b.iter().enumerate() {
        let g = guess.assignment[i];
        if !add(a, g) || !add(g, a) {
            return None;
        }
    }
    for p in &guess.h_set {
        if !add(p.lo(), p.hi()) || !add(p.hi(), p.lo()) {
            return None;
        }
    }

    for (i, c) in constraint.iter().enumerate() {
        if let Some(c) = c {
            let a = AgentId(i as u32);
            state.x_set[a.idx()] = true;
            if a < *c {
                state.m.update_to_contain(Pair::new(a, *c));
            }
        }
    }
    for a in (0..n as u32).map(AgentId) {
        if state.x_set[a.idx()] {
            let p = state
                .m
                .partner(a)
                .expect("fixed agents are matched to their guess");
            state.bc[a.idx()] = Some(p);
            state.wc[a.idx()] = Some(p);
        }
    }

    // Orient the initial partners that the rewiring left unmatched.
    let orient_agents: Vec<AgentId> = (0..n as u32)
        .map(AgentId)
        .filter(|&a| state.x_set[a.idx()] && !state.x_set[ctx.m1p[a.idx()].idx()])
        .collect();
    debug_assert_eq!(orient_agents.len(), guess.orientation.len());
    for (&a, &improves) in orient_agents.iter().zip(&guess.orientation) {
        let c = ctx.m1p[a.idx()];
        if improves {
            state.set_wc(ctx, c, a);
        } else {
            state.set_bc(ctx, c, a);
        }
    }

    // F: pairs of the initial matching whose endpoints both end up better.
    for p in &guess.f_set {
        for (a, other) in [(p.lo(), p.hi()), (p.hi(), p.lo())] {
            if state.x_set[a.idx()] && ctx.m1p[a.idx()] == other {
                let bc = state.bc[a.idx()].expect("fixed agents carry bounds");
                if ctx.prefers(a, other, bc) {
                    return None;
                }
            }
        }
    }
    for p in &guess.f_set {
        if !state.x_set[p.lo().idx()] {
            state.set_wc(ctx, p.lo(), p.hi());
        }
        if !state.x_set[p.hi().idx()] {
            state.set_wc(ctx, p.hi(), p.lo());
        }
        if state.m.partner(p.lo()) == Some(p.hi()) {
            state.m.unmatch(p.lo());
        }
    }
    Some(state)
}

/// One propagation step on `a`, which must carry a bound. Picks the extreme
/// qualifying stable pair {a,b}, seeds the bounds of the two partners the
/// pair displaces when those are still in their initial pairs, rewires the
/// matching and tightens the bounds of a and b. `false` means reject.
fn propagate(ctx: &GuessCtx, state: &mut GuessState, a: AgentId) -> bool {
    debug_assert!(state.bc[a.idx()].is_some() || state.wc[a.idx()].is_some());
    if state.x_set[a.idx()] {
        return false;
    }
    let neighbors = &ctx.stable_neighbors[a.idx()];
    if let Some(bca) = state.bc[a.idx()] {
        // a ends up worse than its current best case: take the best-ranked
        // stable partner below bc(a) that can hold a without beating its own
        // worst case or its initial pair.
        let cut = ctx.rank(a, bca);
        let b = neighbors.iter().copied().find(|&b| {
            ctx.rank(a, b) > cut
                && state.wc[b.idx()].is_none_or(|w| ctx.rank(b, a) <= ctx.rank(b, w))
                && ctx.rank(b, a) <= ctx.rank(b, ctx.m1p[b.idx()])
        });
        let Some(b) = b else { return false };
        if state.x_set[b.idx()] {
            return false;
        }
        if let Some(ma) = state.m.partner(a) {
            if state.wc[ma.idx()].is_none() && ctx.m1p[a.idx()] == ma {
                state.set_wc(ctx, ma, a);
            }
        }
        if let Some(mb) = state.m.partner(b) {
            if state.bc[mb.idx()].is_none() && ctx.m1p[b.idx()] == mb {
                state.set_bc(ctx, mb, b);
            }
        }
        state.m.update_to_contain(Pair::new(a, b));
        state.set_bc(ctx, a, b);
        state.set_wc(ctx, b, a);
    } else {
        let wca = state.wc[a.idx()].expect("propagation needs a bound");
        // a ends up better than its current worst case: take the worst-ranked
        // stable partner above wc(a) whose best case allows a.
        let cut = ctx.rank(a, wca);
        let b = neighbors.iter().copied().rev().find(|&b| {
            ctx.rank(a, b) < cut
                && state.bc[b.idx()].is_none_or(|c| ctx.rank(b, c) <= ctx.rank(b, a))
        });
        let Some(b) = b else { return false };
        if state.x_set[b.idx()] {
            return false;
        }
        if let Some(ma) = state.m.partner(a) {
            if state.bc[ma.idx()].is_none() && ctx.m1p[a.idx()] == ma {
                state.set_bc(ctx, ma, a);
            }
        }
        if let Some(mb) = state.m.partner(b) {
            if state.wc[mb.idx()].is_none() && ctx.m1p[b.idx()] == mb {
                state.set_wc(ctx, mb, b);
            }
        }
        state.m.update_to_contain(Pair::new(a, b));
        state.set_wc(ctx, a, b);
        state.set_bc(ctx, b, a);
    }
    true
}

/// Lowest-id unmatched agent involved in a blocking pair, if any.
fn unmatched_blocking_agent(ctx: &GuessCtx, state: &GuessState) -> Option<AgentId> {
    for a in (0..ctx.n as u32).map(AgentId) {
        if state.m.is_matched(a) {
            continue;
        }
        for b in (0..ctx.n as u32).map(AgentId) {
            if b == a || ctx.rank(a, b) == NO_RANK || ctx.rank(b, a) == NO_RANK {
                continue;
            }
            if state.m.partner(b).is_none_or(|p| ctx.prefers(b, a, p)) {
                return Some(a);
            }
        }
    }
    None
}

/// Lexicographically least blocking pair.
fn least_blocking_pair(ctx: &GuessCtx, state: &GuessState) -> Option<Pair> {
    for a in (0..ctx.n as u32).map(AgentId) {
        for b in (a.0 + 1..ctx.n as u32).map(AgentId) {
            if ctx.rank(a, b) == NO_RANK || ctx.rank(b, a) == NO_RANK {
                continue;
            }
            let a_wants = state.m.partner(a).is_none_or(|p| ctx.prefers(a, b, p));
            let b_wants = state.m.partner(b).is_none_or(|p| ctx.prefers(b, a, p));
            if a_wants && b_wants {
                return Some(Pair::new(a, b));
            }
        }
    }
    None
}

/// Runs one guess to completion: resolves blocking pairs, preferring ones
/// with an unmatched endpoint, until the matching is stable, some bound
/// contradiction rejects the guess, or the budget is exceeded at the end.
fn run_guess_inner(
    ctx: &GuessCtx,
    b: &[AgentId],
    guess: &Guess,
) -> Result<Option<Matching>, Error> {
    let Some(mut state) = init_state(ctx, b, guess) else {
        return Ok(None);
    };
    let max_iters = ctx.n * ctx.n + 1;
    let mut iters = 0usize;
    loop {
        #[cfg(debug_assertions)]
        state.check_invariants(ctx);

        let step = if let Some(a) = unmatched_blocking_agent(ctx, &state) {
            Some(a)
        } else if let Some(p) = least_blocking_pair(ctx, &state) {
            let (a, b) = (p.lo(), p.hi());
            if state.bc[a.idx()].is_some() && state.bc[b.idx()].is_some() {
                return Ok(None);
            }
            let x = if state.bc[a.idx()].is_none() { a } else { b };
            if state.wc[x.idx()].is_none() {
                debug_assert!(!state.x_set[x.idx()], "fixed agents always carry bounds");
                let mx = state.m.partner(x).ok_or_else(|| {
                    Error::Internal("boundless blocking agent is unmatched".into())
                })?;
                state.set_wc(ctx, x, mx);
            }
            Some(x)
        } else {
            None
        };
        let Some(x) = step else { break };

        iters += 1;
        if iters > max_iters {
            return Err(Error::Internal(
                "propagation failed to terminate within the iteration bound".into(),
            ));
        }
        if !propagate(ctx, &mut state, x) {
            return Ok(None);
        }
        for c in (0..ctx.n as u32).map(AgentId) {
            if let (Some(w), Some(bb)) = (state.wc[c.idx()], state.bc[c.idx()]) {
                if ctx.prefers(c, w, bb) {
                    return Ok(None);
                }
            }
        }
    }
    if symmetric_difference_count(&ctx.m1, &state.m) <= ctx.k {
        Ok(Some(state.m))
    } else {
        Ok(None)
    }
}

/// Public wrapper over a single guess run on a perfectized instance.
pub fn run_guess(instance: &IncrementalInstance, guess: &Guess) -> Result<Option<Matching>, Error> {
    let ctx = GuessCtx::build(instance)?;
    run_guess_inner(&ctx, &b_agents(instance), guess)
}

/// Candidate H pairs: stable pairs outside the initial matching where both
/// endpoints strictly prefer their initial partner.
fn h_candidates(ctx: &GuessCtx) -> Vec<Pair> {
    let mut out = Vec::new();
    for a in (0..ctx.n as u32).map(AgentId) {
        for &b in &ctx.stable_neighbors[a.idx()] {
            if b <= a || ctx.m1p[a.idx()] == b {
                continue;
            }
            if ctx.prefers(a, ctx.m1p[a.idx()], b) && ctx.prefers(b, ctx.m1p[b.idx()], a) {
                out.push(Pair::new(a, b));
            }
        }
    }
    out.sort();
    out
}

/// Candidate F pairs: initial pairs where both endpoints have some strictly
/// better stable partner to move to.
fn f_candidates(ctx: &GuessCtx) -> Vec<Pair> {
    ctx.m1
        .pairs()
        .into_iter()
        .filter(|p| {
            let better = |a: AgentId, cur: AgentId| {
                ctx.stable_neighbors[a.idx()]
                    .iter()
                    .any(|&b| b != cur && ctx.prefers(a, b, cur))
            };
            better(p.lo(), p.hi()) && better(p.hi(), p.lo())
        })
        .collect()
}

fn subsets_up_to<T: Copy>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max {
        let mut next = Vec::new();
        for sel in &frontier {
            let start = sel.last().map_or(0, |&i| i + 1);
            for i in start..items.len() {
                let mut s = sel.clone();
                s.push(i);
                out.push(s.iter().map(|&j| items[j]).collect());
                next.push(s);
            }
        }
        frontier = next;
    }
    out
}

fn disjoint(pairs: &[Pair]) -> bool {
    let mut seen = BTreeSet::new();
    pairs
        .iter()
        .all(|p| seen.insert(p.lo()) && seen.insert(p.hi()))
}

/// Exact roommates solver: perfectize, precompute the stable pairs of the
/// changed profile, enumerate all initialization guesses, and keep the best
/// non-rejected run. The guess-space bound is checked before enumerating.
pub fn solve_isr_xp(instance: &IncrementalInstance, limits: &Limits) -> Result<SolveOutcome, Error> {
    if !instance.profile1.is_strict() || !instance.profile2.is_strict() {
        return Err(Error::invalid("the roommates solver requires strict preferences"));
    }
    let SwapDistance::Finite(d) = instance.swap_distance() else {
        return Err(Error::invalid("the profiles must share their acceptance sets"));
    };
    let d = d as usize;
    let Some(perf) = perfectize(instance)? else {
        return Ok(SolveOutcome::Infeasible);
    };
    let pinst = &perf.instance;
    let n = pinst.n() as u128;

    let bound = 2u128
        .checked_pow(4 * d as u32)
        .and_then(|p| n.checked_pow(5 * d as u32).map(|q| p.saturating_mul(q)))
        .unwrap_or(u128::MAX);
    if bound > limits.guess_space {
        return Err(Error::ResourceLimit {
            what: "guess space of the roommates solver",
            need: bound,
            limit: limits.guess_space,
        });
    }

    let ctx = GuessCtx::build(pinst)?;
    let b = b_agents(pinst);
    let h_subsets: Vec<Vec<Pair>> = subsets_up_to(&h_candidates(&ctx), d)
        .into_iter()
        .filter(|s| disjoint(s))
        .collect();
    let f_subsets = subsets_up_to(&f_candidates(&ctx), d);

    let mut best: Option<(u64, Matching)> = None;
    let mut assignment = vec![AgentId(0); b.len()];
    enumerate_assignments(&ctx, &b, 0, &mut assignment, &mut |assignment| {
        for h in &h_subsets {
            for f in &f_subsets {
                let orient_agents = orientation_agents(&ctx, &b, assignment, h);
                let mut options: Vec<Vec<bool>> = Vec::with_capacity(orient_agents.len());
                for &a in &orient_agents {
                    let c = ctx.m1p[a.idx()];
                    let mut opts = Vec::new();
                    if ctx.stable_neighbors[c.idx()]
                        .iter()
                        .any(|&p| ctx.prefers(c, p, a))
                    {
                        opts.push(true);
                    }
                    if ctx.stable_neighbors[c.idx()]
                        .iter()
                        .any(|&p| ctx.prefers(c, a, p))
                    {
                        opts.push(false);
                    }
                    options.push(opts);
                }
                let mut orientation = Vec::with_capacity(orient_agents.len());
                enumerate_orientations(&options, &mut orientation, &mut |orientation| {
                    let guess = Guess {
                        assignment: assignment.to_vec(),
                        h_set: h.clone(),
                        f_set: f.clone(),
                        orientation: orientation.to_vec(),
                    };
                    if let Some(m) = run_guess_inner(&ctx, &b, &guess)? {
                        let diff = symmetric_difference_count(&ctx.m1, &m);
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
            }
        }
        Ok(())
    })?;

    Ok(match best {
        Some((_, m)) => {
            let translated = perf.translate_back(&m);
            let diff = symmetric_difference_count(&instance.m1, &translated);
            SolveOutcome::solved(translated, diff)
        }
        None => SolveOutcome::Infeasible,
    })
}

/// Sorted fixed agents whose initial partner is not itself fixed; the freed
/// partners of exactly these agents need an orientation bit.
fn orientation_agents(
    ctx: &GuessCtx,
    b: &[AgentId],
    assignment: &[AgentId],
    h: &[Pair],
) -> Vec<AgentId> {
    let mut x = vec![false; ctx.n];
    for (i, &a) in b.iter().enumerate() {
        x[a.idx()] = true;
        x[assignment[i].idx()] = true;
    }
    for p in h {
        x[p.lo().idx()] = true;
        x[p.hi().idx()] = true;
    }
    (0..ctx.n as u32)
        .map(AgentId)
        .filter(|a| x[a.idx()] && !x[ctx.m1p[a.idx()].idx()])
        .collect()
}

/// All involution-consistent assignments of stable partners to the agents of
/// B, ascending in ids and partner rank. Every pair of a perfect stable
/// matching is a stable pair, so non-stable partners need not be guessed.
fn enumerate_assignments(
    ctx: &GuessCtx,
    b: &[AgentId],
    at: usize,
    assignment: &mut Vec<AgentId>,
    f: &mut impl FnMut(&[AgentId]) -> Result<(), Error>,
) -> Result<(), Error> {
    if at == b.len() {
        return f(assignment);
    }
    let a = b[at];
    // A partner already forced by an earlier member of B.
    if let Some(i) = (0..at).find(|&i| assignment[i] == a) {
        let forced = b[i];
        if ctx.stable_pair[a.idx()][forced.idx()] {
            assignment[at] = forced;
            return enumerate_assignments(ctx, b, at + 1, assignment, f);
        }
        return Ok(());
    }
    let candidates = ctx.stable_neighbors[a.idx()].clone();
    for p in candidates {
        // If the partner is an earlier B member, it must have picked a back.
        if let Some(j) = b.iter().position(|&y| y == p) {
            if j < at && assignment[j] != a {
                continue;
            }
        }
        assignment[at] = p;
        enumerate_assignments(ctx, b, at + 1, assignment, f)?;
    }
    Ok(())
}

fn enumerate_orientations(
    options: &[Vec<bool>],
    chosen: &mut Vec<bool>,
    f: &mut impl FnMut(&[bool]) -> Result<(), Error>,
) -> Result<(), Error> {
    if chosen.len() == options.len() {
        return f(chosen);
    }
    let opts = options[chosen.len()].clone();
    for o in opts {
        chosen.push(o);
        enumerate_orientations(options, chosen, f)?;
        chosen.pop();
    }
    Ok(())
}

/// Exact marriage solver for strict bipartite instances: a stable matching
/// maximizing the overlap with the initial one, which by the Rural Hospitals
/// property also minimizes the symmetric difference. Implemented as an exact
/// search over the left side; a polynomial maximum-weight stable matching
/// routine can replace the search behind the same contract.
pub fn solve_ism(instance: &IncrementalInstance, limits: &Limits) -> Result<SolveOutcome, Error> {
    if !instance.profile2.is_strict() {
        return Err(Error::invalid("the marriage solver requires strict preferences"));
    }
    let (m, _overlap) = max_overlap_stable_bipartite(&instance.profile2, &instance.m1, limits)?
        .ok_or_else(|| {
            Error::Internal("a marriage instance always has a stable matching".into())
        })?;
    let diff = symmetric_difference_count(&instance.m1, &m);
    Ok(SolveOutcome::solved(m, diff))
}

/// Stable matching of a strict bipartite profile maximizing the number of
/// pairs shared with `target`; ties broken to the lexicographically least
/// matching. Search over left agents with incremental blocking-pair pruning.
pub(crate) fn max_overlap_stable_bipartite(
    profile: &PreferenceProfile,
    target: &Matching,
    limits: &Limits,
) -> Result<Option<(Matching, u64)>, Error> {
    let bi = profile
        .bipartition()
        .ok_or_else(|| Error::invalid("expected a bipartite profile"))?;
    if profile.n() > limits.oracle_agents + limits.oracle_agents {
        return Err(Error::ResourceLimit {
            what: "agents for the exact marriage search",
            need: profile.n() as u128,
            limit: 2 * limits.oracle_agents as u128,
        });
    }
    let left: Vec<AgentId> = bi.left_agents().collect();
    let mut best: Option<(u64, Matching)> = None;
    let mut m = Matching::empty(profile.n());
    bipartite_search(profile, &left, 0, &mut m, target, &mut best);
    Ok(best.map(|(o, m)| (m, o)))
}

fn bipartite_search(
    profile: &PreferenceProfile,
    left: &[AgentId],
    at: usize,
    m: &mut Matching,
    target: &Matching,
    best: &mut Option<(u64, Matching)>,
) {
    if at == left.len() {
        // Pairs of two still-free agents were never checked along the way.
        for a in profile.agents() {
            if !m.is_matched(a) {
                let blocked = profile
                    .list(a)
                    .accepted()
                    .any(|x| profile.accepts(x, a) && profile.is_blocking(m, a, x));
                if blocked {
                    return;
                }
            }
        }
        let overlap = m.pairs().iter().filter(|p| target.contains(**p)).count() as u64;
        let better = match best {
            None => true,
            Some((bo, bm)) => overlap > *bo || (overlap == *bo && m.cmp_lex(bm).is_lt()),
        };
        if better {
            *best = Some((overlap, m.clone()));
        }
        return;
    }
    let a = left[at];
    let mut options: Vec<AgentId> = profile
        .list(a)
        .accepted()
        .filter(|&w| profile.accepts(w, a) && !m.is_matched(w))
        .collect();
    options.sort();
    for w in options {
        m.update_to_contain(Pair::new(a, w));
        if !prefix_blocked(profile, left, at, m, a, Some(w)) {
            bipartite_search(profile, left, at + 1, m, target, best);
        }
        m.unmatch(a);
    }
    if !prefix_blocked(profile, left, at, m, a, None) {
        bipartite_search(profile, left, at + 1, m, target, best);
    }
}

/// Does the decision just made for left agent `a` create a blocking pair
/// among agents whose own pairs are already final? Those are `a` itself
/// against matched right agents, and the woman `a` just took against the
/// earlier left agents.
fn prefix_blocked(
    profile: &PreferenceProfile,
    left: &[AgentId],
    at: usize,
    m: &Matching,
    a: AgentId,
    taken: Option<AgentId>,
) -> bool {
    for w in profile.list(a).accepted() {
        if profile.accepts(w, a) && m.is_matched(w) && profile.is_blocking(m, a, w) {
            return true;
        }
    }
    if let Some(w) = taken {
        for m2 in profile.list(w).accepted() {
            if m2 != a
                && profile.accepts(m2, w)
                && left[..at].contains(&m2)
                && profile.is_blocking(m, m2, w)
            {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use std::collections::BTreeSet as Set;

    fn strict(lists: Vec<Vec<u32>>) -> PreferenceProfile {
        PreferenceProfile::from_strict_lists(lists).unwrap()
    }

    fn bipartite(lists: Vec<Vec<u32>>, left: &[u32]) -> PreferenceProfile {
        let left: Set<AgentId> = left.iter().map(|&i| AgentId(i)).collect();
        strict(lists).with_bipartition(&left)
    }

    #[test]
    fn perfectize_keeps_perfect_instances_unchanged() {
        let p = strict(vec![vec![1], vec![0], vec![3], vec![2]]);
        let m1 = Matching::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1, 7);
        let perf = perfectize(&inst).unwrap().unwrap();
        assert_eq!(perf.instance.n(), 4);
        assert_eq!(perf.instance.k, 7);
        assert_eq!(perf.k_shift(), 0);
    }

    #[test]
    fn perfectize_adds_pendant_for_agent_unmatched_on_both_sides() {
        // Agent 2 accepts only 0 but 0 pairs with 1: unmatched in both.
        let p = strict(vec![vec![1, 2], vec![0], vec![0]]);
        let m1 = Matching::from_pairs(3, &[(0, 1)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1, 5);
        let perf = perfectize(&inst).unwrap().unwrap();
        assert_eq!(perf.instance.n(), 4);
        assert_eq!(perf.pendant_shift, 0);
        assert_eq!(perf.dummy_shift, 0);
        assert_eq!(perf.instance.k, 5);
        assert!(perf
            .instance
            .m1
            .contains(Pair::new(AgentId(2), AgentId(3))));
        assert!(perf.instance.m1.is_perfect());
    }

    #[test]
    fn perfectize_budget_shift_for_two_leftover_agents() {
        // In P1 the stable matching keeps 2 and 3 unmatched; the target
        // profile matches all four agents. x = 2, so the budget grows by 3.
        let p1 = strict(vec![vec![1, 3], vec![0, 2], vec![1], vec![0]]);
        let m1 = Matching::from_pairs(4, &[(0, 1)]).unwrap();
        assert!(p1.is_stable(&m1));
        let p2 = strict(vec![vec![3, 1], vec![2, 0], vec![1], vec![0]]);
        assert!(oracle::enumerate_stable(&p2, 8)
            .unwrap()
            .iter()
            .all(Matching::is_perfect));
        let inst = IncrementalInstance::new(p1, p2, m1, 2);
        let perf = perfectize(&inst).unwrap().unwrap();
        assert_eq!(perf.pendant_shift, 0);
        assert_eq!(perf.dummy_shift, 3);
        assert_eq!(perf.instance.k, 5);
        assert_eq!(perf.instance.n(), 6);
        assert!(perf.instance.m1.is_perfect());
        assert!(perf.instance.profile1.is_stable(&perf.instance.m1));
    }

    #[test]
    fn perfectize_reports_infeasible_target() {
        let p1 = strict(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        let m1 = Matching::from_pairs(3, &[(0, 1)]).unwrap();
        let p2 = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        let inst = IncrementalInstance::new(p1, p2, m1, 3);
        assert!(perfectize(&inst).unwrap().is_none());
    }

    #[test]
    fn xp_zero_change_returns_initial_matching() {
        let p = strict(vec![
            vec![1, 2, 3],
            vec![0, 3, 2],
            vec![3, 0, 1],
            vec![2, 1, 0],
        ]);
        let m1 = classic::find_stable_sr(&p).unwrap().unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        let out = solve_isr_xp(&inst, &Limits::default()).unwrap();
        assert_eq!(out, SolveOutcome::solved(m1, 0));
    }

    #[test]
    fn xp_detects_infeasible_target_profile() {
        let p1 = strict(vec![vec![1, 2], vec![0, 2], vec![0, 1]]);
        let m1 = Matching::from_pairs(3, &[(0, 1)]).unwrap();
        let p2 = strict(vec![vec![1, 2], vec![2, 0], vec![0, 1]]);
        let inst = IncrementalInstance::new(p1, p2, m1, 9);
        assert_eq!(
            solve_isr_xp(&inst, &Limits::default()).unwrap(),
            SolveOutcome::Infeasible
        );
    }

    #[test]
    fn xp_matches_oracle_on_single_swap_six_agents() {
        let mut rng = crate::gen::rng(42);
        for _ in 0..25 {
            let inst = crate::gen::random_isr_instance(&mut rng, 6, true, 1);
            let want = oracle::brute_force_incremental(&inst, 12).unwrap();
            let got = solve_isr_xp(&inst, &Limits::default()).unwrap();
            assert_eq!(got.diff(), want.diff(), "diff mismatch");
        }
    }

    #[test]
    fn ism_identity_when_profiles_equal() {
        let p = bipartite(
            vec![vec![2, 3], vec![2, 3], vec![0, 1], vec![1, 0]],
            &[0, 1],
        );
        let m1 = classic::find_stable_sm(&p).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        let out = solve_ism(&inst, &Limits::default()).unwrap();
        assert_eq!(out, SolveOutcome::solved(m1, 0));
    }

    #[test]
    fn ism_single_swap_flips_two_by_two_market() {
        // Both men prefer w0 and both women prefer m0, so the unique stable
        // matching is assortative. One swap in w0's list flips both pairs.
        let p1 = bipartite(
            vec![vec![2, 3], vec![2, 3], vec![0, 1], vec![0, 1]],
            &[0, 1],
        );
        let m1 = classic::find_stable_sm(&p1).unwrap();
        assert_eq!(m1, Matching::from_pairs(4, &[(0, 2), (1, 3)]).unwrap());
        let p2 = bipartite(
            vec![vec![2, 3], vec![2, 3], vec![1, 0], vec![0, 1]],
            &[0, 1],
        );
        let inst = IncrementalInstance::new(p1, p2, m1, 4);
        let out = solve_ism(&inst, &Limits::default()).unwrap();
        let want = oracle::brute_force_incremental(&inst, 8).unwrap();
        assert_eq!(out.diff(), want.diff());
        assert_eq!(out.diff(), Some(4));
    }

    #[test]
    fn ism_matches_oracle_on_random_five_by_five() {
        let mut rng = crate::gen::rng(7);
        for _ in 0..20 {
            let inst = crate::gen::random_ismt_instance(&mut rng, 5, 5, 2, 0, 0);
            let want = oracle::brute_force_incremental(&inst, 10).unwrap();
            let got = solve_ism(&inst, &Limits::default()).unwrap();
            assert_eq!(got.diff(), want.diff());
        }
    }

    #[test]
    fn initialization_empty_guess_keeps_initial_matching() {
        let p = strict(vec![vec![1], vec![0], vec![3], vec![2]]);
        let m1 = Matching::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        let guess = Guess {
            assignment: vec![],
            h_set: vec![],
            f_set: vec![],
            orientation: vec![],
        };
        let state = initialization(&inst, &guess).unwrap().unwrap();
        assert_eq!(state.m, m1);
        assert!(state.bc.iter().all(Option::is_none));
        assert!(state.wc.iter().all(Option::is_none));
    }

    #[test]
    fn initialization_rejects_conflicting_partner_guesses() {
        // Two H pairs claim agent 2 at once.
        let p = strict(vec![
            vec![1, 2, 3],
            vec![0, 2, 3],
            vec![3, 0, 1],
            vec![2, 0, 1],
        ]);
        let m1 = classic::find_stable_sr(&p).unwrap().unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1, 4);
        let guess = Guess {
            assignment: vec![],
            h_set: vec![
                Pair::new(AgentId(0), AgentId(2)),
                Pair::new(AgentId(1), AgentId(2)),
            ],
            f_set: vec![],
            orientation: vec![],
        };
        assert!(initialization(&inst, &guess).unwrap().is_none());
    }
}
