//! Executable reduction constructions: the multicolored-clique to
//! incremental-roommates generator with its structural stability checker,
//! the forced-pair chain that removes forced pairs from marriage instances,
//! and the forbidden-pairs chain that prices selected pairs out of reach.

use std::collections::BTreeSet;

use crate::model::{
    swap_distance, symmetric_difference_count, AgentId, IncrementalInstance, Matching, Pair,
    PreferenceList, PreferenceProfile, SwapDistance,
};
use crate::Error;

/// An ℓ-partite r-regular graph with equally sized color classes; the input
/// of the clique generator. Vertices are (color, index) pairs.
#[derive(Clone, Debug)]
pub struct ColoredGraph {
    pub colors: usize,
    pub class_size: usize,
    pub degree: usize,
    edges: Vec<((usize, usize), (usize, usize))>,
}

impl ColoredGraph {
    pub fn new(
        colors: usize,
        class_size: usize,
        edges: Vec<((usize, usize), (usize, usize))>,
    ) -> Result<Self, Error> {
        if colors == 0 || class_size == 0 {
            return Err(Error::invalid("the graph needs at least one colored vertex"));
        }
        let mut seen = BTreeSet::new();
        let mut degree = vec![vec![0usize; class_size]; colors];
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            for v in [a, b] {
                if v.0 >= colors || v.1 >= class_size {
                    return Err(Error::invalid(format!("vertex ({},{}) out of range", v.0, v.1)));
                }
            }
            if a.0 == b.0 {
                return Err(Error::invalid("edges must connect different color classes"));
            }
            let e = if a.0 < b.0 { (a, b) } else { (b, a) };
            if !seen.insert(e) {
                return Err(Error::invalid("duplicate edge"));
            }
            degree[e.0 .0][e.0 .1] += 1;
            degree[e.1 .0][e.1 .1] += 1;
            normalized.push(e);
        }
        let r = degree[0][0];
        if degree.iter().flatten().any(|&d| d != r) {
            return Err(Error::invalid("the graph must be regular"));
        }
        normalized.sort();
        Ok(ColoredGraph { colors, class_size, degree: r, edges: normalized })
    }

    pub fn edges(&self) -> &[((usize, usize), (usize, usize))] {
        &self.edges
    }

    pub fn complete_bipartite(side: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..side {
            for j in 0..side {
                edges.push(((0, i), (1, j)));
            }
        }
        ColoredGraph::new(2, side, edges).expect("complete bipartite graph is valid")
    }

    fn adjacent(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let e = if a.0 < b.0 { (a, b) } else { (b, a) };
        self.edges.binary_search(&e).is_ok()
    }
}

/// A generated instance together with the printable agent names.
#[derive(Clone, Debug)]
pub struct GadgetSpec {
    pub instance: IncrementalInstance,
    pub names: Vec<String>,
}

/// The clique reduction: per color a selection gadget whose target-profile
/// stable matchings encode picking one vertex, per edge a 4-cycle that stays
/// cheap only when both endpoints are picked. The budget is met exactly when
/// the picked vertices form a multicolored clique.
pub struct CliqueGadget {
    pub spec: GadgetSpec,
    pub graph: ColoredGraph,
}

struct CliqueLayout {
    colors: usize,
    class_size: usize,
}

impl CliqueLayout {
    fn color_block(&self) -> u32 {
        (6 + 8 * self.class_size) as u32
    }
    fn s(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block())
    }
    fn sb(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 1)
    }
    fn t(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 2)
    }
    fn tb(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 3)
    }
    fn u(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 4)
    }
    fn ub(&self, c: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 5)
    }
    /// Plain 4-cycle agent; j is 1-based.
    fn a(&self, c: usize, i: usize, j: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 6 + (8 * i + j - 1) as u32)
    }
    /// Barred 4-cycle agent; j is 1-based.
    fn ab(&self, c: usize, i: usize, j: usize) -> AgentId {
        AgentId(c as u32 * self.color_block() + 6 + (8 * i + 4 + j - 1) as u32)
    }
    /// Edge 4-cycle agent; j is 1-based, e is the edge index.
    fn ae(&self, e: usize, j: usize) -> AgentId {
        AgentId(self.colors as u32 * self.color_block() + (4 * e + j - 1) as u32)
    }
    fn n(&self) -> usize {
        self.colors * (6 + 8 * self.class_size)
    }
}

pub fn gen_isr_from_clique(graph: &ColoredGraph) -> Result<CliqueGadget, Error> {
    let lay = CliqueLayout { colors: graph.colors, class_size: graph.class_size };
    let n = lay.n() + 4 * graph.edges().len();
    let strict = |ids: Vec<AgentId>| ids.into_iter().map(|a| vec![a]).collect::<Vec<_>>();

    let mut names = vec![String::new(); n];
    let mut lists1: Vec<Vec<Vec<AgentId>>> = vec![Vec::new(); n];
    let mut set = |idx: AgentId, name: String, tiers: Vec<Vec<AgentId>>, lists: &mut Vec<Vec<Vec<AgentId>>>, names: &mut Vec<String>| {
        names[idx.idx()] = name;
        lists[idx.idx()] = tiers;
    };

    for c in 0..graph.colors {
        // Selection agents. The s lists interleave the entry points of the
        // two 4-cycles of each vertex with the first agents of its incident
        // edge cycles, ascending edge index inside each block.
        let mut s_list = vec![lay.t(c)];
        for i in 0..graph.class_size {
            s_list.push(lay.a(c, i, 1));
            s_list.push(lay.ab(c, i, 1));
            for (e, &(x, y)) in graph.edges().iter().enumerate() {
                if x == (c, i) || y == (c, i) {
                    s_list.push(lay.ae(e, 1));
                }
            }
        }
        let mut sb_list = vec![lay.tb(c)];
        for i in (0..graph.class_size).rev() {
            sb_list.push(lay.a(c, i, 4));
            sb_list.push(lay.ab(c, i, 4));
            for (e, &(x, y)) in graph.edges().iter().enumerate() {
                if x == (c, i) || y == (c, i) {
                    sb_list.push(lay.ae(e, 1));
                }
            }
        }
        set(lay.s(c), format!("s{}", c + 1), strict(s_list), &mut lists1, &mut names);
        set(lay.sb(c), format!("sb{}", c + 1), strict(sb_list), &mut lists1, &mut names);
        set(lay.t(c), format!("t{}", c + 1), strict(vec![lay.s(c), lay.u(c)]), &mut lists1, &mut names);
        set(lay.tb(c), format!("tb{}", c + 1), strict(vec![lay.sb(c), lay.ub(c)]), &mut lists1, &mut names);
        set(lay.u(c), format!("u{}", c + 1), strict(vec![lay.t(c)]), &mut lists1, &mut names);
        set(lay.ub(c), format!("ub{}", c + 1), strict(vec![lay.tb(c)]), &mut lists1, &mut names);

        for i in 0..graph.class_size {
            let (a1, a2, a3, a4) = (lay.a(c, i, 1), lay.a(c, i, 2), lay.a(c, i, 3), lay.a(c, i, 4));
            set(a1, format!("a{}_{}_1", c + 1, i + 1), strict(vec![a2, lay.s(c), a4]), &mut lists1, &mut names);
            set(a2, format!("a{}_{}_2", c + 1, i + 1), strict(vec![a3, a1]), &mut lists1, &mut names);
            set(a3, format!("a{}_{}_3", c + 1, i + 1), strict(vec![a4, a2]), &mut lists1, &mut names);
            set(a4, format!("a{}_{}_4", c + 1, i + 1), strict(vec![a1, lay.sb(c), a3]), &mut lists1, &mut names);
            let (b1, b2, b3, b4) = (lay.ab(c, i, 1), lay.ab(c, i, 2), lay.ab(c, i, 3), lay.ab(c, i, 4));
            set(b1, format!("ab{}_{}_1", c + 1, i + 1), strict(vec![b2, lay.s(c), b4]), &mut lists1, &mut names);
            set(b2, format!("ab{}_{}_2", c + 1, i + 1), strict(vec![b3, b1]), &mut lists1, &mut names);
            set(b3, format!("ab{}_{}_3", c + 1, i + 1), strict(vec![b4, b2]), &mut lists1, &mut names);
            set(b4, format!("ab{}_{}_4", c + 1, i + 1), strict(vec![b1, lay.sb(c), b3]), &mut lists1, &mut names);
        }
    }

    for (e, &((c, _), (ch, _))) in graph.edges().iter().enumerate() {
        let (e1, e2, e3, e4) = (lay.ae(e, 1), lay.ae(e, 2), lay.ae(e, 3), lay.ae(e, 4));
        set(
            e1,
            format!("e{}_1", e + 1),
            strict(vec![e2, lay.s(c), lay.sb(c), lay.s(ch), lay.sb(ch), e4]),
            &mut lists1,
            &mut names,
        );
        set(e2, format!("e{}_2", e + 1), strict(vec![e3, e1]), &mut lists1, &mut names);
        set(e3, format!("e{}_3", e + 1), strict(vec![e4, e2]), &mut lists1, &mut names);
        set(e4, format!("e{}_4", e + 1), strict(vec![e1, e3]), &mut lists1, &mut names);
    }

    // The change: each t and t-bar flips its two entries.
    let mut lists2 = lists1.clone();
    for c in 0..graph.colors {
        lists2[lay.t(c).idx()] = strict(vec![lay.u(c), lay.s(c)]);
        lists2[lay.tb(c).idx()] = strict(vec![lay.ub(c), lay.sb(c)]);
    }

    let build = |lists: Vec<Vec<Vec<AgentId>>>| -> Result<PreferenceProfile, Error> {
        let pls = lists
            .into_iter()
            .enumerate()
            .map(|(i, tiers)| PreferenceList::new(n, AgentId(i as u32), tiers))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PreferenceProfile::new(pls))
    };
    let p1 = build(lists1)?;
    let p2 = build(lists2)?;

    let mut m1 = Matching::empty(n);
    for c in 0..graph.colors {
        m1.add_pair(Pair::new(lay.s(c), lay.t(c)))?;
        m1.add_pair(Pair::new(lay.sb(c), lay.tb(c)))?;
        for i in 0..graph.class_size {
            m1.add_pair(Pair::new(lay.a(c, i, 1), lay.a(c, i, 2)))?;
            m1.add_pair(Pair::new(lay.a(c, i, 3), lay.a(c, i, 4)))?;
            m1.add_pair(Pair::new(lay.ab(c, i, 1), lay.ab(c, i, 4)))?;
            m1.add_pair(Pair::new(lay.ab(c, i, 3), lay.ab(c, i, 2)))?;
        }
    }
    for e in 0..graph.edges().len() {
        m1.add_pair(Pair::new(lay.ae(e, 1), lay.ae(e, 4)))?;
        m1.add_pair(Pair::new(lay.ae(e, 3), lay.ae(e, 2)))?;
    }

    let l = graph.colors as u64;
    let nu = graph.class_size as u64;
    let m_edges = graph.edges().len() as u64;
    let k = l * (4 * nu + 5) + 4 * (m_edges - l * (l - 1) / 2);

    let instance = IncrementalInstance::new(p1, p2, m1, k);
    debug_assert!(instance.profile1.is_stable(&instance.m1));
    Ok(CliqueGadget {
        spec: GadgetSpec { instance, names },
        graph: graph.clone(),
    })
}

impl CliqueGadget {
    fn layout(&self) -> CliqueLayout {
        CliqueLayout { colors: self.graph.colors, class_size: self.graph.class_size }
    }

    pub fn swap_distance(&self) -> SwapDistance {
        swap_distance(&self.spec.instance.profile1, &self.spec.instance.profile2)
    }
}

/// The target matching encoding a multicolored clique, `clique[c]` being the
/// picked vertex index of color c. Stable in the changed profile with a
/// symmetric difference of exactly the generated budget.
pub fn certify_clique_solution(gadget: &CliqueGadget, clique: &[usize]) -> Result<Matching, Error> {
    let graph = &gadget.graph;
    let lay = gadget.layout();
    if clique.len() != graph.colors || clique.iter().any(|&i| i >= graph.class_size) {
        return Err(Error::invalid("the clique must pick one vertex per color"));
    }
    for c in 0..graph.colors {
        for ch in c + 1..graph.colors {
            if !graph.adjacent((c, clique[c]), (ch, clique[ch])) {
                return Err(Error::invalid(format!(
                    "vertices ({c},{}) and ({ch},{}) are not adjacent",
                    clique[c], clique[ch]
                )));
            }
        }
    }
    let n = gadget.spec.instance.n();
    let mut m2 = Matching::empty(n);
    for c in 0..graph.colors {
        let h = clique[c];
        m2.add_pair(Pair::new(lay.t(c), lay.u(c)))?;
        m2.add_pair(Pair::new(lay.tb(c), lay.ub(c)))?;
        m2.add_pair(Pair::new(lay.s(c), lay.a(c, h, 1)))?;
        m2.add_pair(Pair::new(lay.sb(c), lay.a(c, h, 4)))?;
        m2.add_pair(Pair::new(lay.a(c, h, 2), lay.a(c, h, 3)))?;
        m2.add_pair(Pair::new(lay.ab(c, h, 1), lay.ab(c, h, 4)))?;
        m2.add_pair(Pair::new(lay.ab(c, h, 3), lay.ab(c, h, 2)))?;
        for i in 0..graph.class_size {
            if i < h {
                m2.add_pair(Pair::new(lay.a(c, i, 1), lay.a(c, i, 2)))?;
                m2.add_pair(Pair::new(lay.a(c, i, 3), lay.a(c, i, 4)))?;
                m2.add_pair(Pair::new(lay.ab(c, i, 1), lay.ab(c, i, 2)))?;
                m2.add_pair(Pair::new(lay.ab(c, i, 3), lay.ab(c, i, 4)))?;
            } else if i > h {
                m2.add_pair(Pair::new(lay.a(c, i, 1), lay.a(c, i, 4)))?;
                m2.add_pair(Pair::new(lay.a(c, i, 3), lay.a(c, i, 2)))?;
                m2.add_pair(Pair::new(lay.ab(c, i, 1), lay.ab(c, i, 4)))?;
                m2.add_pair(Pair::new(lay.ab(c, i, 3), lay.ab(c, i, 2)))?;
            }
        }
    }
    for (e, &(x, y)) in graph.edges().iter().enumerate() {
        let picked = x.1 == clique[x.0] && y.1 == clique[y.0];
        if picked {
            m2.add_pair(Pair::new(lay.ae(e, 1), lay.ae(e, 4)))?;
            m2.add_pair(Pair::new(lay.ae(e, 3), lay.ae(e, 2)))?;
        } else {
            m2.add_pair(Pair::new(lay.ae(e, 1), lay.ae(e, 2)))?;
            m2.add_pair(Pair::new(lay.ae(e, 3), lay.ae(e, 4)))?;
        }
    }
    debug_assert!(gadget.spec.instance.profile2.is_stable(&m2));
    debug_assert_eq!(
        symmetric_difference_count(&gadget.spec.instance.m1, &m2),
        gadget.spec.instance.k
    );
    Ok(m2)
}

/// Itemized structural test of stability in the changed profile of a clique
/// gadget. The overall verdict coincides with the blocking-pair scan.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CharacterizationReport {
    /// Every t is matched to its u, barred and unbarred.
    pub tops_matched: bool,
    /// Every color picks a vertex: s and s-bar hold the picked cycle's entry
    /// and exit, cycles before / after the pick close in their cheap / dear
    /// orientation, and the picked barred cycle closes either way.
    pub vertex_selection: bool,
    /// Every edge cycle closes one of its two ways.
    pub edge_cycles: bool,
    /// Every edge cycle not backed by two picked endpoints closes away from
    /// its first agent's outside options.
    pub edge_consistency: bool,
}

impl CharacterizationReport {
    pub fn verdict(&self) -> bool {
        self.tops_matched && self.vertex_selection && self.edge_cycles && self.edge_consistency
    }
}

pub fn check_stable_characterization(
    gadget: &CliqueGadget,
    m: &Matching,
) -> CharacterizationReport {
    let graph = &gadget.graph;
    let lay = gadget.layout();
    let has = |a: AgentId, b: AgentId| m.partner(a) == Some(b);

    let tops_matched = (0..graph.colors)
        .all(|c| has(lay.t(c), lay.u(c)) && has(lay.tb(c), lay.ub(c)));

    let plain_cheap = |c: usize, i: usize| {
        has(lay.a(c, i, 1), lay.a(c, i, 2)) && has(lay.a(c, i, 3), lay.a(c, i, 4))
    };
    let plain_dear = |c: usize, i: usize| {
        has(lay.a(c, i, 1), lay.a(c, i, 4)) && has(lay.a(c, i, 3), lay.a(c, i, 2))
    };
    let barred_cheap = |c: usize, i: usize| {
        has(lay.ab(c, i, 1), lay.ab(c, i, 2)) && has(lay.ab(c, i, 3), lay.ab(c, i, 4))
    };
    let barred_dear = |c: usize, i: usize| {
        has(lay.ab(c, i, 1), lay.ab(c, i, 4)) && has(lay.ab(c, i, 3), lay.ab(c, i, 2))
    };

    let picked_of = |c: usize| {
        (0..graph.class_size).find(|&i| {
            has(lay.s(c), lay.a(c, i, 1))
                && has(lay.sb(c), lay.a(c, i, 4))
                && has(lay.a(c, i, 2), lay.a(c, i, 3))
        })
    };
    let vertex_selection = (0..graph.colors).all(|c| match picked_of(c) {
        None => false,
        Some(i) => {
            (0..i).all(|j| plain_cheap(c, j) && barred_cheap(c, j))
                && (i + 1..graph.class_size).all(|j| plain_dear(c, j) && barred_dear(c, j))
                && (barred_cheap(c, i) || barred_dear(c, i))
        }
    });

    let edge_cheap = |e: usize| has(lay.ae(e, 1), lay.ae(e, 2)) && has(lay.ae(e, 3), lay.ae(e, 4));
    let edge_dear = |e: usize| has(lay.ae(e, 1), lay.ae(e, 4)) && has(lay.ae(e, 3), lay.ae(e, 2));
    let edge_cycles = (0..graph.edges().len()).all(|e| edge_cheap(e) || edge_dear(e));

    let edge_consistency = graph.edges().iter().enumerate().all(|(e, &(x, y))| {
        let backed = has(lay.s(x.0), lay.a(x.0, x.1, 1)) && has(lay.s(y.0), lay.a(y.0, y.1, 1));
        backed || edge_cheap(e)
    });

    CharacterizationReport { tops_matched, vertex_selection, edge_cycles, edge_consistency }
}

/// The forced-pair transform: each forced pair is replaced by a chain of
/// k+1 six-agent cycles whose cheap traversal corresponds to keeping the
/// pair; abandoning it forces the whole chain to flip, exceeding the budget.
pub struct ForcedPairGadget {
    pub spec: GadgetSpec,
    pub original_n: usize,
    q_pairs: Vec<Pair>,
    copies: usize,
}

struct ChainLayout {
    base: u32,
    copies: usize,
}

impl ChainLayout {
    fn id(&self, chain: usize, p: usize, role: usize) -> AgentId {
        AgentId(self.base + (chain * self.copies * 6 + 6 * p + role) as u32)
    }
    fn lt(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 0)
    }
    fn lm(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 1)
    }
    fn lb(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 2)
    }
    fn rt(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 3)
    }
    fn rm(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 4)
    }
    fn rb(&self, c: usize, p: usize) -> AgentId {
        self.id(c, p, 5)
    }
}

fn replace_in_list(
    list: &PreferenceList,
    n_new: usize,
    owner: AgentId,
    from: AgentId,
    to: AgentId,
) -> PreferenceList {
    let tiers = list
        .tiers()
        .iter()
        .map(|t| {
            t.iter()
                .map(|&x| if x == from { to } else { x })
                .collect()
        })
        .collect();
    PreferenceList::new(n_new, owner, tiers).expect("replacement keeps the list valid")
}

pub fn apply_forced_pair_gadget(instance: &IncrementalInstance) -> Result<ForcedPairGadget, Error> {
    let bi = instance
        .profile1
        .bipartition()
        .ok_or_else(|| Error::invalid("the forced-pair transform works on marriage instances"))?;
    let forced: Vec<Pair> = instance
        .forced
        .clone()
        .unwrap_or_default()
        .into_iter()
        .collect();
    for p in &forced {
        if !instance.m1.contains(*p) {
            return Err(Error::invalid(format!(
                "forced pair {p} is not part of the initial matching"
            )));
        }
    }
    let n = instance.n();
    let copies = instance.k as usize + 1;
    let lay = ChainLayout { base: n as u32, copies };
    let n_new = n + forced.len() * copies * 6;

    let mut names: Vec<String> = (0..n as u32).map(|i| format!("x{i}")).collect();
    names.resize(n_new, String::new());

    let widen = |profile: &PreferenceProfile| -> Vec<Vec<Vec<AgentId>>> {
        profile
            .agents()
            .map(|a| {
                PreferenceList::new(n_new, a, profile.list(a).tiers().to_vec())
                    .expect("widened list stays valid")
                    .tiers()
                    .to_vec()
            })
            .collect()
    };
    let mut lists1 = widen(&instance.profile1);
    let mut lists2 = widen(&instance.profile2);
    lists1.resize(n_new, Vec::new());
    lists2.resize(n_new, Vec::new());
    let mut left_side: BTreeSet<AgentId> = bi.left_agents().collect();

    let mut m1: Matching = {
        let mut m = Matching::empty(n_new);
        for p in instance.m1.pairs() {
            if !forced.contains(&p) {
                m.add_pair(p)?;
            }
        }
        m
    };

    for (chain, pair) in forced.iter().enumerate() {
        let (v, w) = if bi.is_left(pair.lo()) {
            (pair.lo(), pair.hi())
        } else {
            (pair.hi(), pair.lo())
        };
        // v-side roles: lt, lb, rm; w-side roles: lm, rt, rb.
        for p in 0..copies {
            left_side.insert(lay.lt(chain, p));
            left_side.insert(lay.lb(chain, p));
            left_side.insert(lay.rm(chain, p));
            for (role, tag) in [(0, "lt"), (1, "lm"), (2, "lb"), (3, "rt"), (4, "rm"), (5, "rb")] {
                names[lay.id(chain, p, role).idx()] = format!("g{}_{}{}", chain + 1, tag, p + 1);
            }
        }
        let strict = |ids: Vec<AgentId>| ids.into_iter().map(|a| vec![a]).collect::<Vec<_>>();
        for p in 0..copies {
            let mut lm_list = if p == 0 {
                vec![lay.lt(chain, 0), v, lay.lb(chain, 0)]
            } else {
                vec![lay.lt(chain, p), lay.rm(chain, p - 1), lay.lb(chain, p)]
            };
            let mut rm_list = if p + 1 == copies {
                vec![lay.rb(chain, p), w, lay.rt(chain, p)]
            } else {
                vec![lay.rb(chain, p), lay.lm(chain, p + 1), lay.rt(chain, p)]
            };
            let lt_list = vec![lay.rt(chain, p), lay.lm(chain, p)];
            let lb_list = vec![lay.lm(chain, p), lay.rb(chain, p)];
            let rt_list = vec![lay.rm(chain, p), lay.lt(chain, p)];
            let rb_list = vec![lay.lb(chain, p), lay.rm(chain, p)];
            for (agent, list) in [
                (lay.lt(chain, p), lt_list),
                (lay.lm(chain, p), std::mem::take(&mut lm_list)),
                (lay.lb(chain, p), lb_list),
                (lay.rt(chain, p), rt_list),
                (lay.rm(chain, p), std::mem::take(&mut rm_list)),
                (lay.rb(chain, p), rb_list),
            ] {
                lists1[agent.idx()] = strict(list.clone());
                lists2[agent.idx()] = strict(list);
            }
            m1.add_pair(Pair::new(lay.lt(chain, p), lay.rt(chain, p)))?;
            m1.add_pair(Pair::new(lay.lb(chain, p), lay.rb(chain, p)))?;
            if p > 0 {
                m1.add_pair(Pair::new(lay.rm(chain, p - 1), lay.lm(chain, p)))?;
            }
        }
        m1.add_pair(Pair::new(v, lay.lm(chain, 0)))?;
        m1.add_pair(Pair::new(lay.rm(chain, copies - 1), w))?;
        // The endpoints swap each other for the chain ends.
        let rebuild = |lists: &mut Vec<Vec<Vec<AgentId>>>| {
            let lv = PreferenceList::new(n_new, v, lists[v.idx()].clone()).expect("valid");
            lists[v.idx()] = replace_in_list(&lv, n_new, v, w, lay.lm(chain, 0))
                .tiers()
                .to_vec();
            let lw = PreferenceList::new(n_new, w, lists[w.idx()].clone()).expect("valid");
            lists[w.idx()] = replace_in_list(&lw, n_new, w, v, lay.rm(chain, copies - 1))
                .tiers()
                .to_vec();
        };
        rebuild(&mut lists1);
        rebuild(&mut lists2);
    }

    let build = |lists: Vec<Vec<Vec<AgentId>>>| -> Result<PreferenceProfile, Error> {
        let pls = lists
            .into_iter()
            .enumerate()
            .map(|(i, tiers)| PreferenceList::new(n_new, AgentId(i as u32), tiers))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PreferenceProfile::new(pls).with_bipartition(&left_side))
    };
    let p1 = build(lists1)?;
    let p2 = build(lists2)?;
    debug_assert!(p1.is_stable(&m1));

    let out = IncrementalInstance::new(p1, p2, m1, instance.k);
    Ok(ForcedPairGadget {
        spec: GadgetSpec { instance: out, names },
        original_n: n,
        q_pairs: forced,
        copies,
    })
}

impl ForcedPairGadget {
    /// Lifts a forced-pair-respecting matching of the original instance to
    /// the transformed one: the forced pairs are traded for the cheap chain
    /// traversal, everything else carries over. Preserves the difference to
    /// the initial matching exactly.
    pub fn lift_solution(&self, m2: &Matching) -> Result<Matching, Error> {
        let lay = ChainLayout { base: self.original_n as u32, copies: self.copies };
        let mut out = Matching::empty(self.spec.instance.n());
        for p in m2.pairs() {
            if !self.q_pairs.contains(&p) {
                out.add_pair(p)?;
            }
        }
        for (chain, pair) in self.q_pairs.iter().enumerate() {
            if !m2.contains(*pair) {
                return Err(Error::invalid(format!(
                    "the matching does not contain the forced pair {pair}"
                )));
            }
            let bi = self.spec.instance.profile1.bipartition().expect("bipartite by construction");
            let (v, w) = if bi.is_left(pair.lo()) {
                (pair.lo(), pair.hi())
            } else {
                (pair.hi(), pair.lo())
            };
            out.add_pair(Pair::new(v, lay.lm(chain, 0)))?;
            out.add_pair(Pair::new(lay.rm(chain, self.copies - 1), w))?;
            for p in 0..self.copies {
                out.add_pair(Pair::new(lay.lt(chain, p), lay.rt(chain, p)))?;
                out.add_pair(Pair::new(lay.lb(chain, p), lay.rb(chain, p)))?;
                if p > 0 {
                    out.add_pair(Pair::new(lay.rm(chain, p - 1), lay.lm(chain, p)))?;
                }
            }
        }
        Ok(out)
    }
}

/// The forbidden-pairs transform: each pair of F is rerouted through a chain
/// of s = |A|+1 six-agent cycles; using the rerouted pair costs the whole
/// chain its overlap with the initial matching, pricing it out of any
/// solution within budget.
pub struct ForbiddenPairsGadget {
    pub spec: GadgetSpec,
    pub original_n: usize,
    /// Required overlap translation: original t becomes t + r * s.
    pub s_copies: usize,
}

pub fn apply_forbidden_pairs_gadget(
    instance: &IncrementalInstance,
    forbidden: &[Pair],
) -> Result<ForbiddenPairsGadget, Error> {
    let bi = instance
        .profile2
        .bipartition()
        .ok_or_else(|| Error::invalid("the forbidden-pairs transform works on marriage instances"))?;
    if !instance.profile2.is_complete() {
        return Err(Error::invalid("the forbidden-pairs transform requires complete preferences"));
    }
    for p in forbidden {
        if instance.m1.contains(*p) {
            return Err(Error::invalid(format!(
                "forbidden pair {p} lies in the initial matching"
            )));
        }
        if !instance.profile2.mutually_accept(p.lo(), p.hi()) {
            return Err(Error::invalid(format!("forbidden pair {p} is not mutually accepted")));
        }
    }
    let r = forbidden.len();
    let n = instance.n();
    let s = n + 1;
    let n_new = n + 6 * r * s;

    // Orient each pair and check the shared-list and nesting premises.
    let vs: Vec<AgentId> = forbidden
        .iter()
        .map(|p| if bi.is_left(p.lo()) { p.lo() } else { p.hi() })
        .collect();
    let ws: Vec<AgentId> = forbidden
        .iter()
        .map(|p| if bi.is_left(p.lo()) { p.hi() } else { p.lo() })
        .collect();
    for group in [&vs, &ws] {
        for win in group.windows(2) {
            if instance.profile2.list(win[0]).tiers() != instance.profile2.list(win[1]).tiers() {
                return Err(Error::invalid(
                    "the endpoints of the forbidden pairs must share their side's list",
                ));
            }
        }
    }
    for k in 0..r {
        for i in 0..r {
            for j in i + 1..r {
                let wk = instance.profile2.list(ws[k]);
                let vk = instance.profile2.list(vs[k]);
                let nested = wk.tier_of(vs[i]) < wk.tier_of(vs[j])
                    && vk.tier_of(ws[i]) < vk.tier_of(ws[j]);
                if !nested {
                    return Err(Error::invalid(
                        "the forbidden pairs must be nested in each other's lists",
                    ));
                }
            }
        }
    }

    let lay = ChainLayout { base: n as u32, copies: s };
    let mut names: Vec<String> = (0..n as u32).map(|i| format!("x{i}")).collect();
    names.resize(n_new, String::new());
    let mut left_side: BTreeSet<AgentId> = bi.left_agents().collect();
    for i in 0..r {
        for j in 0..s {
            left_side.insert(lay.lt(i, j));
            left_side.insert(lay.lb(i, j));
            left_side.insert(lay.rm(i, j));
            for (role, tag) in [(0, "lt"), (1, "lm"), (2, "lb"), (3, "rt"), (4, "rm"), (5, "rb")] {
                names[lay.id(i, j, role).idx()] = format!("f{}_{}{}", i + 1, tag, j + 1);
            }
        }
    }

    // Changed-profile lists of the gadget agents before completion. The j
    // column does not matter: all agents of one role share one list.
    let mut block_lt: Vec<AgentId> = Vec::new();
    let mut block_lb: Vec<AgentId> = Vec::new();
    let mut block_rt: Vec<AgentId> = Vec::new();
    let mut block_lm1: Vec<AgentId> = Vec::new();
    let mut block_lmj: Vec<AgentId> = Vec::new();
    let mut block_rmj: Vec<AgentId> = Vec::new();
    let mut block_rms: Vec<AgentId> = Vec::new();
    let mut block_rb: Vec<AgentId> = Vec::new();
    for h in 0..r {
        for t in 0..s {
            block_lt.extend([lay.rt(h, t), lay.lm(h, t)]);
            block_lb.extend([lay.lm(h, t), lay.rb(h, t)]);
            block_rt.extend([lay.rm(h, t), lay.lt(h, t)]);
            block_rb.extend([lay.lb(h, t), lay.rm(h, t)]);
        }
        block_lm1.extend([lay.lt(h, 0), vs[h], lay.lb(h, 0)]);
        block_rms.extend([lay.rb(h, s - 1), ws[h], lay.rt(h, s - 1)]);
        for t in 1..s {
            block_lmj.extend([lay.lt(h, t), lay.rm(h, t - 1), lay.lb(h, t)]);
        }
        for t in 0..s - 1 {
            block_rmj.extend([lay.rb(h, t), lay.lm(h, t + 1), lay.rt(h, t)]);
        }
    }

    let widen = |profile: &PreferenceProfile| -> Vec<Vec<Vec<AgentId>>> {
        profile
            .agents()
            .map(|a| profile.list(a).tiers().to_vec())
            .collect()
    };
    let mut lists2 = widen(&instance.profile2);
    lists2.resize(n_new, Vec::new());
    for (i, (&v, &w)) in vs.iter().zip(&ws).enumerate() {
        lists2[v.idx()] = lists2[v.idx()]
            .iter()
            .map(|t| t.iter().map(|&x| if x == w { lay.lm(i, 0) } else { x }).collect())
            .collect();
        lists2[w.idx()] = lists2[w.idx()]
            .iter()
            .map(|t| t.iter().map(|&x| if x == v { lay.rm(i, s - 1) } else { x }).collect())
            .collect();
    }
    let strict = |ids: &[AgentId]| ids.iter().map(|&a| vec![a]).collect::<Vec<_>>();
    for i in 0..r {
        for j in 0..s {
            lists2[lay.lt(i, j).idx()] = strict(&block_lt);
            lists2[lay.lb(i, j).idx()] = strict(&block_lb);
            lists2[lay.rt(i, j).idx()] = strict(&block_rt);
            lists2[lay.rb(i, j).idx()] = strict(&block_rb);
            lists2[lay.lm(i, j).idx()] =
                strict(if j == 0 { &block_lm1 } else { &block_lmj });
            lists2[lay.rm(i, j).idx()] =
                strict(if j == s - 1 { &block_rms } else { &block_rmj });
        }
    }
    // Completion: everyone appends the missing opposite-side agents.
    for a in 0..n_new as u32 {
        let a = AgentId(a);
        let listed: BTreeSet<AgentId> = lists2[a.idx()].iter().flatten().copied().collect();
        let opposite = left_side.contains(&a);
        for b in 0..n_new as u32 {
            let b = AgentId(b);
            if b != a && left_side.contains(&b) != opposite && !listed.contains(&b) {
                lists2[a.idx()].push(vec![b]);
            }
        }
    }

    let mut m1 = Matching::empty(n_new);
    for p in instance.m1.pairs() {
        m1.add_pair(p)?;
    }
    for i in 0..r {
        for j in 0..s {
            m1.add_pair(Pair::new(lay.lt(i, j), lay.lm(i, j)))?;
            m1.add_pair(Pair::new(lay.rm(i, j), lay.rb(i, j)))?;
            m1.add_pair(Pair::new(lay.lb(i, j), lay.rt(i, j)))?;
        }
    }

    // Initial profile: the changed one with everyone's initial partner
    // promoted to the top, which keeps the initial matching trivially stable.
    let mut lists1 = lists2.clone();
    for a in 0..n_new as u32 {
        let a = AgentId(a);
        if let Some(p) = m1.partner(a) {
            let mut tiers: Vec<Vec<AgentId>> = lists1[a.idx()]
                .iter()
                .map(|t| t.iter().copied().filter(|&x| x != p).collect())
                .filter(|t: &Vec<AgentId>| !t.is_empty())
                .collect();
            tiers.insert(0, vec![p]);
            lists1[a.idx()] = tiers;
        }
    }

    let build = |lists: Vec<Vec<Vec<AgentId>>>| -> Result<PreferenceProfile, Error> {
        let pls = lists
            .into_iter()
            .enumerate()
            .map(|(i, tiers)| PreferenceList::new(n_new, AgentId(i as u32), tiers))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PreferenceProfile::new(pls).with_bipartition(&left_side))
    };
    let p1 = build(lists1)?;
    let p2 = build(lists2)?;
    debug_assert!(p1.is_stable(&m1));

    // Budget translation through the required-overlap count: a matching
    // within the original budget shares t pairs with the initial matching;
    // the transformed instance demands those plus the r*s chain pairs.
    let stable_size = {
        let left = left_side.iter().filter(|a| a.idx() < n).count() as u64;
        let right = (n as u64) - left;
        left.min(right)
    };
    let m1_orig = instance.m1.len() as u64;
    let t = (m1_orig + stable_size).saturating_sub(instance.k).div_ceil(2);
    let t_new = t + (r * s) as u64;
    let stable_size_new = stable_size + (3 * r * s) as u64;
    let m1_new = m1.len() as u64;
    let k_new = (m1_new + stable_size_new).saturating_sub(2 * t_new);

    let out = IncrementalInstance::new(p1, p2, m1, k_new);
    Ok(ForbiddenPairsGadget {
        spec: GadgetSpec { instance: out, names },
        original_n: n,
        s_copies: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;
    use crate::{classic, gen};

    fn k22() -> CliqueGadget {
        gen_isr_from_clique(&ColoredGraph::complete_bipartite(2)).unwrap()
    }

    #[test]
    fn clique_gadget_counts_for_k22() {
        let g = k22();
        // Per color: 6 selection agents plus two 4-cycles per vertex; plus
        // one 4-cycle per edge.
        assert_eq!(g.spec.instance.n(), 2 * (6 + 8 * 2) + 4 * 4);
        assert_eq!(g.spec.instance.n(), 60);
        assert_eq!(g.spec.instance.k, 2 * (4 * 2 + 5) + 4 * (4 - 1));
        assert_eq!(g.spec.instance.k, 38);
        assert_eq!(g.swap_distance(), SwapDistance::Finite(4));
    }

    #[test]
    fn clique_gadget_instance_is_valid_and_m1_stable() {
        let g = k22();
        validate_instance(&g.spec.instance).unwrap();
        assert!(g.spec.instance.profile1.is_stable(&g.spec.instance.m1));
    }

    #[test]
    fn certificate_is_stable_with_exact_budget() {
        let g = k22();
        for clique in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let m2 = certify_clique_solution(&g, &clique).unwrap();
            assert!(g.spec.instance.profile2.is_stable(&m2));
            assert_eq!(
                symmetric_difference_count(&g.spec.instance.m1, &m2),
                g.spec.instance.k
            );
            let report = check_stable_characterization(&g, &m2);
            assert!(report.verdict());
        }
    }

    #[test]
    fn non_clique_certificates_are_rejected() {
        // A path on two colors with 2 vertices each minus one edge is not
        // regular, so build the K22 gadget and drop adjacency by hand.
        let edges = vec![((0, 0), (1, 0)), ((0, 0), (1, 1)), ((0, 1), (1, 0)), ((0, 1), (1, 1))];
        let graph = ColoredGraph::new(2, 2, edges).unwrap();
        let g = gen_isr_from_clique(&graph).unwrap();
        assert!(certify_clique_solution(&g, &[0]).is_err());
        assert!(certify_clique_solution(&g, &[0, 2]).is_err());
    }

    #[test]
    fn characterization_fails_on_initial_matching() {
        let g = k22();
        let report = check_stable_characterization(&g, &g.spec.instance.m1);
        assert!(!report.tops_matched);
        assert!(!report.verdict());
        assert!(!g.spec.instance.profile2.is_stable(&g.spec.instance.m1));
    }

    #[test]
    fn characterization_agrees_with_stability_on_fuzzed_matchings() {
        let g = k22();
        let mut rng = gen::rng(99);
        for _ in 0..200 {
            let m = gen::random_matching(&mut rng, &g.spec.instance.profile2, 0.8);
            let report = check_stable_characterization(&g, &m);
            assert_eq!(report.verdict(), g.spec.instance.profile2.is_stable(&m));
        }
    }

    fn small_forced_instance(k: u64) -> IncrementalInstance {
        // 3+3 complete marriage instance with one forced pair from m1.
        let mut rng = gen::rng(123);
        let p1 = gen::complete_strict_sm(&mut rng, 3, 3);
        let m1 = classic::find_stable_sm(&p1).unwrap();
        let p2 = gen::one_adjacent_swap(&mut rng, &p1);
        let mut inst = IncrementalInstance::new(p1, p2, m1.clone(), k);
        inst.forced = Some([m1.pairs()[0]].into_iter().collect());
        inst
    }

    #[test]
    fn forced_pair_gadget_adds_six_agents_per_copy() {
        let inst = small_forced_instance(2);
        let g = apply_forced_pair_gadget(&inst).unwrap();
        assert_eq!(g.spec.instance.n(), inst.n() + 18);
        assert_eq!(g.spec.instance.k, inst.k);
        validate_instance(&g.spec.instance).unwrap();
    }

    #[test]
    fn forced_pair_gadget_empty_q_is_identity() {
        let mut inst = small_forced_instance(2);
        inst.forced = Some(Default::default());
        let g = apply_forced_pair_gadget(&inst).unwrap();
        assert_eq!(g.spec.instance.n(), inst.n());
        assert_eq!(g.spec.instance.m1, inst.m1);
    }

    #[test]
    fn forced_pair_gadget_preserves_ties() {
        let mut rng = gen::rng(5);
        let base = gen::random_ismt_instance(&mut rng, 3, 3, 1, 2, 1);
        let mut inst = base.clone();
        inst.k = 2;
        inst.forced = Some([inst.m1.pairs()[0]].into_iter().collect());
        let g = apply_forced_pair_gadget(&inst).unwrap();
        let ties = |p: &PreferenceProfile| -> (usize, Vec<usize>) {
            let count = p.agents().map(|a| p.list(a).tie_count()).sum();
            let mut sizes: Vec<usize> = p
                .agents()
                .flat_map(|a| {
                    p.list(a)
                        .tiers()
                        .iter()
                        .filter(|t| t.len() >= 2)
                        .map(Vec::len)
                        .collect::<Vec<_>>()
                })
                .collect();
            sizes.sort_unstable();
            (count, sizes)
        };
        assert_eq!(ties(&inst.profile2), ties(&g.spec.instance.profile2));
        assert_eq!(ties(&inst.profile1), ties(&g.spec.instance.profile1));
    }

    #[test]
    fn forced_pair_lift_preserves_stability_and_diff() {
        let inst = small_forced_instance(3);
        let g = apply_forced_pair_gadget(&inst).unwrap();
        let q: Vec<Pair> = inst.forced.clone().unwrap().into_iter().collect();
        let all = crate::oracle::enumerate_stable(&inst.profile2, 12).unwrap();
        let mut checked = 0;
        for m2 in all {
            if !q.iter().all(|&p| m2.contains(p)) {
                continue;
            }
            let lifted = g.lift_solution(&m2).unwrap();
            assert!(g.spec.instance.profile2.is_stable(&lifted));
            assert_eq!(
                symmetric_difference_count(&g.spec.instance.m1, &lifted),
                symmetric_difference_count(&inst.m1, &m2)
            );
            checked += 1;
        }
        assert!(checked > 0, "the sampled instance admits a forced solution");
    }

    #[test]
    fn forbidden_pairs_empty_f_is_identity_sized() {
        let mut rng = gen::rng(21);
        let p1 = gen::complete_strict_sm(&mut rng, 2, 2);
        let m1 = classic::find_stable_sm(&p1).unwrap();
        let inst = IncrementalInstance::new(p1.clone(), p1, m1, 1);
        let g = apply_forbidden_pairs_gadget(&inst, &[]).unwrap();
        assert_eq!(g.spec.instance.n(), inst.n());
    }

    #[test]
    fn forbidden_pairs_counts_and_stability() {
        // Identical lists on both sides satisfy the nesting premise.
        let p = PreferenceProfile::from_strict_lists(vec![
            vec![2, 3],
            vec![2, 3],
            vec![0, 1],
            vec![0, 1],
        ])
        .unwrap()
        .with_bipartition(&[AgentId(0), AgentId(1)].into_iter().collect());
        let m1 = classic::find_stable_sm(&p).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        // Forbid a pair outside m1.
        let f = [Pair::new(AgentId(0), AgentId(3))];
        assert!(!m1.contains(f[0]));
        let g = apply_forbidden_pairs_gadget(&inst, &f).unwrap();
        assert_eq!(g.s_copies, 5);
        assert_eq!(g.spec.instance.n(), 4 + 6 * 5);
        assert!(g.spec.instance.profile1.is_stable(&g.spec.instance.m1));
        validate_instance(&g.spec.instance).unwrap();
    }

    #[test]
    fn forbidden_pairs_inside_m1_rejected() {
        let mut rng = gen::rng(22);
        let p = gen::complete_strict_sm(&mut rng, 2, 2);
        let m1 = classic::find_stable_sm(&p).unwrap();
        let inst = IncrementalInstance::new(p.clone(), p, m1.clone(), 0);
        assert!(apply_forbidden_pairs_gadget(&inst, &[m1.pairs()[0]]).is_err());
    }
}
