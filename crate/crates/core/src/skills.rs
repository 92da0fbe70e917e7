//! The domain-knowledge DAG: skills, prerequisite edges and game bindings.
//!
//! The net is configuration data loaded from JSON; a representative
//! 100-skill sample ships with the crate (see [`SkillNet::sample`]).

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of a skill node; unique within a net.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillId(String);

impl SkillId {
    pub fn new(id: impl Into<String>) -> SkillId {
        SkillId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for SkillId {
    fn from(s: &str) -> SkillId {
        SkillId(s.to_string())
    }
}

impl From<String> for SkillId {
    fn from(s: String) -> SkillId {
        SkillId(s)
    }
}

impl Borrow<str> for SkillId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Number range a skill lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NumberRange {
    #[serde(rename = "r10")]
    R10,
    #[serde(rename = "r100")]
    R100,
    #[serde(rename = "r1000")]
    R1000,
}

impl NumberRange {
    pub fn as_str(&self) -> &'static str {
        match self {
            NumberRange::R10 => "r10",
            NumberRange::R100 => "r100",
            NumberRange::R1000 => "r1000",
        }
    }

    /// Upper bound of the range, for ordering progress reports.
    pub fn bound(&self) -> u32 {
        match self {
            NumberRange::R10 => 10,
            NumberRange::R100 => 100,
            NumberRange::R1000 => 1000,
        }
    }
}

/// Developmental step of number representation a skill trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepresentationStep {
    #[serde(rename = "cardinal")]
    CardinalMagnitude,
    #[serde(rename = "spoken")]
    SpokenNumber,
    #[serde(rename = "arabic")]
    ArabicNumber,
    #[serde(rename = "number_line")]
    NumberLine,
}

/// One node of the skill net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub id: SkillId,
    pub name: String,
    pub range: NumberRange,
    pub step: RepresentationStep,
    /// Typical-error tags this skill remediates, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remediates: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct NetConfig {
    skills: Vec<Skill>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    games: BTreeMap<String, Vec<String>>,
}

/// Immutable prerequisite DAG over skills, with game bindings.
#[derive(Debug, Clone)]
pub struct SkillNet {
    skills: Vec<Skill>,
    index: BTreeMap<SkillId, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Position of each skill in a fixed topological order.
    topo_index: Vec<usize>,
    games: BTreeMap<String, Vec<SkillId>>,
}

impl SkillNet {
    /// Build and validate a net from parts. Fails on duplicate ids, dangling
    /// edges, cycles, or a game binding zero skills.
    pub fn from_parts(
        skills: Vec<Skill>,
        edges: &[(SkillId, SkillId)],
        games: BTreeMap<String, Vec<SkillId>>,
    ) -> Result<SkillNet> {
        let mut index = BTreeMap::new();
        for (i, s) in skills.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateSkill(s.id.to_string()));
            }
        }
        let mut parents = vec![Vec::new(); skills.len()];
        let mut children = vec![Vec::new(); skills.len()];
        let mut seen_edges = BTreeSet::new();
        for (from, to) in edges {
            let fi = *index
                .get(from.as_str())
                .ok_or_else(|| Error::DanglingEdge(from.to_string()))?;
            let ti = *index
                .get(to.as_str())
                .ok_or_else(|| Error::DanglingEdge(to.to_string()))?;
            if seen_edges.insert((fi, ti)) {
                children[fi].push(ti);
                parents[ti].push(fi);
            }
        }
        for (game, bound) in &games {
            if bound.is_empty() {
                return Err(Error::EmptyGameBinding(game.clone()));
            }
            for s in bound {
                if !index.contains_key(s.as_str()) {
                    return Err(Error::DanglingEdge(s.to_string()));
                }
            }
        }

        let topo_index = toposort(&skills, &parents, &children)?;

        // Deterministic neighbor order: topological index, then id.
        let sort_key = |net_skills: &[Skill], topo: &[usize], i: usize| {
            (topo[i], net_skills[i].id.clone())
        };
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by_key(|&i| sort_key(&skills, &topo_index, i));
        }

        Ok(SkillNet {
            skills,
            index,
            parents,
            children,
            topo_index,
            games,
        })
    }

    /// Parse a JSON net config.
    pub fn from_config_str(json: &str) -> Result<SkillNet> {
        let cfg: NetConfig =
            serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        let edges: Vec<(SkillId, SkillId)> = cfg
            .edges
            .into_iter()
            .map(|(a, b)| (SkillId::new(a), SkillId::new(b)))
            .collect();
        let games = cfg
            .games
            .into_iter()
            .map(|(g, v)| (g, v.into_iter().map(SkillId::new).collect()))
            .collect();
        SkillNet::from_parts(cfg.skills, &edges, games)
    }

    pub fn load(path: &Path) -> Result<SkillNet> {
        let text = std::fs::read_to_string(path)?;
        SkillNet::from_config_str(&text)
    }

    /// The shipped 100-skill sample net (a representative reconstruction;
    /// number ranges and representation steps follow the four-step model).
    pub fn sample() -> SkillNet {
        SkillNet::from_config_str(include_str!("../data/skillnet_sample.json"))
            .expect("shipped sample net is valid")
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn skill(&self, id: &str) -> Option<&Skill> {
        self.index.get(id).map(|&i| &self.skills[i])
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn skill_ids(&self) -> impl Iterator<Item = &SkillId> {
        self.skills.iter().map(|s| &s.id)
    }

    pub fn games(&self) -> &BTreeMap<String, Vec<SkillId>> {
        &self.games
    }

    pub fn edges(&self) -> impl Iterator<Item = (&SkillId, &SkillId)> {
        self.children.iter().enumerate().flat_map(move |(i, cs)| {
            cs.iter().map(move |&c| (&self.skills[i].id, &self.skills[c].id))
        })
    }

    /// Position of `id` in the net's fixed topological order.
    pub fn topo_index(&self, id: &str) -> Result<usize> {
        let i = self.idx(id)?;
        Ok(self.topo_index[i])
    }

    /// Skill ids sorted topologically (precursors before successors).
    pub fn topo_order(&self) -> Vec<&SkillId> {
        let mut ids: Vec<&SkillId> = self.skills.iter().map(|s| &s.id).collect();
        ids.sort_by_key(|id| self.topo_index[self.index[id.as_str()]]);
        ids
    }

    fn idx(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSkill(id.to_string()))
    }

    /// Direct prerequisite skills, in (topological index, id) order.
    pub fn precursors(&self, id: &str) -> Result<Vec<&SkillId>> {
        let i = self.idx(id)?;
        Ok(self.parents[i].iter().map(|&p| &self.skills[p].id).collect())
    }

    /// Direct successor skills, in (topological index, id) order.
    pub fn successors(&self, id: &str) -> Result<Vec<&SkillId>> {
        let i = self.idx(id)?;
        Ok(self.children[i].iter().map(|&c| &self.skills[c].id).collect())
    }

    /// Skills tagged as remediation for `tag`, in (topo, id) order.
    pub fn remediation_candidates(&self, tag: &str) -> Vec<&SkillId> {
        let mut out: Vec<(usize, &SkillId)> = self
            .skills
            .iter()
            .enumerate()
            .filter(|(_, s)| s.remediates.iter().any(|t| t == tag))
            .map(|(i, s)| (self.topo_index[i], &s.id))
            .collect();
        out.sort();
        out.into_iter().map(|(_, id)| id).collect()
    }

    /// Serialize back to the JSON config schema.
    pub fn to_config_string(&self) -> String {
        let cfg = NetConfig {
            skills: self.skills.clone(),
            edges: self
                .edges()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            games: self
                .games
                .iter()
                .map(|(g, v)| (g.clone(), v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&cfg).expect("net serialization cannot fail")
    }
}

/// Kahn's algorithm with a min-heap on skill id, so the topological order is
/// deterministic. On failure returns an error naming one cycle.
fn toposort(skills: &[Skill], parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = skills.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<(&SkillId, usize)>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(|i| Reverse((&skills[i].id, i)))
        .collect();

    let mut topo_index = vec![usize::MAX; n];
    let mut placed = 0usize;
    while let Some(Reverse((_, i))) = heap.pop() {
        topo_index[i] = placed;
        placed += 1;
        for &c in &children[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                heap.push(Reverse((&skills[c].id, c)));
            }
        }
    }

    if placed != n {
        return Err(Error::Cycle(find_cycle(skills, children, &topo_index)));
    }
    Ok(topo_index)
}

fn find_cycle(skills: &[Skill], children: &[Vec<usize>], topo_index: &[usize]) -> String {
    let in_cycle = |i: usize| topo_index[i] == usize::MAX;
    let start = (0..skills.len()).find(|&i| in_cycle(i)).unwrap();
    let mut path = vec![start];
    let mut seen = BTreeSet::new();
    seen.insert(start);
    let mut cur = start;
    loop {
        let next = children[cur]
            .iter()
            .copied()
            .find(|&c| in_cycle(c))
            .expect("cyclic node keeps a cyclic child");
        if !seen.insert(next) {
            let pos = path.iter().position(|&p| p == next).unwrap();
            let names: Vec<&str> = path[pos..]
                .iter()
                .chain(std::iter::once(&next))
                .map(|&i| skills[i].id.as_str())
                .collect();
            return names.join(" -> ");
        }
        path.push(next);
        cur = next;
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn skill(id: &str) -> Skill {
        Skill {
            id: SkillId::new(id),
            name: id.to_uppercase(),
            range: NumberRange::R10,
            step: RepresentationStep::ArabicNumber,
            remediates: Vec::new(),
        }
    }

    pub(crate) fn chain(ids: &[&str]) -> SkillNet {
        let skills = ids.iter().map(|i| skill(i)).collect();
        let edges: Vec<(SkillId, SkillId)> = ids
            .windows(2)
            .map(|w| (SkillId::new(w[0]), SkillId::new(w[1])))
            .collect();
        SkillNet::from_parts(skills, &edges, BTreeMap::new()).unwrap()
    }

    #[test]
    fn chain_loads_in_topo_order() {
        let net = chain(&["a", "b", "c"]);
        let order: Vec<&str> = net.topo_order().iter().map(|s| s.as_str()).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn two_cycle_is_reported() {
        let skills = vec![skill("a"), skill("b")];
        let edges = vec![
            (SkillId::new("a"), SkillId::new("b")),
            (SkillId::new("b"), SkillId::new("a")),
        ];
        let err = SkillNet::from_parts(skills, &edges, BTreeMap::new()).unwrap_err();
        match err {
            Error::Cycle(c) => {
                assert!(c.contains("a") && c.contains("b"), "cycle string: {c}");
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn dangling_edge_is_rejected() {
        let err =
            SkillNet::from_parts(vec![skill("a")], &[(SkillId::new("a"), SkillId::new("zz"))], BTreeMap::new())
                .unwrap_err();
        assert!(matches!(err, Error::DanglingEdge(s) if s == "zz"));
    }

    #[test]
    fn root_has_no_precursors() {
        let net = chain(&["a", "b", "c"]);
        assert!(net.precursors("a").unwrap().is_empty());
    }

    #[test]
    fn chain_successors() {
        let net = chain(&["a", "b", "c"]);
        let succ: Vec<&str> = net.successors("b").unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(succ, vec!["c"]);
    }

    #[test]
    fn diamond_precursors_in_order() {
        let skills = vec![skill("a"), skill("b"), skill("c"), skill("d")];
        let edges = vec![
            (SkillId::new("a"), SkillId::new("b")),
            (SkillId::new("a"), SkillId::new("c")),
            (SkillId::new("b"), SkillId::new("d")),
            (SkillId::new("c"), SkillId::new("d")),
        ];
        let net = SkillNet::from_parts(skills, &edges, BTreeMap::new()).unwrap();
        let pre: Vec<&str> = net.precursors("d").unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(pre, vec!["b", "c"]);
    }

    #[test]
    fn unknown_skill_errors() {
        let net = chain(&["a"]);
        assert!(matches!(net.precursors("nope"), Err(Error::UnknownSkill(_))));
    }

    #[test]
    fn neighbors_agree_with_edge_set() {
        let net = SkillNet::sample();
        let edges: BTreeSet<(String, String)> = net
            .edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        for s in net.skill_ids() {
            for p in net.precursors(s.as_str()).unwrap() {
                assert!(edges.contains(&(p.to_string(), s.to_string())));
            }
            for c in net.successors(s.as_str()).unwrap() {
                assert!(edges.contains(&(s.to_string(), c.to_string())));
            }
            // topological consistency
            for p in net.precursors(s.as_str()).unwrap() {
                assert!(net.topo_index(p.as_str()).unwrap() < net.topo_index(s.as_str()).unwrap());
            }
        }
    }

    #[test]
    fn sample_net_has_100_skills() {
        let net = SkillNet::sample();
        assert_eq!(net.len(), 100);
        assert!(!net.games().is_empty());
        for bound in net.games().values() {
            assert!(!bound.is_empty());
        }
    }

    #[test]
    fn empty_game_binding_rejected() {
        let mut games = BTreeMap::new();
        games.insert("g".to_string(), Vec::new());
        let err = SkillNet::from_parts(vec![skill("a")], &[], games).unwrap_err();
        assert!(matches!(err, Error::EmptyGameBinding(_)));
    }
}
