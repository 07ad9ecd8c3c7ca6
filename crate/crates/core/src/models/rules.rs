//! Per-tower send/receive link rules derived from optimal routes over all small failure sets.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::routing::{compute_routes, HopKind, LineTopology};
use super::ModelsError;

/// Default limit on the number of failure sets enumerated.
pub const DEFAULT_FAILURE_SET_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkClass {
    /// Used when nothing has failed.
    Normal,
    /// A regular link used only after some failure.
    Rerouted,
    /// A backup link.
    Expensive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkRule {
    pub from: usize,
    pub to: usize,
    pub class: LinkClass,
    /// Minimal failure sets under which the link is used; the empty set means "normally".
    pub conditions: Vec<BTreeSet<usize>>,
    /// Every enumerated failure set under which the link is used.
    #[serde(skip)]
    pub used_under: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TowerRules {
    pub tower: usize,
    pub send: Vec<LinkRule>,
    pub receive: Vec<LinkRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkRules {
    pub towers: usize,
    pub max_failures: usize,
    pub rules: Vec<TowerRules>,
    /// Next hop of every operational non-terminal tower under each failure set (`None` if unroutable).
    #[serde(skip)]
    pub choices: BTreeMap<BTreeSet<usize>, BTreeMap<usize, Option<usize>>>,
}

impl LinkRules {
    pub fn tower(&self, t: usize) -> Option<&TowerRules> {
        self.rules.iter().find(|r| r.tower == t)
    }

    /// Send link chosen by `tower` under `failed`, when the set was enumerated.
    pub fn send_link(&self, tower: usize, failed: &BTreeSet<usize>) -> Option<Option<usize>> {
        self.choices.get(failed).and_then(|c| c.get(&tower)).copied()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// All subsets of `1..=n` with at most `k` elements, smallest first, then lexicographic.
pub fn failure_sets(n: usize, k: usize) -> Vec<BTreeSet<usize>> {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if left == 0 {
            out.push(cur.iter().copied().collect());
            return;
        }
        for t in start..=n {
            cur.push(t);
            rec(t + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for size in 0..=k.min(n) {
        rec(1, n, size, &mut Vec::new(), &mut out);
    }
    out
}

fn minimal(sets: &[BTreeSet<usize>]) -> Vec<BTreeSet<usize>> {
    let mut out: Vec<BTreeSet<usize>> =
        sets.iter().filter(|s| !sets.iter().any(|o| o.len() < s.len() && o.is_subset(s))).cloned().collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out.dedup();
    out
}

/// Derives link rules for `topo` from the optimal routes under every failure set of size ≤ `max_failures`.
pub fn derive_link_rules(topo: &LineTopology, max_failures: usize, cap: usize) -> Result<LinkRules, ModelsError> {
    let n = topo.towers();
    let total: usize = (0..=max_failures.min(n)).map(|k| binomial(n, k)).fold(0, usize::saturating_add);
    if total > cap {
        return Err(ModelsError::TooManyFailureSets { count: total, cap });
    }
    let sets = failure_sets(n, max_failures);
    let mut used: BTreeMap<(usize, usize), Vec<BTreeSet<usize>>> = BTreeMap::new();
    let mut choices = BTreeMap::new();
    for f in &sets {
        let table = compute_routes(topo, f);
        let mut chosen = BTreeMap::new();
        for (&t, e) in &table.entries {
            let hop = e.route().map(|r| r.next_hop());
            if let Some(h) = hop {
                used.entry((t, h)).or_default().push(f.clone());
            }
            chosen.insert(t, hop);
        }
        choices.insert(f.clone(), chosen);
    }
    let make = |(from, to): (usize, usize), sets: &Vec<BTreeSet<usize>>| {
        let class = if topo.link(from, to) == Some(HopKind::Backup) {
            LinkClass::Expensive
        } else if sets.iter().any(|s| s.is_empty()) {
            LinkClass::Normal
        } else {
            LinkClass::Rerouted
        };
        LinkRule { from, to, class, conditions: minimal(sets), used_under: sets.clone() }
    };
    let mut rules = Vec::new();
    for t in 1..=n {
        let mut send: Vec<LinkRule> =
            used.iter().filter(|((from, _), _)| *from == t).map(|(&k, v)| make(k, v)).collect();
        let mut receive: Vec<LinkRule> =
            used.iter().filter(|((_, to), _)| *to == t).map(|(&k, v)| make(k, v)).collect();
        let order = |r: &LinkRule| (r.class, r.from.min(r.to), r.from.max(r.to));
        send.sort_by_key(order);
        receive.sort_by_key(order);
        rules.push(TowerRules { tower: t, send, receive });
    }
    Ok(LinkRules { towers: n, max_failures, rules, choices })
}

/// Send links of the published 10-tower mapping: `(from, to, conditions)`, where each condition
/// lists the towers that must be down and an empty condition means normal operation.
pub const PUBLISHED_SEND_LINKS: &[(usize, usize, &[&[usize]])] = &[
    (2, 1, &[&[]]),
    (2, 3, &[&[1]]),
    (2, 4, &[&[1, 3]]),
    (3, 2, &[&[]]),
    (3, 4, &[&[1], &[2]]),
    (3, 1, &[&[2, 4], &[10, 2]]),
    (3, 5, &[&[1, 4]]),
    (4, 3, &[&[]]),
    (4, 5, &[&[1], &[3]]),
    (4, 2, &[&[3, 5], &[10, 3]]),
    (4, 6, &[&[1, 5]]),
    (5, 4, &[&[]]),
    (5, 6, &[&[1], &[4]]),
    (5, 3, &[&[4, 6], &[10, 4]]),
    (5, 7, &[&[1, 6]]),
    (6, 7, &[&[]]),
    (6, 5, &[&[10], &[7]]),
    (6, 4, &[&[10, 5]]),
    (6, 8, &[&[1, 7], &[5, 7]]),
    (7, 8, &[&[]]),
    (7, 6, &[&[10], &[8]]),
    (7, 5, &[&[10, 6]]),
    (7, 9, &[&[1, 8], &[6, 8]]),
    (8, 9, &[&[]]),
    (8, 7, &[&[10], &[9]]),
    (8, 6, &[&[10, 7]]),
    (8, 10, &[&[1, 9], &[7, 9]]),
    (9, 10, &[&[]]),
    (9, 8, &[&[10]]),
    (9, 7, &[&[10, 8]]),
];

/// The link the published mapping selects for `tower` under `failed`: among links whose peer is
/// up and one of whose conditions holds, the one with the most specific condition.
pub fn published_send_link(tower: usize, failed: &BTreeSet<usize>) -> Option<usize> {
    PUBLISHED_SEND_LINKS
        .iter()
        .filter(|(from, to, _)| *from == tower && !failed.contains(to))
        .filter_map(|(_, to, conds)| {
            conds.iter().filter(|c| c.iter().all(|t| failed.contains(t))).map(|c| c.len()).max().map(|len| (len, *to))
        })
        .max_by_key(|&(len, to)| (len, std::cmp::Reverse(to)))
        .map(|(_, to)| to)
}

/// `(failed, tower, derived next hop, published next hop)`.
pub type Disagreement = (BTreeSet<usize>, usize, Option<usize>, Option<usize>);

/// Failure sets of size ≤ 2 on which derived and published choices differ, with the
/// towers concerned.
pub fn published_disagreements(rules: &LinkRules) -> Vec<Disagreement> {
    let mut out = Vec::new();
    for (f, chosen) in &rules.choices {
        if f.len() > 2 {
            continue;
        }
        for (&t, &hop) in chosen {
            let published = published_send_link(t, f);
            if hop != published {
                out.push((f.clone(), t, hop, published));
            }
        }
    }
    out
}
