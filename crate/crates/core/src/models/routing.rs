//! Cheapest-route computation on a transmission line with regular and backup links.
//!
//! Towers are numbered `1..=n`; towers 1 and n are terminals that only receive. Every tower
//! has regular links to `i±1` and backup links to `i±2`. A route minimizes the number of
//! backup hops first and the number of hops second.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::Serialize;

use super::ModelsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LineTopology {
    n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HopKind {
    Regular,
    Backup,
}

impl LineTopology {
    pub fn new(n: usize) -> Result<Self, ModelsError> {
        if n < 3 {
            return Err(ModelsError::Invalid(format!("a line needs at least 3 towers, got {n}")));
        }
        Ok(LineTopology { n })
    }

    pub fn towers(&self) -> usize {
        self.n
    }

    pub fn is_terminal(&self, t: usize) -> bool {
        t == 1 || t == self.n
    }

    pub fn non_terminals(&self) -> impl Iterator<Item = usize> {
        2..self.n
    }

    /// Link between `a` and `b`, if any.
    pub fn link(&self, a: usize, b: usize) -> Option<HopKind> {
        if a == b || a == 0 || b == 0 || a > self.n || b > self.n {
            return None;
        }
        match a.abs_diff(b) {
            1 => Some(HopKind::Regular),
            2 => Some(HopKind::Backup),
            _ => None,
        }
    }

    /// Neighbours of `t` in ascending order.
    pub fn neighbors(&self, t: usize) -> impl Iterator<Item = (usize, HopKind)> + '_ {
        [t.wrapping_sub(2), t.wrapping_sub(1), t + 1, t + 2]
            .into_iter()
            .filter_map(move |u| self.link(t, u).map(|k| (u, k)))
    }

    /// Every undirected link as `(low, high, kind)`.
    pub fn edges(&self) -> Vec<(usize, usize, HopKind)> {
        let mut out = Vec::new();
        for a in 1..=self.n {
            for (b, k) in self.neighbors(a) {
                if a < b {
                    out.push((a, b, k));
                }
            }
        }
        out
    }

    pub fn check_failed(&self, failed: &BTreeSet<usize>) -> Result<(), ModelsError> {
        match failed.iter().find(|&&t| t == 0 || t > self.n) {
            Some(t) => Err(ModelsError::Invalid(format!("tower {t} is not in 1..={}", self.n))),
            None => Ok(()),
        }
    }
}

/// Lexicographic route cost: backup hops, then total hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RouteCost {
    pub backups: usize,
    pub hops: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Route {
    /// Starts at the sending tower and ends at a terminal.
    pub path: Vec<usize>,
    pub hops: Vec<HopKind>,
}

impl Route {
    pub fn cost(&self) -> RouteCost {
        RouteCost { backups: self.hops.iter().filter(|&&h| h == HopKind::Backup).count(), hops: self.hops.len() }
    }

    pub fn terminal(&self) -> usize {
        *self.path.last().expect("route has a terminal")
    }

    pub fn next_hop(&self) -> usize {
        self.path[1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RouteEntry {
    Routed(Route),
    Unroutable,
}

impl RouteEntry {
    pub fn route(&self) -> Option<&Route> {
        match self {
            RouteEntry::Routed(r) => Some(r),
            RouteEntry::Unroutable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RouteTable {
    pub towers: usize,
    pub failed: BTreeSet<usize>,
    /// One entry per operational non-terminal tower.
    pub entries: BTreeMap<usize, RouteEntry>,
}

impl RouteTable {
    pub fn route(&self, tower: usize) -> Option<&Route> {
        self.entries.get(&tower).and_then(RouteEntry::route)
    }

    pub fn next_hop(&self, tower: usize) -> Option<usize> {
        self.route(tower).map(Route::next_hop)
    }

    /// (regular hops, backup hops, unroutable towers) summed over the table.
    pub fn summary(&self) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for e in self.entries.values() {
            match e {
                RouteEntry::Routed(r) => {
                    let c = r.cost();
                    out.0 += c.hops - c.backups;
                    out.1 += c.backups;
                }
                RouteEntry::Unroutable => out.2 += 1,
            }
        }
        out
    }
}

impl fmt::Display for RouteTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed: Vec<String> = self.failed.iter().map(|t| t.to_string()).collect();
        writeln!(f, "towers: {}  failed: {{{}}}", self.towers, failed.join(","))?;
        for (t, e) in &self.entries {
            match e {
                RouteEntry::Routed(r) => {
                    let mut line = format!("T{t}: {}", r.path[0]);
                    for (next, kind) in r.path[1..].iter().zip(&r.hops) {
                        line.push_str(if *kind == HopKind::Backup { " =backup=> " } else { " -> " });
                        line.push_str(&next.to_string());
                    }
                    let c = r.cost();
                    let plural = |n: usize| if n == 1 { "" } else { "s" };
                    writeln!(
                        f,
                        "{line}  ({} hop{}, {} backup{})",
                        c.hops,
                        plural(c.hops),
                        c.backups,
                        plural(c.backups)
                    )?;
                }
                RouteEntry::Unroutable => writeln!(f, "T{t}: unroutable")?,
            }
        }
        let (reg, bak, unr) = self.summary();
        write!(f, "regular hops: {reg}  backup hops: {bak}  unroutable: {unr}")
    }
}

/// Per-tower key ordering ties: cost, then the terminal reached (lower wins).
type Key = (RouteCost, usize);

fn extend(k: Key, hop: HopKind) -> Key {
    let (c, term) = k;
    let backups = c.backups + usize::from(hop == HopKind::Backup);
    (RouteCost { backups, hops: c.hops + 1 }, term)
}

/// Optimal routes of every operational non-terminal tower.
///
/// Ties in cost go to terminal 1, then to the lowest-numbered next hop. Computed as a
/// multi-source Dijkstra run backwards from the operational terminals.
pub fn compute_routes(topo: &LineTopology, failed: &BTreeSet<usize>) -> RouteTable {
    let n = topo.n;
    let up = |t: usize| !failed.contains(&t);
    let mut best: Vec<Option<Key>> = vec![None; n + 1];
    let mut heap = BinaryHeap::new();
    for t in [1, n] {
        if up(t) {
            best[t] = Some((RouteCost { backups: 0, hops: 0 }, t));
            heap.push(Reverse(((RouteCost { backups: 0, hops: 0 }, t), t)));
        }
    }
    while let Some(Reverse((key, v))) = heap.pop() {
        if best[v] != Some(key) {
            continue;
        }
        for (u, hop) in topo.neighbors(v) {
            if !up(u) || topo.is_terminal(u) {
                continue;
            }
            let cand = extend(key, hop);
            if best[u].is_none_or(|b| cand < b) {
                best[u] = Some(cand);
                heap.push(Reverse((cand, u)));
            }
        }
    }

    let next_hop = |u: usize| -> usize {
        let target = best[u].expect("routable");
        topo.neighbors(u)
            .filter(|&(v, hop)| up(v) && best[v].is_some_and(|k| extend(k, hop) == target))
            .map(|(v, _)| v)
            .next()
            .expect("some neighbour realizes the optimum")
    };

    let mut entries = BTreeMap::new();
    for t in topo.non_terminals().filter(|&t| up(t)) {
        if best[t].is_none() {
            entries.insert(t, RouteEntry::Unroutable);
            continue;
        }
        let mut path = vec![t];
        let mut hops = Vec::new();
        let mut cur = t;
        while !topo.is_terminal(cur) {
            let nxt = next_hop(cur);
            hops.push(topo.link(cur, nxt).expect("neighbour"));
            path.push(nxt);
            cur = nxt;
        }
        entries.insert(t, RouteEntry::Routed(Route { path, hops }));
    }
    RouteTable { towers: n, failed: failed.clone(), entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn routes(failed: &[usize]) -> RouteTable {
        compute_routes(&LineTopology::new(10).unwrap(), &set(failed))
    }

    #[test]
    fn all_operational_split_at_the_middle() {
        let r = routes(&[]);
        for t in 2..=5 {
            assert_eq!(r.route(t).unwrap().terminal(), 1);
        }
        for t in 6..=9 {
            assert_eq!(r.route(t).unwrap().terminal(), 10);
        }
        assert_eq!(r.summary().1, 0);
    }

    #[test]
    fn failed_terminal_sends_everything_the_other_way() {
        let r = routes(&[1]);
        for t in 2..=9 {
            let route = r.route(t).unwrap();
            assert_eq!(route.terminal(), 10);
            assert_eq!(route.cost().backups, 0);
        }
    }

    #[test]
    fn single_failure_reverses_direction() {
        let r = routes(&[3]);
        assert_eq!(r.route(2).unwrap().path, vec![2, 1]);
        assert_eq!(r.route(4).unwrap().path, vec![4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(r.route(5).unwrap().terminal(), 10);
        assert_eq!(r.summary().1, 0);
    }

    #[test]
    fn isolated_tower_takes_one_backup() {
        let r = routes(&[1, 3]);
        let route = r.route(2).unwrap();
        assert_eq!(route.path[..2], [2, 4]);
        assert_eq!(route.hops[0], HopKind::Backup);
        assert_eq!(route.cost().backups, 1);
    }

    #[test]
    fn both_terminals_down_is_unroutable() {
        let r = routes(&[1, 10]);
        assert!(r.entries.values().all(|e| *e == RouteEntry::Unroutable));
        assert_eq!(r.summary().2, 8);
    }

    #[test]
    fn three_tower_line() {
        let topo = LineTopology::new(3).unwrap();
        assert_eq!(compute_routes(&topo, &set(&[])).route(2).unwrap().path, vec![2, 1]);
        assert_eq!(compute_routes(&topo, &set(&[1])).route(2).unwrap().path, vec![2, 3]);
        assert_eq!(compute_routes(&topo, &set(&[1, 3])).entries[&2], RouteEntry::Unroutable);
        assert!(LineTopology::new(2).is_err());
    }

    #[test]
    fn display_marks_backup_hops() {
        let text = routes(&[1, 3]).to_string();
        assert!(text.contains("T2: 2 =backup=> 4"), "{text}");
    }
}
