//! Route computation against exhaustive path enumeration.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctmcgrid_core::models::{compute_routes, HopKind, LineTopology, RouteCost};

/// Best `(cost, terminal, next hop)` over all simple paths from `from` to an operational terminal
/// that pass only through operational non-terminal towers.
fn brute_force(topo: &LineTopology, failed: &BTreeSet<usize>, from: usize) -> Option<(RouteCost, usize, usize)> {
    fn dfs(
        topo: &LineTopology,
        failed: &BTreeSet<usize>,
        path: &mut Vec<usize>,
        backups: usize,
        best: &mut Option<(RouteCost, usize, usize)>,
    ) {
        let here = *path.last().unwrap();
        for next in 1..=topo.towers() {
            let Some(kind) = topo.link(here, next) else { continue };
            if failed.contains(&next) || path.contains(&next) {
                continue;
            }
            let b = backups + usize::from(kind == HopKind::Backup);
            if topo.is_terminal(next) {
                let cand = (RouteCost { backups: b, hops: path.len() }, next, path.get(1).copied().unwrap_or(next));
                if best.is_none_or(|cur| cand < cur) {
                    *best = Some(cand);
                }
            } else {
                path.push(next);
                dfs(topo, failed, path, b, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    dfs(topo, failed, &mut vec![from], 0, &mut best);
    best
}

fn random_instance(rng: &mut ChaCha8Rng) -> (LineTopology, BTreeSet<usize>) {
    let n = rng.random_range(3..=12);
    let p = rng.random_range(0.0..0.6);
    let failed = (1..=n).filter(|_| rng.random_bool(p)).collect();
    (LineTopology::new(n).unwrap(), failed)
}

#[test]
fn matches_exhaustive_search_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (topo, failed) = random_instance(&mut rng);
        let table = compute_routes(&topo, &failed);
        let operational: Vec<usize> = topo.non_terminals().filter(|t| !failed.contains(t)).collect();
        assert_eq!(table.entries.keys().copied().collect::<Vec<_>>(), operational);
        for t in operational {
            let got = table.route(t).map(|r| (r.cost(), r.terminal(), r.next_hop()));
            assert_eq!(got, brute_force(&topo, &failed, t), "n={} failed={failed:?} tower {t}", topo.towers());
            if let Some(r) = table.route(t) {
                assert_eq!(r.path.len(), r.hops.len() + 1);
                for (w, &kind) in r.path.windows(2).zip(&r.hops) {
                    assert_eq!(topo.link(w[0], w[1]), Some(kind));
                    assert!(!failed.contains(&w[1]));
                }
                assert!(r.path[1..r.path.len() - 1].iter().all(|&v| !topo.is_terminal(v)));
            }
        }
    }
}

proptest! {
    /// Another failure only removes paths, so no surviving tower gets a cheaper route.
    #[test]
    fn costs_never_improve_when_more_towers_fail(n in 3usize..12, mask in any::<u16>(), extra in 1usize..12) {
        let topo = LineTopology::new(n).unwrap();
        let failed: BTreeSet<usize> = (1..=n).filter(|t| mask >> (t - 1) & 1 == 1).collect();
        let mut more = failed.clone();
        more.insert((extra - 1) % n + 1);
        let (before, after) = (compute_routes(&topo, &failed), compute_routes(&topo, &more));
        for (t, entry) in &after.entries {
            match (before.route(*t), entry.route()) {
                (Some(b), Some(a)) => prop_assert!(a.cost() >= b.cost()),
                (None, Some(_)) => prop_assert!(false, "tower {} became routable", t),
                _ => {}
            }
        }
    }
}

#[test]
fn regular_links_suffice_without_failures() {
    for n in 3..=12 {
        let topo = LineTopology::new(n).unwrap();
        let table = compute_routes(&topo, &BTreeSet::new());
        for t in topo.non_terminals() {
            let r = table.route(t).unwrap();
            assert_eq!(r.cost().backups, 0);
            assert_eq!(r.cost().hops, (t - 1).min(n - t));
        }
    }
}
