use crate::space::StateSpace;

/// Strongly connected components of the transition graph (iterative Tarjan).
///
/// Returns the component id of every state; ids are assigned in completion order,
/// so every edge leaving a component points to a component with a smaller id.
pub fn strongly_connected_components(space: &StateSpace) -> (Vec<usize>, usize) {
    let n = space.num_states();
    let row_ptr = space.row_ptr();
    let cols = space.cols();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut ncomp = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, row_ptr[root]));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if *k < row_ptr[v + 1] {
                let w = cols[*k] as usize;
                *k += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, row_ptr[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    (comp, ncomp)
}

/// Bottom SCCs as sorted state lists, ordered by their smallest state index.
pub fn bottom_sccs(space: &StateSpace) -> Vec<Vec<usize>> {
    let (comp, ncomp) = strongly_connected_components(space);
    let mut bottom = vec![true; ncomp];
    for s in 0..space.num_states() {
        for (j, _, _) in space.row(s) {
            if comp[j] != comp[s] {
                bottom[comp[s]] = false;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for (s, &c) in comp.iter().enumerate() {
        if bottom[c] {
            groups[c].push(s);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
    out.sort_by_key(|g| g[0]);
    out
}
