//! Independence equivalence of DAGs, brute-force class enumeration and
//! compelled edges.
//!
//! Two DAGs are equivalent iff they share a skeleton and the same
//! v-structures (X → Y ← Z with X, Z non-adjacent). Edges oriented the same
//! way in every member of a class are compelled; under the causal Markov
//! condition, and assuming no hidden common causes or selection bias, they are
//! the candidates for a causal reading.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::network::NetworkStructure;

/// Largest variable count accepted by [`enumerate_equivalence_class`].
pub const MAX_CLASS_VARIABLES: usize = 8;

/// Unordered adjacent pairs `(min, max)`.
pub fn skeleton(s: &NetworkStructure) -> BTreeSet<(usize, usize)> {
    s.arcs()
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

/// V-structures as `(x, y, z)` with `x < z` and arcs x → y ← z.
pub fn v_structures(s: &NetworkStructure) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for y in 0..s.len() {
        let ps = s.parents(y);
        for (a, &x) in ps.iter().enumerate() {
            for &z in &ps[a + 1..] {
                if !s.adjacent(x, z) {
                    out.insert((x.min(z), y, x.max(z)));
                }
            }
        }
    }
    out
}

pub fn independence_equivalent(s1: &NetworkStructure, s2: &NetworkStructure) -> Result<bool> {
    if !s1.same_variables(s2) {
        return Err(Error::VariableSetMismatch);
    }
    Ok(skeleton(s1) == skeleton(s2) && v_structures(s1) == v_structures(s2))
}

/// Every DAG equivalent to `s` (including `s`), sorted by arc list.
///
/// Edges taking part in one of `s`'s v-structures have a forced orientation;
/// the remaining edges are oriented by backtracking, pruning any partial
/// orientation that closes a cycle or creates a v-structure `s` lacks.
pub fn enumerate_equivalence_class(s: &NetworkStructure) -> Result<Vec<NetworkStructure>> {
    let n = s.len();
    if n > MAX_CLASS_VARIABLES {
        return Err(Error::TooLarge(format!(
            "{n} variables; class enumeration supports at most {MAX_CLASS_VARIABLES}"
        )));
    }
    let edges: Vec<(usize, usize)> = skeleton(s).into_iter().collect();
    let target_v = v_structures(s);
    let mut forced: Vec<Option<bool>> = vec![None; edges.len()];
    for (e, &(a, b)) in edges.iter().enumerate() {
        for &(x, y, z) in &target_v {
            if (a, b) == (x.min(y), x.max(y)) {
                forced[e] = Some(x == a); // true: a -> b
            }
            if (a, b) == (z.min(y), z.max(y)) {
                forced[e] = Some(z == a);
            }
        }
    }

    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in &edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut search = ClassSearch {
        n,
        edges: &edges,
        forced: &forced,
        adj: &adj,
        target_v: &target_v,
        parents: vec![Vec::new(); n],
        out: Vec::new(),
        variables: s,
    };
    search.extend(0)?;
    let mut out = search.out;
    out.sort_by_key(|m| m.arcs());
    Ok(out)
}

struct ClassSearch<'a> {
    n: usize,
    edges: &'a [(usize, usize)],
    forced: &'a [Option<bool>],
    adj: &'a [Vec<bool>],
    target_v: &'a BTreeSet<(usize, usize, usize)>,
    parents: Vec<Vec<usize>>,
    out: Vec<NetworkStructure>,
    variables: &'a NetworkStructure,
}

impl ClassSearch<'_> {
    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            for c in 0..self.n {
                if self.parents[c].contains(&v) {
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Would adding `from -> to` close a cycle or add an unwanted v-structure?
    fn admissible(&self, from: usize, to: usize) -> bool {
        if self.reaches(to, from) {
            return false;
        }
        self.parents[to].iter().all(|&other| {
            self.adj[other][from] || self.target_v.contains(&(other.min(from), to, other.max(from)))
        })
    }

    fn extend(&mut self, e: usize) -> Result<()> {
        if e == self.edges.len() {
            let s = NetworkStructure::new(self.variables.variables().to_vec(), self.parents.clone())?;
            if v_structures(&s) == *self.target_v {
                self.out.push(s);
            }
            return Ok(());
        }
        let (a, b) = self.edges[e];
        let options: &[bool] = match self.forced[e] {
            Some(true) => &[true],
            Some(false) => &[false],
            None => &[true, false],
        };
        for &forward in options {
            let (from, to) = if forward { (a, b) } else { (b, a) };
            if self.admissible(from, to) {
                self.parents[to].push(from);
                self.extend(e + 1)?;
                self.parents[to].pop();
            }
        }
        Ok(())
    }
}

/// Arcs `(parent, child)` oriented identically in every class member.
pub fn compelled_edges(s: &NetworkStructure) -> Result<BTreeSet<(usize, usize)>> {
    let class = enumerate_equivalence_class(s)?;
    let mut common: BTreeSet<(usize, usize)> = s.arcs().into_iter().collect();
    for member in &class {
        let arcs: BTreeSet<_> = member.arcs().into_iter().collect();
        common = common.intersection(&arcs).copied().collect();
    }
    Ok(common)
}

/// Compelled edges with a human-readable caveat, as printed by the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalReading {
    pub class_size: usize,
    pub compelled: Vec<(String, String)>,
    pub reversible: Vec<(String, String)>,
}

impl CausalReading {
    pub const CAVEAT: &'static str = "compelled arcs are causal candidates only under the causal Markov \
         condition and the assumption of no hidden variables or selection bias";

    pub fn of(s: &NetworkStructure) -> Result<Self> {
        let class = enumerate_equivalence_class(s)?;
        let compelled = compelled_edges(s)?;
        let name = |(a, b): (usize, usize)| {
            (s.variable(a).name().to_string(), s.variable(b).name().to_string())
        };
        Ok(Self {
            class_size: class.len(),
            compelled: compelled.iter().copied().map(name).collect(),
            reversible: s
                .arcs()
                .into_iter()
                .filter(|e| !compelled.contains(e))
                .map(name)
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::VariableSpec;

    fn vars(names: &[&str]) -> Vec<VariableSpec> {
        names.iter().map(|n| VariableSpec::indexed(*n, 2).unwrap()).collect()
    }

    fn net(names: &[&str], fam: &[(&str, &[&str])]) -> NetworkStructure {
        NetworkStructure::from_names(vars(names), fam).unwrap()
    }

    #[test]
    fn chain_and_fork_are_equivalent() {
        let chain = net(&["X", "Y", "Z"], &[("Y", &["X"]), ("Z", &["Y"])]);
        let fork = net(&["X", "Y", "Z"], &[("X", &["Y"]), ("Z", &["Y"])]);
        let collider = net(&["X", "Y", "Z"], &[("Y", &["X", "Z"])]);
        assert!(independence_equivalent(&chain, &fork).unwrap());
        assert!(!independence_equivalent(&collider, &chain).unwrap());
        assert!(independence_equivalent(&collider, &collider).unwrap());
        let other = net(&["A", "B", "C"], &[]);
        assert_eq!(independence_equivalent(&chain, &other).unwrap_err(), Error::VariableSetMismatch);
    }

    #[test]
    fn class_sizes() {
        let chain = net(&["X", "Y", "Z"], &[("Y", &["X"]), ("Z", &["Y"])]);
        assert_eq!(enumerate_equivalence_class(&chain).unwrap().len(), 3);
        let collider = net(&["X", "Y", "Z"], &[("Y", &["X", "Z"])]);
        assert_eq!(enumerate_equivalence_class(&collider).unwrap().len(), 1);
        let complete = net(&["X", "Y", "Z"], &[("Y", &["X"]), ("Z", &["X", "Y"])]);
        assert_eq!(enumerate_equivalence_class(&complete).unwrap().len(), 6);
    }

    #[test]
    fn class_contains_input_and_only_equivalents() {
        let s = net(
            &["A", "B", "C", "D"],
            &[("B", &["A"]), ("C", &["A"]), ("D", &["B", "C"])],
        );
        let class = enumerate_equivalence_class(&s).unwrap();
        assert!(class.contains(&s));
        for m in &class {
            assert!(independence_equivalent(&s, m).unwrap());
        }
    }

    #[test]
    fn compelled_edges_of_collider_and_chain() {
        let collider = net(&["X", "Y", "Z"], &[("Y", &["X", "Z"])]);
        assert_eq!(compelled_edges(&collider).unwrap().len(), 2);
        let chain = net(&["X", "Y", "Z"], &[("Y", &["X"]), ("Z", &["Y"])]);
        assert!(compelled_edges(&chain).unwrap().is_empty());
    }

    #[test]
    fn ad_buy_is_compelled() {
        let s = net(
            &["Income", "Location", "Ad", "Buy"],
            &[("Ad", &["Income", "Location"]), ("Buy", &["Ad"])],
        );
        let c = compelled_edges(&s).unwrap();
        assert!(c.contains(&(2, 3)));
        let reading = CausalReading::of(&s).unwrap();
        assert_eq!(reading.class_size, 1);
        assert!(reading.compelled.contains(&("Ad".into(), "Buy".into())));
    }

    #[test]
    fn too_large() {
        let names: Vec<String> = (0..9).map(|i| format!("V{i}")).collect();
        let vs = names.iter().map(|n| VariableSpec::indexed(n.as_str(), 2).unwrap()).collect();
        let s = NetworkStructure::empty(vs).unwrap();
        assert_eq!(enumerate_equivalence_class(&s).unwrap_err().name(), "TooLarge");
    }
}
