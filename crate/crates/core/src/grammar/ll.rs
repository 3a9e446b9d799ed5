//! Strong LL(k) analysis, k ≤ 2.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{GrammarDescription, GrammarError, LexClass, Symbol, START_SYMBOL};

const K: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum La {
    Lit(String),
    Class(LexClass),
    Eof,
}

impl std::fmt::Display for La {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            La::Lit(s) => write!(f, "\"{s}\""),
            La::Class(c) => write!(f, "<{}>", c.name()),
            La::Eof => f.write_str("end of input"),
        }
    }
}

type SeqSet = BTreeSet<Vec<La>>;

#[derive(Debug, Clone)]
pub(crate) enum Decision {
    One(HashMap<La, usize>),
    /// Two-token table plus the first tokens that select a unique
    /// alternative, used to push errors to the deepest point.
    Two(HashMap<Vec<La>, usize>, HashMap<La, usize>),
}

/// Per-nonterminal decision tables plus the expected-token sets used for
/// error messages.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub index: HashMap<String, usize>,
    pub decisions: Vec<Decision>,
    pub expected: Vec<BTreeSet<La>>,
}

fn concat(a: &SeqSet, b: &SeqSet) -> SeqSet {
    let mut out = SeqSet::new();
    for s in a {
        if s.len() >= K || s.last() == Some(&La::Eof) {
            out.insert(s.clone());
            continue;
        }
        for t in b {
            let mut v = s.clone();
            for x in t {
                if v.len() >= K {
                    break;
                }
                let eof = *x == La::Eof;
                v.push(x.clone());
                if eof {
                    break;
                }
            }
            out.insert(v);
        }
    }
    out
}

fn epsilon() -> SeqSet {
    let mut s = SeqSet::new();
    s.insert(Vec::new());
    s
}

fn symbol_first(sym: &Symbol, first: &HashMap<String, SeqSet>) -> SeqSet {
    match sym {
        Symbol::Literal(l) => [vec![La::Lit(l.clone())]].into_iter().collect(),
        Symbol::Class(c) => [vec![La::Class(*c)]].into_iter().collect(),
        Symbol::NonTerminal(n) => first.get(n).cloned().unwrap_or_default(),
    }
}

fn seq_first(symbols: &[Symbol], first: &HashMap<String, SeqSet>) -> SeqSet {
    let mut acc = epsilon();
    for s in symbols {
        if acc.iter().all(|v| v.len() >= K) {
            break;
        }
        acc = concat(&acc, &symbol_first(s, first));
    }
    acc
}

fn nullable_set(g: &GrammarDescription) -> BTreeSet<String> {
    let mut nullable = BTreeSet::new();
    loop {
        let mut changed = false;
        for p in &g.productions {
            if nullable.contains(&p.name) {
                continue;
            }
            let is_nullable = p.alternatives.iter().any(|a| {
                a.symbols.iter().all(|s| match s {
                    Symbol::NonTerminal(n) => nullable.contains(n),
                    _ => false,
                })
            });
            if is_nullable {
                nullable.insert(p.name.clone());
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

fn check_left_recursion(g: &GrammarDescription) -> Result<(), GrammarError> {
    let nullable = nullable_set(g);
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for p in &g.productions {
        let e = edges.entry(p.name.as_str()).or_default();
        for a in &p.alternatives {
            for s in &a.symbols {
                match s {
                    Symbol::NonTerminal(n) => {
                        e.insert(n.as_str());
                        if !nullable.contains(n) {
                            break;
                        }
                    }
                    _ => break,
                }
            }
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit<'a>(
        n: &'a str,
        edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Option<&'a str> {
        match state.get(n).copied().unwrap_or(0) {
            1 => return Some(n),
            2 => return None,
            _ => {}
        }
        state.insert(n, 1);
        if let Some(next) = edges.get(n) {
            for m in next {
                if let Some(bad) = visit(m, edges, state) {
                    return Some(bad);
                }
            }
        }
        state.insert(n, 2);
        None
    }
    let mut state = BTreeMap::new();
    for p in &g.productions {
        if let Some(bad) = visit(p.name.as_str(), &edges, &mut state) {
            return Err(GrammarError::LeftRecursion(bad.to_string()));
        }
    }
    Ok(())
}

pub(crate) fn build_table(g: &GrammarDescription) -> Result<Table, GrammarError> {
    check_left_recursion(g)?;

    let mut first: HashMap<String, SeqSet> = g
        .productions
        .iter()
        .map(|p| (p.name.clone(), SeqSet::new()))
        .collect();
    loop {
        let mut changed = false;
        for p in &g.productions {
            let mut set = first[&p.name].clone();
            let before = set.len();
            for a in &p.alternatives {
                set.extend(seq_first(&a.symbols, &first));
            }
            if set.len() != before {
                first.insert(p.name.clone(), set);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut follow: HashMap<String, SeqSet> = g
        .productions
        .iter()
        .map(|p| (p.name.clone(), SeqSet::new()))
        .collect();
    follow
        .get_mut(START_SYMBOL)
        .expect("validated start symbol")
        .insert(vec![La::Eof]);
    loop {
        let mut changed = false;
        for p in &g.productions {
            for a in &p.alternatives {
                for (i, s) in a.symbols.iter().enumerate() {
                    let Symbol::NonTerminal(n) = s else { continue };
                    let rest = seq_first(&a.symbols[i + 1..], &first);
                    let add = concat(&rest, &follow[&p.name]);
                    let target = follow.get_mut(n).expect("validated reference");
                    let before = target.len();
                    target.extend(add);
                    if target.len() != before {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut index = HashMap::new();
    let mut decisions = Vec::new();
    let mut expected = Vec::new();
    for (id, p) in g.productions.iter().enumerate() {
        index.insert(p.name.clone(), id);
        let lookaheads: Vec<SeqSet> = p
            .alternatives
            .iter()
            .map(|a| concat(&seq_first(&a.symbols, &first), &follow[&p.name]))
            .collect();
        let firsts: Vec<BTreeSet<La>> = lookaheads
            .iter()
            .map(|set| set.iter().filter_map(|v| v.first().cloned()).collect())
            .collect();
        expected.push(firsts.iter().flatten().cloned().collect());

        let mut one = HashMap::new();
        let mut ok = true;
        for (alt, set) in firsts.iter().enumerate() {
            for la in set {
                if one.insert(la.clone(), alt).is_some() {
                    ok = false;
                }
            }
        }
        if ok {
            decisions.push(Decision::One(one));
            continue;
        }
        let mut owners: HashMap<La, BTreeSet<usize>> = HashMap::new();
        for (alt, set) in firsts.iter().enumerate() {
            for la in set {
                owners.entry(la.clone()).or_default().insert(alt);
            }
        }
        let unique: HashMap<La, usize> = owners
            .into_iter()
            .filter(|(_, alts)| alts.len() == 1)
            .map(|(la, alts)| (la, *alts.iter().next().expect("one owner")))
            .collect();
        let mut two: HashMap<Vec<La>, usize> = HashMap::new();
        for (alt, set) in lookaheads.iter().enumerate() {
            for seq in set {
                if let Some(prev) = two.insert(seq.clone(), alt) {
                    if prev != alt {
                        return Err(GrammarError::Conflict {
                            name: p.name.clone(),
                            first: prev,
                            second: alt,
                            lookahead: seq
                                .iter()
                                .map(|l| l.to_string())
                                .collect::<Vec<_>>()
                                .join(" "),
                        });
                    }
                }
            }
        }
        decisions.push(Decision::Two(two, unique));
    }
    Ok(Table {
        index,
        decisions,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(src: &str) -> Result<Table, GrammarError> {
        let g = GrammarDescription::parse(src).unwrap();
        g.validate()?;
        build_table(&g)
    }

    #[test]
    fn direct_left_recursion_is_rejected() {
        let err = build("sql_script := e \";\" ;\ne := e \"+\" <integer> | <integer> ;").unwrap_err();
        assert_eq!(err, GrammarError::LeftRecursion("e".into()));
    }

    #[test]
    fn left_recursion_through_nullable_prefix_is_rejected() {
        let err = build("sql_script := a ;\na := o a \"x\" | \"y\" ;\no := %empty ;").unwrap_err();
        assert!(matches!(err, GrammarError::LeftRecursion(_)));
    }

    #[test]
    fn two_token_lookahead_resolves_shared_prefix() {
        let t = build("sql_script := s \";\" ;\ns := \"CREATE\" \"TABLE\" | \"CREATE\" \"INDEX\" ;")
            .unwrap();
        let id = t.index["s"];
        assert!(matches!(t.decisions[id], Decision::Two(..)));
    }

    #[test]
    fn unbounded_prefix_is_a_conflict() {
        let err = build(
            "sql_script := s \";\" ;\ns := \"A\" \"A\" \"B\" | \"A\" \"A\" \"C\" ;",
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::Conflict { .. }));
    }
}
