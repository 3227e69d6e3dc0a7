//! Predicates over integer fact snapshots.
//!
//! Success and failure definitions, checkpoint tests and risk conditions are
//! all expressed in this small language so they can be evaluated against
//! the simulator's oracle snapshot and checked for joint satisfiability
//! before a task is ever dispatched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Flat integer projection of the world. Booleans are 0/1.
pub type Facts = BTreeMap<String, i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Cmp {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Eq => lhs == rhs,
            Cmp::Ne => lhs != rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub fact: String,
    pub op: Cmp,
    pub value: i64,
}

impl Atom {
    /// An atom over a missing fact is false.
    pub fn eval(&self, facts: &Facts) -> bool {
        facts
            .get(&self.fact)
            .is_some_and(|&v| self.op.holds(v, self.value))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predicate {
    Const(bool),
    Atom(Atom),
    All {
        all: Vec<Predicate>,
    },
    Any {
        any: Vec<Predicate>,
    },
}

impl Predicate {
    pub fn atom(fact: impl Into<String>, op: Cmp, value: i64) -> Predicate {
        Predicate::Atom(Atom {
            fact: fact.into(),
            op,
            value,
        })
    }

    pub fn eq(fact: impl Into<String>, value: i64) -> Predicate {
        Predicate::atom(fact, Cmp::Eq, value)
    }

    pub fn all(parts: impl IntoIterator<Item = Predicate>) -> Predicate {
        Predicate::All {
            all: parts.into_iter().collect(),
        }
    }

    pub fn any(parts: impl IntoIterator<Item = Predicate>) -> Predicate {
        Predicate::Any {
            any: parts.into_iter().collect(),
        }
    }

    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::all([self, other])
    }

    pub fn eval(&self, facts: &Facts) -> bool {
        match self {
            Predicate::Const(b) => *b,
            Predicate::Atom(a) => a.eval(facts),
            Predicate::All { all } => all.iter().all(|p| p.eval(facts)),
            Predicate::Any { any } => any.iter().any(|p| p.eval(facts)),
        }
    }

    pub fn referenced_facts(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_facts(&mut out);
        out
    }

    fn collect_facts(&self, out: &mut BTreeSet<String>) {
        match self {
            Predicate::Const(_) => {}
            Predicate::Atom(a) => {
                out.insert(a.fact.clone());
            }
            Predicate::All { all: ps } | Predicate::Any { any: ps } => {
                ps.iter().for_each(|p| p.collect_facts(out))
            }
        }
    }

    /// Disjunctive normal form: a list of conjunctions of atoms.
    fn dnf(&self) -> Vec<Vec<Atom>> {
        match self {
            Predicate::Const(true) => vec![vec![]],
            Predicate::Const(false) => vec![],
            Predicate::Atom(a) => vec![vec![a.clone()]],
            Predicate::Any { any } => any.iter().flat_map(|p| p.dnf()).collect(),
            Predicate::All { all } => all.iter().fold(vec![vec![]], |acc, p| {
                let rhs = p.dnf();
                let mut out = Vec::with_capacity(acc.len() * rhs.len());
                for l in &acc {
                    for r in &rhs {
                        let mut c = l.clone();
                        c.extend(r.iter().cloned());
                        out.push(c);
                    }
                }
                out
            }),
        }
    }

    /// Whether some state drawn from `vocab` satisfies both predicates.
    pub fn jointly_satisfiable(&self, other: &Predicate, vocab: &Vocabulary) -> bool {
        self.clone()
            .and(other.clone())
            .dnf()
            .iter()
            .any(|conj| vocab.conjunction_satisfiable(conj))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Const(b) => write!(f, "{b}"),
            Predicate::Atom(a) => write!(f, "{} {} {}", a.fact, a.op.symbol(), a.value),
            Predicate::All { all } if all.is_empty() => f.write_str("true"),
            Predicate::Any { any } if any.is_empty() => f.write_str("false"),
            Predicate::All { all } => join(f, all, " && "),
            Predicate::Any { any } => join(f, any, " || "),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, parts: &[Predicate], sep: &str) -> fmt::Result {
    f.write_str("(")?;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        fmt::Display::fmt(p, f)?;
    }
    f.write_str(")")
}

/// The set of fact keys a state may carry, each with an inclusive range.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub domains: BTreeMap<String, (i64, i64)>,
}

impl Vocabulary {
    pub fn insert(&mut self, key: impl Into<String>, lo: i64, hi: i64) {
        self.domains.insert(key.into(), (lo, hi));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.domains.contains_key(key)
    }

    fn conjunction_satisfiable(&self, conj: &[Atom]) -> bool {
        let mut per_key: BTreeMap<&str, (i64, i64, BTreeSet<i64>)> = BTreeMap::new();
        for atom in conj {
            let Some(&(lo, hi)) = self.domains.get(&atom.fact) else {
                return false;
            };
            let entry = per_key
                .entry(atom.fact.as_str())
                .or_insert((lo, hi, BTreeSet::new()));
            let v = atom.value;
            match atom.op {
                Cmp::Eq => {
                    entry.0 = entry.0.max(v);
                    entry.1 = entry.1.min(v);
                }
                Cmp::Ne => {
                    entry.2.insert(v);
                }
                Cmp::Lt => entry.1 = entry.1.min(v.saturating_sub(1)),
                Cmp::Le => entry.1 = entry.1.min(v),
                Cmp::Gt => entry.0 = entry.0.max(v.saturating_add(1)),
                Cmp::Ge => entry.0 = entry.0.max(v),
            }
        }
        per_key.values().all(|(lo, hi, excluded)| {
            if lo > hi {
                return false;
            }
            let width = (*hi as i128) - (*lo as i128) + 1;
            let blocked = excluded.range(*lo..=*hi).count() as i128;
            width > blocked
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::default();
        v.insert("kitchen.dirt", 0, 90);
        v.insert("robot.battery", 0, 100);
        v
    }

    #[test]
    fn missing_fact_is_false() {
        let p = Predicate::eq("kitchen.dirt", 0);
        assert!(!p.eval(&Facts::new()));
        assert!(p.eval(&Facts::from([("kitchen.dirt".into(), 0)])));
    }

    #[test]
    fn success_and_guarded_failure_are_exclusive() {
        let success = Predicate::eq("kitchen.dirt", 0);
        let failure = Predicate::atom("robot.battery", Cmp::Lt, 2)
            .and(Predicate::atom("kitchen.dirt", Cmp::Gt, 0));
        assert!(!success.jointly_satisfiable(&failure, &vocab()));

        let unguarded = Predicate::atom("robot.battery", Cmp::Lt, 2);
        assert!(success.jointly_satisfiable(&unguarded, &vocab()));
    }

    #[test]
    fn exclusions_exhaust_a_range() {
        let mut v = Vocabulary::default();
        v.insert("flag", 0, 1);
        let p = Predicate::all([
            Predicate::atom("flag", Cmp::Ne, 0),
            Predicate::atom("flag", Cmp::Ne, 1),
        ]);
        assert!(!p.jointly_satisfiable(&Predicate::Const(true), &v));
        let q = Predicate::atom("flag", Cmp::Ne, 0);
        assert!(q.jointly_satisfiable(&Predicate::Const(true), &v));
    }

    #[test]
    fn unknown_vocabulary_key_is_unsatisfiable() {
        let p = Predicate::eq("nowhere", 1);
        assert!(!p.jointly_satisfiable(&Predicate::Const(true), &vocab()));
    }

    #[test]
    fn any_branches_are_considered() {
        let a = Predicate::any([
            Predicate::eq("kitchen.dirt", 0),
            Predicate::eq("robot.battery", 50),
        ]);
        let b = Predicate::atom("kitchen.dirt", Cmp::Gt, 0);
        assert!(a.jointly_satisfiable(&b, &vocab()));
    }

    #[test]
    fn serde_shape() {
        let p = Predicate::eq("kitchen.dirt", 0).and(Predicate::Const(true));
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"all":[{"fact":"kitchen.dirt","op":"==","value":0},true]}"#
        );
        let back: Predicate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        assert_eq!(p.to_string(), "(kitchen.dirt == 0 && true)");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn atom_strategy() -> impl Strategy<Value = Predicate> {
            (
                prop_oneof![Just("a"), Just("b")],
                prop_oneof![
                    Just(Cmp::Eq),
                    Just(Cmp::Ne),
                    Just(Cmp::Lt),
                    Just(Cmp::Le),
                    Just(Cmp::Gt),
                    Just(Cmp::Ge)
                ],
                -1i64..6,
            )
                .prop_map(|(k, op, v)| Predicate::atom(k, op, v))
        }

        fn pred_strategy() -> impl Strategy<Value = Predicate> {
            atom_strategy().prop_recursive(3, 12, 3, |inner| {
                prop_oneof![
                    prop::collection::vec(inner.clone(), 0..3).prop_map(Predicate::all),
                    prop::collection::vec(inner, 0..3).prop_map(Predicate::any),
                ]
            })
        }

        proptest! {
            /// Satisfiability agrees with brute-force enumeration of the domain.
            #[test]
            fn satisfiability_matches_enumeration(p in pred_strategy(), q in pred_strategy()) {
                let mut v = Vocabulary::default();
                v.insert("a", 0, 4);
                v.insert("b", 0, 4);
                let mut brute = false;
                for a in 0..=4 {
                    for b in 0..=4 {
                        let facts = Facts::from([("a".into(), a), ("b".into(), b)]);
                        if p.eval(&facts) && q.eval(&facts) {
                            brute = true;
                        }
                    }
                }
                prop_assert_eq!(p.jointly_satisfiable(&q, &v), brute);
            }
        }
    }
}
