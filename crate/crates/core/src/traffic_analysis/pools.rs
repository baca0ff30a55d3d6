//! Domain-name sets with load-balancing pools folded into range patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::dns_wire::Name;

/// Minimum number of siblings before they are folded into one pattern.
pub const DEFAULT_POOL_THRESHOLD: usize = 3;

/// One member of a [`DomainSet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Member {
    Literal(Name),
    /// `prefix[min-max]` in one label; `names` are the concrete names it stands for.
    Pool { pattern: String, names: BTreeSet<Name> },
}

impl Member {
    pub fn key(&self) -> &str {
        match self {
            Member::Literal(n) => n.as_str(),
            Member::Pool { pattern, .. } => pattern,
        }
    }

    pub fn names(&self) -> Box<dyn Iterator<Item = &Name> + '_> {
        match self {
            Member::Literal(n) => Box::new(std::iter::once(n)),
            Member::Pool { names, .. } => Box::new(names.iter()),
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A set of domain names; identity of a member is its rendered form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DomainSet {
    members: BTreeMap<String, Member>,
}

impl DomainSet {
    pub fn new() -> DomainSet {
        DomainSet::default()
    }

    /// Plain names, no pooling.
    pub fn literal<I: IntoIterator<Item = Name>>(names: I) -> DomainSet {
        let members = names
            .into_iter()
            .map(|n| (n.as_str().to_string(), Member::Literal(n)))
            .collect();
        DomainSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.members.contains_key(key)
    }

    pub fn members(&self) -> impl Iterator<Item = &Member> {
        self.members.values()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.members.keys().map(String::as_str)
    }

    pub fn key_set(&self) -> BTreeSet<&str> {
        self.keys().collect()
    }

    /// Every concrete name covered by some member.
    pub fn concrete_names(&self) -> BTreeSet<Name> {
        self.members.values().flat_map(|m| m.names().cloned()).collect()
    }

    /// Member key covering `name`, if any.
    pub fn member_of(&self, name: &Name) -> Option<&str> {
        self.members
            .values()
            .find(|m| m.names().any(|n| n == name))
            .map(Member::key)
    }

    /// Map from every covered concrete name to its member key.
    pub fn index(&self) -> BTreeMap<&Name, &str> {
        self.members
            .values()
            .flat_map(|m| m.names().map(move |n| (n, m.key())))
            .collect()
    }

    /// Fold pools among the literal members; existing pools are kept as they are.
    pub fn collapse(&self, threshold: usize) -> DomainSet {
        let threshold = threshold.max(2);
        let mut out: BTreeMap<String, Member> = BTreeMap::new();
        let mut literals: BTreeSet<Name> = BTreeSet::new();
        for m in self.members.values() {
            match m {
                Member::Literal(n) => {
                    literals.insert(n.clone());
                }
                pool => {
                    out.insert(pool.key().to_string(), pool.clone());
                }
            }
        }

        loop {
            let groups = candidate_groups(&literals);
            let best = groups
                .into_iter()
                .filter(|(_, names)| names.len() >= threshold)
                .max_by(|(ka, a), (kb, b)| a.len().cmp(&b.len()).then_with(|| kb.cmp(ka)));
            let Some((key, names)) = best else { break };
            let pattern = render_pattern(&key, &names);
            for n in &names {
                literals.remove(n);
            }
            out.insert(
                pattern.clone(),
                Member::Pool {
                    pattern,
                    names: names.into_iter().collect(),
                },
            );
        }
        for n in literals {
            out.insert(n.as_str().to_string(), Member::Literal(n));
        }
        DomainSet { members: out }
    }
}

/// Names that agree on every label but `position`, where the label is
/// `prefix` followed by a decimal number.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    position: usize,
    prefix: String,
    labels: Vec<String>,
}

fn split_numeric(label: &str) -> Option<(&str, &str)> {
    let digits = label.bytes().rev().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    Some(label.split_at(label.len() - digits))
}

fn candidate_groups(names: &BTreeSet<Name>) -> BTreeMap<GroupKey, Vec<Name>> {
    let mut groups: BTreeMap<GroupKey, Vec<Name>> = BTreeMap::new();
    for name in names {
        let labels: Vec<&str> = name.labels().collect();
        for (position, label) in labels.iter().enumerate() {
            if let Some((prefix, _)) = split_numeric(label) {
                let mut rest: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                rest[position] = String::new();
                groups
                    .entry(GroupKey {
                        position,
                        prefix: prefix.to_string(),
                        labels: rest,
                    })
                    .or_default()
                    .push(name.clone());
            }
        }
    }
    groups
}

/// Orders decimal strings by value.
fn numeric_key(digits: &str) -> (usize, &str) {
    let trimmed = digits.trim_start_matches('0');
    (trimmed.len(), trimmed)
}

fn render_pattern(key: &GroupKey, names: &[Name]) -> String {
    let numbers: Vec<&str> = names
        .iter()
        .map(|n| {
            let label = n.labels().nth(key.position).expect("grouped by position");
            split_numeric(label).expect("numeric label").1
        })
        .collect();
    let min = numbers.iter().min_by_key(|d| numeric_key(d)).unwrap();
    let max = numbers.iter().max_by_key(|d| numeric_key(d)).unwrap();
    let mut labels = key.labels.clone();
    labels[key.position] = format!("{}[{min}-{max}]", key.prefix);
    labels.join(".")
}

/// Fold numbered sibling names into `prefix[min-max]` members.
pub fn collapse_pools<'a, I>(names: I, threshold: usize) -> DomainSet
where
    I: IntoIterator<Item = &'a Name>,
{
    DomainSet::literal(names.into_iter().cloned()).collapse(threshold)
}
