//! Words of measurement projectors and their canonical form.
//!
//! Generators are the outcome-0 projectors of Bob's settings, B(y), and of
//! Eve's settings, E(z); the outcome-1 operators are eliminated up front via
//! completeness (M1 = 1 - M0). The projector algebra gives three rewrite
//! rules: idempotence of each generator, commutation of every B with every E,
//! and nothing else (B's do not commute among themselves, nor do E's). The
//! canonical form is therefore: all B letters before all E letters, each side
//! keeping its original relative order, with immediately repeated letters
//! collapsed.

use std::fmt;

/// Outcome-0 projector of one measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    /// Bob's projector B_{0|y}.
    B(u8),
    /// Eve's projector E_{0|z}, one setting per encoding pair.
    E(u8),
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::B(y) => write!(f, "B{y}"),
            Generator::E(z) => write!(f, "E{z}"),
        }
    }
}

/// A canonical word over the generators; the empty word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    word: Vec<Generator>,
}

fn collapse_repeats(letters: impl IntoIterator<Item = Generator>, out: &mut Vec<Generator>) {
    for g in letters {
        if out.last() != Some(&g) {
            out.push(g);
        }
    }
}

impl Monomial {
    pub fn identity() -> Self {
        Self { word: Vec::new() }
    }

    pub fn generator(g: Generator) -> Self {
        Self { word: vec![g] }
    }

    /// Canonical form of an arbitrary letter sequence: stable-partition B's
    /// before E's (valid because [B, E] = 0 while letters within each family
    /// keep their order), then collapse immediate repeats (idempotence).
    pub fn canonicalize(letters: &[Generator]) -> Self {
        let mut word = Vec::with_capacity(letters.len());
        collapse_repeats(
            letters.iter().copied().filter(|g| matches!(g, Generator::B(_))),
            &mut word,
        );
        let mut tail = Vec::new();
        collapse_repeats(
            letters.iter().copied().filter(|g| matches!(g, Generator::E(_))),
            &mut tail,
        );
        word.extend(tail);
        Self { word }
    }

    pub fn letters(&self) -> &[Generator] {
        &self.word
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.word.len()
    }

    /// Product self * rhs, canonicalized.
    pub fn product(&self, rhs: &Self) -> Self {
        let mut letters = Vec::with_capacity(self.word.len() + rhs.word.len());
        letters.extend_from_slice(&self.word);
        letters.extend_from_slice(&rhs.word);
        Self::canonicalize(&letters)
    }

    /// Adjoint: generators are Hermitian, so the adjoint reverses the word
    /// (equivalently, reverses the B part and the E part separately).
    pub fn adjoint(&self) -> Self {
        let rev: Vec<Generator> = self.word.iter().rev().copied().collect();
        Self::canonicalize(&rev)
    }

    pub fn is_self_adjoint(&self) -> bool {
        *self == self.adjoint()
    }

    /// The rightmost letter of the B part, if any. Because every B commutes
    /// past every E, a word annihilates |psi_x> exactly when this letter's
    /// projector does.
    pub fn b_part_last(&self) -> Option<u8> {
        self.word
            .iter()
            .rev()
            .find_map(|g| if let Generator::B(y) = g { Some(*y) } else { None })
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            return write!(f, "1");
        }
        for (i, g) in self.word.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Monomial sets defining the relaxation levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HierarchyLevel {
    /// {1, B(y), E(z)}
    S1,
    /// S1 plus the products B(y)E(z); the default, and the smallest level
    /// whose basis contains the guessing-probability monomials.
    S1AB,
    /// S1 plus all two-letter products BB', EE', BE.
    S2,
    /// An explicit word list; the identity is prepended if absent.
    Custom(Vec<Monomial>),
}

impl HierarchyLevel {
    /// The monomial basis for n Bob settings and m = n(n-1)/2 Eve settings,
    /// identity first, deduplicated, in deterministic order.
    pub fn basis(&self, n_bob: usize, n_eve: usize) -> Vec<Monomial> {
        let bs = || (0..n_bob as u8).map(Generator::B);
        let es = || (0..n_eve as u8).map(Generator::E);
        let mut words = vec![Monomial::identity()];
        match self {
            HierarchyLevel::S1 => {
                words.extend(bs().map(Monomial::generator));
                words.extend(es().map(Monomial::generator));
            }
            HierarchyLevel::S1AB => {
                words.extend(bs().map(Monomial::generator));
                words.extend(es().map(Monomial::generator));
                for b in bs() {
                    for e in es() {
                        words.push(Monomial::canonicalize(&[b, e]));
                    }
                }
            }
            HierarchyLevel::S2 => {
                words.extend(bs().map(Monomial::generator));
                words.extend(es().map(Monomial::generator));
                for b in bs() {
                    for b2 in bs() {
                        if b != b2 {
                            words.push(Monomial::canonicalize(&[b, b2]));
                        }
                    }
                }
                for e in es() {
                    for e2 in es() {
                        if e != e2 {
                            words.push(Monomial::canonicalize(&[e, e2]));
                        }
                    }
                }
                for b in bs() {
                    for e in es() {
                        words.push(Monomial::canonicalize(&[b, e]));
                    }
                }
            }
            HierarchyLevel::Custom(list) => {
                words.extend(list.iter().cloned());
            }
        }
        let mut seen = std::collections::HashSet::new();
        words.retain(|w| seen.insert(w.clone()));
        words
    }

    pub fn label(&self) -> String {
        match self {
            HierarchyLevel::S1 => "S1".into(),
            HierarchyLevel::S1AB => "S1+AB".into(),
            HierarchyLevel::S2 => "S2".into(),
            HierarchyLevel::Custom(words) => format!("custom({})", words.len()),
        }
    }
}

/// Expand a word that may reference outcome-1 operators into a signed sum of
/// canonical outcome-0 words: each (op, false) letter is the generator itself,
/// each (op, true) letter stands for 1 - op. Used to express completeness
/// consequences without introducing extra generators.
pub fn expand_outcome_one(letters: &[(Generator, bool)]) -> Vec<(Monomial, f64)> {
    let mut terms: Vec<(Vec<Generator>, f64)> = vec![(Vec::new(), 1.0)];
    for &(g, complemented) in letters {
        if complemented {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (word, coef) in terms {
                next.push((word.clone(), coef));
                let mut with = word;
                with.push(g);
                next.push((with, -coef));
            }
            terms = next;
        } else {
            for (word, _) in terms.iter_mut() {
                word.push(g);
            }
        }
    }
    let mut merged: std::collections::BTreeMap<Monomial, f64> = std::collections::BTreeMap::new();
    for (word, coef) in terms {
        *merged.entry(Monomial::canonicalize(&word)).or_insert(0.0) += coef;
    }
    merged.retain(|_, c| c.abs() > 0.0);
    merged.into_iter().collect()
}
