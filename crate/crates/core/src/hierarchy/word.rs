//! Operator words and their canonical forms.
//!
//! A letter is the projector `E_{a|x}` with outcome `a < n_o`. Bob's
//! settings are shifted by `n_s`, so a single setting index `1..=2 n_s`
//! also identifies the party.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    /// Setting in `1..=2 n_s`; values above `n_s` belong to Bob.
    pub x: u16,
    /// Outcome in `1..n_o`.
    pub a: u16,
}

impl Letter {
    pub fn new(x: usize, a: usize) -> Self {
        Self { x: x as u16, a: a as u16 }
    }

    pub fn is_bob(&self, n_s: usize) -> bool {
        self.x as usize > n_s
    }
}

pub type Word = Vec<Letter>;

/// Projector reduction of adjacent letters: `E E = E`, and `E_{a|x} E_{a'|x} = 0`
/// for `a != a'`. Returns `None` for the zero operator.
pub fn reduce(word: &[Letter]) -> Option<Word> {
    let mut out: Word = Vec::with_capacity(word.len());
    for &l in word {
        match out.last() {
            Some(top) if top.x == l.x => {
                if top.a != l.a {
                    return None;
                }
            }
            _ => out.push(l),
        }
    }
    Some(out)
}

pub fn reversed(word: &[Letter]) -> Word {
    word.iter().rev().copied().collect()
}

/// Canonical key of a moment when Alice and Bob commute: each party's
/// letters are reduced separately, Alice first, and a word is identified
/// with its adjoint.
pub fn commuting_key(word: &[Letter], n_s: usize) -> Option<Word> {
    let a: Word = word.iter().filter(|l| !l.is_bob(n_s)).copied().collect();
    let b: Word = word.iter().filter(|l| l.is_bob(n_s)).copied().collect();
    let a = reduce(&a)?;
    let b = reduce(&b)?;
    let mut fwd = a.clone();
    fwd.extend_from_slice(&b);
    let mut back = reversed(&a);
    back.extend(reversed(&b));
    Some(fwd.min(back))
}

/// Canonical key of a moment under a tracial functional: projector reduction,
/// then reduction across the cyclic seam, then the least rotation of the
/// word or its reverse.
pub fn cyclic_key(word: &[Letter]) -> Option<Word> {
    let mut w = reduce(word)?;
    while w.len() >= 2 {
        let (first, last) = (w[0], w[w.len() - 1]);
        if first.x != last.x {
            break;
        }
        if first.a != last.a {
            return None;
        }
        w.pop();
    }
    let n = w.len();
    if n <= 1 {
        return Some(w);
    }
    let rev = reversed(&w);
    let mut best: Option<Word> = None;
    for base in [&w, &rev] {
        for k in 0..n {
            let cand: Word = base[k..].iter().chain(&base[..k]).copied().collect();
            if best.as_ref().map_or(true, |b| cand < *b) {
                best = Some(cand);
            }
        }
    }
    best
}

/// All words of exactly `len` letters drawn from settings `settings` with
/// no two adjacent letters sharing a setting, in lexicographic order.
pub fn words_of_length(settings: &[usize], n_o: usize, len: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &out {
            for &x in settings {
                if w.last().map_or(false, |l: &Letter| l.x as usize == x) {
                    continue;
                }
                for a in 1..n_o {
                    let mut nw = w.clone();
                    nw.push(Letter::new(x, a));
                    next.push(nw);
                }
            }
        }
        out = next;
    }
    out
}

/// Sort key in which the first letter's outcome varies fastest, then its
/// setting, then the second letter's outcome, and so on.
pub fn first_letter_fastest(word: &[Letter]) -> Vec<(u16, u16)> {
    word.iter().rev().map(|l| (l.x, l.a)).collect()
}

/// Human-readable label, e.g. `A1|2 B1|1`; the identity is `1`.
pub struct Label<'a>(pub &'a [Letter], pub usize);

impl fmt::Display for Label<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            if l.is_bob(self.1) {
                write!(f, "B{}|{}", l.a, l.x as usize - self.1)?;
            } else {
                write!(f, "A{}|{}", l.a, l.x)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(spec: &[(usize, usize)]) -> Word {
        spec.iter().map(|&(x, a)| Letter::new(x, a)).collect()
    }

    #[test]
    fn projector_rules() {
        assert_eq!(reduce(&w(&[(1, 1), (1, 1), (2, 1)])), Some(w(&[(1, 1), (2, 1)])));
        assert_eq!(reduce(&w(&[(1, 1), (1, 2)])), None);
        assert_eq!(reduce(&w(&[(1, 1), (2, 1), (1, 1)])), Some(w(&[(1, 1), (2, 1), (1, 1)])));
    }

    #[test]
    fn commuting_parties() {
        // n_s = 2: settings 3, 4 are Bob's.
        let k = commuting_key(&w(&[(1, 1), (3, 1), (1, 1)]), 2).unwrap();
        assert_eq!(k, w(&[(1, 1), (3, 1)]));
        assert_eq!(commuting_key(&w(&[(1, 1), (3, 1), (1, 2)]), 2), None);
        // Adjoint identification.
        let a = commuting_key(&w(&[(1, 1), (2, 1)]), 2).unwrap();
        let b = commuting_key(&w(&[(2, 1), (1, 1)]), 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cyclic_rules() {
        let a = cyclic_key(&w(&[(1, 1), (3, 1), (2, 1)])).unwrap();
        let b = cyclic_key(&w(&[(3, 1), (2, 1), (1, 1)])).unwrap();
        let c = cyclic_key(&w(&[(2, 1), (3, 1), (1, 1)])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(cyclic_key(&w(&[(1, 1), (2, 1), (1, 1)])).unwrap(), w(&[(1, 1), (2, 1)]));
        assert_eq!(cyclic_key(&w(&[(1, 1), (2, 1), (1, 2)])), None);
        assert_eq!(cyclic_key(&[]).unwrap(), Vec::<Letter>::new());
    }

    #[test]
    fn counts_of_local_words() {
        // n_s (n_s - 1)^(j-1) (n_o - 1)^j
        assert_eq!(words_of_length(&[1, 2, 3], 4, 2).len(), 3 * 2 * 9);
        assert_eq!(words_of_length(&[1, 2], 3, 3).len(), 2 * 1 * 8);
        assert_eq!(words_of_length(&[1], 5, 2).len(), 0);
    }

    #[test]
    fn labels() {
        assert_eq!(Label(&w(&[(1, 2), (4, 1)]), 2).to_string(), "A2|1 B1|2");
        assert_eq!(Label(&[], 2).to_string(), "1");
    }
}
