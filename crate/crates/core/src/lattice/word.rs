//! Freely reduced words in a free group on named generators.
//!
//! A letter stores `2·k` for generator `k` and `2·k + 1` for its inverse.
//! Generators are written with one uppercase ASCII letter and inverses with
//! the matching lowercase letter; the empty word prints as `e`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(pub u8);

impl Letter {
    pub fn new(generator: usize, inverse: bool) -> Self {
        Letter((generator * 2 + usize::from(inverse)) as u8)
    }

    pub fn generator(self) -> usize {
        usize::from(self.0 / 2)
    }

    pub fn is_inverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn inverse(self) -> Self {
        Letter(self.0 ^ 1)
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn to_char(self) -> char {
        // X and Y name the first two generators; later ones use A, B, ...
        let upper = match self.generator() {
            0 => b'X',
            1 => b'Y',
            k => b'A' + (k as u8 - 2),
        };
        if self.is_inverse() {
            (upper as char).to_ascii_lowercase()
        } else {
            upper as char
        }
    }

    pub fn from_char(ch: char) -> Option<Self> {
        let up = ch.to_ascii_uppercase();
        let generator = match up {
            'X' => 0,
            'Y' => 1,
            'A'..='W' => usize::from(up as u8 - b'A') + 2,
            _ => return None,
        };
        Some(Letter::new(generator, ch.is_ascii_lowercase()))
    }
}

/// A freely reduced word.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut w = Word::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "e" || s.is_empty() {
            return Ok(Word::identity());
        }
        let letters = s
            .chars()
            .map(|c| Letter::from_char(c).ok_or_else(|| Error::Parse(format!("bad letter {c:?} in word {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Word::from_letters(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Right-multiply by a letter, cancelling if possible. Returns `true` when
    /// the letter was appended and `false` when it cancelled.
    pub fn push(&mut self, l: Letter) -> bool {
        if self.0.last() == Some(&l.inverse()) {
            self.0.pop();
            false
        } else {
            self.0.push(l);
            true
        }
    }

    pub fn pop(&mut self) -> Option<Letter> {
        self.0.pop()
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut w = self.clone();
        for &l in &other.0 {
            w.push(l);
        }
        w
    }

    /// Cyclically reduced core of the word.
    pub fn cyclic_reduce(&self) -> Self {
        let v = &self.0;
        let (mut i, mut j) = (0, v.len());
        while j - i >= 2 && v[i] == v[j - 1].inverse() {
            i += 1;
            j -= 1;
        }
        Word(v[i..j].to_vec())
    }

    /// Lexicographically least rotation of the cyclic reduction; two words are
    /// conjugate exactly when these agree.
    pub fn conjugacy_representative(&self) -> Self {
        let core = self.cyclic_reduce();
        let n = core.0.len();
        if n == 0 {
            return core;
        }
        let doubled: Vec<Letter> = core.0.iter().chain(core.0.iter()).copied().collect();
        let start = least_rotation(&doubled, n);
        Word(doubled[start..start + n].to_vec())
    }

    /// `true` when the word is conjugate to `u^k` for some `k ≥ 2`.
    pub fn is_proper_power(&self) -> bool {
        let core = self.cyclic_reduce();
        let n = core.0.len();
        (1..n).filter(|p| n.is_multiple_of(*p)).any(|p| (p..n).all(|k| core.0[k] == core.0[k - p]))
    }
}

/// Booth's algorithm over the doubled sequence.
fn least_rotation(s: &[Letter], n: usize) -> usize {
    let mut f = vec![usize::MAX; s.len()];
    let mut k = 0usize;
    for j in 1..s.len() {
        let sj = s[j];
        let mut i = f[j - k - 1];
        while i != usize::MAX && sj != s[k + i + 1] {
            if sj < s[k + i + 1] {
                k = j - i - 1;
            }
            i = f[i];
        }
        if i == usize::MAX && sj != s[k] {
            if sj < s[k] {
                k = j;
            }
            f[j - k] = usize::MAX;
        } else {
            f[j - k] = if i == usize::MAX { 0 } else { i + 1 };
        }
    }
    k % n
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("e");
        }
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl std::str::FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Word::parse(s)
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}
