//! Binary words, local and global substitutions, and the constructive
//! reachability witness that makes every marginal chain irreducible.
//!
//! A global substitution acts coordinate-wise: the i-th input symbol is
//! either expanded (`e(x) = xx`) or modified (`m(x) = !x`), and the outputs
//! are concatenated. Only finite prefixes are ever represented; the first
//! `k` output symbols depend only on the first `k` input symbols, which is
//! what lets a finite prefix stand in for the one-sided infinite sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::Probability;

/// A binary digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol(u8);

impl Symbol {
    pub const ZERO: Symbol = Symbol(0);
    pub const ONE: Symbol = Symbol(1);

    pub fn new(value: u8) -> Result<Self> {
        match value {
            0 | 1 => Ok(Symbol(value)),
            v => Err(Error::InvalidParameter(format!("symbol must be 0 or 1, got {v}"))),
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn flip(self) -> Self {
        Symbol(self.0 ^ 1)
    }
}

impl From<bool> for Symbol {
    fn from(b: bool) -> Self {
        Symbol(b as u8)
    }
}

/// Finite binary word stored as packed bits (symbol 0 is the lowest bit of
/// the first block).
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    blocks: Vec<u64>,
    len: usize,
}

impl Word {
    pub fn new() -> Self {
        Word::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Word { blocks: Vec::with_capacity(bits.div_ceil(64)), len: 0 }
    }

    pub fn repeat(symbol: Symbol, len: usize) -> Self {
        let fill = if symbol == Symbol::ONE { u64::MAX } else { 0 };
        let mut w = Word { blocks: vec![fill; len.div_ceil(64)], len };
        w.clear_tail();
        w
    }

    pub fn zeros(len: usize) -> Self {
        Self::repeat(Symbol::ZERO, len)
    }

    pub fn ones(len: usize) -> Self {
        Self::repeat(Symbol::ONE, len)
    }

    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        let mut w = Word::new();
        for s in symbols {
            w.push(s);
        }
        w
    }

    /// Word of length `len` whose symbol 0 is the most significant bit of `index`.
    /// This is the ordering used to index marginal distributions.
    pub fn from_index(index: usize, len: usize) -> Self {
        Word::from_symbols((0..len).map(|i| Symbol::from((index >> (len - 1 - i)) & 1 == 1)))
    }

    /// Inverse of [`Word::from_index`]; requires `len() <= usize::BITS`.
    pub fn to_index(&self) -> usize {
        self.iter().fold(0usize, |acc, s| (acc << 1) | s.value() as usize)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> Option<Symbol> {
        (i < self.len).then(|| Symbol(((self.blocks[i / 64] >> (i % 64)) & 1) as u8))
    }

    pub fn push(&mut self, s: Symbol) {
        if self.len % 64 == 0 {
            self.blocks.push(0);
        }
        if s == Symbol::ONE {
            self.blocks[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.len).map(move |i| Symbol(((self.blocks[i / 64] >> (i % 64)) & 1) as u8))
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut out = self.clone();
        for s in other.iter() {
            out.push(s);
        }
        out
    }

    /// The first `n` symbols (or the whole word if it is shorter).
    pub fn prefix(&self, n: usize) -> Word {
        let n = n.min(self.len);
        let mut w = Word { blocks: self.blocks[..n.div_ceil(64)].to_vec(), len: n };
        w.clear_tail();
        w
    }

    /// `self ⊑ other`: `self` occurs as a prefix of `other`.
    pub fn is_prefix_of(&self, other: &Word) -> bool {
        self.len <= other.len && other.prefix(self.len) == *self
    }

    pub fn flip(&self) -> Word {
        let mut w = Word { blocks: self.blocks.iter().map(|b| !b).collect(), len: self.len };
        w.clear_tail();
        w
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.blocks.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.iter() {
            write!(f, "{}", s.0)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Symbol::ZERO),
                '1' => Ok(Symbol::ONE),
                c => Err(Error::InvalidParameter(format!("invalid symbol '{c}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word::from_symbols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubstitutionSymbol {
    Expansion,
    Modification,
}

impl SubstitutionSymbol {
    pub fn output_len(self) -> usize {
        match self {
            SubstitutionSymbol::Expansion => 2,
            SubstitutionSymbol::Modification => 1,
        }
    }

    fn letter(self) -> char {
        match self {
            SubstitutionSymbol::Expansion => 'e',
            SubstitutionSymbol::Modification => 'm',
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SubstitutionWord(Vec<SubstitutionSymbol>);

impl SubstitutionWord {
    pub fn new(symbols: Vec<SubstitutionSymbol>) -> Self {
        SubstitutionWord(symbols)
    }

    pub fn expansions(n: usize) -> Self {
        SubstitutionWord(vec![SubstitutionSymbol::Expansion; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[SubstitutionSymbol] {
        &self.0
    }

    pub fn count_expansions(&self, first: usize) -> usize {
        self.0.iter().take(first).filter(|s| **s == SubstitutionSymbol::Expansion).count()
    }

    /// Length of the output when applied to an input of length `input_len`.
    pub fn output_len(&self, input_len: usize) -> usize {
        input_len + self.count_expansions(input_len)
    }

    fn prepend(&self, s: SubstitutionSymbol) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(s);
        v.extend_from_slice(&self.0);
        SubstitutionWord(v)
    }
}

impl fmt::Display for SubstitutionWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.letter())?;
        }
        Ok(())
    }
}

impl fmt::Debug for SubstitutionWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubstitutionWord({self})")
    }
}

impl FromStr for SubstitutionWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'e' => Ok(SubstitutionSymbol::Expansion),
                'm' => Ok(SubstitutionSymbol::Modification),
                c => Err(Error::InvalidParameter(format!("invalid substitution '{c}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SubstitutionWord)
    }
}

pub fn apply_local(s: SubstitutionSymbol, x: Symbol) -> Word {
    match s {
        SubstitutionSymbol::Expansion => Word::from_symbols([x, x]),
        SubstitutionSymbol::Modification => Word::from_symbols([x.flip()]),
    }
}

/// Applies `s` coordinate-wise to `w`. Entries of `s` beyond `|w|` are unused.
pub fn apply_global(s: &SubstitutionWord, w: &Word) -> Result<Word> {
    if s.len() < w.len() {
        return Err(Error::LengthMismatch { subst: s.len(), input: w.len() });
    }
    let mut out = Word::with_capacity(2 * w.len());
    for (si, x) in s.0.iter().zip(w.iter()) {
        match si {
            SubstitutionSymbol::Expansion => {
                out.push(x);
                out.push(x);
            }
            SubstitutionSymbol::Modification => out.push(x.flip()),
        }
    }
    Ok(out)
}

/// Applies the witness steps in order. Before each step the current word is
/// cut to the step's length, which leaves every output prefix of that length
/// unchanged.
pub fn replay_witness(a: &Word, witness: &[SubstitutionWord]) -> Result<Word> {
    witness.iter().try_fold(a.clone(), |w, s| apply_global(s, &w.prefix(s.len())))
}

/// Substitution words that drive `a` to a word having `b` as a prefix.
///
/// Follows the two-stage construction: first push `a` to a word starting with
/// `0^(l+1)` (skipped when `a` already is that word), then build `b` from
/// `0^(l+1)` by induction on the length, deciding each leading symbol by the
/// parity of the number of steps.
pub fn reachability_witness(a: &Word, b: &Word) -> Result<Vec<SubstitutionWord>> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("|a| = {} but |b| = {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Dimension("words must be non-empty".into()));
    }
    let len = a.len();
    let mut witness = Vec::new();
    if *a != Word::zeros(len) {
        witness.extend(zeroing_stage(a));
    }
    witness.extend(build_from_zeros(b));
    Ok(witness)
}

fn zeroing_stage(a: &Word) -> Vec<SubstitutionWord> {
    let len = a.len();
    let first = if a.get(0) == Some(Symbol::ZERO) {
        SubstitutionWord::expansions(len)
    } else {
        SubstitutionWord::expansions(len - 1).prepend(SubstitutionSymbol::Modification)
    };
    // Each full expansion doubles the leading run of zeros; one step more
    // than the bare ceil(log2(len)) doublings.
    let doublings = ceil_log2(len) + 1;
    std::iter::once(first)
        .chain(std::iter::repeat(SubstitutionWord::expansions(len)).take(doublings))
        .collect()
}

fn build_from_zeros(c: &Word) -> Vec<SubstitutionWord> {
    use SubstitutionSymbol::{Expansion, Modification};
    let len = c.len();
    let lead = c.get(0).expect("non-empty word");
    if len == 1 {
        let s = if lead == Symbol::ZERO { Expansion } else { Modification };
        return vec![SubstitutionWord::new(vec![s])];
    }
    let tail = Word::from_symbols(c.iter().skip(1));
    let inner = build_from_zeros(&tail);
    // k + 1 = inner.len() modifications of the leading zero give parity (k + 1) mod 2.
    let k_even = (inner.len() - 1) % 2 == 0;
    let leading_one = lead == Symbol::ONE;
    let mut out = Vec::with_capacity(inner.len() + 1);
    if k_even != leading_one {
        // One extra leading negation; the rest of the zero block is expanded,
        // which keeps 0^l as the prefix of the tail.
        out.push(SubstitutionWord::expansions(len - 1).prepend(Modification));
    }
    out.extend(inner.iter().map(|s| s.prepend(Modification)));
    out
}

fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Parameters shared by the model computations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub p: Probability,
    pub precision: usize,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(p: Probability, precision: usize, seed: u64) -> Result<Self> {
        if precision < 53 {
            return Err(Error::InvalidParameter(format!("precision {precision} below 53 bits")));
        }
        Ok(ModelParams { p, precision, seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SubstitutionSymbol::{Expansion as E, Modification as M};

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }
    fn sw(s: &str) -> SubstitutionWord {
        s.parse().unwrap()
    }

    #[test]
    fn local_substitutions() {
        assert_eq!(apply_local(E, Symbol::ZERO), w("00"));
        assert_eq!(apply_local(M, Symbol::ONE), w("0"));
        assert_eq!(apply_local(M, Symbol::ZERO), w("1"));
    }

    #[test]
    fn global_substitutions() {
        // e(0) = 00, m(1) = 0
        assert_eq!(apply_global(&sw("em"), &w("01")).unwrap(), w("000"));
        assert_eq!(apply_global(&sw("em"), &w("00")).unwrap(), w("001"));
        assert_eq!(apply_global(&sw("mm"), &w("10")).unwrap(), w("01"));
        assert_eq!(apply_global(&sw("ee"), &w("11")).unwrap(), w("1111"));
        assert_eq!(
            apply_global(&sw("e"), &w("01")),
            Err(Error::LengthMismatch { subst: 1, input: 2 })
        );
    }

    #[test]
    fn symbol_rejects_non_binary() {
        assert!(Symbol::new(2).is_err());
        assert_eq!(Symbol::new(1).unwrap().flip(), Symbol::ZERO);
    }

    #[test]
    fn word_index_round_trip() {
        let word = w("1011");
        assert_eq!(word.to_index(), 0b1011);
        assert_eq!(Word::from_index(0b1011, 4), word);
        assert_eq!(Word::from_index(1, 3), w("001"));
    }

    #[test]
    fn packed_words_cross_block_boundaries() {
        let long = Word::ones(130);
        assert_eq!(long.iter().filter(|s| *s == Symbol::ONE).count(), 130);
        assert_eq!(long.flip(), Word::zeros(130));
        assert!(long.prefix(70).is_prefix_of(&long));
        assert_eq!(long.prefix(70).len(), 70);
    }

    #[test]
    fn small_witnesses() {
        assert_eq!(reachability_witness(&w("0"), &w("1")).unwrap(), vec![sw("m")]);
        assert_eq!(reachability_witness(&w("0"), &w("0")).unwrap(), vec![sw("e")]);
        let wit = reachability_witness(&w("10"), &w("01")).unwrap();
        assert!(w("01").is_prefix_of(&replay_witness(&w("10"), &wit).unwrap()));
        assert!(reachability_witness(&w("0"), &w("01")).is_err());
    }

    #[test]
    fn witness_first_stage_length() {
        // a != 0^(l+1): one seeding step plus ceil(log2(l+1)) + 1 doublings.
        let a = w("10110");
        let wit = reachability_witness(&a, &w("00000")).unwrap();
        let stage_two = build_from_zeros(&w("00000")).len();
        assert_eq!(wit.len() - stage_two, 1 + ceil_log2(5) + 1);
    }

    #[test]
    fn exhaustive_witnesses_up_to_length_5() {
        for len in 1..=5 {
            for ia in 0..(1 << len) {
                for ib in 0..(1 << len) {
                    let a = Word::from_index(ia, len);
                    let b = Word::from_index(ib, len);
                    let wit = reachability_witness(&a, &b).unwrap();
                    let out = replay_witness(&a, &wit).unwrap();
                    assert!(b.is_prefix_of(&out), "{a} -> {b}: got {out}");
                }
            }
        }
    }

    fn arb_word(max: usize) -> impl Strategy<Value = Word> {
        prop::collection::vec(any::<bool>(), 0..max)
            .prop_map(|v| Word::from_symbols(v.into_iter().map(Symbol::from)))
    }

    fn arb_subst(len: usize) -> impl Strategy<Value = SubstitutionWord> {
        prop::collection::vec(any::<bool>(), len)
            .prop_map(|v| SubstitutionWord::new(v.into_iter().map(|b| if b { E } else { M }).collect()))
    }

    proptest! {
        #[test]
        fn output_length_counts_expansions(word in arb_word(40), extra in 0usize..5, seed in any::<u64>()) {
            let s: SubstitutionWord = SubstitutionWord::new(
                (0..word.len() + extra).map(|i| if (seed >> (i % 64)) & 1 == 1 { E } else { M }).collect());
            let out = apply_global(&s, &word).unwrap();
            prop_assert_eq!(out.len(), word.len() + s.count_expansions(word.len()));
            prop_assert_eq!(out.len(), s.output_len(word.len()));
        }

        #[test]
        fn prefix_monotonicity((word, ext, s, s_ext) in (arb_word(20), arb_word(20)).prop_flat_map(|(a, b)| {
            let la = a.len();
            let lb = b.len();
            (Just(a), Just(b), arb_subst(la), arb_subst(lb))
        })) {
            let whole = word.concat(&ext);
            let long_s = SubstitutionWord::new(s.symbols().iter().chain(s_ext.symbols()).copied().collect());
            let short = apply_global(&s, &word).unwrap();
            let long = apply_global(&long_s, &whole).unwrap();
            prop_assert!(short.is_prefix_of(&long));
        }

        #[test]
        fn flip_equivariance((word, s) in arb_word(50).prop_flat_map(|a| { let l = a.len(); (Just(a), arb_subst(l)) })) {
            prop_assert_eq!(apply_global(&s, &word.flip()).unwrap(), apply_global(&s, &word).unwrap().flip());
        }

        #[test]
        fn concatenation_is_associative(a in arb_word(70), b in arb_word(70), c in arb_word(70)) {
            prop_assert_eq!(a.concat(&b).concat(&c), a.concat(&b.concat(&c)));
            prop_assert_eq!(a.concat(&Word::new()), a.clone());
            prop_assert_eq!(Word::new().concat(&a), a);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn witness_replay_reaches_target((a, b) in (1usize..=8).prop_flat_map(|l| (0usize..(1 << l), 0usize..(1 << l), Just(l)))
            .prop_map(|(ia, ib, l)| (Word::from_index(ia, l), Word::from_index(ib, l)))) {
            let wit = reachability_witness(&a, &b).unwrap();
            let out = replay_witness(&a, &wit).unwrap();
            prop_assert!(b.is_prefix_of(&out));
        }
    }
}
