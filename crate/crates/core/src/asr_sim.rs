//! Speech-recognition noise: words are swapped for lexicon words whose
//! Refined Soundex codes are exactly one edit apart.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedRecord, Utterance};
use crate::error::{Error, Result};
use crate::text::{detokenize, is_word};

fn refined_code(c: char) -> char {
    match c {
        'b' | 'p' => '1',
        'f' | 'v' => '2',
        'c' | 'k' | 's' => '3',
        'g' | 'j' => '4',
        'q' | 'x' | 'z' => '5',
        'd' | 't' => '6',
        'l' => '7',
        'm' | 'n' => '8',
        'r' => '9',
        _ => '0',
    }
}

/// Refined Soundex: the first letter, then the digit class of every letter
/// (the first included) with adjacent repeats collapsed. No truncation.
/// Non-letters are dropped before encoding.
pub fn refined_soundex_encode(word: &str) -> Result<String> {
    let letters: Vec<char> = word
        .chars()
        .filter(char::is_ascii_alphabetic)
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let Some(&first) = letters.first() else {
        return Err(Error::validation(format!("`{word}` has no letters to encode")));
    };
    let mut code = String::with_capacity(letters.len() + 1);
    code.push(first);
    let mut prev = None;
    for c in letters {
        let d = refined_code(c);
        if Some(d) != prev {
            code.push(d);
            prev = Some(d);
        }
    }
    Ok(code)
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between the two words' Refined Soundex codes.
pub fn phonetic_distance(a: &str, b: &str) -> Result<usize> {
    Ok(levenshtein(&refined_soundex_encode(a)?, &refined_soundex_encode(b)?))
}

/// Candidate replacement words with their codes precomputed.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<(String, String)>,
}

impl Lexicon {
    /// Unique encodable words, sorted.
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| is_word(w))
            .collect();
        let entries = set
            .into_iter()
            .filter_map(|w| refined_soundex_encode(&w).ok().map(|c| (w, c)))
            .collect();
        Lexicon { entries }
    }

    /// Every alphabetic token of the training conversations and notes.
    pub fn from_records(records: &[AnnotatedRecord]) -> Self {
        Self::new(records.iter().flat_map(|r| {
            r.conversation
                .utterances
                .iter()
                .flat_map(|u| u.tokens.iter())
                .chain(r.note.sentences.iter().flat_map(|s| s.tokens.iter()))
                .cloned()
                .collect::<Vec<_>>()
        }))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }
}

/// Lexicon words other than `word` at phonetic distance exactly 1, in
/// lexicographic order. Unencodable words have no candidates.
pub fn candidate_set(word: &str, lexicon: &Lexicon) -> Vec<String> {
    let Ok(code) = refined_soundex_encode(word) else {
        return Vec::new();
    };
    lexicon
        .entries
        .iter()
        .filter(|(w, c)| w != word && levenshtein(&code, c) == 1)
        .map(|(w, _)| w.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CorruptionReport {
    /// Alphabetic tokens across all conversations.
    pub words: usize,
    pub selected: usize,
    pub replaced: usize,
    /// Selected words left alone because they have no candidates.
    pub skipped: usize,
}

impl CorruptionReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("words\tselected\treplaced\tskipped\n");
        let _ = writeln!(out, "{}\t{}\t{}\t{}", self.words, self.selected, self.replaced, self.skipped);
        out
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// RNG seed of one conversation: the run seed mixed with an FNV-1a hash of its id.
pub fn conversation_seed(seed: u64, id: &str) -> u64 {
    seed ^ fnv1a(id).rotate_left(17)
}

/// Replaces `round(rate * words)` uniformly chosen words of every
/// conversation with a random phonetic neighbour from `lexicon`. Notes are
/// untouched.
pub fn corrupt_corpus(records: &[AnnotatedRecord], rate: f64, lexicon: &Lexicon, seed: u64) -> Result<(Vec<AnnotatedRecord>, CorruptionReport)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::validation(format!("corruption rate {rate} is outside [0, 1]")));
    }
    let mut cache: HashMap<String, Vec<String>> = HashMap::new();
    let mut report = CorruptionReport::default();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let mut rec = r.clone();
        let positions: Vec<(usize, usize)> = rec
            .conversation
            .utterances
            .iter()
            .enumerate()
            .flat_map(|(u, utt)| {
                utt.tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| is_word(t))
                    .map(move |(k, _)| (u, k))
            })
            .collect();
        report.words += positions.len();
        let n_select = ((rate * positions.len() as f64).round() as usize).min(positions.len());
        report.selected += n_select;
        let mut rng = ChaCha8Rng::seed_from_u64(conversation_seed(seed, rec.id()));
        let mut chosen = sample(&mut rng, positions.len(), n_select).into_vec();
        chosen.sort_unstable();
        let mut touched = BTreeSet::new();
        for p in chosen {
            let (u, k) = positions[p];
            let word = rec.conversation.utterances[u].tokens[k].clone();
            let cands = cache.entry(word.clone()).or_insert_with(|| candidate_set(&word, lexicon));
            if cands.is_empty() {
                report.skipped += 1;
                continue;
            }
            let pick = cands[rng.gen_range(0..cands.len())].clone();
            rec.conversation.utterances[u].tokens[k] = pick;
            touched.insert(u);
            report.replaced += 1;
        }
        for u in touched {
            let utt = &rec.conversation.utterances[u];
            rec.conversation.utterances[u] = Utterance::new(utt.index, utt.speaker.clone(), detokenize(&utt.tokens));
        }
        out.push(rec);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain recursive edit distance.
    fn edit_oracle(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = edit_oracle(ra, rb) + usize::from(x != y);
                sub.min(edit_oracle(ra, b) + 1).min(edit_oracle(a, rb) + 1)
            }
        }
    }

    #[test]
    fn collapse_and_single_letter() {
        assert_eq!(refined_soundex_encode("pp").unwrap(), "p1");
        assert_eq!(refined_soundex_encode("a").unwrap(), "a0");
        assert_eq!(refined_soundex_encode("A-1!").unwrap(), "a0");
        assert!(refined_soundex_encode("123").is_err());
    }

    #[test]
    fn hand_encoded_fixture() {
        // Letter classes written out by hand per the table above.
        let fixture = [
            ("headache", "h06030"),  // 0 0 0 6 0 3 0 0
            ("cough", "c3040"),      // 3 0 0 4 0
            ("aspirin", "a0310908"), // 0 3 1 0 9 0 8
            ("fever", "f20209"),     // 2 0 2 0 9
            ("nausea", "n8030"),     // 8 0 0 3 0 0
            ("rash", "r9030"),       // 9 0 3 0
            ("blood", "b1706"),      // 1 7 0 0 6
            ("pressure", "p1903090"), // 1 9 0 3 3 0 9 0
            ("migraine", "m8049080"), // 8 0 4 9 0 0 8 0
            ("insulin", "i0830708"), // 0 8 3 0 7 0 8
        ];
        for (w, code) in fixture {
            assert_eq!(refined_soundex_encode(w).unwrap(), code, "{w}");
        }
    }

    #[test]
    fn distances_match_oracle() {
        let words = ["cough", "coughs", "rash", "rush", "fever", "fevers", "pain", "pan", "blood", "flood"];
        for a in words {
            for b in words {
                let ca = refined_soundex_encode(a).unwrap();
                let cb = refined_soundex_encode(b).unwrap();
                assert_eq!(phonetic_distance(a, b).unwrap(), edit_oracle(ca.as_bytes(), cb.as_bytes()));
            }
        }
        assert_eq!(phonetic_distance("cough", "cough").unwrap(), 0);
        assert_eq!(phonetic_distance("cough", "coughs").unwrap(), 1);
        assert_eq!(phonetic_distance("pain", "pan").unwrap(), 0);
    }

    #[test]
    fn metric_properties_on_fixture() {
        let words = ["cough", "coughs", "rash", "rush", "fever", "pain", "blood", "flood", "aspirin"];
        for a in words {
            for b in words {
                let ab = phonetic_distance(a, b).unwrap();
                assert_eq!(ab, phonetic_distance(b, a).unwrap());
                for c in words {
                    assert!(ab <= phonetic_distance(a, c).unwrap() + phonetic_distance(c, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn candidates_match_brute_force() {
        let words = [
            "cough", "coughs", "rash", "rashes", "fever", "fevers", "pain", "pains", "pan", "blood", "bloods",
            "flood", "aspirin", "aspirins", "dog", "dogs", "cat", "cats", "hat", "head",
        ];
        let lex = Lexicon::new(words);
        for w in words {
            let expected: Vec<String> = {
                let mut v: Vec<String> = words
                    .iter()
                    .filter(|&&o| o != w && phonetic_distance(w, o).unwrap() == 1)
                    .map(|s| s.to_string())
                    .collect();
                v.sort();
                v
            };
            assert_eq!(candidate_set(w, &lex), expected, "{w}");
        }
        assert!(candidate_set("cough", &Lexicon::new(["cough"])).is_empty());
        assert!(candidate_set("zzzzqqq", &Lexicon::new(["a", "b"])).is_empty());
    }

    #[test]
    fn levenshtein_small_cases() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }
}
