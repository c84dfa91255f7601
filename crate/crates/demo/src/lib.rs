//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes and returns plain strings so the page needs no
//! generated type glue beyond `wasm-bindgen`'s default output.

use wasm_bindgen::prelude::*;

use notegen::asr_sim::{corrupt_corpus, refined_soundex_encode, Lexicon};
use notegen::cluster::proximity_cluster;
use notegen::corpus::{AnnotatedRecord, Conversation, Note, Split, Utterance};
use notegen::metrics::Rouge;
use notegen::text::tokenize;

fn parse_indices(raw: &str) -> Result<Vec<usize>, String> {
    let mut v = raw
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("`{s}` is not an utterance index")))
        .collect::<Result<Vec<_>, _>>()?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

pub fn cluster_json(indices: &str, tau: usize) -> Result<String, String> {
    let clusters = proximity_cluster(&parse_indices(indices)?, tau);
    serde_json::to_string(&clusters).map_err(|e| e.to_string())
}

pub fn rouge_json(hypothesis: &str, reference: &str) -> Result<String, String> {
    let s = Rouge::score(&tokenize(hypothesis), &tokenize(reference));
    serde_json::to_string(&s).map_err(|e| e.to_string())
}

pub fn corrupt_json(text: &str, lexicon: &str, rate: f64, seed: u64) -> Result<String, String> {
    let lex = Lexicon::new(tokenize(lexicon));
    let record = AnnotatedRecord {
        conversation: Conversation { id: "demo".into(), utterances: vec![Utterance::new(0, "A", text)] },
        note: Note::default(),
        split: Split::Test,
    };
    let (out, report) = corrupt_corpus(&[record], rate, &lex, seed).map_err(|e| e.to_string())?;
    let codes: Vec<(String, String)> = tokenize(text)
        .into_iter()
        .filter_map(|w| refined_soundex_encode(&w).ok().map(|c| (w, c)))
        .collect();
    Ok(serde_json::json!({
        "text": out[0].conversation.utterances[0].text,
        "selected": report.selected,
        "replaced": report.replaced,
        "skipped": report.skipped,
        "codes": codes,
    })
    .to_string())
}

/// Clusters of comma-separated utterance indices, as a JSON array of arrays.
#[wasm_bindgen]
pub fn cluster(indices: &str, tau: usize) -> Result<String, JsError> {
    cluster_json(indices, tau).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rouge(hypothesis: &str, reference: &str) -> Result<String, JsError> {
    rouge_json(hypothesis, reference).map_err(|e| JsError::new(&e))
}

/// Replaces a fraction of the words in `text` by phonetic neighbours drawn
/// from the words of `lexicon`.
#[wasm_bindgen]
pub fn corrupt(text: &str, lexicon: &str, rate: f64, seed: u64) -> Result<String, JsError> {
    corrupt_json(text, lexicon, rate, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_from_text() {
        assert_eq!(cluster_json("9, 1 2 5", 2).unwrap(), "[[1,2,5],[9]]");
        assert!(cluster_json("1,x", 0).is_err());
    }

    #[test]
    fn rouge_identity() {
        let v: serde_json::Value = serde_json::from_str(&rouge_json("a b c", "a b c").unwrap()).unwrap();
        assert_eq!(v["r1"]["f1"], 1.0);
        assert_eq!(v["rl"]["f1"], 1.0);
    }

    #[test]
    fn corrupt_full_rate() {
        let v: serde_json::Value =
            serde_json::from_str(&corrupt_json("fever and rash", "fever river rash rush", 1.0, 1).unwrap()).unwrap();
        assert_eq!(v["selected"], 3);
        assert_eq!(v["codes"][0][1], "f20209");
    }
}
