use crate::error::{Error, Result};
use crate::text::{is_marker, tokenize};

/// Tokens dropped by the fusion baseline.
pub const FILLER_STOPLIST: &[&str] = &[
    "ah", "alright", "er", "hmm", "like", "mhm", "mm", "oh", "ok", "okay", "so", "uh", "uhm", "um", "well", "yeah",
];

fn strip_speaker(line: &str) -> &str {
    match line.split_once(':') {
        Some((head, rest)) if !head.is_empty() && head.chars().all(|c| c.is_ascii_alphabetic()) => rest,
        _ => line,
    }
}

/// Concatenates the utterances of a cluster in order after removing
/// `SPEAKER:` prefixes, speaker tags and stoplisted fillers. Consecutive
/// identical utterances are kept once and consecutive repeated tokens
/// collapse to one.
pub fn fusion_baseline_generate<S: AsRef<str>>(cluster: &[S]) -> Result<Vec<String>> {
    if cluster.is_empty() {
        return Err(Error::validation("fusion baseline needs a nonempty cluster"));
    }
    let mut out: Vec<String> = Vec::new();
    let mut last_utt: Option<Vec<String>> = None;
    for line in cluster {
        let toks: Vec<String> = tokenize(strip_speaker(line.as_ref()))
            .into_iter()
            .filter(|t| !is_marker(t) && !FILLER_STOPLIST.contains(&t.as_str()))
            .collect();
        if toks.is_empty() || last_utt.as_ref() == Some(&toks) {
            continue;
        }
        for t in &toks {
            if out.last() != Some(t) {
                out.push(t.clone());
            }
        }
        last_utt = Some(toks);
    }
    Ok(out)
}
