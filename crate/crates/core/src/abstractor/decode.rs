use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Seq2SeqModel, Vocabulary};

/// Output length bounds in tokens (headers included, end marker excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBounds {
    pub min: usize,
    pub max: usize,
}

impl LengthBounds {
    /// 5th and 95th nearest-rank percentiles of the target lengths.
    pub fn from_targets(lengths: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = lengths.into_iter().collect();
        if v.is_empty() {
            return Err(Error::validation("length bounds need at least one target"));
        }
        v.sort_unstable();
        let rank = |p: f64| {
            let k = (p / 100.0 * v.len() as f64).ceil() as usize;
            v[k.clamp(1, v.len()) - 1]
        };
        Ok(LengthBounds { min: rank(5.0), max: rank(95.0).max(1) })
    }
}

#[derive(Debug, Clone)]
struct Hyp {
    tokens: Vec<usize>,
    logp: f64,
    state: Vec<f64>,
    coverage: Vec<f64>,
    cursor: usize,
    prev: usize,
}

struct Rules<'a> {
    headers: Option<&'a [usize]>,
    min: usize,
    max: usize,
    vocab: &'a Vocabulary,
}

impl Rules<'_> {
    fn expected(&self, h: &Hyp) -> Option<usize> {
        self.headers.and_then(|hs| hs.get(h.cursor).copied())
    }

    /// The next header when the remaining budget only fits the headers
    /// still owed, or when nothing has been emitted yet.
    fn forced(&self, h: &Hyp) -> Option<usize> {
        let hs = self.headers?;
        let e = self.expected(h)?;
        let owed = hs.len() - h.cursor;
        (h.tokens.is_empty() || self.max - h.tokens.len() <= owed).then_some(e)
    }

    fn allowed(&self, h: &Hyp, tok: usize) -> bool {
        if tok == Vocabulary::PAD || tok == Vocabulary::START {
            return false;
        }
        let owed = self.expected(h).is_some();
        if tok == Vocabulary::END {
            return owed || h.tokens.len() >= self.min;
        }
        if self.vocab.is_header(tok) {
            return owed;
        }
        true
    }

    /// A wrong header or a premature end becomes the next expected header.
    fn replace(&self, h: &Hyp, tok: usize) -> usize {
        match self.expected(h) {
            Some(e) if tok == Vocabulary::END || self.vocab.is_header(tok) => e,
            _ => tok,
        }
    }
}

fn header_ids(model: &Seq2SeqModel, headers: Option<&[String]>) -> Result<Option<Vec<usize>>> {
    headers
        .map(|hs| {
            hs.iter()
                .map(|h| {
                    model
                        .vocab
                        .get(h)
                        .filter(|&id| model.vocab.is_header(id))
                        .ok_or_else(|| Error::validation(format!("`{h}` is not a header of this model")))
                })
                .collect()
        })
        .transpose()
}

/// Length-bounded beam search. With `headers`, every header is emitted
/// exactly once in the given order: wrong headers and early end markers are
/// replaced by the next expected header, and headers are forced once the
/// remaining length budget only fits them. Without `headers`, header tokens
/// are never emitted. Hypotheses are ranked by mean log-probability per
/// token.
pub fn beam_search(
    model: &Seq2SeqModel,
    input: &[String],
    section: Option<usize>,
    beam_size: usize,
    bounds: LengthBounds,
    headers: Option<&[String]>,
) -> Result<Vec<String>> {
    let beam = beam_size.max(1);
    let enc = model.encode_input(input, section)?;
    let header_ids = header_ids(model, headers)?;
    let n_headers = header_ids.as_ref().map_or(0, Vec::len);
    let max = bounds.max.max(n_headers).max(1);
    let rules = Rules { headers: header_ids.as_deref(), min: bounds.min.min(max), max, vocab: &model.vocab };
    let mut live = vec![Hyp {
        tokens: Vec::new(),
        logp: 0.0,
        state: enc.initial_state().to_vec(),
        coverage: vec![0.0; enc.states().len()],
        cursor: 0,
        prev: Vocabulary::START,
    }];
    let mut done: Vec<Hyp> = Vec::new();
    while !live.is_empty() && done.len() < beam {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        let mut outs = Vec::with_capacity(live.len());
        for (hi, h) in live.iter().enumerate() {
            let out = model.decode_step(&enc, &h.state, h.prev, &h.coverage)?;
            let lp = |id: usize| out.dist[id].max(1e-300).ln();
            if let Some(e) = rules.forced(h) {
                cands.push((h.logp + lp(e), hi, e));
            } else {
                let mut scored: Vec<(f64, usize)> = (0..out.dist.len()).filter(|&t| rules.allowed(h, t)).map(|t| (lp(t), t)).collect();
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(l, t) in scored.iter().take(beam) {
                    cands.push((h.logp + l, hi, rules.replace(h, t)));
                }
            }
            outs.push(out);
        }
        cands.sort_by(|a, b| (a.1, a.2).cmp(&(b.1, b.2)).then(b.0.total_cmp(&a.0)));
        cands.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut next = Vec::new();
        for (score, hi, tok) in cands {
            if next.len() + done.len() >= beam {
                break;
            }
            let h = &live[hi];
            let out = &outs[hi];
            if tok == Vocabulary::END {
                done.push(Hyp { logp: score, ..h.clone() });
                continue;
            }
            let mut tokens = h.tokens.clone();
            tokens.push(tok);
            let coverage = h.coverage.iter().zip(&out.attention).map(|(c, a)| c + a).collect();
            let hyp = Hyp {
                tokens,
                logp: score,
                state: out.state.clone(),
                coverage,
                cursor: h.cursor + usize::from(model.vocab.is_header(tok)),
                prev: tok,
            };
            if hyp.tokens.len() >= max {
                done.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
    }
    let norm = |h: &Hyp| h.logp / (h.tokens.len() + 1) as f64;
    let best = done
        .iter()
        .fold(None::<&Hyp>, |b, h| match b {
            Some(b) if norm(b) >= norm(h) => Some(b),
            _ => Some(h),
        })
        .ok_or_else(|| Error::Runtime("beam search produced no hypothesis".into()))?;
    Ok(best.tokens.iter().map(|&id| enc.token(model, id).to_string()).collect())
}

/// Argmax decoding under the same masks as `beam_search`.
pub fn greedy_decode(
    model: &Seq2SeqModel,
    input: &[String],
    section: Option<usize>,
    bounds: LengthBounds,
    headers: Option<&[String]>,
) -> Result<Vec<String>> {
    let enc = model.encode_input(input, section)?;
    let header_ids = header_ids(model, headers)?;
    let n_headers = header_ids.as_ref().map_or(0, Vec::len);
    let max = bounds.max.max(n_headers).max(1);
    let rules = Rules { headers: header_ids.as_deref(), min: bounds.min.min(max), max, vocab: &model.vocab };
    let mut h = Hyp {
        tokens: Vec::new(),
        logp: 0.0,
        state: enc.initial_state().to_vec(),
        coverage: vec![0.0; enc.states().len()],
        cursor: 0,
        prev: Vocabulary::START,
    };
    while h.tokens.len() < max {
        let out = model.decode_step(&enc, &h.state, h.prev, &h.coverage)?;
        let tok = match rules.forced(&h) {
            Some(e) => e,
            None => {
                let mut best = None::<usize>;
                for t in (0..out.dist.len()).filter(|&t| rules.allowed(&h, t)) {
                    if best.is_none_or(|b| out.dist[t] > out.dist[b]) {
                        best = Some(t);
                    }
                }
                rules.replace(&h, best.unwrap_or(Vocabulary::END))
            }
        };
        if tok == Vocabulary::END {
            break;
        }
        h.tokens.push(tok);
        h.cursor += usize::from(model.vocab.is_header(tok));
        for (c, a) in h.coverage.iter_mut().zip(&out.attention) {
            *c += a;
        }
        h.state = out.state;
        h.prev = tok;
    }
    Ok(h.tokens.iter().map(|&id| enc.token(model, id).to_string()).collect())
}
