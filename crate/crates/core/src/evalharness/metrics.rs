use std::collections::{BTreeSet, HashMap};

/// The BLEU variant used throughout; written into every report and dump.
pub const BLEU_DEFINITION: &str = "bleu-4: lowercased whitespace tokens; clipped n-gram precision for n=1..4; \
a zero precision for n>=2 becomes 1/(candidate n-grams+1), an order with no candidate n-grams counts as 1; \
zero unigram matches or an empty candidate score 0; geometric mean times brevity penalty exp(1-r/c) when c<r";

pub const IOU_DEFINITION: &str = "token-set iou over lowercased whitespace tokens; two empty texts score 1";

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU-4, see [`BLEU_DEFINITION`].
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let total = cand.len().saturating_sub(n - 1);
        let ref_counts = ngram_counts(&refr, n);
        let matches: usize = ngram_counts(&cand, n)
            .iter()
            .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if total == 0 {
            1.0
        } else if matches == 0 {
            if n == 1 {
                return 0.0;
            }
            1.0 / (total as f64 + 1.0)
        } else {
            matches as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    brevity * (log_sum / 4.0).exp()
}

pub fn text_iou(candidate: &str, reference: &str) -> f64 {
    let a: BTreeSet<String> = tokenize(candidate).into_iter().collect();
    let b: BTreeSet<String> = tokenize(reference).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}
