//! String-keyed reference implementation of the interpolated Witten-Bell
//! model, shared by the n-gram tests and the acceptance suite.

use std::collections::HashMap;

use athena_core::ngram::DEFAULT_P_FLOOR;
use athena_core::segmenter::WordSequence;

pub const START: &str = "<s>";

pub fn seqs(sentences: &[&[&str]]) -> Vec<WordSequence> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| WordSequence::from_strs(&format!("s{i}"), s).unwrap())
        .collect()
}

/// Independent string-keyed recount: `(history..., word) -> count` per order.
pub fn brute_counts(sentences: &[&[&str]], h: usize) -> Vec<HashMap<Vec<String>, u64>> {
    let mut tables = vec![HashMap::new(); h + 1];
    for s in sentences {
        let padded: Vec<String> = std::iter::repeat_n(START.to_string(), h)
            .chain(s.iter().map(|w| w.to_string()))
            .collect();
        for i in h..padded.len() {
            for (order, table) in tables.iter_mut().enumerate() {
                let gram = padded[i - order..=i].to_vec();
                *table.entry(gram).or_insert(0u64) += 1;
            }
        }
    }
    tables
}

/// Direct evaluation of the interpolated Witten-Bell recursion from raw
/// string counts, with unknown words sharing the leftover unigram-level mass.
pub struct Oracle {
    tables: Vec<HashMap<Vec<String>, u64>>,
    alphabet: u64,
    floor: f64,
}

impl Oracle {
    pub fn new(sentences: &[&[&str]], h: usize) -> Self {
        let len = sentences[0][0].len();
        Oracle {
            tables: brute_counts(sentences, h),
            alphabet: 4u64.pow(len as u32),
            floor: DEFAULT_P_FLOOR,
        }
    }

    pub fn p(&self, word: &str, history: &[&str]) -> f64 {
        let vocab: Vec<&Vec<String>> = self.tables[0].keys().collect();
        let v = vocab.len() as f64;
        let unseen = self.alphabet - vocab.len() as u64;
        let known = self.tables[0].contains_key(&vec![word.to_string()]);
        let n: u64 = self.tables[0].values().sum();
        let c = |gram: Vec<String>, order: usize| -> f64 {
            if known {
                *self.tables[order].get(&gram).unwrap_or(&0) as f64
            } else {
                0.0
            }
        };
        let uniform = 1.0 / (v + if unseen > 0 { 1.0 } else { 0.0 });
        let mut p = (c(vec![word.to_string()], 0) + v * uniform) / (n as f64 + v);
        let h = self.tables.len() - 1;
        let usable = history.len().min(h);
        for order in 1..=usable {
            let ctx: Vec<String> = history[history.len() - order..].iter().map(|s| s.to_string()).collect();
            let (mut total, mut distinct) = (0u64, 0u64);
            for (gram, &cnt) in &self.tables[order] {
                if gram[..order] == ctx[..] {
                    total += cnt;
                    distinct += 1;
                }
            }
            if total == 0 {
                continue;
            }
            let mut gram = ctx.clone();
            gram.push(word.to_string());
            p = (c(gram, order) + distinct as f64 * p) / (total + distinct) as f64;
        }
        if !known {
            p /= unseen.max(1) as f64;
        }
        p.max(self.floor)
    }

    pub fn perplexity(&self, sentences: &[&[&str]]) -> f64 {
        let h = self.tables.len() - 1;
        let mut product = 1.0f64;
        let mut m = 0;
        // Product form, rescaled per sentence to stay in range.
        let mut log_acc = 0.0;
        for s in sentences {
            let mut history: Vec<&str> = vec![START; h];
            for w in s.iter() {
                product *= self.p(w, &history);
                m += 1;
                history.push(w);
                history.remove(0);
            }
            log_acc += product.ln();
            product = 1.0;
        }
        (-log_acc / m as f64).exp()
    }
}
