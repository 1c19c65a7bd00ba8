use athena_core::injector::{generate_genome, inject_substitution, sample_clean_reads};
use athena_core::ngram::{self, NgramCounts, NgramModel, Token, DEFAULT_P_FLOOR};
use athena_core::rng;
use athena_core::segmenter::{segment_corpus, Word, WordSequence};
use athena_core::{Read, ReadSet};
use proptest::prelude::*;

#[path = "support/oracle.rs"]
mod oracle;

use oracle::{brute_counts, seqs, Oracle, START};

fn tokens(history: &[&str]) -> Vec<Token> {
    history
        .iter()
        .map(|s| {
            if *s == START {
                Token::Start
            } else {
                Token::Word(Word::encode(s.as_bytes()).unwrap())
            }
        })
        .collect()
}

const TOY3: &[&[&str]] = &[
    &["ACGTACG", "TTTTAAA", "ACGTACG", "CCCCGGG"],
    &["TTTTAAA", "ACGTACG", "ACGTACG"],
    &["CCCCGGG", "TTTTAAA", "ACGTACG", "TTTTAAA", "GGGGAAA"],
];

const TOY5: &[&[&str]] = &[
    &["AAAC", "AAAG", "AAAC", "AAAT"],
    &["AAAG", "AAAC", "AAAC"],
    &["CCCA", "AAAC", "AAAG", "AAAT", "AAAC", "CCCA"],
    &["AAAT", "AAAT"],
    &["GGTA", "AAAC", "AAAG"],
];

#[test]
fn counts_match_brute_force_recount() {
    for h in 0..=4 {
        let model = ngram::train(seqs(TOY3), h).unwrap();
        let oracle = brute_counts(TOY3, h);
        for (order, table) in oracle.iter().enumerate() {
            assert_eq!(model.counts().table_sizes()[order], table.len(), "order {order}");
            for (gram, &c) in table {
                let refs: Vec<&str> = gram.iter().map(String::as_str).collect();
                let (hist, word) = refs.split_at(order);
                let w = Word::encode(word[0].as_bytes()).unwrap();
                assert_eq!(model.counts().count(&tokens(hist), w), c, "{gram:?}");
            }
        }
    }
}

#[test]
fn single_sentence_counts() {
    let model = ngram::train(seqs(&[&["AAAAAAA", "AAAAAAA"]]), 1).unwrap();
    let a = Word::encode(b"AAAAAAA").unwrap();
    assert_eq!(model.vocab(), vec![a]);
    assert_eq!(model.counts().count(&[], a), 2);
    assert_eq!(model.counts().count(&[Token::Start], a), 1);
    assert_eq!(model.counts().count(&[Token::Word(a)], a), 1);
}

#[test]
fn merged_halves_equal_concatenation() {
    let all = seqs(TOY3);
    let whole = ngram::train(all.clone(), 3).unwrap();
    let mut left = NgramCounts::new(7, 3).unwrap();
    let mut right = NgramCounts::new(7, 3).unwrap();
    left.add_sequence(&all[0]).unwrap();
    for s in &all[1..] {
        right.add_sequence(s).unwrap();
    }
    assert_eq!(&left.merge(right).unwrap(), whole.counts());
    assert_eq!(ngram::train_parallel(&all, 3).unwrap().counts(), whole.counts());
}

#[test]
fn probabilities_match_recursion_oracle() {
    for h in 0..=3 {
        let model = ngram::train(seqs(TOY3), h).unwrap();
        let oracle = Oracle::new(TOY3, h);
        let queries: &[(&str, &[&str])] = &[
            ("ACGTACG", &[START, START, START]),
            ("TTTTAAA", &["ACGTACG"]),
            ("ACGTACG", &["TTTTAAA", "ACGTACG"]),
            ("ACGTACG", &["CCCCGGG", "TTTTAAA", "ACGTACG"]),
            ("GGGGAAA", &["TTTTAAA"]),
            ("CCCCGGG", &["GGGGAAA", "GGGGAAA", "GGGGAAA"]),
            ("ATATATA", &["ACGTACG", "TTTTAAA"]),
            ("ATATATA", &[]),
        ];
        for (w, hist) in queries {
            let want = oracle.p(w, hist);
            let got = model.prob(Word::encode(w.as_bytes()).unwrap(), &tokens(hist));
            assert!(
                (got - want).abs() <= 1e-12 * want,
                "h={h} {w} | {hist:?}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn perplexity_matches_product_form() {
    for (corpus, h) in [(TOY5, 1), (TOY5, 2), (TOY5, 3), (TOY3, 3), (TOY3, 0)] {
        let model = ngram::train(seqs(corpus), h).unwrap();
        let oracle = Oracle::new(corpus, h);
        let got = model.perplexity(&seqs(corpus)).unwrap().avg_perplexity;
        let want = oracle.perplexity(corpus);
        assert!(((got - want) / want).abs() <= 1e-9, "h={h}: {got} vs {want}");
    }
    // Scoring a corpus the model was not trained on.
    let model = ngram::train(seqs(TOY5), 2).unwrap();
    let oracle = Oracle::new(TOY5, 2);
    let held_out: &[&[&str]] = &[&["AAAC", "TTTT", "AAAG"], &["GGTA", "GGTA"]];
    let got = model.perplexity(&seqs(held_out)).unwrap().avg_perplexity;
    let want = oracle.perplexity(held_out);
    assert!(((got - want) / want).abs() <= 1e-9);
}

#[test]
fn uniform_vocabulary_of_four_has_perplexity_four() {
    let reads = ReadSet::new(
        (0..8)
            .map(|i| Read::new(format!("r{i}"), b"ACGTTGCA", None).unwrap())
            .collect(),
        "uniform",
    );
    let model = ngram::train_on_reads(&reads, 1, 0).unwrap();
    let report = model.perplexity_of_reads(&reads).unwrap();
    assert!((report.avg_perplexity - 4.0).abs() <= 1e-6, "{}", report.avg_perplexity);
    assert_eq!(model.unk_mass(&[]), 0.0);
}

#[test]
fn single_word_corpus_scores_near_one() {
    let sentence: Vec<&str> = vec!["AAAAAAA"; 1000];
    let corpus: &[&[&str]] = &[&sentence];
    let model = ngram::train(seqs(corpus), 1).unwrap();
    let a = Word::encode(b"AAAAAAA").unwrap();
    assert!(model.prob(a, &[Token::Word(a)]) >= 0.99);
    assert!(model.prob(a, &[Token::Start]) >= 0.99);
    let pp = model.perplexity(&seqs(corpus)).unwrap().avg_perplexity;
    let want = Oracle::new(corpus, 1).perplexity(corpus);
    assert!(((pp - want) / want).abs() <= 1e-9);
    assert!(pp >= 1.0 && pp - 1.0 <= 1e-3, "{pp}");
}

#[test]
fn unseen_word_is_floored_and_below_unk_mass() {
    let model = ngram::train(seqs(TOY3), 2).unwrap();
    let w = Word::encode(b"GATTACA").unwrap();
    let p = model.prob(w, &[]);
    assert!(p >= DEFAULT_P_FLOOR);
    assert!(p <= model.unk_mass(&[]));
}

#[test]
fn h0_is_order_independent() {
    let forward = seqs(TOY3);
    let mut shuffled: Vec<Vec<&str>> = TOY3.iter().map(|s| s.to_vec()).collect();
    shuffled.reverse();
    for s in &mut shuffled {
        s.rotate_left(1);
    }
    let shuffled: Vec<&[&str]> = shuffled.iter().map(Vec::as_slice).collect();
    let model = ngram::train(forward.clone(), 0).unwrap();
    let a = model.perplexity(&forward).unwrap().avg_perplexity;
    let b = model.perplexity(&seqs(&shuffled)).unwrap().avg_perplexity;
    assert!((a - b).abs() <= 1e-12 * a);
}

#[test]
fn substitutions_raise_perplexity_monotonically() {
    let genome = generate_genome(20_000, 11).unwrap();
    let clean = sample_clean_reads(&genome, 4000, 50, 12).unwrap();
    let model = ngram::train_on_reads(&clean, 7, 3).unwrap();
    let test = sample_clean_reads(&genome, 1000, 50, 13).unwrap();
    let mut last = 0.0;
    let mut first = 0.0;
    for rate in 0..=5 {
        let reads: Vec<Read> = test
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut g = rng::stream(rng::derive(14, rate as u64), i as u64);
                r.with_seq(inject_substitution(r.seq(), rate, &mut g).0)
            })
            .collect();
        let pp = model
            .perplexity_of_reads(&ReadSet::new(reads, "corrupt"))
            .unwrap()
            .avg_perplexity;
        assert!(pp >= last, "rate {rate}: {pp} < {last}");
        if rate == 0 {
            first = pp;
        }
        last = pp;
    }
    assert!(last > first);
}

/// Hand-assembled file for the model trained on the single read "AC" with
/// word length 1 and history 1.
fn golden_bytes() -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"ATHN");
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&[1, 1, 1]);
    b.extend_from_slice(&1e-7f64.to_le_bytes());
    b.extend_from_slice(&2u64.to_le_bytes());
    // Order 0: A=0 -> 1, C=1 -> 1.
    b.extend_from_slice(&2u64.to_le_bytes());
    for (w, c) in [(0u32, 1u64), (1, 1)] {
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&c.to_le_bytes());
    }
    // Order 1: (A, C) -> 1, (start, A) -> 1; the start marker sorts last.
    b.extend_from_slice(&2u64.to_le_bytes());
    for (g, w, c) in [(0u32, 1u32, 1u64), (u32::MAX, 0, 1)] {
        b.extend_from_slice(&g.to_le_bytes());
        b.extend_from_slice(&w.to_le_bytes());
        b.extend_from_slice(&c.to_le_bytes());
    }
    let crc = crc32(&b);
    b.extend_from_slice(&crc.to_le_bytes());
    b
}

/// Bitwise CRC-32 (IEEE, reflected).
fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &byte in bytes {
        crc ^= byte as u32;
        for _ in 0..8 {
            crc = if crc & 1 == 1 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
        }
    }
    !crc
}

#[test]
fn golden_model_file() {
    let reads = ReadSet::new(vec![Read::new("r", b"AC", None).unwrap()], "golden");
    let model = ngram::train_on_reads(&reads, 1, 1).unwrap();
    let mut out = Vec::new();
    model.save(&mut out).unwrap();
    assert_eq!(out, golden_bytes());
    let loaded = NgramModel::load(&golden_bytes()[..]).unwrap();
    assert_eq!(loaded.counts(), model.counts());
}

#[test]
fn save_load_round_trip_and_corruption() {
    let model = ngram::train(seqs(TOY3), 3).unwrap();
    let mut bytes = Vec::new();
    model.save(&mut bytes).unwrap();
    let loaded = NgramModel::load(&bytes[..]).unwrap();
    for w in ["ACGTACG", "TTTTAAA", "GATTACA"] {
        let w = Word::encode(w.as_bytes()).unwrap();
        for hist in [vec![], vec![Token::Start], vec![Token::Word(w), Token::Start]] {
            assert!((loaded.prob(w, &hist) - model.prob(w, &hist)).abs() <= 1e-12);
        }
    }
    assert!(NgramModel::load(&bytes[..bytes.len() - 3]).is_err());
    let mut bumped = bytes.clone();
    bumped[4] = 9;
    let body = bumped.len() - 4;
    let crc = crc32(&bumped[..body]).to_le_bytes();
    bumped[body..].copy_from_slice(&crc);
    let err = NgramModel::load(&bumped[..]).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");
}

#[test]
fn empty_corpus_is_a_training_error() {
    assert!(ngram::train(Vec::<WordSequence>::new(), 3).is_err());
    let reads = ReadSet::new(vec![Read::new("short", b"ACG", None).unwrap()], "short");
    assert!(ngram::train_on_reads(&reads, 7, 3).is_err());
}

#[test]
fn word_length_mismatch_is_rejected() {
    let model = ngram::train(seqs(TOY3), 2).unwrap();
    assert!(model.perplexity(&seqs(TOY5)).is_err());
}

fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
    let word = prop::collection::vec(prop::sample::select(vec!['A', 'C', 'G', 'T']), 2)
        .prop_map(|cs| cs.into_iter().collect::<String>());
    prop::collection::vec(prop::collection::vec(word, 1..8), 1..7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_normalized(corpus in corpus_strategy(), h in 0usize..4) {
        let refs: Vec<Vec<&str>> = corpus.iter().map(|s| s.iter().map(String::as_str).collect()).collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        let model = ngram::train(seqs(&slices), h).unwrap();
        let all: Vec<Word> = (0..16).map(Word).collect();
        let mut histories: Vec<Vec<Token>> = vec![vec![Token::Start; h]];
        for s in &slices {
            let mut hist = vec![Token::Start; h];
            for w in s.iter() {
                if h > 0 {
                    hist.remove(0);
                    hist.push(Token::Word(Word::encode(w.as_bytes()).unwrap()));
                }
                histories.push(hist.clone());
            }
        }
        histories.push(vec![Token::Word(Word(5)); h]);
        for hist in &histories {
            let sum: f64 = all.iter().map(|&w| model.prob(w, hist)).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "{sum} for {hist:?}");
            let known: f64 = model.vocab().iter().map(|&w| model.prob(w, hist)).sum();
            prop_assert!((known + model.unk_mass(hist) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn perplexity_matches_oracle_on_small_corpora(corpus in corpus_strategy(), h in 0usize..4) {
        let refs: Vec<Vec<&str>> = corpus.iter().map(|s| s.iter().map(String::as_str).collect()).collect();
        let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
        let model = ngram::train(seqs(&slices), h).unwrap();
        let got = model.perplexity(&seqs(&slices)).unwrap();
        let want = Oracle::new(&slices, h).perplexity(&slices);
        prop_assert!(((got.avg_perplexity - want) / want).abs() <= 1e-9);
        prop_assert!(got.avg_perplexity >= 1.0);
        prop_assert!((got.avg_perplexity - (got.sum_neg_log_prob / got.scored as f64).exp()).abs() <= 1e-12 * want);
    }

    #[test]
    fn segmented_reads_count_every_complete_word(seq in "[ACGT]{7,60}") {
        let reads = ReadSet::new(vec![Read::new("r", seq.as_bytes(), None).unwrap()], "p");
        let model = ngram::train_on_reads(&reads, 7, 2).unwrap();
        let words: usize = segment_corpus(&reads, 7).unwrap().map(|s| s.word_count()).sum();
        prop_assert_eq!(model.total_words() as usize, seq.len() / 7);
        prop_assert_eq!(words, seq.len() / 7);
    }
}
