use std::collections::HashMap;

use athena_core::ecsim::{
    ec_gain, gain_counts, heuristic_solid_threshold, kmer_spectrum, kspectrum_correct, reads_from_pairs, Corrector,
    IdentityCorrector, KSpectrumConfig, KSpectrumCorrector, ToolAdapter,
};
use athena_core::injector::{generate_genome, inject_readset, sample_clean_reads, InjectionSpec, Regime};
use athena_core::{Error, Read, ReadSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_spectrum(reads: &ReadSet, k: usize) -> HashMap<String, u32> {
    let mut m = HashMap::new();
    for r in reads.iter() {
        let s = std::str::from_utf8(r.seq()).unwrap();
        if s.len() < k {
            continue;
        }
        for i in 0..=s.len() - k {
            let w = &s[i..i + k];
            if w.bytes().all(|b| b"ACGT".contains(&b)) {
                *m.entry(w.to_string()).or_insert(0) += 1;
            }
        }
    }
    m
}

fn random_reads(n: usize, seed: u64) -> ReadSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reads = (0..n)
        .map(|i| {
            let len = rng.gen_range(5..40);
            let seq: Vec<u8> = (0..len)
                .map(|_| b"ACGTN"[rng.gen_range(0..if i % 7 == 0 { 5 } else { 4 })])
                .collect();
            Read::new(format!("r{i}"), &seq, None).unwrap()
        })
        .collect();
    ReadSet::new(reads, "random")
}

#[test]
fn spectrum_matches_naive_counter() {
    let rs = random_reads(100, 1);
    for k in [3, 5, 8, 13] {
        let got: HashMap<String, u32> = kmer_spectrum(&rs, k).unwrap().to_sorted_vec().into_iter().collect();
        assert_eq!(got, naive_spectrum(&rs, k), "k={k}");
    }
    assert!(kmer_spectrum(&rs, 0).is_err());
}

#[test]
fn duplicated_reads_double_counts() {
    let one = reads_from_pairs(&[("a", "ACGTACGGT")]).unwrap();
    let two = reads_from_pairs(&[("a", "ACGTACGGT"), ("b", "ACGTACGGT")]).unwrap();
    let s1 = kmer_spectrum(&one, 4).unwrap();
    let s2 = kmer_spectrum(&two, 4).unwrap();
    for (kmer, c) in s1.to_sorted_vec() {
        assert_eq!(s2.count(kmer.as_bytes()), 2 * c);
    }
}

fn periodic_scenario() -> (ReadSet, ReadSet, usize) {
    let genome: Vec<u8> = b"ACGT".iter().cycle().take(200).copied().collect();
    let genome = Read::new("g", &genome, None).unwrap();
    let clean = sample_clean_reads(&genome, 200, 20, 4).unwrap();
    let mut reads = clean.reads().to_vec();
    let pos = 9;
    let mut seq = reads[17].seq().to_vec();
    seq[pos] = if seq[pos] == b'A' { b'T' } else { b'A' };
    reads[17] = reads[17].with_seq(seq);
    (clean, ReadSet::new(reads, "corrupt"), pos)
}

#[test]
fn single_error_restored_on_periodic_genome() {
    let (clean, corrupt, pos) = periodic_scenario();
    let k = 5;
    let spectrum = kmer_spectrum(&corrupt, k).unwrap();
    // Exhaustive neighbor enumeration: the first insolid window has exactly
    // one solid single-substitution neighbor.
    let seq = corrupt.reads()[17].seq();
    let j = (0..=seq.len() - k)
        .find(|&j| spectrum.count(&seq[j..j + k]) < 3)
        .unwrap();
    assert!(j <= pos && pos < j + k);
    let mut solid = Vec::new();
    for p in 0..k {
        for &b in b"ACGT" {
            let mut cand = seq[j..j + k].to_vec();
            if cand[p] == b {
                continue;
            }
            cand[p] = b;
            if spectrum.count(&cand) >= 3 {
                solid.push((p, b));
            }
        }
    }
    assert_eq!(solid, vec![(pos - j, clean.reads()[17].seq()[pos])]);

    let fixed = kspectrum_correct(&corrupt, &KSpectrumConfig::new(k, 3)).unwrap();
    assert_eq!(fixed.reads(), clean.reads());
    assert_eq!(ec_gain(&corrupt, &fixed, &clean).unwrap(), 1.0);

    let untouched = kspectrum_correct(
        &corrupt,
        &KSpectrumConfig {
            max_edits: 0,
            ..KSpectrumConfig::new(k, 3)
        },
    )
    .unwrap();
    assert_eq!(untouched.reads(), corrupt.reads());
}

#[test]
fn all_solid_input_is_unchanged() {
    let (clean, _, _) = periodic_scenario();
    let out = kspectrum_correct(&clean, &KSpectrumConfig::new(5, 3)).unwrap();
    assert_eq!(out.reads(), clean.reads());
}

/// Per-base oracle written against hand-placed errors.
#[test]
fn gain_matches_per_base_diff() {
    let truth: Vec<(String, String)> = (0..10)
        .map(|i| (format!("r{i}"), "ACGTACGTAC".chars().cycle().skip(i).take(10).collect()))
        .collect();
    let edit = |s: &str, pos: &[usize], base: char| -> String {
        s.chars()
            .enumerate()
            .map(|(i, c)| {
                if pos.contains(&i) {
                    if c == base {
                        'G'
                    } else {
                        base
                    }
                } else {
                    c
                }
            })
            .collect()
    };
    let original: Vec<(String, String)> = truth
        .iter()
        .enumerate()
        .map(|(i, (id, s))| (id.clone(), edit(s, &[i % 10, (3 * i + 1) % 10], 'T')))
        .collect();
    let corrected: Vec<(String, String)> = original
        .iter()
        .zip(&truth)
        .enumerate()
        .map(|(i, ((id, o), (_, t)))| {
            let s = match i % 3 {
                0 => t.clone(),
                1 => edit(t, &[5], 'A'),
                _ => o.clone(),
            };
            (id.clone(), s)
        })
        .collect();
    let (mut tp, mut fp, mut e) = (0i64, 0i64, 0i64);
    for ((o, c), t) in original.iter().zip(&corrected).zip(&truth) {
        for ((ob, cb), tb) in o.1.chars().zip(c.1.chars()).zip(t.1.chars()) {
            if ob != tb {
                e += 1;
                tp += (cb == tb) as i64;
            } else {
                fp += (cb != tb) as i64;
            }
        }
    }
    let set = |v: &[(String, String)]| {
        let pairs: Vec<(&str, &str)> = v.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        reads_from_pairs(&pairs).unwrap()
    };
    let (o, c, t) = (set(&original), set(&corrected), set(&truth));
    let want = (tp - fp) as f64 / e as f64;
    assert_eq!(ec_gain(&o, &c, &t).unwrap(), want);
    assert_eq!(ec_gain(&o, &o, &t).unwrap(), 0.0);
    assert_eq!(ec_gain(&o, &t, &t).unwrap(), 1.0);
    assert!(matches!(ec_gain(&t, &t, &t), Err(Error::UndefinedGain)));
    let counts = gain_counts(&o, &c, &t).unwrap();
    assert_eq!(counts.errors as i64, e);
}

#[test]
fn gain_requires_aligned_sets() {
    let a = reads_from_pairs(&[("a", "ACGT"), ("b", "ACGT")]).unwrap();
    let b = reads_from_pairs(&[("a", "ACGT"), ("c", "ACGT")]).unwrap();
    let short = reads_from_pairs(&[("a", "ACGT")]).unwrap();
    assert!(matches!(ec_gain(&a, &b, &a), Err(Error::Alignment(_))));
    assert!(matches!(ec_gain(&a, &short, &a), Err(Error::Alignment(_))));
}

#[test]
fn substitution_scenario_has_interior_gain_peak() {
    let genome = generate_genome(20_000, 1).unwrap();
    let clean = sample_clean_reads(&genome, 8000, 100, 2).unwrap();
    let spec = InjectionSpec {
        kind: "substitution".parse().unwrap(),
        regime: Regime::Low,
        seed: 3,
    };
    let (corrupt, _) = inject_readset(&clean, &spec);
    let corrector = KSpectrumCorrector::new(3, 2);
    let gains: Vec<f64> = (9..=25)
        .step_by(2)
        .map(|k| ec_gain(&corrupt, &corrector.correct(&corrupt, k).unwrap(), &clean).unwrap())
        .collect();
    let best = (0..gains.len()).max_by(|&a, &b| gains[a].total_cmp(&gains[b])).unwrap();
    assert!(gains[best] > 0.5, "{gains:?}");
    assert!(best > 0 && best < gains.len() - 1, "{gains:?}");
}

#[test]
fn reference_spectrum_corrects_a_subsample() {
    let genome = generate_genome(5_000, 5).unwrap();
    let clean = sample_clean_reads(&genome, 2000, 100, 6).unwrap();
    let spec = InjectionSpec {
        kind: "substitution".parse().unwrap(),
        regime: Regime::Low,
        seed: 7,
    };
    let (corrupt, _) = inject_readset(&clean, &spec);
    let sample = ReadSet::new(corrupt.reads()[..50].to_vec(), "head");
    let truth = ReadSet::new(clean.reads()[..50].to_vec(), "head");
    let with_ref = KSpectrumCorrector::new(3, 5).with_reference(corrupt.clone());
    let alone = KSpectrumCorrector::new(3, 5);
    let g_ref = ec_gain(&sample, &with_ref.correct(&sample, 15).unwrap(), &truth).unwrap();
    let g_alone = ec_gain(&sample, &alone.correct(&sample, 15).unwrap(), &truth).unwrap();
    assert!(g_ref > 0.5 && g_ref > g_alone, "{g_ref} vs {g_alone}");
    let whole = alone.correct(&corrupt, 15).unwrap();
    assert_eq!(&whole.reads()[..50], with_ref.correct(&sample, 15).unwrap().reads());
}

#[test]
fn heuristic_threshold() {
    assert_eq!(heuristic_solid_threshold(5.0), 2);
    assert_eq!(heuristic_solid_threshold(30.0), 3);
    assert_eq!(heuristic_solid_threshold(95.0), 9);
}

fn adapter(template: &str, dir: &std::path::Path) -> ToolAdapter {
    ToolAdapter {
        workdir: dir.to_path_buf(),
        timeout_secs: 30,
        ..ToolAdapter::new(template, "k")
    }
}

#[test]
fn identity_adapter_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let rs = random_reads(30, 2);
    let out = adapter("cp {input} {output} # {k}", dir.path())
        .correct(&rs, 17)
        .unwrap();
    let pairs = |r: &ReadSet| {
        r.iter()
            .map(|x| (x.id().to_string(), x.seq().to_vec()))
            .collect::<Vec<_>>()
    };
    assert_eq!(pairs(&out), pairs(&rs));
    assert!(dir.path().join("k_17.stderr").exists());
    assert_eq!(IdentityCorrector.correct(&rs, 3).unwrap().reads(), rs.reads());
}

#[test]
fn adapter_failures_carry_exit_code_and_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let rs = random_reads(3, 2);
    let err = adapter("echo broken >&2; exit 1 # {input} {output} {k}", dir.path())
        .run(9, &rs)
        .unwrap_err();
    match err {
        Error::Adapter {
            exit_code,
            stderr,
            stderr_path,
            ..
        } => {
            assert_eq!(exit_code, Some(1));
            assert!(stderr.contains("broken"));
            assert!(stderr_path.unwrap().exists());
        }
        e => panic!("unexpected {e:?}"),
    }
    let err = adapter("/nonexistent/ec-tool -i {input} -o {output} -k {k}", dir.path())
        .run(9, &rs)
        .unwrap_err();
    assert!(
        matches!(
            err,
            Error::Adapter {
                exit_code: Some(127),
                ..
            }
        ),
        "{err:?}"
    );
    let err = adapter("true {input} {output} {k}", dir.path())
        .run(9, &rs)
        .unwrap_err();
    assert!(matches!(err, Error::Adapter { .. }), "{err:?}");
    let slow = ToolAdapter {
        timeout_secs: 1,
        ..adapter("sleep 10 # {input} {output} {k}", dir.path())
    };
    assert!(matches!(slow.run(9, &rs), Err(Error::Adapter { exit_code: None, .. })));
}

#[test]
fn adapter_template_validation() {
    let dir = tempfile::tempdir().unwrap();
    assert!(adapter("cp {input} {output} {k}", dir.path()).validate().is_ok());
    assert!(adapter("cp {input} {k}", dir.path()).validate().is_err());
    assert!(adapter("cp {input} {output}", dir.path()).validate().is_err());
    assert!(adapter("tool {input} {output} {k} {GL}", dir.path())
        .validate()
        .is_err());
    let gl = ToolAdapter {
        param_name: "GL".into(),
        ..adapter("racer {input} {output} {GL}", dir.path())
    };
    assert!(gl.validate().is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn correction_preserves_lengths_and_alphabet(seed in any::<u64>(), k in 3usize..10, solid in 1u32..4) {
        let rs = random_reads(60, seed);
        let out = kspectrum_correct(&rs, &KSpectrumConfig::new(k, solid)).unwrap();
        prop_assert_eq!(out.len(), rs.len());
        for (a, b) in rs.iter().zip(out.iter()) {
            prop_assert_eq!(a.len(), b.len());
            prop_assert_eq!(a.id(), b.id());
            for (&x, &y) in a.seq().iter().zip(b.seq()) {
                prop_assert!(x == y || (b"ACGT".contains(&y) && x != b'N'));
            }
        }
    }
}
