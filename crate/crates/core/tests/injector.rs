use athena_core::injector::{
    generate_genome, inject_deletion, inject_insertion, inject_readset, inject_substitution, sample_clean_reads,
    ErrorKind, InjectionKind, InjectionSpec, Regime,
};
use athena_core::rng;
use athena_core::ReadSet;
use proptest::prelude::*;
use rand::Rng;

fn spec(kind: &str, regime: Regime, seed: u64) -> InjectionSpec {
    InjectionSpec {
        kind: kind.parse().unwrap(),
        regime,
        seed,
    }
}

fn reads(n: usize, len: usize, seed: u64) -> ReadSet {
    let g = generate_genome(20_000, seed).unwrap();
    sample_clean_reads(&g, n, len, seed + 1).unwrap()
}

#[test]
fn genome_base_frequencies_are_uniform() {
    let g = generate_genome(1_000_000, 5).unwrap();
    for base in b"ACGT" {
        let f = g.seq().iter().filter(|&&b| b == *base).count() as f64 / 1e6;
        assert!((0.24..=0.26).contains(&f), "{} {f}", *base as char);
    }
}

#[test]
fn coverage_identity() {
    let g = generate_genome(50_000, 1).unwrap();
    let rs = sample_clean_reads(&g, 20_000, 50, 2).unwrap();
    let coverage = rs.total_bases() as f64 / g.len() as f64;
    assert!((coverage - 20.0).abs() <= 0.2);
    assert!(sample_clean_reads(&g, 0, 50, 2).unwrap().is_empty());
    assert!(sample_clean_reads(&g, 5, 50_001, 2).is_err());
}

#[test]
fn deletion_matches_seeded_draw() {
    let seq = b"ACGTACGTTG";
    let mut rng = rng::stream(99, 0);
    let (out, changes) = inject_deletion(seq, 3, &mut rng).unwrap();
    let i = rng::stream(99, 0).gen_range(0..=7usize);
    let mut want = seq[..i].to_vec();
    want.extend_from_slice(&seq[i + 3..]);
    assert_eq!(out, want);
    assert_eq!(changes.len(), 3);
    assert!(changes.iter().all(|c| c.position == i && c.observed == b'-'));

    assert_eq!(inject_deletion(seq, 0, &mut rng).unwrap().0, seq.to_vec());
    assert!(inject_deletion(seq, 10, &mut rng).unwrap().0.is_empty());
    assert!(inject_deletion(seq, 11, &mut rng).is_err());
}

#[test]
fn insertion_splices_around_the_index() {
    let seq = b"ACGTACGTTGCA";
    let mut rng = rng::stream(3, 0);
    let (out, changes) = inject_insertion(seq, 4, &mut rng).unwrap();
    let i = changes[0].position;
    assert_eq!(out.len(), 16);
    assert_eq!(&out[..i], &seq[..i]);
    assert_eq!(&out[i + 4..], &seq[i..]);
    assert!(i <= seq.len() - 4);
    assert_eq!(inject_insertion(seq, 0, &mut rng).unwrap().0, seq.to_vec());
    assert!(inject_insertion(seq, 13, &mut rng).is_err());
}

#[test]
fn inserted_bases_are_uniform() {
    let mut counts = [0usize; 4];
    let mut rng = rng::stream(8, 0);
    let seq = [b'A'; 10];
    for _ in 0..100_000 {
        let (_, changes) = inject_insertion(&seq, 1, &mut rng).unwrap();
        let k = b"ACGT".iter().position(|&b| b == changes[0].observed).unwrap();
        counts[k] += 1;
    }
    for c in counts {
        let f = c as f64 / 100_000.0;
        assert!((f - 0.25).abs() <= 0.01, "{counts:?}");
    }
}

#[test]
fn substitution_changes_three_in_four() {
    let seq = b"ACGTACGTACGTACGTACGT";
    let mut rng = rng::stream(4, 0);
    let mut changed = 0;
    for _ in 0..100_000 {
        changed += inject_substitution(seq, 1, &mut rng).1.len();
    }
    let f = changed as f64 / 100_000.0;
    assert!((0.74..=0.76).contains(&f), "{f}");
    assert_eq!(inject_substitution(seq, 0, &mut rng).0, seq.to_vec());
    assert_eq!(inject_substitution(seq, 500, &mut rng).0.len(), seq.len());
}

#[test]
fn mixture_kinds_are_equiprobable() {
    let rs = reads(30_000, 30, 7);
    let (_, ledger) = inject_readset(&rs, &spec("mixture", Regime::Low, 11));
    for kind in ErrorKind::ALL {
        let f = ledger.kinds.iter().filter(|&&k| k == kind).count() as f64 / 30_000.0;
        assert!((0.31..=0.35).contains(&f), "{kind:?} {f}");
    }
}

#[test]
fn length_accounting_on_ten_thousand_reads() {
    let rs = reads(10_000, 40, 3);
    for (kind, regime) in [
        ("deletion", Regime::High),
        ("insertion", Regime::Low),
        ("substitution", Regime::High),
    ] {
        let (bad, ledger) = inject_readset(&rs, &spec(kind, regime, 21));
        let (lo, hi) = regime.bounds();
        for (i, (orig, out)) in rs.iter().zip(bad.iter()).enumerate() {
            let n = ledger.drawn_counts[i];
            assert!((lo..=hi).contains(&n));
            let want = match kind {
                "deletion" => orig.len() - n,
                "insertion" => orig.len() + n,
                _ => orig.len(),
            };
            assert_eq!(out.len(), want, "{kind} read {i}");
        }
        let restored = ledger.revert(&bad).unwrap();
        assert_eq!(restored.reads(), rs.reads());
    }
}

#[test]
fn injection_is_deterministic_across_thread_counts() {
    let rs = reads(2000, 50, 9);
    let s = spec("mixture", Regime::High, 5);
    let a = inject_readset(&rs, &s);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| inject_readset(&rs, &s));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let c = inject_readset(&rs, &InjectionSpec { seed: 6, ..s });
    assert_ne!(a.0, c.0);
}

#[test]
fn ledger_tsv_has_one_row_per_change() {
    let rs = reads(100, 30, 1);
    let (_, ledger) = inject_readset(&rs, &spec("substitution", Regime::Low, 2));
    let mut buf = Vec::new();
    ledger.write_tsv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("read_id\tposition\tkind\toriginal\tobserved"));
    assert_eq!(lines.count(), ledger.entries.len());
}

#[test]
fn spec_parsing() {
    assert_eq!("mixture".parse::<InjectionKind>().unwrap(), InjectionKind::Mixture);
    assert_eq!(
        "deletion".parse::<InjectionKind>().unwrap(),
        InjectionKind::Single(ErrorKind::Deletion)
    );
    assert!("bogus".parse::<InjectionKind>().is_err());
    assert_eq!(Regime::Low.bounds(), (1, 5));
    assert_eq!(Regime::High.bounds(), (6, 10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn single_edit_lengths(seq in "[ACGT]{1,80}", n in 0usize..12, seed in any::<u64>()) {
        let mut rng = rng::stream(seed, 0);
        let l = seq.len();
        let bytes = seq.as_bytes();
        if n <= l {
            prop_assert_eq!(inject_deletion(bytes, n, &mut rng).unwrap().0.len(), l - n);
            prop_assert_eq!(inject_insertion(bytes, n, &mut rng).unwrap().0.len(), l + n);
        } else {
            prop_assert!(inject_deletion(bytes, n, &mut rng).is_err());
            prop_assert!(inject_insertion(bytes, n, &mut rng).is_err());
        }
        prop_assert_eq!(inject_substitution(bytes, n, &mut rng).0.len(), l);
    }

    #[test]
    fn ledger_replay_restores_originals(seed in any::<u64>(), kind in prop::sample::select(vec!["deletion", "insertion", "substitution", "mixture"]), high in any::<bool>()) {
        let rs = reads(50, 25, seed % 1000);
        let regime = if high { Regime::High } else { Regime::Low };
        let (bad, ledger) = inject_readset(&rs, &spec(kind, regime, seed));
        let restored = ledger.revert(&bad).unwrap();
        prop_assert_eq!(restored.reads(), rs.reads());
    }
}
