// SPDX-License-Identifier: Apache-2.0

//! Property tests for the invariants of each stage.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use proptest::prelude::*;
use proptest::sample::subsequence;
use rtlbench::contamination::{min_k, LogprobRecord};
use rtlbench::corpus::ShuttleId;
use rtlbench::dedup::{
    candidate_pairs, choose_bands, collision_probability, minhash, shingle, temporal_dedup, ShingleSet,
};
use rtlbench::equiv::{build_miter, evaluate_candidate, partition_coverage, EquivConfig, EqvStatus, Stx, Verdict};
use rtlbench::frontend::{default_complexity, parse};
use rtlbench::preprocess::{preprocess_text, MergedDesign};
use rtlbench::taskgen::build_tasks;

use common::*;

fn fixture_sources() -> &'static [(String, String)] {
    static CELL: std::sync::OnceLock<Vec<(String, String)>> = std::sync::OnceLock::new();
    CELL.get_or_init(fixture_modules)
}

fn design_strategy() -> impl Strategy<Value = String> {
    let n = fixture_sources().len();
    (subsequence((0..n).collect::<Vec<_>>(), 1..=4), prop::collection::vec(0..3usize, 4)).prop_map(|(idx, gaps)| {
        let sep = ["\n", "\n\n// between modules\n", "\n/* block\n comment */\n"];
        idx.iter()
            .enumerate()
            .map(|(k, i)| format!("{}{}", sep[gaps[k % gaps.len()]], fixture_sources()[*i].1))
            .collect()
    })
}

fn merged(src: &str) -> MergedDesign {
    MergedDesign {
        project_id: "p".into(),
        shuttle: ShuttleId::new("s", 1),
        source: src.to_string(),
        origin_map: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // ------------------------------------------------------ preprocess

    #[test]
    fn preprocessing_is_idempotent_and_directive_free(
        w in 1u32..64,
        flag in any::<bool>(),
        body in "[a-z]{1,8}",
    ) {
        let text = format!(
            "`define W {w}\n{}`ifdef FAST\nwire [`W-1:0] {body}_a;\n`else\nwire [`W:0] {body}_b;\n`endif\n`define ID(x) x\nassign y = `ID({body});\n",
            if flag { "`define FAST\n" } else { "" },
        );
        let (once, origins) = preprocess_text(&text, Path::new(".")).unwrap();
        for d in ["`include", "`ifdef", "`ifndef", "`else", "`endif", "`define", "`W", "`ID"] {
            prop_assert!(!once.contains(d), "{d} left in {once:?}");
        }
        prop_assert_eq!(origins.len(), once.lines().count());
        let (twice, _) = preprocess_text(&once, Path::new(".")).unwrap();
        prop_assert_eq!(&twice, &once);
        let (again, _) = preprocess_text(&text, Path::new(".")).unwrap();
        prop_assert_eq!(again, once);
    }

    // -------------------------------------------------------- frontend

    #[test]
    fn module_spans_round_trip(src in design_strategy()) {
        let unit = parse(&src).unwrap();
        for m in &unit.modules {
            let slice = m.span.slice(&src);
            prop_assert!(slice.starts_with("module"));
            prop_assert!(slice.ends_with("endmodule"));
            let re = parse(slice).unwrap();
            prop_assert_eq!(re.modules.len(), 1);
            prop_assert_eq!(&re.modules[0], &m.rebased(m.span.start));
        }
    }

    #[test]
    fn complexity_counts_only_standalone_keywords(
        prefix in "[a-z_]{1,6}",
        n in 0usize..5,
    ) {
        let mut text = String::new();
        for i in 0..n {
            text.push_str(&format!("assign x{i} = 1'b0;\n"));
        }
        text.push_str(&format!("wire {prefix}assign, assign_{prefix};\n// assign always reg\n/* wire */\n"));
        text.push_str("initial $display(\"assign reg\");\n");
        prop_assert_eq!(default_complexity(&text), n + 1);
    }

    // --------------------------------------------------------- taskgen

    #[test]
    fn tasks_follow_the_count_law_and_reconstruct(src in design_strategy()) {
        let unit = parse(&src).unwrap();
        let tasks = build_tasks(&merged(&src), &unit);
        prop_assert_eq!(tasks.len(), unit.modules.len());
        let ids: BTreeSet<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
        prop_assert_eq!(ids.len(), tasks.len());
        for t in &tasks {
            prop_assert_eq!(t.reconstruct(), src.clone());
            let ctx = parse(&t.context_source).unwrap();
            prop_assert_eq!(ctx.modules.len(), unit.modules.len());
            let g = parse(&t.golden_source).unwrap();
            prop_assert_eq!(g.modules.len(), 1);
            prop_assert_eq!(&g.modules[0].name, &t.target_module);
        }
    }

    // ----------------------------------------------------------- dedup

    #[test]
    fn minhash_of_a_union_is_the_elementwise_min(
        a in prop::collection::btree_set(any::<u64>(), 1..80),
        b in prop::collection::btree_set(any::<u64>(), 1..80),
        seed in any::<u64>(),
    ) {
        let set = |h: BTreeSet<u64>| ShingleSet { design_id: "x".into(), hashes: h };
        let sa = minhash(&set(a.clone()), 32, seed).unwrap();
        let sb = minhash(&set(b.clone()), 32, seed).unwrap();
        let su = minhash(&set(a.union(&b).copied().collect()), 32, seed).unwrap();
        prop_assert_eq!(su.values.len(), 32);
        let mins: Vec<u64> = sa.values.iter().zip(&sb.values).map(|(x, y)| *x.min(y)).collect();
        prop_assert_eq!(su.values, mins);
    }

    #[test]
    fn shingles_are_nonempty_for_nonempty_text(words in prop::collection::vec("[a-z]{1,5}", 1..30), k in 1usize..8) {
        let text = words.join(" ");
        prop_assert!(!shingle("d", &text, k).hashes.is_empty());
    }

    #[test]
    fn band_choice_fits_the_signature(perms in 16usize..200, t in 0.3f64..0.9) {
        let (b, r) = choose_bands(perms, t).unwrap();
        prop_assert!(b * r <= perms);
        prop_assert!(collision_probability(1.0, b, r) > 0.999);
    }

    #[test]
    fn candidate_relation_is_symmetric_and_order_free(
        texts in prop::collection::vec(prop::collection::vec(0u8..6, 6..30), 2..7),
        seed in any::<u64>(),
    ) {
        let sigs: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let text: Vec<String> = w.iter().map(|x| format!("t{x}")).collect();
                minhash(&shingle(&format!("d{i}"), &text.join(" "), 2), 32, seed).unwrap()
            })
            .collect();
        let fwd = candidate_pairs(8, 4, &sigs).unwrap();
        let mut rev_sigs = sigs.clone();
        rev_sigs.reverse();
        prop_assert_eq!(&fwd, &candidate_pairs(8, 4, &rev_sigs).unwrap());
        for (a, b) in &fwd {
            prop_assert!(a < b);
        }
    }

    #[test]
    fn temporal_dedup_is_idempotent_order_free_and_incremental(
        labels in prop::collection::vec((0u8..5, 1u32..5), 1..16),
        rot in 0usize..16,
    ) {
        // Duplicates share a label, so the relation is transitive.
        let designs: Vec<(String, ShuttleId)> = labels
            .iter()
            .enumerate()
            .map(|(i, (_, o))| (format!("d{i:02}"), ShuttleId::new(format!("s{o}"), *o)))
            .collect();
        let mut pairs = BTreeSet::new();
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                if labels[i].0 == labels[j].0 {
                    pairs.insert((designs[i].0.clone(), designs[j].0.clone()));
                }
            }
        }
        let all = temporal_dedup(&designs, &pairs);
        let kept: Vec<_> = designs.iter().filter(|d| all.contains(&d.0)).cloned().collect();
        prop_assert_eq!(&temporal_dedup(&kept, &pairs), &all);
        let mut rotated = designs.clone();
        rotated.rotate_left(rot % designs.len());
        prop_assert_eq!(&temporal_dedup(&rotated, &pairs), &all);
        for label in 0u8..5 {
            let members: Vec<&(String, ShuttleId)> =
                designs.iter().zip(&labels).filter(|(_, l)| l.0 == label).map(|(d, _)| d).collect();
            if let Some(best) = members.iter().min_by_key(|d| (d.1.ordinal, d.0.clone())) {
                let retained: Vec<_> = members.iter().filter(|d| all.contains(&d.0)).collect();
                prop_assert_eq!(retained.len(), 1);
                prop_assert_eq!(&retained[0].0, &best.0);
            }
        }
        let newest = designs.iter().map(|d| d.1.ordinal).max().unwrap();
        let older: Vec<_> = designs.iter().filter(|d| d.1.ordinal < newest).cloned().collect();
        let mut step: Vec<_> = designs.iter().filter(|d| temporal_dedup(&older, &pairs).contains(&d.0)).cloned().collect();
        step.extend(designs.iter().filter(|d| d.1.ordinal == newest).cloned());
        prop_assert_eq!(temporal_dedup(&step, &pairs), all);
    }

    // ---------------------------------------------------------- equiv

    #[test]
    fn coverage_is_bounded_and_monotone(
        parts in prop::collection::vec((0u8..3, 0u64..50), 1..12),
        flip in any::<prop::sample::Index>(),
    ) {
        let v = |x: u8| match x { 0 => Verdict::Equivalent, 1 => Verdict::NotEquivalent, _ => Verdict::Unknown };
        let verdicts: Vec<Verdict> = parts.iter().map(|p| v(p.0)).collect();
        let weights: Vec<u64> = parts.iter().map(|p| p.1).collect();
        let c = partition_coverage(&verdicts, &weights);
        prop_assert!((0.0..=100.0).contains(&c));
        let i = flip.index(verdicts.len());
        let mut better = verdicts.clone();
        better[i] = Verdict::Equivalent;
        prop_assert!(partition_coverage(&better, &weights) >= c);
        if verdicts.iter().all(|x| *x == Verdict::Equivalent) {
            prop_assert_eq!(c, 100.0);
        }
    }

    #[test]
    fn miter_eq_all_is_the_conjunction_of_output_xnors(
        seed in any::<u64>(),
        assignments in prop::collection::vec(any::<u16>(), 1..20),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = random_comb(&mut rng, 6, 20, 3);
        let ands = and_vars(&g);
        let c = mutate_and(&g, ands[seed as usize % ands.len()], 1 + (seed % 4) as u8);
        let m = build_miter(&g, &c).unwrap();
        for a in assignments {
            let ins: Vec<bool> = (0..6).map(|b| a >> b & 1 == 1).collect();
            let val = m.eval(&ins, &[]);
            let lit = |l: rtlbench::netlist::Lit| val[l.var() as usize] ^ l.is_neg();
            let conj = m.outputs.iter().all(|o| lit(o.golden) == lit(o.candidate));
            prop_assert_eq!(m.eval_eq_all(&ins, &[]), conj);
            for o in &m.outputs {
                prop_assert_eq!(lit(o.eq), lit(o.golden) == lit(o.candidate));
            }
        }
    }

    // --------------------------------------------------- contamination

    #[test]
    fn min_k_is_monotone_and_order_free(
        lps in prop::collection::vec(-20.0f64..0.0, 1..60),
        k1 in 1.0f64..100.0,
        k2 in 1.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let rec = |v: Vec<f64>| LogprobRecord { task_id: "t".into(), model_id: "m".into(), tokens: vec![], logprobs: v };
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let r = rec(lps.clone());
        prop_assert!(min_k(&r, lo).unwrap() <= min_k(&r, hi).unwrap() + 1e-12);
        let mut shuffled = lps.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(min_k(&r, k1).unwrap(), min_k(&rec(shuffled), k1).unwrap());
    }

    #[test]
    fn exp_preserves_min_k_ordering(
        a in prop::collection::vec(-20.0f64..0.0, 1..40),
        b in prop::collection::vec(-20.0f64..0.0, 1..40),
        k in 1.0f64..100.0,
    ) {
        let rec = |v: Vec<f64>| LogprobRecord { task_id: "t".into(), model_id: "m".into(), tokens: vec![], logprobs: v };
        let (x, y) = (min_k(&rec(a), k).unwrap(), min_k(&rec(b), k).unwrap());
        if (x - y).abs() > 1e-9 {
            prop_assert_eq!(x < y, x.exp() < y.exp());
        }
    }
}

// Invariants over the fixed fixture suite rather than generated inputs.

#[test]
fn elaboration_is_structurally_deterministic() {
    for (name, src) in fixture_sources() {
        let a = elaborate_fixture(src, name).canonical();
        let b = elaborate_fixture(src, name).canonical();
        assert_eq!(a.dump(), b.dump(), "{name}");
    }
}

#[test]
fn evaluation_results_respect_their_invariants() {
    let cfg = EquivConfig::default();
    let shuttle = ShuttleId::new("fx", 0);
    let mut seen = BTreeMap::new();
    for (name, src) in fixture_sources().iter().take(20) {
        let unit = parse(src).unwrap();
        let design = MergedDesign {
            project_id: name.clone(),
            shuttle: shuttle.clone(),
            source: src.clone(),
            origin_map: Vec::new(),
        };
        for t in build_tasks(&design, &unit) {
            let flipped = t.golden_source.replacen(" & ", " | ", 1).replacen(" + ", " - ", 1);
            let broken = t.golden_source.replacen("endmodule", "", 1);
            for cand in [t.golden_source.clone(), flipped, broken, String::new()] {
                let r = evaluate_candidate(&t, &cand, &cfg);
                *seen.entry(r.eqv.label()).or_insert(0) += 1;
                assert!((0.0..=100.0).contains(&r.coverage));
                if r.eqv == EqvStatus::Equivalent {
                    assert_eq!(r.coverage, 100.0, "{}", t.task_id);
                }
                if let Stx::Fail { .. } = r.stx {
                    assert!(matches!(r.eqv, EqvStatus::Error { .. }));
                    assert_eq!(r.coverage, 0.0);
                }
                if let EqvStatus::NotEquivalent { counterexample, .. } = &r.eqv {
                    assert!(!counterexample.is_empty());
                }
            }
        }
    }
    assert!(seen.contains_key("equivalent") && seen.contains_key("not_equivalent") && seen.contains_key("error"), "{seen:?}");
}
