//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured quantity; the process exits non-zero if any criterion fails.
//!
//! Oracles here are written independently of the library code: naive double
//! loops, normal-equation solves, statrs distributions, finite differences.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ambigeo_core::corpus::{build_window, find_occurrences, Document, Sentence};
use ambigeo_core::embedstore::{EmbeddingSet, SenseLabeling, OTHER_LABEL};
use ambigeo_core::geometry::{embedding_diversity, group_similarity, pairwise_records};
use ambigeo_core::labelkit::{distinct_labels, krippendorff_alpha, majority_label, merge_labels, MergeMap, RaterTable};
use ambigeo_core::nbayes::{split_half, train_and_evaluate, DEFAULT_EPS_RATIO};
use ambigeo_core::proxigram::{knn_graph, render_proxigram, Palette};
use ambigeo_core::stats::{interaction_model, one_way_anova, ols};
use ambigeo_core::synthkit::{gen_cluster_set, profiles, simulate_ambiguity_experiment, ClusterSpec};
use ambigeo_core::tsne::{
    conditional_affinities, kl_divergence, kl_gradient, row_perplexities, hd_affinities, tsne_embed, TsneConfig,
};
use ambigeo_core::{rng, Matrix};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_budget(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("runtime {:.2} s over the {limit_s} s budget", elapsed.as_secs_f64()))
    }
}

// ---------------------------------------------------------------- diversity

fn naive_diversity(rows: &[Vec<f32>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if i < j {
                let (mut dot, mut a, mut b) = (0.0f64, 0.0f64, 0.0f64);
                for k in 0..rows[i].len() {
                    let (x, y) = (rows[i][k] as f64, rows[j][k] as f64);
                    dot += x * y;
                    a += x * x;
                    b += y * y;
                }
                total += 1.0 - dot / (a.sqrt() * b.sqrt());
                pairs += 1;
            }
        }
    }
    total / pairs as f64
}

fn diversity_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(2024);
    let mut worst = 0.0f64;
    for s in 0..200 {
        let n = r.random_range(2..=50);
        let d = r.random_range(1..=8);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| loop {
                let v: Vec<f32> = (0..d).map(|_| r.random_range(-1.0f32..1.0)).collect();
                if v.iter().any(|x| *x != 0.0) {
                    break v;
                }
            })
            .collect();
        let flat = rows.concat();
        let ids = (0..n).map(|i| format!("s{s}:{i}")).collect();
        let set = EmbeddingSet::new("w", d, ids, flat).map_err(|e| e.to_string())?;
        let got = embedding_diversity(&set).map_err(|e| e.to_string())?.diversity;
        worst = worst.max((got - naive_diversity(&rows)).abs());
    }
    within_budget(start.elapsed(), 5.0)?;
    check(worst <= 1e-6, format!("200 random sets, max |diversity - oracle| = {worst:.2e} (tol 1e-6)"))
}

// ---------------------------------------------------------------- figure 3

fn diversity_direction() -> Outcome {
    let start = Instant::now();
    let cfg = profiles::three_condition_experiment(30, 7);
    let r = simulate_ambiguity_experiment(&cfg).map_err(|e| e.to_string())?;
    within_budget(start.elapsed(), 30.0)?;
    let mean = |c: &str| r.summary(c).map(|s| s.mean).unwrap_or(f64::NAN);
    let (u, h, p) = (mean("unambiguous"), mean("homonym"), mean("polyseme"));
    let ph = r.contrast("unambiguous", "homonym").map_or(1.0, |c| c.welch.p);
    let pp = r.contrast("unambiguous", "polyseme").map_or(1.0, |c| c.welch.p);
    check(
        u < h && u < p && ph < 0.01 && pp < 0.01,
        format!(
            "mean diversity unambiguous {u:.4} < homonym {h:.4} (Welch p {ph:.1e}), < polyseme {p:.4} (Welch p {pp:.1e})"
        ),
    )
}

// ---------------------------------------------------------------- figure 4C

fn group_structure() -> Outcome {
    let start = Instant::now();
    let hom = gen_cluster_set(&profiles::homonym(40, 11)).map_err(|e| e.to_string())?;
    let pol = gen_cluster_set(&profiles::polyseme(6, 14, 12)).map_err(|e| e.to_string())?;
    let rh = group_similarity(&hom, 0.99).map_err(|e| e.to_string())?;
    let rp = group_similarity(&pol, 0.99).map_err(|e| e.to_string())?;
    let mut hom_pairs = pairwise_records(&hom).map_err(|e| e.to_string())?;
    let mut pol_pairs = pairwise_records(&pol).map_err(|e| e.to_string())?;
    hom_pairs.iter_mut().for_each(|p| p.word = "homonym".into());
    pol_pairs.iter_mut().for_each(|p| p.word = "polyseme".into());
    let fit = interaction_model(&hom_pairs, &pol_pairs).map_err(|e| e.to_string())?;
    within_budget(start.elapsed(), 30.0)?;
    let (gh, gp) = (rh.within_mean - rh.between_mean, rp.within_mean - rp.between_mean);
    let b = fit.interaction();
    check(
        gh > 0.0 && gp > 0.0 && gh > gp && b < 0.0 && (b - (gp - gh)).abs() < 1e-9,
        format!("gap homonym {gh:.4} > polyseme {gp:.4} > 0; interaction b = {b:.4} (t = {:.1})", fit.fit.t_values[3]),
    )
}

// ---------------------------------------------------------------- classifier

fn held_out_accuracy(spec: &ClusterSpec) -> Result<f64, String> {
    let set = gen_cluster_set(spec).map_err(|e| e.to_string())?;
    let x = set.set().to_matrix();
    let plan = split_half(set.len(), 0.5, 0).map_err(|e| e.to_string())?;
    let (_, report) = train_and_evaluate(&x, set.labels(), &plan, DEFAULT_EPS_RATIO).map_err(|e| e.to_string())?;
    Ok(report.accuracy)
}

fn classifier_fidelity() -> Outcome {
    let start = Instant::now();
    let two = held_out_accuracy(&profiles::two_cluster_fixture(0))?;
    let fourteen = held_out_accuracy(&profiles::polyseme(14, 100, 0))?;
    within_budget(start.elapsed(), 20.0)?;
    let floor = 5.0 / 14.0;
    check(
        two >= 0.99 && fourteen > floor,
        format!("two clusters {two:.4} (need >= 0.99); 14 clusters {fourteen:.4} (need > 5/14 = {floor:.4})"),
    )
}

// ---------------------------------------------------------------- t-SNE

fn random_matrix(r: &mut rng::SeededRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.sample(StandardNormal)).collect()).unwrap()
}

fn tsne_numerics() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(99);
    let h = 1e-5;
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let x = random_matrix(&mut r, 10, 5);
        let p = hd_affinities(&x, 3.0).map_err(|e| e.to_string())?;
        let y = random_matrix(&mut r, 10, 2);
        let g = kl_gradient(&p, &y).map_err(|e| e.to_string())?;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for k in 0..20 {
            let mut up = y.clone();
            let mut down = y.clone();
            up.as_mut_slice()[k] += h;
            down.as_mut_slice()[k] -= h;
            let fd = (kl_divergence(&p, &up).unwrap() - kl_divergence(&p, &down).unwrap()) / (2.0 * h);
            num += (g.as_slice()[k] - fd).powi(2);
            den += fd * fd;
        }
        worst_grad = worst_grad.max((num / den).sqrt());
    }

    let mut worst_perp = 0.0f64;
    for &(n, perp) in &[(30usize, 5.0), (60, 20.0), (100, 30.0)] {
        let x = random_matrix(&mut r, n, 8);
        let c = conditional_affinities(&x, perp).map_err(|e| e.to_string())?;
        for v in row_perplexities(&c.p) {
            worst_perp = worst_perp.max((v - perp).abs());
        }
    }

    let fixture = ClusterSpec {
        n_clusters: 2,
        points_per_cluster: 5,
        dim: 10,
        centre_separation: 0.3,
        within_spread: 0.05,
        seed: 0,
    };
    let set = gen_cluster_set(&fixture).map_err(|e| e.to_string())?;
    let cfg = TsneConfig { perplexity: 3.0, ..TsneConfig::default() };
    let run = tsne_embed(&set.set().to_matrix(), &cfg).map_err(|e| e.to_string())?;
    let tail = &run.kl_trace[run.kl_trace.len() - 101..];
    let worst_rise = tail.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let y = &run.layout;
    let purity = (0..y.rows())
        .filter(|&i| {
            let nn = (0..y.rows())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let d = |j: usize| (y.get(i, 0) - y.get(j, 0)).powi(2) + (y.get(i, 1) - y.get(j, 1)).powi(2);
                    d(a).total_cmp(&d(b))
                })
                .unwrap();
            set.labels()[nn] == set.labels()[i]
        })
        .count() as f64
        / y.rows() as f64;
    within_budget(start.elapsed(), 60.0)?;
    check(
        worst_grad <= 1e-4 && worst_perp <= 1e-3 && worst_rise <= 1e-6 && purity == 1.0,
        format!(
            "gradient rel err {worst_grad:.2e}; perplexity err {worst_perp:.2e}; max KL rise in last 100 steps {worst_rise:.2e}; NN purity {purity}"
        ),
    )
}

// ---------------------------------------------------------------- proxigram

fn proxigram_svg() -> Result<(String, f64, usize), String> {
    let set = gen_cluster_set(&profiles::two_cluster_fixture(0)).map_err(|e| e.to_string())?;
    let x = set.set().to_matrix();
    let layout = tsne_embed(&x, &TsneConfig::default()).map_err(|e| e.to_string())?.layout;
    let g = knn_graph(&x, &layout, 3, set.set().context_ids(), Some(set.labels())).map_err(|e| e.to_string())?;
    let frac = g.between_label_fraction().unwrap_or(1.0);
    Ok((render_proxigram(&g, Palette::default()).map_err(|e| e.to_string())?, frac, set.len()))
}

fn proxigram_structure() -> Outcome {
    let (svg, frac, n) = proxigram_svg()?;
    let (again, _, _) = proxigram_svg()?;
    let circles = svg.matches("<circle").count();
    let lines = svg.matches("<line").count();
    check(
        frac < 0.05 && circles == n && lines == 3 * n && svg == again,
        format!(
            "between-cluster edges {:.2}%; {circles} circles (want {n}), {lines} lines (want {}); rerun identical: {}",
            100.0 * frac,
            3 * n,
            svg == again
        ),
    )
}

// ---------------------------------------------------------------- stats

fn solve_normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = x[0].len();
    let mut a = vec![vec![0.0; 2 * k]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = x.iter().map(|r| r[i] * r[j]).sum();
        }
        a[i][k + i] = 1.0;
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&p, &q| a[p][c].abs().total_cmp(&a[q][c].abs())).unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        a[c].iter_mut().for_each(|v| *v /= d);
        for rr in 0..k {
            if rr != c {
                let f = a[rr][c];
                let pivot_row = a[c].clone();
                a[rr].iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
    }
    let inv: Vec<Vec<f64>> = a.iter().map(|r| r[k..].to_vec()).collect();
    let xty: Vec<f64> = (0..k).map(|j| x.iter().zip(y).map(|(r, v)| r[j] * v).sum()).collect();
    let b = (0..k).map(|i| (0..k).map(|j| inv[i][j] * xty[j]).sum()).collect();
    (b, inv)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

fn stats_oracle() -> Outcome {
    let mut r = rng::seeded(5150);
    let mut mismatches = Vec::new();
    for inst in 0..100 {
        let n = r.random_range(8..=40);
        let k = r.random_range(1..=4) + 1;
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| std::iter::once(1.0).chain((1..k).map(|_| r.random_range(-5.0..5.0))).collect())
            .collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>() + 2.0 * r.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = ols(&y, &Matrix::from_rows(&xs).unwrap()).map_err(|e| e.to_string())?;
        let (b, inv) = solve_normal_equations(&xs, &y);
        let resid: Vec<f64> = xs.iter().zip(&y).map(|(row, v)| v - row.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>()).collect();
        let rss: f64 = resid.iter().map(|e| e * e).sum();
        let df = (n - k) as f64;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let sd_y = (tss / (n as f64 - 1.0)).sqrt();
        let tdist = StudentsT::new(0.0, 1.0, df).unwrap();
        let mut ok = close(fit.r_squared, 1.0 - rss / tss, 1e-8) && close(fit.residual_ss, rss, 1e-8);
        for j in 0..k {
            let se = (rss / df * inv[j][j]).sqrt();
            let t = b[j] / se;
            let p = 2.0 * tdist.cdf(-t.abs());
            ok &= close(fit.coefficients[j], b[j], 1e-8)
                && close(fit.standard_errors[j], se, 1e-8)
                && close(fit.t_values[j], t, 1e-8)
                && close(fit.p_values[j], p, 1e-8);
            if j > 0 {
                let col: Vec<f64> = xs.iter().map(|row| row[j]).collect();
                let m = col.iter().sum::<f64>() / n as f64;
                let sd_x = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
                ok &= close(fit.standardized_beta[j], b[j] * sd_x / sd_y, 1e-8);
            }
        }

        let g = r.random_range(2..=5);
        let groups: Vec<Vec<f64>> = (0..g)
            .map(|gi| (0..r.random_range(2..=10)).map(|_| gi as f64 * 0.3 + r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let a = one_way_anova(&groups).map_err(|e| e.to_string())?;
        let all: Vec<f64> = groups.concat();
        let grand = all.iter().sum::<f64>() / all.len() as f64;
        let (mut ssb, mut ssw) = (0.0, 0.0);
        for grp in &groups {
            let m = grp.iter().sum::<f64>() / grp.len() as f64;
            ssb += grp.len() as f64 * (m - grand).powi(2);
            ssw += grp.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        let (d1, d2) = ((g - 1) as f64, (all.len() - g) as f64);
        let f = (ssb / d1) / (ssw / d2);
        let p = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(f);
        ok &= close(a.f_value, f, 1e-8) && close(a.p_value, p, 1e-8) && close(a.partial_eta_sq, ssb / (ssb + ssw), 1e-8);
        if !ok {
            mismatches.push(inst);
        }
    }

    let mut worst_ft = 0.0f64;
    for _ in 0..100 {
        let a: Vec<f64> = (0..r.random_range(2..=20)).map(|_| r.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..r.random_range(2..=20)).map(|_| 0.5 + r.sample::<f64, _>(StandardNormal)).collect();
        let f = one_way_anova(&[&a, &b]).map_err(|e| e.to_string())?.f_value;
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (ma, mb) = (a.iter().sum::<f64>() / na, b.iter().sum::<f64>() / nb);
        let ss = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        let t = (ma - mb) / (ss / (na + nb - 2.0) * (1.0 / na + 1.0 / nb)).sqrt();
        worst_ft = worst_ft.max((f - t * t).abs() / (t * t));
    }
    check(
        mismatches.is_empty() && worst_ft <= 1e-9,
        format!(
            "100 ols/anova instances, {} outside 1e-8 {:?}; max |F - t^2| rel {worst_ft:.1e}",
            mismatches.len(),
            mismatches
        ),
    )
}

// ---------------------------------------------------------------- windowing

fn doc_with_lengths(lengths: &[usize], target_at: usize) -> Document {
    let sentences = lengths
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut words: Vec<String> = (0..n).map(|w| format!("s{i}w{w}")).collect();
            if i == target_at {
                words[n / 2] = "bark".into();
            }
            Sentence::new(words.join(" "))
        })
        .collect();
    Document::new("doc", sentences).unwrap()
}

fn window_for(lengths: &[usize], at: usize) -> Result<((usize, usize), usize), String> {
    let doc = doc_with_lengths(lengths, at);
    let occ = &find_occurrences(&doc, "bark")[0];
    let w = build_window(&doc, occ, 100).map_err(|e| e.to_string())?;
    Ok((w.sentence_span, w.word_count))
}

fn windowing() -> Outcome {
    let hand = [
        (window_for(&[40, 20, 50, 30], 1)?, ((0, 2), 110)),
        (window_for(&[30, 99, 30], 1)?, ((1, 1), 99)),
        (window_for(&[10], 0)?, ((0, 0), 10)),
    ];
    let hand_ok = hand.iter().all(|(got, want)| got == want);

    let mut r = rng::seeded(77);
    let mut counts = Vec::new();
    for _ in 0..200 {
        let lengths: Vec<usize> = (0..40).map(|_| r.random_range(5..=40)).collect();
        let doc = doc_with_lengths(&lengths, r.random_range(0..lengths.len()));
        for occ in find_occurrences(&doc, "bark") {
            counts.push(build_window(&doc, &occ, 100).map_err(|e| e.to_string())?.word_count as f64);
        }
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    check(
        hand_ok && (85.0..=115.0).contains(&mean),
        format!(
            "hand cases {:?}; mean window length {mean:.2} over {} windows (want 85..115)",
            hand.iter().map(|h| h.0).collect::<Vec<_>>(),
            counts.len()
        ),
    )
}

// ---------------------------------------------------------------- agreement

fn labeling(source: &str, pairs: &[(&str, &str)]) -> SenseLabeling {
    let mut l = SenseLabeling::new("bark", source);
    for (c, v) in pairs {
        l.insert(*c, *v).unwrap();
    }
    l
}

fn agreement() -> Outcome {
    let mut r = rng::seeded(31337);
    let names = ["a", "b", "c"];
    let a: Vec<Option<String>> = (0..1000).map(|_| Some(names[r.random_range(0..3)].to_string())).collect();
    let b: Vec<Option<String>> = (0..1000).map(|_| Some(names[r.random_range(0..3)].to_string())).collect();
    let same = krippendorff_alpha(&[&a, &a]).map_err(|e| e.to_string())?;
    let chance = krippendorff_alpha(&[&a, &b]).map_err(|e| e.to_string())?;

    let raters = [
        labeling("rater:1", &[("aab", "A"), ("abc", "A"), ("ooa", OTHER_LABEL)]),
        labeling("rater:2", &[("aab", "A"), ("abc", "B"), ("ooa", OTHER_LABEL)]),
        labeling("rater:3", &[("aab", "B"), ("abc", "C"), ("ooa", "A")]),
    ];
    let table = RaterTable::from_labelings(&raters, None).map_err(|e| e.to_string())?;
    let majority = majority_label(&table, 2, "majority").map_err(|e| e.to_string())?;
    let truth_ok = majority.entries.len() == 1 && majority.entries.get("aab").map(String::as_str) == Some("A");
    check(
        same == 1.0 && chance.abs() <= 0.1 && truth_ok,
        format!("identical alpha {same}; independent alpha {chance:.4}; majority {:?}", majority.entries),
    )
}

// ---------------------------------------------------------------- merging

fn label_merging() -> Outcome {
    let bark_words = ["abbaio", "latrato", "corteccia"];
    let bark = SenseLabeling {
        target: "bark".into(),
        source: "auto-translation".into(),
        entries: (0..30).map(|i| (format!("bark:{i:02}"), bark_words[i % 3].to_string())).collect(),
    };
    let bark_merge = MergeMap::from_pairs([("abbaio", "dog bark"), ("latrato", "dog bark")]);

    let shade_words = [
        "un po'", "leggermente", "proteggere", "riparare", "ombra", "sfumatura", "tonalità", "paralume",
        "ombreggiatura", "tenda", "spettro", "fantasma", "tinta", "ombreggiare", "velo", "schermo",
    ];
    let shade = SenseLabeling {
        target: "shade".into(),
        source: "auto-translation".into(),
        entries: (0..64).map(|i| (format!("shade:{i:02}"), shade_words[i % 16].to_string())).collect(),
    };
    let shade_merge = MergeMap::from_pairs([
        ("un po'", "a little"),
        ("leggermente", "a little"),
        ("proteggere", "to protect from sun"),
        ("riparare", "to protect from sun"),
    ]);
    let count = |l: &SenseLabeling| distinct_labels(l).len();
    let bark_after = merge_labels(&bark, &bark_merge).map_err(|e| e.to_string())?;
    let shade_after = merge_labels(&shade, &shade_merge).map_err(|e| e.to_string())?;
    let unique: BTreeSet<&str> = shade_words.iter().copied().collect();
    check(
        unique.len() == 16 && count(&bark) == 3 && count(&bark_after) == 2 && count(&shade) == 16 && count(&shade_after) == 14,
        format!(
            "bark {} -> {}; shade {} -> {}",
            count(&bark),
            count(&bark_after),
            count(&shade),
            count(&shade_after)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("diversity-oracle", diversity_oracle),
        ("diversity-direction", diversity_direction),
        ("group-similarity-structure", group_structure),
        ("classifier-fidelity", classifier_fidelity),
        ("tsne-numerics", tsne_numerics),
        ("proxigram-structure", proxigram_structure),
        ("stats-oracle", stats_oracle),
        ("windowing", windowing),
        ("agreement", agreement),
        ("label-merging", label_merging),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name:<28} {secs:>7.2}s  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name:<28} {secs:>7.2}s  {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
