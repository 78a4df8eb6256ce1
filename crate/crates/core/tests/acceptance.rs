//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use solar::analytics::{distance_curve, spearman, win_rate_matrix};
use solar::corpus::{map_verdict, Corpus, Instance, Judgment, Situation, VerdictCode};
use solar::eval::{evaluate, macro_f1, make_splits};
use solar::inference::{
    controversiality_of, is_controversial, solar_strategy, Controversiality, PredictionRecord, SOLAR_CONTROVERSIAL,
    SOLAR_DEFAULT,
};
use solar::providers::{Embedder, EmbeddingVector};
use solar::retrieval::{retrieve, HistoryEntry, UserHistory, VectorSpace};
use solar::values::{
    cluster_values, parse_schwartz, ClusterOrigin, ClusterParams, ClusterTable, TradeOff, ValueCluster,
};
use solar::Result;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn vec_of(v: Vec<f64>) -> EmbeddingVector {
    EmbeddingVector::new(v).unwrap()
}

fn judgment(a: bool) -> Judgment {
    if a {
        Judgment::Acceptable
    } else {
        Judgment::Unacceptable
    }
}

fn situation(id: &str) -> Situation {
    Situation {
        situation_id: id.into(),
        title: format!("title of {id}"),
        body: String::new(),
    }
}

fn instance(id: &str, sid: &str, redditor: &str, code: VerdictCode) -> Instance {
    Instance {
        instance_id: id.into(),
        situation_id: sid.into(),
        redditor_id: redditor.into(),
        comment: format!("comment {id}"),
        verdict: code,
        judgment: map_verdict(code),
        created_at: None,
    }
}

// ---------------------------------------------------------------- verdicts

fn verdict_mapping() -> Check {
    let expected = [
        ("NTA", Some(Judgment::Acceptable)),
        ("NAH", Some(Judgment::Acceptable)),
        ("YWNBTA", Some(Judgment::Acceptable)),
        ("YTA", Some(Judgment::Unacceptable)),
        ("ESH", Some(Judgment::Unacceptable)),
        ("YWBTA", Some(Judgment::Unacceptable)),
        ("INFO", None),
    ];
    ensure(VerdictCode::ALL.len() == expected.len(), || "code count".into())?;
    for (code, want) in expected {
        let c: VerdictCode = code.parse().map_err(|e| format!("{code}: {e}"))?;
        ensure(map_verdict(c) == want, || format!("{code} maps to {:?}", map_verdict(c)))?;
    }

    // INFO must never reach splits, histories or scoring.
    let mut situations = Vec::new();
    let mut instances = Vec::new();
    for i in 0..12 {
        let sid = format!("s{i}");
        situations.push(situation(&sid));
        let code = VerdictCode::ALL[i % 7];
        instances.push(instance(&format!("u-{i}"), &sid, "u", code));
    }
    let corpus = Corpus::new(situations, instances).map_err(|e| e.to_string())?;
    let info: BTreeSet<String> = corpus
        .instances
        .iter()
        .filter(|i| i.verdict == VerdictCode::Info)
        .map(|i| i.instance_id.clone())
        .collect();
    ensure(!info.is_empty(), || "fixture lacks INFO".into())?;
    ensure(corpus.judged().all(|i| !info.contains(&i.instance_id)), || "judged() yields INFO".into())?;
    let splits = make_splits(&corpus, "u", 0, 2).map_err(|e| e.to_string())?;
    for s in &splits {
        for id in s.train.iter().chain(&s.validation).chain(&s.test) {
            ensure(!info.contains(id), || format!("INFO instance {id} in split"))?;
        }
    }
    let mut rec = record("u", "u-info", Some(Judgment::Acceptable), None, 0);
    rec.situation_id = "s6".into();
    let base = record("u", "u-0", Some(Judgment::Acceptable), Some(Judgment::Acceptable), 0);
    let with = evaluate(&[base.clone(), rec], &corpus).map_err(|e| e.to_string())?;
    ensure(with.scored_predictions == 1, || "gold-less record was scored".into())?;
    Ok("7 codes; INFO absent from judged set, splits and scoring".into())
}

// --------------------------------------------------------------- retrieval

fn oracle(entries: &[HistoryEntry], space: VectorSpace, q: &[f64], k: usize, exclude: Option<&str>) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = entries
        .iter()
        .filter(|e| Some(e.situation.situation_id.as_str()) != exclude)
        .map(|e| {
            let v = e.vector(space).as_slice();
            let d = v.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (d, e.instance_id.as_str())
        })
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, id)| id.to_string()).collect()
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize, grid: bool) -> Vec<f64> {
    (0..dim)
        .map(|_| if grid { rng.gen_range(-2i32..=2) as f64 } else { rng.gen_range(-1.0..1.0) })
        .collect()
}

fn retrieval_oracle() -> Check {
    let schwartz = parse_schwartz("[Situation] Security, Benevolence\n[Comment] Power, Achievement").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut queries_run = 0;
    let mut tie_queries = 0;
    for h in 0..200 {
        let n = rng.gen_range(1..=1000);
        let dim = rng.gen_range(16..=256);
        // Grid-valued histories force exact distance ties.
        let grid = h % 2 == 0;
        let mut pool: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut entries = Vec::with_capacity(n);
        for i in 0..n {
            let (sv, vv) = if !pool.is_empty() && rng.gen_bool(0.2) {
                pool[rng.gen_range(0..pool.len())].clone()
            } else {
                let pair = (random_vec(&mut rng, dim, grid), random_vec(&mut rng, dim, grid));
                pool.push(pair.clone());
                pair
            };
            entries.push(HistoryEntry {
                instance_id: format!("i{:05}", rng.gen_range(0..100_000) * 1000 + i),
                situation: situation(&format!("s{}", rng.gen_range(0..n.max(2) / 2 + 1))),
                comment: String::new(),
                judgment: judgment(rng.gen_bool(0.5)),
                tradeoffs: Vec::new(),
                schwartz,
                situation_vec: vec_of(sv),
                value_vec: vec_of(vv.clone()),
                schwartz_vec: vec_of(vv),
            });
        }
        let history = UserHistory::new("u", "m", entries.clone()).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let space = if rng.gen_bool(0.5) { VectorSpace::Situation } else { VectorSpace::Value };
            let q = if rng.gen_bool(0.3) {
                entries[rng.gen_range(0..n)].vector(space).as_slice().to_vec()
            } else {
                random_vec(&mut rng, dim, grid)
            };
            let k = rng.gen_range(1..=10);
            let ex_owned = if rng.gen_bool(0.3) {
                Some(entries[rng.gen_range(0..n)].situation.situation_id.clone())
            } else {
                None
            };
            let exclude = ex_owned.as_deref();
            let want = oracle(&entries, space, &q, k, exclude);
            let got = match retrieve(&history, space, &vec_of(q.clone()), k, exclude) {
                Ok(r) => r.ids(),
                Err(_) if want.is_empty() => Vec::new(),
                Err(e) => return Err(format!("history {h}: {e}")),
            };
            ensure(got == want, || format!("history {h} {space:?}: got {got:?}, oracle {want:?}"))?;
            let dists: Vec<f64> = entries
                .iter()
                .filter(|e| want.contains(&e.instance_id))
                .map(|e| {
                    let v = e.vector(space).as_slice();
                    v.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                })
                .collect();
            let uniq: BTreeSet<u64> = dists.iter().map(|d| d.to_bits()).collect();
            if uniq.len() < dists.len() {
                tie_queries += 1;
            }
            queries_run += 1;
        }
    }
    ensure(tie_queries > 100, || format!("only {tie_queries} queries exercised ties"))?;
    Ok(format!("{queries_run} queries over 200 histories, {tie_queries} with tied distances"))
}

// ----------------------------------------------------------------- metrics

fn oracle_macro_f1(pairs: &[(Judgment, Judgment)]) -> f64 {
    // Confusion matrix indexed [gold][pred].
    let mut m = [[0u64; 2]; 2];
    let idx = |j: Judgment| (j == Judgment::Unacceptable) as usize;
    for &(p, g) in pairs {
        m[idx(g)][idx(p)] += 1;
    }
    let mut f1s = Vec::new();
    for c in 0..2 {
        let support = m[c][0] + m[c][1];
        if support == 0 {
            continue;
        }
        let tp = m[c][c] as f64;
        let fp = m[1 - c][c] as f64;
        let fn_ = m[c][1 - c] as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = tp / (tp + fn_);
        f1s.push(if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 });
    }
    f1s.iter().sum::<f64>() / f1s.len() as f64
}

fn record(redditor: &str, id: &str, pred: Option<Judgment>, gold: Option<Judgment>, fold: usize) -> PredictionRecord {
    PredictionRecord {
        instance_id: id.into(),
        redditor_id: redditor.into(),
        situation_id: "s0".into(),
        fold,
        strategy: SOLAR_DEFAULT,
        retrieved_ids: Vec::new(),
        distances: Vec::new(),
        prompt_text: String::new(),
        raw_replies: Vec::new(),
        parsed: pred.into_iter().collect(),
        final_judgment: pred,
        gold,
        controversial: false,
        agreement: None,
        failed: false,
        error: None,
    }
}

fn two_redditor_corpus(per_redditor: &[(&str, usize)]) -> Corpus {
    let mut instances = Vec::new();
    for (r, n) in per_redditor {
        for i in 0..*n {
            instances.push(instance(&format!("{r}-{i}"), "s0", r, VerdictCode::Nta));
        }
    }
    Corpus::new(vec![situation("s0")], instances).unwrap()
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.gen_range(1..200);
        let bias = rng.gen_range(0.0..1.0);
        let pairs: Vec<(Judgment, Judgment)> =
            (0..n).map(|_| (judgment(rng.gen_bool(0.5)), judgment(rng.gen_bool(bias)))).collect();
        let got = macro_f1(&pairs).map_err(|e| e.to_string())?;
        let want = oracle_macro_f1(&pairs);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || format!("case {case}: {got} vs {want}"))?;
    }

    // r1 predicts perfectly: F1 1.0. r2 gets one of each class wrong out of
    // two per class: per-class F1 0.5 each, macro 0.5. Mean over redditors 0.75.
    use Judgment::{Acceptable as A, Unacceptable as U};
    let build = |r1_copies: usize| {
        let mut recs = Vec::new();
        for c in 0..r1_copies {
            recs.push(record("r1", &format!("r1-{}", 2 * c), Some(A), Some(A), 0));
            recs.push(record("r1", &format!("r1-{}", 2 * c + 1), Some(U), Some(U), 0));
        }
        for (i, (p, g)) in [(A, A), (U, A), (A, U), (U, U)].into_iter().enumerate() {
            recs.push(record("r2", &format!("r2-{i}"), Some(p), Some(g), 0));
        }
        let corpus = two_redditor_corpus(&[("r1", 2 * r1_copies), ("r2", 4)]);
        evaluate(&recs, &corpus).map(|r| r.overall)
    };
    for copies in [1, 10, 250] {
        let overall = build(copies).map_err(|e| e.to_string())?;
        ensure((overall - 0.75).abs() <= 1e-12, || format!("r1 weight {copies}: overall {overall}"))?;
    }
    Ok(format!("1000 cases, max |diff| {worst:.1e}; two-redditor example 0.75 at weights 1/10/250"))
}

// ----------------------------------------------------------------- routing

fn routing_boundary() -> Check {
    let threshold = 0.70;
    let mut out = Vec::new();
    for (agreement, want) in [(0.69, true), (0.70, false), (0.71, false)] {
        let got = is_controversial(agreement, threshold);
        ensure(got == want, || format!("agreement {agreement}: controversial {got}"))?;
        let c = Controversiality {
            agreement: Some(agreement),
            controversial: got,
            judgments: 100,
        };
        let strategy = solar_strategy(&c);
        let want_strategy = if want { SOLAR_CONTROVERSIAL } else { SOLAR_DEFAULT };
        ensure(strategy == want_strategy, || format!("agreement {agreement}: strategy {strategy:?}"))?;
        out.push(format!("{agreement}->{got}"));
    }
    // Same boundary reached from raw judgments: 69, 70, 71 of 100 agree.
    for (majority, want) in [(69, true), (70, false), (71, false)] {
        let js: Vec<Judgment> = (0..100).map(|i| judgment(i < majority)).collect();
        let c = controversiality_of(&js, threshold);
        ensure(c.controversial == want, || format!("{majority}/100: {c:?}"))?;
    }
    Ok(out.join(", "))
}

// --------------------------------------------------------------------- e2e

fn end_to_end() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = common::write_fixture(&tmp.path().join("fx"));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    common::run_pipeline(&fx, &a)?;
    common::run_pipeline(&fx, &b)?;
    let (sa, sb) = (common::snapshot(&a), common::snapshot(&b));
    ensure(sa.keys().eq(sb.keys()), || "artifact sets differ".into())?;
    for (k, v) in &sa {
        ensure(sb[k] == *v, || format!("{k} differs between runs"))?;
    }
    let records = common::read_jsonl(&a.join("predictions/solar.jsonl"));
    ensure(!records.is_empty(), || "no predictions".into())?;
    for r in &records {
        let i = common::situation_number(r["situation_id"].as_str().unwrap());
        let got: Option<Judgment> = serde_json::from_value(r["final"].clone()).map_err(|e| e.to_string())?;
        ensure(got == Some(common::model_label(i)), || format!("{}: final {got:?}", r["instance_id"]))?;
        let want_retrieval = if r["controversial"] == true { "value_tradeoff" } else { "situation" };
        ensure(r["strategy"]["retrieval"] == want_retrieval, || format!("{}: routing", r["instance_id"]))?;
    }
    Ok(format!("{} artifacts byte-identical; {} predictions match fixture labels", sa.len(), records.len()))
}

// -------------------------------------------------------------- clustering

struct TableEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl Embedder for TableEmbedder {
    fn model_name(&self) -> &str {
        "table"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| vec_of(self.table[t].clone())).collect())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn clustering_partition() -> Check {
    let dim = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
    let mut phrases = Vec::new();
    let mut planted = Vec::new();
    let mut table = HashMap::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..200 {
            let p = format!("planted value {c} variant {i}");
            let v: Vec<f64> = center.iter().map(|x| x + 0.5 * gaussian(&mut rng)).collect();
            table.insert(p.clone(), v);
            phrases.push(p);
            planted.push(c);
        }
    }
    let mut order: Vec<usize> = (0..phrases.len()).collect();
    order.shuffle(&mut rng);
    let phrases: Vec<String> = order.iter().map(|&i| phrases[i].clone()).collect();
    let planted: Vec<usize> = order.iter().map(|&i| planted[i]).collect();

    let params = ClusterParams {
        embed_dim: dim,
        ..ClusterParams::default()
    };
    let clusters = cluster_values(&phrases, &TableEmbedder { dim, table }, &params).map_err(|e| e.to_string())?;
    let mut assigned = vec![0usize; phrases.len()];
    let mut owner = vec![usize::MAX; phrases.len()];
    for (ci, c) in clusters.iter().enumerate() {
        for &m in &c.member_ids {
            assigned[m] += 1;
            owner[m] = ci;
        }
    }
    ensure(assigned.iter().all(|&n| n == 1), || "a phrase is unassigned or assigned twice".into())?;
    let mut worst: f64 = 1.0;
    for c in 0..5 {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &p) in planted.iter().enumerate() {
            if p == c {
                *counts.entry(owner[i]).or_default() += 1;
            }
        }
        let best = *counts.values().max().unwrap() as f64 / 200.0;
        worst = worst.min(best);
    }
    ensure(worst >= 0.95, || format!("worst planted-cluster purity {worst:.3}"))?;
    Ok(format!("{} output clusters; worst planted purity {:.3}", clusters.len(), worst))
}

// --------------------------------------------------------------- win rates

fn table_of(groups: &[&[&str]]) -> ClusterTable {
    let mut next = 0;
    let clusters = groups
        .iter()
        .enumerate()
        .map(|(id, members)| {
            let ids: Vec<usize> = (next..next + members.len()).collect();
            next += members.len();
            ValueCluster {
                cluster_id: id,
                name: format!("Cluster {id}"),
                descriptor: String::new(),
                members: members.iter().map(|s| s.to_string()).collect(),
                member_ids: ids.clone(),
                exemplar_ids: ids,
                origin: ClusterOrigin::Density,
            }
        })
        .collect();
    ClusterTable::new(clusters)
}

fn win_rates() -> Check {
    let groups: [&[&str]; 4] = [
        &["honesty with close family", "telling the plain truth"],
        &["keeping the family peace", "avoiding open conflict"],
        &["personal financial independence"],
        &["supporting struggling relatives"],
    ];
    let table = table_of(&groups);
    let phrases: Vec<&str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut defined = 0;
    for trial in 0..200 {
        let mut logs: BTreeMap<String, Vec<TradeOff>> = BTreeMap::new();
        for r in 0..rng.gen_range(1..6) {
            let list = logs.entry(format!("r{r}")).or_default();
            for t in 0..rng.gen_range(0..40) {
                let a = phrases[rng.gen_range(0..phrases.len())];
                let b = phrases[rng.gen_range(0..phrases.len())];
                if let Ok(tr) = TradeOff::new(a, b, &format!("i{r}-{t}")) {
                    list.push(tr);
                }
            }
        }
        let m = match win_rate_matrix(&logs, &table, 1 + trial % 4) {
            Ok(m) => m,
            Err(solar::Error::Empty(_)) => continue,
            Err(e) => return Err(e.to_string()),
        };
        for r in &m.cols {
            for a in 0..groups.len() {
                for b in 0..groups.len() {
                    let (la, lb) = (table.label(a), table.label(b));
                    match (m.rate(r, &la, &lb), m.rate(r, &lb, &la)) {
                        (Some(x), Some(y)) => {
                            defined += 1;
                            ensure((x + y - 1.0).abs() <= 1e-12, || format!("trial {trial}: {x} + {y}"))?;
                        }
                        (None, None) => {}
                        other => return Err(format!("trial {trial}: one-sided cell {other:?}")),
                    }
                }
            }
        }
    }
    ensure(defined > 100, || format!("only {defined} defined cells"))?;

    // Worked example: 9 of 10 trade-offs favour honesty over peace.
    let mut logs: BTreeMap<String, Vec<TradeOff>> = BTreeMap::new();
    let list = logs.entry("r".into()).or_default();
    for i in 0..9 {
        list.push(TradeOff::new("telling the plain truth", "keeping the family peace", &format!("i{i}")).unwrap());
    }
    list.push(TradeOff::new("avoiding open conflict", "honesty with close family", "i9").unwrap());
    let m = win_rate_matrix(&logs, &table, 3).map_err(|e| e.to_string())?;
    let rate = m.rate("r", &table.label(0), &table.label(1));
    ensure(rate == Some(0.9), || format!("worked example gives {rate:?}"))?;
    Ok(format!("{defined} defined cells complementary; 9/10 -> {}", rate.unwrap()))
}

// ---------------------------------------------------------- distance trend

fn distance_trend() -> Check {
    let dim = 16;
    let sizes = [10, 20, 50, 100, 200, 500, 1000];
    let schwartz = parse_schwartz("[Situation] Security, Benevolence\n[Comment] Power, Achievement").unwrap();
    let mut rhos = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let entries: Vec<HistoryEntry> = (0..1000)
            .map(|i| {
                let v = vec_of((0..dim).map(|_| gaussian(&mut rng)).collect());
                HistoryEntry {
                    instance_id: format!("i{i:04}"),
                    situation: situation(&format!("s{i}")),
                    comment: String::new(),
                    judgment: judgment(i % 2 == 0),
                    tradeoffs: Vec::new(),
                    schwartz,
                    situation_vec: v.clone(),
                    value_vec: v.clone(),
                    schwartz_vec: v,
                }
            })
            .collect();
        let history = UserHistory::new("u", "m", entries).map_err(|e| e.to_string())?;
        let queries: Vec<EmbeddingVector> =
            (0..50).map(|_| vec_of((0..dim).map(|_| gaussian(&mut rng)).collect())).collect();
        let curve = distance_curve(&history, &queries, &sizes, 5, seed).map_err(|e| e.to_string())?;
        ensure(curve.len() == sizes.len(), || format!("seed {seed}: curve has {} points", curve.len()))?;
        for w in curve.windows(2) {
            ensure(w[1].1 <= w[0].1, || format!("seed {seed}: distance rises {w:?}"))?;
        }
        let xs: Vec<f64> = curve.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
        let rho = spearman(&xs, &ys).ok_or_else(|| format!("seed {seed}: undefined correlation"))?;
        ensure(rho <= -0.8, || format!("seed {seed}: spearman {rho}"))?;
        rhos.push(rho);
    }
    let max = rhos.iter().cloned().fold(f64::MIN, f64::max);
    Ok(format!("20 seeds non-increasing; max spearman {max:.3}"))
}

fn main() {
    let checks: [Criterion; 8] = [
        ("verdict mapping", verdict_mapping, Duration::from_secs(1)),
        ("retrieval oracle equivalence", retrieval_oracle, Duration::from_secs(30)),
        ("metric oracle", metric_oracle, Duration::from_secs(5)),
        ("routing boundary", routing_boundary, Duration::from_secs(1)),
        ("end-to-end mock run", end_to_end, Duration::from_secs(60)),
        ("clustering partition", clustering_partition, Duration::from_secs(60)),
        ("win-rate complementarity", win_rates, Duration::from_secs(30)),
        ("distance trend", distance_trend, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, check, budget) in checks {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        match result {
            Ok(detail) if took <= budget => println!("PASS {name} ({:.2}s): {detail}", took.as_secs_f64()),
            Ok(detail) => {
                failed += 1;
                println!("FAIL {name} ({:.2}s, budget {}s): {detail}", took.as_secs_f64(), budget.as_secs());
            }
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({:.2}s): {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
