//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use arena_core::metrics::{
    c_dist, cost_dist, cost_dist_raw, dist, normalized_edit, refined_dist, relevance, s_dist, subtree_kernel,
    CostBounds, MetricSpace, TipsParams,
};
use arena_core::planmodel::{serialize_plan, PhysicalPlan, PlanDigest};
use arena_core::planspace::{build_group_forest, gfp_prune, PruneThresholds};
use arena_core::tips::{
    b_tips_basic, b_tips_heap, brute_force_opt, i_tips, laps, least_cost_baseline, prepare_from_memo,
    random_baseline, set_interestingness, Counting, MatrixDistance, PipelineConfig, PlanSource, RANDOM_BASELINE_DRAWS,
};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn worked_table() -> Outcome {
    let start = Instant::now();
    let (qep, p1, p2, p3) = (0, 1, 2, 3);
    let d = MatrixDistance::from_pairs([
        (qep, p1, 3.0),
        (qep, p2, 4.0),
        (qep, p3, 7.0),
        (p1, p2, 5.0),
        (p1, p3, 9.0),
        (p2, p3, 5.0),
    ]);
    let cands = [p1, p2, p3];
    let step = i_tips(&d, &cands, &[qep, p2]).map_err(|e| e.to_string())?;
    ensure(step == p3, || format!("i_tips returned {step}"))?;
    let basic = b_tips_basic(&d, &cands, qep, 2).map_err(|e| e.to_string())?;
    let heap = b_tips_heap(&d, &cands, qep, 2).map_err(|e| e.to_string())?;
    ensure(basic == vec![p3, p2], || format!("basic returned {basic:?}"))?;
    ensure(heap == vec![p3, p2], || format!("heap returned {heap:?}"))?;
    let (set, u) = brute_force_opt(&d, &cands, qep, 2).map_err(|e| e.to_string())?;
    ensure(set == vec![p2, p3] && u == 4.0, || format!("optimum {set:?} U={u}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("step -> Plan3, batch -> [Plan3, Plan2] in {:?}", start.elapsed()))
}

fn relevance_corners() -> Outcome {
    // (structure, content, cost) large = 1, with the expected label per category
    let corners = [
        ("I", (0.0, 0.0, 0.0), 0.0),
        ("II", (0.0, 0.0, 1.0), 1.0),
        ("III", (0.0, 1.0, 0.0), 1.0),
        ("IV", (1.0, 0.0, 0.0), 1.0),
        ("V", (0.0, 1.0, 1.0), 0.0),
        ("VI", (1.0, 0.0, 1.0), 0.0),
        ("VII", (1.0, 1.0, 0.0), 1.0),
        ("VIII", (1.0, 1.0, 1.0), 0.0),
    ];
    for (name, (s, c, cost), want) in corners {
        let got = relevance(s, c, cost);
        ensure(got == want, || format!("category {name}: rel = {got}, expected {want}"))?;
    }
    Ok("8/8 corners exact".into())
}

fn random_space(rng: &mut impl Rng, n: usize, max_nodes: usize) -> MetricSpace {
    let params = TipsParams::new(
        rng.random_range(0.0..0.5),
        rng.random_range(0.0..0.5),
        rng.random_range(0.05..1.0),
    )
    .unwrap();
    let digests: Vec<PlanDigest> = (0..=n as u64).map(|id| random_plan(rng, id, max_nodes).digest()).collect();
    let qep = digests[0].clone();
    MetricSpace::new(qep, digests[1..].to_vec(), params).unwrap()
}

fn two_approximation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2a);
    let instances = 1000;
    let mut worst_ratio = f64::INFINITY;
    for i in 0..instances {
        let n = rng.random_range(8..=25);
        let k = rng.random_range(2..=5);
        let space = random_space(&mut rng, n, 12);
        let d = Dense::from_fn(n + 1, |a, b| space.refined_with(a, b, &space.params()));
        let ids: Vec<u64> = (1..=n as u64).collect();
        let greedy = b_tips_heap(&d, &ids, 0, k).map_err(|e| e.to_string())?;
        let mut with_qep = vec![0];
        with_qep.extend(&greedy);
        let u = set_interestingness(&d, &with_qep).map_err(|e| e.to_string())?;
        let (_, opt) = brute_force_opt(&d, &ids, 0, k).map_err(|e| e.to_string())?;
        ensure(u >= opt / 2.0, || format!("instance {i}: greedy U={u} < U*/2 = {}", opt / 2.0))?;
        if opt > 0.0 {
            worst_ratio = worst_ratio.min(u / opt);
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{instances} instances, 0 violations, worst U/U* = {worst_ratio:.4}, {:?}",
        start.elapsed()
    ))
}

fn metric_laws() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e44);
    let triples = 10_000;
    let tol = 1e-9;
    let plans: Vec<PlanDigest> = (0..3 * triples as u64).map(|id| random_plan(&mut rng, id, 10).digest()).collect();
    let bounds = CostBounds::spanning(plans.iter().map(|p| p.total_cost));
    let qep = random_plan(&mut rng, u64::MAX, 10).digest();
    let p = TipsParams::default();
    type Metric<'a> = Box<dyn Fn(&PlanDigest, &PlanDigest) -> f64 + 'a>;
    let metrics: Vec<(&str, Metric, bool)> = vec![
        ("s_dist", Box::new(s_dist), true),
        ("c_dist", Box::new(c_dist), true),
        ("cost_dist", Box::new(|a, b| cost_dist(a, b, &bounds)), true),
        ("dist", Box::new(|a, b| dist(a, b, &p, &bounds)), true),
        ("refined_dist", Box::new(|a, b| refined_dist(a, b, &p, &qep, &bounds)), false),
    ];
    for t in 0..triples {
        let (a, b, c) = (&plans[3 * t], &plans[3 * t + 1], &plans[3 * t + 2]);
        for (name, m, zero_self) in &metrics {
            let (ab, ba, bc, ac) = (m(a, b), m(b, a), m(b, c), m(a, c));
            ensure(ab == ba, || format!("{name} asymmetric on triple {t}: {ab} vs {ba}"))?;
            ensure(ac <= ab + bc + tol, || format!("{name} triangle fails on triple {t}: {ac} > {ab} + {bc}"))?;
            if *zero_self {
                ensure(m(a, a) == 0.0, || format!("{name}(a, a) = {} on triple {t}", m(a, a)))?;
            }
        }
    }
    Ok(format!("{triples} triples x 5 metrics"))
}

fn kernel_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e7);
    for i in 0..500 {
        let (a, b) = (random_plan(&mut rng, 0, 30), random_plan(&mut rng, 1, 30));
        let (ka, kb) = (subtree_kernel(&a.digest(), &b.digest()), naive_kernel(&a.root, &b.root));
        ensure(ka == kb, || format!("pair {i}: hashed {ka}, naive {kb}"))?;
    }
    let big: Vec<PhysicalPlan> = (0..20)
        .map(|id| {
            let mut p = random_plan(&mut rng, id, 200);
            while p.root.node_count() < 200 {
                p = PhysicalPlan::new(id, random_tree(&mut rng, 400));
            }
            p
        })
        .collect();
    let t0 = Instant::now();
    let mut acc = 0u64;
    for a in &big {
        for b in &big {
            acc = acc.wrapping_add(subtree_kernel(&a.digest(), &b.digest()));
        }
    }
    let hashed = t0.elapsed();
    let t1 = Instant::now();
    let mut acc2 = 0u64;
    for a in &big {
        for b in &big {
            acc2 = acc2.wrapping_add(naive_kernel(&a.root, &b.root));
        }
    }
    let naive = t1.elapsed();
    ensure(acc == acc2, || "large-tree kernels disagree".into())?;
    ensure(hashed < naive, || format!("hashed {hashed:?} not faster than naive {naive:?}"))?;
    Ok(format!("500/500 exact; >=200-node trees: hashed {hashed:?} vs naive {naive:?}"))
}

fn edit_distance_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xed17);
    let alphabet = ["HashJoin", "MergeJoin", "NestedLoop", "SeqScan[a]", "SeqScan[b]", "IndexScan[a]", "Sort"];
    for i in 0..500 {
        let seq = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let n = rng.random_range(0..15);
            (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())].to_string()).collect()
        };
        let (x, y) = (seq(&mut rng), seq(&mut rng));
        let e = levenshtein_oracle(&x, &y);
        let want = if x.is_empty() && y.is_empty() {
            0.0
        } else {
            2.0 * e as f64 / (x.len() + y.len() + e) as f64
        };
        let dx = PlanDigest::from_parts(0, 0, BTreeMap::new(), x, 0.0);
        let dy = PlanDigest::from_parts(1, 0, BTreeMap::new(), y, 0.0);
        let got = c_dist(&dx, &dy);
        ensure(got == want, || format!("pair {i}: c_dist {got}, oracle {want}"))?;
    }
    let x = ["Filter", "Table Scan[Table name]"];
    let y = ["Index Scan[Table name]"];
    let ed = levenshtein_oracle(&x, &y);
    let c = normalized_edit(&x, &y);
    ensure(ed == 2 && c == 0.8, || format!("worked pair: ed = {ed}, c_dist = {c}"))?;
    Ok("500/500 exact; worked pair ed = 2, c_dist = 0.8".into())
}

fn heap_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4ea9);
    for i in 0..200 {
        let n = rng.random_range(10..=500);
        let k = rng.random_range(1..=10);
        let (basic, heap) = if i % 4 == 0 {
            // coarse integer distances force frequent ties
            let d = Dense::from_fn(n + 1, |a, b| if a == b { 0.0 } else { ((a * 31 + b * 31) % 5) as f64 });
            let ids: Vec<u64> = (1..=n as u64).collect();
            (b_tips_basic(&d, &ids, 0, k), b_tips_heap(&d, &ids, 0, k))
        } else {
            let space = random_space(&mut rng, n, 10);
            let ids = space.candidate_ids();
            (b_tips_basic(&space, &ids, 0, k), b_tips_heap(&space, &ids, 0, k))
        };
        let (basic, heap) = (basic.map_err(|e| e.to_string())?, heap.map_err(|e| e.to_string())?);
        let (sb, sh) = (serde_json::to_string(&basic).unwrap(), serde_json::to_string(&heap).unwrap());
        ensure(sb == sh, || format!("instance {i} (n={n}, k={k}): basic {sb}, heap {sh}"))?;
    }
    let space = random_space(&mut rng, 500, 10);
    let ids = space.candidate_ids();
    let counted = Counting::new(&space);
    let basic = b_tips_basic(&counted, &ids, 0, 5).map_err(|e| e.to_string())?;
    let basic_calls = counted.reset();
    let heap = b_tips_heap(&counted, &ids, 0, 5).map_err(|e| e.to_string())?;
    let heap_calls = counted.reset();
    ensure(basic == heap, || "n=500 outputs differ".into())?;
    ensure(heap_calls < 5 * 500, || format!("heap made {heap_calls} evaluations, k*n = 2500"))?;
    ensure(heap_calls < basic_calls, || format!("heap {heap_calls} vs basic {basic_calls}"))?;
    Ok(format!(
        "200/200 identical; n=500 k=5: heap {heap_calls} evaluations, basic {basic_calls}, k*n = 2500"
    ))
}

fn counting_unranking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc047);
    let mut total = 0u64;
    for q in 0..24 {
        let tables = 1 + q % 4;
        let memo = random_query_memo(&mut rng, tables);
        let count = memo.count_plans();
        let mut seen = HashSet::new();
        let mut min: Option<PhysicalPlan> = None;
        let mut min_ties = 0;
        for plan in memo.plans(None) {
            let mut anon = plan.clone();
            anon.plan_id = 0;
            seen.insert(serialize_plan(&anon));
            match &min {
                Some(m) if plan.total_cost > m.total_cost => {}
                Some(m) if plan.total_cost == m.total_cost => min_ties += 1,
                _ => {
                    min = Some(plan);
                    min_ties = 0;
                }
            }
        }
        ensure(seen.len() as u64 == count, || {
            format!("query {q}: count_plans {count}, distinct unranked {}", seen.len())
        })?;
        let qep = memo.qep();
        let min = min.expect("nonempty space");
        ensure(qep.total_cost == min.total_cost, || {
            format!("query {q}: qep cost {} vs enumerated min {}", qep.total_cost, min.total_cost)
        })?;
        if min_ties == 0 {
            ensure(qep == min, || format!("query {q}: qep differs from the unique cheapest plan"))?;
        }
        total += count;
    }
    Ok(format!("24 queries (1-4 tables), {total} plans unranked"))
}

fn gfp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9f9);
    let mut shapes_checked = 0;
    let mut members_checked = 0;
    for q in 0..20 {
        let memo = if q % 2 == 0 {
            random_query_memo(&mut rng, 2 + q % 3)
        } else {
            random_memo(&mut rng)
        };
        let open = PipelineConfig {
            tau_g: 0,
            thresholds: PruneThresholds::new(1.01, 1.01).unwrap(),
            ..PipelineConfig::default()
        };
        let pruned = prepare_from_memo(&memo, &open).map_err(|e| e.to_string())?;
        let unpruned = prepare_from_memo(&memo, &PipelineConfig::default()).map_err(|e| e.to_string())?;
        ensure(pruned.pruned == 0, || format!("memo {q}: 1.01 thresholds pruned {}", pruned.pruned))?;
        let n = unpruned.space.candidate_ids().len();
        if n > 0 {
            let k = n.min(5);
            let a = pruned.space.clone();
            let b = unpruned.space.clone();
            let sa = b_tips_heap(&a, &a.candidate_ids(), a.qep_id(), k).map_err(|e| e.to_string())?;
            let sb = b_tips_heap(&b, &b.candidate_ids(), b.qep_id(), k).map_err(|e| e.to_string())?;
            ensure(sa == sb, || format!("memo {q}: pruned run {sa:?} vs unpruned {sb:?}"))?;
        }

        let qep = memo.qep().digest();
        let (lo, hi) = memo.cost_range();
        let bounds = CostBounds::new(lo, hi).unwrap();
        let ids: Vec<u64> = (0..memo.count_plans()).collect();
        let digests: Vec<PlanDigest> = memo.plans(None).map(|p| p.digest()).collect();
        for _ in 0..5 {
            let t = PruneThresholds::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)).unwrap();
            let kept = gfp_prune(&ids, &qep, t, &memo, &bounds).map_err(|e| e.to_string())?.kept;
            let naive: Vec<u64> = digests
                .iter()
                .filter(|d| {
                    d.plan_id == qep.plan_id
                        || !(s_dist(d, &qep) >= t.tau_d
                            && cost_dist_raw(d.total_cost, qep.total_cost, &bounds) >= t.tau_c)
                })
                .map(|d| d.plan_id)
                .collect();
            ensure(kept == naive, || format!("memo {q}: pruned set differs from per-plan filter under {t:?}"))?;
        }

        let forest = build_group_forest(&memo).map_err(|e| e.to_string())?;
        for shape in forest.shapes() {
            let cached = s_dist(&shape.tree.structure_digest(), &qep);
            for choice in memo.choices_with_tree(&shape.tree) {
                let id = memo.rank(&choice);
                let direct = s_dist(&digests[id as usize], &qep);
                ensure(cached == direct, || format!("memo {q}: shape s_dist {cached}, plan {id} s_dist {direct}"))?;
                members_checked += 1;
            }
            shapes_checked += 1;
        }
    }
    Ok(format!(
        "20 memos; open thresholds match unpruned; pruned sets match per-plan filter; {shapes_checked} shapes / {members_checked} members agree"
    ))
}

fn laps_containment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a95);
    let mut found = 0;
    for q in 0..20 {
        let memo = if q % 2 == 0 {
            random_query_memo(&mut rng, 2 + q % 3)
        } else {
            random_memo(&mut rng)
        };
        let qep = memo.qep();
        let qd = qep.digest();
        let same: Vec<u64> = memo
            .plans(None)
            .filter(|p| p.plan_id != qep.plan_id)
            .filter(|p| {
                let d = p.digest();
                d.root_shape == qd.root_shape && d.structure_multiset == qd.structure_multiset
            })
            .map(|p| p.plan_id)
            .collect();
        let n = rng.random_range(0..=(memo.count_plans() / 4) as usize);
        let seed = rng.random();
        let run = |seed: u64| laps(&qep, PlanSource::Memo(&memo), n, &mut ChaCha8Rng::seed_from_u64(seed));
        let out = run(seed).map_err(|e| e.to_string())?;
        let again = run(seed).map_err(|e| e.to_string())?;
        ensure(out == again, || format!("memo {q}: same seed gave different samples"))?;
        ensure(!out.contains(&qep.plan_id), || format!("memo {q}: QEP in output"))?;
        let missing: Vec<_> = same.iter().filter(|id| out.binary_search(id).is_err()).collect();
        ensure(missing.is_empty(), || format!("memo {q}: same-structure plans missing: {missing:?}"))?;
        found += same.len();
    }
    Ok(format!("20 memos, {found} same-structure plans, 100% contained, seeded runs identical"))
}

fn baseline_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xba5e);
    let instances = 100;
    let mut strict = 0;
    let mut done = 0;
    while done < instances {
        let tables = rng.random_range(3..=4);
        let memo = random_query_memo(&mut rng, tables);
        let prepared = prepare_from_memo(&memo, &PipelineConfig::default()).map_err(|e| e.to_string())?;
        let space = prepared.space;
        let ids = space.candidate_ids();
        let k = rng.random_range(2..=5);
        if ids.len() < k + 1 {
            continue;
        }
        let qep = space.qep_id();
        let greedy = b_tips_heap(&space, &ids, qep, k).map_err(|e| e.to_string())?;
        let mut with_qep = vec![qep];
        with_qep.extend(&greedy);
        let u = set_interestingness(&space, &with_qep).map_err(|e| e.to_string())?;
        let (_, u_rand) =
            random_baseline(&space, &ids, qep, k, RANDOM_BASELINE_DRAWS, &mut rng).map_err(|e| e.to_string())?;
        let (_, u_cost) = least_cost_baseline(&space, k).map_err(|e| e.to_string())?;
        ensure(u >= u_rand && u >= u_cost, || {
            format!("instance {done}: greedy {u}, random {u_rand}, least-cost {u_cost}")
        })?;
        if u > u_rand && u > u_cost {
            strict += 1;
        }
        done += 1;
    }
    ensure(strict * 100 >= 80 * instances, || format!("strict improvement on {strict}/{instances}"))?;
    Ok(format!("{instances} instances, never worse, strictly better on {strict}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("worked example (step and batch selection)", worked_table),
        ("relevance corners", relevance_corners),
        ("greedy 2-approximation", two_approximation),
        ("metric laws", metric_laws),
        ("subtree kernel oracle", kernel_oracle),
        ("edit distance oracle", edit_distance_oracle),
        ("heap/basic equivalence", heap_equivalence),
        ("counting and unranking", counting_unranking),
        ("group forest pruning", gfp),
        ("LAPS containment", laps_containment),
        ("baseline dominance", baseline_dominance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
