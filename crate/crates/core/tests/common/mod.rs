//! Random instance generators and naive oracles shared by integration tests.
#![allow(dead_code)]

use arena_core::catalog::{Catalog, TableStats};
use arena_core::planmodel::{Operator, PhysicalPlan, PlanNode};
use arena_core::planspace::{build_memo, Memo, MemoBuilder};
use arena_core::sqlfront::{parse_query, QueryGraph};
use arena_core::tips::PairDistance;
use rand::Rng;

const TABLES: [&str; 5] = ["a", "b", "c", "d", "e"];

/// Random operator tree with at most `budget` nodes (at least one).
pub fn random_tree(rng: &mut impl Rng, budget: usize) -> PlanNode {
    fn build(rng: &mut impl Rng, budget: &mut usize) -> PlanNode {
        *budget -= 1;
        let cost = f64::from(rng.random_range(1..100u32));
        let roll = rng.random_range(0..10);
        if *budget >= 2 && roll < 5 {
            let op = Operator::JOINS[rng.random_range(0..3)].clone();
            let left = build(rng, budget);
            let right = if *budget >= 1 {
                build(rng, budget)
            } else {
                leaf(rng, cost)
            };
            PlanNode::new(op, None, cost, vec![left, right])
        } else if *budget >= 1 && roll < 7 {
            let name = ["Sort", "Filter"][rng.random_range(0..2)];
            PlanNode::new(name, None, cost, vec![build(rng, budget)])
        } else {
            leaf(rng, cost)
        }
    }
    fn leaf(rng: &mut impl Rng, cost: f64) -> PlanNode {
        let op = if rng.random_bool(0.5) {
            Operator::SeqScan
        } else {
            Operator::IndexScan
        };
        PlanNode::new(op, Some(TABLES[rng.random_range(0..TABLES.len())].to_string()), cost, vec![])
    }
    let mut budget = budget.max(1);
    build(rng, &mut budget)
}

pub fn random_plan(rng: &mut impl Rng, id: u64, max_nodes: usize) -> PhysicalPlan {
    let n = rng.random_range(1..=max_nodes);
    PhysicalPlan::new(id, random_tree(rng, n))
}

/// Number of ordered pairs of subtrees with identical shape, by direct
/// recursive comparison.
pub fn naive_kernel(a: &PlanNode, b: &PlanNode) -> u64 {
    fn same_shape(x: &PlanNode, y: &PlanNode) -> bool {
        x.children.len() == y.children.len() && x.children.iter().zip(&y.children).all(|(p, q)| same_shape(p, q))
    }
    let (xs, ys) = (a.preorder(), b.preorder());
    let mut k = 0;
    for x in &xs {
        for y in &ys {
            if same_shape(x, y) {
                k += 1;
            }
        }
    }
    k
}

/// Full-matrix Levenshtein distance.
pub fn levenshtein_oracle<T: PartialEq>(x: &[T], y: &[T]) -> usize {
    let mut m = vec![vec![0usize; y.len() + 1]; x.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in m[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=x.len() {
        for j in 1..=y.len() {
            let sub = m[i - 1][j - 1] + usize::from(x[i - 1] != y[j - 1]);
            m[i][j] = sub.min(m[i - 1][j] + 1).min(m[i][j - 1] + 1);
        }
    }
    m[x.len()][y.len()]
}

/// Distances over ids `0..n` stored densely.
#[derive(Debug, Clone)]
pub struct Dense {
    n: usize,
    d: Vec<f64>,
}

impl Dense {
    pub fn from_fn(n: usize, f: impl Fn(u64, u64) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = f(i as u64, j as u64);
            }
        }
        Dense { n, d }
    }
}

impl PairDistance for Dense {
    fn distance(&self, a: u64, b: u64) -> f64 {
        self.d[a as usize * self.n + b as usize]
    }
}

/// Random catalog over tables t0..t{n-1} with some indexes and distinct counts.
pub fn random_catalog(rng: &mut impl Rng, n: usize) -> Catalog {
    let tables = (0..n).map(|i| {
        let rows = rng.random_range(10..100_000u64);
        let mut t = TableStats::new(format!("t{i}"), rows, (rows / 50).max(1));
        for col in ["k", "f"] {
            if rng.random_bool(0.5) {
                t = t.with_index(col);
            }
            if rng.random_bool(0.7) {
                t = t.with_distinct(col, rng.random_range(1..=rows));
            }
        }
        t
    });
    Catalog::new(tables).expect("generated catalog is valid")
}

/// Random connected query over `n` tables: a random spanning tree of
/// equijoins, an optional extra edge, and random filters.
pub fn random_query(rng: &mut impl Rng, n: usize) -> QueryGraph {
    let mut preds = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        preds.push(format!("r{j}.k = r{i}.k"));
    }
    if n >= 3 && rng.random_bool(0.3) {
        preds.push(format!("r0.f = r{}.f", n - 1));
    }
    for i in 0..n {
        match rng.random_range(0..4) {
            0 => preds.push(format!("r{i}.f = {}", rng.random_range(0..50))),
            1 => preds.push(format!("r{i}.k < {}", rng.random_range(0..50))),
            _ => {}
        }
    }
    let from: Vec<String> = (0..n).map(|i| format!("t{i} AS r{i}")).collect();
    let mut sql = format!("SELECT * FROM {}", from.join(", "));
    if !preds.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&preds.join(" AND "));
    }
    parse_query(&sql).expect("generated query parses")
}

pub fn random_query_memo(rng: &mut impl Rng, n: usize) -> Memo {
    let cat = random_catalog(rng, n);
    let q = random_query(rng, n);
    build_memo(&q, &cat).expect("small connected query builds")
}

/// Random layered memo: leaf groups, then groups whose expressions join or
/// wrap earlier groups. Repeated child groups give repeated shapes.
pub fn random_memo(rng: &mut impl Rng) -> Memo {
    let mut b = MemoBuilder::new();
    let leaves = rng.random_range(2..=4);
    for i in 0..leaves {
        let g = b.add_group(1 << i, 10.0);
        for op in [Operator::SeqScan, Operator::IndexScan].iter().take(rng.random_range(1..=2)) {
            let cost = f64::from(rng.random_range(1..20u32));
            b.add_expression(g, op.clone(), Some(format!("t{i}")), vec![], cost).unwrap();
        }
    }
    let inner = rng.random_range(1..=3);
    for i in 0..inner {
        let g = b.add_group(1 << (leaves + i), 10.0);
        let exprs = rng.random_range(1..=3);
        for _ in 0..exprs {
            let cost = f64::from(rng.random_range(1..20u32));
            if rng.random_bool(0.8) {
                let l = rng.random_range(0..g);
                let r = rng.random_range(0..g);
                let op = Operator::JOINS[rng.random_range(0..3)].clone();
                b.add_expression(g, op, None, vec![l, r], cost).unwrap();
            } else {
                let c = rng.random_range(0..g);
                b.add_expression(g, "Sort".into(), None, vec![c], cost).unwrap();
            }
        }
    }
    let last = leaves + inner - 1;
    b.finish(last).unwrap()
}
