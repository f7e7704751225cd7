//! Savings estimation and greedy selection of a valid function set.
//!
//! Selecting both `a ← b + c` and `b ← a − c` would make each column depend on
//! the other, so selection keeps the reference → target graph acyclic.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::codec::{evaluate_scaled, CompiledModel};
use crate::driller::KRegressionCandidate;
use crate::error::Result;
use crate::table::{Sample, Table};

/// General-purpose compression factor applied on top of bit-packed widths.
pub const ENCODER_FACTOR: f64 = 0.7;

#[derive(Clone, Debug, Serialize)]
pub struct SavingsEstimate {
    pub candidate: KRegressionCandidate,
    pub original_bytes: f64,
    pub aux_bytes: f64,
    pub net_bytes: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FunctionPlan {
    pub selected: Vec<KRegressionCandidate>,
    /// `(reference, target)` pairs over selected targets.
    pub dependency_edges: Vec<(String, String)>,
    pub eval_order: Vec<String>,
    /// Estimated net savings per selected target, parallel to `selected`.
    pub net_bytes: Vec<f64>,
}

impl FunctionPlan {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn candidate(&self, target: &str) -> Option<&KRegressionCandidate> {
        self.selected.iter().find(|c| c.target == target)
    }

    pub fn total_net_bytes(&self) -> f64 {
        self.net_bytes.iter().sum()
    }

    /// Selected candidates in evaluation order.
    pub fn ordered(&self) -> Vec<&KRegressionCandidate> {
        self.eval_order
            .iter()
            .filter_map(|t| self.candidate(t))
            .collect()
    }
}

/// Bits needed to store values spanning `[min, max]` relative to `min`;
/// at least one.
pub fn span_bitwidth(min: i64, max: i64) -> u32 {
    let span = (max as i128 - min as i128).max(0) as u128;
    (128 - span.leading_zeros()).max(1)
}

/// Closed-form size estimate of virtualizing `candidate`, from sample rows.
pub fn estimate_savings(
    candidate: &KRegressionCandidate,
    table: &Table,
    sample: &Sample,
) -> Result<SavingsEstimate> {
    let target = table
        .column(&candidate.target)
        .ok_or_else(|| crate::error::Error::UnknownColumn(candidate.target.clone()))?;
    let models = candidate
        .models
        .iter()
        .map(|m| CompiledModel::compile(m, table, target.meta.precision))
        .collect::<Result<Vec<_>>>()?;
    let refs = candidate
        .references
        .iter()
        .map(|r| {
            table
                .column(r)
                .ok_or_else(|| crate::error::Error::MissingReference(r.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut target_range: Option<(i64, i64)> = None;
    let mut offset_range: Option<(i64, i64)> = None;
    let mut outliers = 0usize;
    for &row in &sample.row_indices {
        let Some(y) = target.scaled_at(row) else {
            continue;
        };
        target_range = Some(widen(target_range, y));
        if refs.iter().any(|c| c.is_null(row)) {
            outliers += 1;
            continue;
        }
        let best = models
            .iter()
            .filter_map(|m| evaluate_scaled(m, row).map(|p| y as i128 - p as i128))
            .min_by_key(|r| r.unsigned_abs());
        match best.and_then(|r| i64::try_from(r).ok()) {
            Some(off) => offset_range = Some(widen(offset_range, off)),
            None => outliers += 1,
        }
    }

    let n = table.row_count() as f64;
    let sample_n = sample.len().max(1) as f64;
    let bits = |r: Option<(i64, i64)>| r.map_or(1, |(lo, hi)| span_bitwidth(lo, hi)) as f64;
    let target_bits = bits(target_range);
    let offset_bits = bits(offset_range);

    let original_bytes = n * target_bits / 8.0 * ENCODER_FACTOR;
    let switch_bytes = if candidate.k > 1 {
        n * (candidate.k as f64).log2() / 8.0
    } else {
        0.0
    };
    let any_nullable = target.meta.nullable || refs.iter().any(|c| c.meta.nullable);
    let is_nan_bytes = if any_nullable { n / 8.0 } else { 0.0 };
    let outlier_rows = n * outliers as f64 / sample_n;
    let outlier_bytes = outlier_rows * (8.0 + target_bits / 8.0);
    let aux_bytes =
        n * offset_bits / 8.0 * ENCODER_FACTOR + switch_bytes + is_nan_bytes + outlier_bytes;
    Ok(SavingsEstimate {
        candidate: candidate.clone(),
        original_bytes,
        aux_bytes,
        net_bytes: original_bytes - aux_bytes,
    })
}

fn widen(range: Option<(i64, i64)>, v: i64) -> (i64, i64) {
    match range {
        Some((lo, hi)) => (lo.min(v), hi.max(v)),
        None => (v, v),
    }
}

/// Greedy selection by descending net savings.
///
/// A candidate is accepted when its savings are positive, its target is not
/// already selected, its reference edges keep the graph acyclic, and no
/// virtual column would end up more than `max_chain_depth` levels deep.
pub fn greedy_select(estimates: &[SavingsEstimate], max_chain_depth: usize) -> FunctionPlan {
    let mut order: Vec<&SavingsEstimate> = estimates.iter().collect();
    order.sort_by(|a, b| {
        b.net_bytes
            .total_cmp(&a.net_bytes)
            .then(
                a.candidate
                    .references
                    .len()
                    .cmp(&b.candidate.references.len()),
            )
            .then_with(|| a.candidate.target.cmp(&b.candidate.target))
    });

    let mut plan = FunctionPlan::default();
    let mut graph = DependencyGraph::default();
    for est in order {
        let cand = &est.candidate;
        if !(est.net_bytes > 0.0) || graph.is_target(&cand.target) {
            continue;
        }
        if cand
            .references
            .iter()
            .any(|r| graph.reaches(&cand.target, r))
        {
            continue;
        }
        if graph.depth_after(cand) > max_chain_depth {
            continue;
        }
        graph.add(cand);
        plan.selected.push(cand.clone());
        plan.net_bytes.push(est.net_bytes);
    }
    plan.dependency_edges = plan
        .selected
        .iter()
        .flat_map(|c| {
            c.references
                .iter()
                .filter(|r| graph.is_target(r))
                .map(|r| (r.clone(), c.target.clone()))
        })
        .collect();
    plan.eval_order = topological_order(&plan.selected);
    plan
}

/// Reference → target edges among selected candidates.
#[derive(Default)]
struct DependencyGraph {
    targets: HashMap<String, Vec<String>>,
    /// Outgoing edges: column → targets that reference it.
    consumers: HashMap<String, Vec<String>>,
}

impl DependencyGraph {
    fn is_target(&self, name: &str) -> bool {
        self.targets.contains_key(name)
    }

    fn add(&mut self, cand: &KRegressionCandidate) {
        for r in &cand.references {
            self.consumers
                .entry(r.clone())
                .or_default()
                .push(cand.target.clone());
        }
        self.targets
            .insert(cand.target.clone(), cand.references.clone());
    }

    /// Whether a path `from →* to` exists.
    fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack = vec![from];
        let mut seen = HashSet::new();
        while let Some(node) = stack.pop() {
            if node == to {
                return true;
            }
            if !seen.insert(node) {
                continue;
            }
            if let Some(next) = self.consumers.get(node) {
                stack.extend(next.iter().map(String::as_str));
            }
        }
        false
    }

    fn depth(&self, name: &str) -> usize {
        match self.targets.get(name) {
            None => 0,
            Some(refs) => 1 + refs.iter().map(|r| self.depth(r)).max().unwrap_or(0),
        }
    }

    /// Largest virtual depth in the graph once `cand` is added.
    fn depth_after(&self, cand: &KRegressionCandidate) -> usize {
        let own = 1 + cand
            .references
            .iter()
            .map(|r| self.depth(r))
            .max()
            .unwrap_or(0);
        // Targets that consume `cand.target` get deeper by the same shift.
        let mut worst = own;
        let mut stack: Vec<(&str, usize)> = vec![(cand.target.as_str(), own)];
        while let Some((node, d)) = stack.pop() {
            worst = worst.max(d);
            if let Some(next) = self.consumers.get(node) {
                stack.extend(next.iter().map(|t| (t.as_str(), d + 1)));
            }
        }
        worst
    }
}

/// Kahn's algorithm; ready targets are emitted in selection order.
fn topological_order(selected: &[KRegressionCandidate]) -> Vec<String> {
    let targets: HashSet<&str> = selected.iter().map(|c| c.target.as_str()).collect();
    let mut pending: Vec<usize> = selected
        .iter()
        .map(|c| {
            c.references
                .iter()
                .filter(|r| targets.contains(r.as_str()))
                .count()
        })
        .collect();
    let mut done = vec![false; selected.len()];
    let mut order = Vec::with_capacity(selected.len());
    while order.len() < selected.len() {
        let Some(i) = (0..selected.len()).find(|&i| !done[i] && pending[i] == 0) else {
            unreachable!("selection admitted a cycle");
        };
        done[i] = true;
        let t = &selected[i].target;
        order.push(t.clone());
        for (j, c) in selected.iter().enumerate() {
            if !done[j] && c.references.contains(t) {
                pending[j] -= 1;
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::RegressorModel;
    use crate::table::{sample_rows, Column};

    pub(crate) fn candidate(target: &str, refs: &[&str]) -> KRegressionCandidate {
        KRegressionCandidate {
            target: target.into(),
            references: refs.iter().map(|s| s.to_string()).collect(),
            k: 1,
            models: vec![RegressorModel {
                weights: refs.iter().map(|r| (r.to_string(), 1.0)).collect(),
                intercept: 0.0,
            }],
            lambda: 1.0,
            sample_max_abs_error: 0.0,
            sample_sse: 0.0,
            objective: 0.0,
            fit_rows: 0,
            objective_trace: vec![],
        }
    }

    fn est(target: &str, refs: &[&str], net: f64) -> SavingsEstimate {
        SavingsEstimate {
            candidate: candidate(target, refs),
            original_bytes: net.max(0.0) + 10.0,
            aux_bytes: net.max(0.0) + 10.0 - net,
            net_bytes: net,
        }
    }

    #[test]
    fn mutual_pair_selects_one() {
        let plan = greedy_select(
            &[est("a", &["b", "c"], 100.0), est("b", &["a", "c"], 90.0)],
            2,
        );
        assert_eq!(plan.eval_order, vec!["a"]);
        assert_eq!(plan.selected.len(), 1);
    }

    #[test]
    fn negative_gain_is_dropped() {
        assert!(greedy_select(&[est("a", &["b"], -5.0)], 2).is_empty());
        assert!(greedy_select(&[est("a", &["b"], 0.0)], 2).is_empty());
    }

    #[test]
    fn chain_is_ordered() {
        let plan = greedy_select(&[est("a", &["b"], 50.0), est("b", &["c"], 40.0)], 2);
        assert_eq!(plan.selected.len(), 2);
        assert_eq!(plan.eval_order, vec!["b", "a"]);
        assert_eq!(
            plan.dependency_edges,
            vec![("b".to_string(), "a".to_string())]
        );
    }

    #[test]
    fn chain_depth_is_bounded() {
        let ests = [
            est("a", &["b"], 50.0),
            est("b", &["c"], 40.0),
            est("c", &["d"], 30.0),
        ];
        assert_eq!(greedy_select(&ests, 2).selected.len(), 2);
        assert_eq!(greedy_select(&ests, 3).selected.len(), 3);
    }

    #[test]
    fn depth_bound_accounts_for_consumers() {
        // With a←b selected, b←c would push a to depth 2; c←d stays at depth 1.
        let ests = [
            est("a", &["b"], 50.0),
            est("b", &["c"], 40.0),
            est("c", &["d"], 30.0),
        ];
        let plan = greedy_select(&ests, 1);
        assert_eq!(plan.eval_order, vec!["a", "c"]);
    }

    #[test]
    fn duplicate_targets_keep_best() {
        let plan = greedy_select(&[est("a", &["b"], 10.0), est("a", &["c"], 20.0)], 2);
        assert_eq!(plan.selected[0].references, vec!["c"]);
        assert_eq!(plan.selected.len(), 1);
    }

    #[test]
    fn ties_prefer_fewer_references_then_name() {
        let plan = greedy_select(
            &[
                est("z", &["p", "q"], 10.0),
                est("y", &["p"], 10.0),
                est("x", &["q"], 10.0),
            ],
            2,
        );
        let order: Vec<&str> = plan.selected.iter().map(|c| c.target.as_str()).collect();
        assert_eq!(order, vec!["x", "y", "z"]);
    }

    #[test]
    fn bitwidths() {
        assert_eq!(span_bitwidth(0, 0), 1);
        assert_eq!(span_bitwidth(0, 1), 1);
        assert_eq!(span_bitwidth(-8, 7), 4);
        assert_eq!(span_bitwidth(0, 65_535), 16);
        assert_eq!(span_bitwidth(i64::MIN, i64::MAX), 64);
    }

    fn sum_table(n: usize) -> Table {
        let a: Vec<Option<i64>> = (0..n as i64).map(|i| Some((i * 7919) % 65_536)).collect();
        let b: Vec<Option<i64>> = (0..n as i64)
            .map(|i| Some((i * 104_729) % 65_536))
            .collect();
        let t: Vec<Option<i64>> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| Some(x.unwrap() + y.unwrap()))
            .collect();
        Table::new(vec![
            Column::scaled("a", 2, &a),
            Column::scaled("b", 2, &b),
            Column::scaled("t", 2, &t),
        ])
        .unwrap()
    }

    #[test]
    fn exact_function_saves() {
        let table = sum_table(5000);
        let sample = sample_rows(&table, 1000, 1);
        let e = estimate_savings(&candidate("t", &["a", "b"]), &table, &sample).unwrap();
        let n = 5000.0;
        assert!(
            (e.aux_bytes - 0.7 * n / 8.0).abs() < 1e-9,
            "{}",
            e.aux_bytes
        );
        assert!(e.net_bytes > 0.0);
    }

    #[test]
    fn intercept_only_saves_nothing() {
        let table = sum_table(5000);
        let sample = sample_rows(&table, 1000, 1);
        let mut c = candidate("t", &[]);
        c.models[0].intercept = 65_536.0 / 100.0;
        let e = estimate_savings(&c, &table, &sample).unwrap();
        assert!(e.net_bytes <= 0.0, "{e:?}");
        assert!(greedy_select(&[e], 2).is_empty());
    }

    #[test]
    fn pinned_estimate_matches_hand_computation() {
        // n = 10⁵ rows; target span 2¹⁶ − 1 (16 bits); two models whose
        // residuals span 0..=15 (4 bits); no nulls.
        let n = 100_000usize;
        let t: Vec<Option<i64>> = (0..n as i64).map(|i| Some((i * 37) % 65_536)).collect();
        let t = {
            let mut t = t;
            t[0] = Some(0);
            t[1] = Some(65_535);
            t
        };
        let noise: Vec<Option<i64>> = (0..n as i64).map(|i| Some((i * 13) % 16)).collect();
        // Reference r = t − noise at p=0, so t = r + noise.
        let r: Vec<Option<i64>> = t
            .iter()
            .zip(&noise)
            .map(|(a, b)| Some(a.unwrap() - b.unwrap()))
            .collect();
        let table =
            Table::new(vec![Column::scaled("r", 0, &r), Column::scaled("t", 0, &t)]).unwrap();
        let sample = sample_rows(&table, n, 0);
        let mut c = candidate("t", &["r"]);
        c.k = 2;
        c.models = vec![
            RegressorModel {
                weights: vec![("r".into(), 1.0)],
                intercept: 0.0,
            },
            RegressorModel {
                weights: vec![("r".into(), 1.0)],
                intercept: 1000.0,
            },
        ];
        let e = estimate_savings(&c, &table, &sample).unwrap();
        // original = 1e5·16/8·0.7 = 140 000
        // aux = 1e5·4/8·0.7 + 1e5·log2(2)/8 = 35 000 + 12 500 = 47 500
        assert!((e.original_bytes - 140_000.0).abs() < 1e-6);
        assert!((e.aux_bytes - 47_500.0).abs() < 1e-6);
        assert!((e.net_bytes - 92_500.0).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn is_acyclic(plan: &FunctionPlan) -> bool {
            let pos: HashMap<&str, usize> = plan
                .eval_order
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), i))
                .collect();
            plan.dependency_edges
                .iter()
                .all(|(r, t)| pos[r.as_str()] < pos[t.as_str()])
        }

        proptest! {
            #[test]
            fn selection_is_valid(
                raw in proptest::collection::vec(
                    (0usize..8, proptest::collection::btree_set(0usize..8, 1..4), -50.0f64..200.0),
                    0..20)
            ) {
                let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
                let ests: Vec<SavingsEstimate> = raw
                    .iter()
                    .filter_map(|(t, refs, net)| {
                        let refs: Vec<&str> = refs.iter().filter(|&&r| r != *t).map(|&r| names[r]).collect();
                        (!refs.is_empty()).then(|| est(names[*t], &refs, *net))
                    })
                    .collect();
                let plan = greedy_select(&ests, 2);
                prop_assert!(is_acyclic(&plan));
                let targets: HashSet<&str> = plan.eval_order.iter().map(String::as_str).collect();
                prop_assert_eq!(targets.len(), plan.selected.len());
                prop_assert!(plan.net_bytes.iter().all(|&n| n > 0.0));
                let best = ests.iter().map(|e| e.net_bytes).fold(0.0, f64::max);
                prop_assert!(plan.total_net_bytes() >= best);
                let again = greedy_select(&ests, 2);
                prop_assert_eq!(&again.eval_order, &plan.eval_order);
            }
        }
    }
}
