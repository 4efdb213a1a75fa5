use std::collections::HashSet;

use falsitav::covering::{count_t_way_combinations, generate, generate_with, verify_coverage, CoveringArray, GenerateOptions};
use falsitav::par::Execution;
use proptest::prelude::*;

fn subsets(k: usize, t: usize) -> Vec<Vec<usize>> {
    if t == 0 {
        return vec![Vec::new()];
    }
    (0..k)
        .flat_map(|last| {
            subsets(last, t - 1).into_iter().map(move |mut s| {
                s.push(last);
                s
            })
        })
        .collect()
}

/// Every t-way value combination, checked by enumeration.
fn covers(rows: &[Vec<usize>], t: usize, domains: &[usize]) -> bool {
    subsets(domains.len(), t).iter().all(|cols| {
        let seen: HashSet<Vec<usize>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        seen.len() == cols.iter().map(|&c| domains[c]).product::<usize>()
    })
}

fn instance() -> impl Strategy<Value = (usize, Vec<usize>)> {
    prop::collection::vec(2usize..=5, 2..=7).prop_flat_map(|d| {
        let k = d.len();
        (1usize..=k.min(3), Just(d))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_arrays_cover_everything((t, domains) in instance(), seed in any::<u64>()) {
        let ca = generate(t, &domains, seed).unwrap();
        prop_assert!(verify_coverage(&ca).is_ok());
        prop_assert!(covers(ca.rows(), t, &domains));
        for row in ca.rows() {
            prop_assert!(row.iter().zip(&domains).all(|(v, d)| v < d));
        }
    }

    #[test]
    fn generation_is_deterministic_and_execution_independent((t, domains) in instance(), seed in any::<u64>()) {
        let seq = generate_with(t, &domains, seed, GenerateOptions { candidates: 20, execution: Execution::Sequential }).unwrap();
        let par = generate_with(t, &domains, seed, GenerateOptions { candidates: 20, execution: Execution::Parallel }).unwrap();
        let again = generate_with(t, &domains, seed, GenerateOptions { candidates: 20, execution: Execution::Sequential }).unwrap();
        prop_assert_eq!(seq.rows(), par.rows());
        prop_assert_eq!(seq.rows(), again.rows());
    }

    #[test]
    fn combination_count_matches_enumeration((t, domains) in instance()) {
        let brute: u128 = subsets(domains.len(), t)
            .iter()
            .map(|cols| cols.iter().map(|&c| domains[c] as u128).product::<u128>())
            .sum();
        prop_assert_eq!(count_t_way_combinations(t, &domains).unwrap(), brute);
    }

    #[test]
    fn dropping_a_row_is_detected((t, domains) in instance(), seed in any::<u64>()) {
        let ca = generate(t, &domains, seed).unwrap();
        let mut rows = ca.rows().to_vec();
        rows.pop();
        let truncated = CoveringArray::new(t, domains.clone(), rows.clone()).unwrap();
        prop_assert_eq!(verify_coverage(&truncated).is_ok(), covers(&rows, t, &domains));
    }

    #[test]
    fn csv_round_trip((t, domains) in instance(), seed in any::<u64>()) {
        let ca = generate(t, &domains, seed).unwrap();
        let mut buf = Vec::new();
        ca.write_csv(&mut buf).unwrap();
        let back = CoveringArray::read_csv(buf.as_slice(), t, Some(domains.clone())).unwrap();
        prop_assert_eq!(back.rows(), ca.rows());
    }
}
