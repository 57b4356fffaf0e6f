mod common;

use common::props::*;
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn severity_is_total_and_matches_table(a in label(), b in label()) {
        severity_is_total(a, b)?;
    }

    #[test]
    fn max_severity_is_order_independent(labels in prop::collection::vec(label(), 1..8), seed in any::<u64>()) {
        max_severity_ignores_order(labels, seed)?;
    }

    #[test]
    fn collapsing_twice_changes_nothing(df in dataflow(false, false)) {
        collapse_is_idempotent(df)?;
    }

    #[test]
    fn injective_fd_reflexive(fds in fd_set(), x in attr_set()) {
        injective_fd_is_reflexive(fds, x)?;
    }

    #[test]
    fn injective_fd_transitive(fds in fd_set(), a in nonempty_attr_set()) {
        injective_fd_is_transitive(fds, a)?;
    }

    #[test]
    fn injective_fd_is_monotone_in_fds(fds in fd_set(), extra in (nonempty_attr_set(), nonempty_attr_set()), a in nonempty_attr_set(), b in nonempty_attr_set()) {
        injective_fd_is_monotone(fds, extra, a, b)?;
    }

    #[test]
    fn compatible_agrees_with_subset_enumeration(fds in fd_set(), p in nonempty_attr_set(), seal in nonempty_attr_set()) {
        compatible_agrees_with_subsets(fds, p, seal)?;
    }

    #[test]
    fn compatible_is_monotone_in_partition(fds in fd_set(), p in nonempty_attr_set(), x in attr_set(), seal in nonempty_attr_set()) {
        compatible_is_monotone(fds, p, x, seal)?;
    }

    #[test]
    fn analysis_is_monotone_under_source_escalation(df in dataflow(false, false), pick in any::<prop::sample::Index>(), step in any::<prop::sample::Index>()) {
        escalation_is_monotone(df, pick, step)?;
    }

    #[test]
    fn schedules_replay_deterministically(seed in any::<u64>()) {
        schedules_replay(seed)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn confluent_graphs_stay_at_async(df in dataflow(false, true)) {
        confluent_stays_async(df)?;
    }
}
