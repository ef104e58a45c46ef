use hardylab_core::jacobi::*;
use hardylab_core::ExecPolicy;

#[test]
fn dominance_holds_on_random_systems() {
    let rep = dominance_trials(5, 60, &[0.0, 0.5, 1.0], ExecPolicy::Sequential).unwrap();
    assert_eq!(rep.violations, 0, "min slack {}", rep.min_slack);
}

#[test]
fn newton_chain_on_random_vectors() {
    let rep = newton_trials(9, 2000).unwrap();
    assert_eq!(rep.violations, 0);
}

#[test]
fn dominance_trials_are_reproducible() {
    let a = dominance_trials(21, 12, &[0.5], ExecPolicy::Parallel).unwrap();
    let b = dominance_trials(21, 12, &[0.5], ExecPolicy::Sequential).unwrap();
    assert_eq!(a, b);
}
