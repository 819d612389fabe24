//! Seeded reference runs frozen as a regression baseline.

#![allow(clippy::excessive_precision)]

use nqdreg::experiments::reference_config;
use nqdreg::{run_experiment, TheoremId};

const REL_TOL: f64 = 1e-12;

fn assert_frozen(theorem: TheoremId, expected: &[f64]) {
    let rep = run_experiment(&reference_config(theorem)).unwrap();
    let got = rep.statistics();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(expected) {
        assert!((g - e).abs() <= REL_TOL * e.abs(), "{theorem}: {got:?} vs {expected:?}");
    }
}

#[test]
fn mean_convergence_baseline() {
    assert_frozen(TheoremId::T31, &[1.7842402379831809e-2, 6.1473207264037856e-3, 2.5042115219999776e-3]);
}

#[test]
fn uniform_convergence_baseline() {
    assert_frozen(TheoremId::T32, &[2.7104523433578730e-2, 7.0402433591436452e-3, 2.6038845124870301e-3]);
}

#[test]
fn probability_convergence_baseline() {
    assert_frozen(TheoremId::T33, &[0.442, 0.202, 0.0455]);
}

#[test]
fn kernel_mean_convergence_baseline() {
    assert_frozen(TheoremId::C31, &[1.6034783790569566e-3, 6.1830699473373364e-4, 2.2838773380923168e-4]);
}
