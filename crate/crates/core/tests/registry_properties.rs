use shapefuzz::datagen::{gen_random, GenerationConfig};
use shapefuzz::registry::{ExecCost, Registry, ValidationOutcome};

#[test]
fn oracles_are_pure() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        for t in gen_random(&op.space, &GenerationConfig::new(1_000, 21)) {
            assert_eq!(op.validate(&t).unwrap(), op.validate(&t).unwrap(), "{}", op.name);
        }
    }
}

#[test]
fn bugs_only_fire_on_accepted_inputs() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        let bug = op.bug().expect("every built-in operator has an injected bug");
        for t in gen_random(&op.space, &GenerationConfig::new(10_000, 22)) {
            if bug.triggers(&t) {
                assert!(op.validate(&t).unwrap().is_valid(), "{} {t}", op.name);
            }
        }
    }
}

#[test]
fn rejections_carry_messages() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        for t in gen_random(&op.space, &GenerationConfig::new(500, 23)) {
            if let ValidationOutcome::Rejected(m) = op.validate(&t).unwrap() {
                assert!(!m.trim().is_empty(), "{}", op.name);
            }
        }
    }
}

#[test]
fn execute_flags_bugs_only_when_valid() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        let op = op.clone().with_exec_cost(ExecCost::ZERO);
        for t in gen_random(&op.space, &GenerationConfig::new(500, 24)) {
            let r = op.execute(&t).unwrap();
            if !r.outcome.is_valid() {
                assert!(!r.bug_triggered);
            }
            assert_eq!(r.bug_triggered, op.bug().unwrap().triggers(&t));
        }
    }
}

#[test]
fn partial_constraints_admit_every_valid_input() {
    let reg = Registry::builtin();
    for op in reg.iter() {
        let partial = op.partial().expect("every built-in operator has a partial table");
        for t in gen_random(&op.space, &GenerationConfig::new(5_000, 25)) {
            if op.validate(&t).unwrap().is_valid() {
                assert!(partial.holds(&t), "{} {t}", op.name);
            }
        }
    }
}
