use proptest::prelude::*;
use tmflow::tm::{parse_tm, Configuration, TmError, TuringMachine, BB2_TM, FLIP_TM, SUCC_TM};

fn machine(text: &str) -> TuringMachine {
    parse_tm(text).unwrap()
}

const HEADER: &str = "states: q0 qh\nalphabet: 1\nblank: B\nstart: q0\nhalt: qh\n";

#[test]
fn shipped_successor_parses() {
    let m = machine(SUCC_TM);
    assert_eq!(m.m(), 2);
    assert_eq!(m.alphabet(), ["1".to_string()]);
    assert_eq!(m.k(), 2);
    assert_eq!(machine(&m.to_text()), m);
}

#[test]
fn moving_halt_state_is_rejected() {
    let text = format!("{HEADER}delta: q0 1 -> q0 1 R\ndelta: q0 B -> qh 1 S\ndelta: qh 1 -> qh 1 L\ndelta: qh B -> qh B S\n");
    assert!(matches!(parse_tm(&text), Err(TmError::Validation(_))));
}

#[test]
fn empty_delta_is_rejected() {
    assert!(matches!(parse_tm(HEADER), Err(TmError::Validation(_))));
}

#[test]
fn parse_errors_carry_a_position() {
    match parse_tm("states: a b\nalphabet 1\n") {
        Err(TmError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn halting_configuration_is_absorbing() {
    let m = machine(SUCC_TM);
    let c = Configuration::new(vec![1, 1], vec![1], m.halt());
    assert_eq!(m.step(&c), c);
    let run = m.run_n(&c, 5);
    assert_eq!(run.len(), 6);
    assert!(run.iter().all(|x| *x == c));
}

#[test]
fn successor_appends_one() {
    let m = machine(SUCC_TM);
    let input = m.parse_word("111").unwrap();
    let (_, done) = m.run_to_halt(&m.initial(&input), 100).unwrap();
    assert_eq!(m.output(&done), "1111");
    let run = m.run_n(&m.initial(&m.parse_word("11").unwrap()), 10);
    assert_eq!(run.len(), 11);
    assert!(m.is_halted(&run[10]));
    assert_eq!(m.output(&run[10]), "111");
    assert_eq!(m.run_n(&run[0], 0), vec![run[0].clone()]);
}

#[test]
fn writing_and_moving_left_from_blank_tape() {
    let text = format!("{HEADER}delta: q0 1 -> qh 1 S\ndelta: q0 B -> q0 1 L\ndelta: qh 1 -> qh 1 S\ndelta: qh B -> qh B S\n");
    let m = machine(&text);
    let c = m.step(&m.initial(&[]));
    // the written cell is now right of the head; the head reads a blank
    assert_eq!(c.u, vec![1]);
    assert!(c.v.is_empty());
    assert_eq!(c.head_symbol(), 0);
    let c2 = m.step(&c);
    assert_eq!(m.output(&c2), "11");
}

#[test]
fn flipper_inverts_bits() {
    let m = machine(FLIP_TM);
    let input = m.parse_word("0110").unwrap();
    let (_, done) = m.run_to_halt(&m.initial(&input), 100).unwrap();
    assert_eq!(m.output(&done), "1001");
}

#[test]
fn busy_beaver_halts_after_six_steps() {
    let m = machine(BB2_TM);
    let (n, done) = m.run_to_halt(&m.initial(&[]), 100).unwrap();
    assert_eq!(n, 6);
    assert_eq!(done.nonblank_count(), 4);
}

fn machines() -> Vec<TuringMachine> {
    [SUCC_TM, FLIP_TM, BB2_TM].iter().map(|t| machine(t)).collect()
}

proptest! {
    #[test]
    fn runs_are_deterministic_and_conserve_tape(which in 0usize..3, bits in proptest::collection::vec(0usize..2, 0..12), n in 0usize..30) {
        let m = &machines()[which];
        let input: Vec<usize> = bits.iter().map(|b| 1 + b % (m.k() - 1)).collect();
        let c0 = m.initial(&input);
        let a = m.run_n(&c0, n);
        prop_assert_eq!(&a, &m.run_n(&c0, n));
        for w in a.windows(2) {
            let (x, y) = (w[0].nonblank_count() as i64, w[1].nonblank_count() as i64);
            prop_assert!((x - y).abs() <= 1);
        }
    }
}
