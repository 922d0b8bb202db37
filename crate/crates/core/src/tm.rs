//! Single-tape deterministic Turing machines.
//!
//! A configuration is split around the head: `v` holds the head cell
//! followed by the cells to its left (nearest first), and `u` holds the
//! cells to the right of the head (nearest first). Symbols are stored as
//! indices: `0` is the blank, `1..k` are the alphabet symbols in the order
//! they were declared.

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    L,
    R,
    S,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Move::L => "L",
            Move::R => "R",
            Move::S => "S",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub next: usize,
    pub write: usize,
    pub mv: Move,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TmError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid machine: {0}")]
    Validation(String),
}

/// A validated machine. States are indexed from 0 internally; the encoded
/// state number is `index + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    states: Vec<String>,
    alphabet: Vec<String>,
    blank: String,
    start: usize,
    halt: usize,
    delta: Vec<Transition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    pub state: usize,
}

impl Configuration {
    pub fn new(u: Vec<usize>, v: Vec<usize>, state: usize) -> Self {
        let mut c = Configuration { u, v, state };
        c.normalize();
        c
    }

    fn normalize(&mut self) {
        while self.u.last() == Some(&0) {
            self.u.pop();
        }
        while self.v.last() == Some(&0) {
            self.v.pop();
        }
    }

    pub fn head_symbol(&self) -> usize {
        self.v.first().copied().unwrap_or(0)
    }

    pub fn nonblank_count(&self) -> usize {
        self.u.iter().chain(&self.v).filter(|&&s| s != 0).count()
    }

    /// Tape contents from left to right, blank-trimmed at both ends.
    pub fn tape(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self.v.iter().rev().chain(&self.u).copied().collect();
        while cells.last() == Some(&0) {
            cells.pop();
        }
        let lead = cells.iter().take_while(|&&s| s == 0).count();
        cells.drain(..lead);
        cells
    }
}

impl TuringMachine {
    pub fn new(
        states: Vec<String>,
        alphabet: Vec<String>,
        blank: String,
        start: usize,
        halt: usize,
        delta: Vec<Transition>,
    ) -> Result<Self, TmError> {
        let m = TuringMachine { states, alphabet, blank, start, halt, delta };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), TmError> {
        let bad = |s: String| Err(TmError::Validation(s));
        if self.states.is_empty() {
            return bad("no states declared".into());
        }
        if self.alphabet.is_empty() {
            return bad("empty alphabet".into());
        }
        if self.alphabet.contains(&self.blank) {
            return bad(format!("blank `{}` must not be an alphabet symbol", self.blank));
        }
        if self.start >= self.states.len() || self.halt >= self.states.len() {
            return bad("start or halt state out of range".into());
        }
        let k = self.k();
        if self.delta.len() != self.states.len() * k {
            return bad("transition table has the wrong size".into());
        }
        for (i, t) in self.delta.iter().enumerate() {
            if t.next >= self.states.len() || t.write >= k {
                return bad(format!("transition {i} refers to an unknown state or symbol"));
            }
        }
        for s in 0..k {
            let t = self.transition(self.halt, s);
            if t.next != self.halt || t.write != s || t.mv != Move::S {
                return bad(format!(
                    "halt state `{}` is not absorbing on `{}`",
                    self.states[self.halt],
                    self.symbol_name(s)
                ));
            }
        }
        Ok(())
    }

    /// Number of states `m`.
    pub fn m(&self) -> usize {
        self.states.len()
    }

    /// Encoding base `k = 1 + |Σ|`.
    pub fn k(&self) -> usize {
        self.alphabet.len() + 1
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn blank(&self) -> &str {
        &self.blank
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn halt(&self) -> usize {
        self.halt
    }

    pub fn transition(&self, state: usize, symbol: usize) -> Transition {
        self.delta[state * self.k() + symbol]
    }

    pub fn symbol_name(&self, s: usize) -> &str {
        if s == 0 {
            &self.blank
        } else {
            &self.alphabet[s - 1]
        }
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        if name == self.blank {
            return Some(0);
        }
        self.alphabet.iter().position(|a| a == name).map(|i| i + 1)
    }

    fn single_char_symbols(&self) -> bool {
        self.alphabet.iter().chain([&self.blank]).all(|s| s.chars().count() == 1)
    }

    /// Split an input word into symbol indices. Single-character alphabets
    /// accept packed words (`"0110"`); otherwise symbols are separated by
    /// whitespace.
    pub fn parse_word(&self, word: &str) -> Result<Vec<usize>, TmError> {
        let tokens: Vec<String> = if self.single_char_symbols() {
            word.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
        } else {
            word.split_whitespace().map(String::from).collect()
        };
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                self.symbol_index(t).ok_or_else(|| TmError::Parse {
                    line: 1,
                    column: i + 1,
                    message: format!("unknown symbol `{t}`"),
                })
            })
            .collect()
    }

    pub fn render_word(&self, word: &[usize]) -> String {
        let sep = if self.single_char_symbols() { "" } else { " " };
        word.iter().map(|&s| self.symbol_name(s)).collect::<Vec<_>>().join(sep)
    }

    /// Input word on the right of the head, nothing on the left, start state.
    pub fn initial(&self, input: &[usize]) -> Configuration {
        Configuration::new(input.to_vec(), Vec::new(), self.start)
    }

    pub fn is_halted(&self, c: &Configuration) -> bool {
        c.state == self.halt
    }

    pub fn step(&self, c: &Configuration) -> Configuration {
        let t = self.transition(c.state, c.head_symbol());
        let mut u = c.u.clone();
        let mut v = c.v.clone();
        match t.mv {
            Move::S => {
                if v.is_empty() {
                    v.push(t.write);
                } else {
                    v[0] = t.write;
                }
            }
            Move::R => {
                let incoming = if u.is_empty() { 0 } else { u.remove(0) };
                if v.is_empty() {
                    v = vec![incoming, t.write];
                } else {
                    v[0] = t.write;
                    v.insert(0, incoming);
                }
            }
            Move::L => {
                u.insert(0, t.write);
                if !v.is_empty() {
                    v.remove(0);
                }
            }
        }
        Configuration::new(u, v, t.next)
    }

    pub fn run_n(&self, c0: &Configuration, n: usize) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(c0.clone());
        for _ in 0..n {
            let next = self.step(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Steps until halting; `None` if `limit` steps are not enough.
    pub fn run_to_halt(&self, c0: &Configuration, limit: usize) -> Option<(usize, Configuration)> {
        let mut c = c0.clone();
        for n in 0..=limit {
            if self.is_halted(&c) {
                return Some((n, c));
            }
            c = self.step(&c);
        }
        None
    }

    pub fn output(&self, c: &Configuration) -> String {
        self.render_word(&c.tape())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("states: {}\n", self.states.join(" ")));
        s.push_str(&format!("alphabet: {}\n", self.alphabet.join(" ")));
        s.push_str(&format!("blank: {}\n", self.blank));
        s.push_str(&format!("start: {}\n", self.states[self.start]));
        s.push_str(&format!("halt: {}\n", self.states[self.halt]));
        for q in 0..self.m() {
            for a in 0..self.k() {
                let t = self.transition(q, a);
                s.push_str(&format!(
                    "delta: {} {} -> {} {} {}\n",
                    self.states[q],
                    self.symbol_name(a),
                    self.states[t.next],
                    self.symbol_name(t.write),
                    t.mv
                ));
            }
        }
        s
    }
}

/// Parse the line-oriented machine format.
pub fn parse_tm(text: &str) -> Result<TuringMachine, TmError> {
    let mut states: Option<Vec<String>> = None;
    let mut alphabet: Option<Vec<String>> = None;
    let mut blank: Option<String> = None;
    let mut start: Option<(String, usize)> = None;
    let mut halt: Option<(String, usize)> = None;
    let mut rules: Vec<(usize, [String; 5])> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let Some(colon) = line.find(':') else {
            return Err(TmError::Parse {
                line: line_no,
                column: line.len() - line.trim_start().len() + 1,
                message: "expected `key: value`".into(),
            });
        };
        let key = line[..colon].trim();
        let value = line[colon + 1..].trim();
        let value_col = colon + 2 + (line[colon + 1..].len() - line[colon + 1..].trim_start().len());
        let perr = |message: String| TmError::Parse { line: line_no, column: value_col, message };
        let once = |slot_taken: bool| {
            if slot_taken {
                Err(perr(format!("duplicate `{key}`")))
            } else {
                Ok(())
            }
        };
        let words: Vec<String> = value.split_whitespace().map(String::from).collect();
        match key {
            "states" => {
                once(states.is_some())?;
                states = Some(words);
            }
            "alphabet" => {
                once(alphabet.is_some())?;
                alphabet = Some(words);
            }
            "blank" | "start" | "halt" => {
                if words.len() != 1 {
                    return Err(perr(format!("`{key}` takes exactly one name")));
                }
                let w = words.into_iter().next().unwrap();
                match key {
                    "blank" => {
                        once(blank.is_some())?;
                        blank = Some(w);
                    }
                    "start" => {
                        once(start.is_some())?;
                        start = Some((w, line_no));
                    }
                    _ => {
                        once(halt.is_some())?;
                        halt = Some((w, line_no));
                    }
                }
            }
            "delta" => {
                let arrow = words.iter().position(|w| w == "->");
                if arrow != Some(2) || words.len() != 6 {
                    return Err(perr("expected `delta: STATE SYMBOL -> STATE SYMBOL MOVE`".into()));
                }
                rules.push((
                    line_no,
                    [words[0].clone(), words[1].clone(), words[3].clone(), words[4].clone(), words[5].clone()],
                ));
            }
            other => {
                return Err(TmError::Parse {
                    line: line_no,
                    column: 1 + line.len() - line.trim_start().len(),
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }

    let missing = |what: &str| TmError::Validation(format!("missing `{what}` declaration"));
    let states = states.ok_or_else(|| missing("states"))?;
    let alphabet = alphabet.ok_or_else(|| missing("alphabet"))?;
    let blank = blank.ok_or_else(|| missing("blank"))?;
    let (start_name, _) = start.ok_or_else(|| missing("start"))?;
    let (halt_name, _) = halt.ok_or_else(|| missing("halt"))?;
    if rules.is_empty() {
        return Err(TmError::Validation("empty delta section".into()));
    }
    for (i, s) in states.iter().enumerate() {
        if states[..i].contains(s) {
            return Err(TmError::Validation(format!("state `{s}` declared twice")));
        }
    }
    for (i, s) in alphabet.iter().enumerate() {
        if alphabet[..i].contains(s) {
            return Err(TmError::Validation(format!("symbol `{s}` declared twice")));
        }
    }
    let state_ix: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let sym_ix = |s: &str| -> Option<usize> {
        if s == blank {
            Some(0)
        } else {
            alphabet.iter().position(|a| a == s).map(|i| i + 1)
        }
    };
    let lookup_state = |s: &str| {
        state_ix.get(s).copied().ok_or_else(|| TmError::Validation(format!("unknown state `{s}`")))
    };
    let start = lookup_state(&start_name)?;
    let halt = lookup_state(&halt_name)?;
    let k = alphabet.len() + 1;
    let mut table: Vec<Option<Transition>> = vec![None; states.len() * k];
    for (line, [q, a, q2, w, mv]) in &rules {
        let rule_err = |m: String| TmError::Validation(format!("line {line}: {m}"));
        let q = state_ix.get(q.as_str()).copied().ok_or_else(|| rule_err(format!("unknown state `{q}`")))?;
        let q2 = state_ix.get(q2.as_str()).copied().ok_or_else(|| rule_err(format!("unknown state `{q2}`")))?;
        let a = sym_ix(a).ok_or_else(|| rule_err(format!("unknown symbol `{a}`")))?;
        let w = sym_ix(w).ok_or_else(|| rule_err(format!("unknown symbol `{w}`")))?;
        let mv = match mv.as_str() {
            "L" => Move::L,
            "R" => Move::R,
            "S" => Move::S,
            other => return Err(rule_err(format!("move must be L, R or S, got `{other}`"))),
        };
        let slot = &mut table[q * k + a];
        if slot.is_some() {
            return Err(rule_err("duplicate transition".into()));
        }
        *slot = Some(Transition { next: q2, write: w, mv });
    }
    let mut delta = Vec::with_capacity(table.len());
    for (i, t) in table.into_iter().enumerate() {
        match t {
            Some(t) => delta.push(t),
            None => {
                let (q, a) = (i / k, i % k);
                let sym = if a == 0 { blank.clone() } else { alphabet[a - 1].clone() };
                return Err(TmError::Validation(format!("no transition for ({}, {})", states[q], sym)));
            }
        }
    }
    TuringMachine::new(states, alphabet, blank, start, halt, delta)
}

/// Unary successor: appends one `1` to a block of `1`s.
pub const SUCC_TM: &str = include_str!("../machines/succ.tm");

/// Walks right over a binary word flipping every bit, then halts.
pub const FLIP_TM: &str = include_str!("../machines/flip.tm");

/// Two-state busy beaver plus a halting state; halts after six steps.
pub const BB2_TM: &str = include_str!("../machines/bb2.tm");

#[cfg(test)]
mod tests {
    use super::*;

    fn succ() -> TuringMachine {
        parse_tm(SUCC_TM).unwrap()
    }

    #[test]
    fn sample_machine_shape() {
        let m = succ();
        assert_eq!(m.m(), 2);
        assert_eq!(m.alphabet(), &["1".to_string()]);
        assert_eq!(parse_tm(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn moving_halt_state_rejected() {
        let bad = SUCC_TM.replace("delta: qh B -> qh B S", "delta: qh B -> qh B R");
        assert!(matches!(parse_tm(&bad), Err(TmError::Validation(_))));
    }

    #[test]
    fn empty_delta_rejected() {
        let text = "states: q0 qh\nalphabet: 1\nblank: B\nstart: q0\nhalt: qh\n";
        assert_eq!(parse_tm(text), Err(TmError::Validation("empty delta section".into())));
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_tm("states q0\n").unwrap_err();
        assert!(matches!(err, TmError::Parse { line: 1, .. }));
        let err = parse_tm("states: q0 qh\nfoo: bar\n").unwrap_err();
        assert!(matches!(err, TmError::Parse { line: 2, column: 1, .. }));
    }

    #[test]
    fn successor_appends_one() {
        let m = succ();
        let c0 = m.initial(&m.parse_word("111").unwrap());
        let (n, done) = m.run_to_halt(&c0, 100).unwrap();
        assert_eq!(n, 1);
        assert_eq!(m.output(&done), "1111");
    }

    #[test]
    fn halted_configuration_is_fixed() {
        let m = succ();
        let c0 = m.initial(&[1, 1]);
        let run = m.run_n(&c0, 10);
        assert_eq!(run.len(), 11);
        assert!(run[1..].iter().all(|c| c == &run[1]));
        assert_eq!(m.output(&run[10]), "111");
    }

    #[test]
    fn left_move_from_blank_tape() {
        let text = "states: a h\nalphabet: 1\nblank: B\nstart: a\nhalt: h\n\
                    delta: a B -> h 1 L\ndelta: a 1 -> h 1 S\n\
                    delta: h B -> h B S\ndelta: h 1 -> h 1 S\n";
        let m = parse_tm(text).unwrap();
        let c = m.step(&m.initial(&[]));
        assert_eq!(c.u, vec![1]);
        assert!(c.v.is_empty());
        assert_eq!(c.head_symbol(), 0);
    }

    #[test]
    fn flipper_inverts_bits() {
        let m = parse_tm(FLIP_TM).unwrap();
        let c0 = m.initial(&m.parse_word("0110").unwrap());
        let (_, done) = m.run_to_halt(&c0, 100).unwrap();
        assert_eq!(m.output(&done), "1001");
    }
}
