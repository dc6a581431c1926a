//! Plain-text automaton files.
//!
//! ```text
//! format statemerge-automaton 1
//! kind dfa
//! alphabet a b
//! states 2
//! initial 0
//! accepting 0
//! transition 0 a 1
//! transition 1 b 0
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. `kind nfa` permits
//! several `transition` lines for the same state and token. Keys other than
//! `transition` appear once, before any transition.

use std::fmt::Write;

use super::{Alphabet, Dfa, Nfa};
use crate::error::{parse_err, Error, Result};

const MAGIC: &str = "statemerge-automaton";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParsedAutomaton {
    Dfa(Dfa),
    Nfa(Nfa),
}

impl ParsedAutomaton {
    pub fn into_dfa(self) -> Result<Dfa> {
        match self {
            ParsedAutomaton::Dfa(d) => Ok(d),
            ParsedAutomaton::Nfa(_) => Err(Error::InvalidArgument(
                "expected a dfa file, found kind nfa".into(),
            )),
        }
    }
}

fn header(out: &mut String, kind: &str, alphabet: &Alphabet, states: usize, initial: usize) {
    writeln!(out, "format {MAGIC} {VERSION}").unwrap();
    writeln!(out, "kind {kind}").unwrap();
    let tokens: Vec<String> = alphabet.tokens().iter().map(char::to_string).collect();
    writeln!(out, "alphabet {}", tokens.join(" ")).unwrap();
    writeln!(out, "states {states}").unwrap();
    writeln!(out, "initial {initial}").unwrap();
}

fn accepting_line(out: &mut String, ids: impl Iterator<Item = usize>) {
    out.push_str("accepting");
    for q in ids {
        write!(out, " {q}").unwrap();
    }
    out.push('\n');
}

pub fn write_dfa(dfa: &Dfa) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "dfa",
        dfa.alphabet(),
        dfa.num_states(),
        dfa.initial(),
    );
    accepting_line(&mut out, dfa.accepting_states());
    for (src, t, dst) in dfa.transitions() {
        writeln!(out, "transition {src} {} {dst}", dfa.alphabet().token(t)).unwrap();
    }
    out
}

pub fn write_nfa(nfa: &Nfa) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "nfa",
        nfa.alphabet(),
        nfa.num_states(),
        nfa.initial(),
    );
    accepting_line(
        &mut out,
        (0..nfa.num_states()).filter(|&q| nfa.is_accepting(q)),
    );
    for (src, t, dst) in nfa.transitions() {
        writeln!(out, "transition {src} {} {dst}", nfa.alphabet().token(t)).unwrap();
    }
    out
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, format!("expected a state id, found {s:?}")))
}

fn parse_token(line: usize, s: &str) -> Result<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(parse_err(
            line,
            format!("tokens are single characters, found {s:?}"),
        )),
    }
}

pub fn parse_automaton(text: &str) -> Result<ParsedAutomaton> {
    let mut kind: Option<bool> = None; // Some(true) = dfa
    let mut alphabet: Option<Alphabet> = None;
    let mut states: Option<usize> = None;
    let mut initial: Option<usize> = None;
    let mut accepting: Option<Vec<usize>> = None;
    let mut transitions: Vec<(usize, usize, char, usize)> = Vec::new();
    let mut saw_magic = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let key = fields.next().expect("nonempty line");
        let rest: Vec<&str> = fields.collect();
        if !saw_magic {
            if key != "format" || rest.len() != 2 || rest[0] != MAGIC {
                return Err(parse_err(
                    line,
                    format!("expected `format {MAGIC} {VERSION}`"),
                ));
            }
            if rest[1] != VERSION.to_string() {
                return Err(parse_err(line, format!("unsupported version {}", rest[1])));
            }
            saw_magic = true;
            continue;
        }
        let once = |present: bool| {
            if present {
                Err(parse_err(line, format!("duplicate key `{key}`")))
            } else {
                Ok(())
            }
        };
        match key {
            "kind" => {
                once(kind.is_some())?;
                kind = Some(match rest.as_slice() {
                    ["dfa"] => true,
                    ["nfa"] => false,
                    _ => return Err(parse_err(line, "kind must be `dfa` or `nfa`")),
                });
            }
            "alphabet" => {
                once(alphabet.is_some())?;
                let tokens = rest
                    .iter()
                    .map(|s| parse_token(line, s))
                    .collect::<Result<Vec<_>>>()?;
                alphabet = Some(Alphabet::new(tokens).map_err(|e| parse_err(line, e.to_string()))?);
            }
            "states" => {
                once(states.is_some())?;
                match rest.as_slice() {
                    [n] => states = Some(parse_usize(line, n)?),
                    _ => return Err(parse_err(line, "states takes one count")),
                }
            }
            "initial" => {
                once(initial.is_some())?;
                match rest.as_slice() {
                    [q] => initial = Some(parse_usize(line, q)?),
                    _ => return Err(parse_err(line, "initial takes one state id")),
                }
            }
            "accepting" => {
                once(accepting.is_some())?;
                accepting = Some(
                    rest.iter()
                        .map(|s| parse_usize(line, s))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            "transition" => match rest.as_slice() {
                [src, tok, dst] => transitions.push((
                    line,
                    parse_usize(line, src)?,
                    parse_token(line, tok)?,
                    parse_usize(line, dst)?,
                )),
                _ => return Err(parse_err(line, "transition takes `src token dst`")),
            },
            other => return Err(parse_err(line, format!("unknown key `{other}`"))),
        }
    }

    let missing = |what: &str| parse_err(0, format!("missing `{what}`"));
    if !saw_magic {
        return Err(missing("format"));
    }
    let is_dfa = kind.ok_or_else(|| missing("kind"))?;
    let alphabet = alphabet.ok_or_else(|| missing("alphabet"))?;
    let states = states.ok_or_else(|| missing("states"))?;
    let initial = initial.ok_or_else(|| missing("initial"))?;
    let accepting = accepting.unwrap_or_default();

    let mut nfa = Nfa::new(alphabet, states, initial).map_err(|e| parse_err(0, e.to_string()))?;
    for q in accepting {
        nfa.set_accepting(q, true)
            .map_err(|e| parse_err(0, e.to_string()))?;
    }
    for &(line, src, tok, dst) in &transitions {
        nfa.add_transition(src, tok, dst)
            .map_err(|e| parse_err(line, e.to_string()))?;
    }
    if !is_dfa {
        return Ok(ParsedAutomaton::Nfa(nfa));
    }
    if !nfa.is_deterministic() {
        return Err(parse_err(
            0,
            "kind dfa has several transitions for one (state, token)",
        ));
    }
    let mut dfa = Dfa::new(nfa.alphabet().clone(), states, initial)?;
    for q in 0..states {
        dfa.set_accepting(q, nfa.is_accepting(q))?;
    }
    for (src, t, dst) in nfa.transitions() {
        dfa.set_transition_index(src, t, dst)?;
    }
    Ok(ParsedAutomaton::Dfa(dfa))
}
