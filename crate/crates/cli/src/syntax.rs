//! Network description files.
//!
//! ```text
//! # comment
//! externals { tester }
//! transmitters { }
//! values { v }
//! param p = 4/5
//! node s1 nbrs { d } proc snd(v, p)
//! node d nbrs { s1, tester } proc fix X.?(x).sigma.!<x>.nil else X
//! ```
//!
//! A choice is either a process or `(w₁: P₁ + w₂: P₂ …)`. Macros: `snd(v,p)`,
//! `resnd(v,p)`, `fwd(p)`, `resndc(v,p)`, `fwdc(p)`, `sndu(v,p,k)`, `delays(v,k)`,
//! `fwdu(p,k)`. Weights and macro probabilities are rationals (`a/b`, decimals) or
//! parameter names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use ptcws_core::calculus::{check_well_formed, name, values_of, Choice, Name, Network, Node, Process, Term, Value, Violation};
use ptcws_core::gossip::{mk_delays, mk_fwd, mk_fwdc, mk_fwdu, mk_resnd, mk_resndc, mk_snd, mk_sndu};
use ptcws_core::semantics::Env;
use ptcws_core::{parse_rational, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("ill-formed network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    IllFormed(Vec<Violation>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let start = i;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || ((chars[i] == '.' || chars[i] == '/') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())))
            {
                i += 1;
            }
            Tok::Number(chars[start..i].iter().collect())
        } else if "{}()<>!?.:,+=".contains(c) {
            i += 1;
            Tok::Sym(c)
        } else {
            return Err(ParseError::Syntax { pos, msg: format!("unexpected character {c:?}") });
        };
        col += i - start;
        out.push(Token { tok, pos });
    }
    Ok(out)
}

/// A parsed file: the network and its environment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkFile {
    pub network: Network,
    pub env: Env,
    pub params: BTreeMap<String, Q>,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    params: BTreeMap<String, Q>,
    vals: Vec<String>,
    procs: Vec<String>,
    end: Pos,
}

const MACROS: [&str; 8] = ["snd", "resnd", "fwd", "resndc", "fwdc", "sndu", "delays", "fwdu"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|t| t.pos.clone()).unwrap_or_else(|| self.end.clone())
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), msg: msg.into() })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.tok.clone());
        self.at += 1;
        t
    }

    fn is_sym(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Sym(c))
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.is_sym(c) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_kw(k) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected '{k}'"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err("expected a name"),
        }
    }

    fn name_set(&mut self) -> Result<Vec<String>, ParseError> {
        self.sym('{')?;
        let mut out = Vec::new();
        while !self.is_sym('}') {
            out.push(self.ident()?);
            if self.is_sym(',') {
                self.at += 1;
            }
        }
        self.sym('}')?;
        Ok(out)
    }

    fn rational(&mut self) -> Result<Q, ParseError> {
        let pos = self.pos();
        match self.next() {
            Some(Tok::Number(s)) => {
                parse_rational(&s).ok_or(ParseError::Syntax { pos, msg: format!("bad number {s}") })
            }
            Some(Tok::Ident(s)) => match self.params.get(&s) {
                Some(q) => Ok(q.clone()),
                None => Err(ParseError::Syntax { pos, msg: format!("unknown parameter {s}") }),
            },
            _ => Err(ParseError::Syntax { pos, msg: "expected a rational or parameter".into() }),
        }
    }

    fn probability(&mut self) -> Result<Q, ParseError> {
        let pos = self.pos();
        let q = self.rational()?;
        if q < Q::zero() || q > Q::one() {
            return Err(ParseError::Syntax { pos, msg: format!("probability {q} outside [0,1]") });
        }
        Ok(q)
    }

    fn count(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos();
        let q = self.rational()?;
        if !q.is_integer() || q < Q::one() {
            return Err(ParseError::Syntax { pos, msg: format!("expected a positive integer, got {q}") });
        }
        Ok(q.to_integer().to_string().parse().expect("small integer"))
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let x = self.ident()?;
        if self.vals.contains(&x) {
            Ok(Term::Var(name(&x)))
        } else {
            Ok(Term::Val(Value::new(&x)))
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        let pos = self.pos();
        match self.term()? {
            Term::Val(v) => Ok(v),
            Term::Var(x) => Err(ParseError::Syntax { pos, msg: format!("macro needs a closed value, {x} is bound") }),
        }
    }

    fn choice(&mut self) -> Result<Choice, ParseError> {
        if !self.is_sym('(') {
            return Ok(Choice::det(self.process()?));
        }
        let pos = self.pos();
        self.sym('(')?;
        let mut branches = Vec::new();
        loop {
            let w = self.probability()?;
            self.sym(':')?;
            let p = self.process()?;
            branches.push((w, p));
            if self.is_sym('+') || self.is_sym(',') {
                self.at += 1;
                continue;
            }
            if self.is_sym(')') {
                break;
            }
            return self.err("expected '+' or ')'");
        }
        self.sym(')')?;
        Choice::normalized(branches).map_err(|e| ParseError::Syntax { pos, msg: e.to_string() })
    }

    fn process(&mut self) -> Result<Process, ParseError> {
        if self.is_sym('!') {
            self.at += 1;
            self.sym('<')?;
            let t = self.term()?;
            self.sym('>')?;
            self.sym('.')?;
            return Ok(Process::Bcast(t, self.choice()?));
        }
        if self.is_sym('?') {
            self.at += 1;
            self.sym('(')?;
            let x = self.ident()?;
            self.sym(')')?;
            self.sym('.')?;
            self.vals.push(x.clone());
            let then = self.choice();
            self.vals.pop();
            let then = then?;
            self.kw("else")?;
            let else_ = self.choice()?;
            return Ok(Process::rcv(&x, then, else_));
        }
        let pos = self.pos();
        let word = self.ident()?;
        match word.as_str() {
            "nil" => Ok(Process::Nil),
            "tau" | "sigma" => {
                self.sym('.')?;
                let c = self.choice()?;
                Ok(if word == "tau" { Process::tau(c) } else { Process::sigma(c) })
            }
            "fix" => {
                let x = self.ident()?;
                self.sym('.')?;
                self.procs.push(x.clone());
                let body = self.process();
                self.procs.pop();
                Ok(Process::fix(&x, body?))
            }
            m if MACROS.contains(&m) && self.is_sym('(') => self.macro_call(m),
            x if self.procs.contains(&x.to_string()) => Ok(Process::var(x)),
            x => Err(ParseError::Syntax { pos, msg: format!("unbound process variable {x}") }),
        }
    }

    fn macro_call(&mut self, m: &str) -> Result<Process, ParseError> {
        self.sym('(')?;
        let comma = |p: &mut Parser| p.sym(',');
        let out = match m {
            "snd" | "resnd" | "resndc" => {
                let v = self.value()?;
                comma(self)?;
                let p = self.probability()?;
                match m {
                    "snd" => mk_snd(&v, &p),
                    "resnd" => mk_resnd(&v, &p),
                    _ => mk_resndc(&v, &p),
                }
            }
            "fwd" | "fwdc" => {
                let p = self.probability()?;
                if m == "fwd" {
                    mk_fwd(&p)
                } else {
                    mk_fwdc(&p)
                }
            }
            "sndu" => {
                let v = self.value()?;
                comma(self)?;
                let p = self.probability()?;
                comma(self)?;
                mk_sndu(&v, &p, self.count()?)
            }
            "delays" => {
                let v = self.value()?;
                comma(self)?;
                mk_delays(&v, self.count()?)
            }
            "fwdu" => {
                let p = self.probability()?;
                comma(self)?;
                mk_fwdu(&p, self.count()?)
            }
            _ => unreachable!("macro list"),
        };
        self.sym(')')?;
        Ok(out)
    }
}

/// Parses a network file; `overrides` replace declared parameters.
pub fn parse(text: &str, overrides: &BTreeMap<String, Q>) -> Result<NetworkFile, ParseError> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let mut ps = Parser {
        toks,
        at: 0,
        params: overrides.clone(),
        vals: Vec::new(),
        procs: Vec::new(),
        end: Pos { line: lines, col: text.lines().last().map_or(1, |l| l.chars().count() + 1) },
    };
    let mut env = Env::default();
    let mut nodes = Vec::new();
    let mut seen: BTreeSet<Name> = BTreeSet::new();
    while ps.peek().is_some() {
        let pos = ps.pos();
        let word = ps.ident()?;
        match word.as_str() {
            "externals" => env.listeners.extend(ps.name_set()?.iter().map(|s| name(s))),
            "transmitters" => env.transmitters.extend(ps.name_set()?.iter().map(|s| name(s))),
            "values" => env.values.extend(ps.name_set()?.iter().map(|s| Value::new(s))),
            "param" => {
                let x = ps.ident()?;
                ps.sym('=')?;
                let q = ps.rational()?;
                ps.params.entry(x).or_insert(q);
            }
            "node" => {
                let n = ps.ident()?;
                ps.kw("nbrs")?;
                let nb = ps.name_set()?;
                ps.kw("proc")?;
                let p = ps.process()?;
                if !seen.insert(name(&n)) {
                    return Err(ParseError::Syntax { pos, msg: format!("node {n} declared twice") });
                }
                let nb: Vec<&str> = nb.iter().map(String::as_str).collect();
                nodes.push(Node::new(&n, &nb, p));
            }
            w => return Err(ParseError::Syntax { pos, msg: format!("unexpected '{w}'") }),
        }
    }
    if nodes.is_empty() {
        return ps.err("a network needs at least one node");
    }
    let network = Network::of(nodes);
    for n in network.nodes() {
        values_of(&n.proc, &mut env.values);
    }
    check_well_formed(&network, &env.externals()).map_err(ParseError::IllFormed)?;
    Ok(NetworkFile { network, env, params: ps.params })
}

fn set(names: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = names.into_iter().collect();
    if v.is_empty() {
        "{ }".into()
    } else {
        format!("{{ {} }}", v.join(", "))
    }
}

/// Renders a network in the file format; [`parse`] reads it back to the same canonical network.
pub fn pretty(m: &Network, env: &Env) -> String {
    let mut out = String::new();
    if !env.listeners.is_empty() {
        out.push_str(&format!("externals {}\n", set(env.listeners.iter().map(|n| n.to_string()))));
    }
    if !env.transmitters.is_empty() {
        out.push_str(&format!("transmitters {}\n", set(env.transmitters.iter().map(|n| n.to_string()))));
    }
    if !env.values.is_empty() {
        out.push_str(&format!("values {}\n", set(env.values.iter().map(|v| v.to_string()))));
    }
    out.push_str(&m.to_string());
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ptcws_core::q;

    #[test]
    fn snd_macro_expands() {
        let f = parse("externals { o }\nnode s nbrs { o } proc snd(v, 4/5)\n", &BTreeMap::new()).unwrap();
        let v = Value::new("v");
        assert_eq!(f.network.node("s").unwrap().proc, ptcws_core::calculus::canonical_process(&mk_snd(&v, &q(4, 5))));
    }

    #[test]
    fn errors_are_located() {
        let e = parse("node a nbrs { } proc tau.\n", &BTreeMap::new()).unwrap_err();
        assert!(e.to_string().starts_with("1:"), "{e}");
        let e = parse("node a nbrs { b } proc nil\nnode b nbrs { } proc nil\n", &BTreeMap::new()).unwrap_err();
        assert!(matches!(e, ParseError::IllFormed(_)), "{e}");
        assert!(e.to_string().contains('a') && e.to_string().contains('b'));
    }

    #[test]
    fn parameters_and_overrides() {
        let text = "param p = 1/2\nnode a nbrs { } proc tau.(p: nil + 1/2: nil)\n";
        assert!(parse(text, &BTreeMap::new()).is_ok());
        let over = BTreeMap::from([("p".to_string(), q(1, 3))]);
        assert!(parse(text, &over).is_err());
    }
}
