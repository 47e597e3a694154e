// SPDX-License-Identifier: Apache-2.0

//! The line-oriented ISCAS `.bench` format.
//!
//! ```text
//! # key=0110
//! INPUT(a)
//! INPUT(keyinput0)
//! OUTPUT(y)
//! y = XOR(a, keyinput0)
//! ```
//!
//! `#` starts a comment anywhere on a line. A whole-line comment of the form
//! `# key=<bits>` carries the correct key of a locked netlist; character `i`
//! is the value of `keyinput<i>`. Inputs named `keyinput<N>` are key inputs.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{
    GateKind, InvalidNetlist, KeyParseError, KeyVector, Netlist, RawGate, RawNetlist,
    KEY_INPUT_PREFIX,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGateKind { line: usize, kind: String },
    #[error("line {line}: {source}")]
    BadKey {
        line: usize,
        #[source]
        source: KeyParseError,
    },
    #[error("key header has {header_bits} bits but the netlist declares {key_inputs} key inputs")]
    KeyWidthMismatch {
        header_bits: usize,
        key_inputs: usize,
    },
    #[error(transparent)]
    Invalid(#[from] InvalidNetlist),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, BenchError> {
        Err(BenchError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn ident(&mut self) -> Result<&'a str, BenchError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len()
            && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        Ok(&self.text[start..self.pos])
    }

    fn expect(&mut self, c: u8) -> Result<(), BenchError> {
        self.skip_ws();
        if self.pos < self.text.len() && self.text.as_bytes()[self.pos] == c {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }
}

fn key_suffix(name: &str) -> Option<u64> {
    name.strip_prefix(KEY_INPUT_PREFIX)?.parse().ok()
}

/// Parses `.bench` text into a validated netlist called `name`.
pub fn parse_bench(name: &str, text: &str) -> Result<Netlist, BenchError> {
    let mut raw = RawNetlist {
        name: name.to_string(),
        ..Default::default()
    };
    let mut keys: Vec<(u64, String)> = Vec::new();
    let mut header: Option<(usize, KeyVector)> = None;

    for (i, full_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let (code, comment) = match full_line.find('#') {
            Some(p) => (&full_line[..p], Some(&full_line[p + 1..])),
            None => (full_line, None),
        };
        if code.trim().is_empty() {
            if let Some(bits) = comment.and_then(|c| c.trim().strip_prefix("key=")) {
                if header.is_some() {
                    return Err(BenchError::Syntax {
                        line: line_no,
                        column: 1,
                        message: "duplicate key header".into(),
                    });
                }
                let key = KeyVector::parse(bits.trim()).map_err(|source| BenchError::BadKey {
                    line: line_no,
                    source,
                })?;
                header = Some((line_no, key));
            }
            continue;
        }

        let mut cur = Cursor {
            text: code,
            pos: 0,
            line: line_no,
        };
        let first = cur.ident()?;
        if cur.peek() == Some(b'(') {
            let upper = first.to_ascii_uppercase();
            if upper != "INPUT" && upper != "OUTPUT" {
                return cur.err(format!(
                    "expected INPUT, OUTPUT or an assignment, found `{first}`"
                ));
            }
            cur.expect(b'(')?;
            let id = cur.ident()?.to_string();
            cur.expect(b')')?;
            if !cur.at_end() {
                return cur.err("unexpected trailing text");
            }
            if upper == "INPUT" {
                if id.starts_with(KEY_INPUT_PREFIX) {
                    match key_suffix(&id) {
                        Some(n) => keys.push((n, id)),
                        None => {
                            return Err(BenchError::Syntax {
                                line: line_no,
                                column: 1,
                                message: format!("key input `{id}` lacks a numeric suffix"),
                            })
                        }
                    }
                } else {
                    raw.primary_inputs.push(id);
                }
            } else {
                raw.primary_outputs.push(id);
            }
            continue;
        }

        cur.expect(b'=')?;
        let kind_name = cur.ident()?;
        let kind: GateKind = kind_name.parse().map_err(|_| BenchError::UnknownGateKind {
            line: line_no,
            kind: kind_name.to_string(),
        })?;
        cur.expect(b'(')?;
        let mut fanin = vec![cur.ident()?.to_string()];
        loop {
            match cur.peek() {
                Some(b',') => {
                    cur.pos += 1;
                    fanin.push(cur.ident()?.to_string());
                }
                Some(b')') => {
                    cur.pos += 1;
                    break;
                }
                _ => return cur.err("expected `,` or `)`"),
            }
        }
        if !cur.at_end() {
            return cur.err("unexpected trailing text");
        }
        raw.gates.push(RawGate {
            output: first.to_string(),
            kind,
            fanin,
        });
    }

    keys.sort();
    raw.key_inputs = keys.into_iter().map(|(_, n)| n).collect();
    match header {
        Some((_, key)) => {
            if key.width() != raw.key_inputs.len() {
                return Err(BenchError::KeyWidthMismatch {
                    header_bits: key.width(),
                    key_inputs: raw.key_inputs.len(),
                });
            }
            raw.correct_key = Some(key);
        }
        None if !raw.key_inputs.is_empty() => {
            return Err(BenchError::KeyWidthMismatch {
                header_bits: 0,
                key_inputs: raw.key_inputs.len(),
            });
        }
        None => {}
    }
    Ok(Netlist::from_raw(raw)?)
}

/// Reads a `.bench` file; the netlist is named after the file stem.
pub fn read_bench_file(path: impl AsRef<Path>) -> Result<Netlist, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "netlist".into());
    parse_bench(&name, &text)
}

/// Serializes `n`; gates come out in the netlist's stored topological order.
pub fn write_bench(n: &Netlist) -> String {
    let mut s = String::new();
    if let Some(k) = n.correct_key() {
        let _ = writeln!(s, "# key={k}");
    }
    let _ = writeln!(s, "# {}", n.name());
    let _ = writeln!(
        s,
        "# {} inputs, {} key inputs, {} outputs, {} gates",
        n.primary_inputs().len(),
        n.key_inputs().len(),
        n.primary_outputs().len(),
        n.num_gates()
    );
    s.push('\n');
    for &i in n.primary_inputs().iter().chain(n.key_inputs()) {
        let _ = writeln!(s, "INPUT({})", n.signal_name(i));
    }
    s.push('\n');
    for &o in n.primary_outputs() {
        let _ = writeln!(s, "OUTPUT({})", n.signal_name(o));
    }
    s.push('\n');
    for g in n.gates() {
        let _ = write!(s, "{} = {}(", n.signal_name(g.output), g.kind);
        for (i, f) in g.fanin.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(n.signal_name(*f));
        }
        s.push_str(")\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Violation;

    const C17: &str = include_str!("../../../../benchmarks/iscas85/c17.bench");

    #[test]
    fn single_and_gate() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)").unwrap();
        assert_eq!(n.primary_inputs().len(), 2);
        assert_eq!(n.primary_outputs().len(), 1);
        assert_eq!(n.num_gates(), 1);
        assert_eq!(n.gates()[0].kind, GateKind::And);
        assert_eq!(parse_bench("t", &write_bench(&n)).unwrap(), n);
    }

    #[test]
    fn canonical_c17_shape() {
        let n = parse_bench("c17", C17).unwrap();
        assert_eq!(n.primary_inputs().len(), 5);
        assert_eq!(n.primary_outputs().len(), 2);
        assert_eq!(n.num_gates(), 6);
        assert!(n.gates().iter().all(|g| g.kind == GateKind::Nand));
    }

    #[test]
    fn unknown_kind_is_named() {
        let err = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = FOO(a)").unwrap_err();
        match err {
            BenchError::UnknownGateKind { line, kind } => {
                assert_eq!((line, kind.as_str()), (3, "FOO"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn lowercase_kinds_and_buf_alias() {
        let n = parse_bench(
            "t",
            "INPUT(a)\nOUTPUT(y)\nOUTPUT(z)\ny = buf(a)\nz = Not(y) # trailing",
        )
        .unwrap();
        assert_eq!(n.gates()[0].kind, GateKind::Buff);
        assert_eq!(n.gates()[1].kind, GateKind::Not);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = AND(a b)").unwrap_err();
        match err {
            BenchError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 11)),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse_bench("t", "INPUT(a$)").unwrap_err(),
            BenchError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn structural_errors_surface_as_violations() {
        let dup = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a)").unwrap_err();
        match dup {
            BenchError::Invalid(e) => {
                assert!(e
                    .violations
                    .contains(&Violation::DuplicateDriver { signal: "y".into() }))
            }
            e => panic!("unexpected {e}"),
        }
        let undeclared = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = AND(a, q)").unwrap_err();
        assert!(matches!(undeclared, BenchError::Invalid(ref e)
            if matches!(e.violations[0], Violation::UndeclaredSignal { .. })));
        let cyc = parse_bench("t", "INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = NOT(y)").unwrap_err();
        assert!(matches!(cyc, BenchError::Invalid(ref e)
            if matches!(e.violations[0], Violation::Cycle { .. })));
    }

    #[test]
    fn key_header_and_key_inputs() {
        let text = "# key=01\nINPUT(a)\nINPUT(keyinput1)\nINPUT(keyinput0)\nOUTPUT(y)\n\
                    t = XOR(a, keyinput0)\ny = XNOR(t, keyinput1)\n";
        let n = parse_bench("t", text).unwrap();
        assert_eq!(n.primary_inputs().len(), 1);
        assert_eq!(n.signal_name(n.key_inputs()[0]), "keyinput0");
        assert_eq!(n.correct_key().unwrap().to_string(), "01");
        let out = write_bench(&n);
        assert!(out.starts_with("# key=01\n"));
        assert_eq!(parse_bench("t", &out).unwrap(), n);

        let bad = text.replace("# key=01", "# key=011");
        assert!(matches!(
            parse_bench("t", &bad).unwrap_err(),
            BenchError::KeyWidthMismatch {
                header_bits: 3,
                key_inputs: 2
            }
        ));
        let missing = text.replace("# key=01\n", "");
        assert!(matches!(
            parse_bench("t", &missing).unwrap_err(),
            BenchError::KeyWidthMismatch {
                header_bits: 0,
                key_inputs: 2
            }
        ));
    }
}
