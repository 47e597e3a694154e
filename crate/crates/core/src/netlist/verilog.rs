// SPDX-License-Identifier: Apache-2.0

//! Structural Verilog-2001 emission (single module, continuous assigns).

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{GateKind, Netlist};

const KEYWORDS: &[&str] = &[
    "always",
    "and",
    "assign",
    "begin",
    "buf",
    "case",
    "default",
    "else",
    "end",
    "endcase",
    "endmodule",
    "for",
    "function",
    "if",
    "initial",
    "inout",
    "input",
    "integer",
    "module",
    "nand",
    "nor",
    "not",
    "or",
    "output",
    "parameter",
    "reg",
    "supply0",
    "supply1",
    "wire",
    "xnor",
    "xor",
];

fn is_legal(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

fn base_form(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if is_legal(&cleaned) {
        cleaned
    } else {
        format!("n_{cleaned}")
    }
}

/// Deterministic name map: legal names are kept; the rest get an `n_`
/// prefix and a numeric suffix on collision, in signal order.
struct Names {
    used: HashSet<String>,
}

impl Names {
    fn claim(&mut self, want: String) -> String {
        if self.used.insert(want.clone()) {
            return want;
        }
        (1..)
            .map(|i| format!("{want}_{i}"))
            .find(|c| self.used.insert(c.clone()))
            .expect("unbounded suffix search")
    }
}

/// Renders `n` as a structural Verilog module named after the netlist.
pub fn emit_verilog(n: &Netlist) -> String {
    let mut names = Names {
        used: HashSet::new(),
    };
    let module = base_form(n.name());
    names.used.insert(module.clone());

    let sigs = n.signal_names();
    let mut vname: Vec<Option<String>> = vec![None; sigs.len()];
    for (i, s) in sigs.iter().enumerate() {
        if is_legal(s) && names.used.insert(s.clone()) {
            vname[i] = Some(s.clone());
        }
    }
    for (i, s) in sigs.iter().enumerate() {
        if vname[i].is_none() {
            vname[i] = Some(names.claim(base_form(s)));
        }
    }
    let vname: Vec<String> = vname.into_iter().map(Option::unwrap).collect();

    // output ports: reuse the driver's name once; inputs or repeated outputs
    // get their own port and an assign
    let mut port_of_output: Vec<String> = Vec::new();
    let mut extra_assigns: Vec<(String, String)> = Vec::new();
    let mut direct: HashSet<usize> = HashSet::new();
    for &o in n.primary_outputs() {
        let v = &vname[o.index()];
        if n.is_gate_output(o) && direct.insert(o.index()) {
            port_of_output.push(v.clone());
        } else {
            let p = names.claim(format!("{v}_out"));
            extra_assigns.push((p.clone(), v.clone()));
            port_of_output.push(p);
        }
    }

    let mut s = String::new();
    let inputs: Vec<&String> = n
        .primary_inputs()
        .iter()
        .chain(n.key_inputs())
        .map(|i| &vname[i.index()])
        .collect();
    let ports: Vec<&String> = inputs
        .iter()
        .copied()
        .chain(port_of_output.iter())
        .collect();
    let _ = writeln!(s, "module {module} (");
    for (i, p) in ports.iter().enumerate() {
        let sep = if i + 1 == ports.len() { "" } else { "," };
        let _ = writeln!(s, "  {p}{sep}");
    }
    let _ = writeln!(s, ");");
    for p in &inputs {
        let _ = writeln!(s, "  input {p};");
    }
    for p in &port_of_output {
        let _ = writeln!(s, "  output {p};");
    }
    for g in n.gates() {
        if !direct.contains(&g.output.index()) {
            let _ = writeln!(s, "  wire {};", vname[g.output.index()]);
        }
    }
    for g in n.gates() {
        let ins: Vec<&str> = g.fanin.iter().map(|f| vname[f.index()].as_str()).collect();
        let expr = match g.kind {
            GateKind::And => ins.join(" & "),
            GateKind::Or => ins.join(" | "),
            GateKind::Xor => ins.join(" ^ "),
            GateKind::Nand => format!("~({})", ins.join(" & ")),
            GateKind::Nor => format!("~({})", ins.join(" | ")),
            GateKind::Xnor => format!("~({})", ins.join(" ^ ")),
            GateKind::Not => format!("~{}", ins[0]),
            GateKind::Buff => ins[0].to_string(),
        };
        let _ = writeln!(s, "  assign {} = {};", vname[g.output.index()], expr);
    }
    for (port, src) in &extra_assigns {
        let _ = writeln!(s, "  assign {port} = {src};");
    }
    s.push_str("endmodule\n");
    s
}
