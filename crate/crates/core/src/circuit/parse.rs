use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

use super::{Circuit, Gate, WireId, DEFAULT_BITWIDTH};
use crate::field::Fp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownOpcode(String),
    Arity { op: String, expected: usize, got: usize },
    BadNumber(String),
    WireRedefined(String),
    DanglingWire(String),
    Cycle,
    BadParameter(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnknownOpcode(op) => write!(f, "unknown opcode {op:?}"),
            ParseErrorKind::Arity { op, expected, got } => {
                write!(f, "{op} takes {expected} operands, got {got}")
            }
            ParseErrorKind::BadNumber(s) => write!(f, "bad number {s:?}"),
            ParseErrorKind::WireRedefined(w) => write!(f, "wire {w:?} redefined"),
            ParseErrorKind::DanglingWire(w) => write!(f, "wire {w:?} is never defined"),
            ParseErrorKind::Cycle => write!(f, "gate is part of a cycle"),
            ParseErrorKind::BadParameter(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

/// A gate before wire resolution: names instead of ids.
struct RawGate<const P: u64> {
    line: usize,
    template: Gate<P>,
    ins: Vec<String>,
    outs: Vec<String>,
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, ParseError> {
    s.parse().map_err(|_| ParseError { line, kind: ParseErrorKind::BadNumber(s.to_string()) })
}

fn parse_line<const P: u64>(line: usize, f: &[&str]) -> Result<RawGate<P>, ParseError> {
    let op = f[0];
    let args = &f[1..];
    let arity = |expected: usize| {
        if args.len() == expected {
            Ok(())
        } else {
            Err(ParseError { line, kind: ParseErrorKind::Arity { op: op.to_string(), expected, got: args.len() } })
        }
    };
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let raw = |template, ins: Vec<String>, outs: Vec<String>| Ok(RawGate { line, template, ins, outs });
    match op {
        "in" => {
            arity(2)?;
            raw(Gate::Input { party: num(args[0], line)?, out: 0 }, vec![], s(&args[1..]))
        }
        "const" => {
            arity(2)?;
            raw(Gate::Const { c: num::<Fp<P>>(args[0], line)?, out: 0 }, vec![], s(&args[1..]))
        }
        "add" | "mul" | "cmp" => {
            arity(3)?;
            let t = match op {
                "add" => Gate::Add { a: 0, b: 0, out: 0 },
                "mul" => Gate::Mul { a: 0, b: 0, out: 0 },
                _ => Gate::Cmp { a: 0, b: 0, out: 0 },
            };
            raw(t, s(&args[..2]), s(&args[2..]))
        }
        "addc" | "smul" => {
            arity(3)?;
            let c = num::<Fp<P>>(args[0], line)?;
            let t = if op == "addc" { Gate::AddConst { c, a: 0, out: 0 } } else { Gate::SMul { k: c, a: 0, out: 0 } };
            raw(t, s(&args[1..2]), s(&args[2..]))
        }
        "trunc" => {
            arity(4)?;
            let (k, m) = (num::<u32>(args[0], line)?, num::<u32>(args[1], line)?);
            if m == 0 || m >= k {
                let msg = format!("trunc needs 0 < m < k, got k={k} m={m}");
                return Err(ParseError { line, kind: ParseErrorKind::BadParameter(msg) });
            }
            raw(Gate::Trunc { k, m, a: 0, out: 0 }, s(&args[2..3]), s(&args[3..]))
        }
        "flmul" => {
            arity(13)?;
            let l = num::<u32>(args[0], line)?;
            if l < 2 {
                let msg = format!("flmul needs l >= 2, got {l}");
                return Err(ParseError { line, kind: ParseErrorKind::BadParameter(msg) });
            }
            raw(Gate::FlMul { l, x: [0; 4], y: [0; 4], out: [0; 4] }, s(&args[1..9]), s(&args[9..]))
        }
        "out" => {
            arity(1)?;
            raw(Gate::Output { a: 0 }, s(args), vec![])
        }
        other => Err(ParseError { line, kind: ParseErrorKind::UnknownOpcode(other.to_string()) }),
    }
}

fn fill<const P: u64>(t: Gate<P>, i: &[WireId], o: &[WireId]) -> Gate<P> {
    match t {
        Gate::Input { party, .. } => Gate::Input { party, out: o[0] },
        Gate::Const { c, .. } => Gate::Const { c, out: o[0] },
        Gate::Add { .. } => Gate::Add { a: i[0], b: i[1], out: o[0] },
        Gate::AddConst { c, .. } => Gate::AddConst { c, a: i[0], out: o[0] },
        Gate::SMul { k, .. } => Gate::SMul { k, a: i[0], out: o[0] },
        Gate::Mul { .. } => Gate::Mul { a: i[0], b: i[1], out: o[0] },
        Gate::Cmp { .. } => Gate::Cmp { a: i[0], b: i[1], out: o[0] },
        Gate::Trunc { k, m, .. } => Gate::Trunc { k, m, a: i[0], out: o[0] },
        Gate::FlMul { l, .. } => Gate::FlMul {
            l,
            x: i[..4].try_into().expect("4 wires"),
            y: i[4..].try_into().expect("4 wires"),
            out: o.try_into().expect("4 wires"),
        },
        Gate::Output { .. } => Gate::Output { a: i[0] },
    }
}

/// Parses and validates. Gates may appear in any order as long as the
/// dependency graph is acyclic; the result is topologically sorted, keeping
/// file order where dependencies allow.
pub fn parse_circuit<const P: u64>(text: &str) -> Result<Circuit<P>, ParseError> {
    let mut bitwidth = DEFAULT_BITWIDTH;
    let mut raws: Vec<RawGate<P>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("");
        let f: Vec<&str> = content.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f[0] == "bitwidth" {
            if f.len() != 2 {
                let kind = ParseErrorKind::Arity { op: "bitwidth".into(), expected: 1, got: f.len() - 1 };
                return Err(ParseError { line: line_no, kind });
            }
            bitwidth = num(f[1], line_no)?;
            if bitwidth == 0 || bitwidth >= 62 {
                let kind = ParseErrorKind::BadParameter(format!("bitwidth {bitwidth} out of range 1..=61"));
                return Err(ParseError { line: line_no, kind });
            }
            continue;
        }
        raws.push(parse_line(line_no, &f)?);
    }

    // Definitions first so gates may reference wires defined later in the file.
    let mut ids: HashMap<String, WireId> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut producer: Vec<usize> = Vec::new();
    for (gi, r) in raws.iter().enumerate() {
        for name in &r.outs {
            if ids.contains_key(name) {
                return Err(ParseError { line: r.line, kind: ParseErrorKind::WireRedefined(name.clone()) });
            }
            ids.insert(name.clone(), names.len());
            names.push(name.clone());
            producer.push(gi);
        }
    }
    let mut resolved: Vec<(Vec<WireId>, Vec<WireId>)> = Vec::with_capacity(raws.len());
    for r in &raws {
        let ins = r
            .ins
            .iter()
            .map(|n| {
                ids.get(n)
                    .copied()
                    .ok_or_else(|| ParseError { line: r.line, kind: ParseErrorKind::DanglingWire(n.clone()) })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let outs = r.outs.iter().map(|n| ids[n]).collect();
        resolved.push((ins, outs));
    }

    // Kahn's algorithm, smallest original index first.
    let g = raws.len();
    let mut indegree = vec![0usize; g];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (gi, (ins, _)) in resolved.iter().enumerate() {
        for &w in ins {
            indegree[gi] += 1;
            dependents[producer[w]].push(gi);
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..g).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(g);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &d in &dependents[i] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.push(Reverse(d));
            }
        }
    }
    if order.len() < g {
        let stuck = (0..g).find(|&i| indegree[i] > 0).expect("some gate unsorted");
        return Err(ParseError { line: raws[stuck].line, kind: ParseErrorKind::Cycle });
    }

    // Renumber wires in definition order of the sorted gates.
    let mut renum = vec![usize::MAX; names.len()];
    let mut sorted_names = Vec::with_capacity(names.len());
    for &gi in &order {
        for &w in &resolved[gi].1 {
            renum[w] = sorted_names.len();
            sorted_names.push(names[w].clone());
        }
    }
    let gates = order
        .iter()
        .map(|&gi| {
            let (ins, outs) = &resolved[gi];
            let ins: Vec<WireId> = ins.iter().map(|&w| renum[w]).collect();
            let outs: Vec<WireId> = outs.iter().map(|&w| renum[w]).collect();
            fill(raws[gi].template, &ins, &outs)
        })
        .collect();
    Ok(Circuit::from_parts(gates, sorted_names, bitwidth))
}
