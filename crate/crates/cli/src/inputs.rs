use mpc_core::field::Fp;

/// Parses `party <id> <value>` lines into per-party lists in file order.
/// Blank lines and `#` comments are skipped; values may be negative.
pub fn parse_inputs<const P: u64>(text: &str, n: usize) -> Result<Vec<Vec<Fp<P>>>, String> {
    let mut out = vec![Vec::new(); n];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| format!("inputs line {}: {m}", i + 1);
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [kw, id, value] = toks[..] else {
            return Err(err("expected `party <id> <value>`"));
        };
        if kw != "party" {
            return Err(err("expected `party <id> <value>`"));
        }
        let id: usize = id.parse().map_err(|_| err("bad party id"))?;
        if id >= n {
            return Err(err(&format!("party {id} out of range for {n} parties")));
        }
        let v: i64 = value.parse().map_err(|_| err("bad value"))?;
        out[id].push(Fp::from_i64(v));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpc_core::field::MERSENNE_61;

    #[test]
    fn groups_by_party_in_order() {
        let v = parse_inputs::<MERSENNE_61>("party 1 4\n# note\n\nparty 0 3\nparty 1 -1\n", 2).unwrap();
        assert_eq!(v[0], vec![Fp::new(3)]);
        assert_eq!(v[1], vec![Fp::new(4), Fp::from_i64(-1)]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_inputs::<MERSENNE_61>("party 2 1\n", 2).unwrap_err().contains("line 1"));
        assert!(parse_inputs::<MERSENNE_61>("p 0 1\n", 2).is_err());
        assert!(parse_inputs::<MERSENNE_61>("party 0 x\n", 2).is_err());
        assert!(parse_inputs::<MERSENNE_61>("party 0\n", 2).is_err());
    }
}
