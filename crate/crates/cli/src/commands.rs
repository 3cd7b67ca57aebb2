use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use mpc_core::auction::{auction_inputs, decode_outcome, vickrey_circuit, vickrey_plain};
use mpc_core::chain::{coordinated_table, verify_proof};
use mpc_core::circuit::{parse_circuit, Circuit};
use mpc_core::engine::{derive_seed, run_session, ComputationProof, EngineConfig, EngineError, OutputCheck, Roster, Session};
use mpc_core::field::{MERSENNE_61, SMALL_PRIME};
use mpc_core::preprocessing::{read_header, PreprocBundle, PreprocCounts};
use mpc_core::quorum::{select_quorum, simulate_drf};
use mpc_core::transport::AdversarySpec;

use crate::inputs::parse_inputs;
use crate::{CliError, Modulus, OutputCheckArg};

type Res = Result<(), CliError>;

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_circuit<const P: u64>(path: &Path) -> Result<Circuit<P>, CliError> {
    parse_circuit(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub struct GenArgs {
    pub parties: usize,
    pub triples: usize,
    pub bits: usize,
    pub masks: Option<usize>,
    pub singles: Option<usize>,
    pub circuit: Option<PathBuf>,
    pub modulus: Modulus,
    pub seed: u64,
    pub out: PathBuf,
}

pub fn gen_preproc(a: GenArgs) -> Res {
    match a.modulus {
        Modulus::M61 => gen_preproc_in::<MERSENNE_61>(a),
        Modulus::P101 => gen_preproc_in::<SMALL_PRIME>(a),
    }
}

fn gen_preproc_in<const P: u64>(a: GenArgs) -> Res {
    if a.parties < 2 {
        return Err(usage("need at least 2 parties"));
    }
    let counts = match &a.circuit {
        Some(path) => load_circuit::<P>(path)?.cost().map_err(usage)?.preproc_counts(),
        None => PreprocCounts {
            triples: a.triples,
            masks: a.masks.unwrap_or(64),
            singles: a.singles.unwrap_or(a.triples / 2 + 1),
            bits: a.bits,
        },
    };
    let mut rng = ChaCha20Rng::from_seed(derive_seed(a.seed, "dealer", 0));
    let (bundle, _) = PreprocBundle::<P>::generate(a.parties, a.seed, counts, &mut rng).map_err(usage)?;
    fs::write(&a.out, bundle.to_bytes()).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    println!("parties: {}", a.parties);
    println!("modulus: {P}");
    println!("triples: {}", counts.triples);
    println!("masks: {}", counts.masks);
    println!("singles: {}", counts.singles);
    println!("bits: {}", counts.bits);
    Ok(())
}

pub struct RunArgs {
    pub circuit: PathBuf,
    pub preproc: PathBuf,
    pub inputs: PathBuf,
    pub seed: u64,
    pub adversary: Option<String>,
    pub timeout: Option<u64>,
    pub output_check: OutputCheckArg,
    pub check_interval: Option<usize>,
    pub out_dir: PathBuf,
}

pub fn run(a: RunArgs) -> Res {
    let mut f = fs::File::open(&a.preproc).map_err(|e| usage(format!("{}: {e}", a.preproc.display())))?;
    let header = read_header(&mut f).map_err(usage)?;
    match header.modulus {
        MERSENNE_61 => run_in::<MERSENNE_61>(a),
        SMALL_PRIME => run_in::<SMALL_PRIME>(a),
        m => Err(usage(format!("unsupported modulus {m}"))),
    }
}

fn run_in<const P: u64>(a: RunArgs) -> Res {
    let circuit = load_circuit::<P>(&a.circuit)?;
    let file = fs::File::open(&a.preproc).map_err(|e| usage(format!("{}: {e}", a.preproc.display())))?;
    let bundle = PreprocBundle::<P>::read_from(BufReader::new(file)).map_err(usage)?;
    let n = bundle.n();
    let inputs = parse_inputs::<P>(&read(&a.inputs)?, n).map_err(usage)?;
    let adversary = match &a.adversary {
        Some(s) => s.parse::<AdversarySpec>().map_err(usage)?,
        None => AdversarySpec::honest(),
    };
    adversary.validate(n).map_err(usage)?;
    let mut config = EngineConfig {
        output_check: match a.output_check {
            OutputCheckArg::SigmaSum => OutputCheck::SigmaSum,
            OutputCheckArg::OpenAlpha => OutputCheck::OpenAlpha,
        },
        mac_check_interval: a.check_interval,
        ..EngineConfig::default()
    };
    if let Some(t) = a.timeout {
        config.timeout_rounds = t;
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| usage(format!("{}: {e}", a.out_dir.display())))?;
    let session = Session::new(bundle, a.seed).with_adversary(adversary).with_config(config);
    let roster_text = session.roster.to_text();
    write(&a.out_dir.join("roster.txt"), &roster_text)?;
    println!("parties: {n}");
    println!("modulus: {P}");
    match run_session(&circuit, &inputs, session) {
        Ok(r) => {
            let outs: Vec<String> = r.outputs.iter().map(|v| v.value().to_string()).collect();
            write(&a.out_dir.join("outputs.txt"), &(outs.join("\n") + "\n"))?;
            write(&a.out_dir.join("proof.txt"), &r.proof.to_text())?;
            write(&a.out_dir.join("transcript.txt"), &r.transcript.to_text())?;
            let c = r.consumed();
            println!("status: ok");
            println!("outputs: {}", outs.join(" "));
            println!("rounds: {}", r.stats.rounds);
            println!("messages: {}", r.stats.messages);
            println!("bytes: {}", r.stats.bytes);
            println!("triples-consumed: {}", c.triples);
            println!("masks-consumed: {}", c.masks);
            println!("singles-consumed: {}", c.singles);
            println!("bits-consumed: {}", c.bits);
            println!("transcript-head: {}", r.transcript.head_hex());
            Ok(())
        }
        Err(fail) => {
            if let Some(t) = &fail.transcript {
                write(&a.out_dir.join("transcript.txt"), &t.to_text())?;
            }
            match fail.error {
                EngineError::Usage(m) => Err(CliError::Usage(m)),
                EngineError::Exhausted(e) => {
                    println!("status: abort");
                    println!("reason: exhausted");
                    Err(CliError::Abort(e.to_string()))
                }
                EngineError::Abort(ab) => {
                    println!("status: abort");
                    println!("reason: {}", ab.reason);
                    println!("round: {}", ab.round);
                    match ab.blamed {
                        Some(p) => println!("blame: {p}"),
                        None => println!("blame: none"),
                    }
                    Err(CliError::Abort(ab.to_string()))
                }
            }
        }
    }
}

pub fn demo_auction(bidders: usize, bits: u32, bids: Option<Vec<u64>>, parties: Option<usize>, seed: u64) -> Res {
    let bids = match bids {
        Some(b) => b,
        None => {
            if !(1..=32).contains(&bits) {
                return Err(usage("--bits must be between 1 and 32"));
            }
            let mut rng = ChaCha20Rng::from_seed(derive_seed(seed, "auction bids", 0));
            (0..bidders).map(|_| rng.gen_range(0..1u64 << bits)).collect()
        }
    };
    let n = parties.unwrap_or(bids.len());
    if n < 2 {
        return Err(usage("need at least 2 parties"));
    }
    let circuit = vickrey_circuit::<MERSENNE_61>(bids.len(), n, bits).map_err(usage)?;
    let inputs = auction_inputs::<MERSENNE_61>(&bids, n, bits).map_err(usage)?;
    let counts = circuit.cost().map_err(usage)?.preproc_counts();
    let t0 = Instant::now();
    let (session, _) = Session::<MERSENNE_61>::dealt(n, counts, seed).map_err(usage)?;
    let offline = t0.elapsed();
    let t1 = Instant::now();
    let r = run_session(&circuit, &inputs, session).map_err(|f| match f.error {
        EngineError::Usage(m) => CliError::Usage(m),
        e => CliError::Abort(e.to_string()),
    })?;
    let online = t1.elapsed();
    let got = decode_outcome(&r.outputs);
    let expect = vickrey_plain(&bids).map_err(usage)?;
    println!("bidders: {}", bids.len());
    println!("parties: {n}");
    println!("winner: {}", got.winner);
    println!("price: {}", got.price);
    println!("oracle: {}", if got == expect { "match" } else { "MISMATCH" });
    println!("triples-consumed: {}", r.consumed().triples);
    println!("bits-consumed: {}", r.consumed().bits);
    println!("rounds: {}", r.stats.rounds);
    println!("offline-ms: {:.3}", offline.as_secs_f64() * 1e3);
    println!("online-ms: {:.3}", online.as_secs_f64() * 1e3);
    if got != expect {
        return Err(CliError::Abort(format!("secure result {got:?} differs from plaintext {expect:?}")));
    }
    Ok(())
}

pub fn verify(proof: &Path, roster: &Path) -> Res {
    let proof_text = read(proof)?;
    let roster = Roster::from_text(&read(roster)?).map_err(usage)?;
    match ComputationProof::<MERSENNE_61>::peek_modulus(&proof_text) {
        Some(MERSENNE_61) => verify_in::<MERSENNE_61>(&proof_text, &roster),
        Some(SMALL_PRIME) => verify_in::<SMALL_PRIME>(&proof_text, &roster),
        Some(m) => Err(usage(format!("unsupported modulus {m}"))),
        None => Err(usage("proof file has no modulus line")),
    }
}

fn verify_in<const P: u64>(text: &str, roster: &Roster) -> Res {
    let proof = ComputationProof::<P>::from_text(text).map_err(usage)?;
    match verify_proof(&proof, roster) {
        Ok(()) => {
            println!("verdict: accept");
            Ok(())
        }
        Err(rej) => {
            println!("verdict: reject");
            println!("reason: {}", rej.as_str());
            if let mpc_core::chain::Rejection::BadSignature(p) = rej {
                println!("party: {p}");
            }
            Err(CliError::Abort(rej.to_string()))
        }
    }
}

pub fn drf(nodes: usize, quorum: usize, seed: u64) -> Res {
    if nodes == 0 {
        return Err(usage("need at least one node"));
    }
    let ids: Vec<usize> = (0..nodes).collect();
    let (tickets, reveals) = simulate_drf(&ids, seed);
    let p = mpc_core::quorum::drf_round(&tickets, &reveals).map_err(|e| CliError::Abort(e.to_string()))?;
    let q = select_quorum(p, &ids, quorum, &[]).map_err(usage)?;
    let sel: Vec<String> = q.selected.iter().map(|n| n.to_string()).collect();
    println!("randomness: {}", p.value());
    println!("quorum: {}", sel.join(" "));
    println!("prover: {}", q.prover);
    Ok(())
}

pub fn econ_table(quorum: u32) -> Res {
    println!("coalition quorum chance");
    for (f, q, c) in coordinated_table(quorum) {
        println!("{f} {q} {c}");
    }
    Ok(())
}
