mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "mpc", version, about = "Dishonest-majority MPC sessions, proofs and quorum tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Modulus {
    /// 2^61 - 1
    M61,
    /// 101, for exhaustive experiments
    #[value(name = "101")]
    P101,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum OutputCheckArg {
    SigmaSum,
    OpenAlpha,
}

#[derive(Subcommand)]
enum Command {
    /// Deal preprocessing material for one session into a binary bundle.
    GenPreproc {
        #[arg(long)]
        parties: usize,
        #[arg(long, default_value_t = 0)]
        triples: usize,
        #[arg(long, default_value_t = 0)]
        bits: usize,
        /// Input masks; defaults to 64.
        #[arg(long)]
        masks: Option<usize>,
        /// Sacrifice randomness; defaults to triples / 2 + 1.
        #[arg(long)]
        singles: Option<usize>,
        /// Size every count exactly from this circuit's cost report.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "m61")]
        modulus: Modulus,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a circuit with a preprocessing bundle and write outputs, proof,
    /// roster and transcript.
    Run {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        preproc: PathBuf,
        /// Lines `party <id> <value>`.
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        seed: u64,
        /// e.g. "2:tamper-open:+1;4:abort-at:10"
        #[arg(long)]
        adversary: Option<String>,
        /// Rounds to wait for a silent peer.
        #[arg(long)]
        timeout: Option<u64>,
        #[arg(long, value_enum, default_value = "sigma-sum")]
        output_check: OutputCheckArg,
        /// Seeded MAC check after this many unchecked openings.
        #[arg(long)]
        check_interval: Option<usize>,
        /// Directory for outputs.txt, proof.txt, roster.txt and transcript.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Second-price auction over secret bids, one bidder per party.
    DemoAuction {
        #[arg(long, default_value_t = 3)]
        bidders: usize,
        #[arg(long, default_value_t = 32)]
        bits: u32,
        /// Comma-separated bids; random under --seed when omitted.
        #[arg(long, value_delimiter = ',')]
        bids: Option<Vec<u64>>,
        /// Computing parties; defaults to one per bidder.
        #[arg(long)]
        parties: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a computation proof against a roster. Exit 0 accept, 1 reject.
    Verify {
        #[arg(long)]
        proof: PathBuf,
        #[arg(long)]
        roster: PathBuf,
    },
    /// Commit-reveal randomness round and quorum selection.
    Drf {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 3)]
        quorum: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Chance that a coalition fills a whole quorum.
    EconTable {
        #[arg(long, default_value_t = 100)]
        quorum: u32,
    },
}

pub enum CliError {
    Usage(String),
    Abort(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::GenPreproc { parties, triples, bits, masks, singles, circuit, modulus, seed, out } => {
            commands::gen_preproc(commands::GenArgs { parties, triples, bits, masks, singles, circuit, modulus, seed, out })
        }
        Command::Run { circuit, preproc, inputs, seed, adversary, timeout, output_check, check_interval, out_dir } => {
            commands::run(commands::RunArgs {
                circuit,
                preproc,
                inputs,
                seed,
                adversary,
                timeout,
                output_check,
                check_interval,
                out_dir,
            })
        }
        Command::DemoAuction { bidders, bits, bids, parties, seed } => commands::demo_auction(bidders, bits, bids, parties, seed),
        Command::Verify { proof, roster } => commands::verify(&proof, &roster),
        Command::Drf { nodes, quorum, seed } => commands::drf(nodes, quorum, seed),
        Command::EconTable { quorum } => commands::econ_table(quorum),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Abort(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
