//! `conlab` — scenario runner, defense comparison, attack driver, and
//! cover-file codec, all emitting deterministic CSV.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or parse error
//! (including missing input files).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use conlab::covermix::{self, CoverMixError};
use conlab::harness::{
    self, compare_defenses, parse_defense_list, parse_scenario, resolve_seed, run_attack,
    run_scenario, DefenseSpec, HarnessError, ATTACK_NAMES,
};

#[derive(Parser)]
#[command(name = "conlab", version, about = "Content-network privacy lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's schedule and print the event trace as CSV
    Simulate {
        /// Scenario file path
        scenario: PathBuf,
        /// Override the scenario seed (also overrides CONLAB_SEED)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a scenario once per defense and print one CSV row per
    /// (defense, metric); a `none` baseline always leads
    CompareDefenses {
        scenario: PathBuf,
        /// Comma-separated defenses with colon arguments, e.g.
        /// `wait_before_reply,delay_first_k:1:8,prob_cache:0.5,collaborative:r1:r2`
        /// (default: the scenario's own defense, or the three
        /// parameter-free ones)
        #[arg(long)]
        defenses: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario's declared attack and print the report CSV;
    /// `kind` must match the scenario's [attack] section
    Attack {
        /// One of: timing, monitor, dump
        kind: String,
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// XOR cover-file codec
    Covermix {
        #[command(subcommand)]
        op: CovermixOp,
    },
}

#[derive(Subcommand)]
enum CovermixOp {
    /// Split a file into blocks, mix in cover blocks, and write every
    /// k-subset XOR codeword plus meta.txt and the covers
    Encode {
        /// Expected legitimate block count; checked against the content
        /// length (the count is fully determined by the file size and
        /// --block-size, so this flag only validates)
        #[arg(long)]
        alpha: Option<usize>,
        /// Cover block count
        #[arg(long)]
        beta: usize,
        /// Blocks XORed per codeword
        #[arg(long)]
        k: usize,
        /// Block size in bytes (≥ 16)
        #[arg(long = "block-size")]
        block_size: usize,
        /// Naming / cover-generation seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Content file to encode
        input: PathBuf,
        /// Output directory for codewords, meta.txt, and covers/
        outdir: PathBuf,
    },
    /// Reassemble the original file from an encoding directory and the
    /// public cover blocks
    Decode {
        /// Directory written by encode (codewords + meta.txt)
        outdir: PathBuf,
        /// Directory holding cover_<i>.bin (encode writes outdir/covers)
        covers: PathBuf,
        /// Where to write the reconstructed content
        output: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn from_harness(path: &Path, e: HarnessError) -> CliError {
    match e {
        HarnessError::Parse { .. } => usage(format!("{}: {e}", path.display())),
        HarnessError::Build(msg) => CliError::Runtime(msg),
    }
}

fn load_scenario(path: &Path) -> Result<harness::Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| from_harness(path, e))
}

fn seed_for(path: &Path, scenario_seed: u64, flag: Option<u64>) -> Result<u64, CliError> {
    resolve_seed(scenario_seed, flag).map_err(|e| from_harness(path, e))
}

/// Splits covermix failures into bad input (2) vs. failed computation (1).
fn from_covermix(e: CoverMixError) -> CliError {
    match e {
        CoverMixError::Io(_)
        | CoverMixError::MetaParse { .. }
        | CoverMixError::MalformedCodeword { .. }
        | CoverMixError::BlockTooSmall { .. }
        | CoverMixError::InvalidParams { .. } => usage(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate { scenario, seed } => {
            let sc = load_scenario(&scenario)?;
            let seed = seed_for(&scenario, sc.base_config.seed, seed)?;
            let run = run_scenario(&sc, seed).map_err(|e| from_harness(&scenario, e))?;
            Ok(run.sim.trace_csv())
        }
        Command::CompareDefenses { scenario, defenses, seed } => {
            let sc = load_scenario(&scenario)?;
            let seed = seed_for(&scenario, sc.base_config.seed, seed)?;
            let list = match defenses {
                Some(text) => parse_defense_list(&text)
                    .map_err(|e| usage(format!("--defenses: {e}")))?,
                None if sc.defense != DefenseSpec::None => vec![sc.defense.clone()],
                None => vec![
                    DefenseSpec::WaitBeforeReply,
                    DefenseSpec::DelayFirstK { k_min: 1, k_max: 8 },
                    DefenseSpec::ProbCache { p0: 0.5 },
                ],
            };
            compare_defenses(&sc, &list, seed).map_err(|e| from_harness(&scenario, e))
        }
        Command::Attack { kind, scenario, seed } => {
            if !ATTACK_NAMES.contains(&kind.as_str()) {
                return Err(usage(format!(
                    "unknown attack kind {kind:?} (known: {})",
                    ATTACK_NAMES.join(", ")
                )));
            }
            let sc = load_scenario(&scenario)?;
            let seed = seed_for(&scenario, sc.base_config.seed, seed)?;
            let Some(attack) = &sc.attack else {
                return Err(usage(format!(
                    "{}: scenario declares no [attack] section",
                    scenario.display()
                )));
            };
            if attack.kind() != kind {
                return Err(usage(format!(
                    "scenario declares a {} attack, not {kind:?}",
                    attack.kind()
                )));
            }
            run_attack(&sc, seed).map_err(|e| from_harness(&scenario, e))
        }
        Command::Covermix { op } => run_covermix(op),
    }
}

fn run_covermix(op: CovermixOp) -> Result<String, CliError> {
    match op {
        CovermixOp::Encode { alpha, beta, k, block_size, seed, input, outdir } => {
            let content = std::fs::read(&input)
                .map_err(|e| usage(format!("cannot read {}: {e}", input.display())))?;
            let enc = covermix::encode_content(&content, beta, k, block_size, seed)
                .map_err(from_covermix)?;
            if let Some(a) = alpha {
                if a != enc.params.alpha {
                    return Err(usage(format!(
                        "--alpha {a} does not match the content: {} bytes split into \
                         {} blocks of {block_size}",
                        content.len(),
                        enc.params.alpha
                    )));
                }
            }
            covermix::write_encoding(&outdir, &enc)
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", outdir.display())))?;
            let cost = covermix::encode_cost(enc.params.alpha, beta, k);
            let mut out = String::from("field,value\n");
            out.push_str(&format!("alpha,{}\n", enc.params.alpha));
            out.push_str(&format!("beta,{beta}\n"));
            out.push_str(&format!("k,{k}\n"));
            out.push_str(&format!("block_size,{block_size}\n"));
            out.push_str(&format!("seed,{seed}\n"));
            out.push_str(&format!("codewords,{}\n", cost.codewords));
            out.push_str(&format!("bound,{}\n", cost.bound));
            out.push_str(&format!("content_len,{}\n", content.len()));
            out.push_str(&format!("content_sha256,{}\n", hex_digest(&enc.meta.content_sha256)));
            Ok(out)
        }
        CovermixOp::Decode { outdir, covers, output } => {
            let (codewords, cover_blocks, meta) =
                covermix::read_encoding(&outdir, &covers).map_err(from_covermix)?;
            let content = covermix::decode(&codewords, &cover_blocks, &meta)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            std::fs::write(&output, &content)
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", output.display())))?;
            let digest: [u8; 32] = Sha256::digest(&content).into();
            let mut out = String::from("field,value\n");
            out.push_str(&format!("content_len,{}\n", content.len()));
            out.push_str(&format!("content_sha256,{}\n", hex_digest(&digest)));
            Ok(out)
        }
    }
}

fn hex_digest(d: &[u8; 32]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
