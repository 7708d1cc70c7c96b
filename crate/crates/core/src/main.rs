//! `opsk`: batch verification front end. Every run writes one JSON report and
//! exits with 0 (all verdicts hold), 1 (falsified), 2 (inconclusive) or
//! 3 (input error).

use std::fs;
use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use opspace_kit::cbmaps::{cb_norm_lower, transpose_map, CbMap};
use opspace_kit::chu::{hs_object, morphism_valid, parse_formula, polarity, polarity_report, ChuMorphism};
use opspace_kit::hsduality::{cc_iff_cp_suite, hs_correspondence_suite, pairing_defect, transpose_channel, Channel, Picture};
use opspace_kit::numerics::json::to_string_17;
use opspace_kit::numerics::{NormEstimate, OptimizerConfig};
use opspace_kit::opspace::{check_axioms, standard_spaces, ElementMatrix, OperatorSpace};
use opspace_kit::switch::{no_haagerup_factorization, switch_mb_witness, SwitchInstance, SwitchVerdict};
use opspace_kit::tensors::{haagerup_norm, jcb_norm, mb_norm, projective_norm, BilinearMap, TensorElement};
use opspace_kit::{Error, Verdict};

#[derive(Parser)]
#[command(name = "opsk", version, about = "Operator space and quantum channel verification")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
#[serde(rename_all = "camelCase")]
struct RunConfig {
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Highest matrix level examined.
    #[arg(long, global = true, default_value_t = 3)]
    max_level: usize,
    /// Optimizer restarts per search.
    #[arg(long, global = true, default_value_t = 16)]
    restarts: usize,
    /// Tolerance for exact algebraic identities.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_alg: f64,
    /// Tolerance for optimized quantities.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_opt: f64,
    /// JSON input file (`-` for stdin).
    #[arg(long, global = true)]
    input: Option<String>,
    /// Report destination (stdout when absent).
    #[arg(long, global = true)]
    output: Option<String>,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long, global = true)]
    #[serde(skip)]
    no_timestamp: bool,
}

impl RunConfig {
    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig::with_seed(self.seed).restarts(self.restarts)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Matrix norm of an element: input `{"space", "element"}`.
    Norm,
    /// Completely bounded norm of a linear map.
    Cbnorm(MapSource),
    /// Tensor norm: input `{"left", "right", "element"}`.
    TensorNorm {
        #[arg(long, value_enum)]
        kind: TensorKind,
    },
    /// Jointly completely bounded norm of a bilinear map.
    Jcb(BilinearSource),
    /// Multiplicatively bounded norm of a bilinear map.
    Mb(BilinearSource),
    #[command(subcommand)]
    Channel(ChannelCommand),
    #[command(subcommand)]
    Switch(SwitchCommand),
    #[command(subcommand)]
    Chu(ChuCommand),
    /// Matrix-norm axiom sweep over one space (input `{"space"}`) or the
    /// standard list.
    VerifyAxioms {
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

#[derive(Args)]
struct MapSource {
    /// Built-in map instead of `--input`.
    #[arg(long, value_enum)]
    builtin: Option<BuiltinMap>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BuiltinMap {
    Transpose,
    Identity,
}

#[derive(Args)]
struct BilinearSource {
    #[arg(long, value_enum)]
    builtin: Option<BuiltinBilinear>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BuiltinBilinear {
    Switch,
    Multiplication,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TensorKind {
    Proj,
    Haag,
}

#[derive(Subcommand)]
enum ChannelCommand {
    /// Positivity, trace preservation and unitality, plus the
    /// contraction/positivity equivalence when it applies.
    Check(ChannelSource),
    /// Trace-pairing adjoint with both Choi matrices.
    Transpose(ChannelSource),
    /// Full duality suite between a channel and its transpose.
    HsSuite(ChannelSource),
}

#[derive(Args)]
struct ChannelSource {
    #[arg(long, value_enum)]
    builtin: Option<BuiltinMap>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Subcommand)]
enum SwitchCommand {
    /// Explicit multiplicative witness for the switch on `M_d`.
    Demo {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum ChuCommand {
    /// Morphism validity: input `{"channel"}` or
    /// `{"source", "target", "forward", "backward"}` with formulas.
    Check,
    /// Compositional interpretation of a polarized formula.
    Interpret {
        #[arg(long)]
        formula: Option<String>,
    },
}

/// Outcome of one command before it is wrapped into the report.
struct Outcome {
    label: String,
    input: Value,
    result: Value,
    verdict: Verdict,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn read_input(cfg: &RunConfig) -> Result<String, Error> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Invalid("this command needs --input FILE".into()))?;
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(fs::read_to_string(path)?)
    }
}

fn parse_input<T: DeserializeOwned>(cfg: &RunConfig) -> Result<(T, Value), Error> {
    let text = read_input(cfg)?;
    let raw: Value = serde_json::from_str(&text)?;
    let parsed = serde_json::from_str(&text)?;
    Ok((parsed, raw))
}

#[derive(serde::Deserialize)]
struct NormInput {
    space: OperatorSpace,
    element: ElementMatrix,
}

#[derive(serde::Deserialize)]
struct TensorInput {
    left: OperatorSpace,
    right: OperatorSpace,
    element: TensorElement,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum ChuInput {
    Channel { channel: Channel },
    Morphism { source: String, target: String, forward: CbMap, backward: CbMap },
}

#[derive(serde::Deserialize)]
struct SpaceInput {
    space: OperatorSpace,
}

/// Holds when the interval is closed to the optimization tolerance.
fn interval_verdict(e: &NormEstimate, tol: f64) -> Verdict {
    if e.gap() <= tol * e.upper.max(1.0) {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    }
}

fn load_map(src: &MapSource, cfg: &RunConfig) -> Result<(CbMap, Value), Error> {
    match src.builtin {
        Some(BuiltinMap::Transpose) => Ok((transpose_map(src.dim), json!({"builtin": "transpose", "dim": src.dim}))),
        Some(BuiltinMap::Identity) => Ok((
            CbMap::identity(opspace_kit::opspace::matrix_space(src.dim)),
            json!({"builtin": "identity", "dim": src.dim}),
        )),
        None => parse_input(cfg),
    }
}

fn load_bilinear(src: &BilinearSource, cfg: &RunConfig) -> Result<(BilinearMap, Value), Error> {
    match src.builtin {
        Some(BuiltinBilinear::Switch) => {
            Ok((SwitchInstance::build(src.dim)?.map, json!({"builtin": "switch", "dim": src.dim})))
        }
        Some(BuiltinBilinear::Multiplication) => {
            Ok((BilinearMap::multiplication(src.dim), json!({"builtin": "multiplication", "dim": src.dim})))
        }
        None => parse_input(cfg),
    }
}

fn load_channel(src: &ChannelSource, cfg: &RunConfig) -> Result<(Channel, Value), Error> {
    match src.builtin {
        Some(BuiltinMap::Identity) => Ok((
            Channel::identity(src.dim, Picture::Schrodinger),
            json!({"builtin": "identity", "dim": src.dim}),
        )),
        Some(BuiltinMap::Transpose) => Ok((
            transpose_channel(src.dim, Picture::Schrodinger),
            json!({"builtin": "transpose", "dim": src.dim}),
        )),
        None => parse_input(cfg),
    }
}

fn run(cmd: &Command, cfg: &RunConfig) -> Result<Outcome, Error> {
    let opt = cfg.optimizer();
    match cmd {
        Command::Norm => {
            let (inp, raw): (NormInput, Value) = parse_input(cfg)?;
            let est = inp.space.norm(&inp.element, &opt)?;
            Ok(Outcome {
                label: "matrix norm of an element".into(),
                input: raw,
                verdict: interval_verdict(&est, cfg.tol_opt),
                result: to_value(&est),
            })
        }
        Command::Cbnorm(src) => {
            let (map, raw) = load_map(src, cfg)?;
            let report = cb_norm_lower(&map, cfg.max_level, &opt)?;
            let upper = map.cb_upper();
            let verdict = if report.exact || upper - report.estimate.lower <= cfg.tol_opt * upper.max(1.0) {
                Verdict::Holds
            } else {
                Verdict::Inconclusive
            };
            Ok(Outcome {
                label: "completely bounded norm".into(),
                input: raw,
                result: json!({"value": report.estimate.lower, "certifiedUpper": upper, "report": report}),
                verdict,
            })
        }
        Command::TensorNorm { kind } => {
            let (inp, raw): (TensorInput, Value) = parse_input(cfg)?;
            let (label, est) = match kind {
                TensorKind::Proj => ("operator space projective tensor norm", projective_norm(&inp.left, &inp.right, &inp.element, &opt)?),
                TensorKind::Haag => ("Haagerup tensor norm", haagerup_norm(&inp.left, &inp.right, &inp.element, &opt)?),
            };
            Ok(Outcome {
                label: label.into(),
                input: json!({"kind": kind, "data": raw}),
                verdict: interval_verdict(&est, cfg.tol_opt),
                result: to_value(&est),
            })
        }
        Command::Jcb(src) | Command::Mb(src) => {
            let (u, raw) = load_bilinear(src, cfg)?;
            let (label, report) = if matches!(cmd, Command::Jcb(_)) {
                ("jointly completely bounded norm", jcb_norm(&u, cfg.max_level, &opt)?)
            } else {
                ("multiplicatively bounded norm", mb_norm(&u, cfg.max_level, &opt)?)
            };
            Ok(Outcome {
                label: label.into(),
                input: raw,
                verdict: interval_verdict(&report.estimate, cfg.tol_opt),
                result: to_value(&report),
            })
        }
        Command::Channel(sub) => run_channel(sub, cfg, &opt),
        Command::Switch(SwitchCommand::Demo { dim, n }) => {
            let s = SwitchInstance::build(*dim)?;
            let mut report = switch_mb_witness(&s, *n)?;
            let mut search = Value::Null;
            if report.verdict == SwitchVerdict::Inconclusive {
                let f = no_haagerup_factorization(&s, &opt)?;
                report.verdict = f.verdict;
                search = to_value(&f.search);
            }
            let verdict = match report.verdict {
                SwitchVerdict::Inconclusive => Verdict::Inconclusive,
                _ => Verdict::Holds,
            };
            let mut result = to_value(&report);
            result["factorizationSearch"] = search;
            Ok(Outcome {
                label: "the switch has multiplicatively bounded norm at least n".into(),
                input: json!({"dim": dim, "n": n}),
                result,
                verdict,
            })
        }
        Command::Chu(ChuCommand::Interpret { formula }) => {
            let (src, raw) = match formula {
                Some(f) => (f.clone(), json!({"formula": f})),
                None => {
                    let (v, raw): (Value, Value) = parse_input(cfg)?;
                    let f = v
                        .get("formula")
                        .and_then(Value::as_str)
                        .ok_or_else(|| Error::Invalid("input needs a string field \"formula\"".into()))?;
                    (f.to_string(), raw)
                }
            };
            let report = polarity_report(&src).map_err(|e| annotate(e, &src))?;
            Ok(Outcome {
                label: "compositional interpretation of a polarized formula".into(),
                input: raw,
                result: to_value(&report),
                verdict: Verdict::Holds,
            })
        }
        Command::Chu(ChuCommand::Check) => {
            let (inp, raw): (ChuInput, Value) = parse_input(cfg)?;
            let (m, a, b) = match inp {
                ChuInput::Channel { channel } => {
                    let m = ChuMorphism::from_channel(&channel)?;
                    (m, hs_object(channel.dim_in), hs_object(channel.dim_out))
                }
                ChuInput::Morphism { source, target, forward, backward } => {
                    let obj = |s: &str| -> Result<_, Error> {
                        let f = parse_formula(s).map_err(|e| annotate(e, s))?;
                        polarity(&f).map_err(|e| annotate(e, s))?;
                        Ok(polarity_report(s)?.object)
                    };
                    (ChuMorphism { forward, backward }, obj(&source)?, obj(&target)?)
                }
            };
            let check = morphism_valid(&m, &a, &b, cfg.max_level, &opt, cfg.tol_opt)?;
            Ok(Outcome {
                label: check.label.clone(),
                input: raw,
                verdict: check.verdict,
                result: to_value(&check),
            })
        }
        Command::VerifyAxioms { samples } => {
            let (spaces, raw) = if cfg.input.is_some() {
                let (inp, raw): (SpaceInput, Value) = parse_input(cfg)?;
                (vec![("input space".to_string(), inp.space)], raw)
            } else {
                (standard_spaces(), json!({"standard": true}))
            };
            let mut reports = Vec::new();
            let mut verdict = Verdict::Holds;
            for (i, (name, space)) in spaces.iter().enumerate() {
                let r = check_axioms(space, cfg.max_level, *samples, &opt.derived(i as u64), cfg.tol_opt)?;
                verdict = verdict.and(r.verdict);
                reports.push(json!({"name": name, "report": r}));
            }
            Ok(Outcome {
                label: "matrix norms satisfy the direct sum and bimodule axioms".into(),
                input: json!({"samples": samples, "data": raw}),
                result: Value::Array(reports),
                verdict,
            })
        }
    }
}

fn run_channel(sub: &ChannelCommand, cfg: &RunConfig, opt: &OptimizerConfig) -> Result<Outcome, Error> {
    match sub {
        ChannelCommand::Check(src) => {
            let (ch, raw) = load_channel(src, cfg)?;
            let cp = ch.is_completely_positive();
            let tp = ch.is_trace_preserving(cfg.tol_alg);
            let unital = ch.is_unital(cfg.tol_alg);
            let positive = ch.is_positive(64, cfg.seed);
            let suite = match cc_iff_cp_suite(&ch, cfg.max_level, opt, cfg.tol_opt) {
                Ok(r) => Some(r),
                Err(Error::NeitherUnitalNorTp) => None,
                Err(e) => return Err(e),
            };
            let verdict = suite.as_ref().map_or(Verdict::Holds, |s| s.verdict);
            Ok(Outcome {
                label: "channel predicates and the contraction/positivity equivalence".into(),
                input: raw,
                result: json!({
                    "completelyPositive": cp,
                    "tracePreserving": tp,
                    "unital": unital,
                    "positive": positive,
                    "normal": ch.is_normal(),
                    "contractionIffCp": suite,
                    "choi": ch.choi(),
                }),
                verdict,
            })
        }
        ChannelCommand::Transpose(src) => {
            let (ch, raw) = load_channel(src, cfg)?;
            let t = ch.transpose();
            let defect = pairing_defect(&ch, &t);
            Ok(Outcome {
                label: "transpose is the adjoint under the trace pairing".into(),
                input: raw,
                result: json!({
                    "transpose": t,
                    "choi": ch.choi(),
                    "transposeChoi": t.choi(),
                    "pairingDefect": defect,
                }),
                verdict: Verdict::from_bool(defect <= cfg.tol_alg),
            })
        }
        ChannelCommand::HsSuite(src) => {
            let (ch, raw) = load_channel(src, cfg)?;
            let r = hs_correspondence_suite(&ch, cfg.max_level, opt, cfg.tol_alg, cfg.tol_opt)?;
            Ok(Outcome {
                label: "Heisenberg and Schrodinger pictures correspond under the transpose".into(),
                input: raw,
                verdict: r.verdict,
                result: to_value(&r),
            })
        }
    }
}

/// Adds a caret line under the formula for positional errors.
fn annotate(e: Error, src: &str) -> Error {
    match e {
        Error::Parse { position, message } => {
            let caret = format!("{}^", " ".repeat(src[..position.min(src.len())].chars().count()));
            Error::Parse {
                position,
                message: format!("{message}\n  {src}\n  {caret}"),
            }
        }
        other => other,
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Norm => "norm",
        Command::Cbnorm(_) => "cbnorm",
        Command::TensorNorm { .. } => "tensor-norm",
        Command::Jcb(_) => "jcb",
        Command::Mb(_) => "mb",
        Command::Channel(ChannelCommand::Check(_)) => "channel check",
        Command::Channel(ChannelCommand::Transpose(_)) => "channel transpose",
        Command::Channel(ChannelCommand::HsSuite(_)) => "channel hs-suite",
        Command::Switch(_) => "switch demo",
        Command::Chu(ChuCommand::Check) => "chu check",
        Command::Chu(ChuCommand::Interpret { .. }) => "chu interpret",
        Command::VerifyAxioms { .. } => "verify-axioms",
    }
}

fn emit(cfg: &RunConfig, text: &str) -> io::Result<()> {
    match &cfg.output {
        Some(path) => fs::write(path, format!("{text}\n")),
        None => writeln!(io::stdout(), "{text}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = &cli.config;
    let outcome = match cfg.optimizer().validate().and_then(|_| run(&cli.command, cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("input error: {e}");
            return ExitCode::from(3);
        }
    };
    let code = outcome.verdict.exit_code();
    let mut report = json!({
        "command": command_name(&cli.command),
        "label": outcome.label,
        "config": to_value(cfg),
        "input": outcome.input,
        "result": outcome.result,
        "verdict": outcome.verdict,
        "exitCode": code,
    });
    if !cfg.no_timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report["timestamp"] = json!(secs);
    }
    let text = match to_string_17(&report) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("could not serialize report: {e}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = emit(cfg, &text) {
        eprintln!("could not write report: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code as u8)
}
