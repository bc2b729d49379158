use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use flagmirror::cli::{error_record, run, Backend, Command, ConfigFile, Format, RunConfig};
use flagmirror::combinatorics::Perm;
use flagmirror::envelope::Normalization;
use flagmirror::mirror::TheoremForm;
use flagmirror::verify::Suite;

#[derive(Parser)]
#[command(name = "flagmirror", version, about = "Vertex functions and stable envelopes of T*Fl_n, with mirror checks")]
struct Cli {
    #[command(subcommand)]
    command: Top,
}

#[derive(Subcommand)]
enum Top {
    /// Compute and print one object.
    Compute {
        #[command(subcommand)]
        what: ComputeCmd,
    },
    /// Run verification suites and print a report.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        common: Common,
        /// Restrict to one fixed point, e.g. "2 3 1".
        #[arg(long)]
        perm: Option<String>,
        #[arg(long, value_enum, default_value = "overline")]
        form: FormArg,
    },
}

#[derive(Subcommand)]
enum ComputeCmd {
    /// Vertex function coefficients of a fixed point.
    Vertex {
        #[arg(long)]
        perm: String,
        #[command(flatten)]
        common: Common,
    },
    /// Stable envelope restriction matrix.
    Stab {
        #[arg(long, value_enum, default_value = "stab")]
        normalization: NormArg,
        #[command(flatten)]
        common: Common,
    },
    /// Closed form of the vertex function at a = 0.
    Limit {
        #[arg(long)]
        perm: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// One or more sampler seeds (repeat or comma-separate).
    #[arg(long = "seed", value_delimiter = ',', default_values_t = [7u64])]
    seeds: Vec<u64>,
    /// Box bound on the z-degree of series.
    #[arg(long)]
    degree: Option<usize>,
    /// Factors kept in each infinite product.
    #[arg(long)]
    theta_terms: Option<usize>,
    /// Decimal digits of the float backend.
    #[arg(long, default_value_t = flagmirror::numerics::DEFAULT_PRECISION)]
    precision: u32,
    #[arg(long, value_enum, default_value = "float")]
    backend: BackendArg,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Write the output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ignore the series cache (directory from the environment).
    #[arg(long)]
    no_cache: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Triangularity,
    Diagonal,
    Quasiperiodicity,
    Macdonald,
    Mirror,
    StabInverse,
    Limits,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Overline,
    Bold,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Raw,
    Stab,
    S,
    Bold,
    A,
    Overline,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Float,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

fn parse_perm(s: &str) -> anyhow::Result<Perm> {
    s.parse().with_context(|| format!("invalid permutation {s:?}"))
}

fn build(common: Common, command: Command, perm: Option<Perm>, form: TheoremForm) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::new(command, common.n);
    cfg.seeds = common.seeds;
    cfg.degree = common.degree;
    cfg.theta_terms = common.theta_terms;
    cfg.precision = common.precision;
    cfg.backend = match common.backend {
        BackendArg::Exact => Backend::Exact,
        BackendArg::Float => Backend::Float,
    };
    cfg.format = match common.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
        FormatArg::Markdown => Format::Markdown,
    };
    cfg.output = common.output;
    cfg.no_cache = common.no_cache;
    cfg.perm = perm;
    cfg.form = form;
    if let Some(path) = common.config {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_overrides(&ConfigFile::from_toml(&text)?)?;
    }
    Ok(cfg)
}

fn config(cli: Cli) -> anyhow::Result<RunConfig> {
    match cli.command {
        Top::Verify {
            suite,
            common,
            perm,
            form,
        } => {
            let suite = match suite {
                SuiteArg::Triangularity => Suite::Triangularity,
                SuiteArg::Diagonal => Suite::Diagonal,
                SuiteArg::Quasiperiodicity => Suite::Quasiperiodicity,
                SuiteArg::Macdonald => Suite::Macdonald,
                SuiteArg::Mirror => Suite::Mirror,
                SuiteArg::StabInverse => Suite::StabInverse,
                SuiteArg::Limits => Suite::Limits,
                SuiteArg::All => Suite::All,
            };
            let form = match form {
                FormArg::Overline => TheoremForm::Overline,
                FormArg::Bold => TheoremForm::Bold,
            };
            let perm = perm.as_deref().map(parse_perm).transpose()?;
            build(common, Command::Verify { suite }, perm, form)
        }
        Top::Compute { what } => match what {
            ComputeCmd::Vertex { perm, common } => {
                let perm = parse_perm(&perm)?;
                build(common, Command::ComputeVertex { perm }, None, TheoremForm::Overline)
            }
            ComputeCmd::Limit { perm, common } => {
                let perm = parse_perm(&perm)?;
                build(common, Command::ComputeLimit { perm }, None, TheoremForm::Overline)
            }
            ComputeCmd::Stab { normalization, common } => {
                let normalization = match normalization {
                    NormArg::Raw => Normalization::Raw,
                    NormArg::Stab => Normalization::Stab,
                    NormArg::S => Normalization::S,
                    NormArg::Bold => Normalization::Bold,
                    NormArg::A => Normalization::A,
                    NormArg::Overline => Normalization::Overline,
                };
                build(common, Command::ComputeStab { normalization }, None, TheoremForm::Overline)
            }
        },
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    let cfg = match config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": "Config", "message": format!("{e:#}") }));
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if cfg.output.is_none() {
                print!("{}", out.text);
                if !out.text.ends_with('\n') {
                    println!();
                }
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
