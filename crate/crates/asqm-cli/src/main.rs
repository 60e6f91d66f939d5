//! Command-line workflows: score session logs, fit segment weights,
//! simulate throttled/lossy sessions, and generate scenario corpora.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use asqm::config;
use asqm::error::AsqmError;
use asqm::fit;
use asqm::ge::{self, GeChannel, StreamConfig};
use asqm::prefstore::{default_categories, PrefStore};
use asqm::qoe::{self, Category, ModelConstants, PfMode, SegmentWeights};
use asqm::telemetry::{
    self, events_from_playout, DelayLevel, ModelSpec, Session, SessionHeader, MODEL_TABLE,
};

#[derive(Parser)]
#[command(name = "asqm", version, about = "Parametric audio-streaming quality model")]
struct Cli {
    /// Model constants document (TOML); built-in defaults when absent.
    #[arg(long, global = true, env = "ASQM_CONFIG")]
    config: Option<PathBuf>,

    /// Fitted or configured segment weights document (TOML).
    #[arg(long, global = true)]
    weights: Option<PathBuf>,

    /// Preference store document (JSON).
    #[arg(long, global = true)]
    prefs: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Human)]
    format: OutputFormat,

    /// Non-preference branch evaluation mode.
    #[arg(long, global = true, value_enum)]
    pf_mode: Option<PfModeArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Human,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PfModeArg {
    Consistent,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum DelayLevelArg {
    Low,
    Medium,
    High,
}

impl From<DelayLevelArg> for DelayLevel {
    fn from(value: DelayLevelArg) -> Self {
        match value {
            DelayLevelArg::Low => DelayLevel::Low,
            DelayLevelArg::Medium => DelayLevel::Medium,
            DelayLevelArg::High => DelayLevel::High,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score a session log.
    Score(ScoreArgs),
    /// Fit segment weights from an observation dataset.
    Fit(FitArgs),
    /// Simulate a throttled, lossy streaming session.
    Simulate(SimulateArgs),
    /// Generate impairment scenarios and synthesized session logs.
    Scenarios(ScenarioArgs),
    /// Evaluate the preference factor for a category and MOS.
    Pf(PfArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Session log file.
    log: PathBuf,
    /// User whose stored preferences select the factor branch.
    #[arg(long)]
    user: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Observation dataset (CSV).
    dataset: PathBuf,
    /// Average rows sharing a model id before fitting.
    #[arg(long)]
    aggregate: bool,
    /// Where to write the fitted weights document.
    #[arg(long)]
    out_weights: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 128.0)]
    bitrate: f64,
    #[arg(long, default_value_t = 60.0)]
    media_len: f64,
    /// Bandwidth as a percentage of the media bitrate.
    #[arg(long, default_value_t = 100.0)]
    bandwidth_pct: f64,
    /// Good-to-bad transition probability.
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Bad-to-good transition probability.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1316.0)]
    packet_size: f64,
    /// Seconds of stalled download per lost packet.
    #[arg(long, default_value_t = 0.2)]
    loss_penalty: f64,
    #[arg(long, default_value_t = 2.0)]
    startup_threshold: f64,
    #[arg(long, default_value_t = 2.0)]
    rebuffer_threshold: f64,
    #[arg(long, default_value = "sim")]
    session_id: String,
    #[arg(long, default_value = "sim-audio")]
    audio_id: String,
    #[arg(long, default_value = "music")]
    category: String,
    #[arg(long, default_value = "AAC-LC")]
    codec: String,
    /// Session log output path.
    #[arg(long)]
    out_log: Option<PathBuf>,
    /// One-character-per-packet loss trace output path.
    #[arg(long)]
    out_trace: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60.0)]
    media_len: f64,
    /// Models to realize, e.g. M1,M7,M45; all 53 when omitted.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Initial-delay impairment level applied to every scenario.
    #[arg(long, value_enum)]
    delay_level: Option<DelayLevelArg>,
    #[arg(long, default_value = "AAC-LC")]
    codec: String,
    #[arg(long, default_value_t = 576.0)]
    bitrate: f64,
    #[arg(long, default_value = "music")]
    category: String,
    /// Observation dataset output (CSV, with MOS synthesized from the
    /// weights document).
    #[arg(long)]
    out_dataset: Option<PathBuf>,
    /// Directory receiving one synthesized session log per scenario.
    #[arg(long)]
    out_logs: Option<PathBuf>,
}

#[derive(Args)]
struct PfArgs {
    category: String,
    mos: f64,
    /// Evaluate the preferring branch (the non-preferring branch is the
    /// default).
    #[arg(long)]
    preference: bool,
}

fn exit_code(err: &AsqmError) -> u8 {
    match err {
        AsqmError::Config(_) => 2,
        AsqmError::Parse { .. } => 3,
        AsqmError::InvalidInput(_)
        | AsqmError::BitrateOutOfRange { .. }
        | AsqmError::ModelDomain(_)
        | AsqmError::Observation { .. }
        | AsqmError::Underdetermined { .. } => 4,
        AsqmError::UserNotFound(_) | AsqmError::AudioNotFound(_) => 5,
        AsqmError::Placement(_) | AsqmError::StartupTimeout { .. } => 6,
        AsqmError::Io(_) => 7,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_constants(cli: &Cli) -> Result<ModelConstants, AsqmError> {
    let mut constants = match &cli.config {
        Some(path) => config::load_constants(path)?,
        None => ModelConstants::default(),
    };
    if let Some(mode) = cli.pf_mode {
        constants.preference.mode = match mode {
            PfModeArg::Consistent => PfMode::Consistent,
            PfModeArg::Literal => PfMode::Literal,
        };
    }
    Ok(constants)
}

fn load_weights(cli: &Cli) -> Result<SegmentWeights, AsqmError> {
    let path = cli.weights.as_ref().ok_or_else(|| {
        AsqmError::Config("no weights document given (--weights)".to_string())
    })?;
    config::load_weights(path)
}

fn store_categories(constants: &ModelConstants) -> BTreeSet<Category> {
    let mut categories = default_categories();
    categories.extend(constants.preference.category_names().cloned());
    categories
}

fn read_session(path: &Path) -> Result<Session, AsqmError> {
    let file = fs::File::open(path)?;
    telemetry::parse_session(BufReader::new(file))
}

fn run(cli: &Cli) -> Result<(), AsqmError> {
    match &cli.command {
        Command::Score(args) => cmd_score(cli, args),
        Command::Fit(args) => cmd_fit(cli, args),
        Command::Simulate(args) => cmd_simulate(cli, args),
        Command::Scenarios(args) => cmd_scenarios(cli, args),
        Command::Pf(args) => cmd_pf(cli, args),
    }
}

fn cmd_score(cli: &Cli, args: &ScoreArgs) -> Result<(), AsqmError> {
    let constants = load_constants(cli)?;
    let weights = load_weights(cli)?;
    let session = read_session(&args.log)?;
    let header = &session.header;
    let profile = constants.codec(&header.codec)?;
    let summary = telemetry::summarize(&session.events, header.media_len)?;
    let category = Category::new(&header.category);

    let preference = match (&args.user, &cli.prefs) {
        (Some(user), Some(prefs_path)) => {
            let store = PrefStore::open(prefs_path, store_categories(&constants))?;
            match store.has_preference(user, &header.audio_id) {
                Ok(flag) => Some(flag),
                Err(AsqmError::UserNotFound(_)) => {
                    eprintln!(
                        "warning: user {user} not in the preference store; scoring with PF = 1"
                    );
                    None
                }
                Err(err) => return Err(err),
            }
        }
        (Some(_), None) => {
            return Err(AsqmError::Config(
                "--user given but no preference store (--prefs)".to_string(),
            ))
        }
        (None, _) => {
            eprintln!("warning: no user given; scoring with PF = 1");
            None
        }
    };

    let report = qoe::score(
        &constants,
        profile,
        header.bitrate_kbps,
        &summary,
        &weights,
        &category,
        preference,
    )?;

    match cli.format {
        OutputFormat::Human => {
            println!("session   {}", header.session_id);
            println!("audio     {} ({}, {} @ {} kbps)", header.audio_id, category, header.codec, header.bitrate_kbps);
            println!("Q_A       {:.4}", report.q_a);
            println!("I_D       {:.4}", report.i_d);
            println!("I_S       {:.4}", report.i_s);
            println!("AsQM1     {:.4}", report.asqm1);
            println!("PF        {:.4} ({})", report.pf, report.pf_branch);
            println!("AsQM      {:.4}", report.asqm);
        }
        OutputFormat::Tsv => {
            println!(
                "session_id\taudio_id\tcategory\tcodec\tbitrate_kbps\tq_a\ti_d\ti_s\tasqm1\tpf_branch\tpf\tasqm"
            );
            println!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}\t{:.6}",
                header.session_id,
                header.audio_id,
                category,
                header.codec,
                header.bitrate_kbps,
                report.q_a,
                report.i_d,
                report.i_s,
                report.asqm1,
                report.pf_branch,
                report.pf,
                report.asqm
            );
        }
    }
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<(), AsqmError> {
    let mut rows = fit::read_dataset(&args.dataset)?;
    if args.aggregate {
        rows = fit::aggregate_by_model(&rows);
    }
    let observations = rows
        .iter()
        .enumerate()
        .map(|(i, row)| row.to_observation(i))
        .collect::<Result<Vec<_>, _>>()?;
    let report = fit::fit(&observations)?;
    if report.is_rank_deficient() {
        eprintln!(
            "warning: design rank {} < 4; minimum-norm solution returned",
            report.rank
        );
    }
    if let Some(out) = &args.out_weights {
        config::save_weights(out, &report.weights)?;
    }
    let w = &report.weights;
    match cli.format {
        OutputFormat::Human => {
            println!("rows        {}", rows.len());
            println!("ln_c        {:.6}  (C = {:.6})", w.ln_c, w.ln_c.exp());
            println!("d_a         {:.6}", w.d_a);
            println!("d_b         {:.6}", w.d_b);
            println!("d_c         {:.6}", w.d_c);
            println!("residual    {:.6e} rms", report.residual_rms);
            println!("rank        {}", report.rank);
            println!("condition   {:.3e}", report.condition_estimate);
        }
        OutputFormat::Tsv => {
            println!("rows\tln_c\td_a\td_b\td_c\tresidual_rms\trank\tcondition");
            println!(
                "{}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.6e}\t{}\t{:.3e}",
                rows.len(),
                w.ln_c,
                w.d_a,
                w.d_b,
                w.d_c,
                report.residual_rms,
                report.rank,
                report.condition_estimate
            );
        }
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), AsqmError> {
    let cfg = StreamConfig {
        media_bitrate_kbps: args.bitrate,
        media_len_secs: args.media_len,
        bandwidth_pct: args.bandwidth_pct,
        packet_size_bytes: args.packet_size,
        loss_penalty_secs: args.loss_penalty,
        startup_threshold_secs: args.startup_threshold,
        rebuffer_threshold_secs: args.rebuffer_threshold,
        startup_cap_secs: 3600.0,
    };
    let channel = GeChannel::new(args.p, args.r, args.seed)?;
    let trace = ge::simulate_playout(&cfg, &channel)?;

    if let Some(path) = &args.out_trace {
        let packets = ge::ge_trace(&channel, cfg.packet_count())?;
        fs::write(path, ge::trace_to_string(&packets) + "\n")?;
    }
    if let Some(path) = &args.out_log {
        let session = Session {
            header: SessionHeader {
                session_id: args.session_id.clone(),
                audio_id: args.audio_id.clone(),
                category: args.category.clone(),
                codec: args.codec.clone(),
                bitrate_kbps: args.bitrate,
                media_len: args.media_len,
            },
            events: events_from_playout(&trace),
        };
        let mut file = fs::File::create(path)?;
        telemetry::write_session(&mut file, &session)?;
        file.flush()?;
    }

    let stats = &trace.loss_stats;
    match cli.format {
        OutputFormat::Human => {
            println!("packets        {}", stats.packets);
            println!("losses         {} (PLR {:.5})", stats.losses, stats.empirical_plr);
            println!("mean burst     {:.3}", stats.mean_burst_len());
            println!("initial delay  {:.3} s", trace.initial_delay);
            println!("stalls         {}", trace.stalls.len());
            println!("stall time     {:.3} s", trace.total_stall_time());
            println!("wall time      {:.3} s", trace.end_wall);
        }
        OutputFormat::Tsv => {
            println!(
                "packets\tlosses\tempirical_plr\tmean_burst\tinitial_delay\tstalls\tstall_time\twall_time"
            );
            println!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{:.6}\t{:.6}",
                stats.packets,
                stats.losses,
                stats.empirical_plr,
                stats.mean_burst_len(),
                trace.initial_delay,
                trace.stalls.len(),
                trace.total_stall_time(),
                trace.end_wall
            );
        }
    }
    Ok(())
}

fn selected_models(names: &[String]) -> Result<Vec<&'static ModelSpec>, AsqmError> {
    if names.is_empty() {
        return Ok(MODEL_TABLE.iter().collect());
    }
    names
        .iter()
        .map(|name| {
            telemetry::model_by_name(name)
                .ok_or_else(|| AsqmError::Config(format!("unknown impairment model \"{name}\"")))
        })
        .collect()
}

fn cmd_scenarios(cli: &Cli, args: &ScenarioArgs) -> Result<(), AsqmError> {
    let constants = load_constants(cli)?;
    let models = selected_models(&args.models)?;
    let scenarios = telemetry::generate_scenarios(
        args.seed,
        args.media_len,
        &models,
        args.delay_level.map(Into::into),
    )?;

    if let Some(path) = &args.out_dataset {
        let weights = load_weights(cli)?;
        let profile = constants.codec(&args.codec)?;
        let q_a = qoe::codec_quality(profile, args.bitrate, constants.scale)?;
        let rows: Vec<_> = scenarios
            .iter()
            .map(|s| telemetry::scenario_to_dataset_row(s, q_a, &weights))
            .collect();
        fit::write_dataset(path, &rows)?;
    }

    if let Some(dir) = &args.out_logs {
        fs::create_dir_all(dir)?;
        for scenario in &scenarios {
            let session = Session {
                header: SessionHeader {
                    session_id: format!("{}-seed{}", scenario.model_id, args.seed),
                    audio_id: format!("audio-{}", scenario.model_id),
                    category: args.category.clone(),
                    codec: args.codec.clone(),
                    bitrate_kbps: args.bitrate,
                    media_len: args.media_len,
                },
                events: telemetry::scenario_to_session(scenario),
            };
            let path = dir.join(format!("{}.jsonl", scenario.model_id));
            let mut file = fs::File::create(path)?;
            telemetry::write_session(&mut file, &session)?;
            file.flush()?;
        }
    }

    match cli.format {
        OutputFormat::Human => {
            println!("generated {} scenarios (seed {})", scenarios.len(), args.seed);
            for scenario in &scenarios {
                let summary = scenario.summary();
                let counts: Vec<String> =
                    summary.segments.iter().map(|s| s.stalls.to_string()).collect();
                println!(
                    "  {:<4} delay {:>4.1} s  stalls A/B/C = {}",
                    scenario.model_id,
                    scenario.initial_delay,
                    counts.join("/")
                );
            }
        }
        OutputFormat::Tsv => {
            println!("model_id\tinitial_delay\ts_a\tl_a\ts_b\tl_b\ts_c\tl_c");
            for scenario in &scenarios {
                let summary = scenario.summary();
                let [a, b, c] = summary.segments;
                println!(
                    "{}\t{:.1}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}",
                    scenario.model_id,
                    scenario.initial_delay,
                    a.stalls,
                    a.mean_len,
                    b.stalls,
                    b.mean_len,
                    c.stalls,
                    c.mean_len
                );
            }
        }
    }
    Ok(())
}

fn cmd_pf(cli: &Cli, args: &PfArgs) -> Result<(), AsqmError> {
    let constants = load_constants(cli)?;
    let category = Category::new(&args.category);
    let pf = qoe::preference_factor(
        &constants.preference,
        &category,
        args.mos,
        args.preference,
    )?;
    match cli.format {
        OutputFormat::Human => {
            let branch = if args.preference { "preference" } else { "no preference" };
            println!("PF({category}, MOS {:.3}, {branch}) = {pf:.6}", args.mos);
        }
        OutputFormat::Tsv => {
            println!("category\tmos\tpreference\tpf");
            println!("{category}\t{:.6}\t{}\t{pf:.6}", args.mos, args.preference);
        }
    }
    Ok(())
}
