use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::{Command, Common, FreeInitFlags};
use crate::analysis::{
    iteration_consistency, mixing_experiment, snr_report_pooled, temporal_consistency_detailed, worker_pool,
    write_rows_csv, ablation_run, MixingSettings,
};
use crate::error::{Error, Result};
use crate::model::{gen_dataset, load_model, save_model, train, Network, TrainReport};
use crate::sampler::{freeinit_sample, FreeInitConfig, FreeInitOutput, Guidance};
use crate::schedule::NoiseSchedule;
use crate::spectral::FilterSpec;
use crate::tensorio::{export_frames_pgm, gaussian_tensor, load_tensor, save_tensor, RngState, VideoTensor};

/// Summary lines and files written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutcome {
    pub log: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl CommandOutcome {
    fn say(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    schedule: NoiseSchedule,
    out: CommandOutcome,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &common.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        let schedule = NoiseSchedule::from_spec(cfg.schedule)?;
        Ok(Ctx {
            cfg,
            schedule,
            out: CommandOutcome::default(),
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let dir = &self.cfg.output_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(name);
        self.out.artifacts.push(p.clone());
        Ok(p)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<()> {
        let p = self.path(name)?;
        let file = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        write_rows_csv(rows, file)
    }

    fn write_tensor(&mut self, name: &str, t: &VideoTensor) -> Result<()> {
        let p = self.path(name)?;
        save_tensor(t, p)
    }

    fn write_frames(&mut self, name: &str, t: &VideoTensor) -> Result<()> {
        if !self.cfg.sampler.pgm_frames {
            return Ok(());
        }
        let p = self.path(name)?;
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        export_frames_pgm(t, &p, -1.0, 1.0)
    }

    fn model(&self) -> Result<Network<f32>> {
        let (net, manifest) = load_model(self.cfg.model_dir())?;
        if manifest.net != self.cfg.net_config() {
            return Err(Error::Config(format!(
                "model in {} was built for {:?}, config asks for {:?}",
                self.cfg.model_dir().display(),
                manifest.net,
                self.cfg.net_config()
            )));
        }
        if manifest.schedule != self.cfg.schedule {
            return Err(Error::Config("model was trained with a different noise schedule".into()));
        }
        Ok(net)
    }
}

pub fn run_command(cmd: &Command) -> Result<CommandOutcome> {
    match cmd {
        Command::Train(common) => cmd_train(Ctx::new(common)?),
        Command::Sample(common) => cmd_sample(Ctx::new(common)?),
        Command::Freeinit { common, flags } => cmd_freeinit(Ctx::new(common)?, flags),
        Command::Snr { common, inputs } => cmd_snr(Ctx::new(common)?, inputs),
        Command::Mix(common) => cmd_mix(Ctx::new(common)?),
        Command::Ablate(common) => cmd_ablate(Ctx::new(common)?),
        Command::Metrics { common, inputs } => cmd_metrics(Ctx::new(common)?, inputs),
    }
}

fn cmd_train(mut ctx: Ctx) -> Result<CommandOutcome> {
    let data = gen_dataset(&ctx.cfg.dataset_config())?;
    let train_cfg = ctx.cfg.train_config();
    let mut net = Network::<f32>::new(ctx.cfg.net_config(), ctx.cfg.seed)?;
    let report: TrainReport = train(&mut net, &data, &ctx.schedule, &train_cfg)?;
    save_model(&net, ctx.cfg.schedule, ctx.cfg.seed, Some(&train_cfg), ctx.cfg.model_dir())?;
    let model_dir = ctx.cfg.model_dir();
    ctx.out.artifacts.push(model_dir.clone());
    ctx.write_json("train_report.json", &report)?;
    ctx.out.say(format!(
        "trained {} steps on {} videos: initial loss {:.4}, final EMA loss {:.4} ({:.1} s)",
        report.steps,
        data.len(),
        report.initial_loss,
        report.final_ema_loss,
        report.wallclock_secs
    ));
    ctx.out.say(format!("weights written to {}", model_dir.display()));
    Ok(ctx.out)
}

#[derive(Serialize)]
struct PassRow {
    iteration: usize,
    ddim_steps: usize,
    consistency: f64,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    class: Option<usize>,
    config: &'a FreeInitConfig,
    pass_steps: &'a [usize],
    consistency: &'a [f64],
}

fn write_run(ctx: &mut Ctx, prefix: &str, cfg: &FreeInitConfig, out: &FreeInitOutput) -> Result<Vec<f64>> {
    let scores = iteration_consistency(out)?;
    let rows: Vec<PassRow> = scores
        .iter()
        .zip(&out.pass_steps)
        .enumerate()
        .map(|(iteration, (&consistency, &ddim_steps))| PassRow {
            iteration,
            ddim_steps,
            consistency,
        })
        .collect();
    ctx.write_csv(&format!("{prefix}.csv"), &rows)?;
    let summary = RunSummary {
        seed: cfg.seed,
        class: ctx.cfg.sampler.class,
        config: cfg,
        pass_steps: &out.pass_steps,
        consistency: &scores,
    };
    ctx.write_json(&format!("{prefix}.json"), &summary)?;
    ctx.write_frames(&format!("{prefix}_frames"), &out.final_z0)?;
    Ok(scores)
}

fn cmd_sample(mut ctx: Ctx) -> Result<CommandOutcome> {
    let net = ctx.model()?;
    let cfg = FreeInitConfig {
        iterations: 0,
        coarse_to_fine: false,
        ..ctx.cfg.freeinit_config()
    };
    let out = freeinit_sample(&net, &cfg, ctx.cfg.sampler.class, &ctx.schedule)?;
    ctx.write_tensor("sample_z0.fin", &out.final_z0)?;
    let scores = write_run(&mut ctx, "sample", &cfg, &out)?;
    ctx.out.say(format!("sampled with {} DDIM steps; consistency {:.4}", cfg.ddim_steps, scores[0]));
    Ok(ctx.out)
}

fn apply_flags(base: FreeInitConfig, flags: &FreeInitFlags) -> Result<FreeInitConfig> {
    let mut cfg = base;
    if let Some(n) = flags.iters {
        cfg.iterations = n;
    }
    let family = flags.filter.unwrap_or(cfg.filter.family);
    let d0 = flags.d0.unwrap_or(cfg.filter.d0);
    cfg.filter = FilterSpec::new(family, d0, cfg.filter.order).map_err(|e| Error::Config(e.to_string()))?;
    if flags.no_reinit {
        cfg.noise_reinit = false;
    }
    if flags.coarse_to_fine {
        cfg.coarse_to_fine = true;
    }
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

fn cmd_freeinit(mut ctx: Ctx, flags: &FreeInitFlags) -> Result<CommandOutcome> {
    let cfg = apply_flags(ctx.cfg.freeinit_config(), flags)?;
    let net = ctx.model()?;
    let out = freeinit_sample(&net, &cfg, ctx.cfg.sampler.class, &ctx.schedule)?;
    ctx.write_tensor("freeinit_z0.fin", &out.final_z0)?;
    if flags.dump_iters {
        for (i, z0) in out.iterations.iter().enumerate() {
            ctx.write_tensor(&format!("iter_{i:02}_z0.fin"), z0)?;
        }
    }
    let scores = write_run(&mut ctx, "freeinit", &cfg, &out)?;
    if cfg.coarse_to_fine && cfg.iterations > 0 {
        ctx.out.say(format!("coarse-to-fine plan: {:?}", &out.pass_steps[1..]));
    }
    ctx.out.say(format!("pass steps: {:?}", out.pass_steps));
    ctx.out.say(format!(
        "{} refinement iterations ({} d0={}, reinit {}): consistency {:.4} -> {:.4}",
        cfg.iterations,
        cfg.filter.family.as_str(),
        cfg.filter.d0,
        if cfg.noise_reinit { "on" } else { "off" },
        scores[0],
        scores[scores.len() - 1]
    ));
    Ok(ctx.out)
}

#[derive(Serialize)]
struct SnrRow {
    band: usize,
    d_lo: f64,
    d_hi: f64,
    t: usize,
    snr_db: f64,
}

fn cmd_snr(mut ctx: Ctx, inputs: &[PathBuf]) -> Result<CommandOutcome> {
    let (clips, id) = if inputs.is_empty() {
        let mut dcfg = ctx.cfg.dataset_config();
        dcfg.n_videos = dcfg.n_videos.min(ctx.cfg.analysis.snr_videos);
        let id = format!("synthetic:seed={}:videos={}", dcfg.seed, dcfg.n_videos);
        (gen_dataset(&dcfg)?.videos, id)
    } else {
        let clips = inputs.iter().map(load_input).collect::<Result<Vec<_>>>()?;
        let names: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
        (clips, format!("files:{}", names.join(",")))
    };
    let noises = clips
        .iter()
        .enumerate()
        .map(|(k, c)| gaussian_tensor(c.shape(), &mut RngState::substream(ctx.cfg.seed, &format!("snr:{k}"))))
        .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<_> = clips.iter().zip(&noises).collect();
    let a = &ctx.cfg.analysis;
    let report = snr_report_pooled(&pairs, &ctx.schedule, &a.bands, &a.snr_timesteps, &id)?;
    let mut rows = Vec::new();
    for (j, band) in report.bands.iter().enumerate() {
        for (k, &t) in report.ts.iter().enumerate() {
            rows.push(SnrRow {
                band: j,
                d_lo: band.lo,
                d_hi: band.hi,
                t,
                snr_db: report.snr_db[j][k],
            });
        }
    }
    ctx.write_csv("snr.csv", &rows)?;
    ctx.write_json("snr.json", &report)?;
    let last = report.ts.len() - 1;
    let low = report.snr_db[0][last];
    let high = report.snr_db[report.bands.len() - 1][last];
    ctx.out.say(format!(
        "t={}: lowest band {:.2} dB, highest band {:.2} dB (gap {:.2} dB); lowest band {} 0 dB",
        report.ts[last],
        low,
        high,
        low - high,
        if low > 0.0 { "above" } else { "below" }
    ));
    Ok(ctx.out)
}

fn cmd_mix(mut ctx: Ctx) -> Result<CommandOutcome> {
    let net = ctx.model()?;
    let mut dcfg = ctx.cfg.dataset_config();
    dcfg.n_videos = ctx.cfg.analysis.mix_video + 1;
    let z0 = gen_dataset(&dcfg)?.videos.pop().expect("non-empty dataset");
    let settings = MixingSettings {
        ddim_steps: ctx.cfg.freeinit.ddim_steps,
        guidance: Guidance {
            class: ctx.cfg.sampler.class,
            weight: ctx.cfg.freeinit.guidance_weight,
        },
        seed: ctx.cfg.seed,
    };
    let ratios = ctx.cfg.analysis.mix_ratios.clone();
    let result = mixing_experiment(&net, &z0, &ratios, &ctx.schedule, settings)?;
    ctx.write_csv("mix.csv", &result.rows)?;
    ctx.write_json("mix.json", &result.rows)?;
    for (row, out) in result.rows.iter().zip(&result.outputs) {
        ctx.write_frames(&format!("mix_r{:.2}_frames", row.keep_ratio), out)?;
    }
    for row in &result.rows {
        ctx.out.say(format!(
            "keep {:.2}: {} bins, distance {:.4}, consistency {:.4}",
            row.keep_ratio, row.bins_kept, row.distance, row.consistency
        ));
    }
    Ok(ctx.out)
}

fn cmd_ablate(mut ctx: Ctx) -> Result<CommandOutcome> {
    let net = ctx.model()?;
    let pool = worker_pool()?;
    let grid = ctx.cfg.analysis.ablation.clone();
    let table = ablation_run(&grid, &ctx.cfg.freeinit_config(), &net, &ctx.schedule, &pool)?;
    let csv_path = ctx.path("ablation.csv")?;
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    table.write_csv(file)?;
    ctx.write_json("ablation.json", &table.summary)?;
    for s in &table.summary {
        ctx.out.say(format!(
            "{} d0={} iters={} reuse_eps={} reinit={}: mean {:.4} std {:.4} over {} runs",
            s.point.family.as_str(),
            s.point.d0,
            s.point.iterations,
            s.point.reuse_eps,
            s.point.noise_reinit,
            s.mean,
            s.std,
            s.runs
        ));
    }
    Ok(ctx.out)
}

#[derive(Serialize)]
struct MetricsRow {
    file: String,
    consistency: f64,
    flat_frames: String,
}

fn load_input(path: &PathBuf) -> Result<VideoTensor> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.clone()));
    }
    load_tensor(path)
}

fn cmd_metrics(mut ctx: Ctx, inputs: &[PathBuf]) -> Result<CommandOutcome> {
    let mut rows = Vec::new();
    for p in inputs {
        let c = temporal_consistency_detailed(&load_input(p)?)?;
        rows.push(MetricsRow {
            file: p.display().to_string(),
            consistency: c.score,
            flat_frames: c.flat_frames.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" "),
        });
    }
    ctx.write_csv("metrics.csv", &rows)?;
    ctx.write_json("metrics.json", &rows)?;
    for r in &rows {
        let flag = if r.flat_frames.is_empty() { String::new() } else { format!(" (flat frames: {})", r.flat_frames) };
        ctx.out.say(format!("{}: consistency {:.4}{flag}", r.file, r.consistency));
    }
    Ok(ctx.out)
}

