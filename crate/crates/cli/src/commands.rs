use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result, bail};
use serde_json::Value;
use shaping_core::autodiff::Checkpoint;
use shaping_core::baselines::{
    capacity_curve, mb_qam_curve, mb_qam_optimum, qam_curve, rayleigh_bound_curve,
};
use shaping_core::channel::ChannelModel;
use shaping_core::diagnostics::{Faults, run_checks};
use shaping_core::export::write_constellation_csv;
use shaping_core::modulator::qam;
use shaping_core::objectives::MiCurve;
use shaping_core::sampler::SymbolDistribution;
use shaping_core::trainer::{
    EvalSettings, Objective, ShapingSystem, TrainConfig, Trainer, evaluate,
};

use crate::run_dir::{DirLock, Manifest, sha256_hex, write_json};
use crate::{
    BaselineArgs, CheckArgs, Command, CompareArgs, EvalArgs, ExportArgs, Fault, ModelArgs, Scheme,
    TrainArgs,
};

/// A bad config file, override or grid; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<ConfigError>()
            || matches!(
                e.downcast_ref::<shaping_core::Error>(),
                Some(shaping_core::Error::InvalidConfig { .. } | shaping_core::Error::Json(_))
            )
    })
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Baseline(a) => baseline(a),
        Command::Compare(a) => compare(a),
        Command::ExportConstellation(a) => export(a),
        Command::Check(a) => check(a),
    }
    .map(|code| code.unwrap_or(ExitCode::SUCCESS))
}

/// Sets `path` (dot separated) inside `root`, creating objects on the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(config_error(format!("empty key in override `{path}`")));
        }
        let Value::Object(map) = node else {
            return Err(config_error(format!(
                "`{}` is not an object",
                keys[..i].join(".")
            )));
        };
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one key")
}

/// Applies `key=value` overrides; values are JSON, or a bare string.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| config_error(format!("override `{item}` is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(root, key.trim(), value)?;
    }
    Ok(())
}

fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{} is not valid JSON: {e}", path.display())))?;
    apply_overrides(&mut value, overrides)?;
    if let Some(seed) = seed {
        set_path(&mut value, "seed", Value::from(seed))?;
    }
    TrainConfig::from_json(&value.to_string())
        .with_context(|| format!("invalid config {}", path.display()))
}

/// Parses `lo:hi:step` (inclusive) or a comma-separated list of dB values.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| config_error(format!("bad number `{s}` in SNR grid `{text}`")))
    };
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, step] = parts[..] else {
            return Err(config_error(format!("SNR grid `{text}` is not lo:hi:step")));
        };
        let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
        if !(step > 0.0) || hi < lo {
            return Err(config_error(format!(
                "SNR grid `{text}` needs lo ≤ hi and step > 0"
            )));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9)
            .collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_error(format!(
            "SNR grid `{text}` must be strictly increasing"
        )));
    }
    Ok(grid)
}

fn parse_channel(s: &str) -> Result<ChannelModel> {
    s.parse()
        .map_err(|e: shaping_core::Error| config_error(e.to_string()))
}

fn train(args: TrainArgs) -> Result<Option<ExitCode>> {
    let cfg = load_config(&args.config, &args.overrides, args.seed)?;
    let _lock = DirLock::acquire(&args.out)?;
    let config_json = cfg.to_json()?;
    fs::write(args.out.join("config.json"), format!("{config_json}\n"))?;

    let objective = if args.uncorrected {
        log::warn!("training on the uncorrected cross-entropy; this run is a negative control");
        Objective::Uncorrected
    } else {
        Objective::Corrected
    };
    log::info!(
        "training {} N={} on {} for {} steps (seed {})",
        cfg.mode,
        cfg.order,
        cfg.channel,
        cfg.steps_total,
        cfg.seed
    );
    let report = Trainer::new(cfg.clone(), objective)?.run()?;

    fs::write(args.out.join("report.json"), report.to_json()? + "\n")?;
    report.write_loss_curve(args.out.join("loss_curve.csv"))?;
    report
        .final_parameters
        .save(args.out.join("checkpoint.json"))?;
    let manifest = Manifest {
        config_sha256: sha256_hex(config_json.as_bytes()),
        seed: cfg.seed,
        objective: format!("{objective:?}").to_lowercase(),
        shaping_version: env!("CARGO_PKG_VERSION"),
        files: [
            "config.json",
            "report.json",
            "loss_curve.csv",
            "checkpoint.json",
        ]
        .map(String::from)
        .to_vec(),
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    if let Some(last) = report.checkpoints.last() {
        println!(
            "trained in {:.1} s: L = {:.4} bits, H = {:.4} bits, -L^ = {:.4} bits",
            report.wall_time_s,
            last.loss.cross_entropy_bits,
            last.loss.source_entropy_bits,
            last.loss.mi_lower_bound_bits
        );
    }
    Ok(None)
}

fn load_model(model: &ModelArgs) -> Result<(TrainConfig, ShapingSystem)> {
    let (config, checkpoint): (PathBuf, PathBuf) =
        match (&model.run, &model.config, &model.checkpoint) {
            (Some(run), _, _) => (run.join("config.json"), run.join("checkpoint.json")),
            (None, Some(cfg), Some(ck)) => (cfg.clone(), ck.clone()),
            _ => {
                return Err(config_error(
                    "pass --run DIR, or both --config and --checkpoint",
                ));
            }
        };
    let cfg = load_config(&config, &[], None)?;
    let ck = Checkpoint::load(&checkpoint)
        .with_context(|| format!("loading {}", checkpoint.display()))?;
    let system = ShapingSystem::from_checkpoint(&ck, cfg.mode)
        .with_context(|| format!("restoring {}", checkpoint.display()))?;
    if system.order() != cfg.order {
        bail!(
            "checkpoint has {} points but the config says order {}",
            system.order(),
            cfg.order
        );
    }
    Ok((cfg, system))
}

fn snr_label(snr_db: f64) -> String {
    format!("{snr_db}").replace('-', "m")
}

fn eval(args: EvalArgs) -> Result<Option<ExitCode>> {
    let (cfg, system) = load_model(&args.model)?;
    let grid = parse_grid(&args.snr_grid)?;
    let channel = match &args.channel {
        Some(s) => parse_channel(s)?,
        None => cfg.channel,
    };
    let scheme = args
        .scheme
        .clone()
        .unwrap_or_else(|| format!("{}{}", cfg.mode, cfg.order));
    let settings = EvalSettings {
        channel,
        mc_samples: args.mc_samples,
        bound_samples: (args.bound_samples > 0).then_some(args.bound_samples),
        trained_range_db: Some(cfg.snr_range_db),
        seed: args.seed,
    };
    let evaluation = evaluate(&system, &scheme, &grid, &settings)?;

    let _lock = DirLock::acquire(&args.out)?;
    evaluation
        .curve()?
        .write_csv(args.out.join(format!("{scheme}.csv")))?;
    write_json(&args.out.join("evaluation.json"), &evaluation)?;
    let snapshots = args.out.join("constellations");
    fs::create_dir_all(&snapshots)?;
    for p in &evaluation.points {
        write_constellation_csv(
            snapshots.join(format!("{}dB.csv", snr_label(p.snr_db))),
            &system.constellation(p.snr_db)?,
            &system.distribution(p.snr_db)?,
        )?;
    }
    for p in &evaluation.points {
        let bound = p
            .mi_bound
            .map(|b| format!(", bound {:.4}", b.bits))
            .unwrap_or_default();
        println!(
            "{:>6} dB  MI {:.4} bits  H {:.4}{}{}",
            p.snr_db,
            p.mi_bits,
            p.entropy_bits,
            bound,
            if p.extrapolated {
                "  (extrapolated)"
            } else {
                ""
            }
        );
    }
    Ok(None)
}

fn baseline(args: BaselineArgs) -> Result<Option<ExitCode>> {
    let grid = parse_grid(&args.snr_grid)?;
    let channel = parse_channel(&args.channel)?;
    let curve = match args.scheme {
        Scheme::Qam => qam_curve(args.order, &grid, channel, args.mc_samples, args.seed)?,
        Scheme::MbQam => {
            if channel != ChannelModel::Awgn {
                return Err(config_error("mb-qam is only defined on the awgn channel"));
            }
            mb_qam_curve(args.order, &grid)?
        }
        Scheme::Capacity => capacity_curve(&grid)?,
        Scheme::RayleighBound => {
            let pilots = match channel {
                ChannelModel::RayleighLmmse { pilots } => pilots,
                ChannelModel::Awgn => 1,
            };
            rayleigh_bound_curve(&grid, pilots, args.mc_samples, args.seed)?
        }
    };
    fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("{}.csv", curve.scheme));
    curve.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(None)
}

/// Curves aligned on the reference grid, clipped to the common SNR overlap.
pub struct Aligned {
    pub snrs: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

pub fn align_curves(curves: &[MiCurve]) -> Result<Aligned> {
    let reference = &curves[0];
    let lo = curves
        .iter()
        .map(|c| c.entries.first().map_or(f64::INFINITY, |e| e.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = curves
        .iter()
        .map(|c| c.entries.last().map_or(f64::NEG_INFINITY, |e| e.0))
        .fold(f64::INFINITY, f64::min);
    if lo > hi {
        bail!("the curves share no SNR range");
    }
    let snrs: Vec<f64> = reference
        .snrs()
        .into_iter()
        .filter(|&s| s >= lo - 1e-12 && s <= hi + 1e-12)
        .collect();
    if snrs.is_empty() {
        bail!("no reference grid point lies inside the common SNR range [{lo}, {hi}]");
    }
    if snrs.len() < reference.entries.len() {
        log::warn!("clipping to the common SNR range [{lo}, {hi}] dB");
    }
    let mut columns = Vec::with_capacity(curves.len());
    for c in curves {
        if c.snrs() != reference.snrs() {
            log::warn!(
                "{}: grid differs from {}; interpolating",
                c.scheme,
                reference.scheme
            );
        }
        let values = snrs
            .iter()
            .map(|&s| {
                c.at(s)
                    .or_else(|| c.interpolate(s))
                    .expect("inside the overlap")
            })
            .collect();
        columns.push((c.scheme.clone(), values));
    }
    Ok(Aligned { snrs, columns })
}

fn compare(args: CompareArgs) -> Result<Option<ExitCode>> {
    let curves = args
        .curves
        .iter()
        .map(|p| MiCurve::read_csv(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = curves.iter().map(|c| c.scheme.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("scheme `{}` appears twice", w[0]);
    }
    let aligned = align_curves(&curves)?;
    fs::create_dir_all(&args.out)?;

    let mut wide = csv::Writer::from_path(args.out.join("wide.csv"))?;
    let mut header = vec!["snr".to_string()];
    header.extend(aligned.columns.iter().map(|c| c.0.clone()));
    wide.write_record(&header)?;
    for (i, snr) in aligned.snrs.iter().enumerate() {
        let mut row = vec![snr.to_string()];
        row.extend(aligned.columns.iter().map(|c| c.1[i].to_string()));
        wide.write_record(&row)?;
    }
    wide.flush()?;

    let (reference, others) = aligned.columns.split_first().expect("at least one curve");
    let mut gaps = csv::Writer::from_path(args.out.join("gaps.csv"))?;
    let mut header = vec!["snr".to_string()];
    header.extend(
        others
            .iter()
            .map(|c| format!("{}_minus_{}", c.0, reference.0)),
    );
    gaps.write_record(&header)?;
    for (i, snr) in aligned.snrs.iter().enumerate() {
        let mut row = vec![snr.to_string()];
        row.extend(others.iter().map(|c| (c.1[i] - reference.1[i]).to_string()));
        gaps.write_record(&row)?;
    }
    gaps.flush()?;
    println!(
        "wrote {} and {}",
        args.out.join("wide.csv").display(),
        args.out.join("gaps.csv").display()
    );
    Ok(None)
}

fn export(args: ExportArgs) -> Result<Option<ExitCode>> {
    let (c, dist) = match args.baseline {
        Some(Scheme::Qam) => (qam(args.order)?, SymbolDistribution::uniform(args.order)),
        Some(Scheme::MbQam) => {
            let (mb, _) = mb_qam_optimum(args.order, args.snr)?;
            (mb.constellation()?, mb.distribution()?)
        }
        Some(other) => {
            return Err(config_error(format!(
                "{} has no constellation",
                match other {
                    Scheme::Capacity => "capacity",
                    _ => "rayleigh-bound",
                }
            )));
        }
        None => {
            let (_, system) = load_model(&args.model)?;
            (
                system.constellation(args.snr)?,
                system.distribution(args.snr)?,
            )
        }
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_constellation_csv(&args.out, &c, &dist)?;
    println!("wrote {}", args.out.display());
    Ok(None)
}

fn check(args: CheckArgs) -> Result<Option<ExitCode>> {
    let faults = match args.inject_fault {
        None => Faults::default(),
        Some(Fault::BackwardSign) => Faults {
            flip_backward_sign: true,
            ..Default::default()
        },
        Some(Fault::NoiseVariance) => Faults {
            noise_variance_scale: Some(2.0),
            ..Default::default()
        },
    };
    let results = run_checks(args.seed, &faults);
    for r in &results {
        println!(
            "{} {:<40} {} ({:.2} s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail,
            r.seconds
        );
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("all {} checks passed", results.len());
        Ok(None)
    } else {
        println!("{failed} of {} checks failed", results.len());
        Ok(Some(ExitCode::FAILURE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(
            parse_grid("0:2:0.5").unwrap(),
            vec![0.0, 0.5, 1.0, 1.5, 2.0]
        );
        assert_eq!(parse_grid("-2:40:1").unwrap().len(), 43);
        assert_eq!(parse_grid("5, 9,13").unwrap(), vec![5.0, 9.0, 13.0]);
        assert_eq!(parse_grid("0:0.3:0.1").unwrap().len(), 4);
        assert!(parse_grid("1,0").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut v: Value = serde_json::json!({"mode": "joint", "order": 16});
        apply_overrides(
            &mut v,
            &[
                "tau=5".into(),
                "channel.kind=rayleigh_lmmse".into(),
                "mode=ps_only".into(),
            ],
        )
        .unwrap();
        assert_eq!(v["tau"], 5.0);
        assert_eq!(v["channel"]["kind"], "rayleigh_lmmse");
        assert_eq!(v["mode"], "ps_only");
        assert!(apply_overrides(&mut v, &["novalue".into()]).is_err());
        assert!(apply_overrides(&mut v, &["tau.x=1".into()]).is_err());
    }

    #[test]
    fn alignment_clips_and_interpolates() {
        let a = MiCurve::new("a", vec![(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.0)]).unwrap();
        let b = MiCurve::new("b", vec![(0.5, 1.0), (2.5, 3.0)]).unwrap();
        let al = align_curves(&[a.clone(), b]).unwrap();
        assert_eq!(al.snrs, vec![1.0, 2.0]);
        assert_eq!(al.columns[1].1, vec![1.5, 2.5]);
        let c = MiCurve::new("c", vec![(10.0, 1.0), (11.0, 1.0)]).unwrap();
        assert!(align_curves(&[a, c]).is_err());
    }
}
