//! The four subcommands. Each validates everything it needs before creating
//! its output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use spbp::apps::denoise::{add_noise, denoise, image_loss, test_pattern, GrayImage};
use spbp::apps::tracking::{generate_scene, track, MeshScene, TrackOutput};
use spbp::diagnostics::{autocorrelation, mean_autocorrelation};
use spbp::engine::{derive_seed, stream_rng};
use spbp::io::{fmt_f64, read_pgm};
use spbp::{Proposal, Sampler};

use crate::config::{DenoiseSection, SweepSection, SweepTarget, TrackSection};
use crate::output::{write_traces, OutputDir, TRACE_HEADER};

const NOISE_STREAM: u64 = 1;
const DENOISE_ENGINE_STREAM: u64 = 2;
const SCENE_STREAM: u64 = 3;
const TRACK_ENGINE_STREAM: u64 = 4;

/// Settings resolved from flags, config and environment.
pub struct RunContext {
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

/// Short file-name-safe sampler label, e.g. `slice`, `mh-0.7`, `mh-polar-1-0.05-0.05`.
pub fn sampler_label(sampler: &Sampler) -> String {
    match sampler {
        Sampler::Slice => "slice".into(),
        Sampler::MetropolisHastings { proposal: Proposal::Gaussian { sigmas } } => {
            let parts: Vec<String> = sigmas.iter().map(f64::to_string).collect();
            format!("mh-{}", parts.join("-"))
        }
        Sampler::MetropolisHastings { proposal: Proposal::PositionPolar { sigma_xy, sigma_r, sigma_phi } } => {
            format!("mh-polar-{sigma_xy}-{sigma_r}-{sigma_phi}")
        }
    }
}

/// Applies a `--sampler` override: `slice`, `mh` (keep configured MH samplers) or `mh:<sigma>`.
pub fn select_samplers(configured: &[Sampler], choice: Option<&str>) -> Result<Vec<Sampler>> {
    let Some(choice) = choice else {
        return Ok(configured.to_vec());
    };
    let picked: Vec<Sampler> = match choice {
        "slice" => vec![Sampler::Slice],
        "mh" => configured.iter().filter(|s| s.name() == "mh").cloned().collect(),
        other => match other.strip_prefix("mh:") {
            Some(sigma) => {
                let sigma: f64 = sigma.parse().with_context(|| format!("bad sampler scale in {other:?}"))?;
                vec![Sampler::mh(sigma)]
            }
            None => bail!("unknown sampler {other:?} (expected slice, mh or mh:<sigma>)"),
        },
    };
    ensure!(!picked.is_empty(), "no configured sampler matches {choice:?}");
    for s in &picked {
        s.validate()?;
    }
    Ok(picked)
}

fn clean_image(section: &DenoiseSection) -> Result<GrayImage> {
    match &section.image {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(read_pgm(&mut BufReader::new(file))?)
        }
        None => Ok(test_pattern(section.width, section.height)),
    }
}

fn noisy_instances(section: &DenoiseSection, clean: &GrayImage, seed: u64) -> Result<Vec<GrayImage>> {
    (0..section.instances)
        .map(|k| Ok(add_noise(clean, section.noise, &mut stream_rng(seed, &[NOISE_STREAM, k as u64]))?))
        .collect()
}

/// Risks of one sampler over all instances.
pub struct DenoiseRisk {
    pub map: f64,
    pub mean: f64,
    pub acceptance: f64,
}

/// Runs one sampler on every instance; writes per-instance artifacts when `out` is given.
fn denoise_sampler(
    section: &DenoiseSection,
    sampler: &Sampler,
    clean: &GrayImage,
    noisy: &[GrayImage],
    ctx: &RunContext,
    mut out: Option<(&OutputDir, &mut crate::output::Csv, &mut crate::output::Csv)>,
) -> Result<DenoiseRisk> {
    let label = sampler_label(sampler);
    let mut traces = match &out {
        Some((dir, _, _)) if !section.engine.trace_iterations.is_empty() => {
            Some(dir.csv(&format!("traces_{label}.csv"), &TRACE_HEADER)?)
        }
        _ => None,
    };
    let (mut map_total, mut mean_total, mut steps, mut accepted) = (0.0, 0.0, 0u64, 0u64);
    for (k, observed) in noisy.iter().enumerate() {
        let seed = derive_seed(ctx.seed, &[DENOISE_ENGINE_STREAM, k as u64]);
        let config = section.engine.engine(sampler.clone(), seed, ctx.workers);
        let result = denoise(observed, &section.model, &config)?;
        let map_loss = image_loss(&result.map, clean)?;
        let mean_loss = image_loss(&result.mean, clean)?;
        map_total += map_loss;
        mean_total += mean_loss;
        steps += result.run.total_steps();
        accepted += result.run.total_accepted();
        if let Some((dir, losses, iterations)) = out.as_mut() {
            dir.pgm(&format!("{label}_{k:02}_map.pgm"), &result.map)?;
            dir.pgm(&format!("{label}_{k:02}_mean.pgm"), &result.mean)?;
            losses.row(&[
                label.clone(),
                k.to_string(),
                fmt_f64(image_loss(observed, clean)?),
                fmt_f64(map_loss),
                fmt_f64(mean_loss),
                fmt_f64(rate(result.run.total_accepted(), result.run.total_steps())),
            ])?;
            for s in &result.run.summaries {
                iterations.row(&[
                    label.clone(),
                    k.to_string(),
                    s.iteration.to_string(),
                    fmt_f64(s.temperature),
                    fmt_f64(s.mean_disbelief),
                    s.steps.to_string(),
                    s.accepted.to_string(),
                ])?;
            }
        }
        if let Some(csv) = traces.as_mut() {
            write_traces(csv, &label, k, &result.run.traces)?;
        }
    }
    if let Some(csv) = traces {
        csv.finish()?;
    }
    let n = noisy.len() as f64;
    Ok(DenoiseRisk { map: map_total / n, mean: mean_total / n, acceptance: rate(accepted, steps) })
}

fn rate(accepted: u64, steps: u64) -> f64 {
    if steps == 0 {
        0.0
    } else {
        accepted as f64 / steps as f64
    }
}

pub fn cmd_denoise(section: &DenoiseSection, samplers: &[Sampler], ctx: &RunContext) -> Result<()> {
    section.validate()?;
    let clean = clean_image(section)?;
    let noisy = noisy_instances(section, &clean, ctx.seed)?;

    let dir = OutputDir::create(&ctx.out)?;
    dir.pgm("clean.pgm", &clean)?;
    for (k, img) in noisy.iter().enumerate() {
        dir.pgm(&format!("noisy_{k:02}.pgm"), img)?;
    }
    let mut losses =
        dir.csv("denoise_losses.csv", &["sampler", "instance", "noisy_loss", "map_loss", "mean_loss", "acceptance_rate"])?;
    let mut iterations = dir.csv(
        "denoise_iterations.csv",
        &["sampler", "instance", "iteration", "temperature", "mean_disbelief", "steps", "accepted"],
    )?;
    let mut risk = dir.csv("denoise_risk.csv", &["sampler", "map_risk", "mean_risk", "acceptance_rate"])?;
    for sampler in samplers {
        let r = denoise_sampler(section, sampler, &clean, &noisy, ctx, Some((&dir, &mut losses, &mut iterations)))?;
        risk.row(&[sampler_label(sampler), fmt_f64(r.map), fmt_f64(r.mean), fmt_f64(r.acceptance)])?;
    }
    losses.finish()?;
    iterations.finish()?;
    risk.finish()
}

fn scene_for(section: &TrackSection, seed: u64) -> Result<MeshScene> {
    Ok(generate_scene(
        &section.layout(),
        section.frames,
        &section.motion,
        section.obs_noise,
        &mut stream_rng(seed, &[SCENE_STREAM]),
    )?)
}

fn track_cell(section: &TrackSection, scene: &MeshScene, sampler: &Sampler, steps: usize, ctx: &RunContext) -> Result<TrackOutput> {
    let mut engine = section.engine.clone();
    engine.mcmc_steps = steps;
    let config = engine.engine(sampler.clone(), derive_seed(ctx.seed, &[TRACK_ENGINE_STREAM]), ctx.workers);
    Ok(track(scene, &section.model, &config)?)
}

pub fn cmd_track(section: &TrackSection, samplers: &[Sampler], ctx: &RunContext) -> Result<()> {
    section.validate()?;
    let scene = scene_for(section, ctx.seed)?;
    for s in samplers {
        s.validate()?;
    }

    let dir = OutputDir::create(&ctx.out)?;
    let mut scene_csv =
        dir.csv("track_scene.csv", &["frame", "node", "truth_x", "truth_y", "truth_ox", "truth_oy", "obs_x", "obs_y"])?;
    for (f, (poses, seen)) in scene.truth.iter().zip(&scene.observations).enumerate() {
        for (s, (p, z)) in poses.iter().zip(seen).enumerate() {
            let mut row = vec![f.to_string(), s.to_string()];
            row.extend(p.iter().chain(z).map(|v| fmt_f64(*v)));
            scene_csv.row(&row)?;
        }
    }
    scene_csv.finish()?;

    let mut frames = dir.csv("track_frames.csv", &["sampler", "mcmc_steps", "frame", "rmsd", "max_error"])?;
    let mut summary = dir.csv(
        "track_summary.csv",
        &["sampler", "mcmc_steps", "rmsd", "q10", "q25", "q50", "q75", "q90", "acceptance_rate"],
    )?;
    for sampler in samplers {
        let label = sampler_label(sampler);
        for steps in section.step_counts() {
            let out = track_cell(section, &scene, sampler, steps, ctx)?;
            for (f, (r, errors)) in out.frame_rmsd.iter().zip(&out.errors).enumerate() {
                let max = errors.iter().copied().fold(0.0, f64::max);
                frames.row(&[label.clone(), steps.to_string(), f.to_string(), fmt_f64(*r), fmt_f64(max)])?;
            }
            let q = out.quantiles;
            summary.row(&[
                label.clone(),
                steps.to_string(),
                fmt_f64(out.rmsd),
                fmt_f64(q.q10),
                fmt_f64(q.q25),
                fmt_f64(q.q50),
                fmt_f64(q.q75),
                fmt_f64(q.q90),
                fmt_f64(rate(out.accepted, out.steps)),
            ])?;
        }
    }
    frames.finish()?;
    summary.finish()
}

pub fn cmd_mh_sweep(sweep: &SweepSection, denoise_section: &DenoiseSection, track_section: &TrackSection, ctx: &RunContext) -> Result<()> {
    sweep.validate()?;
    match sweep.target {
        SweepTarget::Denoise => {
            denoise_section.validate()?;
            let clean = clean_image(denoise_section)?;
            let noisy = noisy_instances(denoise_section, &clean, ctx.seed)?;
            let dir = OutputDir::create(&ctx.out)?;
            let mut csv = dir.csv("mh_sweep.csv", &["sigma", "map_risk", "mean_risk", "acceptance_rate"])?;
            for &sigma in &sweep.sigmas {
                let r = denoise_sampler(denoise_section, &Sampler::mh(sigma), &clean, &noisy, ctx, None)?;
                csv.row(&[fmt_f64(sigma), fmt_f64(r.map), fmt_f64(r.mean), fmt_f64(r.acceptance)])?;
            }
            csv.finish()
        }
        SweepTarget::Track => {
            track_section.validate()?;
            let scene = scene_for(track_section, ctx.seed)?;
            let dir = OutputDir::create(&ctx.out)?;
            let mut csv =
                dir.csv("mh_sweep.csv", &["sigma_xy", "sigma_r", "sigma_phi", "mcmc_steps", "rmsd", "acceptance_rate"])?;
            for [sigma_xy, sigma_r, sigma_phi] in sweep.polar_points() {
                let sampler = Sampler::MetropolisHastings {
                    proposal: Proposal::PositionPolar { sigma_xy, sigma_r, sigma_phi },
                };
                for steps in track_section.step_counts() {
                    let out = track_cell(track_section, &scene, &sampler, steps, ctx)?;
                    csv.row(&[
                        fmt_f64(sigma_xy),
                        fmt_f64(sigma_r),
                        fmt_f64(sigma_phi),
                        steps.to_string(),
                        fmt_f64(out.rmsd),
                        fmt_f64(rate(out.accepted, out.steps)),
                    ])?;
                }
            }
            csv.finish()
        }
    }
}

type ChainKey = (String, usize, usize, usize, usize, usize);

fn read_traces(path: &Path, chains: &mut BTreeMap<ChainKey, Vec<f64>>) -> Result<()> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    ensure!(header == TRACE_HEADER.join(","), "{}: not a trace file (header {header:?})", path.display());
    let mut last_step: BTreeMap<ChainKey, usize> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let cells: Vec<&str> = line.split(',').collect();
        let bad = || format!("{}: malformed row {}", path.display(), i + 2);
        ensure!(cells.len() == TRACE_HEADER.len(), bad());
        let num = |c: &str| c.parse::<usize>().with_context(bad);
        let key = (cells[0].to_string(), num(cells[1])?, num(cells[2])?, num(cells[3])?, num(cells[4])?, num(cells[6])?);
        let step = num(cells[5])?;
        let value: f64 = cells[7].parse().with_context(bad)?;
        let expected = last_step.get(&key).map_or(0, |s| s + 1);
        ensure!(step == expected, "{}: chain steps out of order at row {}", path.display(), i + 2);
        last_step.insert(key.clone(), step);
        chains.entry(key).or_default().push(value);
    }
    Ok(())
}

/// Returns `Ok(false)` when some chain was too short (its row is still written).
pub fn cmd_diagnose(traces: &[PathBuf], max_lag: usize, ctx: &RunContext) -> Result<bool> {
    ensure!(!traces.is_empty(), "diagnose: no trace files given");
    ensure!(max_lag >= 1, "diagnose: max_lag must be >= 1");
    let mut chains = BTreeMap::new();
    for path in traces {
        read_traces(path, &mut chains)?;
    }

    let dir = OutputDir::create(&ctx.out)?;
    let lag_names: Vec<String> = (1..=max_lag).map(|k| format!("rho_{k}")).collect();
    let mut header = vec!["sampler", "instance", "iteration", "node", "particle", "coord", "status", "sum_abs"];
    header.extend(lag_names.iter().map(String::as_str));
    let mut per_chain = dir.csv("autocorrelation.csv", &header)?;
    let mut header = vec!["sampler", "iteration", "chains", "mean_sum_abs"];
    header.extend(lag_names.iter().map(String::as_str));
    let mut aggregate = dir.csv("autocorrelation_mean.csv", &header)?;

    let mut all_ok = true;
    // (sampler, iteration) -> (per-chain rho rows, summed |rho|)
    type Group = (Vec<Vec<f64>>, f64);
    let mut groups: BTreeMap<(String, usize), Group> = BTreeMap::new();
    for ((sampler, instance, iteration, node, particle, coord), chain) in &chains {
        let mut row = vec![
            sampler.clone(),
            instance.to_string(),
            iteration.to_string(),
            node.to_string(),
            particle.to_string(),
            coord.to_string(),
        ];
        match autocorrelation(chain, max_lag) {
            Ok(rho) => {
                let sum_abs: f64 = rho[1..].iter().map(|r| r.abs()).sum();
                row.push("ok".into());
                row.push(fmt_f64(sum_abs));
                row.extend(rho[1..].iter().map(|r| fmt_f64(*r)));
                let group = groups.entry((sampler.clone(), *iteration)).or_default();
                group.0.push(rho[1..].to_vec());
                group.1 += sum_abs;
            }
            Err(_) => {
                all_ok = false;
                row.push("too-short".into());
                row.extend(std::iter::repeat_n(String::new(), max_lag + 1));
            }
        }
        per_chain.row(&row)?;
    }
    for ((sampler, iteration), (rows, sum_abs)) in &groups {
        let mean = mean_autocorrelation(rows)?;
        let mut row = vec![
            sampler.clone(),
            iteration.to_string(),
            rows.len().to_string(),
            fmt_f64(sum_abs / rows.len() as f64),
        ];
        row.extend(mean.iter().map(|r| fmt_f64(*r)));
        aggregate.row(&row)?;
    }
    per_chain.finish()?;
    aggregate.finish()?;
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_file_safe() {
        assert_eq!(sampler_label(&Sampler::Slice), "slice");
        assert_eq!(sampler_label(&Sampler::mh(0.7)), "mh-0.7");
        let polar = Sampler::MetropolisHastings {
            proposal: Proposal::PositionPolar { sigma_xy: 1.0, sigma_r: 0.05, sigma_phi: 0.1 },
        };
        assert_eq!(sampler_label(&polar), "mh-polar-1-0.05-0.1");
    }

    #[test]
    fn sampler_override() {
        let configured = vec![Sampler::Slice, Sampler::mh(0.7)];
        assert_eq!(select_samplers(&configured, None).unwrap(), configured);
        assert_eq!(select_samplers(&configured, Some("slice")).unwrap(), vec![Sampler::Slice]);
        assert_eq!(select_samplers(&configured, Some("mh")).unwrap(), vec![Sampler::mh(0.7)]);
        assert_eq!(select_samplers(&configured, Some("mh:0.3")).unwrap(), vec![Sampler::mh(0.3)]);
        assert!(select_samplers(&configured, Some("gibbs")).is_err());
        assert!(select_samplers(&configured, Some("mh:-1")).is_err());
        assert!(select_samplers(&[Sampler::Slice], Some("mh")).is_err());
    }
}
