use std::fs;
use std::path::{Path, PathBuf};

use segprop_core::dataset::{decode_label_image, discover_keyframes, frame_file_name, write_label_image, Video};
use segprop_core::eval::{
    ablation_against_ground_truth, ablation_propagation_length, evaluate_frames, format_class_table,
};
use segprop_core::flow::{EstimatedFlow, FlowDir, FlowSource, GrayFrame, LkParams};
use segprop_core::model::NUM_CLASSES;
use segprop_core::segprop::{ExternalVoteDir, Propagator};
use segprop_core::synth::{render_scene, SceneSpec};
use segprop_core::{FlowDirection, LabelMap, Palette};

use crate::error::{CliError, CliResult};
use crate::{AblateArgs, EvaluateArgs, FlowArgs, Preset, PropagateArgs, ServeArgs, SynthArgs};

/// The video directory is the directory holding the manifest.
fn open_video(manifest: &Path) -> CliResult<Video> {
    if !manifest.is_file() {
        return Err(CliError::invalid(format!("manifest {} not found", manifest.display())));
    }
    let root = manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut video = Video::open(root)?;
    if manifest.file_name() != Some("manifest.json".as_ref()) {
        video.manifest = segprop_core::model::load_manifest(manifest)?;
        video.manifest.keyframes = discover_keyframes(&root.join("labels"))?;
    }
    Ok(video)
}

fn flow_source(video: &Video, args: &FlowArgs) -> CliResult<Box<dyn FlowSource>> {
    if args.estimate_flow {
        let frames = (0..video.frame_count())
            .map(|t| GrayFrame::open(&video.manifest.frame_path(t).expect("in range")))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Box::new(EstimatedFlow::new(frames, LkParams::default())));
    }
    let dir = args.flow.clone().unwrap_or_else(|| video.flow_dir());
    Ok(Box::new(FlowDir::new(dir)))
}

/// Loads every field the engine may ask for, so missing or malformed flow
/// surfaces before any work.
fn check_flow(flows: &dyn FlowSource, frames: usize) -> CliResult {
    for t in 0..frames {
        if t + 1 < frames {
            flows.flow(t, FlowDirection::Forward)?;
        }
        if t > 0 {
            flows.flow(t, FlowDirection::Backward)?;
        }
    }
    Ok(())
}

fn parse_provider(spec: &str) -> CliResult<(PathBuf, Option<f64>)> {
    let rest = spec
        .strip_prefix("external:")
        .ok_or_else(|| CliError::invalid(format!("provider {spec:?}: only external:DIR is supported")))?;
    let (dir, weight) = match rest.rsplit_once('@') {
        Some((d, w)) => {
            let w: f64 = w
                .parse()
                .map_err(|_| CliError::invalid(format!("provider {spec:?}: bad weight {w:?}")))?;
            (d, Some(w))
        }
        None => (rest, None),
    };
    let dir = PathBuf::from(dir);
    if !dir.is_dir() {
        return Err(CliError::invalid(format!(
            "provider directory {} not found",
            dir.display()
        )));
    }
    Ok((dir, weight))
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| CliError::other(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

fn write_labels(dir: &Path, labels: &[LabelMap]) -> CliResult {
    create_dir(dir)?;
    let palette = Palette::standard();
    for l in labels {
        write_label_image(&dir.join(frame_file_name(l.frame_index)), l, &palette)?;
    }
    Ok(())
}

pub fn propagate(args: PropagateArgs) -> CliResult {
    let config = args.config.build()?;
    let video = open_video(&args.manifest)?;
    let keyframes = video.keyframe_labels(&Palette::standard(), args.tau_color)?;
    if keyframes.len() < 2 {
        return Err(segprop_core::Error::TooFewKeyframes(keyframes.len()).into());
    }
    let flows = flow_source(&video, &args.flow)?;
    let mut propagator = Propagator::new(config)?;
    for spec in &args.providers {
        let (dir, weight) = parse_provider(spec)?;
        let p = Box::new(ExternalVoteDir::new(dir));
        match weight {
            Some(w) => propagator.register_weighted_provider(p, w),
            None => propagator.register_vote_provider(p),
        };
    }
    log::info!(
        "{}: {} frames, keyframes {:?}",
        video.name,
        video.frame_count(),
        video.keyframes()
    );
    if args.dry_run {
        if !args.flow.estimate_flow {
            check_flow(flows.as_ref(), video.frame_count())?;
        }
        log::info!("dry run: inputs are valid, nothing written");
        return Ok(());
    }
    let out = args.out.expect("clap requires --out without --dry-run");
    let result = propagator.propagate_sequence(&keyframes, video.frame_count(), flows.as_ref())?;
    write_labels(&out.join("labels"), &result.labels)?;
    let text = serde_json::to_string_pretty(&result.report).map_err(|e| CliError::other(e.to_string()))?;
    write_text(&out.join("report.json"), &text)?;
    log::info!(
        "wrote {} label images and report.json to {} ({} fallback pixels)",
        result.labels.len(),
        out.display(),
        result.report.fallback_pixels()
    );
    Ok(())
}

fn read_label_dir(dir: &Path, tolerance: u8) -> CliResult<Vec<LabelMap>> {
    if !dir.is_dir() {
        return Err(CliError::invalid(format!("{} is not a directory", dir.display())));
    }
    let palette = Palette::standard();
    discover_keyframes(dir)?
        .into_iter()
        .map(|t| decode_label_image(&dir.join(frame_file_name(t)), &palette, tolerance).map_err(Into::into))
        .collect()
}

pub fn evaluate(args: EvaluateArgs) -> CliResult {
    let gt = read_label_dir(&args.gt, args.tau_color)?;
    if gt.is_empty() {
        return Err(CliError::invalid(format!("no label images in {}", args.gt.display())));
    }
    let palette = Palette::standard();
    let pred = gt
        .iter()
        .map(|g| {
            let path = args.pred.join(frame_file_name(g.frame_index));
            if !path.is_file() {
                return Err(CliError::invalid(format!("no prediction for frame {}", g.frame_index)));
            }
            Ok(decode_label_image(&path, &palette, args.tau_color)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let pairs: Vec<(&LabelMap, &LabelMap)> = pred.iter().zip(&gt).collect();
    let report = evaluate_frames(&pairs, NUM_CLASSES)?;
    print!("{}", format_class_table(&[(args.pred.display().to_string(), &report)]));
    if let Some(path) = &args.out {
        write_text(path, &report.to_json()?)?;
    }
    log::info!("{} frames, mean F {:.4}", report.frames.len(), report.mean_f);
    Ok(())
}

pub fn ablate(args: AblateArgs) -> CliResult {
    let config = args.config.build()?;
    let video = open_video(&args.manifest)?;
    let keyframes = video.keyframe_labels(&Palette::standard(), args.tau_color)?;
    let flows = flow_source(&video, &args.flow)?;
    let propagator = Propagator::new(config)?;
    let table = match &args.gt {
        Some(dir) => {
            let gt = read_label_dir(dir, args.tau_color)?;
            if gt.len() != video.frame_count() {
                return Err(CliError::invalid(format!(
                    "{} has {} label images, the sequence has {} frames",
                    dir.display(),
                    gt.len(),
                    video.frame_count()
                )));
            }
            ablation_against_ground_truth(&keyframes, &gt, flows.as_ref(), &propagator, &args.strides)?
        }
        None => ablation_propagation_length(
            &keyframes,
            video.frame_count(),
            flows.as_ref(),
            &propagator,
            &args.strides,
        )?,
    };
    create_dir(&args.out)?;
    write_text(&args.out.join("ablation.json"), &table.to_json()?)?;
    print!("{}", table.format_text("segprop"));
    Ok(())
}

pub fn synth(args: SynthArgs) -> CliResult {
    let spec = match &args.spec {
        Some(path) => SceneSpec::load(path)?,
        None => {
            let s = SceneSpec::translating_rectangles(args.width, args.height, args.frames, args.sprites, args.seed);
            let s = match args.preset {
                Preset::Translating => s,
                Preset::Static => SceneSpec::static_scene(args.width, args.height, args.frames, args.seed),
            };
            s.validate()?;
            s
        }
    };
    let scene = render_scene(&spec)?;
    let manifest = scene.write(&args.out, args.label_stride)?;
    log::info!(
        "wrote {} frames of {}x{} to {}, keyframes {:?}",
        manifest.frame_count(),
        manifest.width(),
        manifest.height(),
        args.out.display(),
        manifest.keyframes
    );
    Ok(())
}

pub fn serve(args: ServeArgs) -> CliResult {
    if !args.root.is_dir() {
        return Err(CliError::invalid(format!("{} is not a directory", args.root.display())));
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::other(e.to_string()))?;
    runtime
        .block_on(segprop_service::serve(
            &args.root,
            (args.host, args.port).into(),
            args.workers,
        ))
        .map_err(|e| CliError::other(e.to_string()))
}
