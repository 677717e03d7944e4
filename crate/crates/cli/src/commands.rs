use std::collections::BTreeMap;

use lattice_fusion::bench::{plot_data, render_report, run_bench, BenchConfig};
use lattice_fusion::detection::{otsu_offset, pool_detections, top_k, top_scores_per_frame};
use lattice_fusion::eval::{corpus_agreement, render_table};
use lattice_fusion::events::{classify, joint_multi_model, Evidence, JointParams, ObjectiveTerms};
use lattice_fusion::formats::annot::parse_annotations;
use lattice_fusion::formats::detections::{format_detections, parse_detections};
use lattice_fusion::formats::hmm::parse_models;
use lattice_fusion::formats::prism::{format_prisms, parse_prisms};
use lattice_fusion::formats::scenario::{format_scenario, parse_scenario};
use lattice_fusion::formats::track::{format_track, prism_track_records, track_records};
use lattice_fusion::formats::unified::{format_unified, UnifiedFile};
use lattice_fusion::pyramid::{track_prisms, track_prisms_quadratic};
use lattice_fusion::synth::{gen_detections, gen_prisms, Scenario};
use lattice_fusion::tracking::{viterbi_track_augmented, CoherencyParams};
use lattice_fusion::unified::recognize_all;
use lattice_fusion::{FrameDetections, MotionModel};

use crate::io::{parse_file, write_optional, CliError, CliResult, Sink};
use crate::{BenchArgs, Coherency, EvalArgs, JointArgs, PyramidArgs, RecognizeArgs, SynthArgs, TrackArgs, UnifiedArgs};

fn coherency_params(c: &Coherency) -> CoherencyParams {
    CoherencyParams {
        motion: c
            .velocity
            .map_or(MotionModel::Identity, |(vx, vy)| MotionModel::ConstantVelocity {
                vx,
                vy,
            }),
        g_form: c.g_form,
    }
}

fn prune(frames: Vec<FrameDetections>, k: Option<usize>) -> CliResult<Vec<FrameDetections>> {
    match k {
        None => Ok(frames),
        Some(k) => Ok(frames.iter().map(|f| top_k(f, k)).collect::<Result<_, _>>()?),
    }
}

fn terms_line(objective: f64, t: &ObjectiveTerms) -> String {
    format!(
        "objective {objective} f {} g {} h {} a {} init {}",
        t.f, t.g, t.h, t.a, t.init
    )
}

fn plain_terms(f: f64, g: f64) -> ObjectiveTerms {
    ObjectiveTerms {
        f,
        g,
        h: 0.0,
        a: 0.0,
        init: 0.0,
    }
}

fn join_states(states: &[usize]) -> String {
    states.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

pub fn track(args: TrackArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let sources: Vec<Vec<FrameDetections>> = args
        .input
        .iter()
        .map(|p| parse_file(p, parse_detections))
        .collect::<CliResult<_>>()?;

    let frames = if let [only] = sources.as_slice() {
        only.clone()
    } else {
        let len = sources[0].len();
        if sources.iter().any(|s| s.len() != len) {
            return Err(CliError::malformed(
                "frame-mismatch",
                "pooled inputs cover different frame counts",
            ));
        }
        let mut offsets = Vec::with_capacity(sources.len());
        for (path, s) in args.input.iter().zip(&sources) {
            let offset = otsu_offset(&top_scores_per_frame(s), args.trained_threshold, args.epsilon)?;
            sink.report(&format!("offset {} {offset}", path.display()));
            offsets.push(offset);
        }
        (0..len)
            .map(|t| {
                let per_source: Vec<(FrameDetections, f64)> =
                    sources.iter().zip(&offsets).map(|(s, &o)| (s[t].clone(), o)).collect();
                pool_detections(sources[0][t].frame, &per_source)
            })
            .collect::<Result<_, _>>()?
    };
    let frames = prune(frames, args.coherency.top_k)?;
    let params = coherency_params(&args.coherency);
    let track = viterbi_track_augmented(&frames, &params, args.project, args.projection_penalty)?;
    sink.write(&format_track(&track_records(&track)))?;
    sink.report(&terms_line(track.objective, &plain_terms(track.f_sum(), track.g_sum())));
    Ok(())
}

pub fn pyramid(args: PyramidArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let prisms = parse_file(&args.input, parse_prisms)?;
    let alpha = args.alpha.unwrap_or_else(|| prisms.first().map_or(1.0, |p| p.alpha()));
    let track = if args.quadratic {
        track_prisms_quadratic(&prisms, alpha)?
    } else {
        track_prisms(&prisms, alpha)?
    };
    sink.write(&format_track(&prism_track_records(&track, &prisms)))?;
    sink.report(&terms_line(track.objective, &plain_terms(track.f_sum(), track.g_sum())));
    Ok(())
}

pub fn recognize(args: RecognizeArgs) -> CliResult {
    let frames = prune(parse_file(&args.input, parse_detections)?, args.coherency.top_k)?;
    let models = parse_file(&args.models, parse_models)?;
    let params = JointParams {
        coherency: coherency_params(&args.coherency),
        frame_size: args.frame_size,
    };
    for (event, score) in classify(Evidence::Frames(&frames), &models, args.mode, &params)? {
        println!("event {event} score {score}");
    }
    Ok(())
}

pub fn joint(args: JointArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let frames = prune(parse_file(&args.input, parse_detections)?, args.coherency.top_k)?;
    let models = parse_file(&args.models, parse_models)?;
    let params = JointParams {
        coherency: coherency_params(&args.coherency),
        frame_size: args.frame_size,
    };
    let run = joint_multi_model(&frames, &models, &params)?;
    let best = run
        .results
        .first()
        .ok_or_else(|| CliError::malformed("no-models", "no event models given"))?;
    sink.write(&format_track(&track_records(&best.track)))?;
    for r in &run.results {
        sink.report(&format!("event {} {}", r.event, terms_line(r.objective, &r.terms)));
        sink.report(&format!("states {} {}", r.event, join_states(&r.states)));
    }
    sink.report(&format!("g-evaluations {}", run.g_evaluations));
    Ok(())
}

pub fn unified(args: UnifiedArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let prisms = parse_file(&args.input, parse_prisms)?;
    let models = parse_file(&args.models, parse_models)?;
    let alpha = args.alpha.unwrap_or_else(|| prisms.first().map_or(1.0, |p| p.alpha()));
    let results = recognize_all(&prisms, &models, alpha, args.frame_size)?;
    sink.write(&format_unified(&UnifiedFile::from(&results[0])))?;
    for r in &results {
        sink.report(&format!("event {} {}", r.event, terms_line(r.objective, &r.terms)));
        sink.report(&format!("states {} {}", r.event, join_states(&r.states)));
    }
    Ok(())
}

pub fn eval(args: EvalArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let [a, b] = [&args.input[0], &args.input[1]].map(|p| parse_file(p, parse_annotations));
    let (a, b) = (a?, b?);
    let mut by_video: BTreeMap<&str, _> = b.iter().map(|s| (s.video.as_str(), s)).collect();
    let pairs: Vec<_> = a
        .iter()
        .filter_map(|u| by_video.remove(u.video.as_str()).map(|v| (u.clone(), v.clone())))
        .collect();
    if pairs.is_empty() {
        return Err(CliError::infeasible(
            "no-shared-videos",
            "the annotation files share no video",
        ));
    }
    let report = corpus_agreement(&pairs, args.class, args.perm_cap)?;
    for v in &report.videos {
        let mean = v.permutation.mean.map_or_else(|| "n/a".to_string(), |m| m.to_string());
        sink.report(&format!(
            "video {} overlaps {} mean {mean}",
            v.video,
            v.permutation.overlaps.len()
        ));
    }
    let name = format!("{} vs {}", args.input[0].display(), args.input[1].display());
    let table = render_table(&[(name, &report)]);
    sink.write(&table)?;
    sink.report(table.trim_end());
    Ok(())
}

pub fn synth(args: SynthArgs) -> CliResult {
    let sink = Sink::new(args.output);
    let mut sc = match &args.input {
        Some(path) => parse_file(path, parse_scenario)?,
        None => Scenario::linear(
            0,
            Default::default(),
            args.frames,
            (128.0, 176.0),
            (8.0, 0.0),
            (64.0, 128.0),
        )?,
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(d) = args.dropout {
        sc.noise.dropout = d;
    }
    if let Some(j) = args.jitter {
        sc.noise.jitter = j;
    }
    if let Some(r) = args.fp_rate {
        sc.noise.fp_rate = r;
    }

    let dets = gen_detections(&sc)?;
    sink.write(&format_detections(&dets.frames))?;
    if let Some(path) = &args.truth {
        let truth: Vec<FrameDetections> = dets
            .truth
            .iter()
            .map(|b| FrameDetections::new(b.frame, vec![*b]))
            .collect::<Result<_, _>>()?;
        write_optional(Some(path), &format_detections(&truth))?;
    }
    if let Some(path) = &args.prisms {
        write_optional(Some(path), &format_prisms(&gen_prisms(&sc)?.prisms))?;
    }
    if let Some(path) = &args.scenario {
        write_optional(Some(path), &format_scenario(&sc))?;
    }
    let boxes: usize = dets.frames.iter().map(FrameDetections::len).sum();
    let dropped = dets.dropped.iter().filter(|&&d| d).count();
    sink.report(&format!(
        "frames {} detections {boxes} dropped {dropped} seed {}",
        sc.frames(),
        sc.seed
    ));
    Ok(())
}

pub fn bench(args: BenchArgs) -> CliResult {
    let cfg = BenchConfig {
        ladder: args.ladder,
        frames: args.frames,
        alpha: args.alpha,
        seed: args.seed,
        samples: args.samples,
        ..BenchConfig::default()
    };
    let rows = run_bench(&cfg)?;
    print!("{}", render_report(&rows));
    write_optional(args.output.as_deref(), &plot_data(&rows))
}
