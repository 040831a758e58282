use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use artikin::corpus::{
    pair_records, read_results, read_trajectories, write_results, write_trajectories, ResultRecord, TrajectoryId,
};
use artikin::estimate::{fit_corpus, preprocess, simulate_segment, smooth, FitConfig};
use artikin::gesture::segment_gestures;
use artikin::oscillator::OscillatorParams;
use artikin::stats::{fit_hierarchical, word_effects, ComparisonData, McmcConfig};
use artikin::synth::{synth_corpus, SynthConfig};

use crate::{CliError, CompareArgs, FitArgs, PipelineArgs, PlotdataArgs, SynthArgs};

type Result<T> = std::result::Result<T, CliError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn data_error(path: &Path) -> impl Fn(artikin::corpus::CorpusError) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// `<stem>.<suffix>.csv` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Prefixes CSV bytes with `# `-comment provenance lines and writes the file.
fn write_output(path: &Path, provenance: &[String], body: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(body.len() + 256);
    for line in provenance {
        buf.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    buf.extend_from_slice(body);
    let mut f = File::create(path).map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(&buf).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn csv_body<F>(fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w).map_err(|e| CliError::Internal(format!("csv encoding: {e}")))?;
        w.flush().map_err(|e| CliError::Internal(format!("csv encoding: {e}")))?;
    }
    Ok(buf)
}

fn provenance(command: &str, settings: Vec<String>) -> Vec<String> {
    let mut lines = vec![format!("artikin {} {command}", env!("CARGO_PKG_VERSION"))];
    lines.extend(settings);
    lines
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        speakers: a.speakers,
        words: a.words,
        reps: a.reps,
        channels: a.channels.clone(),
        ema_rate: a.ema_rate,
        us_rate: a.us_rate,
        ema_noise: a.ema_noise,
        us_noise: a.us_noise,
        us_target_offset: a.us_offset,
        gesture_span: a.gesture_span,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let corpus = synth_corpus(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut body = Vec::new();
    write_trajectories(&corpus.records, &mut body).map_err(|e| CliError::Internal(e.to_string()))?;
    let channels: Vec<&str> = a.channels.iter().map(|c| c.as_str()).collect();
    let header = provenance(
        "synth",
        vec![
            format!("speakers={} words={} reps={} channels={}", a.speakers, a.words, a.reps, channels.join(",")),
            format!("ema_rate={} us_rate={} ema_noise={} us_noise={}", a.ema_rate, a.us_rate, a.ema_noise, a.us_noise),
            format!("us_offset={} gesture_span={} seed={}", a.us_offset, a.gesture_span, a.seed),
        ],
    );
    write_output(&a.output, &header, &body)?;
    log::info!("wrote {} trajectories to {}", corpus.records.len(), a.output.display());
    Ok(())
}

impl PipelineArgs {
    fn config(&self) -> Result<FitConfig> {
        if !self.no_smooth && self.dct_order == 0 {
            return Err(CliError::Usage("--dct-order must be at least 1".into()));
        }
        if !self.native_rate && !(self.target_rate > 0.0 && self.target_rate.is_finite()) {
            return Err(CliError::Usage("--target-rate must be positive".into()));
        }
        if !(self.min_peak_vel >= 0.0) {
            return Err(CliError::Usage("--min-peak-vel must be non-negative".into()));
        }
        Ok(FitConfig {
            dct_order: (!self.no_smooth).then_some(self.dct_order),
            target_rate: (!self.native_rate).then_some(self.target_rate),
            min_samples: self.min_samples,
            min_peak_vel: self.min_peak_vel,
            centering: self.centering.into(),
        })
    }

    fn describe(&self, config: &FitConfig) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "off".into());
        format!(
            "dct_order={} target_rate={} min_samples={} min_peak_vel={} centering={:?}",
            opt(config.dct_order.map(|v| v.to_string())),
            opt(config.target_rate.map(|v| v.to_string())),
            config.min_samples,
            config.min_peak_vel,
            self.centering,
        )
    }
}

fn id_fields(id: &TrajectoryId) -> [String; 5] {
    let k = &id.key;
    [k.speaker.clone(), k.word.clone(), id.modality.to_string(), k.channel.to_string(), k.rep.to_string()]
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let config = a.pipeline.config()?;
    let records = read_trajectories::<f64, _>(open(&a.input)?).map_err(data_error(&a.input))?;
    let pairing = pair_records(records).map_err(data_error(&a.input))?;
    for r in &pairing.unpaired {
        log::warn!("{}: no recording in the other modality; not fitted", r.id);
    }
    let fit = fit_corpus(&pairing.pairs, &config);
    if !fit.mismatches.is_empty() {
        log::warn!("{} token(s) have different EMA and US gesture counts", fit.mismatches.len());
    }

    let header = provenance("fit", vec![a.pipeline.describe(&config)]);
    let mut body = Vec::new();
    write_results(&fit.results, &mut body).map_err(|e| CliError::Internal(e.to_string()))?;
    write_output(&a.output, &header, &body)?;

    let summary = csv_body(|w| {
        w.write_record(["Variable", "Modality", "N", "mean", "SD", "min", "max"])?;
        for row in &fit.summary {
            w.write_record([
                row.channel.to_string(),
                row.modality.to_string(),
                row.n.to_string(),
                row.mean.to_string(),
                row.sd.to_string(),
                row.min.to_string(),
                row.max.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_output(&a.summary.clone().unwrap_or_else(|| sibling(&a.output, "summary")), &header, &summary)?;

    let skipped = csv_body(|w| {
        w.write_record(["speaker", "word", "modality", "channel", "rep", "gesture_index", "reason"])?;
        for r in &pairing.unpaired {
            let mut row = id_fields(&r.id).to_vec();
            row.extend([String::new(), "no recording in the other modality".into()]);
            w.write_record(row)?;
        }
        for s in &fit.skipped {
            let mut row = id_fields(&s.id).to_vec();
            row.extend([s.gesture_index.map(|g| g.to_string()).unwrap_or_default(), s.reason.clone()]);
            w.write_record(row)?;
        }
        Ok(())
    })?;
    write_output(&a.skipped.clone().unwrap_or_else(|| sibling(&a.output, "skipped")), &header, &skipped)?;
    log::info!("{} gestures fitted, {} skipped", fit.results.len(), fit.skipped.len());
    Ok(())
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let mut results = read_results(open(&a.input)?).map_err(data_error(&a.input))?;
    if let Some(g) = a.gesture {
        results.retain(|r| r.gesture_index == g);
    }
    let data = ComparisonData::from_results(&results, a.parameter, &a.channel)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.input.display())))?;
    let m = &a.mcmc;
    let config = McmcConfig { chains: m.chains, warmup: m.warmup, draws: m.draws, init_step: m.step, seed: m.seed };
    let fit = fit_hierarchical(&data, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    if !fit.converged {
        let worst = fit.summaries.iter().map(|s| s.rhat).fold(f64::NEG_INFINITY, f64::max);
        log::warn!("sampler did not converge (max R-hat {worst:.3}); results written anyway");
    }

    let header = provenance(
        "compare",
        vec![
            format!(
                "parameter={} channel={} gesture={} n={}",
                a.parameter,
                a.channel,
                a.gesture.map_or("all".to_string(), |g| g.to_string()),
                data.observations.len()
            ),
            format!("chains={} warmup={} draws={} step={} seed={}", m.chains, m.warmup, m.draws, m.step, m.seed),
        ],
    );
    let posterior = csv_body(|w| {
        w.write_record(["parameter", "mean", "ci_low", "ci_high", "rhat", "ess"])?;
        for s in &fit.summaries {
            w.write_record([
                s.name.clone(),
                s.mean.to_string(),
                s.ci_low.to_string(),
                s.ci_high.to_string(),
                s.rhat.to_string(),
                s.ess.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_output(&a.output, &header, &posterior)?;

    let effects = csv_body(|w| {
        w.write_record(["word", "mean", "ci_low", "ci_high"])?;
        for e in word_effects(&fit) {
            w.write_record([e.word, e.mean.to_string(), e.ci_low.to_string(), e.ci_high.to_string()])?;
        }
        Ok(())
    })?;
    write_output(&a.effects.clone().unwrap_or_else(|| sibling(&a.output, "effects")), &header, &effects)?;
    Ok(())
}

fn result_key(r: &ResultRecord) -> String {
    format!("{}/{}", r.id, r.gesture_index)
}

pub fn plotdata(a: &PlotdataArgs) -> Result<()> {
    let config = a.pipeline.config()?;
    let results = read_results(open(&a.results)?).map_err(data_error(&a.results))?;
    let chosen: Vec<&ResultRecord> = match a.sample {
        Some(n) => {
            if n > results.len() {
                return Err(CliError::Data(format!("cannot sample {n} of {} fitted gestures", results.len())));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut picks = index::sample(&mut rng, results.len(), n).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| &results[i]).collect()
        }
        None => a
            .key
            .iter()
            .map(|k| {
                results
                    .iter()
                    .find(|r| result_key(r) == *k)
                    .ok_or_else(|| CliError::Data(format!("key {k} not found in {}", a.results.display())))
            })
            .collect::<Result<_>>()?,
    };

    let records = read_trajectories::<f64, _>(open(&a.corpus)?).map_err(data_error(&a.corpus))?;
    let (records, _) = preprocess(records, &config);

    let mut rows: Vec<[String; 6]> = Vec::new();
    for r in chosen {
        let key = result_key(r);
        let record = records
            .iter()
            .find(|t| t.id == r.id)
            .ok_or_else(|| CliError::Data(format!("{key}: trajectory missing from {}", a.corpus.display())))?;
        let traj = smooth(record, &config).map_err(|e| CliError::Data(format!("{key}: {e}")))?;
        let segments = segment_gestures(&traj, config.min_samples, config.min_peak_vel);
        let seg = segments
            .iter()
            .find(|s| s.gesture_index == r.gesture_index)
            .ok_or_else(|| CliError::Data(format!("{key}: gesture not reproduced; were the same fit flags used?")))?;
        if (seg.t_start - r.t_start).abs() > 0.5 / seg.sample_rate {
            return Err(CliError::Data(format!(
                "{key}: gesture starts at {} here but {} in results",
                seg.t_start, r.t_start
            )));
        }
        let params = OscillatorParams::new(r.b, r.k, r.target);
        let (x_model, v_model) =
            simulate_segment(&params, seg.positions[0], seg.velocity[0], seg.sample_rate, seg.len())
                .map_err(|e| CliError::Data(format!("{key}: {e}")))?;
        for i in 0..seg.len() {
            rows.push([
                key.clone(),
                (seg.t_start + i as f64 / seg.sample_rate).to_string(),
                seg.velocity[i].to_string(),
                v_model[i].to_string(),
                seg.positions[i].to_string(),
                x_model[i].to_string(),
            ]);
        }
    }

    let body = csv_body(|w| {
        w.write_record(["key", "t", "v_empirical", "v_model", "x_empirical", "x_model"])?;
        for row in &rows {
            w.write_record(row)?;
        }
        Ok(())
    })?;
    let header = provenance("plotdata", vec![a.pipeline.describe(&config), format!("seed={}", a.seed)]);
    write_output(&a.output, &header, &body)
}
