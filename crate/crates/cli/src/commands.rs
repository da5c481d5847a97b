//! Subcommand bodies. Each writes its files under `cfg.out_dir`.
//!
//! Output schemas:
//! - `train`: `transcript.jsonl`, `metrics.csv` (round, recall_at_5, epsilon)
//! - `attack`: `attack_summary.csv` (round, asr, mean_ait), `attack_points.csv`
//!   (round, client_id, point_index, error_m, iterations, success), `reconstruction.jsonl`
//! - `ablate`: `ablation.csv` (st_init, mapping, calibration, round, asr, mean_ait)
//! - `tradeoff`: `tradeoff.csv` (mechanism, epsilon, asr, recall_at_5), means over seeds
//! - `audit`: `audit.csv` (mechanism, epsilon, seed, domain_size, max_excess)
//! - `gen-data`: `network.json`, `trajectories.jsonl`

use std::io::BufReader;
use std::path::Path;

use log::info;
use stgia_core::dataio::write_trajectories_jsonl;
use stgia_core::fedsim::{read_transcript, write_transcript, Transcript};
use stgia_core::stgia::AttackReport;

use crate::config::ExperimentConfig;
use crate::experiment::{ablation, attack, audit_rows, tradeoff_runs, Scenario};
use crate::output::{cell, out_path, write_atomic, write_csv};
use crate::CliError;

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

pub fn train(cfg: &ExperimentConfig) -> Result<Transcript, CliError> {
    let scenario = Scenario::build(cfg, cfg.seed)?;
    let tr = scenario.train(&cfg.defense, cfg.seed)?;
    let recall = scenario.recall_curve(&tr)?;
    let eps = tr.epsilon_per_round();
    let rows: Vec<Vec<String>> = tr
        .rounds
        .iter()
        .zip(recall.iter().zip(&eps))
        .map(|(r, (rec, e))| vec![r.round.to_string(), cell(Some(*rec), 6), cell(*e, 9)])
        .collect();
    write_atomic(&out_path(&cfg.out_dir, "transcript.jsonl"), |w| {
        Ok(write_transcript(w, &tr)?)
    })?;
    write_csv(
        &out_path(&cfg.out_dir, "metrics.csv"),
        &["round", "recall_at_5", "epsilon"],
        &rows,
    )?;
    info!("trained {} rounds", tr.rounds.len());
    Ok(tr)
}

pub fn read_transcript_file(path: &Path) -> Result<Transcript, CliError> {
    let f = std::fs::File::open(path)
        .map_err(|e| CliError::Config(format!("transcript {}: {e}", path.display())))?;
    Ok(read_transcript(BufReader::new(f))?)
}

/// With `check_spec`, the config's model shape must match the transcript's.
pub fn attack_cmd(
    cfg: &ExperimentConfig,
    transcript: &Path,
    check_spec: bool,
) -> Result<AttackReport, CliError> {
    let tr = read_transcript_file(transcript)?;
    if check_spec {
        let m = &cfg.model;
        let s = &tr.spec;
        if (s.window_len, s.hidden_units, s.num_cells)
            != (m.window_len, m.hidden_units, m.cell_cols * m.cell_rows)
        {
            return Err(CliError::Config(format!(
                "model: transcript has k = {}, H = {}, G = {} but config has k = {}, H = {}, G = {}",
                s.window_len,
                s.hidden_units,
                s.num_cells,
                m.window_len,
                m.hidden_units,
                m.cell_cols * m.cell_rows
            )));
        }
    }
    let (log, report) = attack(&tr, &cfg.attack, cfg.seed)?;
    write_atomic(&out_path(&cfg.out_dir, "reconstruction.jsonl"), |w| {
        Ok(log.write_jsonl(w)?)
    })?;
    write_atomic(&out_path(&cfg.out_dir, "attack_points.csv"), |w| {
        Ok(report.write_points_csv(w)?)
    })?;
    write_atomic(&out_path(&cfg.out_dir, "attack_summary.csv"), |w| {
        Ok(report.write_summary_csv(w)?)
    })?;
    Ok(report)
}

pub fn ablate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let scenario = Scenario::build(cfg, cfg.seed)?;
    let tr = scenario.train(&cfg.defense, cfg.seed)?;
    let mut rows = Vec::new();
    for (flags, report) in ablation(&tr, &cfg.attack, cfg.seed)? {
        for r in &report.rounds {
            rows.push(vec![
                flag(flags.st_init),
                flag(flags.mapping),
                flag(flags.calibration),
                r.round.to_string(),
                cell(Some(r.asr), 6),
                cell(r.mean_ait, 3),
            ]);
        }
    }
    write_csv(
        &out_path(&cfg.out_dir, "ablation.csv"),
        &[
            "st_init",
            "mapping",
            "calibration",
            "round",
            "asr",
            "mean_ait",
        ],
        &rows,
    )
}

pub fn tradeoff(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let runs = tradeoff_runs(cfg)?;
    let mut rows = Vec::new();
    for &m in &cfg.tradeoff.mechanisms {
        for &eps in &cfg.tradeoff.epsilons {
            let sel: Vec<_> = runs
                .iter()
                .filter(|r| r.mechanism == m && r.epsilon == eps)
                .collect();
            let n = sel.len() as f64;
            let asr = sel.iter().map(|r| r.asr).sum::<f64>() / n;
            let recall = sel.iter().map(|r| r.recall).sum::<f64>() / n;
            rows.push(vec![
                m.name().to_string(),
                eps.to_string(),
                cell(Some(asr), 6),
                cell(Some(recall), 6),
            ]);
        }
    }
    write_csv(
        &out_path(&cfg.out_dir, "tradeoff.csv"),
        &["mechanism", "epsilon", "asr", "recall_at_5"],
        &rows,
    )
}

pub fn audit(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let rows: Vec<Vec<String>> = audit_rows(&cfg.audit, cfg.seed)?
        .into_iter()
        .map(|r| {
            vec![
                r.mechanism.name().to_string(),
                r.epsilon.to_string(),
                r.seed.to_string(),
                r.domain_size.to_string(),
                format!("{:e}", r.excess),
            ]
        })
        .collect();
    write_csv(
        &out_path(&cfg.out_dir, "audit.csv"),
        &["mechanism", "epsilon", "seed", "domain_size", "max_excess"],
        &rows,
    )
}

pub fn gen_data(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let scenario = Scenario::build(cfg, cfg.seed)?;
    write_atomic(&out_path(&cfg.out_dir, "network.json"), |w| {
        w.write_all(scenario.net.to_json_string().as_bytes())?;
        Ok(())
    })?;
    write_atomic(&out_path(&cfg.out_dir, "trajectories.jsonl"), |w| {
        Ok(write_trajectories_jsonl(w, &scenario.trajectories)?)
    })
}
