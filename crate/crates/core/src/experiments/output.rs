use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StateRow, SummaryStats, TrialRecord};
use crate::coordinator::{AgentMessage, SimEvent};
use crate::dynamics::{AgentState, ControlInput};
use crate::Result;

#[derive(Debug, Serialize, Deserialize)]
struct StateCsv {
    t: f64,
    agent_id: usize,
    px: f64,
    py: f64,
    theta: f64,
    v: f64,
    delta: f64,
    u_accel: f64,
    u_steer: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundCsv {
    t: f64,
    agent_id: usize,
    j_hat: f64,
    j_plus: f64,
    c_hat: f64,
    c_plus: f64,
    alpha_cost: f64,
    alpha_constr: f64,
}

#[derive(Debug, Serialize)]
struct TrialBoundCsv {
    trial_id: usize,
    t: f64,
    agent_id: usize,
    j_hat: f64,
    j_plus: f64,
    c_hat: f64,
    c_plus: f64,
    alpha_cost: f64,
    alpha_constr: f64,
}

#[derive(Debug, Serialize)]
struct FormationCsv {
    trial_id: usize,
    t: f64,
    error: f64,
    steady: bool,
}

fn bound_csv(b: &super::BoundRow) -> BoundCsv {
    BoundCsv {
        t: b.t,
        agent_id: b.agent_id,
        j_hat: b.report.j_hat,
        j_plus: b.report.j_plus,
        c_hat: b.report.c_hat,
        c_plus: b.report.c_plus,
        alpha_cost: b.report.alpha_star_cost,
        alpha_constr: b.report.alpha_star_constraint,
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

/// Writes `trials/<id>/` for one record.
pub fn write_trial(dir: &Path, record: &TrialRecord) -> Result<()> {
    let dir = dir.join("trials").join(record.trial_id.to_string());
    fs::create_dir_all(&dir)?;

    let mut states = csv::Writer::from_path(dir.join("states.csv"))?;
    for r in &record.states {
        let x = &r.state;
        states.serialize(StateCsv {
            t: r.t,
            agent_id: r.agent_id,
            px: x.px(),
            py: x.py(),
            theta: x.theta(),
            v: x.v(),
            delta: x.delta(),
            u_accel: r.input.accel(),
            u_steer: r.input.steer_rate(),
        })?;
    }
    states.flush()?;

    let mut messages = BufWriter::new(File::create(dir.join("messages.jsonl"))?);
    for m in &record.messages {
        serde_json::to_writer(&mut messages, m)?;
        messages.write_all(b"\n")?;
    }
    messages.flush()?;

    write_json(&dir.join("events.json"), &record.events)?;
    write_json(&dir.join("paths.json"), &record.leader_path.iter().collect::<Vec<_>>())?;
    write_json(&dir.join("trial.json"), record)?;

    let mut bounds = csv::Writer::from_path(dir.join("bounds.csv"))?;
    for b in &record.bounds {
        bounds.serialize(bound_csv(b))?;
    }
    bounds.flush()?;
    Ok(())
}

/// Writes every per-trial directory plus `summary.json`,
/// `formation_error.csv` and `bounds.csv` at the root of `dir`.
pub fn write_outputs(dir: &Path, records: &[TrialRecord], summary: &SummaryStats) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in records {
        write_trial(dir, r)?;
    }
    write_json(&dir.join("summary.json"), summary)?;

    let mut fe = csv::Writer::from_path(dir.join("formation_error.csv"))?;
    for r in records {
        for s in &r.formation_error {
            fe.serialize(FormationCsv {
                trial_id: r.trial_id,
                t: s.t,
                error: s.error,
                steady: s.steady,
            })?;
        }
    }
    fe.flush()?;

    let mut bounds = csv::Writer::from_path(dir.join("bounds.csv"))?;
    for r in records {
        for b in &r.bounds {
            let row = bound_csv(b);
            bounds.serialize(TrialBoundCsv {
                trial_id: r.trial_id,
                t: row.t,
                agent_id: row.agent_id,
                j_hat: row.j_hat,
                j_plus: row.j_plus,
                c_hat: row.c_hat,
                c_plus: row.c_plus,
                alpha_cost: row.alpha_cost,
                alpha_constr: row.alpha_constr,
            })?;
        }
    }
    bounds.flush()?;
    Ok(())
}

/// Loads a record written by [`write_trial`].
pub fn read_trial(path: &Path) -> Result<TrialRecord> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path.join("trial.json"))?))?)
}

/// Reads every `trials/*/trial.json` under `dir`, sorted by trial id.
pub fn read_records(dir: &Path) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir.join("trials"))? {
        out.push(read_trial(&entry?.path())?);
    }
    out.sort_by_key(|r| r.trial_id);
    Ok(out)
}

pub fn read_summary(dir: &Path) -> Result<SummaryStats> {
    Ok(serde_json::from_reader(BufReader::new(File::open(dir.join("summary.json"))?))?)
}

/// Reads `states.csv` back into rows.
pub fn read_states(path: &Path) -> Result<Vec<StateRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: StateCsv = row?;
        out.push(StateRow {
            t: r.t,
            agent_id: r.agent_id,
            state: AgentState::new(r.px, r.py, r.theta, r.v, r.delta),
            input: ControlInput::new(r.u_accel, r.u_steer),
        });
    }
    Ok(out)
}

pub fn read_messages(path: &Path) -> Result<Vec<AgentMessage>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn read_events(path: &Path) -> Result<Vec<SimEvent>> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
