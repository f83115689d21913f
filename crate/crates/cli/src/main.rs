use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pacswarm::experiments::{run_monte_carlo, sweep_noise, write_outputs};
use pacswarm::world::Scenario;

#[derive(Parser)]
#[command(name = "pacswarm", version, about = "Multi-agent PAC-bounded policy optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        matches!(s, Switch::On)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials of a scenario and write the outputs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Use the larger sample and iteration counts of the original study.
        #[arg(long)]
        paper_scale: bool,
        /// Team planner: distributed or centralized.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long, value_enum)]
        gyro_agents: Option<Switch>,
        #[arg(long, value_enum)]
        noise_aware: Option<Switch>,
        /// leader_rrt, mean_final_state or follower_rrt.
        #[arg(long)]
        formation_method: Option<String>,
        /// Comma-separated position variances; runs the gyro x noise-aware grid.
        #[arg(long, value_delimiter = ',')]
        sweep_noise: Option<Vec<f64>>,
    },
}

fn main() -> Result<()> {
    let Command::Run {
        scenario,
        trials,
        seed,
        out,
        paper_scale,
        mode,
        gyro_agents,
        noise_aware,
        formation_method,
        sweep_noise: sweep,
    } = Cli::parse().command;

    let mut s = Scenario::from_file(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
    if let Some(m) = mode {
        s.mode = m;
    }
    if let Some(g) = gyro_agents {
        s.agent_gyro_on = g.into();
    }
    if let Some(n) = noise_aware {
        s.noise_aware = n.into();
    }
    if let Some(f) = formation_method {
        s.formation_method = f;
    }
    if paper_scale {
        s = s.paper_scale();
    }
    s.validate()?;
    if trials == 0 {
        bail!("--trials must be at least 1");
    }

    if let Some(variances) = sweep {
        let cells = sweep_noise(&s, &variances, trials, seed)?;
        std::fs::create_dir_all(&out)?;
        let path = out.join("sweep.json");
        std::fs::write(&path, serde_json::to_string_pretty(&cells)?)?;
        for c in &cells {
            println!(
                "variance {:.2} gyro {:<3} noise_aware {:<3} collisions {:5.1}%",
                c.variance,
                if c.agent_gyro { "on" } else { "off" },
                if c.noise_aware { "on" } else { "off" },
                c.collision_percentage
            );
        }
        println!("wrote {}", path.display());
        return Ok(());
    }

    let (summary, records) = run_monte_carlo(&s, trials, seed)?;
    write_outputs(&out, &records, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("wrote {}", out.display());
    Ok(())
}
