use std::io::Write;
use std::time::Instant;

use serde::Serialize;

/// One rollout of an optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Reported reward of the rollout (floor when infeasible).
    pub reward: f64,
    /// Best reward over episodes `0..=episode`.
    pub prefix_max: f64,
    /// Wall time since the run started (ms).
    pub wall_ms: f64,
    pub feasible: bool,
}

/// Per-episode log of an optimizer run. Every simulated rollout is one
/// episode, so `evaluations()` is the exact rollout count.
#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub episodes: Vec<EpisodeRecord>,
    /// Set by GD when the initial rollout is infeasible.
    pub init_infeasible: bool,
    started: Instant,
}

impl Default for OptimizerReport {
    fn default() -> Self {
        Self::new()
    }
}

impl OptimizerReport {
    pub fn new() -> Self {
        OptimizerReport { episodes: Vec::new(), init_infeasible: false, started: Instant::now() }
    }

    pub fn push(&mut self, reward: f64, feasible: bool) {
        let prev = self.episodes.last().map_or(f64::NEG_INFINITY, |e| e.prefix_max);
        self.episodes.push(EpisodeRecord {
            episode: self.episodes.len(),
            reward,
            prefix_max: prev.max(reward),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            feasible,
        });
    }

    pub fn evaluations(&self) -> usize {
        self.episodes.len()
    }

    pub fn best(&self) -> f64 {
        self.episodes.last().map_or(f64::NEG_INFINITY, |e| e.prefix_max)
    }

    pub fn feasible_found(&self) -> bool {
        self.episodes.iter().any(|e| e.feasible)
    }

    /// Appends `other`, renumbering its episodes and continuing the prefix
    /// maximum and the clock.
    pub fn append(&mut self, other: &OptimizerReport) {
        let offset = self.episodes.last().map_or(0.0, |e| e.wall_ms);
        for e in &other.episodes {
            let prev = self.episodes.last().map_or(f64::NEG_INFINITY, |p| p.prefix_max);
            self.episodes.push(EpisodeRecord {
                episode: self.episodes.len(),
                prefix_max: prev.max(e.reward),
                wall_ms: offset + e.wall_ms,
                ..e.clone()
            });
        }
        self.init_infeasible |= other.init_infeasible;
    }

    /// `episode,reward,prefix_max,wall_ms` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "episode,reward,prefix_max,wall_ms")?;
        for e in &self.episodes {
            writeln!(w, "{},{:e},{:e},{:.3}", e.episode, e.reward, e.prefix_max, e.wall_ms)?;
        }
        Ok(())
    }
}
