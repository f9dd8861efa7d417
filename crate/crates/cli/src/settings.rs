use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;

use rodplan::rod::RodConfig;

/// Flags shared by every subcommand. A JSON config file may supply any of
/// them; flags given on the command line win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// Instance JSON
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
    /// det | saro | daro-sus | daro-dus
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Uncertainty budget (overrides the instance's)
    #[arg(long, global = true)]
    pub gamma: Option<usize>,
    /// Static deviation as a fraction of the forecast
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Outer relative gap
    #[arg(long, global = true)]
    pub eps1: Option<f64>,
    /// Inner relative gap
    #[arg(long, global = true)]
    pub eps2: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative MIP gap passed to the solver
    #[arg(long, global = true)]
    pub solver_gap: Option<f64>,
    /// Wall-clock budget in seconds
    #[arg(long, global = true)]
    pub time_limit: Option<f64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn load(path: &Path) -> anyhow::Result<Common> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// `self` with gaps filled from `base`.
    pub fn over(self, base: Common) -> Common {
        Common {
            instance: self.instance.or(base.instance),
            model: self.model.or(base.model),
            gamma: self.gamma.or(base.gamma),
            alpha: self.alpha.or(base.alpha),
            eps1: self.eps1.or(base.eps1),
            eps2: self.eps2.or(base.eps2),
            seed: self.seed.or(base.seed),
            solver_gap: self.solver_gap.or(base.solver_gap),
            time_limit: self.time_limit.or(base.time_limit),
            out: self.out.or(base.out),
        }
    }

    pub fn rod_config(&self) -> anyhow::Result<RodConfig> {
        let mut cfg = RodConfig::default();
        if let Some(e) = self.eps1 {
            cfg.eps_outer = e;
        }
        if let Some(e) = self.eps2 {
            cfg.eps_inner = e;
        }
        if let Some(g) = self.solver_gap {
            if !(0.0..1.0).contains(&g) {
                bail!("--solver-gap must be in [0, 1)");
            }
            cfg.solver.rel_gap = g;
        }
        if let Some(s) = self.seed {
            cfg.solver.seed = s as u32;
        }
        cfg.time_limit = self.time_limit;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn instance_path(&self) -> anyhow::Result<&Path> {
        match &self.instance {
            Some(p) => Ok(p),
            None => bail!("--instance is required"),
        }
    }
}
