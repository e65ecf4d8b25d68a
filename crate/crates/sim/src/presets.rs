//! Named sweeps checked into `presets/`.
//!
//! | preset | axes |
//! |--------|------|
//! | `fig5a` | packet length × horizon, L1 cost |
//! | `fig5b` | packet length × horizon, L2 cost |
//! | `fig8`  | packet length × randomization width |
//! | `fig9`  | packet length × method, 10-s reference delay |
//!
//! Each uses twelve synthetic hour signals (seeds 1..=12) in place of
//! recorded Reg-D hours.

use std::path::Path;

use crate::sweep::SweepGrid;
use crate::Error;

pub const NAMES: [&str; 4] = ["fig5a", "fig5b", "fig8", "fig9"];

fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig5a" => include_str!("../presets/fig5a.toml"),
        "fig5b" => include_str!("../presets/fig5b.toml"),
        "fig8" => include_str!("../presets/fig8.toml"),
        "fig9" => include_str!("../presets/fig9.toml"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<SweepGrid, Error> {
    let text =
        source(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}; expected one of {NAMES:?}")))?;
    parse_grid(text)
}

pub fn parse_grid(text: &str) -> Result<SweepGrid, Error> {
    let grid: SweepGrid = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    grid.template.validate()?;
    grid.scenarios()?;
    Ok(grid)
}

/// Loads a sweep file; relative signal paths resolve against its directory.
pub fn load_grid(path: &Path) -> Result<SweepGrid, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut grid = parse_grid(&text)?;
    if let Some(dir) = path.parent() {
        let t = &mut grid.template;
        for p in [&mut t.signal.path, &mut t.ar.training_path].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(grid)
}
