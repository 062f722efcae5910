//! Toolkit configuration: a flat, sectioned key-value text format with
//! units spelled out in key names. Unknown sections or keys are rejected,
//! every value is validated against the module preconditions at load time,
//! and the raw bytes are hashed into the run manifest.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "config line {}: {}", self.line, self.message)
        } else {
            write!(f, "config: {}", self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// Raw parsed form: section -> key -> (line, value).
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut out = RawConfig::default();
        let mut current: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line_no, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(err(line_no, "empty section name"));
                }
                if out.sections.contains_key(name) {
                    return Err(err(line_no, format!("duplicate section [{name}]")));
                }
                out.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(err(line_no, "empty key"));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| err(line_no, "key outside of any [section]"))?;
            let map = out.sections.get_mut(section).expect("section exists");
            if map.contains_key(key) {
                return Err(err(line_no, format!("duplicate key `{key}`")));
            }
            map.insert(key.to_string(), (line_no, value.to_string()));
        }
        Ok(out)
    }
}

/// Typed section reader that tracks which keys were consumed so leftovers
/// can be rejected.
struct Section<'a> {
    name: &'a str,
    map: Option<&'a BTreeMap<String, (usize, String)>>,
    used: Vec<&'a str>,
}

impl<'a> Section<'a> {
    fn get(&mut self, key: &'a str) -> Option<(usize, &'a str)> {
        self.used.push(key);
        self.map
            .and_then(|m| m.get(key))
            .map(|(l, v)| (*l, v.as_str()))
    }

    fn f64(&mut self, key: &'a str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(line, format!("`{key}` must be a number, got `{v}`"))),
        }
    }

    fn f64_or(&mut self, key: &'a str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize_or(&mut self, key: &'a str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<usize>()
                .map_err(|_| err(line, format!("`{key}` must be a nonnegative integer"))),
        }
    }

    fn u64_or(&mut self, key: &'a str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse::<u64>()
                .map_err(|_| err(line, format!("`{key}` must be a nonnegative integer"))),
        }
    }

    fn string_or(&mut self, key: &'a str, default: &str) -> String {
        self.get(key)
            .map(|(_, v)| v.to_string())
            .unwrap_or_else(|| default.to_string())
    }

    fn bool_or(&mut self, key: &'a str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(err(line, format!("`{key}` must be true/false"))),
            },
        }
    }

    fn f64_list_or(&mut self, key: &'a str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some((line, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| err(line, format!("`{key}` must be a comma-separated list of numbers")))
                })
                .collect(),
        }
    }

    fn reject_unknown(&self) -> Result<(), ConfigError> {
        if let Some(map) = self.map {
            for (key, (line, _)) in map {
                if !self.used.iter().any(|u| u == key) {
                    return Err(err(
                        *line,
                        format!("unknown key `{key}` in section [{}]", self.name),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    GaussianDoubleWell {
        sigma: f64,
        separation: f64,
        depth: f64,
    },
    PoschlTeller {
        m: u32,
    },
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub x_max: f64,
    pub n: usize,
    /// Graded-mesh refinement around the well centers for needle wells.
    pub graded: bool,
    pub graded_h_fine: f64,
    pub graded_h_coarse: f64,
    pub graded_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct BranchSpec {
    pub table_lo_frac: f64,
    pub table_hi_frac: f64,
    pub table_points: usize,
    pub symmetric_points: usize,
}

#[derive(Debug, Clone)]
pub struct FdSpec {
    pub omega0: f64,
    pub omega1: f64,
    pub mass_list: Vec<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub ic_radius_fracs: Vec<f64>,
    pub ic_per_ring: usize,
    pub ic_random: usize,
    pub sample_every: usize,
}

#[derive(Debug, Clone)]
pub struct NlsSpec {
    pub dt: f64,
    pub t_final: f64,
    pub sponge_width_frac: f64,
    pub sponge_strength: f64,
    pub experiment_frac: f64,
    pub z0_abs_frac: f64,
    pub z0_phase: f64,
    pub sample_every: usize,
    pub scheme: String,
}

#[derive(Debug, Clone)]
pub struct ToolkitConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub branch: BranchSpec,
    pub fdsim: FdSpec,
    pub nls: NlsSpec,
    pub output_dir: String,
    pub seed: u64,
    pub workers: usize,
    /// Raw text the config was parsed from (hashed into the manifest).
    pub raw_text: String,
}

impl ToolkitConfig {
    pub fn parse(text: &str) -> Result<ToolkitConfig, ConfigError> {
        let raw = RawConfig::parse(text)?;
        for name in raw.sections.keys() {
            match name.as_str() {
                "grid" | "potential" | "branch" | "fdsim" | "nlssim" | "output" => {}
                other => return Err(err(0, format!("unknown section [{other}]"))),
            }
        }
        let section = |name: &'static str| Section {
            name,
            map: raw.sections.get(name),
            used: Vec::new(),
        };

        let mut s = section("grid");
        let x_max = s.f64_or("x_max_len", 30.0)?;
        let n = s.usize_or("n", 2047)?;
        let graded = s.bool_or("graded", false)?;
        let graded_h_fine = s.f64_or("graded_h_fine_len", 1e-4)?;
        let graded_h_coarse = s.f64_or("graded_h_coarse_len", 0.02)?;
        let graded_ratio = s.f64_or("graded_ratio", 1.08)?;
        s.reject_unknown()?;
        if !(x_max > 0.0) {
            return Err(err(0, "[grid] x_max_len must be positive"));
        }
        if n < 16 {
            return Err(err(0, "[grid] n must be at least 16"));
        }
        let grid = GridSpec {
            x_max,
            n,
            graded,
            graded_h_fine,
            graded_h_coarse,
            graded_ratio,
        };

        let mut s = section("potential");
        let kind = s.string_or("kind", "gaussian_double_well");
        let potential = match kind.as_str() {
            "gaussian_double_well" => {
                let sigma = s.f64_or("sigma_len", 0.5)?;
                let separation = s.f64_or("separation_len", 2.0)?;
                let depth = s.f64_or("depth_energy", -3.0)?;
                if sigma <= 0.0 {
                    return Err(err(0, "[potential] sigma_len must be positive"));
                }
                if separation < 0.0 {
                    return Err(err(0, "[potential] separation_len must be nonnegative"));
                }
                PotentialSpec::GaussianDoubleWell {
                    sigma,
                    separation,
                    depth,
                }
            }
            "poschl_teller" => {
                let m = s.u64_or("m", 2)? as u32;
                if m == 0 {
                    return Err(err(0, "[potential] m must be at least 1"));
                }
                PotentialSpec::PoschlTeller { m }
            }
            other => return Err(err(0, format!("[potential] unknown kind `{other}`"))),
        };
        s.reject_unknown()?;

        let mut s = section("branch");
        let branch = BranchSpec {
            table_lo_frac: s.f64_or("table_lo_frac", 0.3)?,
            table_hi_frac: s.f64_or("table_hi_frac", 1.12)?,
            table_points: s.usize_or("table_points", 24)?,
            symmetric_points: s.usize_or("symmetric_points", 12)?,
        };
        s.reject_unknown()?;
        if !(branch.table_lo_frac > 0.0 && branch.table_hi_frac > branch.table_lo_frac) {
            return Err(err(0, "[branch] table fractions must satisfy 0 < lo < hi"));
        }
        if branch.table_points < 3 {
            return Err(err(0, "[branch] table_points must be at least 3"));
        }

        let mut s = section("fdsim");
        let fdsim = FdSpec {
            omega0: s.f64_or("omega0_freq", 0.35)?,
            omega1: s.f64_or("omega1_freq", 0.25)?,
            mass_list: s.f64_list_or("mass_list", &[0.1, 0.2, 0.5])?,
            t_final: s.f64_or("t_final_time", 400.0)?,
            dt: s.f64_or("dt_time", 0.01)?,
            ic_radius_fracs: s.f64_list_or("ic_radius_frac_list", &[0.25, 0.5, 0.75, 0.95])?,
            ic_per_ring: s.usize_or("ic_per_ring", 4)?,
            ic_random: s.usize_or("ic_random", 0)?,
            sample_every: s.usize_or("sample_every_steps", 25)?,
        };
        s.reject_unknown()?;
        if !(fdsim.omega0 > fdsim.omega1) {
            return Err(err(0, "[fdsim] omega0_freq must exceed omega1_freq"));
        }
        if fdsim.mass_list.iter().any(|&m| m <= 0.0) {
            return Err(err(0, "[fdsim] masses must be positive"));
        }
        if !(fdsim.dt > 0.0 && fdsim.t_final > 0.0) {
            return Err(err(0, "[fdsim] dt_time and t_final_time must be positive"));
        }
        if fdsim.ic_radius_fracs.iter().any(|&r| !(0.0 < r && r < 1.0)) {
            return Err(err(0, "[fdsim] ic radii must lie strictly inside the unit disk"));
        }

        let mut s = section("nlssim");
        let nls = NlsSpec {
            dt: s.f64_or("dt_time", 0.025)?,
            t_final: s.f64_or("t_final_time", 1e5)?,
            sponge_width_frac: s.f64_or("sponge_width_frac", 0.2)?,
            sponge_strength: s.f64_or("sponge_strength", 2.0)?,
            experiment_frac: s.f64_or("experiment_frac", 1.08)?,
            z0_abs_frac: s.f64_or("z0_abs_frac", 0.22)?,
            z0_phase: s.f64_or("z0_phase_rad", 0.0)?,
            sample_every: s.usize_or("sample_every_steps", 8000)?,
            scheme: s.string_or("scheme", "sine_spectral"),
        };
        s.reject_unknown()?;
        if !(nls.dt > 0.0 && nls.t_final > 0.0) {
            return Err(err(0, "[nlssim] dt_time and t_final_time must be positive"));
        }
        if !(0.0 < nls.sponge_width_frac && nls.sponge_width_frac < 0.5) {
            return Err(err(0, "[nlssim] sponge_width_frac must lie in (0, 0.5)"));
        }
        match nls.scheme.as_str() {
            "sine_spectral" | "crank_nicolson" => {}
            other => return Err(err(0, format!("[nlssim] unknown scheme `{other}`"))),
        }

        let mut s = section("output");
        let output_dir = s.string_or("dir", "out");
        let seed = s.u64_or("seed", 7)?;
        let workers = s.usize_or("workers", 1)?;
        s.reject_unknown()?;
        if workers == 0 {
            return Err(err(0, "[output] workers must be at least 1"));
        }

        Ok(ToolkitConfig {
            grid,
            potential,
            branch,
            fdsim,
            nls,
            output_dir,
            seed,
            workers,
            raw_text: text.to_string(),
        })
    }
}

/// Sweep range expression `name=start:step:stop` (inclusive endpoints up
/// to floating tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRange {
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepRange {
    pub fn parse(expr: &str) -> Result<SweepRange, ConfigError> {
        let (name, rest) = expr
            .split_once('=')
            .ok_or_else(|| err(0, "sweep expects `name=start:step:stop`"))?;
        let name = name.trim();
        let allowed = ["separation_len", "sigma_len", "depth_energy", "mass"];
        if !allowed.contains(&name) {
            return Err(err(0, format!("unknown sweep parameter `{name}`")));
        }
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(err(0, "sweep range must be `start:step:stop`"));
        }
        let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|_| err(0, "sweep range values must be numbers"))?;
        let (start, step, stop) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(err(0, "sweep range needs step > 0 and stop >= start"));
        }
        if (stop - start) / step > 10_000.0 {
            return Err(err(0, "sweep range too long"));
        }
        let mut values = Vec::new();
        let mut k = 0usize;
        loop {
            let v = start + step * k as f64;
            if v > stop + 1e-9 * step {
                break;
            }
            values.push(v);
            k += 1;
        }
        Ok(SweepRange {
            name: name.to_string(),
            values,
        })
    }
}

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toolkit");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses() {
        let cfg = ToolkitConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(cfg.grid.n, 2047);
        assert!(matches!(
            cfg.potential,
            PotentialSpec::GaussianDoubleWell { .. }
        ));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "[grid]\nx_max_len = 10\nbogus = 3\n";
        let e = ToolkitConfig::parse(text).unwrap_err();
        assert!(e.to_string().contains("unknown key `bogus`"), "{e}");
    }

    #[test]
    fn unknown_section_rejected() {
        let e = ToolkitConfig::parse("[plotting]\nx = 1\n").unwrap_err();
        assert!(e.to_string().contains("unknown section"));
    }

    #[test]
    fn duplicate_key_rejected() {
        let e = ToolkitConfig::parse("[grid]\nn = 100\nn = 200\n").unwrap_err();
        assert!(e.to_string().contains("duplicate key"));
    }

    #[test]
    fn precondition_violations_rejected() {
        for bad in [
            "[grid]\nn = 4\n",
            "[potential]\nkind = gaussian_double_well\nsigma_len = -1\n",
            "[fdsim]\nomega0_freq = 0.1\nomega1_freq = 0.2\n",
            "[nlssim]\ndt_time = 0\n",
        ] {
            assert!(ToolkitConfig::parse(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# top comment\n\n[grid]\nx_max_len = 12.5  # inline\nn = 100\n";
        let cfg = ToolkitConfig::parse(text).unwrap();
        assert_eq!(cfg.grid.x_max, 12.5);
        assert_eq!(cfg.grid.n, 100);
    }

    #[test]
    fn sweep_range_parses_inclusive() {
        let r = SweepRange::parse("separation_len=2:0.5:5").unwrap();
        assert_eq!(r.values.len(), 7);
        assert!((r.values[6] - 5.0).abs() < 1e-12);
        assert!(SweepRange::parse("nonsense=1:1:2").is_err());
        assert!(SweepRange::parse("separation_len=5:1:2").is_err());
    }
}
