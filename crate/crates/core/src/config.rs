//! Plain-text `key = value` configuration.
//!
//! Lines hold `key = value` pairs in SI units; `#` starts a comment and
//! `[name]` opens a section. Keys before the first header are matched
//! against every section. Every key must be consumed by some reader, so a
//! typo is an error rather than a silently ignored setting.

use std::fmt::Display;
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::control::{PIController, Polarity};
use crate::plant::{NoiseParams, PlantParams};
use crate::thermal::{GridSpec, MaterialSet, SensorGeometry, VelocityProfile};
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        value: String,
        message: String,
    },
    #[error("line {line}: `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: unknown key `{key}`{}", section.as_ref().map(|s| format!(" in [{s}]")).unwrap_or_default())]
    UnknownKey {
        line: usize,
        section: Option<String>,
        key: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
struct Entry {
    section: Option<String>,
    key: String,
    value: String,
    line: usize,
    used: bool,
}

/// Parsed but not yet interpreted configuration text.
#[derive(Debug, Clone, Default)]
pub struct ConfigDoc {
    entries: Vec<Entry>,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut section = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("bad section name `{name}`"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("bad key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("missing value for `{key}`"),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key && e.section == section) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                    first: prev.line,
                });
            }
            entries.push(Entry {
                section: section.clone(),
                key: key.into(),
                value: value.into(),
                line,
                used: false,
            });
        }
        Ok(Self { entries })
    }

    /// Raw text of `key` in `section` (or in the unsectioned preamble),
    /// marking it consumed.
    pub fn take_raw(&mut self, section: &str, key: &str) -> Result<Option<(String, usize)>, ConfigError> {
        let mut hits = self
            .entries
            .iter_mut()
            .filter(|e| e.key == key && e.section.as_deref().map_or(true, |s| s == section));
        let Some(first) = hits.next() else {
            return Ok(None);
        };
        first.used = true;
        let found = (first.value.clone(), first.line);
        if let Some(second) = hits.next() {
            return Err(ConfigError::Duplicate {
                line: second.line.max(found.1),
                key: key.into(),
                first: second.line.min(found.1),
            });
        }
        Ok(Some(found))
    }

    pub fn take<V>(&mut self, section: &str, key: &str) -> Result<Option<V>, ConfigError>
    where
        V: FromStr,
        V::Err: Display,
    {
        match self.take_raw(section, key)? {
            None => Ok(None),
            Some((value, line)) => value.parse().map(Some).map_err(|e: V::Err| ConfigError::Value {
                line,
                key: key.into(),
                value,
                message: e.to_string(),
            }),
        }
    }

    fn set<V>(&mut self, section: &str, key: &str, slot: &mut V) -> Result<(), ConfigError>
    where
        V: FromStr,
        V::Err: Display,
    {
        if let Some(v) = self.take(section, key)? {
            *slot = v;
        }
        Ok(())
    }

    fn set_scalar<T: Scalar>(&mut self, section: &str, key: &str, slot: &mut T) -> Result<(), ConfigError> {
        if let Some(v) = self.take::<f64>(section, key)? {
            *slot = T::of(v);
        }
        Ok(())
    }

    /// Comma-separated list of numbers.
    pub fn take_list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((value, line)) = self.take_raw(section, key)? else {
            return Ok(None);
        };
        value
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| ConfigError::Value {
                    line,
                    key: key.into(),
                    value: value.clone(),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Fails on the first key no reader consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().find(|e| !e.used) {
            None => Ok(()),
            Some(e) => Err(ConfigError::UnknownKey {
                line: e.line,
                section: e.section,
                key: e.key,
            }),
        }
    }
}

/// Controller settings. Gains left unset are tuned from the plant's
/// small-signal loop gain at run time; an unset clamp defaults to `P_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig<T> {
    pub kp: Option<T>,
    pub ki: Option<T>,
    pub dp_max: Option<T>,
    pub anti_windup: bool,
    pub polarity: Polarity,
}

impl<T> Default for ControllerConfig<T> {
    fn default() -> Self {
        Self {
            kp: None,
            ki: None,
            dp_max: None,
            anti_windup: true,
            polarity: Polarity::Negative,
        }
    }
}

/// Physical model, plant and controller settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub geometry: SensorGeometry<T>,
    pub materials: MaterialSet<T>,
    pub grid: GridSpec<T>,
    pub velocity_profile: VelocityProfile,
    pub plant: PlantParams<T>,
    pub controller: ControllerConfig<T>,
}

impl<T: Scalar> Default for ModelConfig<T> {
    fn default() -> Self {
        let geometry = SensorGeometry::default();
        let mut plant = PlantParams::default();
        plant.thermopile.junction_count = geometry.junction_count;
        Self {
            geometry,
            materials: MaterialSet::default(),
            grid: GridSpec::default(),
            velocity_profile: VelocityProfile::Plug,
            plant,
            controller: ControllerConfig::default(),
        }
    }
}

impl<T: Scalar> ControllerConfig<T> {
    /// Controller for a plant with small-signal gain `loop_gain` (V/W),
    /// sampled every `dt` at total power `total_power`. Unset gains are
    /// tuned; an unset clamp is `total_power`.
    pub fn build(&self, loop_gain: T, dt: T, total_power: T) -> PIController<T> {
        let dp_max = self.dp_max.unwrap_or(total_power);
        let auto = PIController::tuned(loop_gain, dt, dp_max);
        let mut c = PIController::new(self.kp.unwrap_or(auto.kp), self.ki.unwrap_or(auto.ki), dp_max);
        c.anti_windup = self.anti_windup;
        c
    }
}

struct Auto<T>(Option<T>);

impl<T: FromStr> FromStr for Auto<T> {
    type Err = T::Err;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            Ok(Self(None))
        } else {
            s.parse().map(|v| Self(Some(v)))
        }
    }
}

impl<T: Scalar> ModelConfig<T> {
    /// Applies the `geometry`, `materials`, `grid`, `plant`, `noise` and
    /// `controller` sections on top of the defaults.
    pub fn from_doc(doc: &mut ConfigDoc) -> Result<Self, ConfigError> {
        let mut c = Self::default();

        let g = &mut c.geometry;
        let s = "geometry";
        doc.set_scalar(s, "channel_inner_radius", &mut g.channel_inner_radius)?;
        doc.set_scalar(s, "wall_thickness", &mut g.wall_thickness)?;
        doc.set(s, "channel_count", &mut g.channel_count)?;
        doc.set_scalar(s, "cavity_length", &mut g.cavity_length)?;
        doc.set_scalar(s, "ambient_radius", &mut g.ambient_radius)?;
        doc.set_scalar(s, "heater_up_center", &mut g.heater_up_center)?;
        doc.set_scalar(s, "heater_down_center", &mut g.heater_down_center)?;
        doc.set_scalar(s, "heater_width", &mut g.heater_width)?;
        doc.set_scalar(s, "tc_junction_up", &mut g.tc_junction_up)?;
        doc.set_scalar(s, "tc_junction_down", &mut g.tc_junction_down)?;
        doc.set(s, "junction_count", &mut g.junction_count)?;
        doc.set(s, "symmetric", &mut g.symmetric)?;

        let m = &mut c.materials;
        let s = "materials";
        doc.set_scalar(s, "k_fluid", &mut m.k_fluid)?;
        doc.set_scalar(s, "k_wall", &mut m.k_wall)?;
        doc.set_scalar(s, "k_air", &mut m.k_air)?;
        doc.set_scalar(s, "rho_cp_fluid", &mut m.rho_cp_fluid)?;
        doc.set_scalar(s, "wall_axial_conductance_boost", &mut m.wall_axial_conductance_boost)?;

        let gr = &mut c.grid;
        let s = "grid";
        doc.set(s, "n_axial", &mut gr.n_axial)?;
        doc.set(s, "radial_cells_fluid", &mut gr.radial_cells_fluid)?;
        doc.set(s, "radial_cells_wall", &mut gr.radial_cells_wall)?;
        doc.set(s, "radial_cells_air", &mut gr.radial_cells_air)?;
        doc.set_scalar(s, "radial_grading", &mut gr.radial_grading)?;
        doc.set(s, "velocity_profile", &mut c.velocity_profile)?;

        let p = &mut c.plant;
        let s = "plant";
        doc.set_scalar(s, "heater_r0", &mut p.heater_r0)?;
        doc.set_scalar(s, "tcr", &mut p.tcr)?;
        doc.set_scalar(s, "thermal_time_constant", &mut p.thermal_time_constant)?;
        doc.set_scalar(s, "asymmetry", &mut p.asymmetry)?;
        doc.set_scalar(s, "seebeck", &mut p.thermopile.seebeck)?;
        doc.set_scalar(s, "thermopile_beta", &mut p.thermopile.beta)?;
        doc.set_scalar(s, "voltmeter_noise", &mut p.thermopile.voltmeter_noise)?;
        p.thermopile.junction_count = c.geometry.junction_count;

        let n = &mut p.noise;
        let s = "noise";
        doc.set_scalar(s, "heater_drift", &mut n.heater_drift)?;
        doc.set_scalar(s, "ambient", &mut n.ambient)?;
        doc.set_scalar(s, "smu_gain_drift", &mut n.smu_gain_drift)?;
        doc.set_scalar(s, "smu_meas_noise", &mut n.smu_meas_noise)?;
        doc.set(s, "flicker_octaves", &mut n.flicker_octaves)?;

        let k = &mut c.controller;
        let s = "controller";
        if let Some(Auto(v)) = doc.take::<Auto<f64>>(s, "kp")? {
            k.kp = v.map(T::of);
        }
        if let Some(Auto(v)) = doc.take::<Auto<f64>>(s, "ki")? {
            k.ki = v.map(T::of);
        }
        if let Some(Auto(v)) = doc.take::<Auto<f64>>(s, "dp_max")? {
            k.dp_max = v.map(T::of);
        }
        doc.set(s, "anti_windup", &mut k.anti_windup)?;
        doc.set(s, "polarity", &mut k.polarity)?;

        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn Display| ConfigError::Invalid(e.to_string());
        self.geometry.validate().map_err(|e| invalid(&e))?;
        self.materials.validate().map_err(|e| invalid(&e))?;
        self.grid.validate().map_err(|e| invalid(&e))?;
        self.plant.validate().map_err(|e| invalid(&e))?;
        let k = &self.controller;
        for (name, v) in [("kp", k.kp), ("ki", k.ki)] {
            if let Some(v) = v {
                if !(v >= T::zero()) {
                    return Err(ConfigError::Invalid(format!("{name} must be non-negative")));
                }
            }
        }
        if let Some(v) = k.dp_max {
            if !(v > T::zero()) {
                return Err(ConfigError::Invalid("dp_max must be positive".into()));
            }
        }
        Ok(())
    }

    /// Writes every setting, sectioned, in a form `from_doc` reads back to
    /// an identical value.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        fn opt<T: Scalar>(v: Option<T>) -> String {
            v.map_or_else(|| "auto".into(), |v| format!("{:e}", v))
        }
        let g = &self.geometry;
        writeln!(out, "[geometry]")?;
        writeln!(out, "channel_inner_radius = {:e}", g.channel_inner_radius)?;
        writeln!(out, "wall_thickness = {:e}", g.wall_thickness)?;
        writeln!(out, "channel_count = {}", g.channel_count)?;
        writeln!(out, "cavity_length = {:e}", g.cavity_length)?;
        writeln!(out, "ambient_radius = {:e}", g.ambient_radius)?;
        writeln!(out, "heater_up_center = {:e}", g.heater_up_center)?;
        writeln!(out, "heater_down_center = {:e}", g.heater_down_center)?;
        writeln!(out, "heater_width = {:e}", g.heater_width)?;
        writeln!(out, "tc_junction_up = {:e}", g.tc_junction_up)?;
        writeln!(out, "tc_junction_down = {:e}", g.tc_junction_down)?;
        writeln!(out, "junction_count = {}", g.junction_count)?;
        writeln!(out, "symmetric = {}", g.symmetric)?;

        let m = &self.materials;
        writeln!(out, "\n[materials]")?;
        writeln!(out, "k_fluid = {:e}", m.k_fluid)?;
        writeln!(out, "k_wall = {:e}", m.k_wall)?;
        writeln!(out, "k_air = {:e}", m.k_air)?;
        writeln!(out, "rho_cp_fluid = {:e}", m.rho_cp_fluid)?;
        writeln!(out, "wall_axial_conductance_boost = {:e}", m.wall_axial_conductance_boost)?;

        let gr = &self.grid;
        writeln!(out, "\n[grid]")?;
        writeln!(out, "n_axial = {}", gr.n_axial)?;
        writeln!(out, "radial_cells_fluid = {}", gr.radial_cells_fluid)?;
        writeln!(out, "radial_cells_wall = {}", gr.radial_cells_wall)?;
        writeln!(out, "radial_cells_air = {}", gr.radial_cells_air)?;
        writeln!(out, "radial_grading = {:e}", gr.radial_grading)?;
        writeln!(out, "velocity_profile = {}", self.velocity_profile)?;

        let p = &self.plant;
        writeln!(out, "\n[plant]")?;
        writeln!(out, "heater_r0 = {:e}", p.heater_r0)?;
        writeln!(out, "tcr = {:e}", p.tcr)?;
        writeln!(out, "thermal_time_constant = {:e}", p.thermal_time_constant)?;
        writeln!(out, "asymmetry = {:e}", p.asymmetry)?;
        writeln!(out, "seebeck = {:e}", p.thermopile.seebeck)?;
        writeln!(out, "thermopile_beta = {:e}", p.thermopile.beta)?;
        writeln!(out, "voltmeter_noise = {:e}", p.thermopile.voltmeter_noise)?;

        let n: &NoiseParams<T> = &p.noise;
        writeln!(out, "\n[noise]")?;
        writeln!(out, "heater_drift = {:e}", n.heater_drift)?;
        writeln!(out, "ambient = {:e}", n.ambient)?;
        writeln!(out, "smu_gain_drift = {:e}", n.smu_gain_drift)?;
        writeln!(out, "smu_meas_noise = {:e}", n.smu_meas_noise)?;
        writeln!(out, "flicker_octaves = {}", n.flicker_octaves)?;

        let k = &self.controller;
        writeln!(out, "\n[controller]")?;
        writeln!(out, "kp = {}", opt(k.kp))?;
        writeln!(out, "ki = {}", opt(k.ki))?;
        writeln!(out, "dp_max = {}", opt(k.dp_max))?;
        writeln!(out, "anti_windup = {}", k.anti_windup)?;
        writeln!(out, "polarity = {}", k.polarity)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<ModelConfig<f64>, ConfigError> {
        let mut doc = ConfigDoc::parse(text)?;
        let c = ModelConfig::from_doc(&mut doc)?;
        doc.finish()?;
        Ok(c)
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(load("# nothing\n\n").unwrap(), ModelConfig::default());
    }

    #[test]
    fn sectioned_and_bare_keys() {
        let c = load("k_wall = 2.5\n[geometry]\nheater_width = 8e-5 # trailing\n[controller]\nkp = 0.1\n").unwrap();
        assert_eq!(c.materials.k_wall, 2.5);
        assert_eq!(c.geometry.heater_width, 8e-5);
        assert_eq!(c.controller.kp, Some(0.1));
        assert_eq!(c.controller.ki, None);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = load("[materials]\nk_wal = 3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                section: Some("materials".into()),
                key: "k_wal".into()
            }
        );
        // A real key in the wrong section is also unknown.
        assert!(matches!(load("[grid]\nk_wall = 3\n"), Err(ConfigError::UnknownKey { line: 2, .. })));
    }

    #[test]
    fn bad_values_and_syntax() {
        assert!(matches!(load("[grid]\nn_axial = many\n"), Err(ConfigError::Value { line: 2, .. })));
        assert!(matches!(load("n_axial\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(load("[grid\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(
            load("[grid]\nn_axial = 10\nn_axial = 12\n"),
            Err(ConfigError::Duplicate { line: 3, first: 2, .. })
        ));
        assert!(matches!(load("[materials]\nk_air = -1\n"), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn resolved_round_trip() {
        let mut c = load("[noise]\nambient = 0.123456789012345\n[controller]\nki = 3.3e-2\npolarity = positive\n").unwrap();
        c.geometry.heater_width = 1.0 / 3.0 * 1e-4;
        let mut text = Vec::new();
        c.write(&mut text).unwrap();
        let back = load(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(back, c);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn lists() {
        let mut doc = ConfigDoc::parse("[experiment]\nflows_ul_per_min = 0, 0.1,0.2\n").unwrap();
        assert_eq!(doc.take_list("experiment", "flows_ul_per_min").unwrap(), Some(vec![0.0, 0.1, 0.2]));
        doc.finish().unwrap();
    }
}
