//! Experiment configuration: a flat `key = value` text format whose keys
//! match the field names below. Lists are comma separated; `#` starts a
//! comment line; generators are octal. Missing keys take the defaults,
//! so the minimal useful file is a single `ebn0_grid` line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use mprx_core::gmsg::Constellation;
use mprx_core::system::SystemConfig;
use mprx_core::txchain::CodeConfig;

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReceiverKind {
    Proposed,
    Mfb,
    DirectMf,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] =
        [ReceiverKind::Proposed, ReceiverKind::Mfb, ReceiverKind::DirectMf];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReceiverKind::Proposed => "proposed",
            ReceiverKind::Mfb => "mfb",
            ReceiverKind::DirectMf => "direct_mf",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReceiverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(ReceiverKind::Proposed),
            "mfb" => Ok(ReceiverKind::Mfb),
            "direct_mf" => Ok(ReceiverKind::DirectMf),
            other => Err(format!("unknown receiver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn constellation(&self) -> Constellation {
        match self {
            Modulation::Qpsk => Constellation::qpsk(),
            Modulation::Qam16 => Constellation::qam16(),
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
        }
    }
}

impl FromStr for Modulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qpsk" => Ok(Modulation::Qpsk),
            "qam16" => Ok(Modulation::Qam16),
            other => Err(format!("unknown modulation '{other}'")),
        }
    }
}

/// Declarative description of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub m_antennas: usize,
    pub n_users: usize,
    pub k_subcarriers: usize,
    pub kp_pilots: usize,
    pub l_taps: usize,
    pub modulation: Modulation,
    pub code_constraint_length: usize,
    pub code_generators: [u32; 2],
    pub iterations: usize,
    pub ebn0_grid: Vec<f64>,
    pub frames_per_point: usize,
    pub master_seed: u64,
    pub receivers: Vec<ReceiverKind>,
    pub damping: Option<f64>,
}

impl Default for SimConfig {
    /// The desk-scale defaults: a sweep that exercises every message path
    /// in minutes.
    fn default() -> Self {
        Self {
            m_antennas: 4,
            n_users: 2,
            k_subcarriers: 256,
            kp_pilots: 16,
            l_taps: 8,
            modulation: Modulation::Qpsk,
            code_constraint_length: 7,
            code_generators: [0o133, 0o171],
            iterations: 15,
            ebn0_grid: (0..=8).map(|i| 2.0 * i as f64).collect(),
            frames_per_point: 100,
            master_seed: 1,
            receivers: ReceiverKind::ALL.to_vec(),
            damping: None,
        }
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut cfg = SimConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SimError::ConfigParse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let fail = |message: String| SimError::ConfigParse {
                line: line_no,
                message,
            };
            match key {
                "m_antennas" => cfg.m_antennas = parse_num(key, value).map_err(fail)?,
                "n_users" => cfg.n_users = parse_num(key, value).map_err(fail)?,
                "k_subcarriers" => cfg.k_subcarriers = parse_num(key, value).map_err(fail)?,
                "kp_pilots" => cfg.kp_pilots = parse_num(key, value).map_err(fail)?,
                "l_taps" => cfg.l_taps = parse_num(key, value).map_err(fail)?,
                "modulation" => cfg.modulation = value.parse().map_err(fail)?,
                "code_constraint_length" => {
                    cfg.code_constraint_length = parse_num(key, value).map_err(fail)?
                }
                "code_generators" => {
                    let gens: Vec<u32> = value
                        .split(',')
                        .map(|g| u32::from_str_radix(g.trim(), 8))
                        .collect::<Result<_, _>>()
                        .map_err(|e| fail(format!("code_generators: {e}")))?;
                    if gens.len() != 2 {
                        return Err(fail("code_generators needs exactly two octal values".into()));
                    }
                    cfg.code_generators = [gens[0], gens[1]];
                }
                "iterations" => cfg.iterations = parse_num(key, value).map_err(fail)?,
                "ebn0_grid" => {
                    cfg.ebn0_grid = value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| fail(format!("ebn0_grid: {e}")))?;
                }
                "frames_per_point" => cfg.frames_per_point = parse_num(key, value).map_err(fail)?,
                "master_seed" => cfg.master_seed = parse_num(key, value).map_err(fail)?,
                "receivers" => {
                    cfg.receivers = value
                        .split(',')
                        .map(|v| v.trim().parse::<ReceiverKind>())
                        .collect::<Result<_, _>>()
                        .map_err(fail)?;
                }
                "damping" => {
                    cfg.damping = if value.is_empty() {
                        None
                    } else {
                        Some(value.parse::<f64>().map_err(|e| fail(format!("damping: {e}")))?)
                    };
                }
                other => return Err(fail(format!("unknown key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut violations = Vec::new();
        if self.m_antennas == 0 {
            violations.push("m_antennas must be >= 1".to_string());
        }
        if self.n_users == 0 {
            violations.push("n_users must be >= 1".to_string());
        }
        if self.kp_pilots == 0 {
            violations.push("kp_pilots must be >= 1".to_string());
        }
        if self.n_users * self.kp_pilots > self.k_subcarriers {
            violations.push(format!(
                "n_users * kp_pilots = {} exceeds k_subcarriers = {}",
                self.n_users * self.kp_pilots,
                self.k_subcarriers
            ));
        } else if self.n_users > 0
            && self.kp_pilots > 0
            && !self.k_subcarriers.is_multiple_of(self.n_users * self.kp_pilots)
        {
            violations.push(format!(
                "k_subcarriers = {} must be divisible by n_users * kp_pilots = {}",
                self.k_subcarriers,
                self.n_users * self.kp_pilots
            ));
        }
        if self.l_taps == 0 || self.l_taps > self.k_subcarriers {
            violations.push(format!("l_taps must lie in 1..={}", self.k_subcarriers));
        }
        if self.iterations == 0 {
            violations.push("iterations must be >= 1".to_string());
        }
        if self.frames_per_point == 0 {
            violations.push("frames_per_point must be >= 1".to_string());
        }
        if self.ebn0_grid.is_empty() {
            violations.push("ebn0_grid must not be empty".to_string());
        }
        if self.receivers.is_empty() {
            violations.push("receivers must not be empty".to_string());
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                violations.push("damping must lie in (0, 1]".to_string());
            }
        }
        if let Err(e) = CodeConfig::new(self.code_constraint_length, self.code_generators) {
            violations.push(format!("code: {e}"));
        }
        if violations.is_empty() {
            // Anything the structural checks above missed (e.g. a coded
            // block too short to terminate) surfaces here.
            if let Err(e) = self.system_config() {
                violations.push(e.to_string());
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(SimError::ConfigInvalid(violations))
        }
    }

    /// Canonical serialization; `parse` of the output reproduces `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("m_antennas = {}\n", self.m_antennas));
        out.push_str(&format!("n_users = {}\n", self.n_users));
        out.push_str(&format!("k_subcarriers = {}\n", self.k_subcarriers));
        out.push_str(&format!("kp_pilots = {}\n", self.kp_pilots));
        out.push_str(&format!("l_taps = {}\n", self.l_taps));
        out.push_str(&format!("modulation = {}\n", self.modulation.as_str()));
        out.push_str(&format!(
            "code_constraint_length = {}\n",
            self.code_constraint_length
        ));
        out.push_str(&format!(
            "code_generators = {:o},{:o}\n",
            self.code_generators[0], self.code_generators[1]
        ));
        out.push_str(&format!("iterations = {}\n", self.iterations));
        let grid: Vec<String> = self.ebn0_grid.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("ebn0_grid = {}\n", grid.join(",")));
        out.push_str(&format!("frames_per_point = {}\n", self.frames_per_point));
        out.push_str(&format!("master_seed = {}\n", self.master_seed));
        let rx: Vec<&str> = self.receivers.iter().map(|r| r.as_str()).collect();
        out.push_str(&format!("receivers = {}\n", rx.join(",")));
        if let Some(d) = self.damping {
            out.push_str(&format!("damping = {d}\n"));
        }
        out
    }

    /// Noise precision for an Eb/N0 point: unit symbol energy, so
    /// `lambda = rate * bits_per_symbol * 10^(ebn0/10)` with rate 1/2.
    pub fn lambda_for(&self, ebn0_db: f64) -> f64 {
        0.5 * self.modulation.bits_per_symbol() as f64 * 10f64.powf(ebn0_db / 10.0)
    }

    pub fn system_config(&self) -> Result<SystemConfig, SimError> {
        SystemConfig::new(
            self.m_antennas,
            self.n_users,
            self.k_subcarriers,
            self.kp_pilots,
            self.l_taps,
            self.modulation.constellation(),
            CodeConfig::new(self.code_constraint_length, self.code_generators)
                .map_err(|e| SimError::ConfigInvalid(vec![format!("code: {e}")]))?,
            self.iterations,
            self.damping,
            self.master_seed,
        )
        .map_err(|e| SimError::ConfigInvalid(vec![e.to_string()]))
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{key}: {e}"))
}
