//! Scenario files: the text format the `wicklab` binary runs from.
//!
//! A scenario is a flat list of `section.key = value` assignments, one per
//! line. Blank lines are skipped and everything after a `#` is a comment.
//! Keys may appear in any order but at most once. Example:
//!
//! ```text
//! run.kind = scft
//! grid.n_points = 512
//! grid.length = 30
//! potential.kind = harmonic
//! potential.omega = 1
//! contour.beta = 20
//! contour.n_steps = 20000
//! ```
//!
//! Parsing collects every problem it can find (syntax errors, unknown keys,
//! out-of-range values, missing required keys) instead of stopping at the
//! first one, so `wicklab validate` reports the whole list in one pass.

use std::fmt;
use std::path::PathBuf;

/// One problem found while parsing or validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {}: {}", n, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// What the run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Scft,
    GroundState,
    FiniteTemperature,
    Tdks,
    WeakValue,
    WickCheck,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Scft => "scft",
            Self::GroundState => "ground-state",
            Self::FiniteTemperature => "finite-temperature",
            Self::Tdks => "tdks",
            Self::WeakValue => "weak-value",
            Self::WickCheck => "wick-check",
        }
    }
}

/// How thermal occupancies are assigned in a finite-temperature run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyKind {
    FermiDirac,
    Tilde,
}

impl OccupancyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FermiDirac => "fermi-dirac",
            Self::Tilde => "tilde",
        }
    }
}

/// Whether real-time propagation holds the field fixed or rebuilds it from
/// the instantaneous density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldMode {
    Fixed,
    SelfConsistent,
}

impl FieldMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::SelfConsistent => "self-consistent",
        }
    }
}

/// External potential selection.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Harmonic { omega: f64 },
    BoxCosine { depth: f64, wavenumber: f64 },
    Uniform { value: f64 },
}

/// Recipe for a single-particle state on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SeedSpec {
    /// Normalized Gaussian packet `exp(-(r-center)^2 / (4 width^2) + i momentum r)`.
    Gaussian { center: f64, width: f64, momentum: f64 },
    /// Eigenstate of the external potential, counted from the bottom.
    Eigenstate(usize),
    /// Flat state `1 / sqrt(length)`.
    Uniform,
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { center, width, momentum } => {
                write!(f, "gaussian({:?},{:?},{:?})", center, width, momentum)
            }
            Self::Eigenstate(k) => write!(f, "eigenstate({})", k),
            Self::Uniform => write!(f, "uniform"),
        }
    }
}

/// A fully parsed and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub run_kind: RunKind,
    pub n_particles: f64,
    pub n_states: usize,
    pub spin_degeneracy: f64,
    pub occupancy: OccupancyKind,
    pub grid_points: usize,
    pub grid_length: f64,
    pub hbar: f64,
    pub mass: f64,
    pub k_b: f64,
    pub potential: PotentialSpec,
    pub contact: f64,
    pub hartree_strength: f64,
    pub hartree_mode: Option<u32>,
    pub beta: Option<f64>,
    pub contour_steps: Option<usize>,
    pub contour_ds: Option<f64>,
    pub beta_ladder: Option<Vec<f64>>,
    pub mixing_alpha: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub t_final: Option<f64>,
    pub time_steps: Option<usize>,
    pub field_mode: FieldMode,
    pub initial: Vec<SeedSpec>,
    pub eval_t: Option<f64>,
    pub sample_stride: usize,
    pub selection_pre: Option<SeedSpec>,
    pub selection_post: Option<SeedSpec>,
    pub output_directory: Option<PathBuf>,
    pub output_csv: bool,
    pub output_json: bool,
}

/// Accumulates raw key values before defaults and cross-field checks.
#[derive(Default)]
struct Builder {
    run_kind: Option<RunKind>,
    n_particles: Option<f64>,
    n_states: Option<usize>,
    spin_degeneracy: Option<f64>,
    occupancy: Option<OccupancyKind>,
    grid_points: Option<usize>,
    grid_length: Option<f64>,
    hbar: Option<f64>,
    mass: Option<f64>,
    k_b: Option<f64>,
    potential_kind: Option<&'static str>,
    omega: Option<f64>,
    depth: Option<f64>,
    wavenumber: Option<f64>,
    value: Option<f64>,
    contact: Option<f64>,
    hartree_strength: Option<f64>,
    hartree_mode: Option<u32>,
    beta: Option<f64>,
    contour_steps: Option<usize>,
    contour_ds: Option<f64>,
    beta_ladder: Option<Vec<f64>>,
    mixing_alpha: Option<f64>,
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    t_final: Option<f64>,
    time_steps: Option<usize>,
    field_mode: Option<FieldMode>,
    initial: Option<Vec<SeedSpec>>,
    eval_t: Option<f64>,
    sample_stride: Option<usize>,
    selection_pre: Option<SeedSpec>,
    selection_post: Option<SeedSpec>,
    output_directory: Option<PathBuf>,
    formats: Option<(bool, bool)>,
}

impl Scenario {
    /// Parse scenario text, reporting every problem found. The scenario is
    /// returned only when the list of diagnostics would be empty.
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut errors = Vec::new();
        let mut builder = Builder::default();
        let mut seen: Vec<String> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key_part, value_part)) = line.split_once('=') else {
                errors.push(Diagnostic::at(line_no, format!("expected 'section.key = value', got '{line}'")));
                continue;
            };
            let key = key_part.trim();
            let value = value_part.trim();
            if value.is_empty() {
                errors.push(Diagnostic::at(line_no, format!("'{key}' has an empty value")));
                continue;
            }
            if !key.split_once('.').is_some_and(|(s, k)| !s.is_empty() && !k.is_empty()) {
                errors.push(Diagnostic::at(line_no, format!("key '{key}' is not of the form section.key")));
                continue;
            }
            if seen.iter().any(|k| k == key) {
                errors.push(Diagnostic::at(line_no, format!("'{key}' is set more than once")));
                continue;
            }
            seen.push(key.to_string());
            if let Err(message) = builder.assign(key, value) {
                errors.push(Diagnostic::at(line_no, message));
            }
        }

        let scenario = builder.finish(&mut errors);
        match scenario {
            Some(s) if errors.is_empty() => Ok(s),
            _ => Err(errors),
        }
    }

    /// Render the scenario back into the text grammar, defaults included,
    /// keys in a fixed order. Parsing the result reproduces the scenario.
    pub fn canonical(&self) -> String {
        use fmt::Write;
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "run.kind = {}", self.run_kind.as_str());
        let _ = writeln!(w, "run.n_particles = {:?}", self.n_particles);
        let _ = writeln!(w, "run.n_states = {}", self.n_states);
        let _ = writeln!(w, "run.spin_degeneracy = {:?}", self.spin_degeneracy);
        let _ = writeln!(w, "run.occupancy = {}", self.occupancy.as_str());
        let _ = writeln!(w, "grid.n_points = {}", self.grid_points);
        let _ = writeln!(w, "grid.length = {:?}", self.grid_length);
        let _ = writeln!(w, "units.hbar = {:?}", self.hbar);
        let _ = writeln!(w, "units.mass = {:?}", self.mass);
        let _ = writeln!(w, "units.k_b = {:?}", self.k_b);
        match &self.potential {
            PotentialSpec::Harmonic { omega } => {
                let _ = writeln!(w, "potential.kind = harmonic");
                let _ = writeln!(w, "potential.omega = {:?}", omega);
            }
            PotentialSpec::BoxCosine { depth, wavenumber } => {
                let _ = writeln!(w, "potential.kind = box-cosine");
                let _ = writeln!(w, "potential.depth = {:?}", depth);
                let _ = writeln!(w, "potential.wavenumber = {:?}", wavenumber);
            }
            PotentialSpec::Uniform { value } => {
                let _ = writeln!(w, "potential.kind = uniform");
                let _ = writeln!(w, "potential.value = {:?}", value);
            }
        }
        let _ = writeln!(w, "functional.contact = {:?}", self.contact);
        let _ = writeln!(w, "functional.hartree_strength = {:?}", self.hartree_strength);
        if let Some(m) = self.hartree_mode {
            let _ = writeln!(w, "functional.hartree_kernel = cosine({m})");
        }
        if let Some(beta) = self.beta {
            let _ = writeln!(w, "contour.beta = {:?}", beta);
        }
        if let Some(n) = self.contour_steps {
            let _ = writeln!(w, "contour.n_steps = {}", n);
        }
        if let Some(ds) = self.contour_ds {
            let _ = writeln!(w, "contour.ds = {:?}", ds);
        }
        if let Some(ladder) = &self.beta_ladder {
            let rungs: Vec<String> = ladder.iter().map(|b| format!("{:?}", b)).collect();
            let _ = writeln!(w, "contour.beta_ladder = {}", rungs.join(","));
        }
        let _ = writeln!(w, "scft.mixing_alpha = {:?}", self.mixing_alpha);
        let _ = writeln!(w, "scft.tolerance = {:?}", self.tolerance);
        let _ = writeln!(w, "scft.max_iterations = {}", self.max_iterations);
        if let Some(t) = self.t_final {
            let _ = writeln!(w, "time.t_final = {:?}", t);
        }
        if let Some(n) = self.time_steps {
            let _ = writeln!(w, "time.n_steps = {}", n);
        }
        let _ = writeln!(w, "time.mode = {}", self.field_mode.as_str());
        if !self.initial.is_empty() {
            let seeds: Vec<String> = self.initial.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(w, "time.initial = {}", seeds.join("; "));
        }
        if let Some(t) = self.eval_t {
            let _ = writeln!(w, "time.eval_t = {:?}", t);
        }
        let _ = writeln!(w, "time.sample_stride = {}", self.sample_stride);
        if let Some(pre) = &self.selection_pre {
            let _ = writeln!(w, "selection.pre = {pre}");
        }
        if let Some(post) = &self.selection_post {
            let _ = writeln!(w, "selection.post = {post}");
        }
        if let Some(dir) = &self.output_directory {
            let _ = writeln!(w, "output.directory = {}", dir.display());
        }
        let mut formats = Vec::new();
        if self.output_csv {
            formats.push("csv");
        }
        if self.output_json {
            formats.push("json");
        }
        let _ = writeln!(w, "output.formats = {}", formats.join(","));
        out
    }
}

fn parse_f64(value: &str, key: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{key}' expects a finite number, got '{value}'"))
}

fn parse_positive(value: &str, key: &str) -> Result<f64, String> {
    let v = parse_f64(value, key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("'{key}' must be positive, got '{value}'"))
    }
}

fn parse_usize(value: &str, key: &str) -> Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("'{key}' expects a non-negative integer, got '{value}'"))
}

fn parse_seed(value: &str, key: &str) -> Result<SeedSpec, String> {
    let value = value.trim();
    if value == "uniform" {
        return Ok(SeedSpec::Uniform);
    }
    if let Some(inner) = value.strip_prefix("eigenstate(").and_then(|r| r.strip_suffix(')')) {
        let index = inner
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("'{key}': eigenstate index must be a non-negative integer, got '{inner}'"))?;
        return Ok(SeedSpec::Eigenstate(index));
    }
    if let Some(inner) = value.strip_prefix("gaussian(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("'{key}': gaussian takes (center,width,momentum), got '{value}'"));
        }
        let center = parse_f64(parts[0].trim(), key)?;
        let width = parse_f64(parts[1].trim(), key)?;
        if width <= 0.0 {
            return Err(format!("'{key}': gaussian width must be positive, got '{}'", parts[1].trim()));
        }
        let momentum = parse_f64(parts[2].trim(), key)?;
        return Ok(SeedSpec::Gaussian { center, width, momentum });
    }
    Err(format!(
        "'{key}': expected gaussian(center,width,momentum), eigenstate(index), or uniform, got '{value}'"
    ))
}

impl Builder {
    fn assign(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "run.kind" => {
                self.run_kind = Some(match value {
                    "scft" => RunKind::Scft,
                    "ground-state" => RunKind::GroundState,
                    "finite-temperature" => RunKind::FiniteTemperature,
                    "tdks" => RunKind::Tdks,
                    "weak-value" => RunKind::WeakValue,
                    "wick-check" => RunKind::WickCheck,
                    _ => {
                        return Err(format!(
                            "unknown run kind '{value}' (expected scft, ground-state, \
                             finite-temperature, tdks, weak-value, or wick-check)"
                        ))
                    }
                });
            }
            "run.n_particles" => self.n_particles = Some(parse_positive(value, key)?),
            "run.n_states" => {
                let n = parse_usize(value, key)?;
                if n == 0 {
                    return Err("'run.n_states' must be at least 1".into());
                }
                self.n_states = Some(n);
            }
            "run.spin_degeneracy" => self.spin_degeneracy = Some(parse_positive(value, key)?),
            "run.occupancy" => {
                self.occupancy = Some(match value {
                    "fermi-dirac" => OccupancyKind::FermiDirac,
                    "tilde" => OccupancyKind::Tilde,
                    _ => return Err(format!("unknown occupancy '{value}' (expected fermi-dirac or tilde)")),
                });
            }
            "grid.n_points" => self.grid_points = Some(parse_usize(value, key)?),
            "grid.length" => self.grid_length = Some(parse_positive(value, key)?),
            "units.hbar" => self.hbar = Some(parse_positive(value, key)?),
            "units.mass" => self.mass = Some(parse_positive(value, key)?),
            "units.k_b" => self.k_b = Some(parse_positive(value, key)?),
            "potential.kind" => {
                self.potential_kind = Some(match value {
                    "harmonic" => "harmonic",
                    "box-cosine" => "box-cosine",
                    "uniform" => "uniform",
                    _ => {
                        return Err(format!(
                            "unknown potential kind '{value}' (expected harmonic, box-cosine, or uniform)"
                        ))
                    }
                });
            }
            "potential.omega" => self.omega = Some(parse_positive(value, key)?),
            "potential.depth" => self.depth = Some(parse_f64(value, key)?),
            "potential.wavenumber" => {
                let v = parse_positive(value, key)?;
                if (v - v.round()).abs() > 1e-9 {
                    return Err(format!("'{key}' must be a whole number of periods, got '{value}'"));
                }
                self.wavenumber = Some(v);
            }
            "potential.value" => self.value = Some(parse_f64(value, key)?),
            "functional.contact" => {
                let v = parse_f64(value, key)?;
                if v < 0.0 {
                    return Err(format!("'{key}' must be non-negative, got '{value}'"));
                }
                self.contact = Some(v);
            }
            "functional.hartree_strength" => self.hartree_strength = Some(parse_f64(value, key)?),
            "functional.hartree_kernel" => {
                let inner = value
                    .strip_prefix("cosine(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("'{key}' expects cosine(mode), got '{value}'"))?;
                let mode = inner
                    .trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|m| *m >= 1)
                    .ok_or_else(|| format!("'{key}': mode must be a positive integer, got '{inner}'"))?;
                self.hartree_mode = Some(mode);
            }
            "contour.beta" => self.beta = Some(parse_positive(value, key)?),
            "contour.n_steps" => {
                let n = parse_usize(value, key)?;
                if n < 2 || n % 2 != 0 {
                    return Err(format!("'{key}' must be an even number of steps of at least 2, got '{value}'"));
                }
                self.contour_steps = Some(n);
            }
            "contour.ds" => self.contour_ds = Some(parse_positive(value, key)?),
            "contour.beta_ladder" => {
                let mut rungs = Vec::new();
                for part in value.split(',') {
                    rungs.push(parse_positive(part.trim(), key)?);
                }
                if rungs.len() < 2 {
                    return Err(format!("'{key}' needs at least two rungs, got '{value}'"));
                }
                if rungs.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(format!("'{key}' must be strictly ascending, got '{value}'"));
                }
                self.beta_ladder = Some(rungs);
            }
            "scft.mixing_alpha" => {
                let v = parse_positive(value, key)?;
                if v > 1.0 {
                    return Err(format!("'{key}' must lie in (0, 1], got '{value}'"));
                }
                self.mixing_alpha = Some(v);
            }
            "scft.tolerance" => {
                let v = parse_positive(value, key)?;
                if v < 1e-14 {
                    return Err(format!("'{key}' below 1e-14 is not resolvable, got '{value}'"));
                }
                self.tolerance = Some(v);
            }
            "scft.max_iterations" => {
                let n = parse_usize(value, key)?;
                if n == 0 {
                    return Err("'scft.max_iterations' must be at least 1".into());
                }
                self.max_iterations = Some(n);
            }
            "time.t_final" => self.t_final = Some(parse_positive(value, key)?),
            "time.n_steps" => {
                let n = parse_usize(value, key)?;
                if n == 0 {
                    return Err("'time.n_steps' must be at least 1".into());
                }
                self.time_steps = Some(n);
            }
            "time.mode" => {
                self.field_mode = Some(match value {
                    "fixed" => FieldMode::Fixed,
                    "self-consistent" => FieldMode::SelfConsistent,
                    _ => return Err(format!("unknown time mode '{value}' (expected fixed or self-consistent)")),
                });
            }
            "time.initial" => {
                let mut seeds = Vec::new();
                for part in value.split(';') {
                    seeds.push(parse_seed(part, key)?);
                }
                self.initial = Some(seeds);
            }
            "time.eval_t" => {
                let v = parse_f64(value, key)?;
                if v < 0.0 {
                    return Err(format!("'{key}' must be non-negative, got '{value}'"));
                }
                self.eval_t = Some(v);
            }
            "time.sample_stride" => {
                let n = parse_usize(value, key)?;
                if n == 0 {
                    return Err("'time.sample_stride' must be at least 1".into());
                }
                self.sample_stride = Some(n);
            }
            "selection.pre" => self.selection_pre = Some(parse_seed(value, key)?),
            "selection.post" => self.selection_post = Some(parse_seed(value, key)?),
            "output.directory" => self.output_directory = Some(PathBuf::from(value)),
            "output.formats" => {
                let mut csv = false;
                let mut json = false;
                for part in value.split(',') {
                    match part.trim() {
                        "csv" => csv = true,
                        "json" => json = true,
                        other => return Err(format!("unknown output format '{other}' (expected csv or json)")),
                    }
                }
                self.formats = Some((csv, json));
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    fn finish(self, errors: &mut Vec<Diagnostic>) -> Option<Scenario> {
        let mut require = |ok: bool, message: &str| {
            if !ok {
                errors.push(Diagnostic::global(message.to_string()));
            }
        };

        require(self.run_kind.is_some(), "run.kind is required");
        require(self.grid_points.is_some(), "grid.n_points is required");
        require(self.grid_length.is_some(), "grid.length is required");
        require(self.potential_kind.is_some(), "potential.kind is required");

        if let Some(n) = self.grid_points {
            if n < 8 || !n.is_power_of_two() {
                errors.push(Diagnostic::global(format!(
                    "grid.n_points must be a power of two of at least 8, got {n}"
                )));
            }
        }

        let potential = match self.potential_kind {
            Some("harmonic") => match self.omega {
                Some(omega) => Some(PotentialSpec::Harmonic { omega }),
                None => {
                    errors.push(Diagnostic::global("potential.omega is required for a harmonic potential"));
                    None
                }
            },
            Some("box-cosine") => match (self.depth, self.wavenumber) {
                (Some(depth), Some(wavenumber)) => Some(PotentialSpec::BoxCosine { depth, wavenumber }),
                _ => {
                    errors.push(Diagnostic::global(
                        "potential.depth and potential.wavenumber are required for a box-cosine potential",
                    ));
                    None
                }
            },
            Some("uniform") => match self.value {
                Some(value) => Some(PotentialSpec::Uniform { value }),
                None => {
                    errors.push(Diagnostic::global("potential.value is required for a uniform potential"));
                    None
                }
            },
            _ => None,
        };

        let hartree_strength = self.hartree_strength.unwrap_or(0.0);
        if hartree_strength != 0.0 && self.hartree_mode.is_none() {
            errors.push(Diagnostic::global(
                "functional.hartree_kernel is required when functional.hartree_strength is nonzero",
            ));
        }

        if let Some(kind) = self.run_kind {
            let mut need = |ok: bool, message: String| {
                if !ok {
                    errors.push(Diagnostic::global(message));
                }
            };
            let kind_name = kind.as_str();
            match kind {
                RunKind::Scft | RunKind::WickCheck => {
                    need(self.beta.is_some(), format!("contour.beta is required for a {kind_name} run"));
                    need(
                        self.contour_steps.is_some(),
                        format!("contour.n_steps is required for a {kind_name} run"),
                    );
                }
                RunKind::GroundState => {
                    need(
                        self.beta_ladder.is_some(),
                        "contour.beta_ladder is required for a ground-state run".into(),
                    );
                    need(self.contour_ds.is_some(), "contour.ds is required for a ground-state run".into());
                }
                RunKind::FiniteTemperature => {
                    need(self.beta.is_some(), "contour.beta is required for a finite-temperature run".into());
                    if self.occupancy == Some(OccupancyKind::Tilde) && self.n_states.unwrap_or(16) < 2 {
                        need(false, "tilde occupancies need run.n_states of at least 2".into());
                    }
                }
                RunKind::Tdks => {
                    need(self.t_final.is_some(), "time.t_final is required for a tdks run".into());
                    need(self.time_steps.is_some(), "time.n_steps is required for a tdks run".into());
                    need(
                        self.initial.as_ref().is_some_and(|s| !s.is_empty()),
                        "time.initial is required for a tdks run".into(),
                    );
                }
                RunKind::WeakValue => {
                    need(self.t_final.is_some(), "time.t_final is required for a weak-value run".into());
                    need(self.time_steps.is_some(), "time.n_steps is required for a weak-value run".into());
                    need(self.eval_t.is_some(), "time.eval_t is required for a weak-value run".into());
                    need(self.selection_pre.is_some(), "selection.pre is required for a weak-value run".into());
                    need(self.selection_post.is_some(), "selection.post is required for a weak-value run".into());
                    if let (Some(eval_t), Some(t_final)) = (self.eval_t, self.t_final) {
                        need(
                            eval_t <= t_final,
                            format!("time.eval_t ({eval_t}) lies outside the contour [0, {t_final}]"),
                        );
                    }
                }
            }
        }

        let (output_csv, output_json) = self.formats.unwrap_or((true, true));
        if !output_csv && !output_json {
            errors.push(Diagnostic::global("output.formats must name at least one format"));
        }

        Some(Scenario {
            run_kind: self.run_kind?,
            n_particles: self.n_particles.unwrap_or(1.0),
            n_states: self.n_states.unwrap_or(16),
            spin_degeneracy: self.spin_degeneracy.unwrap_or(1.0),
            occupancy: self.occupancy.unwrap_or(OccupancyKind::FermiDirac),
            grid_points: self.grid_points?,
            grid_length: self.grid_length?,
            hbar: self.hbar.unwrap_or(1.0),
            mass: self.mass.unwrap_or(1.0),
            k_b: self.k_b.unwrap_or(1.0),
            potential: potential?,
            contact: self.contact.unwrap_or(0.0),
            hartree_strength,
            hartree_mode: self.hartree_mode,
            beta: self.beta,
            contour_steps: self.contour_steps,
            contour_ds: self.contour_ds,
            beta_ladder: self.beta_ladder,
            mixing_alpha: self.mixing_alpha.unwrap_or(0.5),
            tolerance: self.tolerance.unwrap_or(1e-9),
            max_iterations: self.max_iterations.unwrap_or(200),
            t_final: self.t_final,
            time_steps: self.time_steps,
            field_mode: self.field_mode.unwrap_or(FieldMode::Fixed),
            initial: self.initial.unwrap_or_default(),
            eval_t: self.eval_t,
            sample_stride: self.sample_stride.unwrap_or(1),
            selection_pre: self.selection_pre,
            selection_post: self.selection_post,
            output_directory: self.output_directory,
            output_csv,
            output_json,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_SCFT: &str = "\
        run.kind = scft\n\
        grid.n_points = 64\n\
        grid.length = 10\n\
        potential.kind = harmonic\n\
        potential.omega = 1\n\
        contour.beta = 4\n\
        contour.n_steps = 400\n";

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::parse(MINIMAL_SCFT).unwrap();
        assert_eq!(s.run_kind, RunKind::Scft);
        assert_eq!(s.grid_points, 64);
        assert_eq!(s.beta, Some(4.0));
        assert_eq!(s.n_particles, 1.0);
        assert_eq!(s.mixing_alpha, 0.5);
        assert!(s.output_csv && s.output_json);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{MINIMAL_SCFT}\nscft.tolerance = 1e-10 # trailing note\n");
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.tolerance, 1e-10);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "run.kind = scft\nnonsense line\n";
        let errors = Scenario::parse(text).unwrap_err();
        assert!(errors.iter().any(|d| d.line == Some(2)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL_SCFT}grid.spacing = 0.1\n");
        let errors = Scenario::parse(&text).unwrap_err();
        assert!(errors.iter().any(|d| d.message.contains("unknown key 'grid.spacing'")));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = format!("{MINIMAL_SCFT}grid.length = 12\n");
        let errors = Scenario::parse(&text).unwrap_err();
        assert!(errors.iter().any(|d| d.message.contains("more than once")));
    }

    #[test]
    fn all_problems_are_reported_together() {
        let text = "\
            run.kind = tdks\n\
            grid.n_points = 100\n\
            grid.length = -3\n\
            potential.kind = harmonic\n";
        let errors = Scenario::parse(text).unwrap_err();
        let messages: Vec<&str> = errors.iter().map(|d| d.message.as_str()).collect();
        assert!(messages.iter().any(|m| m.contains("grid.length")), "{messages:?}");
        assert!(messages.iter().any(|m| m.contains("power of two")), "{messages:?}");
        assert!(messages.iter().any(|m| m.contains("potential.omega")), "{messages:?}");
        assert!(messages.iter().any(|m| m.contains("time.t_final")), "{messages:?}");
        assert!(messages.iter().any(|m| m.contains("time.initial")), "{messages:?}");
    }

    #[test]
    fn seed_specs_parse_and_print() {
        let text = "\
            run.kind = weak-value\n\
            grid.n_points = 64\n\
            grid.length = 10\n\
            potential.kind = uniform\n\
            potential.value = 0\n\
            time.t_final = 1\n\
            time.n_steps = 100\n\
            time.eval_t = 0.5\n\
            selection.pre = gaussian(3, 0.8, 1.5)\n\
            selection.post = eigenstate(2)\n";
        let s = Scenario::parse(text).unwrap();
        assert_eq!(
            s.selection_pre,
            Some(SeedSpec::Gaussian { center: 3.0, width: 0.8, momentum: 1.5 })
        );
        assert_eq!(s.selection_post, Some(SeedSpec::Eigenstate(2)));
    }

    #[test]
    fn eval_time_outside_the_window_is_caught() {
        let text = "\
            run.kind = weak-value\n\
            grid.n_points = 64\n\
            grid.length = 10\n\
            potential.kind = uniform\n\
            potential.value = 0\n\
            time.t_final = 1\n\
            time.n_steps = 100\n\
            time.eval_t = 2\n\
            selection.pre = uniform\n\
            selection.post = uniform\n";
        let errors = Scenario::parse(text).unwrap_err();
        assert!(errors.iter().any(|d| d.message.contains("outside the contour")));
    }

    #[test]
    fn ladder_must_ascend() {
        let text = "\
            run.kind = ground-state\n\
            grid.n_points = 64\n\
            grid.length = 10\n\
            potential.kind = harmonic\n\
            potential.omega = 1\n\
            contour.ds = 0.01\n\
            contour.beta_ladder = 10,5\n";
        let errors = Scenario::parse(text).unwrap_err();
        assert!(errors.iter().any(|d| d.message.contains("ascending")));
    }

    #[test]
    fn hartree_needs_a_kernel() {
        let text = format!("{MINIMAL_SCFT}functional.hartree_strength = 0.3\n");
        let errors = Scenario::parse(&text).unwrap_err();
        assert!(errors.iter().any(|d| d.message.contains("hartree_kernel")));
    }

    #[test]
    fn canonical_text_round_trips() {
        let text = "\
            run.kind = tdks\n\
            run.n_particles = 2\n\
            grid.n_points = 128\n\
            grid.length = 30\n\
            potential.kind = box-cosine\n\
            potential.depth = 1.5\n\
            potential.wavenumber = 2\n\
            functional.contact = 0.7\n\
            functional.hartree_strength = 0.25\n\
            functional.hartree_kernel = cosine(3)\n\
            time.t_final = 2.5\n\
            time.n_steps = 2500\n\
            time.mode = self-consistent\n\
            time.initial = eigenstate(0); gaussian(15, 2, -0.5)\n\
            time.sample_stride = 50\n\
            output.formats = csv\n";
        let first = Scenario::parse(text).unwrap();
        let second = Scenario::parse(&first.canonical()).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.canonical(), second.canonical());
    }
}
