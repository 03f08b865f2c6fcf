//! Scenario configuration: TOML with unit-suffixed keys, a schema validator
//! that reports every problem with its key path, and typed accessors.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use toml::{Table, Value};

/// Experiment names accepted by `experiment.name`.
pub const EXPERIMENTS: [&str; 6] = [
    "squint-deviation",
    "angular-spread",
    "wavenumber-calibration",
    "music-vs-wavenumber",
    "rmse-vs-snr",
    "rate-vs-sensing-budget",
];

/// One-line description per experiment, for `list-experiments`.
pub fn describe(name: &str) -> &'static str {
    match name {
        "squint-deviation" => "per-subcarrier focal points of a polar codeword and the max angle/range deviation",
        "angular-spread" => "strongest-bin angular energy fraction versus range (angular-range coupling)",
        "wavenumber-calibration" => "UPA wavenumber support radius versus range and closed-loop range estimates",
        "music-vs-wavenumber" => "localization RMSE of 2D MUSIC (ULA) and the wavenumber pipeline (UPA)",
        "rmse-vs-snr" => "angle RMSE versus SNR: sensing-only, squint-assisted ISAC, conventional sweep",
        "rate-vs-sensing-budget" => "sum rate with sensing reservations relative to the comm-only optimum",
        _ => "",
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Int,
    Float,
    Str(&'static [&'static str]),
    FloatList,
    IntList,
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Any,
    /// `> 0`
    Positive,
    /// `>= 0`
    NonNegative,
    /// `>= n`
    AtLeast(f64),
    /// Open interval `(0, π)`.
    Angle,
    /// `(0, 1]`
    Fraction,
    /// `> 1`
    AboveOne,
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    rule: Rule,
    unit: &'static str,
}

const fn k(section: &'static str, key: &'static str, kind: Kind, rule: Rule, unit: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        kind,
        rule,
        unit,
    }
}

const PLACEMENTS: &[&str] = &["uniform", "rate-optimal"];

static SCHEMA: &[KeySpec] = &[
    k("experiment", "name", Kind::Str(&EXPERIMENTS), Rule::Any, ""),
    k("experiment", "seed", Kind::Int, Rule::NonNegative, ""),
    k("experiment", "trials", Kind::Int, Rule::AtLeast(1.0), ""),
    k("experiment", "snr_db", Kind::FloatList, Rule::Any, "dB"),
    k("array", "num_elements", Kind::Int, Rule::AtLeast(2.0), ""),
    k("array", "spacing_m", Kind::Float, Rule::Positive, "m"),
    k("upa", "nx", Kind::Int, Rule::AtLeast(8.0), ""),
    k("upa", "nz", Kind::Int, Rule::AtLeast(8.0), ""),
    k("upa", "dx_m", Kind::Float, Rule::Positive, "m"),
    k("upa", "dz_m", Kind::Float, Rule::Positive, "m"),
    k("upa", "oversample", Kind::Int, Rule::AtLeast(1.0), ""),
    k("upa", "threshold", Kind::Float, Rule::Fraction, ""),
    k("carrier", "center_hz", Kind::Float, Rule::Positive, "Hz"),
    k("carrier", "num_subcarriers", Kind::Int, Rule::AtLeast(1.0), ""),
    k("carrier", "spacing_hz", Kind::Float, Rule::Positive, "Hz"),
    k("target", "range_m", Kind::Float, Rule::Positive, "m"),
    k("target", "angle_rad", Kind::Float, Rule::Angle, "rad"),
    k("target", "reflectivity", Kind::Float, Rule::Positive, ""),
    k("grid", "angle_count", Kind::Int, Rule::AtLeast(1.0), ""),
    k("grid", "angle_start_rad", Kind::Float, Rule::Angle, "rad"),
    k("grid", "angle_end_rad", Kind::Float, Rule::Angle, "rad"),
    k("grid", "angle_margin_rad", Kind::Float, Rule::NonNegative, "rad"),
    k("grid", "range_start_m", Kind::Float, Rule::Positive, "m"),
    k("grid", "range_end_m", Kind::Float, Rule::Positive, "m"),
    k("grid", "range_count", Kind::Int, Rule::AtLeast(1.0), ""),
    k("grid", "ranges_per_decade", Kind::Int, Rule::AtLeast(1.0), ""),
    k("sensing", "arc_start_rad", Kind::Float, Rule::Angle, "rad"),
    k("sensing", "arc_end_rad", Kind::Float, Rule::Angle, "rad"),
    k("sensing", "arc_range_m", Kind::Float, Rule::Positive, "m"),
    k("sensing", "num_subcarriers", Kind::Int, Rule::AtLeast(1.0), ""),
    k("sensing", "p_min_w", Kind::Float, Rule::NonNegative, "W"),
    k("sensing", "placement", Kind::Str(PLACEMENTS), Rule::Any, ""),
    k("sensing", "frame_slots", Kind::Int, Rule::AtLeast(1.0), ""),
    k("sensing", "sweep_directions", Kind::Int, Rule::AtLeast(3.0), ""),
    k("sensing", "sweep_subarray", Kind::Int, Rule::AtLeast(2.0), ""),
    k("sensing", "calibration_iterations", Kind::Int, Rule::NonNegative, ""),
    k("allocation", "total_power_w", Kind::Float, Rule::Positive, "W"),
    k("allocation", "noise_power_w", Kind::Float, Rule::Positive, "W"),
    k("allocation", "num_users", Kind::Int, Rule::NonNegative, ""),
    k("allocation", "mean_snr_db", Kind::Float, Rule::Any, "dB"),
    k("allocation", "draws", Kind::Int, Rule::AtLeast(1.0), ""),
    k("allocation", "placement", Kind::Str(PLACEMENTS), Rule::Any, ""),
    k("sweep", "ranges_m", Kind::FloatList, Rule::Positive, "m"),
    k("sweep", "test_ranges_m", Kind::FloatList, Rule::Positive, "m"),
    k("sweep", "angles_rad", Kind::FloatList, Rule::Angle, "rad"),
    k("sweep", "rayleigh_fractions", Kind::FloatList, Rule::Positive, ""),
    k("sweep", "sensing_counts", Kind::IntList, Rule::NonNegative, ""),
    k("sweep", "power_fractions", Kind::FloatList, Rule::Fraction, ""),
    k("music", "snapshots", Kind::Int, Rule::AtLeast(2.0), ""),
    k("music", "snr_db", Kind::Float, Rule::Any, "dB"),
    k("music", "trials", Kind::Int, Rule::AtLeast(1.0), ""),
    k("music", "angle_half_width_rad", Kind::Float, Rule::Positive, "rad"),
    k("music", "range_span_ratio", Kind::Float, Rule::AboveOne, ""),
    k("music", "grid_points", Kind::Int, Rule::AtLeast(3.0), ""),
];

const SECTIONS: [&str; 10] = [
    "experiment",
    "array",
    "upa",
    "carrier",
    "target",
    "grid",
    "sensing",
    "allocation",
    "sweep",
    "music",
];

/// Sections an experiment may use and the keys it requires.
struct ExperimentRules {
    allowed: &'static [&'static str],
    required: &'static [&'static str],
    linear_only: bool,
}

fn rules(name: &str) -> ExperimentRules {
    match name {
        "squint-deviation" => ExperimentRules {
            allowed: &["experiment", "array", "carrier", "target", "grid"],
            required: &[
                "array.num_elements",
                "array.spacing_m",
                "carrier.center_hz",
                "target.range_m",
                "target.angle_rad",
                "grid.angle_count",
                "grid.range_start_m",
                "grid.range_count",
            ],
            linear_only: true,
        },
        "angular-spread" => ExperimentRules {
            allowed: &["experiment", "array", "carrier", "sweep"],
            required: &[
                "array.num_elements",
                "array.spacing_m",
                "carrier.center_hz",
                "sweep.angles_rad",
                "sweep.rayleigh_fractions",
            ],
            linear_only: true,
        },
        "wavenumber-calibration" => ExperimentRules {
            allowed: &["experiment", "upa", "carrier", "target", "sweep"],
            required: &[
                "upa.nx",
                "upa.nz",
                "upa.dx_m",
                "upa.dz_m",
                "carrier.center_hz",
                "target.angle_rad",
                "sweep.ranges_m",
                "sweep.test_ranges_m",
            ],
            linear_only: false,
        },
        "music-vs-wavenumber" => ExperimentRules {
            allowed: &["experiment", "array", "upa", "carrier", "target", "sweep", "music"],
            required: &[
                "array.num_elements",
                "array.spacing_m",
                "upa.nx",
                "upa.nz",
                "upa.dx_m",
                "upa.dz_m",
                "carrier.center_hz",
                "target.angle_rad",
                "sweep.ranges_m",
                "sweep.test_ranges_m",
                "music.snapshots",
                "music.snr_db",
                "music.trials",
            ],
            linear_only: false,
        },
        "rmse-vs-snr" => ExperimentRules {
            allowed: &["experiment", "array", "carrier", "target", "grid", "sensing", "allocation"],
            required: &[
                "experiment.trials",
                "experiment.snr_db",
                "array.num_elements",
                "array.spacing_m",
                "carrier.center_hz",
                "carrier.num_subcarriers",
                "carrier.spacing_hz",
                "sensing.arc_start_rad",
                "sensing.arc_end_rad",
                "sensing.arc_range_m",
                "sensing.num_subcarriers",
                "sensing.p_min_w",
                "allocation.total_power_w",
            ],
            linear_only: true,
        },
        "rate-vs-sensing-budget" => ExperimentRules {
            allowed: &["experiment", "carrier", "sensing", "allocation", "sweep"],
            required: &[
                "carrier.center_hz",
                "carrier.num_subcarriers",
                "allocation.total_power_w",
                "allocation.noise_power_w",
                "allocation.num_users",
                "allocation.mean_snr_db",
                "allocation.draws",
                "sweep.sensing_counts",
                "sweep.power_fractions",
            ],
            linear_only: true,
        },
        _ => ExperimentRules {
            allowed: &SECTIONS,
            required: &[],
            linear_only: false,
        },
    }
}

/// All problems found in a configuration; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn push(&mut self, msg: String) {
        self.errors.push(msg);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn check_rule(path: &str, x: f64, rule: Rule, unit: &str, report: &mut ValidationReport) {
    let u = if unit.is_empty() { String::new() } else { format!(" {unit}") };
    let bad = |what: &str| format!("`{path}` must be {what}, got {x}{u}");
    if !x.is_finite() {
        report.push(format!("`{path}` must be finite, got {x}{u}"));
        return;
    }
    match rule {
        Rule::Any => {}
        Rule::Positive if !(x > 0.0) => report.push(bad(&format!("> 0{u}"))),
        Rule::NonNegative if !(x >= 0.0) => report.push(bad(&format!(">= 0{u}"))),
        Rule::AtLeast(n) if !(x >= n) => report.push(bad(&format!(">= {n}"))),
        Rule::Angle if !(x > 0.0 && x < PI) => report.push(bad("in the open interval (0, pi) rad")),
        Rule::Fraction if !(x > 0.0 && x <= 1.0) => report.push(bad("in (0, 1]")),
        Rule::AboveOne if !(x > 1.0) => report.push(bad("> 1")),
        _ => {}
    }
}

fn check_value(spec: &KeySpec, v: &Value, report: &mut ValidationReport) {
    let path = format!("{}.{}", spec.section, spec.key);
    let kind_name = match spec.kind {
        Kind::Int => "an integer",
        Kind::Float => "a number",
        Kind::Str(_) => "a string",
        Kind::FloatList => "an array of numbers",
        Kind::IntList => "an array of integers",
    };
    let type_error = || format!("`{path}` must be {kind_name}");
    match spec.kind {
        Kind::Int => match v {
            Value::Integer(i) => check_rule(&path, *i as f64, spec.rule, spec.unit, report),
            _ => report.push(type_error()),
        },
        Kind::Float => match as_number(v) {
            Some(x) => check_rule(&path, x, spec.rule, spec.unit, report),
            None => report.push(type_error()),
        },
        Kind::Str(choices) => match v {
            Value::String(s) if choices.contains(&s.as_str()) => {}
            Value::String(s) => report.push(format!(
                "`{path}` must be one of {}, got \"{s}\"",
                choices.join(", ")
            )),
            _ => report.push(type_error()),
        },
        Kind::FloatList | Kind::IntList => match v {
            Value::Array(items) => {
                if items.is_empty() {
                    report.push(format!("`{path}` must not be empty"));
                }
                for (i, item) in items.iter().enumerate() {
                    let ok = match spec.kind {
                        Kind::IntList => matches!(item, Value::Integer(_)),
                        _ => as_number(item).is_some(),
                    };
                    if !ok {
                        report.push(format!("`{path}[{i}]` must be {}", if matches!(spec.kind, Kind::IntList) { "an integer" } else { "a number" }));
                    } else if let Some(x) = as_number(item) {
                        check_rule(&format!("{path}[{i}]"), x, spec.rule, spec.unit, report);
                    }
                }
            }
            _ => report.push(type_error()),
        },
    }
}

/// Parses TOML text into a table.
pub fn parse(text: &str) -> Result<Table, String> {
    text.parse::<Table>().map_err(|e| format!("parse error: {e}"))
}

/// Full schema check of a parsed configuration.
pub fn validate_table(table: &Table) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (name, value) in table {
        if !SECTIONS.contains(&name.as_str()) {
            report.push(format!("unknown section `{name}`"));
            continue;
        }
        let Value::Table(section) = value else {
            report.push(format!("`{name}` must be a table"));
            continue;
        };
        for (key, v) in section {
            match SCHEMA.iter().find(|s| s.section == name && s.key == key) {
                Some(spec) => check_value(spec, v, &mut report),
                None => report.push(format!("unknown key `{name}.{key}`")),
            }
        }
    }

    let experiment = table.get("experiment").and_then(Value::as_table);
    let name = experiment
        .and_then(|e| e.get("name"))
        .and_then(Value::as_str);
    match experiment {
        None => report.push("missing section `experiment`".into()),
        Some(e) => {
            if !e.contains_key("name") {
                report.push("missing key `experiment.name`".into());
            }
            if !e.contains_key("seed") {
                report.push("missing key `experiment.seed` (a seed is mandatory)".into());
            }
        }
    }
    let Some(name) = name.filter(|n| EXPERIMENTS.contains(n)) else {
        return report;
    };
    let r = rules(name);
    let present: BTreeSet<&str> = table.keys().map(String::as_str).collect();
    if r.linear_only && present.contains("array") && present.contains("upa") {
        report.push(format!(
            "experiment `{name}` uses a linear array only, but both `array` and `upa` sections are present"
        ));
    }
    for s in &present {
        if SECTIONS.contains(s) && !r.allowed.contains(s) {
            if r.linear_only && *s == "upa" && present.contains("array") {
                continue;
            }
            report.push(format!("section `{s}` is not used by experiment `{name}`"));
        }
    }
    for path in r.required {
        let (s, key) = path.split_once('.').unwrap();
        let has = table
            .get(s)
            .and_then(Value::as_table)
            .is_some_and(|t| t.contains_key(key));
        if !has {
            report.push(format!("missing key `{path}` required by experiment `{name}`"));
        }
    }
    cross_checks(table, name, &mut report);
    report
}

fn num(table: &Table, path: &str) -> Option<f64> {
    let (s, key) = path.split_once('.')?;
    table.get(s)?.as_table()?.get(key).and_then(as_number)
}

fn cross_checks(table: &Table, name: &str, report: &mut ValidationReport) {
    if let Some(n) = num(table, "carrier.num_subcarriers") {
        if n >= 1.0 && (n as i64) % 2 == 0 {
            report.push(format!("`carrier.num_subcarriers` must be odd (M + 1 with M even), got {n}"));
        }
        if n > 1.0 && num(table, "carrier.spacing_hz").is_none() {
            report.push("missing key `carrier.spacing_hz` (needed with more than one subcarrier)".into());
        }
        if let (Some(fc), Some(df)) = (num(table, "carrier.center_hz"), num(table, "carrier.spacing_hz")) {
            if fc - ((n as i64 / 2) as f64) * df <= 0.0 {
                report.push("`carrier.spacing_hz` makes the lowest subcarrier frequency nonpositive".into());
            }
        }
    }
    if let (Some(a), Some(b)) = (num(table, "grid.angle_start_rad"), num(table, "grid.angle_end_rad")) {
        if !(a < b) {
            report.push("`grid.angle_start_rad` must be below `grid.angle_end_rad`".into());
        }
    }
    if num(table, "grid.angle_start_rad").is_some() != num(table, "grid.angle_end_rad").is_some() {
        report.push("`grid.angle_start_rad` and `grid.angle_end_rad` must be given together".into());
    }
    if let Some(n) = num(table, "grid.range_count") {
        let end = num(table, "grid.range_end_m");
        let per = num(table, "grid.ranges_per_decade");
        if n > 1.0 && (end.is_some() == per.is_some()) {
            report.push("give exactly one of `grid.range_end_m` or `grid.ranges_per_decade` when `grid.range_count` > 1".into());
        }
        if let (Some(s), Some(e)) = (num(table, "grid.range_start_m"), end) {
            if !(e > s) {
                report.push("`grid.range_end_m` must exceed `grid.range_start_m`".into());
            }
        }
    }
    if let (Some(a), Some(b)) = (num(table, "sensing.arc_start_rad"), num(table, "sensing.arc_end_rad")) {
        if !(a < b) {
            report.push("`sensing.arc_start_rad` must be below `sensing.arc_end_rad`".into());
        }
    }
    if let (Some(ks), Some(n)) = (num(table, "sensing.num_subcarriers"), num(table, "carrier.num_subcarriers")) {
        if ks >= n {
            report.push("`sensing.num_subcarriers` must be below `carrier.num_subcarriers`".into());
        }
        if name == "rmse-vs-snr" && ks < 3.0 {
            report.push("`sensing.num_subcarriers` must be at least 3 for angle estimation".into());
        }
    }
    if let (Some(ks), Some(p), Some(total)) = (
        num(table, "sensing.num_subcarriers"),
        num(table, "sensing.p_min_w"),
        num(table, "allocation.total_power_w"),
    ) {
        if ks * p >= total {
            report.push("`sensing.num_subcarriers` x `sensing.p_min_w` must stay below `allocation.total_power_w` W".into());
        }
    }
    if let (Some(sub), Some(n)) = (num(table, "sensing.sweep_subarray"), num(table, "array.num_elements")) {
        if sub > n {
            report.push("`sensing.sweep_subarray` cannot exceed `array.num_elements`".into());
        }
    }
    if let Some(Value::Array(items)) = table.get("sweep").and_then(|s| s.get("ranges_m")) {
        let xs: Vec<f64> = items.iter().filter_map(as_number).collect();
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            report.push("`sweep.ranges_m` must be strictly increasing".into());
        }
        if matches!(name, "wavenumber-calibration" | "music-vs-wavenumber") && xs.len() < 8 {
            report.push(format!("`sweep.ranges_m` needs at least 8 calibration ranges, got {}", xs.len()));
        }
    }
    if let (Some(Value::Array(items)), Some(n)) = (
        table.get("sweep").and_then(|s| s.get("sensing_counts")),
        num(table, "carrier.num_subcarriers"),
    ) {
        if items.iter().filter_map(as_number).any(|k| k >= n) {
            report.push("`sweep.sensing_counts` entries must be below `carrier.num_subcarriers`".into());
        }
    }
}

/// Validates configuration text.
pub fn validate_text(text: &str) -> ValidationReport {
    match parse(text) {
        Ok(t) => validate_table(&t),
        Err(e) => ValidationReport { errors: vec![e] },
    }
}

/// Read-only typed access to a validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    table: Table,
}

impl ScenarioConfig {
    /// Parses and validates; returns the report on failure.
    pub fn from_text(text: &str) -> Result<Self, ValidationReport> {
        let table = parse(text).map_err(|e| ValidationReport { errors: vec![e] })?;
        let report = validate_table(&table);
        if report.is_valid() {
            Ok(Self { table })
        } else {
            Err(report)
        }
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    /// Canonical TOML text, used for hashing.
    pub fn canonical(&self) -> String {
        toml::to_string(&self.table).unwrap_or_default()
    }

    pub fn name(&self) -> &str {
        self.str("experiment.name").unwrap_or("")
    }

    pub fn seed(&self) -> u64 {
        self.int("experiment.seed").unwrap_or(0) as u64
    }

    fn value(&self, path: &str) -> Option<&Value> {
        let (s, key) = path.split_once('.')?;
        self.table.get(s)?.as_table()?.get(key)
    }

    pub fn has(&self, path: &str) -> bool {
        self.value(path).is_some()
    }

    pub fn f64(&self, path: &str) -> Option<f64> {
        self.value(path).and_then(as_number)
    }

    pub fn f64_or(&self, path: &str, default: f64) -> f64 {
        self.f64(path).unwrap_or(default)
    }

    pub fn int(&self, path: &str) -> Option<i64> {
        self.value(path).and_then(Value::as_integer)
    }

    pub fn usize_or(&self, path: &str, default: usize) -> usize {
        self.int(path).map_or(default, |v| v as usize)
    }

    pub fn str(&self, path: &str) -> Option<&str> {
        self.value(path).and_then(Value::as_str)
    }

    pub fn f64_list(&self, path: &str) -> Option<Vec<f64>> {
        self.value(path)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(as_number).collect())
    }

    pub fn usize_list(&self, path: &str) -> Option<Vec<usize>> {
        self.value(path)
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_integer).map(|v| v as usize).collect())
    }

    /// Reads `path` as a float for the experiment code; validation guarantees presence.
    pub(crate) fn req_f64(&self, path: &str) -> crate::Result<f64> {
        self.f64(path)
            .ok_or_else(|| crate::Error::Config(format!("missing key `{path}`")))
    }

    pub(crate) fn req_usize(&self, path: &str) -> crate::Result<usize> {
        self.int(path)
            .map(|v| v as usize)
            .ok_or_else(|| crate::Error::Config(format!("missing key `{path}`")))
    }

    pub(crate) fn req_f64_list(&self, path: &str) -> crate::Result<Vec<f64>> {
        self.f64_list(path)
            .ok_or_else(|| crate::Error::Config(format!("missing key `{path}`")))
    }

    /// Returns a copy with `path` overwritten, re-validated.
    pub fn with(&self, path: &str, value: Value) -> Result<Self, ValidationReport> {
        let mut table = self.table.clone();
        let (s, key) = path.split_once('.').unwrap_or((path, ""));
        let section = table
            .entry(s.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(t) = section {
            t.insert(key.to_string(), value);
        }
        let report = validate_table(&table);
        if report.is_valid() {
            Ok(Self { table })
        } else {
            Err(report)
        }
    }
}
