//! Experiment configuration: a TOML file, dotted `--set` overrides, defaults.
//!
//! ```toml
//! dim = 1
//! radius = 32
//! grid = 128
//! scan = [8, 16, 32]
//! seed = 20240917
//!
//! [symbol]
//! kind = "builtin"
//! name = "elliptic_demo"
//! m = 1.0
//!
//! [sobolev]
//! s1 = 0.5
//! s2 = 0.0
//! ```

use std::path::{Path, PathBuf};

use lattice_pdo::lattice::LatticeBox;
use lattice_pdo::regression::DEFAULT_SEED;
use lattice_pdo::symbol::{Builtin, Symbol, SymbolSpec};
use lattice_pdo::torus::TorusGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "LATTICE_PDO_OUT";

/// Largest radius allowed in two dimensions.
pub const MAX_RADIUS_2D: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sobolev {
    pub s1: f64,
    pub s2: f64,
}

impl Default for Sobolev {
    fn default() -> Self {
        Sobolev { s1: 0.0, s2: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expansion {
    pub n_terms: usize,
    /// `"expansion"` or `"exact_weighted"` for the block operator.
    pub mode: String,
    /// Restrict residuals to `|k| ≥ floor · N`.
    pub window: f64,
}

impl Default for Expansion {
    fn default() -> Self {
        Expansion {
            n_terms: 4,
            mode: "exact_weighted".into(),
            window: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Parametrix {
    pub steps: usize,
    pub radius: f64,
    pub eps: f64,
    pub orders: Vec<f64>,
}

impl Default for Parametrix {
    fn default() -> Self {
        Parametrix {
            steps: 3,
            radius: 4.0,
            eps: 0.0,
            orders: vec![0.0, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ellipticity {
    /// Exclusion radius `R`.
    pub radius: f64,
    pub c_min: f64,
    /// Whether `symbol-check` fails on a non-elliptic symbol.
    pub required: bool,
}

impl Default for Ellipticity {
    fn default() -> Self {
        Ellipticity {
            radius: 0.0,
            c_min: lattice_pdo::symbol::DEFAULT_C_MIN,
            required: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymSum {
    pub symbols: Vec<SymbolSpec>,
    pub radii: Vec<f64>,
}

impl Default for AsymSum {
    fn default() -> Self {
        let lam = |s: f64| SymbolSpec::builtin(1, Builtin::JapaneseBracket { s });
        AsymSum {
            symbols: vec![lam(1.0), lam(0.0), lam(-1.0), lam(-2.0)],
            radii: vec![1.0; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Exactness of section identities.
    pub exact: f64,
    /// Allowed rise of a residual per added term.
    pub monotone: f64,
    /// Allowed `|drop − 1|` of the fitted composition exponent.
    pub order_drop: f64,
    pub parametrix: f64,
    pub plateau: f64,
    pub sigma_min: f64,
    pub duality_violation: f64,
    pub duality_attained: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact: 1e-12,
            monotone: 0.1,
            order_drop: 0.3,
            parametrix: 1e-3,
            plateau: 0.02,
            sigma_min: 0.9,
            duality_violation: 1e-12,
            duality_attained: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    /// Report directory; falls back to `$LATTICE_PDO_OUT`, then `lattice-pdo-out`.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub radius: usize,
    /// Extra layers stored around the box.
    pub halo: usize,
    /// Torus grid points per axis.
    pub grid: usize,
    /// Box radii for scans; strictly increasing. Empty resolves to
    /// `[N/4, N/2, N]` at load time.
    pub scan: Vec<usize>,
    pub symbol: SymbolSpec,
    /// Right factor for `compose`.
    pub second: SymbolSpec,
    pub sobolev: Sobolev,
    pub expansion: Expansion,
    pub parametrix: Parametrix,
    pub ellipticity: Ellipticity,
    pub asym: AsymSum,
    pub tolerances: Tolerances,
    pub output: Output,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 1,
            radius: 32,
            halo: 0,
            grid: 128,
            scan: Vec::new(),
            symbol: SymbolSpec::builtin(1, Builtin::JapaneseBracket { s: 1.0 }),
            second: SymbolSpec::builtin(1, Builtin::JapaneseBracket { s: 0.5 }),
            sobolev: Sobolev::default(),
            expansion: Expansion::default(),
            parametrix: Parametrix::default(),
            ellipticity: Ellipticity::default(),
            asym: AsymSum::default(),
            tolerances: Tolerances::default(),
            output: Output::default(),
            trials: 200,
            seed: DEFAULT_SEED,
        }
    }
}

/// Parse `value` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("override path `{path}` crosses non-table `{k}`"))
        })?;
    }
    let last = keys[keys.len() - 1];
    // Switching a tagged variant drops the old variant's fields.
    if matches!(last, "kind" | "name") && table.contains_key("kind") {
        table.retain(|k, _| matches!(k, "kind" | "name" | "dim"));
    }
    table.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Defaults, then the file, then the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = toml::Table::try_from(ExperimentConfig::default())
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let file: toml::Table = text
                .parse()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            merge(&mut table, file);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if cfg.scan.is_empty() {
            let n = cfg.radius;
            cfg.scan = [n / 4, n / 2, n].into_iter().filter(|&r| r > 0).collect();
            cfg.scan.dedup();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.dim == 0 || self.radius == 0 {
            return bad("dim and radius must be positive".into());
        }
        if self.grid < 2 * (self.radius + self.halo) + 1 {
            return bad(format!(
                "grid {} is too coarse for radius {} with halo {}: need at least {}",
                self.grid,
                self.radius,
                self.halo,
                2 * (self.radius + self.halo) + 1
            ));
        }
        if self.scan.is_empty() || self.scan.windows(2).any(|w| w[0] >= w[1]) || self.scan[0] == 0 {
            return bad(format!(
                "scan {:?} must be non-empty, positive and strictly increasing",
                self.scan
            ));
        }
        if self.scan.iter().any(|&n| self.grid < 2 * n + 1) {
            return bad(format!(
                "grid {} is too coarse for scan {:?}",
                self.grid, self.scan
            ));
        }
        if self.dim >= 2
            && (self.radius > MAX_RADIUS_2D || self.scan.iter().any(|&n| n > MAX_RADIUS_2D))
        {
            return bad(format!(
                "radius and scan are capped at {MAX_RADIUS_2D} for dim ≥ 2"
            ));
        }
        if self.expansion.n_terms == 0 {
            return bad("expansion.n_terms must be at least 1".into());
        }
        if !matches!(self.expansion.mode.as_str(), "expansion" | "exact_weighted") {
            return bad(format!(
                "expansion.mode must be \"expansion\" or \"exact_weighted\", got {:?}",
                self.expansion.mode
            ));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<LatticeBox, CliError> {
        Ok(LatticeBox::new(self.dim, self.radius, self.halo)?)
    }

    pub fn torus(&self) -> Result<TorusGrid, CliError> {
        Ok(TorusGrid::new(self.dim, self.grid)?)
    }

    fn checked(&self, spec: &SymbolSpec) -> Result<Symbol, CliError> {
        let s = spec.build()?;
        if s.dim != self.dim {
            return Err(CliError::Config(format!(
                "symbol {} has dimension {} but the experiment has dim = {}",
                s.label, s.dim, self.dim
            )));
        }
        Ok(s)
    }

    pub fn build_symbol(&self) -> Result<Symbol, CliError> {
        self.checked(&self.symbol)
    }

    pub fn build_second(&self) -> Result<Symbol, CliError> {
        self.checked(&self.second)
    }

    pub fn build_asym(&self) -> Result<Vec<Symbol>, CliError> {
        self.asym.symbols.iter().map(|s| self.checked(s)).collect()
    }

    /// Output directory after the environment fallback.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("lattice-pdo-out"))
    }
}

/// Recursive table merge; `over` wins. Replacing a tagged symbol table
/// wholesale avoids mixing fields of two different variants.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::load(None, &[]).unwrap();
        assert_eq!((c.dim, c.radius, c.grid), (1, 32, 128));
        assert_eq!(c.scan, vec![8, 16, 32]);
        let again = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&again).unwrap(), c);
        let small = ExperimentConfig::load(None, &["radius=12".into(), "grid=32".into()]).unwrap();
        assert_eq!(small.scan, vec![3, 6, 12]);
    }

    #[test]
    fn dotted_overrides() {
        let c = ExperimentConfig::load(
            None,
            &[
                "sobolev.s1=0.5".into(),
                "radius=16".into(),
                "expansion.mode=expansion".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.sobolev.s1, 0.5);
        assert_eq!(c.radius, 16);
        assert_eq!(c.expansion.mode, "expansion");
        let c = ExperimentConfig::load(
            None,
            &["second.name=elliptic_demo".into(), "second.m=-0.5".into()],
        )
        .unwrap();
        assert_eq!(c.build_second().unwrap().label, "elliptic_demo(-0.5)");
    }

    #[test]
    fn schema_violations() {
        for o in [
            "grid=16",
            "scan=[8, 8]",
            "nonsense=1",
            "sobolev.s3=1",
            "expansion.n_terms=0",
            "radius",
        ] {
            assert!(ExperimentConfig::load(None, &[o.into()]).is_err(), "{o}");
        }
        let two_d = ["dim=2".to_string(), "radius=16".into()];
        assert!(ExperimentConfig::load(None, &two_d).is_err());
    }

    #[test]
    fn file_symbol_replaces_default() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(
            &p,
            "radius = 16\n[symbol]\nkind = \"builtin\"\nname = \"elliptic_demo\"\nm = 1.0\n",
        )
        .unwrap();
        let c = ExperimentConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(c.build_symbol().unwrap().label, "elliptic_demo(1)");
        assert_eq!(c.radius, 16);
    }
}
