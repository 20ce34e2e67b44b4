//! Loading modules from disk: import resolution, cycle detection, checking.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::parser::{parse_module, SyntaxError};
use crate::syntax::{ModuleUnit, Name};
use crate::typecheck::{check_module, DefReport, Env, ModuleError, Status};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("cyclic imports: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("module `{module}` imported from {} not found", from.display())]
    Missing { module: Name, from: PathBuf },
    #[error(transparent)]
    Module(#[from] ModuleError),
    #[error("module `{module}` cannot be used: its import `{import}` failed to check")]
    ImportFailed { module: Name, import: Name },
}

impl LoadError {
    /// Type errors (a failed import) as opposed to parse, IO or configuration
    /// problems.
    pub fn is_type_error(&self) -> bool {
        matches!(self, LoadError::ImportFailed { .. } | LoadError::Module(_))
    }
}

#[derive(Debug)]
pub struct LoadedModule {
    pub unit: ModuleUnit,
    pub path: PathBuf,
    pub reports: Vec<DefReport>,
}

impl LoadedModule {
    pub fn ok(&self) -> bool {
        self.reports.len() == self.unit.defs.len()
            && self.reports.iter().all(|r| r.status == Status::Checked)
    }
}

pub struct Loader {
    pub corpus_dir: PathBuf,
    pub fuel: u64,
    pub env: Env,
    modules: HashMap<Name, LoadedModule>,
    /// Module names in load order.
    order: Vec<Name>,
    in_progress: Vec<Name>,
}

impl Loader {
    pub fn new(corpus_dir: impl Into<PathBuf>, fuel: u64) -> Self {
        Loader {
            corpus_dir: corpus_dir.into(),
            fuel,
            env: Env::default(),
            modules: HashMap::new(),
            order: Vec::new(),
            in_progress: Vec::new(),
        }
    }

    pub fn module(&self, n: &str) -> Option<&LoadedModule> {
        self.modules.get(n)
    }

    pub fn modules(&self) -> impl Iterator<Item = &LoadedModule> {
        self.order.iter().map(|n| &self.modules[n])
    }

    /// Parse, resolve imports of and check the module in `path`. Returns the
    /// module's name; a module already loaded under that name is reused.
    pub fn load(&mut self, path: &Path) -> Result<Name, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let unit = parse_module(&text, &path.display().to_string())?;
        let mname = unit.name.clone();
        if self.modules.contains_key(&mname) {
            return Ok(mname);
        }
        if self.in_progress.contains(&mname) {
            let mut cycle: Vec<String> = self.in_progress.iter().map(|n| n.to_string()).collect();
            cycle.push(mname.to_string());
            return Err(LoadError::Cycle(cycle));
        }
        self.in_progress.push(mname.clone());
        let result = self.load_imports(&unit, path);
        self.in_progress.pop();
        result?;
        let reports = check_module(&unit, &mut self.env, self.fuel)?;
        self.order.push(mname.clone());
        self.modules.insert(
            mname.clone(),
            LoadedModule {
                unit,
                path: path.to_path_buf(),
                reports,
            },
        );
        Ok(mname)
    }

    fn load_imports(&mut self, unit: &ModuleUnit, path: &Path) -> Result<(), LoadError> {
        for imp in &unit.imports {
            if self.in_progress.contains(imp) {
                let mut cycle: Vec<String> =
                    self.in_progress.iter().map(|n| n.to_string()).collect();
                cycle.push(imp.to_string());
                return Err(LoadError::Cycle(cycle));
            }
            if !self.modules.contains_key(imp) {
                let file = format!("{imp}.cdl");
                let sibling = path.parent().unwrap_or(Path::new(".")).join(&file);
                let target = if sibling.exists() {
                    sibling
                } else {
                    let c = self.corpus_dir.join(&file);
                    if !c.exists() {
                        return Err(LoadError::Missing {
                            module: imp.clone(),
                            from: path.to_path_buf(),
                        });
                    }
                    c
                };
                self.load(&target)?;
            }
            if !self.modules[imp].ok() {
                return Err(LoadError::ImportFailed {
                    module: unit.name.clone(),
                    import: imp.clone(),
                });
            }
        }
        Ok(())
    }
}
