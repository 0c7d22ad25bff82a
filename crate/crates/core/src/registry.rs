//! Name-keyed factories for interchangeable strategies.
//!
//! Every pluggable algorithm family in the crate (ghost exchange, time
//! integrators, reconstruction, output aggregation, drivers, benchmark
//! kernels) is a trait object looked up here by name. A name may carry one
//! argument in parentheses, e.g. `every-nth(4)`, which is handed to the
//! factory.

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown {kind} {name:?} (available: {available})")]
    Unknown {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("invalid argument for {kind} {name:?}: {reason}")]
    BadArgument {
        kind: &'static str,
        name: String,
        reason: String,
    },
}

pub type Factory<T> = Box<dyn Fn(Option<&str>) -> Result<Box<T>, String> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Factory<T>>,
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Register a factory; a later registration under the same name wins.
    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(Option<&str>) -> Result<Box<T>, String> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(factory));
        self
    }

    /// Register an argument-free strategy.
    pub fn register_simple<F>(&mut self, name: &str, make: F) -> &mut Self
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        let owned = name.to_string();
        self.register(name, move |arg| match arg {
            None => Ok(make()),
            Some(a) => Err(format!("{owned} takes no argument, got {a:?}")),
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        let (base, _) = split_name(name);
        self.entries.contains_key(base)
    }

    pub fn create(&self, name: &str) -> Result<Box<T>, RegistryError> {
        let (base, arg) = split_name(name.trim());
        let factory = self.entries.get(base).ok_or_else(|| RegistryError::Unknown {
            kind: self.kind,
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        factory(arg).map_err(|reason| RegistryError::BadArgument {
            kind: self.kind,
            name: name.to_string(),
            reason,
        })
    }
}

fn split_name(name: &str) -> (&str, Option<&str>) {
    match (name.find('('), name.strip_suffix(')')) {
        (Some(open), Some(body)) => (&name[..open], Some(&body[open + 1..])),
        _ => (name, None),
    }
}
