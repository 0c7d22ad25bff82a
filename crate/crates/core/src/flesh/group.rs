use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    Vertex,
}

/// Named grid functions sharing extents, ghost width and time levels.
///
/// Group names are qualified by their thorn (`wave::evolved`); the variables
/// inside are addressed as `thorn::variable` (`wave::phi`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub name: String,
    pub variables: Vec<String>,
    pub ghost_width: usize,
    pub time_levels: usize,
    #[serde(default)]
    pub centering: Centering,
}

impl VariableGroup {
    pub fn new(name: &str, variables: &[&str], ghost_width: usize, time_levels: usize) -> Self {
        Self {
            name: name.to_string(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            ghost_width,
            time_levels,
            centering: Centering::Vertex,
        }
    }

    pub fn thorn(&self) -> &str {
        self.name.split("::").next().unwrap_or("")
    }

    /// `thorn::variable` for each member.
    pub fn qualified_variables(&self) -> Vec<String> {
        self.variables
            .iter()
            .map(|v| format!("{}::{}", self.thorn(), v))
            .collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.time_levels == 0 {
            return Err(format!("group {} needs at least one time level", self.name));
        }
        if self.variables.is_empty() {
            return Err(format!("group {} declares no variables", self.name));
        }
        if !self.name.contains("::") {
            return Err(format!("group name {:?} must be qualified as thorn::group", self.name));
        }
        Ok(())
    }
}
