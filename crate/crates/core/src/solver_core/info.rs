use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::params::{self, ParamTree, ParamValue};

/// The roles every solver fills, in instantiation order.
pub const ROLES: [&str; 7] = [
    "Operators",
    "State",
    "TimeStepping",
    "InitFields",
    "Forcing",
    "Output",
    "Preprocess",
];

/// Descriptor of a solver: which component fills each role and which
/// variables its state holds.
///
/// Printed as a nested tree in the `params.txt` grammar, which is also
/// the content of `info_solver.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverInfo {
    pub short_name: String,
    pub dims: usize,
    pub classes: IndexMap<String, String>,
    pub keys_state_spect: Vec<String>,
    pub keys_state_phys: Vec<String>,
    pub keys_computable: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl SolverInfo {
    /// Descriptor with the generic pseudo-spectral components; solvers
    /// override individual roles afterwards.
    pub fn new(short_name: &str, dims: usize, spect: &[&str], phys: &[&str], computable: &[&str]) -> Self {
        let mut classes = IndexMap::new();
        for role in ROLES {
            let component = match role {
                "Operators" => format!("OperatorsPseudoSpectral{dims}D"),
                "State" => format!("State{}", short_name.to_uppercase()),
                "TimeStepping" => "TimeSteppingPseudoSpectral".to_string(),
                other => format!("{other}Base"),
            };
            classes.insert(role.to_string(), component);
        }
        SolverInfo {
            short_name: short_name.to_string(),
            dims,
            classes,
            keys_state_spect: strings(spect),
            keys_state_phys: strings(phys),
            keys_computable: strings(computable),
        }
    }

    pub fn with_class(mut self, role: &str, component: &str) -> Self {
        self.classes.insert(role.to_string(), component.to_string());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dims) {
            return Err(Error::Config(format!("solver dims must be 1, 2 or 3, got {}", self.dims)));
        }
        for role in ROLES {
            match self.classes.get(role) {
                Some(c) if !c.is_empty() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "solver `{}` does not name a component for role {role}",
                        self.short_name
                    )))
                }
            }
        }
        if self.keys_state_spect.is_empty() || self.keys_state_spect.len() != self.keys_state_phys.len() {
            return Err(Error::Config(format!(
                "solver `{}` must pair every spectral state key with one physical key",
                self.short_name
            )));
        }
        Ok(())
    }

    pub fn to_tree(&self) -> ParamTree {
        let mut t = ParamTree::new("params");
        let build = |t: &mut ParamTree| -> Result<()> {
            t.add_leaf("short_name", self.short_name.as_str())?;
            t.add_leaf("dims", self.dims as i64)?;
            let classes = t.add_child("classes")?;
            for (role, comp) in &self.classes {
                classes.add_leaf(role, comp.as_str())?;
            }
            let state = t.add_child("state")?;
            state.add_leaf("keys_state_spect", self.keys_state_spect.join(","))?;
            state.add_leaf("keys_state_phys", self.keys_state_phys.join(","))?;
            state.add_leaf("keys_computable", self.keys_computable.join(","))?;
            Ok(())
        };
        build(&mut t).expect("role names are valid identifiers");
        t.freeze();
        t
    }

    pub fn from_tree(tree: &ParamTree) -> Result<Self> {
        let split = |s: &str| -> Vec<String> {
            s.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect()
        };
        let mut classes = IndexMap::new();
        for (role, comp) in tree.subtree("classes")?.leaves() {
            match comp {
                ParamValue::Str(c) => {
                    classes.insert(role.to_string(), c.clone());
                }
                other => {
                    return Err(Error::TypeMismatch {
                        path: format!("classes.{role}"),
                        expected: "string",
                        found: other.type_name(),
                    })
                }
            }
        }
        let info = SolverInfo {
            short_name: tree.get_str("short_name")?.to_string(),
            dims: usize::try_from(tree.get_int("dims")?)
                .map_err(|_| Error::Config("negative dims".into()))?,
            classes,
            keys_state_spect: split(tree.get_str("state.keys_state_spect")?),
            keys_state_phys: split(tree.get_str("state.keys_state_phys")?),
            keys_computable: split(tree.get_str("state.keys_computable")?),
        };
        Ok(info)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_tree(&params::deserialize(text)?)
    }
}

impl fmt::Display for SolverInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&params::serialize(&self.to_tree()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_then_parse_is_lossless() {
        let info = SolverInfo::new("ns3d", 3, &["vx_fft", "vy_fft", "vz_fft"], &["vx", "vy", "vz"], &["rotz"])
            .with_class("Forcing", "ForcingNS3D");
        let text = info.to_string();
        assert!(text.contains("keys_state_spect = \"vx_fft,vy_fft,vz_fft\""));
        assert_eq!(SolverInfo::parse(&text).unwrap(), info);
        info.validate().unwrap();
    }

    #[test]
    fn unpaired_keys_are_invalid() {
        let info = SolverInfo::new("bad", 1, &["a_fft"], &[], &[]);
        assert!(info.validate().is_err());
    }
}
