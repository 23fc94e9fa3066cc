use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use super::{Equation, EquationBuilder, SolverInfo};
use crate::error::{Error, Result};
use crate::operators::SpectralGrid;
use crate::params::ParamTree;
use crate::solvers;

/// Hook adding solver-specific parameters to the common tree.
pub type ParamsCustomizer = dyn Fn(&mut ParamTree) -> Result<()> + Send + Sync;

/// A registered solver: its descriptor, a hook adding solver-specific
/// parameters on top of the common tree, and the equation constructor.
#[derive(Clone)]
pub struct SolverEntry {
    pub info: SolverInfo,
    pub customize_params: Arc<ParamsCustomizer>,
    pub build: Arc<EquationBuilder>,
}

impl SolverEntry {
    pub fn new(
        info: SolverInfo,
        customize_params: impl Fn(&mut ParamTree) -> Result<()> + Send + Sync + 'static,
        build: impl Fn(&ParamTree, &SpectralGrid) -> Result<Box<dyn Equation>> + Send + Sync + 'static,
    ) -> Self {
        SolverEntry {
            info,
            customize_params: Arc::new(customize_params),
            build: Arc::new(build),
        }
    }
}

fn registry() -> &'static RwLock<BTreeMap<String, SolverEntry>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, SolverEntry>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map = BTreeMap::new();
        for entry in solvers::builtin_entries() {
            map.insert(entry.info.short_name.clone(), entry);
        }
        RwLock::new(map)
    })
}

pub fn register_solver(entry: SolverEntry) -> Result<()> {
    entry.info.validate()?;
    let mut map = registry().write().unwrap_or_else(|e| e.into_inner());
    if map.contains_key(&entry.info.short_name) {
        return Err(Error::DuplicateSolver(entry.info.short_name.clone()));
    }
    map.insert(entry.info.short_name.clone(), entry);
    Ok(())
}

pub fn registered_solvers() -> Vec<String> {
    registry()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .keys()
        .cloned()
        .collect()
}

pub(crate) fn entry(short_name: &str) -> Result<SolverEntry> {
    let map = registry().read().unwrap_or_else(|e| e.into_inner());
    map.get(short_name).cloned().ok_or_else(|| Error::UnknownSolver {
        name: short_name.to_string(),
        known: map.keys().cloned().collect(),
    })
}

pub fn resolve(short_name: &str) -> Result<SolverInfo> {
    entry(short_name).map(|e| e.info)
}

/// Default parameters of a registered solver, with a frozen structure.
pub fn create_default_params(solver_id: &str) -> Result<ParamTree> {
    let entry = entry(solver_id)?;
    let mut tree = common_params(&entry.info)?;
    (entry.customize_params)(&mut tree)?;
    tree.freeze();
    Ok(tree)
}

fn common_params(info: &SolverInfo) -> Result<ParamTree> {
    let mut t = ParamTree::new("params");
    t.add_leaf("solver", info.short_name.as_str())?;
    t.add_leaf("nu_2", 0.0)?;

    let oper = t.add_child("oper")?;
    let n_default: i64 = if info.dims == 3 { 32 } else { 64 };
    for axis in ["x", "y", "z"].iter().take(info.dims) {
        oper.add_leaf(&format!("n{axis}"), n_default)?;
    }
    for axis in ["x", "y", "z"].iter().take(info.dims) {
        oper.add_leaf(&format!("L{axis}"), 2.0 * PI)?;
    }
    oper.add_leaf("coef_dealiasing", 2.0 / 3.0)?;

    let ts = t.add_child("time_stepping")?;
    ts.add_leaf("scheme", "RK4")?;
    ts.add_leaf("use_cfl", true)?;
    ts.add_leaf("cfl_coef", 0.5)?;
    ts.add_leaf("deltat_max", 0.1)?;
    ts.add_leaf("deltat0", 0.01)?;
    ts.add_leaf("use_t_end", true)?;
    ts.add_leaf("t_end", 1.0)?;
    ts.add_leaf("it_end", 10i64)?;

    let init = t.add_child("init_fields")?;
    init.add_leaf("type", "noise")?;
    init.add_child("constant")?.add_leaf("value", 1.0)?;
    let noise = init.add_child("noise")?;
    noise.add_leaf("seed", 0i64)?;
    noise.add_leaf("k_min", 2.0)?;
    noise.add_leaf("k_max", 8.0)?;
    noise.add_leaf("energy", 0.5)?;
    let dipole = init.add_child("dipole")?;
    dipole.add_leaf("circulation", 1.0)?;
    dipole.add_leaf("radius", 0.3)?;
    let from_file = init.add_child("from_file")?;
    from_file.add_leaf("path", "")?;

    let forcing = t.add_child("forcing")?;
    forcing.add_leaf("enable", false)?;
    forcing.add_leaf("k_min", 3.0)?;
    forcing.add_leaf("k_max", 5.0)?;
    forcing.add_leaf("injection_rate", 1.0)?;
    forcing.add_leaf("seed", 1i64)?;

    let output = t.add_child("output")?;
    output.add_leaf("has_to_save", false)?;
    output.add_leaf("sim_dir_root", ".")?;
    output.add_leaf("period_save", 0.5)?;
    output.add_leaf("period_print", 10i64)?;
    output.add_leaf("verbose", false)?;
    let incr = output.add_child("increments")?;
    incr.add_leaf("orders", vec![2.0, 3.0, 4.0])?;
    incr.add_leaf("n_separations", 8i64)?;

    let pre = t.add_child("preprocess")?;
    pre.add_leaf("enable", false)?;
    pre.add_leaf("rescale_energy", false)?;
    pre.add_leaf("target_energy", 1.0)?;
    pre.add_leaf("viscosity_from_resolution", false)?;
    pre.add_leaf("viscosity_const", 1.0)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{deserialize, serialize};

    #[test]
    fn builtins_are_registered() {
        let names = registered_solvers();
        for n in ["trivial", "ad1d", "ns2d", "ns3d"] {
            assert!(names.iter().any(|x| x == n), "{n} missing");
        }
    }

    #[test]
    fn unknown_solver_lists_registered_names() {
        match resolve("nope").unwrap_err() {
            Error::UnknownSolver { name, known } => {
                assert_eq!(name, "nope");
                assert!(known.contains(&"ns2d".to_string()));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(create_default_params("no_such"), Err(Error::UnknownSolver { .. })));
    }

    #[test]
    fn duplicate_registration_fails() {
        let entry = super::entry("ns2d").unwrap();
        assert!(matches!(register_solver(entry), Err(Error::DuplicateSolver(_))));
    }

    #[test]
    fn default_params_contain_required_leaves() {
        let t = create_default_params("ns2d").unwrap();
        assert!(!t.get_bool("forcing.enable").unwrap());
        assert!(t.get_f64("nu_2").is_ok());
        for sub in ["oper", "time_stepping", "init_fields", "forcing", "output", "preprocess"] {
            assert!(t.child(sub).is_some(), "{sub}");
        }
        assert!(t.is_frozen());
    }

    #[test]
    fn default_params_round_trip_for_every_solver() {
        for name in registered_solvers() {
            let t = create_default_params(&name).unwrap();
            assert!(deserialize(&serialize(&t)).unwrap().bit_eq(&t), "{name}");
        }
    }
}
