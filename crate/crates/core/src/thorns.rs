//! The stock thorns.
//!
//! `grid`, `driver`, `amr`, `mol`, `io` and `http` are always active. The
//! physics thorns (`wave`, `hydro`) are activated by a parameter file that
//! sets any of their parameters; both may be active at once.

use crate::driver::amr::{AmrSettings, BufferSpec, CentreOfInterest, InterpSpec};
use crate::driver::{build_driver, Driver, DriverConfig, EvolvedSystem, Execution};
use crate::flesh::{
    parse_assignments, Bin, EvolvedSpec, Flesh, FleshError, LevelContext, Manifest, ParamTable, ParameterSpec, ScheduleItem,
    VariableGroup,
};
use crate::grid::{Boundary, DomainSpec};
use crate::mol::{integrator, substeps_of, IntegratorSpec, Scheme};
use crate::physics::hydro::{self, Euler, HydroInit};
use crate::physics::wave::{self, WaveEquation, WaveInit};
use crate::physics::Physics;
use crate::registry::Registry;
use std::collections::BTreeSet;
use std::sync::Arc;

/// A component that contributes a manifest to the flesh.
pub trait Thorn: Send + Sync {
    fn name(&self) -> &'static str;
    fn manifest(&self) -> Manifest;
}

/// Thorns registered with every simulation.
pub const BASE_THORNS: [&str; 6] = ["grid", "driver", "amr", "mol", "io", "http"];

macro_rules! thorn {
    ($ty:ident, $name:literal, $f:path) => {
        pub struct $ty;
        impl Thorn for $ty {
            fn name(&self) -> &'static str {
                $name
            }
            fn manifest(&self) -> Manifest {
                $f()
            }
        }
    };
}

thorn!(GridThorn, "grid", grid_manifest);
thorn!(DriverThorn, "driver", driver_manifest);
thorn!(AmrThorn, "amr", amr_manifest);
thorn!(MolThorn, "mol", mol_manifest);
thorn!(WaveThorn, "wave", wave_manifest);
thorn!(HydroThorn, "hydro", hydro_manifest);
thorn!(IoThorn, "io", io_manifest);
thorn!(HttpThorn, "http", http_manifest);

pub fn thorns() -> Registry<dyn Thorn> {
    let mut r: Registry<dyn Thorn> = Registry::new("thorn");
    r.register_simple("grid", || Box::new(GridThorn));
    r.register_simple("driver", || Box::new(DriverThorn));
    r.register_simple("amr", || Box::new(AmrThorn));
    r.register_simple("mol", || Box::new(MolThorn));
    r.register_simple("wave", || Box::new(WaveThorn));
    r.register_simple("hydro", || Box::new(HydroThorn));
    r.register_simple("io", || Box::new(IoThorn));
    r.register_simple("http", || Box::new(HttpThorn));
    r
}

/// A flesh holding the base thorns plus `extra`.
pub fn flesh_with(extra: &[&str]) -> Result<Flesh, FleshError> {
    let reg = thorns();
    let mut flesh = Flesh::new();
    let mut names: Vec<&str> = BASE_THORNS.to_vec();
    names.extend(extra.iter().filter(|n| !BASE_THORNS.contains(n)));
    for name in names {
        let t = reg.create(name).map_err(|e| FleshError::Config(e.to_string()))?;
        flesh.register_thorn(t.manifest())?;
    }
    Ok(flesh)
}

/// The flesh a parameter file asks for: base thorns plus every physics
/// thorn whose parameters it sets.
pub fn flesh_for_parameters(text: &str) -> Result<Flesh, FleshError> {
    let reg = thorns();
    let prefixes: BTreeSet<String> = parse_assignments(text)?
        .into_iter()
        .filter_map(|(_, key, _)| key.split("::").next().map(str::to_string))
        .collect();
    let extra: Vec<&str> = prefixes
        .iter()
        .map(String::as_str)
        .filter(|p| !BASE_THORNS.contains(p) && *p != "flesh" && reg.contains(p))
        .collect();
    flesh_with(&extra)
}

fn cfg(e: impl ToString) -> String {
    e.to_string()
}

fn grid_manifest() -> Manifest {
    Manifest::new("grid")
        .param(ParameterSpec::string("grid::points", "32").describe("points per dimension: `n` or `nx,ny,nz`"))
        .param(ParameterSpec::string("grid::lower", "0").describe("lower bound: one value or `x,y,z`"))
        .param(ParameterSpec::string("grid::upper", "1").describe("upper bound: one value or `x,y,z`"))
        .param(ParameterSpec::keyword("grid::boundary", "periodic", &["periodic", "outer-copy"]))
        .param(
            ParameterSpec::keyword("grid::coordinates", "vertex", &["vertex", "cell"])
                .describe("`cell` places points at cell centres, half a spacing inside the bounds"),
        )
}

/// The domain described by the `grid::` and `driver::ghost_width` parameters.
pub fn domain_from(params: &ParamTable) -> Result<DomainSpec, FleshError> {
    let text = params.str("grid::points")?;
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| FleshError::BadValue {
            name: "grid::points".into(),
            reason: format!("expected `n` or `nx,ny,nz`, got {text:?}"),
        })?;
    let points = match parts[..] {
        [n] => [n; 3],
        [a, b, c] => [a, b, c],
        _ => {
            return Err(FleshError::BadValue {
                name: "grid::points".into(),
                reason: format!("expected 1 or 3 entries, got {text:?}"),
            })
        }
    };
    let (lower, upper) = bounds(params)?;
    let boundary: Boundary = params
        .str("grid::boundary")?
        .parse()
        .map_err(|e: crate::grid::GridError| FleshError::Config(e.to_string()))?;
    let cell = params.str("grid::coordinates")? == "cell";
    let mut origin = lower;
    let mut spacing = [0.0; 3];
    for d in 0..3 {
        let n = points[d] as f64;
        spacing[d] = if cell || boundary == Boundary::Periodic {
            (upper[d] - lower[d]) / n
        } else {
            (upper[d] - lower[d]) / (n - 1.0).max(1.0)
        };
        if cell {
            origin[d] = lower[d] + 0.5 * spacing[d];
        }
    }
    Ok(DomainSpec {
        points,
        origin,
        spacing,
        boundary,
        ghost: params.int("driver::ghost_width")? as usize,
    })
}

/// Per-axis domain bounds from `grid::lower` and `grid::upper`.
pub fn bounds(params: &ParamTable) -> Result<([f64; 3], [f64; 3]), FleshError> {
    let read = |name: &str| -> Result<[f64; 3], FleshError> {
        let text = params.str(name)?;
        match text.parse::<f64>() {
            Ok(x) => Ok([x; 3]),
            Err(_) => triple(name, text),
        }
    };
    let (lower, upper) = (read("grid::lower")?, read("grid::upper")?);
    if (0..3).any(|d| !(upper[d] > lower[d])) {
        return Err(FleshError::BadValue {
            name: "grid::upper".into(),
            reason: format!("must exceed grid::lower on every axis ({upper:?} vs {lower:?})"),
        });
    }
    Ok((lower, upper))
}

fn driver_manifest() -> Manifest {
    Manifest::new("driver")
        .param(ParameterSpec::keyword("driver::name", "unigrid", &["unigrid", "amr"]))
        .param(ParameterSpec::int("driver::nranks", 1).range(1.0, 4096.0))
        .param(ParameterSpec::keyword("driver::strategy", "neighbors", &["directional", "neighbors"]))
        .param(ParameterSpec::int("driver::ghost_width", 3).range(0.0, 8.0))
        .param(ParameterSpec::keyword("driver::execution", "sequential", &["sequential", "parallel"]))
        .driver(Arc::new(|params: &ParamTable| driver_from(params).map_err(cfg)))
}

/// Build the driver the parameters describe.
pub fn driver_from(params: &ParamTable) -> Result<Box<dyn Driver>, FleshError> {
    let domain = domain_from(params)?;
    let execution: Execution = params.str("driver::execution")?.parse().map_err(FleshError::Config)?;
    let config = DriverConfig {
        domain,
        nranks: params.int("driver::nranks")? as usize,
        strategy: params.str("driver::strategy")?.to_string(),
        execution,
        amr: amr_settings_from(params)?,
    };
    Ok(build_driver(params.str("driver::name")?, &config)?)
}

fn amr_manifest() -> Manifest {
    Manifest::new("amr")
        .param(ParameterSpec::int("amr::nlevels", 1).range(1.0, 16.0))
        .param(ParameterSpec::int("amr::spatial_order", 5).allowed(&["1", "3", "5", "7"]))
        .param(ParameterSpec::int("amr::time_order", 2).range(0.0, 4.0))
        .param(
            ParameterSpec::int("amr::buffer_factor", 1)
                .range(0.0, 8.0)
                .describe("buffer width in units of (integrator substeps x ghost width); 0 disables buffers"),
        )
        .param(
            ParameterSpec::string("amr::centres", "")
                .describe("`x,y,z:w1,w2,...` per centre, separated by `;`; half-widths in coarse spacings"),
        )
}

pub fn parse_centres(text: &str) -> Result<Vec<CentreOfInterest>, FleshError> {
    let bad = |reason: String| FleshError::BadValue {
        name: "amr::centres".into(),
        reason,
    };
    let nums = |s: &str| -> Result<Vec<f64>, FleshError> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("bad number {x:?}"))))
            .collect()
    };
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|c| {
            let (pos, widths) = c.split_once(':').ok_or_else(|| bad(format!("centre {c:?} needs `x,y,z:widths`")))?;
            let p = nums(pos)?;
            if p.len() != 3 {
                return Err(bad(format!("centre position {pos:?} needs three coordinates")));
            }
            Ok(CentreOfInterest::new([p[0], p[1], p[2]], &nums(widths)?))
        })
        .collect()
}

pub fn amr_settings_from(params: &ParamTable) -> Result<AmrSettings, FleshError> {
    let interp = InterpSpec::new(params.int("amr::spatial_order")? as usize, params.int("amr::time_order")? as usize)?;
    let scheme: Scheme = params.str("mol::scheme")?.parse().map_err(|e| FleshError::Config(format!("{e}")))?;
    let substeps = substeps_of(&IntegratorSpec { scheme, cfl: 1.0 });
    let radius = params.int("driver::ghost_width")? as usize;
    let factor = params.int("amr::buffer_factor")? as usize;
    Ok(AmrSettings {
        nlevels: params.int("amr::nlevels")? as usize,
        centres: parse_centres(params.str("amr::centres")?)?,
        interp,
        buffer: if factor == 0 {
            BufferSpec::none()
        } else {
            BufferSpec {
                width: factor * BufferSpec::for_integrator(substeps, radius).width,
            }
        },
    })
}

fn mol_manifest() -> Manifest {
    Manifest::new("mol")
        .param(ParameterSpec::keyword("mol::scheme", "rk4", &["euler", "rk2", "rk3", "rk4"]))
        .param(ParameterSpec::real("mol::cfl", 0.25).range(1e-6, 1.0).steerable())
        .item(ScheduleItem::level("mol::evolve", Bin::Evol, mol_evolve))
        .time_step(Arc::new(|driver: &dyn Driver, params: &ParamTable, evolved: &[EvolvedSpec]| {
            mol_time_step(driver, params, evolved)
        }))
}

/// `cfl * h / v`, with `h` the smallest coarse spacing and `v` the largest
/// characteristic speed over the coarse blocks of every evolved system.
pub fn mol_time_step(driver: &dyn Driver, params: &ParamTable, evolved: &[EvolvedSpec]) -> Result<f64, String> {
    let cfl = params.real("mol::cfl").map_err(cfg)?;
    let h = driver.domain().spacing.iter().copied().fold(f64::INFINITY, f64::min);
    if evolved.is_empty() {
        return params.real("flesh::dt").map_err(cfg);
    }
    let layout = driver.layout();
    let mut speed: f64 = 0.0;
    for spec in evolved {
        let physics = (spec.physics)(params)?;
        let gi = layout.group_index(&spec.group).map_err(cfg)?;
        for p in driver.patches().into_iter().filter(|p| p.level == 0) {
            speed = speed.max(physics.max_speed(&driver.geom(p), &p.storage[gi].levels[0]));
        }
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(format!("cannot choose a time step: largest characteristic speed is {speed}"));
    }
    Ok(cfl * h / speed)
}

fn mol_evolve(ctx: &mut LevelContext<'_>) -> Result<(), String> {
    if ctx.evolved.is_empty() {
        return Ok(());
    }
    let dt = match ctx.time_step {
        Some(p) => p(&*ctx.driver, ctx.params, ctx.evolved)?,
        None => ctx.params.real("flesh::dt").map_err(cfg)?,
    };
    let scheme: Scheme = ctx.params.str("mol::scheme").map_err(cfg)?.parse().map_err(cfg)?;
    let integ = integrator(scheme);
    let physics: Vec<Box<dyn Physics>> = ctx.evolved.iter().map(|s| (s.physics)(ctx.params)).collect::<Result<_, _>>()?;
    let systems: Vec<EvolvedSystem<'_>> = ctx
        .evolved
        .iter()
        .zip(&physics)
        .map(|(s, p)| EvolvedSystem {
            group: &s.group,
            physics: p.as_ref(),
        })
        .collect();
    ctx.driver.evolve(&systems, integ.as_ref(), dt).map_err(cfg)
}

fn triple<T: std::str::FromStr>(name: &str, text: &str) -> Result<[T; 3], FleshError> {
    let v: Vec<T> = text
        .split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| FleshError::BadValue {
            name: name.into(),
            reason: format!("expected three comma-separated numbers, got {text:?}"),
        })?;
    <[T; 3]>::try_from(v).map_err(|_| FleshError::BadValue {
        name: name.into(),
        reason: format!("expected three entries, got {text:?}"),
    })
}

pub const WAVE_GROUP: &str = "wave::evolved";

fn wave_manifest() -> Manifest {
    Manifest::new("wave")
        .group(VariableGroup::new(WAVE_GROUP, &["phi", "pi"], wave::GHOST_WIDTH, 3))
        .param(ParameterSpec::real("wave::c", 1.0).range(1e-12, 1e12))
        .param(ParameterSpec::real("wave::epsilon", 0.1).range(0.0, 1.0))
        .param(ParameterSpec::keyword(
            "wave::initial_data",
            "gaussian",
            &["minkowski-constant", "gaussian", "plane"],
        ))
        .param(ParameterSpec::real("wave::amplitude", 1.0))
        .param(ParameterSpec::real("wave::sigma", 0.1).range(1e-12, 1e12))
        .param(ParameterSpec::string("wave::centre", "0.5,0.5,0.5"))
        .param(ParameterSpec::string("wave::wavenumber", "1,0,0"))
        .evolve(WAVE_GROUP, Arc::new(|p: &ParamTable| wave_physics(p).map(|w| Box::new(w) as Box<dyn Physics>).map_err(cfg)))
        .item(
            ScheduleItem::block("wave::initial", Bin::Initial, |view, ctx| {
                let init = wave_init_from(ctx.params).map_err(cfg)?;
                let c = ctx.params.real("wave::c").map_err(cfg)?;
                let geom = view.geom;
                let times = view.level_times.to_vec();
                let g = view.group_mut(WAVE_GROUP)?;
                for (tl, t) in times.iter().enumerate().take(g.levels.len()) {
                    for q in geom.ext.points() {
                        let (phi, pi) = init.eval(geom.coord(q), *t, c);
                        let o = geom.ext.offset(q);
                        g.levels[tl][wave::PHI][o] = phi;
                        g.levels[tl][wave::PI_VAR][o] = pi;
                    }
                }
                Ok(())
            })
            .writes(WAVE_GROUP),
        )
}

pub fn wave_physics(params: &ParamTable) -> Result<WaveEquation, FleshError> {
    WaveEquation::new(params.real("wave::c")?, params.real("wave::epsilon")?).map_err(|e| FleshError::Config(e.to_string()))
}

pub fn wave_init_from(params: &ParamTable) -> Result<WaveInit, FleshError> {
    let amplitude = params.real("wave::amplitude")?;
    let init = match params.str("wave::initial_data")? {
        "minkowski-constant" => WaveInit::MinkowskiConstant,
        "gaussian" => WaveInit::Gaussian {
            amplitude,
            sigma: params.real("wave::sigma")?,
            centre: triple("wave::centre", params.str("wave::centre")?)?,
        },
        _ => {
            let (lo, hi) = bounds(params)?;
            WaveInit::Plane {
                amplitude,
                wavenumber: triple("wave::wavenumber", params.str("wave::wavenumber")?)?,
                origin: lo,
                periods: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
            }
        }
    };
    init.validate().map_err(|e| FleshError::Config(e.to_string()))?;
    Ok(init)
}

/// Total wave energy over the coarse level (ghosts must be valid).
pub fn wave_energy(driver: &dyn Driver, c: f64) -> Result<f64, FleshError> {
    let gi = driver.layout().group_index(WAVE_GROUP)?;
    Ok(driver
        .patches()
        .into_iter()
        .filter(|p| p.level == 0)
        .map(|p| wave::block_energy(&driver.geom(p), &p.storage[gi].levels[0], c))
        .sum())
}

pub const HYDRO_GROUP: &str = "hydro::conserved";

fn hydro_manifest() -> Manifest {
    Manifest::new("hydro")
        .group(VariableGroup::new(HYDRO_GROUP, &hydro::VARS, hydro::GHOST_WIDTH, 1))
        .param(ParameterSpec::real("hydro::gamma", 1.4).range(1.000001, 10.0))
        .param(ParameterSpec::keyword("hydro::reconstruction", "ppm", &["ppm", "plm-minmod"]))
        .param(ParameterSpec::real("hydro::rho_floor", 1e-10).range(1e-300, 1.0))
        .param(ParameterSpec::keyword(
            "hydro::initial_data",
            "shocktube",
            &["shocktube", "uniform", "density-wave"],
        ))
        .param(ParameterSpec::int("hydro::axis", 0).range(0.0, 2.0))
        .evolve(HYDRO_GROUP, Arc::new(|p: &ParamTable| hydro_physics(p).map(|h| Box::new(h) as Box<dyn Physics>).map_err(cfg)))
        .item(
            ScheduleItem::level("hydro::initial", Bin::Initial, |ctx| {
                let init = hydro_init_from(ctx.params, ctx.driver.domain()).map_err(cfg)?;
                let eos = hydro_physics(ctx.params).map_err(cfg)?.eos;
                ctx.driver
                    .for_each_block(&|view| {
                        let geom = view.geom;
                        let g = view.group_mut(HYDRO_GROUP)?;
                        for q in geom.ext.points() {
                            let u = init.conserved(geom.coord(q), &eos);
                            let o = geom.ext.offset(q);
                            for tl in g.levels.iter_mut() {
                                for (v, x) in tl.iter_mut().zip(u) {
                                    v[o] = x;
                                }
                            }
                        }
                        Ok(())
                    })
                    .map_err(cfg)
            })
            .writes(HYDRO_GROUP),
        )
}

pub fn hydro_physics(params: &ParamTable) -> Result<Euler, FleshError> {
    Euler::new(
        params.real("hydro::gamma")?,
        params.str("hydro::reconstruction")?,
        params.real("hydro::rho_floor")?,
    )
    .map_err(|e| FleshError::Config(e.to_string()))
}

pub fn hydro_init_from(params: &ParamTable, domain: &DomainSpec) -> Result<HydroInit, FleshError> {
    Ok(match params.str("hydro::initial_data")? {
        "shocktube" => hydro::shocktube_init(params.int("hydro::axis")? as usize, domain),
        "uniform" => HydroInit::Uniform { state: hydro::SOD_LEFT },
        _ => {
            let (lo, hi) = bounds(params)?;
            HydroInit::DensityWave {
                amplitude: 0.2,
                velocity: [1.0, 0.5, 0.25],
                origin: lo,
                periods: [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]],
            }
        }
    })
}

fn io_manifest() -> Manifest {
    Manifest::new("io")
        .param(
            ParameterSpec::int("io::out_every", 0)
                .at_least(0.0)
                .steerable()
                .describe("write variables every this many iterations; 0 disables"),
        )
        .param(ParameterSpec::string("io::out_dir", "").describe("directory for variable output; empty records events only"))
        .param(ParameterSpec::string("io::strategy", "per-rank").describe("single-collector, every-nth(n) or per-rank"))
        .param(ParameterSpec::int("io::checkpoint_every", 0).at_least(0.0).steerable())
        .param(ParameterSpec::string("io::checkpoint_dir", ""))
        .item(ScheduleItem::level("io::output", Bin::Output, |ctx| {
            let every = ctx.params.int("io::out_every").map_err(cfg)?;
            if every <= 0 || ctx.iteration % every as u64 != 0 {
                return Ok(());
            }
            let dir = ctx.params.str("io::out_dir").map_err(cfg)?.to_string();
            let detail = if dir.is_empty() {
                String::new()
            } else {
                let strategy = ctx.params.str("io::strategy").map_err(cfg)?;
                let files = crate::io::write_vars(&*ctx.driver, &[], strategy, std::path::Path::new(&dir), ctx.iteration).map_err(cfg)?;
                files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>().join(",")
            };
            ctx.record("output", detail);
            Ok(())
        }))
        .item(
            ScheduleItem::level("io::checkpoint", Bin::Output, |ctx| {
                let every = ctx.params.int("io::checkpoint_every").map_err(cfg)?;
                let dir = ctx.params.str("io::checkpoint_dir").map_err(cfg)?.to_string();
                if every <= 0 || ctx.iteration == 0 || ctx.iteration % every as u64 != 0 || dir.is_empty() {
                    return Ok(());
                }
                let path = std::path::Path::new(&dir).join(format!("it{:08}", ctx.iteration));
                crate::io::checkpoint_write(&*ctx.driver, ctx.params, ctx.iteration, &path).map_err(cfg)?;
                ctx.record("checkpoint", path.display().to_string());
                Ok(())
            })
            .after("io::output"),
        )
}

fn http_manifest() -> Manifest {
    Manifest::new("http")
        .param(ParameterSpec::boolean("http::enabled", false))
        .param(ParameterSpec::int("http::port", 8080).range(0.0, 65535.0))
        .param(ParameterSpec::string("http::bind", "127.0.0.1"))
}
