use anyhow::{bail, Result};

use crate::config::Config;
use crate::report::Report;

mod brokenpath;
mod germ;
mod groupoid;
mod pairing;
mod perturb;
mod porkbarrel;
mod shiftmap;
mod stokes;

type Runner = fn(&Config, &mut Report) -> Result<()>;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    run: Runner,
}

pub const CATALOG: [Scenario; 8] = [
    Scenario {
        name: "shiftmap",
        description: "sc1 probe of the shift map against the classical Frechet quotient on a sawtooth",
        run: shiftmap::run,
    },
    Scenario {
        name: "porkbarrel",
        description: "tangent dimension of the bump retract versus s, plus a transversal section demo",
        run: porkbarrel::run,
    },
    Scenario {
        name: "brokenpath",
        description: "degeneracy index and local dimension along glued and broken paths",
        run: brokenpath::run,
    },
    Scenario {
        name: "germ",
        description: "contraction germ solution sheets against closed forms, with observed rates",
        run: germ::run,
    },
    Scenario {
        name: "stokes",
        description: "weighted Stokes residual versus quadrature order on disk and two-cap fixtures",
        run: stokes::run,
    },
    Scenario {
        name: "perturb",
        description: "transversal multisection search on the fold and cobordism comparison of two seeds",
        run: perturb::run,
    },
    Scenario {
        name: "groupoid",
        description: "orbit, isotropy, natural representation and refinement reports on Z2 and Z3 fixtures",
        run: groupoid::run,
    },
    Scenario {
        name: "pairing",
        description: "stability of the form pairing with perturbed solution sets across seeds",
        run: pairing::run,
    },
];

pub fn find(name: &str) -> Result<&'static Scenario> {
    match CATALOG.iter().find(|s| s.name == name) {
        Some(s) => Ok(s),
        None => {
            let names: Vec<&str> = CATALOG.iter().map(|s| s.name).collect();
            bail!("unknown scenario `{name}` (expected one of: {})", names.join(", "))
        }
    }
}

pub fn catalog_text() -> String {
    CATALOG
        .iter()
        .map(|s| format!("{:<12}{}\n", s.name, s.description))
        .collect()
}

impl Scenario {
    pub fn run(&self, cfg: &Config) -> Result<Report> {
        let mut report = Report::new(self.name, cfg.seed);
        (self.run)(cfg, &mut report).map_err(|e| e.context(format!("scenario {}", self.name)))?;
        Ok(report)
    }
}
