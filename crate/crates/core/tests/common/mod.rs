#![allow(dead_code)]

use std::sync::OnceLock;

use krs_core::ansatz::BaseFactor;
use krs_core::oracle::pinned_constants;
use krs_core::solver::{solve_momentum, solve_shooting};
use krs_core::{BundleConfig, CurvatureConstants, SolitonSolution, SolverOptions};

pub fn constants() -> &'static CurvatureConstants {
    static C: OnceLock<CurvatureConstants> = OnceLock::new();
    C.get_or_init(|| pinned_constants(2024).unwrap())
}

pub fn two_factor() -> BundleConfig {
    let f = BaseFactor::new(2, 2.0, 1, 1.0).unwrap();
    BundleConfig::new(vec![f, BaseFactor { kappa: 3.0, ..f }]).unwrap()
}

pub fn koiso_cao() -> &'static SolitonSolution {
    static S: OnceLock<SolitonSolution> = OnceLock::new();
    S.get_or_init(|| solve_momentum(&BundleConfig::koiso_cao(), constants(), &SolverOptions::default()).unwrap())
}

pub fn koiso_cao_shooting() -> &'static SolitonSolution {
    static S: OnceLock<SolitonSolution> = OnceLock::new();
    S.get_or_init(|| solve_shooting(&BundleConfig::koiso_cao(), constants(), &SolverOptions::default()).unwrap())
}

pub fn two_factor_solution() -> &'static SolitonSolution {
    static S: OnceLock<SolitonSolution> = OnceLock::new();
    S.get_or_init(|| solve_momentum(&two_factor(), constants(), &SolverOptions::default()).unwrap())
}
