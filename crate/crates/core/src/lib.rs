//! Heralded single-photon distillation through a cavity-QED photon-number
//! parity measurement.
//!
//! A weak coherent pulse reflects from a cavity holding one atom prepared in
//! a superposition of a coupling and a non-coupling ground state. Each photon
//! picks up a relative π phase between the two atomic branches, so a
//! subsequent atomic-state detection projects the light onto odd or even
//! photon number. Detecting the odd outcome heralds a state dominated by its
//! single-photon component.
//!
//! Modules, bottom-up:
//!
//! - [`fockspace`]: truncated Fock-space states, loss channel, Wigner function,
//!   quadrature distributions and photon-number statistics.
//! - [`cavity`]: cavity-QED rates and steady-state input-output amplitudes.
//! - [`distillation`]: the heralded parity map, detection errors and figures of merit.
//! - [`tomography`]: synthetic homodyne data and maximum-likelihood reconstruction.
//! - [`photonstats`]: analytic and Monte Carlo Hanbury Brown–Twiss statistics.
//! - [`calibration`]: loss budgets and the imperfection fit.
//! - [`cli`]: the command-line front end shared by the `photon-distill` binary.
//!
//! Quadratures follow `a = (x + i p)/√2`, so the vacuum has variance 1/2 and
//! the Wigner function of the vacuum peaks at `1/π`. All cavity rates and
//! detunings are carried as plain numbers in units of 2π·MHz.

pub mod calibration;
pub mod cavity;
pub mod cli;
pub mod distillation;
pub mod error;
pub mod fockspace;
pub mod photonstats;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
