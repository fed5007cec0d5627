//! Butcher tableaus of the implicit Runge–Kutta schemes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named implicit schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    RadauIia1,
    RadauIia2,
    RadauIia3,
    Sdirk2,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::ImplicitEuler,
        Scheme::RadauIia1,
        Scheme::RadauIia2,
        Scheme::RadauIia3,
        Scheme::Sdirk2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::RadauIia1 => "radau_iia_1",
            Scheme::RadauIia2 => "radau_iia_2",
            Scheme::RadauIia3 => "radau_iia_3",
            Scheme::Sdirk2 => "sdirk2",
        }
    }

    pub fn tableau(self) -> ButcherTableau {
        make_tableau(self)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "implicit_euler" | "ie" | "euler" => Scheme::ImplicitEuler,
            "radau_iia_1" | "riia1" => Scheme::RadauIia1,
            "radau_iia_2" | "riia2" => Scheme::RadauIia2,
            "radau_iia_3" | "riia3" => Scheme::RadauIia3,
            "sdirk2" | "dirk2" => Scheme::Sdirk2,
            _ => return Err(Error::config(format!("unknown scheme '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub scheme: Scheme,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    /// Classical order.
    pub order: u32,
    pub l_stable: bool,
    pub stiffly_accurate: bool,
    pub dirk: bool,
}

impl ButcherTableau {
    /// Stage count s.
    pub fn stages(&self) -> usize {
        self.b.len()
    }
}

/// Tableau of `scheme`.
pub fn make_tableau(scheme: Scheme) -> ButcherTableau {
    let build = |a: &[f64], b: &[f64], c: &[f64], order, dirk| {
        let s = b.len();
        ButcherTableau {
            scheme,
            a: DMatrix::from_row_slice(s, s, a),
            b: DVector::from_column_slice(b),
            c: DVector::from_column_slice(c),
            order,
            l_stable: true,
            stiffly_accurate: true,
            dirk,
        }
    };
    match scheme {
        Scheme::ImplicitEuler | Scheme::RadauIia1 => build(&[1.0], &[1.0], &[1.0], 1, true),
        Scheme::RadauIia2 => build(
            &[5.0 / 12.0, -1.0 / 12.0, 3.0 / 4.0, 1.0 / 4.0],
            &[3.0 / 4.0, 1.0 / 4.0],
            &[1.0 / 3.0, 1.0],
            3,
            false,
        ),
        Scheme::RadauIia3 => {
            let r = 6f64.sqrt();
            let last = [(16.0 - r) / 36.0, (16.0 + r) / 36.0, 1.0 / 9.0];
            build(
                &[
                    (88.0 - 7.0 * r) / 360.0,
                    (296.0 - 169.0 * r) / 1800.0,
                    (-2.0 + 3.0 * r) / 225.0,
                    (296.0 + 169.0 * r) / 1800.0,
                    (88.0 + 7.0 * r) / 360.0,
                    (-2.0 - 3.0 * r) / 225.0,
                    last[0],
                    last[1],
                    last[2],
                ],
                &last,
                &[(4.0 - r) / 10.0, (4.0 + r) / 10.0, 1.0],
                5,
                false,
            )
        }
        Scheme::Sdirk2 => {
            let g = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
            build(&[g, 0.0, 1.0 - g, g], &[1.0 - g, g], &[g, 1.0], 2, true)
        }
    }
}
