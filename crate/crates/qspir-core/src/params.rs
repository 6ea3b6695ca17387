use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Threat model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Model {
    /// Eavesdroppers, collusion, communication, unresponsiveness. No Byzantine servers.
    Xeutspir,
    /// Adds Byzantine servers; the eavesdropper taps the same links both ways.
    XbeutspirStatic,
    /// Adds Byzantine servers; uplink and downlink taps may differ.
    XbeutspirDynamic,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Xeutspir, Model::XbeutspirStatic, Model::XbeutspirDynamic];

    pub fn name(&self) -> &'static str {
        match self {
            Model::Xeutspir => "xeutspir",
            Model::XbeutspirStatic => "xbeutspir-static",
            Model::XbeutspirDynamic => "xbeutspir-dynamic",
        }
    }

    pub fn byzantine(&self) -> bool {
        !matches!(self, Model::Xeutspir)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xeutspir" | "1" => Ok(Model::Xeutspir),
            "xbeutspir-static" | "2" => Ok(Model::XbeutspirStatic),
            "xbeutspir-dynamic" | "3" => Ok(Model::XbeutspirDynamic),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown model {s}"))),
        }
    }
}

/// System parameters shared by the rate calculator and the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Params {
    pub model: Model,
    pub n: usize,
    pub k: usize,
    pub x: usize,
    pub t: usize,
    pub e: usize,
    pub u: usize,
    pub b: usize,
}

impl Params {
    pub fn new(model: Model, n: usize, k: usize, x: usize, t: usize, e: usize, u: usize, b: usize) -> Self {
        Params {
            model,
            n,
            k,
            x,
            t,
            e,
            u,
            b,
        }
    }

    /// Query noise degree.
    pub fn m(&self) -> usize {
        match self.model {
            Model::XbeutspirDynamic => (self.e + self.b).max(self.t),
            _ => self.e.max(self.t),
        }
    }

    /// Storage noise degree.
    pub fn h(&self) -> usize {
        match self.model {
            Model::Xeutspir => self.x,
            _ => self.x.max(self.b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("N and K must be positive".into()));
        }
        if self.model == Model::Xeutspir && self.b != 0 {
            return Err(Error::InvalidConfig("B must be 0 without Byzantine servers".into()));
        }
        if self.x > self.n || self.t > self.n || self.e > self.n || self.u > self.n || self.b > self.n {
            return Err(Error::InvalidConfig("set sizes exceed N".into()));
        }
        Ok(())
    }
}
