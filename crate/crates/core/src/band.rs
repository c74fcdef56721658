use crate::error::{Error, Result};

/// One spectral band: stable identifier plus optional center wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub wavelength_nm: Option<f64>,
}

impl Band {
    pub fn named(name: impl Into<String>) -> Self {
        Band {
            name: name.into(),
            wavelength_nm: None,
        }
    }

    pub fn with_wavelength(name: impl Into<String>, wavelength_nm: f64) -> Self {
        Band {
            name: name.into(),
            wavelength_nm: Some(wavelength_nm),
        }
    }
}

/// Ordered set of bands shared by every entry of a series.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    bands: Vec<Band>,
}

impl BandSet {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::EmptyInput("band set must contain at least one band".into()));
        }
        for (i, b) in bands.iter().enumerate() {
            if bands[..i].iter().any(|other| other.name == b.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate band identifier {:?}",
                    b.name
                )));
            }
        }
        Ok(BandSet { bands })
    }

    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(names.into_iter().map(|n| Band::named(n)).collect())
    }

    /// Numbered single-band set, handy for synthetic scenes.
    pub fn numbered(count: usize) -> Result<Self> {
        Self::from_names((0..count).map(|i| format!("b{i}")))
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bands.iter().map(|b| b.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.bands.iter().position(|b| b.name == name)
    }
}
