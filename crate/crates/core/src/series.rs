use crate::band::BandSet;
use crate::date::Date;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::image::MaskedImage;

/// One dated multiband observation: one `MaskedImage` per band, band order
/// matching the owning series' `BandSet`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEntry {
    pub date: Date,
    pub images: Vec<MaskedImage>,
}

/// Date-ordered multiband image time series on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSeries {
    grid: Grid,
    band_set: BandSet,
    entries: Vec<SeriesEntry>,
}

impl ImageSeries {
    pub fn new(grid: Grid, band_set: BandSet, entries: Vec<SeriesEntry>) -> Result<Self> {
        for pair in entries.windows(2) {
            if pair[0].date >= pair[1].date {
                return Err(Error::InvalidConfig(format!(
                    "series dates must be strictly increasing: {} then {}",
                    pair[0].date, pair[1].date
                )));
            }
        }
        for entry in &entries {
            if entry.images.len() != band_set.len() {
                return Err(Error::dimension_mismatch(
                    format!("band count at {}", entry.date),
                    band_set.len(),
                    entry.images.len(),
                ));
            }
            for img in &entry.images {
                if img.grid() != &grid {
                    return Err(Error::GridMismatch(format!(
                        "entry {} is not on the series grid",
                        entry.date
                    )));
                }
            }
        }
        Ok(ImageSeries {
            grid,
            band_set,
            entries,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn band_set(&self) -> &BandSet {
        &self.band_set
    }

    pub fn entries(&self) -> &[SeriesEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = Date> + '_ {
        self.entries.iter().map(|e| e.date)
    }

    pub fn position(&self, date: Date) -> Option<usize> {
        self.entries.iter().position(|e| e.date == date)
    }

    pub fn entry(&self, date: Date) -> Option<&SeriesEntry> {
        self.position(date).map(|i| &self.entries[i])
    }

    /// Image for `(date, band index)`.
    pub fn image(&self, date: Date, band: usize) -> Option<&MaskedImage> {
        self.entry(date).and_then(|e| e.images.get(band))
    }

    /// Removes `date` from the series, returning the reduced series and the
    /// withheld entry untouched.
    pub fn holdout(&self, date: Date) -> Result<(ImageSeries, SeriesEntry)> {
        let idx = self
            .position(date)
            .ok_or_else(|| Error::DateNotFound(date.to_string()))?;
        let mut entries = self.entries.clone();
        let held = entries.remove(idx);
        Ok((
            ImageSeries {
                grid: self.grid.clone(),
                band_set: self.band_set.clone(),
                entries,
            },
            held,
        ))
    }

    /// Re-inserts an entry at its date-ordered position.
    pub fn insert(&self, entry: SeriesEntry) -> Result<ImageSeries> {
        let mut entries = self.entries.clone();
        let pos = entries.partition_point(|e| e.date < entry.date);
        entries.insert(pos, entry);
        ImageSeries::new(self.grid.clone(), self.band_set.clone(), entries)
    }

    /// Applies `f` to every image, producing a new series on `new_grid`.
    pub fn map_images(
        &self,
        new_grid: Grid,
        mut f: impl FnMut(&MaskedImage) -> Result<MaskedImage>,
    ) -> Result<ImageSeries> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let images = e.images.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
            entries.push(SeriesEntry {
                date: e.date,
                images,
            });
        }
        ImageSeries::new(new_grid, self.band_set.clone(), entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> ImageSeries {
        let grid = Grid::new(0.0, 0.0, 1.0, 2, 2).unwrap();
        let bands = BandSet::from_names(["red"]).unwrap();
        let entries = (0..4)
            .map(|k| SeriesEntry {
                date: "2023-01-01".parse::<Date>().unwrap().add_days(10 * k),
                images: vec![MaskedImage::constant(grid.clone(), k as f64)],
            })
            .collect();
        ImageSeries::new(grid, bands, entries).unwrap()
    }

    #[test]
    fn rejects_unsorted_dates() {
        let grid = Grid::new(0.0, 0.0, 1.0, 1, 1).unwrap();
        let bands = BandSet::from_names(["red"]).unwrap();
        let d: Date = "2023-05-01".parse().unwrap();
        let mk = |date| SeriesEntry {
            date,
            images: vec![MaskedImage::constant(grid.clone(), 0.0)],
        };
        assert!(ImageSeries::new(grid.clone(), bands.clone(), vec![mk(d), mk(d)]).is_err());
        let reversed = vec![mk(d.add_days(1)), mk(d)];
        assert!(ImageSeries::new(grid, bands, reversed).is_err());
    }

    #[test]
    fn holdout_then_insert_restores_series() {
        let s = series();
        let date = s.entries()[1].date;
        let (reduced, held) = s.holdout(date).unwrap();
        assert_eq!(reduced.len(), s.len() - 1);
        assert_eq!(held, s.entries()[1]);
        assert_eq!(reduced.insert(held).unwrap(), s);
    }

    #[test]
    fn holdout_missing_date_fails() {
        let s = series();
        let absent: Date = "1999-01-01".parse().unwrap();
        assert!(matches!(s.holdout(absent), Err(Error::DateNotFound(_))));
    }
}
