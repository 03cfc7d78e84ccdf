//! Bit-packed spike vectors and rasters.

/// Fixed-length bit vector, one bit per input channel.
///
/// Packed into u64 words so that sparse activity iterates in time
/// proportional to the number of set bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeVector {
    words: Vec<u64>,
    len: usize,
}

impl SpikeVector {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut v = Self::new(len);
        for &i in indices {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "spike index {index} out of range {}", self.len);
        self.words[index / 64] >> (index % 64) & 1 == 1
    }

    pub fn set(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "spike index {index} out of range {}", self.len);
        let mask = 1u64 << (index % 64);
        if value {
            self.words[index / 64] |= mask;
        } else {
            self.words[index / 64] &= !mask;
        }
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    /// Indices of set bits, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + bit)
                }
            })
        })
    }
}

/// Spike output of a layer over time: one `SpikeVector` per cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeRaster {
    neurons: usize,
    rows: Vec<SpikeVector>,
}

impl SpikeRaster {
    pub fn new(neurons: usize) -> Self {
        Self {
            neurons,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: SpikeVector) {
        assert_eq!(row.len(), self.neurons, "raster row width mismatch");
        self.rows.push(row);
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn cycles(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, cycle: usize) -> &SpikeVector {
        &self.rows[cycle]
    }

    pub fn rows(&self) -> &[SpikeVector] {
        &self.rows
    }

    pub fn total_spikes(&self) -> u64 {
        self.rows.iter().map(|r| r.count_ones() as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_iter_roundtrip() {
        let mut v = SpikeVector::new(130);
        for i in [0, 1, 63, 64, 65, 127, 129] {
            v.set(i, true);
        }
        v.set(65, false);
        let ones: Vec<usize> = v.iter_ones().collect();
        assert_eq!(ones, vec![0, 1, 63, 64, 127, 129]);
        assert_eq!(v.count_ones(), 6);
        assert!(v.get(129));
        assert!(!v.get(128));
    }

    #[test]
    fn raster_counts_spikes() {
        let mut raster = SpikeRaster::new(4);
        raster.push(SpikeVector::from_indices(4, &[0, 3]));
        raster.push(SpikeVector::from_indices(4, &[]));
        raster.push(SpikeVector::from_indices(4, &[1]));
        assert_eq!(raster.cycles(), 3);
        assert_eq!(raster.total_spikes(), 3);
    }
}
