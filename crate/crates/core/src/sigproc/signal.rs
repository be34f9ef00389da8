use std::path::Path;

use crate::error::{Error, Result};

/// Uniformly sampled real trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::invalid(format!(
                "a signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "Signal::new",
                detail: format!("sample {i} is {}", samples[i]),
            });
        }
        Ok(Self { samples, fs })
    }

    pub fn from_fn(n: usize, fs: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(i as f64 / fs)).collect(), fs)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let m = self.mean();
        (self.samples.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.samples.len() as f64)
            .sqrt()
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Same sampling rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.fs)
    }

    /// Pearson correlation with another signal of equal length.
    pub fn correlation(&self, other: &Signal) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::shape(
                "correlation",
                "length",
                self.len(),
                other.len(),
            ));
        }
        let (ma, mb) = (self.mean(), other.mean());
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (a, b) in self.samples.iter().zip(&other.samples) {
            sab += (a - ma) * (b - mb);
            saa += (a - ma).powi(2);
            sbb += (b - mb).powi(2);
        }
        if saa == 0.0 || sbb == 0.0 {
            return Ok(0.0);
        }
        Ok(sab / (saa * sbb).sqrt())
    }

    /// `t_seconds,value` CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_seconds,value\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:?},{:?}\n", i as f64 / self.fs, v));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic_str(path, &self.to_csv())
    }

    /// Parses `t_seconds,value` CSV; the sampling rate is recovered from the
    /// time column, which must be uniformly spaced.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["t_seconds", "value"] {
            return Err(Error::Csv(format!(
                "expected header t_seconds,value, got {headers:?}"
            )));
        }
        let mut t = Vec::new();
        let mut v = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| Error::Csv(format!("row {}: {e}", line + 2)))
            };
            t.push(parse(0)?);
            v.push(parse(1)?);
        }
        if t.len() < 2 {
            return Err(Error::Csv("need at least 2 rows".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Csv("time column must increase".into()));
        }
        for w in t.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) + 1e-9 {
                return Err(Error::Csv("time column is not uniformly spaced".into()));
            }
        }
        let fs = (1.0 / dt * 1e9).round() / 1e9;
        Self::new(v, fs)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        assert!(Signal::new(vec![1.0], 20.0).is_err());
        assert!(Signal::new(vec![1.0, 2.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 20.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = Signal::from_fn(50, 20.0, |t| (t * 3.1).sin() * 1e-3 + 0.1).unwrap();
        let back = Signal::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.samples(), s.samples());
        assert_eq!(back.fs(), 20.0);
        assert!(Signal::from_csv("time,v\n0,1\n1,2\n").is_err());
    }
}
