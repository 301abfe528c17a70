//! Partitions, piecewise-linear paths and the usual path transforms.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Strictly increasing observation times starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPartition("no time points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPartition(format!(
                "first time must be 0, got {}",
                times[0]
            )));
        }
        for (m, pair) in times.windows(2).enumerate() {
            if !pair[1].is_finite() || pair[1] <= pair[0] {
                return Err(Error::InvalidPartition(format!(
                    "times not strictly increasing at index {}",
                    m + 1
                )));
            }
        }
        Ok(Self { times })
    }

    /// `2^level` uniform steps on `[0, horizon]`.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self> {
        if level > 30 {
            return Err(Error::InvalidPartition(format!("dyadic level {level} too fine")));
        }
        Self::uniform(horizon, 1usize << level)
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidPartition(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidPartition("need at least one step".into()));
        }
        let h = horizon / steps as f64;
        let mut times: Vec<f64> = (0..steps).map(|m| m as f64 * h).collect();
        times.push(horizon);
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Vertex index whose time equals `t` up to a relative tolerance.
    pub fn find(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.horizon().max(1.0);
        let idx = self.times.partition_point(|&s| s < t - tol);
        (idx < self.times.len() && (self.times[idx] - t).abs() <= tol).then_some(idx)
    }
}

/// A path given by its vertices; linear interpolation in between is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearPath {
    partition: Partition,
    dim: usize,
    /// Row-major, one row of length `dim` per vertex.
    samples: Vec<f64>,
}

impl PiecewiseLinearPath {
    pub fn new(partition: Partition, dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if samples.len() != dim * partition.times.len() {
            return Err(Error::InvalidPath(format!(
                "{} values for {} vertices of dimension {dim}",
                samples.len(),
                partition.times.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { vertex: pos / dim });
        }
        Ok(Self {
            partition,
            dim,
            samples,
        })
    }

    pub fn from_rows(partition: Partition, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidPath("ragged rows".into()));
        }
        Self::new(partition, dim, rows.concat())
    }

    /// 1-d path through `values` on a uniform grid over `[0, values.len() - 1]`.
    pub fn from_values_1d(values: &[f64]) -> Result<Self> {
        let times: Vec<f64> = (0..values.len()).map(|m| m as f64).collect();
        Self::new(Partition::new(times)?, 1, values.to_vec())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn times(&self) -> &[f64] {
        &self.partition.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.partition.times.len()
    }

    pub fn num_steps(&self) -> usize {
        self.partition.num_steps()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn vertex(&self, m: usize) -> &[f64] {
        &self.samples[m * self.dim..(m + 1) * self.dim]
    }

    /// Increment over step `m`, i.e. `X_{t_{m+1}} - X_{t_m}`, written into `out`.
    pub fn increment_into(&self, m: usize, out: &mut [f64]) {
        let d = self.dim;
        let a = &self.samples[m * d..(m + 1) * d];
        let b = &self.samples[(m + 1) * d..(m + 2) * d];
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = y - x;
        }
    }

    pub fn increments(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.num_steps()).map(move |m| {
            let mut out = vec![0.0; self.dim];
            self.increment_into(m, &mut out);
            out
        })
    }

    /// Total increment `X_T - X_0`.
    pub fn total_increment(&self) -> Vec<f64> {
        let last = self.num_vertices() - 1;
        self.vertex(last)
            .iter()
            .zip(self.vertex(0))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// Same vertex sequence on new times.
    pub fn retime(&self, partition: Partition) -> Result<Self> {
        Self::new(partition, self.dim, self.samples.clone())
    }

    /// Sub-path over vertices `start..=end`, re-timed to start at 0.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end >= self.num_vertices() {
            return Err(Error::InvalidPath(format!(
                "bad vertex range {start}..={end} for {} vertices",
                self.num_vertices()
            )));
        }
        let t0 = self.partition.times[start];
        let times = self.partition.times[start..=end].iter().map(|t| t - t0).collect();
        let samples = self.samples[start * self.dim..(end + 1) * self.dim].to_vec();
        Self::new(Partition::new(times)?, self.dim, samples)
    }

    /// Keeps every `stride`-th vertex; the last vertex must be kept.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.num_steps() % stride != 0 {
            return Err(Error::InvalidPartition(format!(
                "stride {stride} does not divide {} steps",
                self.num_steps()
            )));
        }
        let keep: Vec<usize> = (0..self.num_vertices()).step_by(stride).collect();
        let times = keep.iter().map(|&m| self.partition.times[m]).collect();
        let samples = keep.iter().flat_map(|&m| self.vertex(m).to_vec()).collect();
        Self::new(Partition::new(times)?, self.dim, samples)
    }

    /// Selected coordinates (0-based) in the given order.
    pub fn project(&self, coords: &[usize]) -> Result<Self> {
        if let Some(&c) = coords.iter().find(|&&c| c >= self.dim) {
            return Err(Error::InvalidPath(format!("coordinate {c} out of range")));
        }
        let samples = (0..self.num_vertices())
            .flat_map(|m| coords.iter().map(move |&c| self.samples[m * self.dim + c]))
            .collect();
        Self::new(self.partition.clone(), coords.len(), samples)
    }

    /// Time run backwards: vertices in reverse order on `T - t`.
    pub fn reverse(&self) -> Self {
        let horizon = self.partition.horizon();
        let times = self.partition.times.iter().rev().map(|t| horizon - t).collect();
        let samples = (0..self.num_vertices())
            .rev()
            .flat_map(|m| self.vertex(m).to_vec())
            .collect();
        Self {
            partition: Partition { times },
            dim: self.dim,
            samples,
        }
    }

    /// Prepends time as coordinate 1.
    pub fn add_time(&self) -> Self {
        let d = self.dim;
        let mut samples = Vec::with_capacity((d + 1) * self.num_vertices());
        for (m, &t) in self.partition.times.iter().enumerate() {
            samples.push(t);
            samples.extend_from_slice(self.vertex(m));
        }
        Self {
            partition: self.partition.clone(),
            dim: d + 1,
            samples,
        }
    }

    /// Lead-lag embedding into dimension `2d`: vertices
    /// `(X_0,X_0), (X_1,X_0), (X_1,X_1), (X_2,X_1), ...`. The first `d`
    /// coordinates are the lead. Midpoints are placed halfway between
    /// original times.
    pub fn lead_lag(&self) -> Self {
        let d = self.dim;
        let steps = self.num_steps();
        let mut times = Vec::with_capacity(2 * steps + 1);
        let mut samples = Vec::with_capacity(2 * d * (2 * steps + 1));
        for m in 0..=steps {
            let t = self.partition.times[m];
            if m > 0 {
                let t_prev = self.partition.times[m - 1];
                times.push(0.5 * (t_prev + t));
                samples.extend_from_slice(self.vertex(m));
                samples.extend_from_slice(self.vertex(m - 1));
            }
            times.push(t);
            samples.extend_from_slice(self.vertex(m));
            samples.extend_from_slice(self.vertex(m));
        }
        Self {
            partition: Partition { times },
            dim: 2 * d,
            samples,
        }
    }

    /// Appends `d*d` coordinates with the running sums of `ΔX^i ΔX^j`.
    /// Pair `(i, j)` (1-based) lands on letter `d + (i-1)d + j`.
    pub fn qv_augment(&self) -> Self {
        let d = self.dim;
        let new_dim = d + d * d;
        let mut samples = Vec::with_capacity(new_dim * self.num_vertices());
        let mut qv = vec![0.0; d * d];
        let mut dx = vec![0.0; d];
        for m in 0..self.num_vertices() {
            if m > 0 {
                self.increment_into(m - 1, &mut dx);
                for i in 0..d {
                    for j in 0..d {
                        qv[i * d + j] += dx[i] * dx[j];
                    }
                }
            }
            samples.extend_from_slice(self.vertex(m));
            samples.extend_from_slice(&qv);
        }
        Self {
            partition: self.partition.clone(),
            dim: new_dim,
            samples,
        }
    }

    /// Cuts `[0, count * segment]` into `count` pieces, each shifted to start
    /// at time 0 and value 0.
    pub fn chop(&self, segment: f64, count: usize) -> Result<Vec<Self>> {
        if !(segment > 0.0) || count == 0 {
            return Err(Error::InvalidParameter(format!(
                "chop needs positive length and count, got {segment} x {count}"
            )));
        }
        let needed = segment * count as f64;
        if self.partition.horizon() < needed * (1.0 - 1e-12) {
            return Err(Error::InvalidPartition(format!(
                "horizon {} shorter than {count} x {segment}",
                self.partition.horizon()
            )));
        }
        let mut cuts = Vec::with_capacity(count + 1);
        for n in 0..=count {
            let t = segment * n as f64;
            let idx = self.partition.find(t).ok_or_else(|| {
                Error::InvalidPartition(format!("segment boundary {t} is not a grid point"))
            })?;
            cuts.push(idx);
        }
        cuts.windows(2)
            .map(|w| {
                let mut piece = self.slice(w[0], w[1])?;
                let origin = piece.vertex(0).to_vec();
                for row in piece.samples.chunks_mut(self.dim) {
                    for (v, o) in row.iter_mut().zip(&origin) {
                        *v -= o;
                    }
                }
                Ok(piece)
            })
            .collect()
    }

    /// Writes `t,x1,...,xd` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        w.write_record(&header).map_err(io_err)?;
        for m in 0..self.num_vertices() {
            let mut row = vec![self.partition.times[m].to_string()];
            row.extend(self.vertex(m).iter().map(f64::to_string));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Reads `t,x1,...,xd` CSV. Times must be strictly increasing and are
    /// shifted so the first one is 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers().map_err(io_err)?.clone();
        if header.get(0) != Some("t") || header.len() < 2 {
            return Err(Error::Parse("expected header t,x1,...,xd".into()));
        }
        for (i, name) in header.iter().enumerate().skip(1) {
            if name != format!("x{i}") {
                return Err(Error::Parse(format!("unexpected column {name:?}")));
            }
        }
        let dim = header.len() - 1;
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(io_err)?;
            let mut values = record.iter().map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))
            });
            times.push(values.next().unwrap()?);
            for v in values {
                samples.push(v?);
            }
        }
        if times.is_empty() {
            return Err(Error::Parse("no rows".into()));
        }
        let t0 = times[0];
        let times = times.into_iter().map(|t| t - t0).collect();
        Self::new(Partition::new(times)?, dim, samples)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_examples() {
        assert_eq!(Partition::dyadic(1.0, 0).unwrap().times(), &[0.0, 1.0]);
        assert_eq!(
            Partition::dyadic(1.0, 2).unwrap().times(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(Partition::dyadic(2.0, 1).unwrap().times(), &[0.0, 1.0, 2.0]);
        assert_eq!(Partition::dyadic(1.0, 3).unwrap().mesh(), 0.125);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![]).is_err());
        assert!(Partition::new(vec![0.5, 1.0]).is_err());
        assert!(Partition::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(Partition::new(vec![0.0]).is_ok());
    }

    #[test]
    fn non_finite_samples_rejected() {
        let p = Partition::uniform(1.0, 2).unwrap();
        let err = PiecewiseLinearPath::new(p, 1, vec![0.0, f64::NAN, 1.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite { vertex: 1 });
    }

    #[test]
    fn add_time_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0]).unwrap();
        assert_eq!(p.add_time().samples(), &[0.0, 0.0, 1.0, 1.0]);

        let part = Partition::uniform(2.0, 2).unwrap();
        let flat = PiecewiseLinearPath::new(part, 1, vec![5.0; 3]).unwrap().add_time();
        let times: Vec<f64> = (0..3).map(|m| flat.vertex(m)[0]).collect();
        assert_eq!(times, [0.0, 1.0, 2.0]);
    }

    #[test]
    fn lead_lag_interleaving() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        let ll = p.lead_lag();
        assert_eq!(ll.dim(), 2);
        assert_eq!(ll.num_vertices(), 5);
        assert_eq!(ll.samples(), &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 3.0, 1.0, 3.0, 3.0]);
        assert_eq!(ll.times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);

        let one = PiecewiseLinearPath::from_values_1d(&[0.0, 2.0]).unwrap();
        assert_eq!(one.lead_lag().num_vertices(), 3);
    }

    #[test]
    fn lead_lag_lag_moves_only_on_odd_to_even_steps() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, -2.0, 4.0]).unwrap();
        let ll = p.lead_lag();
        for (m, dx) in ll.increments().enumerate() {
            if m % 2 == 0 {
                assert_eq!(dx[1], 0.0);
            } else {
                assert_eq!(dx[0], 0.0);
            }
        }
    }

    #[test]
    fn lead_block_recovers_original() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, -2.0, 4.0]).unwrap();
        let lead = p.lead_lag().project(&[0]).unwrap();
        let mut seen: Vec<f64> = Vec::new();
        for m in 0..lead.num_vertices() {
            let v = lead.vertex(m)[0];
            if seen.last() != Some(&v) {
                seen.push(v);
            }
        }
        assert_eq!(seen, p.samples());
    }

    #[test]
    fn qv_augment_examples() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        let q = p.qv_augment();
        assert_eq!(q.dim(), 2);
        let qv: Vec<f64> = (0..3).map(|m| q.vertex(m)[1]).collect();
        assert_eq!(qv, [0.0, 1.0, 5.0]);

        let zero = PiecewiseLinearPath::from_values_1d(&[0.0; 4]).unwrap().qv_augment();
        assert!((0..4).all(|m| zero.vertex(m)[1] == 0.0));
    }

    #[test]
    fn qv_augment_two_dim_letter_order() {
        let part = Partition::uniform(1.0, 2).unwrap();
        let p = PiecewiseLinearPath::new(part, 2, vec![0.0, 0.0, 1.0, 2.0, 2.0, 5.0]).unwrap();
        let q = p.qv_augment();
        assert_eq!(q.dim(), 6);
        // increments (1,2) then (1,3)
        assert_eq!(&q.vertex(2)[2..], &[2.0, 5.0, 5.0, 13.0]);
    }

    #[test]
    fn chop_examples() {
        let part = Partition::uniform(2.0, 4).unwrap();
        let line = PiecewiseLinearPath::new(part, 1, vec![0.0, 0.5, 1.0, 1.5, 2.0]).unwrap();
        let pieces = line.chop(1.0, 2).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0], pieces[1]);
        assert_eq!(pieces[1].samples(), &[0.0, 0.5, 1.0]);
        assert_eq!(pieces[1].times(), &[0.0, 0.5, 1.0]);

        let shifted = PiecewiseLinearPath::from_values_1d(&[3.0, 4.0, 6.0]).unwrap();
        let whole = shifted.chop(2.0, 1).unwrap();
        assert_eq!(whole[0].samples(), &[0.0, 1.0, 3.0]);

        assert!(line.chop(0.7, 2).is_err());
        assert!(line.chop(1.0, 3).is_err());
    }

    #[test]
    fn reverse_and_coarsen() {
        let p = PiecewiseLinearPath::from_values_1d(&[0.0, 1.0, 3.0]).unwrap();
        let r = p.reverse();
        assert_eq!(r.samples(), &[3.0, 1.0, 0.0]);
        assert_eq!(r.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(p.coarsen(2).unwrap().samples(), &[0.0, 3.0]);
        assert!(p.coarsen(3).is_err());
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let part = Partition::new(vec![0.0, 0.25, 1.0]).unwrap();
        let p = PiecewiseLinearPath::new(part, 2, vec![0.0, 1.0, 0.5, -1.5, 2.0, 3.25]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(PiecewiseLinearPath::read_csv(&buf[..]).unwrap(), p);

        let shifted = "t,x1\n2,0\n3,1\n";
        let q = PiecewiseLinearPath::read_csv(shifted.as_bytes()).unwrap();
        assert_eq!(q.times(), &[0.0, 1.0]);

        let bad = "t,x1\n0,0\n0,1\n";
        assert!(matches!(
            PiecewiseLinearPath::read_csv(bad.as_bytes()),
            Err(Error::InvalidPartition(_))
        ));
        assert!(PiecewiseLinearPath::read_csv("s,x1\n0,0\n".as_bytes()).is_err());
    }
}
