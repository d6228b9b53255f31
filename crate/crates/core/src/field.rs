//! Quaternion-valued fields on a periodic 3-D grid.
//!
//! Values are stored x-fastest: the point `(i1, i2, i3)` lives at
//! `i1 + N1 * (i2 + N2 * i3)` and has coordinates `i_k * L_k / N_k`.
//! Transforms are the unnormalised forward DFT `Σ v e^{-i ξ·x}` per
//! real component; the inverse carries the `1/N`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// Magic bytes of the binary field format.
pub const SQF1_MAGIC: &[u8; 4] = b"SQF1";

/// Componentwise DFT of a field: `[ŵ, x̂, ŷ, ẑ]`.
pub type ComponentSpectra = [Vec<Complex64>; 4];

#[derive(Debug, Clone)]
pub struct SpectralField {
    dims: [usize; 3],
    lengths: [f64; 3],
    values: Vec<Quaternion>,
    fourier_cache: OnceLock<Arc<ComponentSpectra>>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.lengths == other.lengths && self.values == other.values
    }
}

fn check_grid(dims: [usize; 3], lengths: [f64; 3]) -> Result<()> {
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!("grid sizes must be positive, got {dims:?}")));
    }
    if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::InvalidParameter(format!("box lengths must be positive, got {lengths:?}")));
    }
    Ok(())
}

impl SpectralField {
    pub fn new(dims: [usize; 3], lengths: [f64; 3], values: Vec<Quaternion>) -> Result<Self> {
        check_grid(dims, lengths)?;
        let n = dims.iter().product::<usize>();
        if values.len() != n {
            return Err(Error::Dimension(format!("{} values for a {dims:?} grid", values.len())));
        }
        Ok(Self {
            dims,
            lengths,
            values,
            fourier_cache: OnceLock::new(),
        })
    }

    pub fn zeros(dims: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        Self::new(dims, lengths, vec![Quaternion::ZERO; dims.iter().product()])
    }

    pub fn from_fn(dims: [usize; 3], lengths: [f64; 3], f: impl Fn([f64; 3]) -> Quaternion + Sync) -> Result<Self> {
        check_grid(dims, lengths)?;
        let n = dims.iter().product::<usize>();
        let values = (0..n)
            .into_par_iter()
            .map(|k| f(point_coords(dims, lengths, k)))
            .collect();
        Self::new(dims, lengths, values)
    }

    pub fn real_from_fn(dims: [usize; 3], lengths: [f64; 3], f: impl Fn([f64; 3]) -> f64 + Sync) -> Result<Self> {
        Self::from_fn(dims, lengths, |x| Quaternion::real(f(x)))
    }

    pub fn from_components(dims: [usize; 3], lengths: [f64; 3], c: &[Vec<f64>; 4]) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if c.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("component lengths differ from the grid size".into()));
        }
        let values = (0..n)
            .map(|k| Quaternion::new(c[0][k], c[1][k], c[2][k], c[3][k]))
            .collect();
        Self::new(dims, lengths, values)
    }

    /// Field with the same grid and new values.
    pub fn with_values(&self, values: Vec<Quaternion>) -> Result<Self> {
        Self::new(self.dims, self.lengths, values)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Quaternion] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Quaternion> {
        self.values
    }

    pub fn coords(&self, k: usize) -> [f64; 3] {
        point_coords(self.dims, self.lengths, k)
    }

    pub fn components(&self) -> [Vec<f64>; 4] {
        let get = |f: fn(&Quaternion) -> f64| self.values.iter().map(f).collect::<Vec<_>>();
        [get(|q| q.w), get(|q| q.x), get(|q| q.y), get(|q| q.z)]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dims == other.dims && self.lengths == other.lengths
    }

    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "grids differ: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.lengths, other.dims, other.lengths
            )))
        }
    }

    /// Largest modulus of an imaginary part.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|q| q.imag_norm()).fold(0.0, f64::max)
    }

    pub fn require_real(&self, what: &str) -> Result<()> {
        let scale = self.max_abs().max(1.0);
        if self.max_imag() > 1e-12 * scale {
            return Err(Error::Domain(format!("{what} needs a real-valued field")));
        }
        Ok(())
    }

    /// Grid norm `sqrt(Σ |v|²)`.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|q| q.norm()).fold(0.0, f64::max)
    }

    /// Smallest and largest real part.
    pub fn real_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q.w), hi.max(q.w)))
    }

    pub fn l2_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `‖self - reference‖ / ‖reference‖`, or the absolute difference when the reference vanishes.
    pub fn rel_l2_diff(&self, reference: &Self) -> f64 {
        let d = self.l2_diff(reference);
        let r = reference.l2_norm();
        if r > 0.0 {
            d / r
        } else {
            d
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max_abs_diff(*b))
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Quaternion) -> Quaternion + Sync) -> Self {
        let values = self.values.par_iter().map(|q| f(*q)).collect();
        Self::new(self.dims, self.lengths, values).expect("same grid")
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Quaternion, Quaternion) -> Quaternion + Sync) -> Result<Self> {
        self.require_same_grid(other)?;
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::new(self.dims, self.lengths, values)
    }

    /// `⟨u, v⟩ = Σ conj(u) v`, quaternion-valued.
    pub fn inner(&self, other: &Self) -> Result<Quaternion> {
        self.require_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(Quaternion::ZERO, |acc, (a, b)| acc + a.conj() * *b))
    }

    /// Componentwise DFT, computed once per field.
    pub fn fourier(&self) -> &ComponentSpectra {
        self.fourier_cache.get_or_init(|| {
            let plan = Fft3::new(self.dims);
            let c = self.components();
            let spectra: Vec<Vec<Complex64>> = c
                .into_par_iter()
                .map(|comp| {
                    let mut data: Vec<Complex64> = comp.into_iter().map(Complex64::from).collect();
                    plan.forward(&mut data);
                    data
                })
                .collect();
            let [a, b, cc, d]: [Vec<Complex64>; 4] = spectra.try_into().expect("four components");
            Arc::new([a, b, cc, d])
        })
    }

    /// Inverse of [`SpectralField::fourier`]; imaginary round-off is dropped.
    pub fn from_fourier(dims: [usize; 3], lengths: [f64; 3], spectra: ComponentSpectra) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if spectra.iter().any(|s| s.len() != n) {
            return Err(Error::Dimension("spectrum length differs from the grid size".into()));
        }
        let plan = Fft3::new(dims);
        let comps: Vec<Vec<f64>> = spectra
            .into_par_iter()
            .map(|mut s| {
                plan.inverse(&mut s);
                s.into_iter().map(|z| z.re).collect()
            })
            .collect();
        let [a, b, c, d]: [Vec<f64>; 4] = comps.try_into().expect("four components");
        Self::from_components(dims, lengths, &[a, b, c, d])
    }

    pub fn write_sqf1(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(SQF1_MAGIC)?;
        for n in self.dims {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for l in self.lengths {
            w.write_all(&l.to_le_bytes())?;
        }
        for q in &self.values {
            for c in q.to_array() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_sqf1(r: &mut impl Read) -> Result<Self> {
        let io = |e| Error::io("reading SQF1 data", e);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != SQF1_MAGIC {
            return Err(Error::Parse(format!("bad field magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(io)?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let mut lengths = [0f64; 3];
        for l in &mut lengths {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(io)?;
            *l = f64::from_le_bytes(b);
        }
        check_grid(dims, lengths).map_err(|e| Error::Parse(e.to_string()))?;
        let n = dims.iter().product::<usize>();
        let mut raw = vec![0u8; n * 32];
        r.read_exact(&mut raw).map_err(io)?;
        let f = |k: usize| f64::from_le_bytes(raw[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        let values = (0..n)
            .map(|i| Quaternion::new(f(4 * i), f(4 * i + 1), f(4 * i + 2), f(4 * i + 3)))
            .collect();
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(io)? != 0 {
            return Err(Error::Parse("trailing bytes after field data".into()));
        }
        Self::new(dims, lengths, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let ctx = || format!("writing {}", path.display());
        let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
        let mut w = BufWriter::new(file);
        self.write_sqf1(&mut w).map_err(|e| Error::io(ctx(), e))?;
        w.flush().map_err(|e| Error::io(ctx(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_sqf1(&mut BufReader::new(file)).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(format!("reading {}", path.display()), source),
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn point_coords(dims: [usize; 3], lengths: [f64; 3], k: usize) -> [f64; 3] {
    let i1 = k % dims[0];
    let i2 = (k / dims[0]) % dims[1];
    let i3 = k / (dims[0] * dims[1]);
    [
        i1 as f64 * lengths[0] / dims[0] as f64,
        i2 as f64 * lengths[1] / dims[1] as f64,
        i3 as f64 * lengths[2] / dims[2] as f64,
    ]
}

/// Signed lattice index of DFT bin `i` on an axis of size `n`, in `[-n/2, n/2)`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    let i = i as i64;
    let n = n as i64;
    if i < (n + 1) / 2 {
        i
    } else {
        i - n
    }
}

/// Angular wavenumbers `2πk/L` per axis.
///
/// The unpaired Nyquist bin of an even axis gets wavenumber zero, so that
/// every derivative symbol is consistent with every other and real fields
/// stay real.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    pub dims: [usize; 3],
    pub axes: [Vec<f64>; 3],
}

impl Wavenumbers {
    pub fn new(dims: [usize; 3], lengths: [f64; 3]) -> Self {
        let axis = |a: usize| {
            let n = dims[a];
            (0..n)
                .map(|i| {
                    let k = signed_index(i, n);
                    if n % 2 == 0 && k == -(n as i64) / 2 {
                        0.0
                    } else {
                        2.0 * std::f64::consts::PI * k as f64 / lengths[a]
                    }
                })
                .collect::<Vec<_>>()
        };
        Self {
            dims,
            axes: [axis(0), axis(1), axis(2)],
        }
    }

    pub fn for_field(f: &SpectralField) -> Self {
        Self::new(f.dims(), f.lengths())
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wavevector of flat mode index `k`.
    pub fn xi(&self, k: usize) -> [f64; 3] {
        let [n1, n2, _] = self.dims;
        [self.axes[0][k % n1], self.axes[1][(k / n1) % n2], self.axes[2][k / (n1 * n2)]]
    }

    pub fn norm(&self, k: usize) -> f64 {
        let x = self.xi(k);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len()).map(|k| self.norm(k)).fold(0.0, f64::max)
    }

    /// Flat index of the mode `-ξ`.
    pub fn mirror(&self, k: usize) -> usize {
        let [n1, n2, n3] = self.dims;
        let m = |i: usize, n: usize| (n - i) % n;
        m(k % n1, n1) + n1 * (m((k / n1) % n2, n2) + n2 * m(k / (n1 * n2), n3))
    }
}

/// Planned 3-D transform built from 1-D transforms along each axis.
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let mut plan = |d: FftDirection| {
            [
                planner.plan_fft(dims[0], d),
                planner.plan_fft(dims[1], d),
                planner.plan_fft(dims[2], d),
            ]
        };
        let fwd = plan(FftDirection::Forward);
        let inv = plan(FftDirection::Inverse);
        Self { dims, fwd, inv }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [n1, n2, n3] = self.dims;
        assert_eq!(data.len(), n1 * n2 * n3);
        plans[0].process(data);
        let mut line = Vec::new();
        for (axis, stride, n) in [(1, n1, n2), (2, n1 * n2, n3)] {
            if n == 1 {
                continue;
            }
            line.resize(n, Complex64::default());
            let block = stride * n;
            for start in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[base + j * stride];
                    }
                    plans[axis].process(&mut line);
                    for (j, z) in line.iter().enumerate() {
                        data[base + j * stride] = *z;
                    }
                }
            }
        }
    }
}

/// Multiplies every component spectrum by a real per-mode factor.
pub fn apply_real_multiplier(f: &SpectralField, m: impl Fn(usize) -> f64 + Sync) -> Result<SpectralField> {
    let spectra = f.fourier();
    let scaled: Vec<Vec<Complex64>> = spectra
        .par_iter()
        .map(|s| s.iter().enumerate().map(|(k, z)| z * m(k)).collect())
        .collect();
    let [a, b, c, d]: [Vec<Complex64>; 4] = scaled.try_into().expect("four components");
    SpectralField::from_fourier(f.dims(), f.lengths(), [a, b, c, d])
}

/// Spectral derivative of a real scalar array along `axis`.
pub fn spectral_derivative(dims: [usize; 3], lengths: [f64; 3], u: &[f64], axis: usize) -> Vec<f64> {
    let wn = Wavenumbers::new(dims, lengths);
    let plan = Fft3::new(dims);
    let mut data: Vec<Complex64> = u.iter().map(|x| Complex64::from(*x)).collect();
    plan.forward(&mut data);
    data.iter_mut()
        .enumerate()
        .for_each(|(k, z)| *z *= Complex64::new(0.0, wn.xi(k)[axis]));
    plan.inverse(&mut data);
    data.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_quaternion, seeded};
    use std::f64::consts::PI;

    fn random_field(seed: u64, dims: [usize; 3]) -> SpectralField {
        let mut rng = seeded(seed);
        let n = dims.iter().product();
        let v = (0..n).map(|_| random_quaternion(&mut rng, 1.0)).collect();
        SpectralField::new(dims, [2.0 * PI, 3.0, 1.5], v).unwrap()
    }

    /// Direct O(N²) DFT.
    fn naive_dft(f: &SpectralField, comp: usize) -> Vec<Complex64> {
        let c = &f.components()[comp];
        let [n1, n2, n3] = f.dims();
        let n = c.len();
        (0..n)
            .map(|k| {
                let (a, b, cc) = (k % n1, (k / n1) % n2, k / (n1 * n2));
                (0..n)
                    .map(|j| {
                        let (x, y, z) = (j % n1, (j / n1) % n2, j / (n1 * n2));
                        let ph = -2.0 * PI
                            * ((a * x) as f64 / n1 as f64 + (b * y) as f64 / n2 as f64 + (cc * z) as f64 / n3 as f64);
                        Complex64::from_polar(c[j], ph)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let f = random_field(1, [4, 3, 5]);
        for comp in 0..4 {
            let want = naive_dft(&f, comp);
            let got = &f.fourier()[comp];
            let err = want.iter().zip(got).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "component {comp}: {err}");
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        let f = random_field(2, [8, 6, 4]);
        let n = f.len() as f64;
        let s = f.fourier();
        let spec: f64 = s.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / n;
        let grid = f.l2_norm().powi(2);
        assert!((spec - grid).abs() <= 1e-10 * grid);
        let back = SpectralField::from_fourier(f.dims(), f.lengths(), s.clone()).unwrap();
        assert!(back.max_abs_diff(&f) <= 1e-13);
    }

    #[test]
    fn real_fields_have_hermitian_spectra() {
        let f = random_field(3, [6, 5, 4]).map(|q| Quaternion::new(q.w, q.x, 0.0, 0.0));
        let wn = Wavenumbers::for_field(&f);
        for s in f.fourier() {
            for k in 0..s.len() {
                assert!((s[k] - s[wn.mirror(k)].conj()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn wavenumbers_and_nyquist() {
        let wn = Wavenumbers::new([4, 3, 1], [2.0 * PI, 2.0 * PI, 1.0]);
        assert_eq!(wn.axes[0], vec![0.0, 1.0, 0.0, -1.0]);
        assert_eq!(wn.axes[1], vec![0.0, 1.0, -1.0]);
        assert_eq!(wn.axes[2], vec![0.0]);
        assert_eq!(signed_index(2, 4), -2);
        assert_eq!(wn.mirror(1), 3);
        assert_eq!(wn.mirror(4), 8);
    }

    #[test]
    fn derivative_of_sine() {
        let dims = [16, 8, 8];
        let l = [2.0 * PI; 3];
        let f = SpectralField::real_from_fn(dims, l, |x| (2.0 * x[0]).sin() + x[2].cos()).unwrap();
        let d0 = spectral_derivative(dims, l, &f.components()[0], 0);
        let d2 = spectral_derivative(dims, l, &f.components()[0], 2);
        for k in 0..f.len() {
            let x = f.coords(k);
            assert!((d0[k] - 2.0 * (2.0 * x[0]).cos()).abs() <= 1e-12);
            assert!((d2[k] + x[2].sin()).abs() <= 1e-12);
        }
    }

    #[test]
    fn sqf1_round_trip() {
        let f = random_field(4, [3, 2, 5]);
        let mut buf = Vec::new();
        f.write_sqf1(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SQF1");
        assert_eq!(buf.len(), 4 + 12 + 24 + 32 * f.len());
        let back = SpectralField::read_sqf1(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.sqf");
        f.save(&p).unwrap();
        assert_eq!(SpectralField::load(&p).unwrap(), f);
        assert!(matches!(SpectralField::load(&dir.path().join("missing")), Err(Error::Io { .. })));

        buf[0] = b'X';
        assert!(matches!(SpectralField::read_sqf1(&mut buf.as_slice()), Err(Error::Parse(_))));
        let mut short = Vec::new();
        f.write_sqf1(&mut short).unwrap();
        short.pop();
        assert!(SpectralField::read_sqf1(&mut short.as_slice()).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(SpectralField::zeros([0, 1, 1], [1.0; 3]).is_err());
        assert!(SpectralField::zeros([1, 1, 1], [1.0, -1.0, 1.0]).is_err());
        assert!(SpectralField::new([2, 1, 1], [1.0; 3], vec![Quaternion::ONE]).is_err());
        let f = SpectralField::zeros([2, 2, 2], [1.0; 3]).unwrap();
        assert_eq!(f.coords(7), [0.5, 0.5, 0.5]);
    }
}
