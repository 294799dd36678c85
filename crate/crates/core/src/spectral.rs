//! Fourier pseudo-spectral backend on a doubly periodic rectangle.
//!
//! Real fields are stored row-major (`values[iy * mx + ix]`). Spectra keep
//! only the non-negative `kx` half of the discrete Fourier transform of a
//! real field, `(mx/2 + 1) * my` coefficients, laid out as
//! `spec[ky * (mx/2 + 1) + kx]`. Every multiplier used here depends on
//! `|k|^2` alone, so it acts on the half spectrum directly; sums over the
//! full spectrum are recovered with multiplicity weights.
//!
//! The Nyquist modes carry `|k|^2` with `|k| = pi M / L`, which keeps the
//! discrete identity `<-Lap f, f> = |grad f|^2` exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean tolerance for operations that need zero-mean input.
pub const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub mx: usize,
    pub my: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid2D {
    pub fn new(mx: usize, my: usize, lx: f64, ly: f64) -> Result<Self> {
        if mx < 8 || my < 8 || mx % 2 != 0 || my % 2 != 0 {
            return Err(Error::Domain(format!("grid sizes must be even and >= 8, got {mx}x{my}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Domain(format!("domain extents must be positive, got {lx}x{ly}")));
        }
        Ok(Self { mx, my, lx, ly })
    }

    /// `m x m` grid on `(0, 2 pi)^2`.
    pub fn square(m: usize) -> Result<Self> {
        Self::new(m, m, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI)
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn spectrum_len(&self) -> usize {
        (self.mx / 2 + 1) * self.my
    }

    /// Collocation point of the flat index `i`.
    pub fn point(&self, i: usize) -> (f64, f64) {
        let (ix, iy) = (i % self.mx, i / self.mx);
        (
            self.lx * ix as f64 / self.mx as f64,
            self.ly * iy as f64 / self.my as f64,
        )
    }

    /// Samples `f(x, y)` at the collocation points.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Field2D {
        let values = (0..self.len())
            .map(|i| {
                let (x, y) = self.point(i);
                f(x, y)
            })
            .collect();
        Field2D { grid: *self, values }
    }
}

/// Real samples on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Discrete `L^2(Omega)` inner product.
    pub fn dot(&self, other: &Field2D) -> f64 {
        let w = self.grid.area() / self.grid.len() as f64;
        w * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Half-spectrum coefficients of a real field.
pub type Spectrum = Vec<Complex64>;

/// FFT plans and wavenumber tables for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid2D,
    hx: usize,
    fx: Arc<dyn Fft<f64>>,
    ix: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
    mult: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn wavenumber(m: usize, len: usize, extent: f64) -> f64 {
    let signed = if m <= len / 2 { m as f64 } else { m as f64 - len as f64 };
    2.0 * std::f64::consts::PI / extent * signed
}

impl Spectral {
    pub fn new(grid: Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        let hx = grid.mx / 2 + 1;
        let mut k2 = Vec::with_capacity(hx * grid.my);
        let mut mult = Vec::with_capacity(hx * grid.my);
        for ky in 0..grid.my {
            let y = wavenumber(ky, grid.my, grid.ly);
            for kx in 0..hx {
                let x = wavenumber(kx, grid.mx, grid.lx);
                k2.push(x * x + y * y);
                mult.push(if kx == 0 || kx == grid.mx / 2 { 1.0 } else { 2.0 });
            }
        }
        Self {
            grid,
            hx,
            fx: planner.plan_fft_forward(grid.mx),
            ix: planner.plan_fft_inverse(grid.mx),
            fy: planner.plan_fft_forward(grid.my),
            iy: planner.plan_fft_inverse(grid.my),
            k2,
            mult,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// `|k|^2` per half-spectrum slot.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    /// Unnormalised forward transform `sum f e^{-i k x}`.
    pub fn forward(&self, values: &[f64]) -> Spectrum {
        let (mx, my, hx) = (self.grid.mx, self.grid.my, self.hx);
        assert_eq!(values.len(), mx * my, "field does not match the grid");
        let mut row: Vec<Complex64> = vec![Complex64::default(); mx];
        let mut out = vec![Complex64::default(); hx * my];
        for iy in 0..my {
            for (r, v) in row.iter_mut().zip(&values[iy * mx..(iy + 1) * mx]) {
                *r = Complex64::new(*v, 0.0);
            }
            self.fx.process(&mut row);
            out[iy * hx..(iy + 1) * hx].copy_from_slice(&row[..hx]);
        }
        let mut col = vec![Complex64::default(); my];
        for kx in 0..hx {
            for iy in 0..my {
                col[iy] = out[iy * hx + kx];
            }
            self.fy.process(&mut col);
            for ky in 0..my {
                out[ky * hx + kx] = col[ky];
            }
        }
        out
    }

    /// Inverse of [`Spectral::forward`], including the `1 / (mx my)` factor.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let (mx, my, hx) = (self.grid.mx, self.grid.my, self.hx);
        assert_eq!(spec.len(), hx * my, "spectrum does not match the grid");
        let mut half = spec.to_vec();
        let mut col = vec![Complex64::default(); my];
        for kx in 0..hx {
            for ky in 0..my {
                col[ky] = half[ky * hx + kx];
            }
            self.iy.process(&mut col);
            for iy in 0..my {
                half[iy * hx + kx] = col[iy];
            }
        }
        let scale = 1.0 / (mx * my) as f64;
        let mut row = vec![Complex64::default(); mx];
        let mut out = vec![0.0; mx * my];
        for iy in 0..my {
            let src = &half[iy * hx..(iy + 1) * hx];
            row[..hx].copy_from_slice(src);
            // a real row has a Hermitian spectrum in kx; the imaginary
            // parts of the self-conjugate slots are dropped
            row[0].im = 0.0;
            row[mx / 2].im = 0.0;
            for kx in hx..mx {
                row[kx] = src[mx - kx].conj();
            }
            self.ix.process(&mut row);
            for (o, r) in out[iy * mx..(iy + 1) * mx].iter_mut().zip(&row) {
                *o = r.re * scale;
            }
        }
        out
    }

    fn norm_factor(&self) -> f64 {
        let n = self.grid.len() as f64;
        self.grid.area() / (n * n)
    }

    /// `sum_k weight(k) |f_k|^2` over the full spectrum, scaled to the
    /// `L^2(Omega)` integral.
    fn weighted_sq<F: Fn(f64) -> f64>(&self, spec: &[Complex64], weight: F) -> f64 {
        let s: f64 = spec
            .iter()
            .zip(&self.k2)
            .zip(&self.mult)
            .map(|((c, &k2), &m)| m * weight(k2) * c.norm_sqr())
            .sum();
        s * self.norm_factor()
    }

    pub fn l2_sq_spec(&self, spec: &[Complex64]) -> f64 {
        self.weighted_sq(spec, |_| 1.0)
    }

    /// `|grad f|^2` from the spectrum.
    pub fn h1_semi_sq_spec(&self, spec: &[Complex64]) -> f64 {
        self.weighted_sq(spec, |k2| k2)
    }

    /// `|f|_{-1}^2 = sum' |f_k|^2 / |k|^2`; the zero mode is skipped.
    pub fn hminus1_sq_spec(&self, spec: &[Complex64]) -> f64 {
        self.weighted_sq(spec, |k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 })
    }

    fn check_grid(&self, f: &Field2D) -> Result<()> {
        if f.grid != self.grid {
            return Err(Error::Domain("field grid does not match the transform grid".into()));
        }
        Ok(())
    }

    fn check_zero_mean(f: &Field2D) -> Result<()> {
        let mean = f.mean();
        if mean.abs() > MEAN_TOL {
            return Err(Error::NonzeroMean { mean, tol: MEAN_TOL });
        }
        Ok(())
    }

    pub fn laplacian(&self, f: &Field2D) -> Result<Field2D> {
        self.check_grid(f)?;
        let mut s = self.forward(&f.values);
        for (c, k2) in s.iter_mut().zip(&self.k2) {
            *c *= -k2;
        }
        Ok(Field2D {
            grid: self.grid,
            values: self.inverse(&s),
        })
    }

    /// The zero-mean solution `g` of `-Lap g = f` for zero-mean `f`.
    pub fn inv_laplacian_zero_mean(&self, f: &Field2D) -> Result<Field2D> {
        self.check_grid(f)?;
        Self::check_zero_mean(f)?;
        let mut s = self.forward(&f.values);
        for (c, k2) in s.iter_mut().zip(&self.k2) {
            *c = if *k2 > 0.0 { *c / *k2 } else { Complex64::default() };
        }
        Ok(Field2D {
            grid: self.grid,
            values: self.inverse(&s),
        })
    }

    pub fn l2_norm(&self, f: &Field2D) -> Result<f64> {
        self.check_grid(f)?;
        Ok(self.l2_sq_spec(&self.forward(&f.values)).sqrt())
    }

    pub fn h1_seminorm(&self, f: &Field2D) -> Result<f64> {
        self.check_grid(f)?;
        Ok(self.h1_semi_sq_spec(&self.forward(&f.values)).sqrt())
    }

    pub fn hminus1_norm(&self, f: &Field2D) -> Result<f64> {
        self.check_grid(f)?;
        Self::check_zero_mean(f)?;
        Ok(self.hminus1_sq_spec(&self.forward(&f.values)).sqrt())
    }

    /// Ginzburg-Landau energy `(eps^2/2) |grad phi|^2 + <F(phi), 1>` with
    /// `F(phi) = (phi^2 - 1)^2 / 4`.
    pub fn energy(&self, phi: &Field2D, eps: f64) -> Result<f64> {
        self.check_grid(phi)?;
        Ok(self.energy_from_parts(&phi.values, &self.forward(&phi.values), eps))
    }

    /// Energy when both the samples and their spectrum are at hand.
    pub fn energy_from_parts(&self, values: &[f64], spec: &[Complex64], eps: f64) -> f64 {
        let w = self.grid.area() / self.grid.len() as f64;
        let potential: f64 = values.iter().map(|p| 0.25 * (p * p - 1.0).powi(2)).sum::<f64>() * w;
        0.5 * eps * eps * self.h1_semi_sq_spec(spec) + potential
    }
}

/// One row of the energy ledger. `e_alpha` is filled in one step in
/// arrears, once the next step ratio is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedgerEntry {
    pub n: usize,
    pub t: f64,
    pub e: f64,
    pub e_alpha: Option<f64>,
    pub tau: f64,
    pub volume: f64,
}

/// Writes the ledger as CSV with columns `t,E,E_alpha,tau,volume`; a
/// missing `E_alpha` is left empty.
pub fn write_ledger_csv<W: Write>(entries: &[EnergyLedgerEntry], mut out: W) -> Result<()> {
    writeln!(out, "t,E,E_alpha,tau,volume")?;
    for e in entries {
        let ea = e.e_alpha.map(|v| format!("{v:.17e}")).unwrap_or_default();
        writeln!(out, "{:.17e},{:.17e},{},{:.17e},{:.17e}", e.t, e.e, ea, e.tau, e.volume)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SnapshotMeta {
    pub Mx: usize,
    pub My: usize,
    pub Lx: f64,
    pub Ly: f64,
    pub t: f64,
    pub alpha: f64,
}

/// Writes `<stem>.bin` (row-major little-endian `f64`) and `<stem>.json`.
pub fn write_snapshot(dir: &Path, stem: &str, field: &Field2D, t: f64, alpha: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut bin = BufWriter::new(File::create(dir.join(format!("{stem}.bin")))?);
    for v in &field.values {
        bin.write_all(&v.to_le_bytes())?;
    }
    bin.flush()?;
    let g = field.grid;
    let meta = SnapshotMeta {
        Mx: g.mx,
        My: g.my,
        Lx: g.lx,
        Ly: g.ly,
        t,
        alpha,
    };
    let json = File::create(dir.join(format!("{stem}.json")))?;
    serde_json::to_writer_pretty(json, &meta)?;
    Ok(())
}

pub fn read_snapshot(dir: &Path, stem: &str) -> Result<(Field2D, SnapshotMeta)> {
    let meta: SnapshotMeta = serde_json::from_reader(BufReader::new(File::open(dir.join(format!("{stem}.json")))?))?;
    let grid = Grid2D::new(meta.Mx, meta.My, meta.Lx, meta.Ly)?;
    let mut bytes = Vec::new();
    File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::LengthMismatch {
            expected: 8 * grid.len(),
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field2D { grid, values }, meta))
}
