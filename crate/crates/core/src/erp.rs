//! Equirectangular panoramas, rectilinear viewports cut from them, the
//! overlapped patch split and gray-level entropy.

use std::f64::consts::PI;
use std::path::Path;

use image::{ImageReader, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::sphere::{gnomonic_inverse_offset, Direction, FieldOfView, PlanePoint, SphereCoord};

/// An equirectangular panorama, `width == 2 * height`.
///
/// Pixel `(col, row)` covers longitude `[-180 + 360 col / W, -180 + 360 (col + 1) / W)`
/// and latitude `[90 - 180 (row + 1) / H, 90 - 180 row / H)`.
#[derive(Debug, Clone)]
pub struct ErpImage {
    pixels: RgbImage,
}

impl ErpImage {
    pub fn new(pixels: RgbImage) -> Result<Self> {
        let (width, height) = pixels.dimensions();
        if height < 2 || width != 2 * height {
            return Err(Error::Aspect { width, height });
        }
        Ok(Self { pixels })
    }

    /// Builds a panorama from a per-pixel function of `(col, row)`.
    pub fn from_fn(width: u32, height: u32, f: impl FnMut(u32, u32) -> Rgb<u8>) -> Result<Self> {
        Self::new(RgbImage::from_fn(width, height, f))
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn pixels(&self) -> &RgbImage {
        &self.pixels
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integer + 0.5 offsets removed). Columns wrap, rows clamp.
    fn sample(&self, x: f64, row0: u32, row1: u32, wy: f64) -> Rgb<u8> {
        let w = self.width() as usize;
        // Callers keep x above -w, so truncating x + w is a floor.
        let shifted = (x + w as f64) as i64;
        let fx = x + w as f64 - shifted as f64;
        let mut c0 = shifted - w as i64;
        if c0 < 0 || c0 >= w as i64 {
            c0 = c0.rem_euclid(w as i64);
        }
        let c0 = c0 as usize;
        let c1 = if c0 + 1 == w { 0 } else { c0 + 1 };
        let raw = self.pixels.as_raw();
        let (r0, r1) = (row0 as usize * w * 3, row1 as usize * w * 3);
        let (p00, p01) = (
            &raw[r0 + c0 * 3..r0 + c0 * 3 + 3],
            &raw[r0 + c1 * 3..r0 + c1 * 3 + 3],
        );
        let (p10, p11) = (
            &raw[r1 + c0 * 3..r1 + c0 * 3 + 3],
            &raw[r1 + c1 * 3..r1 + c1 * 3 + 3],
        );
        let mut out = [0u8; 3];
        for ch in 0..3 {
            let top = p00[ch] as f64 + (p01[ch] as f64 - p00[ch] as f64) * fx;
            let bottom = p10[ch] as f64 + (p11[ch] as f64 - p10[ch] as f64) * fx;
            let v = top + (bottom - top) * wy;
            // v is a convex combination of bytes, so this rounds half up.
            out[ch] = (v + 0.5) as u8;
        }
        Rgb(out)
    }
}

/// Decodes a PNG or JPEG panorama.
pub fn load_erp(path: impl AsRef<Path>) -> Result<ErpImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decode = |source| Error::Decode {
        path: path.to_path_buf(),
        source,
    };
    let img = ImageReader::new(std::io::Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(decode)?;
    ErpImage::new(img.to_rgb8())
}

/// BT.601 luma, rounded to the nearest integer.
pub fn gray(p: Rgb<u8>) -> u8 {
    let [r, g, b] = p.0;
    // Nonnegative, so adding 0.5 and truncating rounds half away from zero.
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5) as u8
}

/// A rectilinear view of the panorama.
#[derive(Debug, Clone)]
pub struct Viewport {
    pub center: SphereCoord,
    pub fov: FieldOfView,
    pub pixels: RgbImage,
}

impl Viewport {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    pub fn to_gray(&self) -> GrayPatch {
        GrayPatch {
            width: self.width(),
            height: self.height(),
            data: self.pixels.pixels().map(|p| gray(*p)).collect(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.pixels
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| match source {
                image::ImageError::IoError(e) => Error::io(path, e),
                source => Error::Encode {
                    path: path.to_path_buf(),
                    source,
                },
            })
    }
}

#[derive(Debug, Clone, Copy)]
struct SampleSite {
    row0: u32,
    row1: u32,
    wy: f64,
    // Column offset relative to the viewport center's column coordinate.
    dx: f64,
}

/// Precomputed viewport sampling pattern for one center latitude.
///
/// The pattern does not depend on the center longitude, which only shifts
/// the panorama columns, so one projector serves every viewport on the same
/// latitude.
#[derive(Debug, Clone)]
pub struct ViewportProjector {
    lat: f64,
    fov: FieldOfView,
    width: u32,
    height: u32,
    erp_width: u32,
    erp_height: u32,
    sites: Vec<SampleSite>,
}

impl ViewportProjector {
    pub fn new(
        lat: f64,
        fov: FieldOfView,
        width: u32,
        height: u32,
        erp_width: u32,
        erp_height: u32,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidViewportSize(width, height));
        }
        let (tx, ty) = fov.half_extent();
        let lat0 = lat.to_radians();
        let (ew, eh) = (erp_width as f64, erp_height as f64);
        let mut sites = Vec::with_capacity(width as usize * height as usize);
        for i in 0..height {
            let y = (1.0 - 2.0 * (i as f64 + 0.5) / height as f64) * ty;
            for j in 0..width {
                let x = (2.0 * (j as f64 + 0.5) / width as f64 - 1.0) * tx;
                let (plat, dlon) = gnomonic_inverse_offset(lat0, PlanePoint::new(x, y));
                let py = (PI / 2.0 - plat) / PI * eh - 0.5;
                let (row0, row1, wy) = if py <= 0.0 {
                    (0, 0, 0.0)
                } else if py >= eh - 1.0 {
                    (erp_height - 1, erp_height - 1, 0.0)
                } else {
                    let r = py.floor();
                    (r as u32, r as u32 + 1, py - r)
                };
                sites.push(SampleSite {
                    row0,
                    row1,
                    wy,
                    dx: dlon / (2.0 * PI) * ew,
                });
            }
        }
        Ok(Self {
            lat,
            fov,
            width,
            height,
            erp_width,
            erp_height,
            sites,
        })
    }

    pub fn for_image(
        img: &ErpImage,
        lat: f64,
        fov: FieldOfView,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        Self::new(lat, fov, width, height, img.width(), img.height())
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    /// Renders the viewport centered at `(self.lat, lon)`.
    pub fn render(&self, img: &ErpImage, lon: f64) -> Result<Viewport> {
        if img.width() != self.erp_width || img.height() != self.erp_height {
            return Err(Error::InvalidConfig(format!(
                "projector built for a {}x{} panorama, got {}x{}",
                self.erp_width,
                self.erp_height,
                img.width(),
                img.height()
            )));
        }
        let center = SphereCoord::new(self.lat, lon)?;
        let base = (center.lon() + 180.0) / 360.0 * self.erp_width as f64 - 0.5;
        let mut pixels = RgbImage::new(self.width, self.height);
        for (site, out) in self.sites.iter().zip(pixels.pixels_mut()) {
            *out = img.sample(base + site.dx, site.row0, site.row1, site.wy);
        }
        Ok(Viewport {
            center,
            fov: self.fov,
            pixels,
        })
    }
}

/// Renders a `size.0 x size.1` rectilinear viewport centered at `center`.
pub fn extract_viewport(
    img: &ErpImage,
    center: SphereCoord,
    fov: FieldOfView,
    size: (u32, u32),
) -> Result<Viewport> {
    ViewportProjector::for_image(img, center.lat(), fov, size.0, size.1)?.render(img, center.lon())
}

/// A row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayPatch {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayPatch {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "raster size mismatch"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, col: u32, row: u32) -> u8 {
        self.data[(row * self.width + col) as usize]
    }

    fn crop(&self, col: u32, row: u32, width: u32, height: u32) -> GrayPatch {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for r in row..row + height {
            let start = (r * self.width + col) as usize;
            data.extend_from_slice(&self.data[start..start + width as usize]);
        }
        GrayPatch {
            width,
            height,
            data,
        }
    }
}

/// One central and eight direction-aligned half-size patches of a viewport.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub center: GrayPatch,
    /// Indexed like [`Direction::ALL`].
    pub neighbors: [GrayPatch; 8],
}

/// Splits a viewport into a 3x3 grid of half-size grayscale patches with a
/// quarter-size stride, so adjacent patches overlap by half.
///
/// Cell `(1, 1)` is the central patch. The outer ring maps onto the
/// transition directions, north at the top row and east at the right column.
pub fn split_patches(vp: &Viewport) -> Result<PatchGrid> {
    split_gray(&vp.to_gray())
}

pub fn split_gray(gray: &GrayPatch) -> Result<PatchGrid> {
    let (w, h) = (gray.width, gray.height);
    if w == 0 || h == 0 || w % 4 != 0 || h % 4 != 0 {
        return Err(Error::IndivisibleSize {
            width: w,
            height: h,
        });
    }
    let (pw, ph) = (w / 2, h / 2);
    let (sx, sy) = (w / 4, h / 4);
    let cell = |row: u32, col: u32| gray.crop(col * sx, row * sy, pw, ph);
    let neighbors = Direction::ALL.map(|d| {
        let (ulat, ulon) = d.unit();
        cell((1.0 - ulat) as u32, (1.0 + ulon) as u32)
    });
    Ok(PatchGrid {
        center: cell(1, 1),
        neighbors,
    })
}

/// Shannon entropy in bits of the 256-bin gray-level histogram.
pub fn gray_entropy(patch: &GrayPatch) -> Result<f64> {
    entropy_of(&patch.data)
}

pub(crate) fn entropy_of(values: &[u8]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyPatch);
    }
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    let n = values.len() as f64;
    let h = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    // A single occupied bin yields -0.0.
    Ok(h.max(0.0))
}
