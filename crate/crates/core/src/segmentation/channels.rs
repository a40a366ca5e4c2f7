//! Colour channels derived from RGB frames.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::image::{luma, Plane};

/// Named colour channel used for tracking or feature extraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
    Lum,
    U,
    #[serde(rename = "ulum")]
    ULum,
    #[serde(rename = "pseudohue")]
    PseudoHue,
}

impl Channel {
    pub const ALL: [Channel; 7] = [
        Channel::Red,
        Channel::Green,
        Channel::Blue,
        Channel::Lum,
        Channel::U,
        Channel::ULum,
        Channel::PseudoHue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Red => "red",
            Channel::Green => "green",
            Channel::Blue => "blue",
            Channel::Lum => "lum",
            Channel::U => "u",
            Channel::ULum => "ulum",
            Channel::PseudoHue => "pseudohue",
        }
    }

    pub fn code(self) -> u32 {
        Channel::ALL.iter().position(|&c| c == self).unwrap() as u32
    }

    pub fn from_code(code: u32) -> Option<Channel> {
        Channel::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "grey" | "gray" | "luminance" => return Ok(Channel::Lum),
            "pseudo-hue" | "pseudo_hue" => return Ok(Channel::PseudoHue),
            "u*lum" | "u_lum" => return Ok(Channel::ULum),
            _ => {}
        }
        Channel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown channel `{s}`")))
    }
}

/// Every per-pixel colour representation used by segmentation and features.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// Luminance min-max rescaled to [0, 1] per frame.
    pub lum: Plane,
    /// CIE L*u*v* u* coordinate, D65 white.
    pub u: Plane,
    /// Element-wise `u * lum`.
    pub ulum: Plane,
    pub pseudo_hue: Plane,
    pub red: Plane,
    pub green: Plane,
    pub blue: Plane,
}

impl ChannelSet {
    /// Builds every channel from RGB planes holding values in [0, 1].
    pub fn from_rgb(red: Plane, green: Plane, blue: Plane) -> Self {
        let (w, h) = (red.width(), red.height());
        let raw_lum = Plane::from_fn(w, h, |r, c| {
            luma(red.get(r, c), green.get(r, c), blue.get(r, c))
        });
        let lum = rescale_unit(&raw_lum);
        let u = Plane::from_fn(w, h, |r, c| {
            cie_u(red.get(r, c), green.get(r, c), blue.get(r, c))
        });
        let ulum = Plane::from_fn(w, h, |r, c| u.get(r, c) * lum.get(r, c));
        let pseudo_hue = Plane::from_fn(w, h, |r, c| pseudo_hue(red.get(r, c), green.get(r, c)));
        ChannelSet {
            lum,
            u,
            ulum,
            pseudo_hue,
            red,
            green,
            blue,
        }
    }

    pub fn get(&self, channel: Channel) -> &Plane {
        match channel {
            Channel::Red => &self.red,
            Channel::Green => &self.green,
            Channel::Blue => &self.blue,
            Channel::Lum => &self.lum,
            Channel::U => &self.u,
            Channel::ULum => &self.ulum,
            Channel::PseudoHue => &self.pseudo_hue,
        }
    }

    pub fn width(&self) -> usize {
        self.lum.width()
    }

    pub fn height(&self) -> usize {
        self.lum.height()
    }
}

/// Maps the plane's minimum to 0 and maximum to 1; constant planes become 0.
pub fn rescale_unit(plane: &Plane) -> Plane {
    let (lo, hi) = plane.min_max();
    let range = hi - lo;
    Plane::from_fn(plane.width(), plane.height(), |r, c| {
        if range > 0.0 {
            (plane.get(r, c) - lo) / range
        } else {
            0.0
        }
    })
}

/// `R / (R + G)`, with black-ish pixels (`R + G = 0`) mapped to 0.5.
pub fn pseudo_hue(r: f64, g: f64) -> f64 {
    let s = r + g;
    if s > 0.0 {
        r / s
    } else {
        0.5
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

fn uv_prime(x: f64, y: f64, z: f64) -> Option<(f64, f64)> {
    let denom = x + 15.0 * y + 3.0 * z;
    if denom > 0.0 {
        Some((4.0 * x / denom, 9.0 * y / denom))
    } else {
        None
    }
}

fn white_u_prime() -> f64 {
    // D65 white as the image of RGB (1, 1, 1), so neutral greys map to u* = 0.
    let [x, y, z] = SRGB_TO_XYZ.map(|row| row.iter().sum::<f64>());
    uv_prime(x, y, z).unwrap().0
}

/// CIE L*u*v* `u*` of an sRGB colour with components in [0, 1].
pub fn cie_u(r: f64, g: f64, b: f64) -> f64 {
    let lin = [srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)];
    let [x, y, z] = SRGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2]);
    let Some((u_prime, _)) = uv_prime(x, y, z) else {
        return 0.0;
    };
    let eps = (6.0f64 / 29.0).powi(3);
    let l_star = if y > eps {
        116.0 * y.cbrt() - 16.0
    } else {
        (29.0f64 / 3.0).powi(3) * y
    };
    let u = 13.0 * l_star * (u_prime - white_u_prime());
    // Neutral colours land within rounding distance of the white point.
    if u.abs() < 1e-9 {
        0.0
    } else {
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neutral_colours_have_zero_u() {
        for v in [0.0, 0.02, 0.3, 0.5, 0.77, 1.0] {
            assert_eq!(cie_u(v, v, v), 0.0, "grey {v}");
        }
    }

    #[test]
    fn red_has_large_positive_u() {
        let u = cie_u(1.0, 0.0, 0.0);
        // Reference u* of sRGB red under D65 is about 175.
        assert!((u - 175.0).abs() < 1.0, "{u}");
        assert!(cie_u(0.0, 1.0, 0.0) < 0.0);
    }

    #[test]
    fn pseudo_hue_edge_cases() {
        assert_eq!(pseudo_hue(1.0, 0.0), 1.0);
        assert_eq!(pseudo_hue(0.0, 0.0), 0.5);
        assert_eq!(pseudo_hue(0.25, 0.75), 0.25);
    }

    #[test]
    fn grey_frame_channels() {
        let p = Plane::from_fn(5, 4, |r, c| 0.2 + 0.05 * (r + c) as f64);
        let set = ChannelSet::from_rgb(p.clone(), p.clone(), p);
        assert!(set.u.data().iter().all(|&v| v == 0.0));
        let (lo, hi) = set.lum.min_max();
        assert!(lo.abs() < 1e-6 && (hi - 1.0).abs() < 1e-6);
    }

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), c);
            assert_eq!(Channel::from_code(c.code()), Some(c));
        }
        assert_eq!("Grey".parse::<Channel>().unwrap(), Channel::Lum);
        assert!("purple".parse::<Channel>().is_err());
    }
}
