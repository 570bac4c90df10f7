//! PASCAL VOC label colormap.

use crate::io::pnm::Pnm;
use crate::maps::LabelMap;

/// Colour of label `index`: bits 0, 1, 2 of each successive 3-bit group of
/// the index are written, most significant first, into R, G and B.
pub const fn voc_color(index: u8) -> [u8; 3] {
    let mut rgb = [0u8; 3];
    let mut c = index;
    let mut j = 0;
    while j < 8 {
        rgb[0] |= (c & 1) << (7 - j);
        rgb[1] |= ((c >> 1) & 1) << (7 - j);
        rgb[2] |= ((c >> 2) & 1) << (7 - j);
        c >>= 3;
        j += 1;
    }
    rgb
}

pub fn colorize(label: &LabelMap) -> Pnm {
    let data = label
        .labels()
        .iter()
        .flat_map(|&l| voc_color(l))
        .collect();
    Pnm {
        width: label.width(),
        height: label.height(),
        channels: 3,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_colors() {
        assert_eq!(voc_color(0), [0, 0, 0]);
        assert_eq!(voc_color(1), [128, 0, 0]);
        assert_eq!(voc_color(2), [0, 128, 0]);
        assert_eq!(voc_color(15), [192, 128, 128]);
        assert_eq!(voc_color(20), [0, 64, 128]);
        assert_eq!(voc_color(255), [224, 224, 192]);
    }

    #[test]
    fn image_layout() {
        let m = LabelMap::new(1, 2, vec![1, 255]).unwrap();
        let img = colorize(&m);
        assert_eq!(img.data, vec![128, 0, 0, 224, 224, 192]);
    }
}
