//! Netpbm writers: 8-bit binary graymaps and packed bitmaps.

use semnav_core::dataset::OccupancyPatch;

/// `P5` graymap of values in [0, 1], row 0 first.
pub fn pgm(size: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{size} {size}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

/// `P4` bitmap; occupied cells are black (bit set).
pub fn pbm(patch: &OccupancyPatch) -> Vec<u8> {
    let size = patch.size;
    let mut out = format!("P4\n{size} {size}\n").into_bytes();
    for row in patch.cells.chunks(size) {
        for byte in row.chunks(8) {
            let mut b = 0u8;
            for (i, &set) in byte.iter().enumerate() {
                if set {
                    b |= 0x80 >> i;
                }
            }
            out.push(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_layout() {
        let img = pgm(2, &[0.0, 1.0, 0.5, 2.0]);
        assert_eq!(&img[..11], b"P5\n2 2\n255\n");
        assert_eq!(&img[11..], &[0, 255, 128, 255]);
    }

    #[test]
    fn pbm_packs_rows_separately() {
        let mut p = OccupancyPatch::empty(10);
        p.set(0, 0, true);
        p.set(0, 9, true);
        p.set(1, 8, true);
        let img = pbm(&p);
        let header = b"P4\n10 10\n".len();
        assert_eq!(img.len(), header + 10 * 2);
        assert_eq!(&img[header..header + 4], &[0x80, 0x40, 0x00, 0x80]);
    }
}
