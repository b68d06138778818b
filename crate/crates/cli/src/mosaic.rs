//! Tiling result images into one annotated sheet.
//!
//! Labels go into a strip above each tile, never over image content. Text
//! uses a built-in 3×5 bitmap font.

use xdc_core::{Grid, ImageGrid};

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;
const PAD: usize = 1;
/// Height of the label strip above each tile.
pub const LABEL_H: usize = GLYPH_H + 2 * PAD;

const BACKGROUND: f64 = 1.0;
const INK: f64 = -1.0;

/// Rows of three bits, most significant bit leftmost.
fn glyph(c: char) -> [u8; GLYPH_H] {
    match c.to_ascii_uppercase() {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        '=' => [0b000, 0b111, 0b000, 0b111, 0b000],
        'T' => [0b111, 0b010, 0b010, 0b010, 0b010],
        'N' => [0b101, 0b111, 0b111, 0b111, 0b101],
        'R' => [0b110, 0b101, 0b110, 0b101, 0b101],
        'E' => [0b111, 0b100, 0b110, 0b100, 0b111],
        'K' => [0b101, 0b101, 0b110, 0b101, 0b101],
        'P' => [0b110, 0b101, 0b110, 0b100, 0b100],
        'X' => [0b101, 0b101, 0b010, 0b101, 0b101],
        _ => [0; GLYPH_H],
    }
}

pub fn text_width(text: &str) -> usize {
    let n = text.chars().count();
    if n == 0 {
        0
    } else {
        n * (GLYPH_W + 1) - 1
    }
}

/// Draws `text` with its top-left corner at (`top`, `left`) on every channel.
pub fn draw_text(grid: &mut Grid, top: usize, left: usize, text: &str) {
    for (i, c) in text.chars().enumerate() {
        let x0 = left + i * (GLYPH_W + 1);
        for (dy, bits) in glyph(c).iter().enumerate() {
            for dx in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - dx) & 1 == 1 {
                    let (y, x) = (top + dy, x0 + dx);
                    if y < grid.height() && x < grid.width() {
                        for ch in 0..grid.channels() {
                            grid.set(y, x, ch, INK);
                        }
                    }
                }
            }
        }
    }
}

/// One sheet cell: an image (or `None` for a failed cell) and its label.
pub struct Tile<'a> {
    pub image: Option<&'a Grid>,
    pub label: String,
}

/// Lays `tiles` out row-major in a `rows × cols` sheet. All images must share
/// `height × width`; they are shown as RGB.
pub fn tile_sheet(tiles: &[Tile<'_>], rows: usize, cols: usize, height: usize, width: usize) -> Grid {
    let label_w = tiles.iter().map(|t| text_width(&t.label) + 2 * PAD).max().unwrap_or(0);
    let cell_w = width.max(label_w) + PAD;
    let cell_h = height + LABEL_H + PAD;
    let mut sheet = ImageGrid::filled(rows * cell_h + PAD, cols * cell_w + PAD, 3, BACKGROUND);
    for (i, tile) in tiles.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        let (top, left) = (r * cell_h + PAD, c * cell_w + PAD);
        draw_text(&mut sheet, top + PAD, left + PAD, &tile.label);
        let img_top = top + LABEL_H;
        for y in 0..height {
            for x in 0..width {
                for ch in 0..3 {
                    let v = match tile.image {
                        Some(g) => g.get(y, x, ch.min(g.channels() - 1)),
                        None => 0.0,
                    };
                    sheet.set(img_top + y, left + x, ch, v);
                }
            }
        }
    }
    sheet
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_dimensions() {
        let img = ImageGrid::filled(4, 6, 3, 0.25);
        let tiles: Vec<Tile> = (0..6).map(|i| Tile { image: Some(&img), label: format!("{i}") }).collect();
        let sheet = tile_sheet(&tiles, 2, 3, 4, 6);
        assert_eq!(sheet.height(), 2 * (4 + LABEL_H + 1) + 1);
        assert_eq!(sheet.width(), 3 * (6 + 1) + 1);
        // first image pixel sits right below its label strip
        assert_eq!(sheet.get(1 + LABEL_H, 1, 0), 0.25);
    }

    #[test]
    fn wide_labels_widen_cells() {
        let img = ImageGrid::filled(2, 2, 1, 0.0);
        let label = "T0.25 N2 R0.2".to_string();
        let sheet = tile_sheet(&[Tile { image: Some(&img), label: label.clone() }], 1, 1, 2, 2);
        assert_eq!(sheet.width(), text_width(&label) + 2 + 2);
    }

    #[test]
    fn text_is_inked() {
        let mut g = ImageGrid::filled(7, 4, 3, BACKGROUND);
        draw_text(&mut g, 1, 0, "1");
        assert_eq!(g.get(1, 1, 0), INK);
        assert_eq!(g.get(1, 0, 0), BACKGROUND);
    }
}
