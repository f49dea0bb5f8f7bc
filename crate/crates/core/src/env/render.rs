use super::EnvState;
use crate::preprocess::RgbFrame;

/// Draw snake and apple cells as filled white blocks on black.
pub fn render_rgb(state: &EnvState) -> RgbFrame {
    let cfg = state.config();
    let mut frame = RgbFrame::black(cfg.frame_width(), cfg.frame_height());
    for cell in state.body().chain(state.apple()) {
        let x0 = cell.col as usize * cfg.cell_px;
        let y0 = cell.row as usize * cfg.cell_px;
        frame.fill_rect(x0, y0, cfg.cell_px, cfg.cell_px, [255, 255, 255]);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Cell, Direction, GridConfig};

    #[test]
    fn background_is_black() {
        assert!(RgbFrame::black(252, 252).data().iter().all(|&v| v == 0));
        // A lone one-cell snake with no apple lights exactly one block.
        let s = EnvState::from_parts(
            GridConfig::default(),
            vec![Cell::new(0, 0)],
            Direction::Right,
            None,
            0,
        )
        .unwrap();
        let f = render_rgb(&s);
        assert_eq!(f.data().iter().filter(|&&v| v == 255).count(), 441 * 3);
        assert_eq!(f.pixel(20, 20), [255, 255, 255]);
        assert_eq!(f.pixel(21, 0), [0, 0, 0]);
    }

    #[test]
    fn reset_state_has_four_white_cells() {
        let s = EnvState::reset(GridConfig::default(), 0).unwrap();
        let f = render_rgb(&s);
        assert_eq!((f.width(), f.height()), (252, 252));
        assert_eq!(f.data().len(), 252 * 252 * 3);
        let white = f
            .data()
            .chunks_exact(3)
            .filter(|p| *p == [255, 255, 255])
            .count();
        let black = f.data().chunks_exact(3).filter(|p| *p == [0, 0, 0]).count();
        assert_eq!(white, 1764);
        assert_eq!(white + black, 252 * 252);
        assert_eq!(render_rgb(&s), f);
    }
}
