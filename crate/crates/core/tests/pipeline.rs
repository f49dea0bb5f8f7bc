use snake_dqn::env::{Cell, Direction, EnvState, GridConfig};
use snake_dqn::preprocess::{
    binarize, downscale, observe, to_grayscale, FrameStack, DEFAULT_THRESHOLD,
};

fn state() -> EnvState {
    EnvState::from_parts(
        GridConfig::default(),
        vec![Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 1)],
        Direction::Up,
        Some(Cell::new(11, 11)),
        0,
    )
    .unwrap()
}

#[test]
fn stages_agree_with_block_layout() {
    let rgb = state().render();
    assert_eq!((rgb.width(), rgb.height()), (252, 252));
    let gray = to_grayscale(&rgb);
    assert_eq!(gray.get(0, 0), 255.0);
    assert_eq!(gray.get(21, 0), 0.0);
    let small = downscale(&gray).unwrap();
    assert_eq!(small.get(6, 6), 255.0);
    assert_eq!(small.get(7, 6), 0.0);
    let bin = binarize(&small, DEFAULT_THRESHOLD);
    assert_eq!(bin, observe(&rgb).unwrap());
    assert_eq!(bin.count_ones(), 4 * 49);
    assert!(bin.get(83, 83) && bin.get(77, 77) && !bin.get(76, 77));
}

#[test]
fn stack_tracks_an_episode() {
    let mut env = EnvState::reset(GridConfig::default(), 1).unwrap();
    let first = observe(&env.render()).unwrap();
    let mut stack = FrameStack::init(first.clone());
    assert!(stack.frames().iter().all(|f| *f == first));
    for _ in 0..3 {
        env.step(Direction::Down).unwrap();
        stack.push(observe(&env.render()).unwrap());
    }
    assert_eq!(stack.frames()[0], first);
    assert_ne!(stack.newest(), &first);
    let frames: Vec<u32> = stack.frames().iter().map(|f| f.count_ones()).collect();
    assert!(frames.iter().all(|&n| n == 4 * 49), "{frames:?}");
}
