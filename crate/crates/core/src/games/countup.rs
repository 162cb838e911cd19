use super::Position;

/// Action index `a` adds `a + 1`; reaching `target` wins for the mover.
pub(super) fn apply(counter: u32, action: usize, target: u32) -> (Position, Option<i8>) {
    let next = counter + action as u32 + 1;
    let outcome = (next >= target).then_some(1);
    (Position::Counter(next), outcome)
}
