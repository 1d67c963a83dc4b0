//! Grammars bundled with the toolkit.

pub const MINILANG: &str = include_str!("../grammars/minilang.g");
pub const ARITH: &str = include_str!("../grammars/arith.g");
pub const TOY: &str = include_str!("../grammars/toy.g");

/// Source of a bundled grammar by name (`minilang`, `arith`, `toy`).
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "minilang" => Some(MINILANG),
        "arith" => Some(ARITH),
        "toy" => Some(TOY),
        _ => None,
    }
}
