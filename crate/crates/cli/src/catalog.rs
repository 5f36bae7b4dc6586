/// Built-in prepotentials with the parameters each accepts.
pub const PREPOTENTIALS: [(&str, &str); 3] = [
    ("quadratic", "F = ½ c_ij Z^i Z^j; tau = n×n table of [re, im] (default i·Id)"),
    ("cubic", "F = Z³/6 on Im Z > 0; n = 1"),
    ("ov-log", "F = Z²/(4πi)(log(Z/Λ) − 3/2) + τ₀Z²/2; lambda, tau0 = [re, im]; n = 1"),
];

/// Example configurations shipped with the crate.
pub const EXAMPLES: [(&str, &str); 4] = [
    ("semi-flat.toml", include_str!("../configs/semi-flat.toml")),
    ("cubic.toml", include_str!("../configs/cubic.toml")),
    ("ov.toml", include_str!("../configs/ov.toml")),
    ("ov-decay.toml", include_str!("../configs/ov-decay.toml")),
];

pub fn render() -> String {
    let mut s = String::from("prepotentials:\n");
    for (name, doc) in PREPOTENTIALS {
        s.push_str(&format!("  {name:<10} {doc}\n"));
    }
    s.push_str("example configs (crates/cli/configs):\n");
    for (name, _) in EXAMPLES {
        s.push_str(&format!("  {name}\n"));
    }
    s
}
