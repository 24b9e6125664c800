//! Built-in experiment configurations, addressable as `recipe:<name>`.

const RECIPES: &[(&str, &str)] = &[
    (
        "exact_convergence",
        include_str!("../recipes/exact_convergence.toml"),
    ),
    (
        "fig1_signflip",
        include_str!("../recipes/fig1_signflip.toml"),
    ),
    ("fig2_alie", include_str!("../recipes/fig2_alie.toml")),
    (
        "fig3_dissensus",
        include_str!("../recipes/fig3_dissensus.toml"),
    ),
    (
        "fig4_noise_sweep",
        include_str!("../recipes/fig4_noise_sweep.toml"),
    ),
    ("table2_sweep", include_str!("../recipes/table2_sweep.toml")),
    (
        "weak_coupling",
        include_str!("../recipes/weak_coupling.toml"),
    ),
];

pub fn get(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> Vec<&'static str> {
    RECIPES.iter().map(|(n, _)| *n).collect()
}
