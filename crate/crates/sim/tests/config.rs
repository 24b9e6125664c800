use proptest::prelude::*;
use scc_sim::config::{parse, set_path, ConfigError, TheoryMode};
use scc_sim::recipes;

const BASE: &str = r#"
[topology]
kind = "complete"
n_agents = 20
byzantine_fraction = 0.1

[schedule]
kind = "decaying"
theta = 1.0
k0 = 10

[aggregation]
kind = "scc"
allow_oracle = true

[run]
horizon = 50
seeds = [1, 2]
"#;

fn msg(text: &str, overrides: &[&str]) -> String {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let e = parse("t", text, &o).unwrap_err();
    assert!(e.downcast_ref::<ConfigError>().is_some(), "{e:#}");
    format!("{e:#}")
}

#[test]
fn every_recipe_parses() {
    for name in recipes::names() {
        let exp = parse(name, recipes::get(name).unwrap(), &[]).unwrap();
        assert!(!exp.cells.is_empty(), "{name}");
        assert_eq!(exp.name, name);
    }
}

#[test]
fn unknown_keys_are_rejected_with_location() {
    let text = BASE.replace("horizon = 50", "horizon = 50\nhorizn = 3");
    let m = msg(&text, &[]);
    assert!(m.contains("horizn"), "{m}");
    assert!(m.contains("line"), "{m}");
    let m = msg(BASE, &["run.colour=3"]);
    assert!(m.contains("colour"), "{m}");
}

#[test]
fn missing_and_inconsistent_fields_are_rejected() {
    msg(&BASE.replace("theta = 1.0\n", ""), &[]);
    msg(BASE, &["schedule.kind=\"constant\""]);
    msg(BASE, &["run.seeds=[]"]);
    msg(BASE, &["run.seeds=[1, 1]"]);
    msg(BASE, &["topology.kind=\"random\""]);
    msg(BASE, &["topology.byzantine=[1]"]);
    let m = msg(BASE, &["aggregation.allow_oracle=false"]);
    assert!(m.contains("allow_oracle"), "{m}");
    msg(
        BASE,
        &["theory.mode=\"off\"", "schedule.kind=\"theory_decaying\""],
    );
}

#[test]
fn overrides_apply_and_change_the_hash() {
    let base = parse("t", BASE, &[]).unwrap();
    let same = parse("t", BASE, &[]).unwrap();
    assert_eq!(base.hash, same.hash);
    let o = parse(
        "t",
        BASE,
        &["run.horizon=7".into(), "theory.mode=off".into()],
    )
    .unwrap();
    assert_eq!(o.cells[0].config.run.horizon, 7);
    assert_eq!(o.cells[0].config.theory.mode, TheoryMode::Off);
    assert_ne!(o.hash, base.hash);
    assert_eq!(base.hash.len(), 64);
}

#[test]
fn empty_sweep_is_one_cell() {
    let exp = parse("t", BASE, &[]).unwrap();
    assert_eq!(exp.cells.len(), 1);
    assert!(exp.cells[0].assignments.is_empty());
    assert_eq!(exp.cells[0].label(), "base");
}

#[test]
fn sweep_is_cartesian_with_the_last_axis_fastest() {
    let text = format!(
        "{BASE}\n[[sweep]]\nkey = \"noise.variance\"\nvalues = [0.0, 1.0]\n\n[[sweep]]\nkeys = [\"schedule.theta\", \"schedule.k0\"]\nvalues = [[1.0, 10], [2.0, 20], [3.0, 30]]\n"
    );
    let exp = parse("t", &text, &[]).unwrap();
    assert_eq!(exp.cells.len(), 6);
    let got: Vec<(f64, f64, u64)> = exp
        .cells
        .iter()
        .map(|c| {
            (
                c.config.noise.variance,
                c.config.schedule.theta.unwrap(),
                c.config.schedule.k0.unwrap(),
            )
        })
        .collect();
    assert_eq!(
        got,
        vec![
            (0.0, 1.0, 10),
            (0.0, 2.0, 20),
            (0.0, 3.0, 30),
            (1.0, 1.0, 10),
            (1.0, 2.0, 20),
            (1.0, 3.0, 30)
        ]
    );
    assert_eq!(exp.cells[4].value_of("schedule.k0"), Some("20"));
    assert_eq!(exp.n_axes(), 3);
}

#[test]
fn zipped_axis_needs_matching_arity() {
    let text = format!(
        "{BASE}\n[[sweep]]\nkeys = [\"schedule.theta\", \"schedule.k0\"]\nvalues = [[1.0]]\n"
    );
    msg(&text, &[]);
}

#[test]
fn bad_cell_values_are_reported_with_the_cell() {
    let text = format!("{BASE}\n[[sweep]]\nkey = \"run.horizon\"\nvalues = [5, \"long\"]\n");
    let m = msg(&text, &[]);
    assert!(m.contains("cell 1"), "{m}");
}

#[test]
fn set_path_creates_tables() {
    let mut t = toml::Table::new();
    set_path(&mut t, "a.b.c", toml::Value::Integer(3)).unwrap();
    assert_eq!(t["a"]["b"]["c"].as_integer(), Some(3));
    assert!(set_path(&mut t, "a.b.c.d", toml::Value::Integer(1)).is_err());
    assert!(set_path(&mut t, "a..b", toml::Value::Integer(1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cell_count_is_the_product_of_axis_lengths(lens in prop::collection::vec(1usize..4, 0..4)) {
        let keys = ["noise.variance", "run.horizon", "schedule.theta", "topology.seed"];
        let mut text = String::from(BASE);
        for (a, &n) in lens.iter().enumerate() {
            let values: Vec<String> = (0..n)
                .map(|i| match a {
                    0 => format!("{}.0", i),
                    2 => format!("{}.5", i + 1),
                    _ => format!("{}", i + 1),
                })
                .collect();
            text.push_str(&format!("\n[[sweep]]\nkey = \"{}\"\nvalues = [{}]\n", keys[a], values.join(", ")));
        }
        let exp = parse("t", &text, &[]).unwrap();
        prop_assert_eq!(exp.cells.len(), lens.iter().product::<usize>());
        for (i, c) in exp.cells.iter().enumerate() {
            prop_assert_eq!(c.index, i);
            prop_assert_eq!(c.assignments.len(), lens.len());
        }
    }
}
