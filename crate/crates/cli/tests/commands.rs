use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use grating_cli::config::{
    GreenSection, InverseSection, MeshSection, OutputSection, PerturbedSection, ProfileSection,
    QuadratureSection, ScanSection, SolverSection, VerifySection, WaveSection,
};
use grating_cli::RunConfig;

fn grating(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_grating"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join("out").join(name)).unwrap()
}

/// Data rows of a CSV artifact, without comment and header lines.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn rayleigh(dir: &Path, n: i64) -> (f64, f64) {
    let t = read(dir, "rayleigh.csv");
    let r = rows(&t)
        .into_iter()
        .find(|r| r[0] == n.to_string())
        .unwrap();
    (r[4].parse().unwrap(), r[5].parse().unwrap())
}

#[test]
fn flat_solve_reflects_with_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = grating(
        dir.path(),
        &["solve"],
        "[profile]\nspec = \"flat\"\n[wave]\nk = 2.0\ntheta = 0.3\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (re, im) = rayleigh(dir.path(), 0);
    assert!(
        ((re + 1.0).powi(2) + im * im).sqrt() < 2e-2,
        "u0 = {re} {im}"
    );
    let e = read(dir.path(), "energy.txt");
    let bal: f64 = e
        .lines()
        .find_map(|l| l.strip_prefix("energy_balance = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(bal < 1e-10);
}

#[test]
fn echelle_solve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[profile]\nspec = \"echelle\"\n[wave]\nk = 2.0\ntheta = 0.0\n\
               [mesh]\ntarget_size = 0.05\nh = 4.0\nn_periods = 7\npml_width = 6.283185307179586\n";
    let out = grating(dir.path(), &["solve"], cfg);
    assert!(out.status.success());
    for (n, expect) in [(0, 1.0), (2, -1.0), (-2, -1.0)] {
        let (re, im) = rayleigh(dir.path(), n);
        assert!(
            ((re - expect).powi(2) + im * im).sqrt() < 5e-2,
            "order {n}: {re} {im}"
        );
    }
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = grating(dir.path(), &["solve"], "[profile\nspec = flat\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse"));
    let rec: toml::Table = toml::from_str(&read(dir.path(), "error.toml")).unwrap();
    assert_eq!(rec["status"].as_integer(), Some(2));
    assert_eq!(rec["kind"].as_str(), Some("config"));
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        "[profile]\nspec = \"flat\"\n[wave]\nk = -1.0\ntheta = 0.0\n",
        "[profile]\nspec = \"zigzag\"\n[wave]\nk = 1.0\ntheta = 0.0\n",
        "[profile]\nspec = \"flat\"\n[wave]\nk = 1.0\ntheta = 2.0\n",
        "[profile]\nspec = \"flat\"\n",
    ] {
        let out = grating(dir.path(), &["solve"], cfg);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{cfg}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn eig_count_reports_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[profile]\nspec = \"flat\"\n[inverse]\ntask = \"eig-count\"\nh = 3.141592653589793\nk = 2.0\n";
    let out = grating(dir.path(), &["inverse"], cfg);
    assert!(out.status.success());
    assert!(read(dir.path(), "eig_count.txt")
        .lines()
        .any(|l| l == "count = 3"));
}

#[test]
fn scan_finds_nothing_on_graph_profiles() {
    for spec in ["flat", "sine:0.3"] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = format!("[profile]\nspec = \"{spec}\"\n[wave]\nk = 1.4\n[scan]\ngrid_size = 64\ndip_factor = 10.0\n");
        let out = grating(dir.path(), &["scan"], &cfg);
        assert!(out.status.success());
        assert!(rows(&read(dir.path(), "modes.csv")).is_empty(), "{spec}");
        assert!(rows(&read(dir.path(), "sigma.csv")).len() >= 64);
    }
}

#[test]
fn green_is_symmetric_on_the_flat_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[profile]\nspec = \"flat\"\n[wave]\nk = 1.7\n[green]\npairs = 3\nx_range = [0.0, 6.283185307179586]\n\
               lateral_periods = 4\n";
    let out = grating(dir.path(), &["green", "--refine", "1", "--seed", "3"], cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = read(dir.path(), "symmetry.txt");
    let d: f64 = r
        .lines()
        .find_map(|l| l.strip_prefix("max_asymmetry = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(d < 1e-2, "asymmetry {d}");
}

#[test]
fn echelle_pair_is_not_discriminated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[profile]\nspec = \"echelle\"\nperturbation = \"echelle-defect\"\n[wave]\nk = 2.0\ntheta = 0.0\n\
               [perturbed]\ncompare = \"none\"\nsamples = 65\n\
               [mesh]\ntarget_size = 0.1\nn_periods = 7\npml_width = 6.283185307179586\n";
    let out = grating(dir.path(), &["perturbed"], cfg);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(read(dir.path(), "uniqueness.txt")
        .lines()
        .any(|l| l == "verdict = NOT discriminated"));
}

#[test]
fn outputs_carry_headers_and_repeat_exactly() {
    let cfg = "[profile]\nspec = \"sine:0.3\"\n[wave]\nk = 1.3\ntheta = 0.2\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(grating(a.path(), &["solve"], cfg).status.success());
    assert!(grating(b.path(), &["solve"], cfg).status.success());
    let hash = RunConfig::parse(cfg).unwrap().hash();
    for name in ["field.csv", "rayleigh.csv", "energy.txt"] {
        let ta = read(a.path(), name);
        assert_eq!(ta, read(b.path(), name), "{name}");
        assert!(ta.lines().any(|l| l == format!("# config_hash = {hash}")));
        assert!(ta
            .lines()
            .any(|l| l.starts_with("# versions = grating-core")));
        assert!(ta.lines().any(|l| l.starts_with("# mesh = nodes=")));
    }
}

#[test]
fn verify_subset_prints_one_line_per_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = grating(
        dir.path(),
        &["verify"],
        "[profile]\nspec = \"flat\"\n[verify]\ncriteria = [5, 11]\n",
    );
    assert!(out.status.success());
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("criterion  5 PASS"));
    assert!(s.contains("criterion 11 PASS"));
}

fn full_config() -> RunConfig {
    RunConfig {
        profile: ProfileSection {
            spec: "echelle".into(),
            perturbation: Some("notch:0.5,0.3".into()),
        },
        wave: Some(WaveSection {
            k: 2.0,
            theta: Some(0.1),
            source: None,
        }),
        mesh: MeshSection {
            target_size: 0.15,
            h: Some(4.0),
            n_periods: 9,
            pml_width: 7.0,
        },
        solver: SolverSection {
            dtn_order: Some(12),
        },
        quadrature: QuadratureSection {
            kind: "graded".into(),
            panels: 6.0,
            points: 8,
        },
        scan: ScanSection {
            grid_size: 64,
            dip_factor: 5.0,
        },
        green: GreenSection {
            pairs: 2,
            x_range: [-1.0, 2.0],
            lateral_periods: 3,
        },
        perturbed: PerturbedSection {
            compare: Some("bump:0.4,0.2".into()),
            record_height: Some(3.0),
            angles: vec![0.2, -0.3],
            samples: 33,
        },
        inverse: InverseSection {
            task: "uniqueness".into(),
            h: Some(3.5),
            k: None,
        },
        verify: VerifySection {
            criteria: vec![1, 4],
        },
        output: OutputSection {
            dir: "results".into(),
        },
    }
}

#[test]
fn full_config_round_trips() {
    let c = full_config();
    assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
}

proptest! {
    #[test]
    fn config_round_trip_is_lossless(
        k in 0.01f64..20.0,
        theta in -1.5f64..1.5,
        src in proptest::option::of((-10.0f64..10.0, 0.0f64..5.0)),
        target in 0.01f64..1.0,
        h in proptest::option::of(0.5f64..10.0),
        n in 1usize..8,
        order in proptest::option::of(0usize..40),
        spec in prop::sample::select(vec!["flat", "echelle", "sine:0.25", "resonator", "polyline:0,0;3,1;6.283185307179586,0"]),
        angles in proptest::collection::vec(-1.5f64..1.5, 0..4),
        criteria in proptest::collection::vec(1u32..15, 0..6),
    ) {
        let mut c = full_config();
        c.profile.spec = spec.into();
        c.wave = Some(match src {
            Some((a, b)) => WaveSection { k, theta: None, source: Some([a, b]) },
            None => WaveSection { k, theta: Some(theta), source: None },
        });
        c.mesh.target_size = target;
        c.mesh.h = h;
        c.mesh.n_periods = 2 * n + 1;
        c.solver.dtn_order = order;
        c.perturbed.angles = angles;
        c.verify.criteria = criteria;
        let back = RunConfig::parse(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }
}
