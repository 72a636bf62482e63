use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sdl(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sdl"));
    c.args(args);
    match threads {
        Some(t) => c.env("SDL_THREADS", t),
        None => c.env_remove("SDL_THREADS"),
    };
    c.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn spectrum_config(subdivisions: usize, seed: u64) -> String {
    format!(
        "seed = {seed}\n[domain]\nbuilder = \"icosphere\"\nsubdivisions = {subdivisions}\n[task]\nkind = \"spectrum\"\nproblem = \"weighted-laplace\"\ncount = 8\n"
    )
}

#[test]
fn spectrum_run_matches_the_spherical_harmonics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", &spectrum_config(5, 1));
    let out = sdl(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("s.out");
    let csv = fs::read_to_string(run.join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# "));
    assert_eq!(lines.next().unwrap(), "index,eigenvalue,multiplicity_group,residual");
    let eig: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // l(l+1) on the unit sphere with multiplicity 2l+1
    for (k, l) in eig.iter().enumerate().take(9).skip(1) {
        let (target, rel) = if k <= 3 { (2.0, 0.005) } else { (6.0, 0.01) };
        assert!((l - target).abs() < rel * target, "λ{k} = {l}");
    }

    let summary = json(&run.join("summary.json"));
    assert_eq!(summary["task"], "spectrum");
    assert_eq!(summary["vertices"], 10242);
    assert_eq!(summary["passed"], true);
    let manifest = json(&run.join("manifest.json"));
    assert_eq!(manifest["status"], "passed");
    assert_eq!(manifest["config"]["domain"]["subdivisions"], 5);
    assert!(manifest["wall_seconds"].as_f64().unwrap() > 0.0);
    assert_eq!(manifest["operations"][0]["name"], "weighted_laplace_spectrum");
    assert!(manifest["operations"][0]["tolerances"]["zero_tol"].is_number());
    let files: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["spectrum.csv", "summary.json"]);
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 42\n[domain]\nbuilder = \"icosphere\"\nsubdivisions = 2\n[task]\nkind = \"spectrum\"\nproblem = \"schrodinger\"\ncount = 6\npotential = { kind = \"random\", low = -2.0, high = 1.0 }\n";
    let a = write(dir.path(), "a.toml", text);
    let b = write(dir.path(), "b.toml", text);
    let c = write(dir.path(), "c.toml", &text.replace("seed = 42", "seed = 43"));
    for (p, t) in [(&a, "1"), (&b, "3"), (&c, "1")] {
        assert_eq!(sdl(&["run", p], Some(t)).status.code(), Some(0));
    }
    let read = |n: &str| fs::read(dir.path().join(n).join("spectrum.csv")).unwrap();
    assert_eq!(read("a.out"), read("b.out"));
    assert_ne!(read("a.out"), read("c.out"));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let good = spectrum_config(2, 0);
    let cases = [
        good.replace("count = 8", "count = 8\nshift = 1.0"),
        good.replace("seed = 0", "seed = 0\nextra = true"),
        good.replace("weighted-laplace", "steklov"),
        good.replace("count = 8", "count = 0"),
        good.replace("subdivisions = 2", "subdivisions = 12"),
        "not toml at all".into(),
    ];
    for (k, text) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("bad{k}.toml"), text);
        let out = sdl(&["run", &p], None);
        assert_eq!(out.status.code(), Some(2), "case {k}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!dir.path().join(format!("bad{k}.out/spectrum.csv")).exists());
    }
    let out = sdl(&["run", &write(dir.path(), "ok.toml", &good)], Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    let out = sdl(&["run", dir.path().join("missing.toml").to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    // the first Neumann eigenfunctions of the disk vanish at the centre,
    // which carries about 3% of the mass on this coarse mesh
    let text = "[domain]\nbuilder = \"disk\"\nradial_resolution = 3\n[task]\nkind = \"optimize-density\"\n";
    let p = write(dir.path(), "f.toml", text);
    let out = sdl(&["run", &p], None);
    assert_eq!(out.status.code(), Some(3));
    let manifest = json(&dir.path().join("f.out/manifest.json"));
    assert_eq!(manifest["status"], "solver-error");
    assert!(manifest["diagnostics"][0].as_str().unwrap().contains("vanishes"));
    assert!(!dir.path().join("f.out/trace.csv").exists());

    let text = "[domain]\nbuilder = \"torus\"\nside_lengths = [1.0, 1.0]\nresolution = 16\n[task]\nkind = \"harmonic-solve\"\ninitial = { kind = \"circle\", period = 1.0 }\nperturbation = 0.3\ntol = 1e-12\nmax_iters = 2\n";
    let p = write(dir.path(), "g.toml", text);
    let out = sdl(&["run", &p], None);
    assert_eq!(out.status.code(), Some(1));
    let manifest = json(&dir.path().join("g.out/manifest.json"));
    assert_eq!(manifest["status"], "checks-failed");
    assert!(manifest["diagnostics"][0].as_str().unwrap().contains("converged"));
}

#[test]
fn optimize_density_reaches_eight_pi() {
    let dir = tempfile::tempdir().unwrap();
    let text = "seed = 7\n[domain]\nbuilder = \"icosphere\"\nsubdivisions = 4\n[task]\nkind = \"optimize-density\"\ndensity = { kind = \"quadratic\", base = 1.0, coefficients = [0.0, 0.0, 0.5] }\n[task.optimizer]\nmax_iters = 30\n";
    let p = write(dir.path(), "o.toml", text);
    let out = sdl(&["run", &p], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let run = dir.path().join("o.out");
    let s = json(&run.join("summary.json"));
    let f1 = s["metrics"]["F1"].as_f64().unwrap();
    assert!((f1 / (8.0 * std::f64::consts::PI) - 1.0).abs() < 0.02, "F1 = {f1}");
    assert!(f1 <= s["metrics"]["certified_bound"].as_f64().unwrap() * (1.0 + 1e-9));
    let trace = fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.lines().any(|l| l == "iteration,F1,gap,beta_change,map_rank"));
    for f in ["density.txt", "map.txt"] {
        assert!(run.join(f).exists());
    }
}

#[test]
fn steklov_and_gl_tasks_write_their_traces() {
    let dir = tempfile::tempdir().unwrap();
    let st = "[domain]\nbuilder = \"disk\"\nradial_resolution = 8\n[task]\nkind = \"optimize-steklov\"\ndensity = { kind = \"exponential\", coefficients = [0.3, 0.0, 0.0] }\n[task.optimizer]\nmax_iters = 40\n";
    let out = sdl(&["run", &write(dir.path(), "st.toml", st)], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = json(&dir.path().join("st.out/summary.json"));
    assert!((s["metrics"]["G1_over_2pi"].as_f64().unwrap() - 1.0).abs() < 0.02);

    let gl = "[domain]\nbuilder = \"icosphere\"\nsubdivisions = 3\n[task]\nkind = \"gl-continuation\"\ninitial = { kind = \"identity\" }\nschedule = [0.4, 0.2, 0.1]\n";
    let out = sdl(&["run", &write(dir.path(), "gl.toml", gl)], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let trace = fs::read_to_string(dir.path().join("gl.out/trace.csv")).unwrap();
    assert!(trace.contains("stage,epsilon,iterations,dirichlet,potential_term,residual\n"));
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let map = fs::read_to_string(dir.path().join("gl.out/map.txt")).unwrap();
    assert!(map.contains("# epsilon = 0.1"));
    assert!(map.contains("# on_sphere = true"));
}

#[test]
fn sweep_isolates_failures_and_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    for s in [2, 3] {
        write(dir.path(), &format!("res{s}.toml"), &spectrum_config(s, 0));
    }
    write(dir.path(), "broken.toml", "[domain]\nbuilder = \"cube\"\n");
    write(dir.path(), "notes.txt", "ignored");
    let out = sdl(&["sweep", dir.path().to_str().unwrap()], Some("2"));
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("config,task,domain,vertices,status,metric,value\n"));
    assert!(csv.contains("broken.toml,,,,validation-error,,"));
    let lambda = |name: &str| -> f64 {
        let row = csv.lines().find(|l| l.starts_with(name) && l.contains(",eigenvalue_1,")).unwrap();
        row.rsplit(',').next().unwrap().parse().unwrap()
    };
    // refinement brings λ₁ closer to 2
    assert!((lambda("res3.toml") - 2.0).abs() < (lambda("res2.toml") - 2.0).abs());
    assert!(dir.path().join("res2.out/spectrum.csv").exists());
    assert!(dir.path().join("res3.out/manifest.json").exists());

    let one = fs::read(dir.path().join("sweep.csv")).unwrap();
    sdl(&["sweep", dir.path().to_str().unwrap()], Some("1"));
    assert_eq!(fs::read(dir.path().join("sweep.csv")).unwrap(), one);
}

#[test]
fn sweep_of_an_empty_directory_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdl(&["sweep", dir.path().to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 runs"));
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), "config,task,domain,vertices,status,metric,value\n");
}

#[test]
fn sweep_rejects_shared_output_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = spectrum_config(2, 0).replace("seed = 0", "seed = 0\noutput = \"same\"");
    write(dir.path(), "a.toml", &cfg);
    write(dir.path(), "b.toml", &cfg);
    let out = sdl(&["sweep", dir.path().to_str().unwrap()], Some("2"));
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("a.toml,spectrum,") && l.contains(",passed,")));
    assert!(csv.contains("b.toml,,,,validation-error,,"));
}
