use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use temporal_core::sim::generate::{random_netlist, GenConfig};

fn tempo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempo")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

fn golden(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("netlists")
        .join(name)
        .display()
        .to_string()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn run_add_prints_probe() {
    let out = tempo(&["run", &golden("add.net")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout), "probe sum=7\n");
    assert!(out.stderr.is_empty());
}

#[test]
fn run_stats_report_add_overhead() {
    let out = tempo(&["run", &golden("add.net"), "--stats"]);
    let stdout = text(&out.stdout);
    assert!(stdout.contains("add.sum=cost:8 linear:7 overhead:1\n"), "{stdout}");
    assert!(stdout.contains("block_overhead=1\n"));
}

#[test]
fn malformed_netlist_exits_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.net", "block a source value=3\nblock s add value=x\nwire a.out\n");
    let out = tempo(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("3:"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn validation_errors_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "v.net", "block a source value=3\nwire a.out ghost.in0\nwire a.out phantom.in0\n");
    let out = tempo(&["run", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("ghost") && err.contains("phantom"), "{err}");
}

#[test]
fn missing_file_exits_1() {
    let out = tempo(&["run", "/nonexistent/x.net"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn small_budget_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "big.net",
        "block a source value=1000\nblock b source value=1000\nblock s add\nwire a.out s.in0\nwire b.out s.in1\nprobe s\n",
    );
    let out = tempo(&["run", p.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("budget"));
}

#[test]
fn check_madd_matches() {
    let out = tempo(&["check", &golden("madd.net")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout), "match dot: 18 = 18\n");
}

#[test]
fn injected_fault_exits_3_with_diff() {
    let out = tempo(&["check", &golden("add.net"), "--inject-fault", "add-off-by-one"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(text(&out.stdout), "mismatch sum: expected 7, actual 8\n");
}

#[test]
fn random_dag_files_check_clean() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..100 {
        let p = write(dir.path(), &format!("r{i}.net"), &random_netlist(&mut rng, &GenConfig::default()));
        let out = tempo(&["check", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}\n{}", text(&out.stdout), text(&out.stderr));
    }
}

#[test]
fn output_is_byte_stable() {
    for args in [
        vec!["run", "NET", "--stats"],
        vec!["check", "NET"],
        vec!["--seed", "9", "run", "NET"],
    ] {
        for net in ["add.net", "plex.net", "madd.net"] {
            let g = golden(net);
            let args: Vec<&str> = args.iter().map(|a| if *a == "NET" { g.as_str() } else { a }).collect();
            let a = tempo(&args);
            let b = tempo(&args);
            assert_eq!(a.stdout, b.stdout);
            assert_eq!(a.stderr, b.stderr);
        }
    }
}

#[test]
fn encode_schemes() {
    let cases: [(&[&str], &str); 6] = [
        (&["encode", "unary", "7"], "unary 7: 1111111\ndecoded 7\n"),
        (&["encode", "pim", "7"], "pim 7: pulses 0,7\ndecoded 7\n"),
        (&["encode", "hybrid", "123", "--base", "10"], "hybrid 123 base 10: 1|11|111\ndecoded 123\n"),
        (&["encode", "mux", "7", "5"], "mux {5,7}: pulses 0,5,7\ndecoded {5,7}\n"),
        (&["encode", "serial", "3", "4"], "serial 3,4: pulses 0,3,7\ndecoded 3,4\n"),
        (&["encode", "discontinuous", "3", "4", "--gap", "2"], "discontinuous 3,4: pulses 0,3,5,9\ndecoded 3,4\n"),
    ];
    for (args, expected) in cases {
        let out = tempo(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert_eq!(text(&out.stdout), expected);
    }
}

#[test]
fn encode_rejects_bad_input() {
    assert_eq!(tempo(&["encode", "mux", "5", "5"]).status.code(), Some(1));
    assert_eq!(tempo(&["encode", "serial", "3", "0"]).status.code(), Some(1));
    assert_eq!(tempo(&["encode", "pim", "x"]).status.code(), Some(1));
    assert_eq!(tempo(&["encode", "hybrid", "9", "--base", "1"]).status.code(), Some(1));
}

#[test]
fn bench_add_slope_is_two() {
    let out = tempo(&["bench", "add", "--sizes", "10,100,1000"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout), "size,ticks\n10,21\n100,201\n1000,2001\n");
}

#[test]
fn bench_madd_grows_with_position() {
    let out = tempo(&["bench", "madd", "--sizes", "1,2,3", "--amplitude", "4"]);
    let rows: Vec<u64> = text(&out.stdout)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // equal steps per unit of position
    assert_eq!(rows[1] - rows[0], rows[2] - rows[1]);
}

#[test]
fn bench_mul_minimal_row_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.csv");
    let out = tempo(&["bench", "mul", "--sizes", "1", "--k", "1", "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(p).unwrap(), "size,ticks\n1,2\n");
}

#[test]
fn export_vcd_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let run = tempo(&["run", &golden("add.net"), "--trace", csv.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let trace = std::fs::read_to_string(&csv).unwrap();
    assert!(trace.starts_with("tick,block,port,role\n"));
    assert!(trace.ends_with("# sum=7\n# budget_exhausted=false\n"));

    let out = tempo(&["export", csv.to_str().unwrap(), "--format", "vcd"]);
    assert_eq!(out.status.code(), Some(0));
    let vcd = text(&out.stdout);
    assert!(vcd.contains("$enddefinitions $end\n"));
    assert!(vcd.contains(" sum.out $end\n"));
    assert!(vcd.ends_with('\n') && !vcd.ends_with("\n\n"));

    let out = tempo(&["export", csv.to_str().unwrap()]);
    assert!(trace.starts_with(text(&out.stdout)));
}

#[test]
fn usage_errors() {
    assert_eq!(tempo(&["run", &golden("add.net"), "--bogus"]).status.code(), Some(1));
    assert_eq!(tempo(&[]).status.code(), Some(1));
    assert_eq!(tempo(&["frobnicate"]).status.code(), Some(1));
    let help = tempo(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(text(&help.stdout).contains("bench"));
}
