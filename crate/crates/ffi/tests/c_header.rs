use std::path::PathBuf;
use std::process::Command;

/// target/<profile>, found from the test binary in target/<profile>/deps.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "deps_purify.h"

int main(void) {
    double f = 0.0;
    if (dp_fidelity_recursion(0.5, &f) != DP_STATUS_OK) return 1;
    if (fabs(f - 25.0 / 29.0) > 1e-12) return 2;
    if (dp_fidelity_recursion(2.0, &f) != DP_STATUS_DOMAIN) return 3;
    if (dp_last_error_message() == NULL) return 4;

    DpTrace *trace = NULL;
    if (dp_iterate(0.2, 6, 1.0, &trace) != DP_STATUS_OK) return 5;
    DpRoundRecord r;
    if (dp_trace_round(trace, dp_trace_len(trace) - 1, &r) != DP_STATUS_OK) return 6;
    dp_trace_free(trace);
    if (r.round != 6 || r.fidelity <= 0.99) return 7;

    DpComparison c;
    if (dp_compare_schemes(0.5, &c) != DP_STATUS_OK) return 8;
    printf("%.12g %.12g\n", r.fidelity, c.baseline_yield);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    let bin = dir.join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = profile_dir().join("libdeps_purify_ffi.a");
    assert!(lib.exists(), "{}", lib.display());

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler runs");
    assert!(status.success());

    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0.99998327211 0.571428571429\n");
    std::fs::remove_dir_all(dir).ok();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("deps-purify-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
