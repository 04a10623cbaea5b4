use std::path::PathBuf;
use std::process::Command;

/// Loads the freshly built extension into Python and runs the smoke test.
#[test]
fn python_smoke_test() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not found; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let root = manifest.join("../..");
    let target = std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| root.join("target"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|deps| deps.parent()).map(PathBuf::from);
    let lib = profile_dir
        .into_iter()
        .chain([target.join("debug"), target.join("release")])
        .map(|d| d.join("libwex.so"))
        .find(|p| p.exists())
        .expect("libwex.so is built alongside the tests");
    let site = tempfile::tempdir().unwrap();
    std::fs::copy(&lib, site.path().join("wex.so")).unwrap();
    let out = Command::new("python3")
        .arg(root.join("python/smoke_test.py"))
        .env("PYTHONPATH", site.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    println!("{stdout}");
    assert!(out.status.success(), "{}\n{}", stdout, String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("passed"));
}
