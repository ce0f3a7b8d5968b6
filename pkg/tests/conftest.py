import contextlib
import io as _io
from pathlib import Path

import pytest

from landuse.cli import main

# criterion number -> (title, passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def run_cli(*argv):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    out, err = _io.StringIO(), _io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main([str(a) for a in argv])
        except SystemExit as exc:
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def synth_and_run(out_dir, preset, seed=0, extra=()):
    """Generate a preset city into ``out_dir`` and run the whole pipeline."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    args = ["--out-dir", out_dir, "--seed", seed]
    if extra:
        cfg = out_dir / "run.cfg"
        cfg.write_text("".join(f"{line}\n" for line in extra))
        args = ["--config", cfg] + args
    code, _, err = run_cli(*args, "synth", "--preset", preset)
    assert code == 0, err
    code, _, err = run_cli(*args, "pipeline")
    assert code == 0, err
    return out_dir


@pytest.fixture(scope="session")
def merged_runs(tmp_path_factory):
    """degenerate_merged pipeline outputs for seeds 0..4."""
    base = tmp_path_factory.mktemp("merged")
    return [synth_and_run(base / f"s{s}", "degenerate_merged", s) for s in range(5)]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
