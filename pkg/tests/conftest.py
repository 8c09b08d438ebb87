"""Shared fixtures: CLI runner plus session-scoped canned run directories."""

import subprocess
import sys

import pytest

CLI = (sys.executable, "-m", "sbfc.cli")


def run_cli(args, cwd):
    """Invoke the command-line front end in a subprocess."""
    return subprocess.run(
        [*CLI, *map(str, args)], cwd=str(cwd), capture_output=True, text=True)


@pytest.fixture(scope="session")
def cli_workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="session")
def two_fault_dir(cli_workdir):
    """One canned two-fault simulation, reused by read-only tests."""
    out = cli_workdir / "two_fault_run"
    res = run_cli(["simulate", "--preset", "two-fault", "--seed", "11",
                   "--out", out], cli_workdir)
    assert res.returncode == 0, res.stderr
    return out


@pytest.fixture(scope="session")
def healthy_dir(cli_workdir):
    """One canned healthy simulation, reused by read-only tests."""
    out = cli_workdir / "healthy_run"
    res = run_cli(["simulate", "--preset", "healthy", "--seed", "3",
                   "--out", out], cli_workdir)
    assert res.returncode == 0, res.stderr
    return out
