"""Acceptance criteria 1-11, one test each, with a PASS/FAIL line per criterion."""
import os
import subprocess
import sys
import time

import pytest

from sobstab.acceptance import CHECKS, run_criterion


def _report(log, capsys, line):
    log.append(line)
    with capsys.disabled():
        print(f"\n{line}")


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, acceptance_log, capsys):
    res = run_criterion(number, seed=0)
    _report(acceptance_log, capsys, res.line())
    assert res.passed, res.details


def _verify_all(path, workers):
    env = dict(os.environ, SSL_NUM_WORKERS=str(workers))
    return subprocess.Popen([sys.executable, "-m", "sobstab", "verify-all", "--seed", "0",
                             "-o", str(path)], env=env, stdout=subprocess.DEVNULL,
                            stderr=subprocess.PIPE, text=True)


def test_criterion_11_reproducible_reports(tmp_path, acceptance_log, capsys):
    start = time.perf_counter()
    # two identical configurations, one serial and one on two workers, run side by side
    runs = [(tmp_path / "a.json", 1), (tmp_path / "b.json", 2)]
    procs = [_verify_all(p, w) for p, w in runs]
    codes = [proc.wait() for proc in procs]
    errs = [proc.stderr.read() for proc in procs]
    a, b = (p.read_bytes() for p, _ in runs)
    ok = codes == [0, 0] and a == b and len(a) > 0
    secs = time.perf_counter() - start
    _report(acceptance_log, capsys,
            f"[{'PASS' if ok else 'FAIL'}] criterion 11: byte-identical verify-all reports"
            f" ({secs:.1f} s)")
    assert codes == [0, 0], errs
    assert a == b


if __name__ == "__main__":
    failed = 0
    for k in sorted(CHECKS):
        r = run_criterion(k)
        print(r.line(), flush=True)
        failed += not r.passed
    sys.exit(1 if failed else 0)
