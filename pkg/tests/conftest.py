"""Shared fixtures and the per-criterion acceptance summary."""

import numpy as np
import pytest

from tickms.ingest import SESSION_CLOSE, SESSION_OPEN, TRADE_HEADER
from tickms.presets import MSFT_HIGH
from tickms.simulate import SimConfig, simulate_path

TICK = 0.01
_results: dict[int, list[str]] = {}


def trade_lines(n_per_day=4000, days=2, seed=0, base=24.0):
    """Trade-file text built from a simulated MS path spread over whole sessions."""
    lines = [",".join(TRADE_HEADER)]
    for d in range(days):
        path = simulate_path(SimConfig("ms", MSFT_HIGH, length=n_per_day - 1, seed=seed + d))
        s = path.spreads.astype(np.int64)
        # mid in half ticks has the parity of the spread
        mid2 = round(2 * base / TICK) + s[0] % 2 + np.r_[0, np.cumsum(path.returns, dtype=np.int64)]
        bid = (mid2 - s) / 2 * TICK
        ask = (mid2 + s) / 2 * TICK
        ts = np.linspace(SESSION_OPEN + 1, SESSION_CLOSE - 1, n_per_day).astype(np.int64)
        date = f"2026-01-{d + 5:02d}"
        for i in range(n_per_day):
            side = "buy" if i % 2 else "sell"
            lines.append(
                f"{date},{ts[i]},{(bid[i] + ask[i]) / 2:.3f},100,{side},{bid[i]:.2f},{ask[i]:.2f}"
            )
    return "\n".join(lines) + "\n"


@pytest.fixture
def trade_file(tmp_path):
    p = tmp_path / "trades.csv"
    p.write_text(trade_lines())
    return p


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results.setdefault(mark.args[0], []).append(rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        outs = _results[n]
        status = "PASS" if all(o == "passed" for o in outs) else "FAIL"
        if all(o == "skipped" for o in outs):
            status = "SKIP"
        terminalreporter.write_line(f"criterion {n:2d}: {status}")
