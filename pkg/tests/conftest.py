import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qvarspill.dgp import DgpSpec  # noqa: E402


def write_panel_csv(path, dates, columns: dict, comment=None):
    lines = [] if comment is None else [f"# {comment}"]
    lines.append(",".join(["date"] + list(columns)))
    for i, d in enumerate(dates):
        cells = []
        for col in columns.values():
            v = col[i]
            cells.append("" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v)))
        lines.append(",".join([d] + cells))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


@pytest.fixture
def dgp4():
    B = [[0.3, 0.1, 0.0, 0.0], [0.0, 0.3, 0.1, 0.0], [0.0, 0.0, 0.3, 0.1], [0.1, 0.0, 0.0, 0.3]]
    S = [[1.0, 0.3, 0.2, 0.1], [0.3, 1.0, 0.3, 0.2], [0.2, 0.3, 1.0, 0.3], [0.1, 0.2, 0.3, 1.0]]
    return DgpSpec(
        n=4, p=1, B=B, sigma=S, T=400, seed=3, dist="t", df=5,
        assets=("USDA", "USDB", "DAIX", "ALGO"),
        categories=("FiatBacked", "FiatBacked", "CryptoCollateralized", "Algorithmic"),
    )


@pytest.fixture
def dgp_json(tmp_path, dgp4):
    path = tmp_path / "dgp.json"
    path.write_text(json.dumps(dgp4.to_dict()))
    return path


# acceptance reporting -------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
