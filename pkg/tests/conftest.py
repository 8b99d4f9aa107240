from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# Acceptance runs need the real table; unit tests use schema fixtures.
BOSTON_CSV = Path(__file__).parent.parent / "data" / "boston.csv"


@pytest.fixture
def energy_fixture_csv(tmp_path):
    """Schema-identical stand-in for the energy-efficiency table (8 features, Y1/Y2)."""
    rng = np.random.default_rng(123)
    n = 40
    cols = {f"X{i + 1}": rng.uniform(0, 10, n) for i in range(8)}
    y1 = 2.0 * cols["X1"] - 0.5 * cols["X5"] + rng.standard_normal(n)
    y2 = cols["X2"] + rng.standard_normal(n)
    path = tmp_path / "energy_fixture.csv"
    header = list(cols) + ["Y1", "Y2"]
    rows = np.column_stack(list(cols.values()) + [y1, y2])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) for v in row) + "\n")
    return path
