import json
from pathlib import Path

import numpy as np
import pytest

from ventpress.data_model import Breath, Dataset, LungSettings
from ventpress.lung_sim import SimConfig, generate_dataset

GOLDEN = Path(__file__).parent / "golden"

_acceptance_lines = []


def load_golden(name):
    with open(GOLDEN / name) as fh:
        return json.load(fh)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, ok, detail=""):
        _acceptance_lines.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(5, SimConfig(seed=3))


def make_breath(time_s, u_in, u_out, pressure=None, breath_id=1, r=20.0, c=50.0):
    return Breath(breath_id, LungSettings(r, c), np.asarray(time_s, float),
                  np.asarray(u_in, float), np.asarray(u_out), pressure)


@pytest.fixture
def table_one_bytes():
    return (b"id,breath_id,R,C,time_step,u_in,u_out,pressure\n"
            b"1,1,20,50,0.000000,0.083334,0,5.837492\n"
            b"2,1,20,50,0.033652,18.38304,0,5.907794\n"
            b"3,1,20,50,0.067514,22.50928,0,7.876254\n"
            b"4,1,20,50,0.011542,22.80882,0,11.74287\n"
            b"5,1,20,50,0.135756,25.35585,0,12.23499\n")


__all__ = ["make_breath", "load_golden", "Dataset"]
