import numpy as np
import pytest

from slicesim.netmodel import ServiceClass, SliceSpec, BaseStationModel, default_base_station
from slicesim.traffic import ServiceId, TraceSet

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(n: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def bs():
    return default_base_station()


def random_cheap_eco_bs(rng: np.random.Generator, n_slices: int = 3) -> BaseStationModel:
    """Random base station whose EcoSlice is strictly cheaper, and no larger, than every slice."""
    services = tuple(
        ServiceClass(f"s{i}", qci=i + 1, delay_budget_ms=float(rng.uniform(50, 400)),
                     per_user_rate_mbps=float(rng.uniform(0.2, 5)))
        for i in range(n_slices)
    )
    slices = []
    for sc in services:
        slices.append(SliceSpec(sc.name, capacity_mbps=float(rng.uniform(50, 200)),
                                idle_power_w=float(rng.uniform(10, 40)),
                                load_power_w_per_mbps=float(rng.uniform(0.3, 1.0)),
                                base_delay_ms=float(rng.uniform(5, 40))))
    eco = SliceSpec(None, is_eco=True,
                    capacity_mbps=float(rng.uniform(5, min(s.capacity_mbps for s in slices))),
                    idle_power_w=float(rng.uniform(0, min(s.idle_power_w for s in slices))),
                    load_power_w_per_mbps=float(rng.uniform(0, min(s.load_power_w_per_mbps for s in slices))),
                    base_delay_ms=float(rng.uniform(20, 80)))
    return BaseStationModel("bsx", float(rng.uniform(0, 200)), services, tuple(slices), eco)


def make_traces(demand, tiles=None, services=("facebook", "netflix"), tick=900.0) -> TraceSet:
    demand = np.asarray(demand, dtype=float)
    tiles = tiles or tuple(f"t{i}" for i in range(demand.shape[0]))
    return TraceSet(tick, tuple(tiles), tuple(ServiceId(i, n) for i, n in enumerate(services)), demand)
