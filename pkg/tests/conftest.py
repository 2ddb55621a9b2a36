import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dnbv.dome import build_dome  # noqa: E402
from dnbv.joints import synth_joint_table  # noqa: E402
from dnbv.scenario import load_scenario  # noqa: E402
from dnbv.synthetic import Blob, OccluderScript, desk_script, generate_synthetic  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def edge_dome():
    """44-viewpoint dome (edge-up icosahedron, level 2)."""
    return build_dome(2, 0.7, 0.75, pole="edge")


@pytest.fixture(scope="session")
def vertex_dome():
    return build_dome(2, 0.7, 0.75, pole="vertex")


@pytest.fixture(scope="session")
def edge_joints(edge_dome):
    return synth_joint_table(edge_dome)


@pytest.fixture(scope="session")
def desk_scenario(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk")
    return load_scenario(generate_synthetic(desk_script(), out, pole="edge"))


@pytest.fixture(scope="session")
def empty_scenario(tmp_path_factory):
    out = tmp_path_factory.mktemp("empty")
    script = OccluderScript([[], [], []], name="unoccluded")
    return load_scenario(generate_synthetic(script, out, pole="edge"))


def random_scripts(n, seed=1):
    rng = np.random.default_rng(seed)
    scripts = [desk_script()]
    while len(scripts) < n:
        frames = []
        for _ in range(3):
            k = int(rng.integers(1, 3))
            frames.append([
                Blob(float(rng.uniform(0, 0.6)), float(rng.uniform(-math.pi, math.pi)),
                     float(rng.uniform(0.15, 0.35)))
                for _ in range(k)
            ])
        scripts.append(OccluderScript(frames, name=f"random{len(scripts)}"))
    return scripts


@pytest.fixture(scope="session")
def eight_scenarios(tmp_path_factory):
    base = tmp_path_factory.mktemp("eight")
    return [
        load_scenario(generate_synthetic(s, base / f"s{k}", pole="edge", seed=k))
        for k, s in enumerate(random_scripts(8))
    ]
