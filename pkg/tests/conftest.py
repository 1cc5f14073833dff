import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tstlab.cubes import build_cubes, build_nets


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def segment_tree():
    """Shared tree over a flat 1500-point segment, depth 6."""
    from tstlab.datasets import segment
    pts = segment(1500, length=1.0, seed=11)
    return build_cubes(build_nets(pts, rho=0.5, k_max=6))


@pytest.fixture(scope="session")
def graph_tree():
    """Shared tree over a lambda=0.1 Lipschitz graph, depth 6."""
    from tstlab.datasets import lipschitz_graph
    pts = lipschitz_graph(1500, lam=0.1, seed=5)
    return build_cubes(build_nets(pts, rho=0.5, k_max=6))


@pytest.fixture(scope="session")
def tilt_system():
    """Five-step tilt-chain CCBP at eps=0.01, iterated and certified once."""
    from helpers import tilt_ccbp
    from tstlab.reifenberg import certify, iterate
    epsilon = 0.01
    ccbp = tilt_ccbp(epsilon)
    surface = iterate(ccbp, 1e-3, k_max=5, extent=2.2)
    report = certify(surface, ccbp, epsilon)
    return {"epsilon": epsilon, "ccbp": ccbp, "surface": surface,
            "report": report}


@pytest.fixture(scope="session")
def trivial_system():
    """Coherent-zero CCBP (all centers on the base plane), iterated once."""
    from helpers import trivial_ccbp
    from tstlab.reifenberg import certify, iterate
    ccbp = trivial_ccbp()
    surface = iterate(ccbp, 0.05, extent=1.2)
    report = certify(surface, ccbp, 0.01)
    return {"ccbp": ccbp, "surface": surface, "report": report}
