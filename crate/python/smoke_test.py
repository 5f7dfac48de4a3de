#!/usr/bin/env python3
"""Smoke test for the ncgames_py extension module.

Builds the cdylib if needed, imports it, and exercises the bound
computations, oracles, and certificate round trip on the built-in games.

Run from anywhere:  python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = ROOT / "target" / "release" / "libncgames_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "ncgames-py", "--release"],
            cwd=ROOT,
            check=True,
        )
    stage = Path(tempfile.mkdtemp(prefix="ncgames_py_"))
    shutil.copy2(lib, stage / "ncgames_py.so")
    sys.path.insert(0, str(stage))
    import ncgames_py

    return ncgames_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    nc = load_module()

    # Game construction and round trip.
    chsh = nc.Game.builtin("chsh-correlator")
    assert chsh.name == "chsh-correlator"
    assert chsh.num_parties == 2
    assert chsh.settings == [2, 2]
    again = nc.Game.parse(chsh.serialize())
    assert again.serialize() == chsh.serialize()

    # CHSH level 1 is tight at 2*sqrt(2), in both formulations.
    for form in ("moment", "sos"):
        result = nc.solve_relaxation(chsh, "full:1", form=form)
        assert result["optimal"], result
        approx(result["bound"], 2 * math.sqrt(2), 1e-6)

    # Certificate extraction and independent verification.
    with tempfile.TemporaryDirectory() as tmp:
        cert = str(Path(tmp) / "chsh.cert")
        result = nc.solve_relaxation(chsh, "full:1", form="sos", cert_path=cert)
        assert result["certificate_residual"] <= 1e-6
        assert nc.verify_certificate(cert, chsh) <= 1e-6

    # Oracles.
    approx(nc.classical_value(nc.Game.builtin("chsh-game")), 0.75, 1e-12)
    seesaw = nc.seesaw_lower_bound(chsh, 2, restarts=10, seed=0)
    assert seesaw >= 2 * math.sqrt(2) - 1e-6, seesaw

    # Shaped level and the Yao custom basis.
    i3322 = nc.Game.builtin("i3322")
    approx(nc.solve_relaxation(i3322, "1+AB")["bound"], 0.25147090, 1e-5)
    yao = nc.Game.builtin("yao")
    result = nc.solve_relaxation(yao, "custom-text:" + nc.YAO25_BASIS)
    approx(result["bound"], 3 * math.sqrt(3), 1e-5)

    print("smoke test passed")


if __name__ == "__main__":
    main()
