"""Regenerate the demo inputs in this directory (deterministic)."""

import json
from pathlib import Path

import numpy as np

from varbw import io as vio
from varbw.profile import make_profile, propagate_coefficients
from varbw.spectral import SpectralCutoff, breakpoint_grid, synthesize_grid
from varbw.synthetic import random_density

HERE = Path(__file__).parent
WINDOW, DX, LAM = 20.0, 0.025, 4.0


def main() -> None:
    cut = SpectralCutoff(LAM)
    for name, bp, vals, seed in (("n1", [0.0], [1.0, 4.0], 7), ("n2", [-1.5, 2.0], [2.0, 0.5, 1.0], 11)):
        prof = make_profile(bp, vals)
        (HERE / f"profile_{name}.json").write_text(
            json.dumps(prof.to_dict(), indent=2) + "\n")
        d = random_density(np.random.default_rng(seed), cut, plus_only=True)
        vio.write_density(HERE / f"density_{name}.csv", d)
        f = synthesize_grid(prof, propagate_coefficients(prof), cut, d, breakpoint_grid(prof, WINDOW, DX), real=True)
        vio.write_table(HERE / f"magnitude_{name}.csv", ("x", "m"), [f.x, np.abs(f.values)])


if __name__ == "__main__":
    main()
