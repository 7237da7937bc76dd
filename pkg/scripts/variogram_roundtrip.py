#!/usr/bin/env python
"""How well does one 64 x 64 realization pin down its own variogram?

Fits the exponential model to 500 sampled cells, to all 4096 cells, and
to the seed-averaged empirical variogram, for a range of seeds.
"""

import argparse

import numpy as np

from ecasurvey.fieldsim import generate_field
from ecasurvey.geocore import GridSpec, PlanarPoint
from ecasurvey.geostat import EmpiricalVariogram, VariogramModel, empirical_variogram, fit_exponential


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--max-lag", type=float, default=32.0)
    args = p.parse_args()

    true = VariogramModel(0.5, 4.5, 8.0)
    grid = GridSpec(PlanarPoint(0, 0), 1.0, 64, 64)
    xy = grid.centers()
    hits = {"sample": 0, "full": 0}
    acc = []
    for seed in range(args.seeds):
        f = generate_field(grid, true, 0.0, seed)
        z = f.values.ravel()
        pick = np.random.default_rng(1000 + seed).choice(len(xy), args.points, replace=False)
        line = [f"seed {seed:2d}"]
        for name, (pts, vals) in {"sample": (xy[pick], z[pick]), "full": (xy, z)}.items():
            ev = empirical_variogram(pts, vals, 1.0, args.max_lag)
            m = fit_exponential(ev)
            er = m.effective_range_m / true.effective_range_m - 1
            es = m.sill / true.sill - 1
            ok = abs(er) <= 0.25 and abs(es) <= 0.15
            hits[name] += ok
            line.append(f"{name}: range {er:+6.0%} sill {es:+6.0%} {'ok' if ok else '--'}")
            if name == "full":
                acc.append(ev)
        print("  ".join(line))
    print(f"within tolerance: sample {hits['sample']}/{args.seeds}, full {hits['full']}/{args.seeds}")

    lags = acc[0].lags
    mean_ev = EmpiricalVariogram(lags, np.mean([e.gamma for e in acc], axis=0),
                                 acc[0].n_pairs, 1.0, args.max_lag)
    m = fit_exponential(mean_ev)
    print(f"seed-averaged fit: nugget {m.nugget:.3f} partial sill {m.partial_sill:.3f} "
          f"range {m.range_m:.2f} m (true 0.5 / 4.5 / 8.0)")


if __name__ == "__main__":
    main()
