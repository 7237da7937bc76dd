#!/usr/bin/env python
"""Print the per-distance interference profile from the bundled table."""

import argparse

from ecasurvey.calibration import SensorMountConfig, bias_at, interference_profile, load_profile_table


def show(rows, theta, label):
    prof = interference_profile(rows, theta)
    print(f"theta={theta:g} deg, {label} ({len(rows)} rows)")
    print(f"{'d_cm':>6} {'n':>3} {'offset':>8} {'slope':>7} {'icpt':>7} {'r':>7}")
    for e in prof.entries:
        fmt = lambda v: f"{v:7.4f}" if v is not None else "    n/a"
        print(f"{e.distance_cm:6g} {e.n_rows:3d} {e.mean_offset:8.4f} "
              f"{fmt(e.slope)} {fmt(e.intercept)} {fmt(e.pearson_r)}")
    return prof


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--table", help="CSV table (default: bundled fixture)")
    p.add_argument("--d-h-mm", type=float, default=235.0)
    args = p.parse_args()
    text = open(args.table).read() if args.table else None
    rows = load_profile_table(text)
    for theta in sorted({r.theta_deg for r in rows}):
        sel = [r for r in rows if r.theta_deg == theta]
        prof = show(sel, theta, "all configurations")
        print(f"bias at d_h={args.d_h_mm:g} mm: "
              f"{bias_at(prof, SensorMountConfig(args.d_h_mm, theta_deg=theta)):.4f} mS/m\n")
    sub = [r for r in rows if r.theta_deg == 0 and r.config in ("citrus_grove", "irrigated_turf")]
    show(sub, 0, "citrus and turf only")


if __name__ == "__main__":
    main()
