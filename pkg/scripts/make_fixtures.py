#!/usr/bin/env python
"""Regenerate the small CSV fixtures under tests/data.

The 461-row handheld log is a plain synthetic walk over the site (no
simulator involved) so ingest tests do not depend on fieldsim.
"""

from pathlib import Path

import numpy as np

from ecasurvey.geocore import PlanarPoint, unproject
from ecasurvey.fieldsim import SITE_DATUM
from ecasurvey.ingest import Source, Survey, SurveyRecord, write_survey_csv

OUT = Path(__file__).resolve().parents[1] / "tests" / "data"


def handheld_log(n: int = 461, seed: int = 461) -> str:
    rng = np.random.default_rng(seed)
    t0 = 1615564800.0  # 2021-03-12T16:00:00Z
    s = np.linspace(0.0, 48.0 * 10, n)
    row = np.floor(s / 48.0)
    along = s - row * 48.0
    x = 1.0 + np.where(row % 2 == 0, along, 48.0 - along)
    y = 1.0 + row * 3.0
    eca = np.round(rng.lognormal(np.log(19.0), 0.12, n), 1)
    recs = [SurveyRecord(t0 + 1.1 * i, unproject(SITE_DATUM, PlanarPoint(x[i], y[i])),
                         float(eca[i]), Source.HANDHELD) for i in range(n)]
    return write_survey_csv(Survey(tuple(recs), {"site": "olive orchard", "mode": "handheld"}))


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "handheld_461.csv").write_text(handheld_log())
    print(f"wrote {OUT / 'handheld_461.csv'}")
