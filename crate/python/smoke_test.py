"""Smoke test for the Python bindings.

Build and install first:  pip install --no-build-isolation -e crates/py
Then run:                 python3 python/smoke_test.py
"""

import json
import sys
import tempfile
from pathlib import Path

import orchestra_sim as osim


def main() -> int:
    assert osim.channel_for(4, 1) == 15
    assert osim.channel_for(0, 0, [11, 12, 13]) == 11
    assert osim.slot_of(9, 17) == 9 and osim.slot_of(10, 7) == 3

    sc = osim.Scenario.reference()
    assert sc.node_ids == [3, 9, 10, 2, 1, 4], sc.node_ids
    again = osim.Scenario.from_json(sc.to_json())
    assert again.duration_ms == sc.duration_ms == 480_000

    # the synthetic detector example: intervals large by 150 s, last DIO at 160 s
    trickle = [(0, n, 4096) for n in (1, 2)] + [(150_000, n, 65_536) for n in (1, 2)]
    dio = [(100_000, 1, 1), (160_000, 2, 1)]
    assert osim.detect_steady([1, 2], trickle, dio) == 220_000
    assert osim.detect_steady([1, 2], [], []) is None

    with tempfile.TemporaryDirectory() as tmp:
        cmp = osim.compare(sc, out=tmp)
        reports = {r["scheduler"]: r for r in cmp["reports"]}
        for name, rep in reports.items():
            steady = osim.steady_from_dir(Path(tmp) / name)
            assert steady == rep["steady_state_ms"], (name, steady)
        on_disk = json.loads((Path(tmp) / "comparison.json").read_text())
        assert on_disk["ratio"] == cmp["ratio"]
        print(f"measured window   {cmp['measured_window']}")
        for r in cmp["results"]:
            print(f"{r['scheduler']:<10} radio on {r['measured_percent']:.2f} %  recovery {r['recovery_ms']}")
        print(f"ratio             {cmp['ratio']:.3f}")

    single = osim.run(sc, "orchestra")
    assert single["all_joined_ms"] == reports["orchestra"]["all_joined_ms"]
    assert single["frames"]["negotiation"] == 0

    for bad in (lambda: osim.run(sc, "tdma"),
                lambda: osim.Scenario.from_json("{}"),
                lambda: osim.channel_for(0, 16)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")
    try:
        osim.Scenario.load("/nonexistent/scenario.json")
    except OSError:
        pass
    else:
        raise AssertionError("expected OSError")

    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
