"""Quick end-to-end check of the Python bindings.

Build and install the extension first:

    pip install --no-build-isolation ./crates/python
"""

import json

import pychainsched as cs

THREE_STREAMS = {
    "switches": 4,
    "streams": [
        {"id": "s1", "src_switch": 1, "dst_switch": 4, "period": 2},
        {"id": "s2", "src_switch": 1, "dst_switch": 2, "period": 2},
        {"id": "s3", "src_switch": 2, "dst_switch": 4, "period": 2},
    ],
}


def main():
    inst = cs.Instance.from_json(json.dumps(THREE_STREAMS))
    assert inst.switches == 4 and len(inst) == 3
    assert inst.load_profile("ltr", 1) == [2, 2, 2]
    assert cs.check(inst) == {"verdict": "feasible"}
    assert cs.brute_force(inst) == "found"

    sched = cs.schedule(inst)
    report = cs.validate(sched, inst)
    assert report["verdict"] == "pass", report
    assert len(sched.entries("ltr")) == 3
    assert all(g["entries"][0]["gates"] == "11111111" for g in sched.gcl()["ports"])
    assert sched.gantt(inst).startswith("direction ltr")

    # s2 moved onto s1's first slot
    doc = json.loads(sched.to_json())
    entries = doc["schedules"][0]["entries"]
    t1 = next(e for e in entries if e["stream"] == "s1")["injection_time"]
    next(e for e in entries if e["stream"] == "s2")["injection_time"] = t1
    broken = cs.Schedule.from_json(json.dumps(doc), 4)
    kinds = {v["kind"] for v in cs.validate(broken, inst)["violations"]}
    assert "port-conflict" in kinds, kinds

    bad = cs.Instance.from_streams(4, [("s1", 1, 4, 2), ("s2", 1, 3, 2), ("s3", 2, 4, 1)])
    verdict = cs.check(bad)
    assert (verdict["link"], verdict["load"], verdict["capacity"]) == (2, 4, 2), verdict
    assert not cs.decide(bad)
    try:
        cs.schedule(bad)
    except cs.ChainschedError:
        pass
    else:
        raise AssertionError("infeasible instance was scheduled")

    big = cs.generate(32, 2000, periods="10,11,12", seed=42, feasible_only=True)
    assert cs.decide(big)
    assert cs.validate(cs.schedule(big), big)["verdict"] == "pass"

    try:
        cs.Instance.from_streams(3, [("x", 1, 1, 2)])
    except cs.ChainschedError as e:
        assert "x" in str(e)
    else:
        raise AssertionError("same endpoints accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
