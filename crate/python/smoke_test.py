"""Smoke test for the twinfield_py extension module.

Build first:
    cargo build --release -p twinfield-py --features extension-module
then run:
    python3 python/smoke_test.py
"""

import importlib.util
import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libtwinfield_py.so"
        if lib.exists():
            break
    else:
        sys.exit("libtwinfield_py.so not found; build the twinfield-py crate first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "twinfield_py.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("twinfield_py", target)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    tf = load_module()

    assert abs(tf.bits_per_second(1.24e-3, 1e8, 400 / 1024) - 4.84375e4) < 1e-6
    lo, hi = tf.chernoff_expected_bounds(1e4, 1e-10)
    assert lo < 1e4 < hi

    assert tf.mu_capacity(9, 8) == 36 == tf.max_pairs_bruteforce(9, 8)
    cap = tf.inventory_capacity()
    assert cap["total_capacity"] == 58 and cap["ports"]["used"] == 32
    try:
        tf.inventory_capacity(strict_ports=True)
    except tf.ConstraintError:
        pass
    else:
        raise AssertionError("strict port budget should reject the full switch")

    plan = tf.schedule_pairs([0, 1, 2], [(0, 1), (0, 2), (1, 2)])
    assert len(plan["assignments"]) == 3

    params = tf.ProtocolParams.operating_point_20db()
    channel = tf.ChannelSpec.symmetric(20.0)
    report = tf.simulate_keyrate(params, channel, 1e10)
    assert report["feasible"] and report["rate_per_pulse"] > 0

    tally = tf.expected_tally(params, channel, 1e10)
    again = tf.keyrate_from_tally(tally, params)
    assert again["decoy"]["s1_lower"] == report["decoy"]["s1_lower"]

    try:
        tf.ProtocolParams(0.0, 0.5, 0.1, 0.3, 0.5, 0.2)
    except ValueError:
        pass
    else:
        raise AssertionError("inverted intensities should be rejected")

    net = tf.network_rate(100.0)
    assert net["total_rate_per_pulse"] > 0

    with open(ROOT / "data" / "params" / "operating_point_30db.json") as f:
        doc = json.load(f)
    p30 = tf.ProtocolParams.from_dict(doc["data"])
    assert p30.to_dict()["p_x"] == 0.36

    print("python smoke test passed")


if __name__ == "__main__":
    main()
