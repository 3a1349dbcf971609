#!/usr/bin/env python3
"""Smoke test for the pyjtc extension module.

Builds nothing itself: point it at an existing cargo build (debug or
release) of the `jtc-python` crate. The cdylib is copied next to a temp
directory under the importable name `pyjtc`:

    cargo build -p jtc-python --release
    python3 python/smoke_test.py
"""

import pathlib
import shutil
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_cdylib() -> pathlib.Path:
    candidates = []
    for profile in ("release", "debug"):
        for name in ("libpyjtc.so", "libpyjtc.dylib", "pyjtc.dll"):
            p = ROOT / "target" / profile / name
            if p.exists():
                candidates.append(p)
    if not candidates:
        sys.exit("no built pyjtc library found; run `cargo build -p jtc-python` first")
    return max(candidates, key=lambda p: p.stat().st_mtime)


def import_module(lib: pathlib.Path):
    tmp = tempfile.mkdtemp(prefix="pyjtc_smoke_")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(lib, pathlib.Path(tmp) / f"pyjtc{suffix}")
    sys.path.insert(0, tmp)
    import pyjtc  # noqa: E402

    return pyjtc


def approx(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def main():
    pyjtc = import_module(locate_cdylib())
    s = pyjtc.Scenario()
    print(f"loaded {s!r}")
    assert s.length_m == 789.0
    assert s.carrier_hz == 2300.0
    assert s.wheel_count == 32
    assert len(s.capacitor_positions_m) == 9

    # Impedance at one position, cross-checked against the nodal oracle.
    re, im = s.zf(400.0)
    nre, nim = s.zf_nodal(400.0, seg_len_m=0.5)
    assert re > 0 and im > 0, "complex impedance with positive parts"
    assert approx(re, nre, 1e-4) and approx(im, nim, 1e-4), (re, im, nre, nim)
    print(f"zf(400 m) = {re:.6f} + {im:.6f}j ohm (nodal agrees)")

    # Sparse profile: positive everywhere.
    rows = s.profile(step_m=20.0)
    assert len(rows) == 40
    assert all(r > 0 and i > 0 for (_, r, i) in rows)
    print(f"profile: {len(rows)} samples, all in the first quadrant")

    # Steady value and importance normalization.
    sre, sim = s.steady(step_m=4.0)
    assert approx(sre, re, 0.05)
    imp = s.importance(abnormal_ohm=1.0, profile_step_m=8.0)
    assert len(imp) == 32
    assert max(p for p, _ in imp) == 1.0
    assert max(p for _, p in imp) == 1.0
    assert imp[0][0] == 1.0 or imp[1][0] == 1.0
    print("importance: 32 wheel sets, max-normalized to 1 at the head")

    # Config round trip through TOML.
    s2 = pyjtc.Scenario.from_toml(s.to_toml())
    re2, im2 = s2.zf(400.0)
    assert (re2, im2) == (re, im)
    print("toml round trip preserves results")

    # Error mapping.
    try:
        s.zf(-5.0)
    except ValueError as e:
        print(f"out-of-section raises ValueError: {e}")
    else:
        sys.exit("expected ValueError for out-of-section position")

    # Oracle agreement over a handful of positions.
    worst = s.validate(points=5, seg_len_m=0.5)
    assert worst < 1e-4, worst
    print(f"validate: max relative error vs nodal oracle {worst:.3e}")
    print("smoke test PASSED")


if __name__ == "__main__":
    main()
