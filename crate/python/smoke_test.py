"""Smoke test for the spindirac Python extension.

Build first:  cargo build --release -p spindirac-py --features extension-module
Then run:     python3 python/smoke_test.py
The script imports an installed ``spindirac`` module if there is one, and
otherwise loads the freshly built shared library from ``target/``.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import spindirac

        return spindirac
    except ImportError:
        pass
    names = ["libspindirac_py.so", "libspindirac_py.dylib", "spindirac_py.dll"]
    for profile in ("release", "debug"):
        for name in names:
            lib = ROOT / "target" / profile / name
            if lib.exists():
                loader = importlib.machinery.ExtensionFileLoader("spindirac", str(lib))
                spec = importlib.util.spec_from_loader("spindirac", loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("spindirac extension not found; build it with cargo first")


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'}: {name} {detail}".rstrip())
    return ok


def main():
    sd = load()
    ok = True

    square = sd.Torus(0.0, 1.0)
    levels = square.spectrum(3)
    first = next(v for v in levels if v[0] > 0)
    ok &= check("square torus first level", abs(first[0] - 2 * math.pi) < 1e-12, f"{first}")

    torus = sd.Torus(0.0, 7.0)
    flat, _ = torus.flat_threshold()
    ok &= check("flat value b=7", abs(flat - 2 * math.pi / math.sqrt(7)) < 1e-12, f"{flat:.12f}")

    omega = sd.ConformalFactor(torus)
    omega.add_cos(1, 0, 0.1)
    solved = sd.solve_torus(omega, 4.0)
    ok &= check("conformal torus solve", solved["lambda_bar_1"] > 0, f"{solved['lambda_bar_1']:.8f}")

    sphere = sd.solve_sphere([(2, 1, 0.2)], 5.5)
    ok &= check("sphere lower bound", sphere["lambda_bar_1"] >= 2 * math.sqrt(math.pi) - 1e-6)

    sweep = sd.bar_sweep(samples=4, band=2, amplitude=0.2, seed=3, jmax=7.5)
    ok &= check("bar sweep", sweep["violations"] == 0, f"min {sweep['min_lambda_bar']:.8f}")

    report = sd.verify_torus(torus, perturbations=2)
    ok &= check("torus verification", report["pass"], f"max error {report['max_final_error']:.2e}")

    v = sd.veronese_check(2)
    ok &= check("veronese m=2", v["pass"], f"E01 {v['e01']:.8f}")

    with tempfile.TemporaryDirectory() as out:
        code = sd.run_cli(["--out", out, "spectrum", "--sphere", "--count", "3"])
        ok &= check("cli exit code", code == 0 and (pathlib.Path(out) / "spectrum.json").exists())

    try:
        sd.Torus(0.0, -1.0)
        ok &= check("invalid lattice rejected", False)
    except ValueError:
        ok &= check("invalid lattice rejected", True)

    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
