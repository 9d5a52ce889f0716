"""Scenario-driven command-line front end.

Subcommands load a scenario file (or the packaged default), run the
requested analysis, and write plot-ready CSV/JSON artifacts into the
output directory. Outputs are byte-stable for fixed (scenario, seed).

Exit codes: 0 success, 2 validation, 3 numeric/consistency failure,
4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import montecarlo
from .analysis import threshold_voltage
from .errors import (
    ConsistencyError,
    FitInfeasibleError,
    OperatingPointError,
    SearchError,
    TailMassError,
    ValidationError,
)
from .optics import GaussianBeam, optimize_waist, quadrant_transmission
from .plasmonic import transmission_at
from .scenario import QUADRANTS, Scenario, build_chain, dump_scenario

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC_ERRORS = (
    ConsistencyError,
    FitInfeasibleError,
    OperatingPointError,
    SearchError,
    TailMassError,
)


def _load_scenario(path: str | None) -> Scenario:
    if path is None:
        ref = resources.files("quadsense").joinpath("data/default_scenario.yaml")
        cfg = yaml.safe_load(ref.read_text(encoding="utf-8"))
    else:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    return Scenario.from_dict(cfg)


def _fmt(value: float, db: bool = False) -> str:
    # dB to 3 decimals per output contract, everything else to a fixed
    # general format so reruns are byte-identical.
    if db:
        return f"{value:.3f}"
    return f"{value:.9g}"


def _write_csv(path: Path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {path}")


# -- subcommands ----------------------------------------------------------


def _cmd_squeezing_budget(scenario: Scenario, args, out: Path) -> int:
    chain = build_chain(scenario)
    header = ["stage", "squeezing_db", "gain", "gain_db"]
    rows = []
    print(f"{'stage':<14s} {'squeezing_db':>12s} {'gain':>8s} {'gain_db':>8s}")
    for stage in chain.stage_budget:
        rows.append(
            [
                stage.label,
                _fmt(stage.squeezing_db, db=True),
                _fmt(stage.gain),
                _fmt(stage.gain_db, db=True),
            ]
        )
        print(
            f"{stage.label:<14s} {stage.squeezing_db:>12.3f} "
            f"{stage.gain:>8.4f} {stage.gain_db:>8.3f}"
        )
    _write_csv(out / "squeezing_budget.csv", header, rows)
    return EXIT_OK


def _cmd_optimize_beam(scenario: Scenario, args, out: Path) -> int:
    d_range = (100.0, 1000.0)
    best_d, best_t = optimize_waist(scenario.layout, d_range)
    header = ["diameter_um", "total_transmission"]
    rows = []
    for d in np.linspace(*d_range, 181):
        qt = quadrant_transmission(GaussianBeam.from_waist(float(d)), scenario.layout)
        rows.append([_fmt(float(d)), _fmt(qt.total)])
    _write_csv(out / "beam_curve.csv", header, rows)
    qt = quadrant_transmission(GaussianBeam.from_waist(best_d), scenario.layout)
    print(f"best diameter {best_d:.1f} um, total transmission {best_t:.4f}")
    for q in QUADRANTS:
        print(f"  window {q}: {qt.window_fractions[q]:.4f}")
    return EXIT_OK


def _cmd_resonance_scan(scenario: Scenario, args, out: Path) -> int:
    lambdas = np.arange(770.0, 815.0 + 1e-9, 0.25)
    header = ["wavelength_nm"] + [f"transmission_q{q}" for q in QUADRANTS]
    rows = []
    for lam in lambdas:
        row = [_fmt(float(lam))]
        for q in QUADRANTS:
            row.append(_fmt(transmission_at(scenario.resonances[q - 1], float(lam))))
        rows.append(row)
    _write_csv(out / "resonance_scan.csv", header, rows)
    return EXIT_OK


def _sweep_rows(chain, pairs) -> list:
    rows = []
    for pair in pairs:
        curves = chain.snr_sweep(pair)
        for k, v in enumerate(curves["twin"].voltages):
            rows.append(
                [
                    _fmt(float(v)),
                    f"{pair[0]}-{pair[1]}",
                    _fmt(float(curves["twin"].snr[k])),
                    _fmt(float(curves["coherent"].snr[k])),
                    _fmt(float(curves["optimal"].snr[k])),
                ]
            )
    return rows


def _enhancement_payload(chain, sampled: dict | None = None) -> dict:
    payload = {}
    for q in QUADRANTS:
        rep = chain.enhancement_report(q)
        entry = {
            "pair": list(rep.pair),
            "v_tb_mv": round(rep.v_tb, 6),
            "v_cs_mv": round(rep.v_cs, 6),
            "v_opt_mv": round(rep.v_opt, 6),
            "enhancement_pct": round(rep.enhancement_pct, 6),
            "extrapolated": rep.extrapolated,
        }
        if sampled is not None:
            entry["v_tb_sampled_mv"] = round(sampled[q], 6)
        payload[f"pair_{q}_{q}"] = entry
    return payload


def _cmd_snr_sweep(scenario: Scenario, args, out: Path) -> int:
    chain = build_chain(scenario)
    pairs = [(q, q) for q in QUADRANTS]
    header = ["voltage_mv", "pair", "snr_tb", "snr_cs", "snr_opt"]
    _write_csv(out / "snr_sweep.csv", header, _sweep_rows(chain, pairs))
    _write_json(out / "enhancement.json", _enhancement_payload(chain))
    return EXIT_OK


def _cmd_fig3(scenario: Scenario, args, out: Path) -> int:
    """Noise power vs frequency bin around the drive tone, per quadrant.

    Four traces per quadrant, in dB relative to the pair's shot-noise
    level: the SNL reference, the squeezed modulation-off floor, and the
    floor plus the tone for two drive levels. The tone occupies the
    center bin only; the bin spacing stands in for the resolution
    bandwidth.
    """
    chain = build_chain(scenario)
    rbw_hz = 250.0 * scenario.rbw_scale
    bins = np.arange(-10, 11)
    drives = (120.0, 60.0)
    header = [
        "quadrant",
        "frequency_hz",
        "snl_db",
        "squeezed_db",
        f"drive_{drives[0]:.0f}mv_db",
        f"drive_{drives[1]:.0f}mv_db",
    ]
    rows = []
    for q in QUADRANTS:
        snl = chain.snl(q, q)
        s_off = chain.noise_off(q, q)
        floor_db = 10.0 * math.log10(s_off / snl)
        for k in bins:
            freq = scenario.modulation_frequency_hz + k * rbw_hz
            row = [str(q), _fmt(freq), _fmt(0.0, db=True), _fmt(floor_db, db=True)]
            for v in drives:
                level = s_off + (chain.signal(q, v) if k == 0 else 0.0)
                row.append(_fmt(10.0 * math.log10(level / snl), db=True))
            rows.append(row)
    _write_csv(out / "fig3.csv", header, rows)
    return EXIT_OK


def _cmd_fig4(scenario: Scenario, args, out: Path) -> int:
    chain = build_chain(scenario)
    pairs = [(i, j) for i in QUADRANTS for j in QUADRANTS]
    header = ["voltage_mv", "pair", "snr_tb", "snr_cs", "snr_opt"]
    _write_csv(out / "fig4_sweep.csv", header, _sweep_rows(chain, pairs))

    sampled = {}
    for q in QUADRANTS:
        curve = chain.sampled_snr_sweep((q, q), args.samples, args.seed)
        sampled[q], _ = threshold_voltage(curve, fit=True)
    _write_json(out / "fig4_enhancement.json", _enhancement_payload(chain, sampled))
    for q in QUADRANTS:
        rep = chain.enhancement_report(q)
        print(
            f"pair ({q},{q}): v_tb {rep.v_tb:.2f} mV "
            f"(sampled {sampled[q]:.2f}), v_cs {rep.v_cs:.2f} mV, "
            f"enhancement {rep.enhancement_pct:.2f}%"
        )
    return EXIT_OK


def _cmd_verify(scenario: Scenario, args, out: Path) -> int:
    checks = montecarlo.run_verification(n_samples=args.samples, seed=args.seed)
    payload = {
        "n_samples": args.samples,
        "seed": args.seed,
        "passed": all(c.passed for c in checks),
        "checks": [
            {
                "name": c.name,
                "passed": c.passed,
                "statistic": c.statistic,
                "threshold": c.threshold,
                "detail": c.detail,
            }
            for c in checks
        ],
    }
    _write_json(out / "verify.json", payload)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: {c.statistic:.4g} (threshold {c.threshold:g})")
    return EXIT_OK if payload["passed"] else EXIT_NUMERIC


_COMMANDS = {
    "squeezing-budget": _cmd_squeezing_budget,
    "optimize-beam": _cmd_optimize_beam,
    "resonance-scan": _cmd_resonance_scan,
    "snr-sweep": _cmd_snr_sweep,
    "verify": _cmd_verify,
    "fig3": _cmd_fig3,
    "fig4": _cmd_fig4,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadsense",
        description="Twin-beam quadrant sensing simulator",
    )
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument(
        "--scenario", default=None, help="scenario YAML (default: packaged scenario)"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="override the scenario master seed"
    )
    parser.add_argument(
        "--samples",
        type=int,
        default=1_000_000,
        help="sample count for stochastic subcommands",
    )
    parser.add_argument(
        "--out", default=".", help="output directory for artifact files"
    )
    parser.add_argument(
        "--dump-config",
        action="store_true",
        help="print the parsed scenario as YAML and exit",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = _load_scenario(args.scenario)
        if args.seed is None:
            args.seed = scenario.seed
        if args.samples <= 0:
            raise ValidationError("--samples must be positive")
        if args.dump_config:
            sys.stdout.write(dump_scenario(scenario))
            return EXIT_OK
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.subcommand](scenario, args, out)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _NUMERIC_ERRORS as exc:
        print(f"consistency error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
