"""Batch front end: config-driven runs with deterministic artifacts.

Subcommands: ``params`` (spectral constants and the resonance check),
``zeros`` (annulus search for simple zeros of the averaged pair),
``verify`` (per-zero ε-sweep with scaling fit), ``simulate`` (a single
event-driven or regularized trajectory).  All floating-point output is
printed with 17 significant digits so reruns with the same config and
seed are byte-identical.

Exit codes: 0 success, 2 resonance degeneracy, 3 no (validated) zero,
4 quadrature failure, 5 crossing-hypothesis violation, 6 integration
stall; other domain errors exit 1.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .averaging import (
    BifurcationSystem,
    ZeroCertificate,
    annulus_search,
)
from .errors import (
    CrossingViolationError,
    DomainError,
    IntegrationStallError,
    NoZeroError,
    PendavgError,
)
from .filippov import (
    Trajectory,
    export_events_csv,
    export_trajectory_csv,
    integrate,
    integrate_regularized,
    require_transversal_crossings,
)
from .model import (
    PhysicalParams,
    jordan_transform,
    monodromy_lower_block,
    reduce_params,
    spectral_data,
)
from .perturbation import (
    BUILTIN_NAMES,
    PerturbationSpec,
    builtin,
    perturbation_from_file,
)
from .verify import (
    SweepReport,
    epsilon_sweep,
    predicted_initial_state,
)

DEFAULT_EPS_LIST = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
MAX_ZEROS_SWEPT = 8


# -- deterministic JSON -------------------------------------------------


def _format_float(v: float) -> str:
    if v != v:
        return "null"
    if v == float("inf") or v == float("-inf"):
        return "null"
    return format(float(v), ".17g")


def dumps_deterministic(obj, indent: int = 0) -> str:
    """JSON text with 17-significant-digit floats and stable layout."""
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = [dumps_deterministic(v, indent + 1) for v in list(obj)]
        if not items:
            return "[]"
        inner = ",\n".join("  " * (indent + 1) + it for it in items)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, dict):
        items = [
            "  " * (indent + 1)
            + dumps_deterministic(str(k))
            + ": "
            + dumps_deterministic(v, indent + 1)
            for k, v in obj.items()
        ]
        if not items:
            return "{}"
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise DomainError(f"cannot serialize value of type {type(obj).__name__}")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


# -- configuration -------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Parsed experiment description (flat INI sections, no nesting)."""

    phys: PhysicalParams
    family: int
    p: int
    convention: str
    seed: int
    builtin_name: Optional[str]
    builtin_params: Dict[str, float]
    perturbation_file: Optional[Path]
    r1: float
    r2: float
    grid: int
    eps_list: List[float]
    sim_eps: float
    sim_s0: Optional[np.ndarray]
    sim_t_span: Optional[Tuple[float, float]]
    sim_delta: Optional[float]
    sim_max_events: int
    sim_require_crossing: bool
    output_dir: Path
    workers: int = 1
    extra: Dict[str, str] = field(default_factory=dict)


def _parse_floats(text: str) -> List[float]:
    parts = [p for chunk in text.split(",") for p in chunk.split()]
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise DomainError(f"cannot parse float list from {text!r}") from exc


def load_config(
    path,
    *,
    family: Optional[int] = None,
    convention: Optional[str] = None,
    out: Optional[str] = None,
    delta: Optional[float] = None,
) -> ExperimentConfig:
    """Read an experiment INI file; keyword arguments override sections."""
    path = Path(path)
    if not path.exists():
        raise DomainError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)

    def get(section: str, key: str, fallback: Optional[str] = None) -> Optional[str]:
        if parser.has_option(section, key):
            return parser.get(section, key)
        return fallback

    phys = PhysicalParams(
        m1=float(get("physical", "m1", "1.0")),
        m2=float(get("physical", "m2", "1.0")),
        l1=float(get("physical", "l1", "1.0")),
        l2=float(get("physical", "l2", "1.0")),
        g=float(get("physical", "g", "9.8")),
    )
    cfg_family = int(get("model", "family", "1"))
    cfg_p = int(get("model", "p", "1"))
    cfg_convention = get("model", "convention", "A").strip().upper()
    seed = int(get("model", "seed", "0"))

    builtin_name = get("perturbation", "builtin")
    pert_file = get("perturbation", "file")
    builtin_params: Dict[str, float] = {}
    if builtin_name is not None and parser.has_section("perturbation"):
        for key, value in parser.items("perturbation"):
            if key in ("builtin", "file", "family", "p"):
                continue
            builtin_params[key] = float(value)
    if builtin_name is None and pert_file is None:
        raise DomainError("[perturbation] must set either 'builtin' or 'file'")
    if builtin_name is not None and builtin_name not in BUILTIN_NAMES:
        raise DomainError(
            f"unknown builtin perturbation {builtin_name!r}; known: {', '.join(BUILTIN_NAMES)}"
        )

    eps_text = get("sweep", "eps")
    eps_list = _parse_floats(eps_text) if eps_text else list(DEFAULT_EPS_LIST)

    s0_text = get("integrate", "s0")
    t_span_text = get("integrate", "t_span")
    sim_s0 = np.array(_parse_floats(s0_text)) if s0_text else None
    sim_t_span: Optional[Tuple[float, float]] = None
    if t_span_text:
        parts = _parse_floats(t_span_text)
        if len(parts) != 2:
            raise DomainError("t_span must have two entries")
        sim_t_span = (parts[0], parts[1])
    delta_text = get("integrate", "delta")
    sim_delta = float(delta_text) if delta_text else None
    if delta is not None:
        sim_delta = delta

    workers = max(1, int(os.environ.get("PENDAVG_THREADS", "1")))

    final_family = family if family is not None else cfg_family
    final_convention = (convention or cfg_convention).strip().upper()
    if final_family not in (1, 2):
        raise DomainError(f"family must be 1 or 2, got {final_family}")
    if final_convention not in ("A", "B"):
        raise DomainError(f"convention must be A or B, got {final_convention!r}")

    out_dir = Path(out) if out is not None else Path(get("output", "dir", "out"))

    return ExperimentConfig(
        phys=phys,
        family=final_family,
        p=cfg_p,
        convention=final_convention,
        seed=seed,
        builtin_name=builtin_name,
        builtin_params=builtin_params,
        perturbation_file=(path.parent / pert_file) if pert_file else None,
        r1=float(get("search", "r1", "0.05")),
        r2=float(get("search", "r2", "2.0")),
        grid=int(get("search", "grid", "24")),
        eps_list=eps_list,
        sim_eps=float(get("integrate", "eps", "1e-3")),
        sim_s0=sim_s0,
        sim_t_span=sim_t_span,
        sim_delta=sim_delta,
        sim_max_events=int(get("integrate", "max_events", "100000")),
        sim_require_crossing=(get("integrate", "require_crossing", "false").lower() in ("1", "true", "yes")),
        output_dir=out_dir,
        workers=workers,
    )


def build_perturbation(config: ExperimentConfig, spectral, family: Optional[int] = None) -> PerturbationSpec:
    fam = family if family is not None else config.family
    if config.perturbation_file is not None:
        return perturbation_from_file(config.perturbation_file, spectral)
    return builtin(config.builtin_name, config.builtin_params, spectral, family=fam, p=config.p)


# -- subcommands ----------------------------------------------------------


def _params_payload(config: ExperimentConfig) -> dict:
    reduced = reduce_params(config.phys)
    s = spectral_data(reduced)
    _, det = monodromy_lower_block(s, config.p, family=config.family)
    return {
        "a": reduced.a,
        "b": reduced.b,
        "alpha": reduced.alpha,
        "delta": s.delta,
        "omega1": s.omega1,
        "omega2": s.omega2,
        "period1": s.period1,
        "period2": s.period2,
        "family": config.family,
        "p": config.p,
        "monodromy_det": det,
    }


def cmd_params(config: ExperimentConfig) -> int:
    payload = _params_payload(config)
    text = dumps_deterministic(payload)
    print(text)
    _write_text(config.output_dir / "params.json", text)
    return 0


def _certificates_payload(certs: Sequence[ZeroCertificate]) -> list:
    return [
        {
            "point": list(c.point),
            "value_norm": c.value_norm,
            "det": c.det,
            "simple": c.simple,
        }
        for c in certs
    ]


def _run_zero_search(config: ExperimentConfig, convention: Optional[str] = None) -> Tuple[BifurcationSystem, List[ZeroCertificate]]:
    reduced = reduce_params(config.phys)
    s = spectral_data(reduced)
    monodromy_lower_block(s, config.p, family=config.family)
    spec = build_perturbation(config, s)
    system = BifurcationSystem(
        family=config.family,
        spec=spec,
        reduced=reduced,
        spectral=s,
        sgn_convention=convention or config.convention,
    )
    rng = np.random.default_rng(config.seed)
    certs = annulus_search(
        system,
        config.r1,
        config.r2,
        config.grid,
        rng=rng,
        workers=config.workers,
    )
    return system, certs


def cmd_zeros(config: ExperimentConfig) -> int:
    _, certs = _run_zero_search(config)
    payload = {
        "convention": config.convention,
        "family": config.family,
        "p": config.p,
        "zeros": _certificates_payload(certs),
    }
    text = dumps_deterministic(payload)
    print(text)
    _write_text(config.output_dir / "zeros.json", text)
    if not any(c.simple for c in certs):
        raise NoZeroError("no simple zero found in the configured annulus")
    return 0


def _sweep_for_cert(
    config: ExperimentConfig,
    system: BifurcationSystem,
    cert: ZeroCertificate,
) -> SweepReport:
    reduced = system.reduced
    s = system.spectral
    transform = jordan_transform(reduced, s)
    orbit = predicted_initial_state(
        cert, config.family, transform, s, reduced, p=config.p
    )
    return epsilon_sweep(
        orbit,
        system.spec,
        reduced,
        s,
        config.eps_list,
        workers=config.workers,
    )


def _verify_convention(config: ExperimentConfig, convention: str, tag: str) -> dict:
    """Zero search plus sweeps for one sgn convention; returns a summary."""
    system, certs = _run_zero_search(config, convention)
    simple_certs = [c for c in certs if c.simple][:MAX_ZEROS_SWEPT]
    entries = []
    any_validated = False
    any_crossing_violation = False
    any_stall = False
    for i, cert in enumerate(simple_certs):
        report = _sweep_for_cert(config, system, cert)
        exponent = report.fitted_exponent
        validated = bool(
            report.valid
            and exponent == exponent
            and exponent >= 1.8
            and report.family_consistent
        )
        any_validated = any_validated or validated
        for j, sample in enumerate(report.samples):
            if sample.trajectory is not None:
                base = config.output_dir / f"{tag}zero{i}_eps{j}"
                export_trajectory_csv(sample.trajectory, base.with_suffix(".trajectory.csv"))
                export_events_csv(sample.trajectory, base.with_suffix(".events.csv"))
            if sample.crossing is not None and not sample.crossing.ok:
                any_crossing_violation = True
            if sample.flag_code == 6:
                any_stall = True
        entry = {
            "zero": {
                "point": list(cert.point),
                "det": cert.det,
                "simple": cert.simple,
            },
            "sweep": report.to_json_dict(),
            "validated": validated,
        }
        entries.append(entry)
        _write_text(
            config.output_dir / f"{tag}sweep_zero{i}.json",
            dumps_deterministic(entry),
        )
    return {
        "convention": convention,
        "n_zeros": len(simple_certs),
        "zeros": _certificates_payload(simple_certs),
        "sweeps": entries,
        "any_validated": any_validated,
        "any_crossing_violation": any_crossing_violation,
        "any_stall": any_stall,
    }


def cmd_verify(config: ExperimentConfig, compare_conventions: bool = False) -> int:
    summary = _verify_convention(config, config.convention, tag="")
    arbiter_validated = False
    if compare_conventions:
        other = "B" if config.convention == "A" else "A"
        other_summary = _verify_convention(config, other, tag=f"conv{other}_")
        by_convention = {config.convention: summary, other: other_summary}
        verdicts = [c for c in ("A", "B") if by_convention.get(c, {}).get("any_validated")]
        arbiter = {
            0: "neither",
            1: verdicts[0] if verdicts else "neither",
            2: "both",
        }[len(verdicts)]
        arbiter_validated = arbiter != "neither"
        report = {
            "A": by_convention.get("A"),
            "B": by_convention.get("B"),
            "arbiter": arbiter,
        }
        text = dumps_deterministic(report)
        _write_text(config.output_dir / "convention_report.json", text)
        print(f"convention arbiter: {arbiter}")
    text = dumps_deterministic(summary)
    _write_text(config.output_dir / "verify.json", text)
    print(
        f"zeros: {summary['n_zeros']}, validated: {summary['any_validated']}"
    )
    if summary["any_validated"] or arbiter_validated:
        return 0
    if summary["any_crossing_violation"]:
        offenders = []
        for entry in summary["sweeps"]:
            offenders.append(entry["sweep"]["events_summary"])
        _write_text(
            config.output_dir / "crossing_violations.json",
            dumps_deterministic(offenders),
        )
        raise CrossingViolationError(
            "the crossing hypothesis failed during verification; "
            "see crossing_violations.json"
        )
    if summary["any_stall"]:
        raise IntegrationStallError("verification integrations stalled")
    raise NoZeroError("no zero validated the second-order residual scaling")


def cmd_simulate(config: ExperimentConfig) -> int:
    if config.sim_s0 is None or config.sim_t_span is None:
        raise DomainError("[integrate] must provide s0 and t_span for simulate")
    if config.sim_s0.shape != (4,):
        raise DomainError("s0 must have four components")
    reduced = reduce_params(config.phys)
    s = spectral_data(reduced)
    spec = build_perturbation(config, s)
    out = config.output_dir
    traj: Optional[Trajectory] = None
    try:
        if config.sim_delta is not None:
            traj = integrate_regularized(
                spec, reduced, s, config.sim_eps, config.sim_delta,
                config.sim_s0, config.sim_t_span,
            )
        else:
            traj = integrate(
                spec, reduced, s, config.sim_eps,
                config.sim_s0, config.sim_t_span,
                max_events=config.sim_max_events,
            )
    except IntegrationStallError as exc:
        if exc.trajectory is not None:
            export_trajectory_csv(exc.trajectory, out / "trajectory.csv")
            export_events_csv(exc.trajectory, out / "events.csv")
        raise
    export_trajectory_csv(traj, out / "trajectory.csv")
    export_events_csv(traj, out / "events.csv")
    summary = {
        "epsilon": traj.epsilon,
        "t_span": list(traj.t_span),
        "initial_state": list(traj.initial_state),
        "final_state": list(traj.final_state),
        "n_segments": len(traj.segments),
        "n_events": len(traj.events),
        "event_kinds": sorted({ev.kind for ev in traj.events}),
        "regularized": config.sim_delta is not None,
        "delta": config.sim_delta,
    }
    text = dumps_deterministic(summary)
    print(text)
    _write_text(out / "simulate_summary.json", text)
    if config.sim_require_crossing:
        try:
            require_transversal_crossings(traj)
        except CrossingViolationError as exc:
            offenders = [
                {
                    "time": ev.time,
                    "surface": ev.surface,
                    "kind": ev.kind,
                    "state": list(ev.state),
                }
                for ev in (exc.events or [])
            ]
            _write_text(out / "crossing_violations.json", dumps_deterministic(offenders))
            raise
    return 0


# -- entry point ----------------------------------------------------------


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pendavg",
        description="Averaged bifurcation functions and Filippov verification "
        "for the perturbed planar double pendulum.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("params", "zeros", "verify", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment INI file")
        p.add_argument("--family", type=int, choices=(1, 2), default=None)
        p.add_argument("--convention", choices=("A", "B"), default=None)
        p.add_argument("--delta", type=float, default=None,
                       help="regularization width (simulate)")
        p.add_argument("--out", default=None, help="output directory")
        if name == "verify":
            p.add_argument(
                "--compare-conventions",
                action="store_true",
                help="run both sgn conventions and emit convention_report.json",
            )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(
            args.config,
            family=args.family,
            convention=args.convention,
            out=args.out,
            delta=args.delta,
        )
        config.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "params":
            return cmd_params(config)
        if args.command == "zeros":
            return cmd_zeros(config)
        if args.command == "verify":
            return cmd_verify(config, compare_conventions=getattr(args, "compare_conventions", False))
        if args.command == "simulate":
            return cmd_simulate(config)
        raise DomainError(f"unknown command {args.command!r}")
    except PendavgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
