"""Command-line surface: analyze, synthesize, certify, simulate, sweep.

Every command reads one schema-validated JSON configuration, writes its
results as documents under ``--out``, and reports through the exit code:

    0  success (certify: verdict Certified)
    2  invalid configuration, plant description, or document
    3  the plant has an infinite unstable part
    4  no stability certificate found (synthesize budget / certify verdict)
    5  controller synthesis failed
    6  plant and controller files do not fit together
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fileio
from .errors import (CertificateNotFound, DegenerateTrajectory, DimensionMismatch,
                     InfiniteUnstablePart, KernelResonance, NoAdmissibleParameter,
                     NotDetectable, NotHurwitz, NotReachable, NotStabilizable,
                     QuadratureNotConverged, RiccatiDivergence, TailUnstable,
                     UnstableModeDiscarded)
from .fileio import SchemaViolation
from .gains import decay_envelope, scan_certificate
from .modal import (ModalSystem, StateSpaceSystem, closed_loop_matrix,
                    partition_spectrum, select_truncation, truncate)
from .plants import (DEFAULT_N_MAX, SourceProfile, build_heat, build_heat_boundary,
                     build_wave, search_lift_parameter)
from .simulate import estimate_decay_rate, simulate_closed_loop, spectral_abscissa
from .synthesis import (DesignInfo, ObserverController, check_stabilizable,
                        loop_system, matches_observer_structure, reduced_R_system,
                        synthesize_controller)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFINITE_UNSTABLE = 3
EXIT_NO_CERTIFICATE = 4
EXIT_SYNTHESIS = 5
EXIT_DIMENSION = 6

# Halving the tail budget more often than this cannot enlarge N further.
MAX_EPSILON_HALVINGS = 32

CONFIG_DEFAULTS = {
    "epsilon": 0.1,
    "beta_depth": 12,
    "margin_fraction": 0.5,
    "horizon": 20.0,
    "dt": 0.01,
    "seed": 0,
    "x0": "ones",
}

_CONFIG_KEY_ORDER = ("plant", "N", "epsilon", "beta_depth", "margin_fraction",
                     "horizon", "dt", "seed", "x0", "sweep_N", "controller_file")


def load_config(path: str) -> dict:
    doc = fileio.read_json(path, "config")
    merged = dict(CONFIG_DEFAULTS)
    merged.update(doc)
    return {k: merged[k] for k in _CONFIG_KEY_ORDER if k in merged}


def profile_from_doc(doc: dict) -> SourceProfile:
    kind = doc["kind"]
    if kind == "constant":
        return SourceProfile.constant(doc["value"])
    if kind == "cosine":
        return SourceProfile.cosine(doc["k0"])
    if kind == "indicator":
        return SourceProfile.indicator(doc["xi1"], doc["xi2"])
    if kind == "coefficients":
        return SourceProfile.coefficients(doc["values"])
    if kind == "samples":
        return SourceProfile.samples(doc["values"])
    raise SchemaViolation(f"unknown profile kind {kind!r}")


def build_plant(doc: dict):
    """(ModalSystem, BoundaryLiftData or None) from a validated plant document."""
    f = profile_from_doc(doc["f"])
    n_max = int(doc.get("N_max", DEFAULT_N_MAX))
    kind = doc["type"]
    if kind == "heat":
        return build_heat(float(doc["b"]), f, n_max), None
    if kind == "wave":
        return build_wave(float(doc["b"]), float(doc["kappa"]), f, n_max), None
    a = search_lift_parameter(float(doc["b"]), f, doc.get("a_grid"))
    return build_heat_boundary(float(doc["b"]), f, a, n_max)


def controller_to_doc(controller: ObserverController, inputs: int, outputs: int) -> dict:
    info = controller.info or DesignInfo(0.0, 0.0, 0.0, 0.0)
    return {
        "E": fileio.matrix_to_doc(controller.E),
        "F": fileio.matrix_to_doc(controller.F),
        "G": fileio.matrix_to_doc(controller.G),
        "dims": {
            "n_unstable": int(controller.n_unstable),
            "n_retained": int(controller.n_retained),
            "inputs": int(inputs),
            "outputs": int(outputs),
        },
        "design": {
            "feedback_rate": float(info.feedback_rate),
            "observer_rate": float(info.observer_rate),
            "feedback_residual": float(info.feedback_residual),
            "observer_residual": float(info.observer_residual),
        },
    }


def controller_from_doc(doc: dict) -> ObserverController:
    dims = doc["dims"]
    n_u = int(dims["n_unstable"])
    n = n_u + int(dims["n_retained"])
    E = fileio.matrix_from_doc(doc["E"], n, n)
    F = fileio.matrix_from_doc(doc["F"], n, int(dims["outputs"]))
    G = fileio.matrix_from_doc(doc["G"], int(dims["inputs"]), n)
    d = doc["design"]
    # F = -[L; 0] and G = [K, 0] carry the unstable-prefix gains verbatim.
    return ObserverController(
        E=E, F=F, G=G, K_u=G[:, :n_u].copy(), L_u=-F[:n_u, :].copy(),
        n_unstable=n_u, n_retained=int(dims["n_retained"]),
        info=DesignInfo(float(d["feedback_rate"]), float(d["observer_rate"]),
                        float(d["feedback_residual"]), float(d["observer_residual"])))


def _block_count_for_dim(sys_: ModalSystem, n: int) -> int:
    """Number of leading blocks whose total state dimension is exactly n."""
    total = 0
    for i, blk in enumerate(sys_.blocks):
        if total == n:
            return i
        total += blk.dim
    if total == n:
        return len(sys_.blocks)
    raise DimensionMismatch(
        f"controller dimension {n} matches no truncation of the plant "
        f"(resolved block dimensions reach {total})")


def _check_io_dims(truncated: StateSpaceSystem, controller: ObserverController):
    if controller.F.shape[1] != truncated.p:
        raise DimensionMismatch(
            f"controller consumes {controller.F.shape[1]} plant outputs, plant emits {truncated.p}")
    if controller.G.shape[0] != truncated.m:
        raise DimensionMismatch(
            f"controller drives {controller.G.shape[0]} plant inputs, plant accepts {truncated.m}")


def _controller_loop(truncated: StateSpaceSystem, controller: ObserverController) -> StateSpaceSystem:
    n_u = int(controller.n_unstable)
    return reduced_R_system(truncated.A[:n_u, :n_u], truncated.B[:n_u, :],
                            truncated.C[:, :n_u], controller.K_u, controller.L_u)


def _recheck_certificate(sys_: ModalSystem, controller: ObserverController, cfg: dict):
    """Certificate for an imported controller at its own design truncation.

    The reduced controller-loop bound is only used after the observer
    structure has been verified entrywise against the rebuilt plant;
    otherwise the conservative full-loop bound applies.
    """
    N = _block_count_for_dim(sys_, controller.n)
    truncated, tail = truncate(sys_, N)
    _check_io_dims(truncated, controller)
    r_sys = None
    if matches_observer_structure(truncated, controller):
        try:
            r_sys = _controller_loop(truncated, controller)
        except NotHurwitz:
            r_sys = None
    if r_sys is None:
        r_sys = loop_system(truncated, controller.as_state_space())
    cert = scan_certificate(tail, r_sys, N, margin_fraction=float(cfg["margin_fraction"]),
                            depth=int(cfg["beta_depth"]))
    return cert, N


def _eig_doc(values) -> list:
    return [{"re": float(z.real), "im": float(z.imag)} for z in np.asarray(values).ravel()]


def analysis_document(plant_doc: dict, sys_: ModalSystem, part, report, lift) -> dict:
    unstable = set(part.unstable_indices)
    modes = []
    for blk, chk in zip(sys_.blocks, report.blocks):
        modes.append({
            "label": int(blk.label),
            "dim": int(blk.dim),
            "unstable": blk.label in unstable,
            "eigenvalues": _eig_doc(blk.eigenvalues()),
            "stabilizable": bool(chk.stabilizable),
            "detectable": bool(chk.detectable),
            "stab_margin": float(chk.stab_margin),
            "det_margin": float(chk.det_margin),
            "input_coefficient": float(chk.input_coefficient),
            "output_coefficient": float(chk.output_coefficient),
        })
    doc = {
        "plant": plant_doc,
        "spectrum": {
            "unstable_labels": [int(l) for l in part.unstable_indices],
            "retained_stable_labels": [int(l) for l in part.retained_stable_indices],
            "unstable_dim": int(part.unstable_dim),
            "margin_omega": float(part.margin_omega),
            "tail": {
                "decay_alpha": float(part.tail.decay_alpha),
                "input_norm": float(part.tail.input_norm),
                "output_graph_norm": float(part.tail.output_graph_norm),
                "amplitude_a": float(part.tail.amplitude_a),
            },
        },
        "modes": modes,
        "verdict": {
            "finite_unstable_part": True,
            "stabilizable": bool(report.stabilizable),
            "detectable": bool(report.detectable),
            "offending_stabilizable": [int(l) for l in report.offending_stabilizable],
            "offending_detectable": [int(l) for l in report.offending_detectable],
            "pass": bool(report.stabilizable and report.detectable),
        },
    }
    if lift is not None:
        doc["lift"] = {
            "a": float(lift.a),
            "kernel_index": int(lift.kernel_index),
            "h_at_0": float(lift.h_at_0),
            "u_output": float(lift.u_output),
            "series_remainder": float(lift.series_remainder),
            "constraints": {
                "all_pass": bool(lift.constraint_report.all_pass),
                "tolerance": float(lift.constraint_report.tolerance),
                "scale": float(lift.constraint_report.scale),
                "entries": [{
                    "name": e.name, "k": int(e.k),
                    "value": float(e.value), "passed": bool(e.passed),
                } for e in lift.constraint_report.entries],
            },
        }
    return doc


def write_certificate(out_dir: str, cert):
    doc = cert.to_document()
    fileio.validate_document(doc, "certificate")
    fileio.write_json_atomic(os.path.join(out_dir, "certificate.json"), doc)


def _write_controller(out_dir: str, controller: ObserverController, truncated: StateSpaceSystem):
    doc = controller_to_doc(controller, truncated.m, truncated.p)
    fileio.validate_document(doc, "controller")
    fileio.write_json_atomic(os.path.join(out_dir, "controller.json"), doc)


def cmd_analyze(cfg: dict, out_dir: str) -> int:
    sys_, lift = build_plant(cfg["plant"])
    part = partition_spectrum(sys_)
    report = check_stabilizable(sys_)
    doc = analysis_document(cfg["plant"], sys_, part, report, lift)
    fileio.write_json_atomic(os.path.join(out_dir, "analysis.json"), doc)
    v = doc["verdict"]
    print("analyze: finite_unstable_part=yes"
          f" stabilizable={'yes' if v['stabilizable'] else 'no'}"
          f" detectable={'yes' if v['detectable'] else 'no'}"
          f" unstable_dim={part.unstable_dim}")
    return EXIT_OK


def _require_synthesizable(report):
    if not report.stabilizable:
        raise NotStabilizable(
            f"unstable modes {list(report.offending_stabilizable)} are unreachable from the input")
    if not report.detectable:
        raise NotDetectable(
            f"unstable modes {list(report.offending_detectable)} are invisible at the output")


def _epsilon_halving(sys_: ModalSystem, epsilon: float):
    """Candidate truncation orders from repeatedly halving the tail budget."""
    count = len(sys_.blocks)
    for j in range(MAX_EPSILON_HALVINGS):
        try:
            N = select_truncation(sys_, epsilon / 2.0 ** j)
        except NotReachable:
            yield count
            return
        yield N
        if N >= count:
            return
    yield count


def cmd_synthesize(cfg: dict, out_dir: str) -> int:
    sys_, lift = build_plant(cfg["plant"])
    part = partition_spectrum(sys_)
    _require_synthesizable(check_stabilizable(sys_))

    if cfg.get("N") is not None:
        candidates = iter([int(cfg["N"])])
    else:
        candidates = _epsilon_halving(sys_, float(cfg["epsilon"]))

    best = None
    tried = set()
    for N in candidates:
        if N in tried:
            continue
        tried.add(N)
        truncated, tail = truncate(sys_, N)
        controller = synthesize_controller(part, truncated)
        r_sys = _controller_loop(truncated, controller)
        cert = scan_certificate(tail, r_sys, N, margin_fraction=float(cfg["margin_fraction"]),
                                depth=int(cfg["beta_depth"]))
        if cert.verdict == "Certified":
            _write_controller(out_dir, controller, truncated)
            write_certificate(out_dir, cert)
            print(f"synthesize: Certified at N={N} beta={cert.beta:.9g} "
                  f"product={cert.product:.9g}")
            return EXIT_OK
        if best is None or cert.product < best[1].product:
            best = (controller, cert, truncated)

    detail = ""
    if best is not None:
        _write_controller(out_dir, best[0], best[2])
        write_certificate(out_dir, best[1])
        detail = (f"; best product {best[1].product:.6g} at N={best[1].truncation_N}"
                  " (documents written for inspection)")
    raise CertificateNotFound(
        f"no truncation up to {len(sys_.blocks)} blocks certified; increase N_max{detail}")


def cmd_certify(cfg: dict, out_dir: str) -> int:
    path = cfg.get("controller_file")
    if not path:
        raise SchemaViolation("certify requires controller_file in the config")
    sys_, lift = build_plant(cfg["plant"])
    partition_spectrum(sys_)
    controller = controller_from_doc(fileio.read_json(path, "controller"))
    cert, N = _recheck_certificate(sys_, controller, cfg)
    write_certificate(out_dir, cert)
    print(f"certify: {cert.verdict} at N={N} beta={cert.beta:.9g} product={cert.product:.9g}")
    return EXIT_OK if cert.verdict == "Certified" else EXIT_NO_CERTIFICATE


def _resolve_x0(cfg: dict, n: int) -> np.ndarray:
    requested = cfg.get("x0", "ones")
    if isinstance(requested, str):
        if n == 0:
            return np.zeros(0)
        if requested == "ones":
            return np.ones(n) / math.sqrt(n)
        if requested == "random":
            v = np.random.default_rng(int(cfg["seed"])).standard_normal(n)
            norm = float(np.linalg.norm(v))
            return v / norm if norm > 0 else v
        raise SchemaViolation(f"unknown x0 mode {requested!r}")
    v = np.asarray(requested, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"x0 has length {v.size}, plant truncation has dimension {n}")
    return v


def cmd_simulate(cfg: dict, out_dir: str) -> int:
    path = cfg.get("controller_file")
    if not path:
        raise SchemaViolation("simulate requires controller_file in the config")
    sys_, lift = build_plant(cfg["plant"])
    partition_spectrum(sys_)
    controller = controller_from_doc(fileio.read_json(path, "controller"))
    # The certificate covers every truncation; the simulated one may be finer.
    cert, N_design = _recheck_certificate(sys_, controller, cfg)
    N = int(cfg["N"]) if cfg.get("N") is not None else N_design
    truncated, _tail = truncate(sys_, N)
    _check_io_dims(truncated, controller)

    x0 = _resolve_x0(cfg, truncated.n)
    traj = simulate_closed_loop(truncated, controller.as_state_space(), x0, None,
                                float(cfg["horizon"]), float(cfg["dt"]))
    abscissa, witness = spectral_abscissa(
        closed_loop_matrix(truncated, controller.as_state_space()))
    rate = estimate_decay_rate(traj)

    summary = {
        "N": int(N),
        "plant_dim": int(truncated.n),
        "controller_dim": int(controller.n),
        "horizon": float(cfg["horizon"]),
        "dt": float(cfg["dt"]),
        "decay_rate": float(rate),
        "spectral_abscissa": float(abscissa),
        "abscissa_witness": {"re": float(witness.real), "im": float(witness.imag)},
        "certificate_beta": float(cert.beta),
        "certificate_verdict": cert.verdict,
        "final_norm": float(traj.state_norms()[-1]),
    }
    fileio.write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj, truncated.n)
    fileio.write_json_atomic(os.path.join(out_dir, "summary.json"), summary)
    print(f"simulate: decay_rate={rate:.9g} abscissa={abscissa:.9g} "
          f"certificate_beta={cert.beta:.9g} ({cert.verdict})")
    return EXIT_OK


def cmd_sweep(cfg: dict, out_dir: str) -> int:
    requested = cfg.get("sweep_N")
    if not requested:
        raise SchemaViolation("sweep requires a non-empty sweep_N list")
    sys_, lift = build_plant(cfg["plant"])
    part = partition_spectrum(sys_)
    _require_synthesizable(check_stabilizable(sys_))

    ns = sorted({int(N) for N in requested})
    n_unstable_blocks = len(part.unstable_indices)
    for N in ns:
        if N < n_unstable_blocks or N > len(sys_.blocks):
            raise ValueError(
                f"sweep N={N} outside [{n_unstable_blocks}, {len(sys_.blocks)}]")

    # One beta for every row keeps the columns comparable: the most
    # permissive grid point admissible at the smallest N.
    trunc0, tail0 = truncate(sys_, ns[0])
    controller0 = synthesize_controller(part, trunc0)
    r_env = decay_envelope(_controller_loop(trunc0, controller0).A,
                           float(cfg["margin_fraction"]))
    beta = min(tail0.decay_alpha, r_env.alpha) / 2.0 ** int(cfg["beta_depth"])

    def row(N):
        truncated, tail = truncate(sys_, N)
        controller = synthesize_controller(part, truncated)
        cert = scan_certificate(tail, _controller_loop(truncated, controller), N,
                                margin_fraction=float(cfg["margin_fraction"]),
                                depth=int(cfg["beta_depth"]), fixed_beta=beta)
        return (N, cert.gain_tail.value, cert.gain_R.value, cert.product, cert.verdict)

    with ThreadPoolExecutor(max_workers=min(8, len(ns))) as pool:
        rows = list(pool.map(row, ns))
    fileio.write_sweep_csv(os.path.join(out_dir, "sweep.csv"), rows)
    certified = [r for r in rows if r[4] == "Certified"]
    first = f" first Certified at N={certified[0][0]}" if certified else ""
    print(f"sweep: {len(certified)}/{len(rows)} rows Certified{first}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modalstab",
        description="Finite-dimensional stabilization toolkit for modal-form plants.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration JSON")
    common.add_argument("--out", default=".", help="directory for output documents")
    common.add_argument("--print-config", action="store_true",
                        help="echo the fully resolved configuration")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common],
                   help="spectrum partition and mode-by-mode rank tests")
    sub.add_parser("synthesize", parents=[common],
                   help="design a certified observer controller")
    sub.add_parser("certify", parents=[common],
                   help="re-derive the certificate for an existing controller")
    sub.add_parser("simulate", parents=[common],
                   help="closed-loop trajectory and decay-rate summary")
    sub.add_parser("sweep", parents=[common],
                   help="certificates across a list of truncation orders")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.print_config:
            print(fileio.dumps_canonical(cfg))
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except InfiniteUnstablePart as exc:
        return _fail(EXIT_INFINITE_UNSTABLE, f"infinite unstable part: {exc}")
    except CertificateNotFound as exc:
        return _fail(EXIT_NO_CERTIFICATE, f"no certificate: {exc}")
    except (NotStabilizable, NotDetectable, RiccatiDivergence,
            NoAdmissibleParameter, NotHurwitz) as exc:
        return _fail(EXIT_SYNTHESIS, f"synthesis failed: {exc}")
    except DimensionMismatch as exc:
        return _fail(EXIT_DIMENSION, f"dimension mismatch: {exc}")
    except (SchemaViolation, QuadratureNotConverged, TailUnstable, KernelResonance,
            UnstableModeDiscarded, NotReachable, DegenerateTrajectory,
            FileNotFoundError, ValueError, KeyError) as exc:
        return _fail(EXIT_CONFIG, f"invalid configuration: {exc}")


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
