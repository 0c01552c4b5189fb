"""Batch command-line front end.

Every command writes one JSON document (stdout unless ``--out``) wrapped in an
envelope that records the tool version, the seed and the resolved tolerances.
Exit codes: 0 success, 1 unknown command, 2 invalid input, 3 numerical domain
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema
import numpy as np
from referencing import Registry, Resource

from liekit import __version__
from liekit.config import DomainError, InvalidInputError, LieKitError, ResourceError, Tolerances
from liekit.serialize import dumps, matrix_from_json, matrix_to_json, vector_from_json, vector_to_json

EXIT_OK, EXIT_UNKNOWN, EXIT_INVALID, EXIT_DOMAIN = 0, 1, 2, 3


# --- configuration and I/O -----------------------------------------------------


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    tol: Tolerances = field(default_factory=Tolerances)
    out: str | None = None
    args: argparse.Namespace | None = None


def parse_tolerances(pairs: list[str] | None) -> Tolerances:
    tol = Tolerances()
    known = tol.as_dict()
    overrides = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or key not in known:
            raise InvalidInputError(f"bad tolerance override {item!r}; known keys: {', '.join(sorted(known))}")
        try:
            v = float(value)
        except ValueError:
            raise InvalidInputError(f"tolerance {key} must be a number, got {value!r}") from None
        if not v > 0:
            raise InvalidInputError(f"tolerance {key} must be positive")
        overrides[key] = v
    return tol.replace(**overrides)


SCHEMAS = ("matrix", "vector", "matrix_list", "lie_basis", "one_param_samples", "output")


def load_schema(name: str) -> dict:
    return json.loads(resources.files("liekit").joinpath("schemas", f"{name}.v1.json").read_text())


def _validator(name: str) -> jsonschema.Draft202012Validator:
    resources_ = [(f"liekit/{n}.v1.json", Resource.from_contents(load_schema(n))) for n in SCHEMAS]
    return jsonschema.Draft202012Validator(load_schema(name), registry=Registry().with_resources(resources_))


def validate(obj: Any, schema: str) -> None:
    try:
        _validator(schema).validate(obj)
    except jsonschema.ValidationError as exc:
        raise InvalidInputError(f"input does not match schema {schema}.v1: {exc.message}") from None


def read_json(path: str, schema: str | None = None) -> Any:
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path} is not valid JSON: {exc}") from None
    if schema:
        validate(obj, schema)
    return obj


def read_matrix(path: str) -> np.ndarray:
    return matrix_from_json(read_json(path, "matrix"))


def read_matrices(path: str) -> list[np.ndarray]:
    return [matrix_from_json(m) for m in read_json(path, "matrix_list")["matrices"]]


def envelope(cfg: RunConfig, result: dict) -> dict:
    return {
        "schema": "liekit.output.v1",
        "command": cfg.command,
        "version": __version__,
        "seed": cfg.seed,
        "tolerances": cfg.tol.as_dict(),
        "result": result,
    }


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- commands ----------------------------------------------------------------


def cmd_exp(cfg: RunConfig) -> dict:
    from liekit.linalg import mat_exp

    return {"matrix": matrix_to_json(mat_exp(read_matrix(cfg.args.matrix)))}


def cmd_log(cfg: RunConfig) -> dict:
    from liekit.linalg import mat_log

    return {"matrix": matrix_to_json(mat_log(read_matrix(cfg.args.matrix), cfg.tol))}


def cmd_bch(cfg: RunConfig) -> dict:
    from liekit.lie import bch_truncated

    r = bch_truncated(read_matrix(cfg.args.a), read_matrix(cfg.args.b), cfg.args.order)
    return {"matrix": matrix_to_json(r.value), "order": r.order, "inputScale": r.input_scale}


def cmd_one_param(cfg: RunConfig) -> dict:
    from liekit.linalg import one_param_recover

    obj = read_json(cfg.args.samples, "one_param_samples")
    samples = [(s["t"], matrix_from_json(s["matrix"])) for s in obj["samples"]]
    return {"generator": matrix_to_json(one_param_recover(samples, cfg.tol))}


def cmd_kolchin(cfg: RunConfig) -> dict:
    from liekit.lie import LieBasis, lie_kolchin_triangularize, subdiagonal_residual

    basis = LieBasis.from_json(read_json(cfg.args.basis, "lie_basis"))
    g = lie_kolchin_triangularize(basis, cfg.tol)
    res = max(subdiagonal_residual(g, X) for X in basis.elements)
    return {"conjugator": matrix_to_json(g), "subdiagonalResidual": res}


def cmd_invariant_form(cfg: RunConfig) -> dict:
    from liekit.lie import invariant_hermitian_form, so2_quadrature

    S = read_matrix(cfg.args.conjugator) if cfg.args.conjugator else np.eye(2)
    if S.shape != (2, 2):
        raise InvalidInputError("conjugator must be 2x2")
    Sinv = np.linalg.inv(S)
    form = invariant_hermitian_form(so2_quadrature(cfg.args.nodes), lambda k: S @ k @ Sinv, cfg.tol)
    return {"gram": matrix_to_json(form.gram), "nodes": cfg.args.nodes}


def cmd_iwasawa(cfg: RunConfig) -> dict:
    from liekit.homogeneous import iwasawa

    nak = iwasawa(read_matrix(cfg.args.matrix), rescale=cfg.args.rescale, tol=cfg.tol)
    return {"n": matrix_to_json(nak.n), "a": vector_to_json(nak.a), "k": matrix_to_json(nak.k)}


def cmd_reduce(cfg: RunConfig) -> dict:
    from liekit.homogeneous import in_siegel_set, iwasawa, reduce_basis

    red = reduce_basis(read_matrix(cfg.args.basis), cfg.tol)
    nak = iwasawa(red.basis, rescale=True, tol=cfg.tol)
    return {
        "basis": matrix_to_json(red.basis),
        "transform": [[int(x) for x in row] for row in red.U],
        "lastRowNorm": float(np.linalg.norm(red.basis[-1])),
        "inSiegelSet": in_siegel_set(nak, slack=cfg.tol.siegel_slack),
    }


def cmd_shortest(cfg: RunConfig) -> dict:
    from liekit.homogeneous import shortest_vector

    sv = shortest_vector(read_matrix(cfg.args.basis), multiplier=cfg.args.multiplier)
    return {"vector": vector_to_json(sv.vector), "coefficients": list(sv.coefficients), "norm": sv.norm}


def cmd_siegel_volume(cfg: RunConfig) -> dict:
    from liekit.homogeneous import SiegelParams, siegel_volume

    params = SiegelParams(cfg.args.s, cfg.args.t) if cfg.args.t is not None else SiegelParams(cfg.args.s)
    vol = siegel_volume(params, cfg.args.d, resolution=cfg.args.resolution)
    return {
        "value": vol.value,
        "tail": vol.tail,
        "relativeTail": vol.tail / vol.value,
        "sequence": list(vol.sequence),
        "exponents": list(vol.exponents),
        "s": params.s,
        "t": params.t,
    }


def cmd_haar_check(cfg: RunConfig) -> dict:
    from liekit import homogeneous as hom

    chart = cfg.args.chart
    g0 = read_matrix(cfg.args.translate) if cfg.args.translate else np.eye(2)
    density = hom.nak2_density() if chart == "nak2" else hom.abc_density
    rep = hom.haar_invariance_check(chart, density, hom.TEST_FUNCTIONS[chart], g0, hom.DEFAULT_BOXES[chart], cfg.args.resolution)
    return {
        "chart": chart,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "errorEstimate": rep.error_estimate,
        "withinEstimate": abs(rep.lhs - rep.rhs) <= 2 * rep.error_estimate,
        "resolution": cfg.args.resolution,
    }


def cmd_tiling(cfg: RunConfig) -> dict:
    from liekit import hyperbolic as hyp

    spec = hyp.TriangleGroupSpec.parse(cfg.args.signature)
    tiles = hyp.generate_tiling(spec, cfg.args.depth, tol=cfg.tol)
    if cfg.args.svg:
        Path(cfg.args.svg).write_text(hyp.tiling_svg(tiles))
    return {
        "signature": list(spec.ns),
        "depth": cfg.args.depth,
        "tileCount": len(tiles),
        "overlaps": hyp.overlap_count(tiles),
        "vertexCycleCounts": list(hyp.vertex_cycle_counts(tiles)),
        "tiles": [t.to_json() for t in tiles],
    }


def cmd_quat_lattice(cfg: RunConfig) -> dict:
    from liekit.arithmetic import discreteness_margin, quaternion_lattice_elements

    els = quaternion_lattice_elements(cfg.args.a, cfg.args.b, cfg.args.height)
    return {
        "a": cfg.args.a,
        "b": cfg.args.b,
        "height": cfg.args.height,
        "count": len(els),
        "discretenessMargin": discreteness_margin(els) if len(els) > 1 else None,
        "elements": [e.to_json() for e in els],
    }


def _form(cfg: RunConfig):
    from liekit.arithmetic import QuadraticForm

    try:
        return QuadraticForm.from_polynomial(cfg.args.form)
    except (ValueError, TypeError, SyntaxError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"cannot parse form {cfg.args.form!r}: {exc}") from None


def cmd_so_q(cfg: RunConfig) -> dict:
    from liekit.arithmetic import so_q_algebra
    from liekit.lie import closure_check

    Q = _form(cfg)
    basis = so_q_algebra(Q)
    return {"form": Q.to_json(), "basis": basis.to_json(), "closed": closure_check(basis, cfg.tol).closed}


def cmd_isotropic(cfg: RunConfig) -> dict:
    from liekit.arithmetic import isotropic_search

    Q = _form(cfg)
    r = isotropic_search(Q, cfg.args.height)
    return {
        "form": Q.to_json(),
        "height": r.height,
        "vector": list(r.vector) if r.found else None,
        "note": "a null result only covers vectors of height <= H",
    }


def cmd_recurrence(cfg: RunConfig) -> dict:
    from liekit.dynamics import projective_orbit, recurrence_detect, unipotent_rigidity_check
    from liekit.linalg import classify_element

    T = read_matrix(cfg.args.matrix)
    v = vector_from_json(read_json(cfg.args.start, "vector"))
    traj = projective_orbit(T, v, cfg.args.nmax)
    returns = recurrence_detect(traj, cfg.args.eps)
    label = classify_element(T, cfg.tol)
    out = {
        "eps": cfg.args.eps,
        "nmax": cfg.args.nmax,
        "classification": label,
        "returnCount": len(returns),
        "firstReturns": returns[:20],
        "rigidity": None,
    }
    if label == "unipotent":
        out["rigidity"] = unipotent_rigidity_check(T, v, cfg.args.eps, cfg.args.nmax, cfg.tol).status
    return out


def _reps() -> dict[str, Callable[[np.ndarray], np.ndarray]]:
    from liekit import representations as r

    return {"standard": lambda g: np.asarray(g, dtype=float), "sym2": r.sym2, "adjoint": r.adjoint_sl2}


def cmd_borel(cfg: RunConfig) -> dict:
    from liekit.dynamics import borel_density_experiment, invariant_vectors

    rep = _reps()[cfg.args.rep]
    gens = read_matrices(cfg.args.generators)
    family = read_matrices(cfg.args.family)
    pairs = [(g, rep(g)) for g in gens]
    if cfg.args.vector:
        v = vector_from_json(read_json(cfg.args.vector, "vector"))
    else:
        fixed = invariant_vectors([p for _, p in pairs])
        if fixed.shape[1] == 0:
            return {"rep": cfg.args.rep, "vacuous": True, "entries": [], "allFixed": None}
        v = fixed[:, 0]
    report = borel_density_experiment(rep, pairs, family, v, cfg.args.eps, cfg.args.nmax, cfg.tol)
    return {"rep": cfg.args.rep, "vacuous": False, "vector": vector_to_json(v), **report.to_json()}


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liekit", description="Matrix Lie group and lattice computations.")
    p.add_argument("--version", action="version", version=f"liekit {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--out", help="output JSON path (default stdout)")
        sp.add_argument("--seed", type=int, default=0, help="seed recorded in the output")
        sp.add_argument("--tol", action="append", metavar="KEY=VALUE", help="override one tolerance")
        sp.set_defaults(func=func)
        return sp

    sp = add("exp", cmd_exp, "matrix exponential")
    sp.add_argument("--matrix", required=True)
    sp = add("log", cmd_log, "principal matrix logarithm")
    sp.add_argument("--matrix", required=True)
    sp = add("bch", cmd_bch, "truncated Baker-Campbell-Hausdorff series")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--order", type=int, default=4)
    sp = add("one-param", cmd_one_param, "recover the generator of a one-parameter group")
    sp.add_argument("--samples", required=True)
    sp = add("kolchin", cmd_kolchin, "simultaneous triangularization of a solvable algebra")
    sp.add_argument("--basis", required=True)
    sp = add("invariant-form", cmd_invariant_form, "SO(2)-averaged Hermitian form for k -> S k S^-1")
    sp.add_argument("--conjugator")
    sp.add_argument("--nodes", type=int, default=256)
    sp = add("iwasawa", cmd_iwasawa, "NAK decomposition")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--rescale", action="store_true")
    sp = add("reduce", cmd_reduce, "reduced basis of a lattice (rows)")
    sp.add_argument("--basis", required=True)
    sp = add("shortest", cmd_shortest, "shortest nonzero lattice vector")
    sp.add_argument("--basis", required=True)
    sp.add_argument("--multiplier", type=float, default=1.5)
    sp = add("siegel-volume", cmd_siegel_volume, "Haar volume of a Siegel set")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--s", type=float, default=0.5)
    sp.add_argument("--t", type=float)
    sp.add_argument("--resolution", type=int, default=14)
    sp = add("haar-check", cmd_haar_check, "left-invariance quadrature on SL2")
    sp.add_argument("--chart", choices=["nak2", "abc"], default="nak2")
    sp.add_argument("--translate")
    sp.add_argument("--resolution", type=int, default=64)
    sp = add("tiling", cmd_tiling, "triangle-group tiling")
    sp.add_argument("--signature", required=True)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--svg")
    sp.add_argument("--json", dest="json_out", help="alias for --out")
    sp = add("quat-lattice", cmd_quat_lattice, "quaternion lattice points of norm 1")
    sp.add_argument("--a", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--height", type=int, required=True)
    sp = add("so-q", cmd_so_q, "Lie algebra of SO(Q)")
    sp.add_argument("--form", required=True)
    sp = add("isotropic", cmd_isotropic, "bounded search for isotropic integer vectors")
    sp.add_argument("--form", required=True)
    sp.add_argument("--height", type=int, required=True)
    sp = add("recurrence", cmd_recurrence, "projective orbit returns")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--start", required=True)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--nmax", type=int, default=100_000)
    sp = add("borel", cmd_borel, "fixed-vector experiment")
    sp.add_argument("--rep", choices=["standard", "sym2", "adjoint"], default="sym2")
    sp.add_argument("--generators", required=True)
    sp.add_argument("--family", required=True)
    sp.add_argument("--vector")
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--nmax", type=int, default=100_000)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    commands = set(parser._subparsers._group_actions[0].choices)
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None and not any(a in ("-h", "--help", "--version") for a in argv):
        parser.print_usage(sys.stderr)
        return EXIT_UNKNOWN
    if first is not None and first not in commands:
        parser.print_usage(sys.stderr)
        print(f"liekit: unknown command {first!r}", file=sys.stderr)
        return EXIT_UNKNOWN
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = RunConfig(args.command, args.seed, parse_tolerances(args.tol), args.out, args)
        if getattr(args, "json_out", None):
            cfg.out = args.json_out
        result = args.func(cfg)
        _write(cfg.out, dumps(envelope(cfg, result)))
    except (InvalidInputError, ResourceError) as exc:
        print(f"liekit: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DomainError as exc:
        print(f"liekit: numerical domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except LieKitError as exc:
        print(f"liekit: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
