"""Command-line front end.  Every subcommand only parses, calls the library and renders.

Exit codes: 0 success or PASS, 1 verification FAIL, 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import games as gm
from . import io as gio
from . import linalg as la
from . import robustness as rb
from . import selftest as se
from . import strategies as st
from .errors import GluedGamesError, ProofStepError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

BUILTIN_GAMES = {
    "ms": gm.magic_square,
    "mp": gm.magic_pentagram,
    "gms": gm.glued_magic_square,
}


class Context:
    def __init__(self, args, out):
        self.tol = args.tol
        self.seed = args.seed
        self.format = args.format
        self.out_path = args.out
        self.out = out

    def meta(self) -> dict:
        return {"version": __version__, "tol": self.tol, "seed": self.seed}

    def emit(self, text: str):
        if self.out_path:
            Path(self.out_path).write_text(text)
        else:
            self.out.write(text)

    def emit_json(self, obj):
        self.emit(gio.dumps(obj))

    def emit_report(self, payload: dict, lines: list[str]):
        """JSON with metadata, or a labeled (lossy) text table."""
        if self.format == "json":
            self.emit_json({"meta": self.meta(), **payload})
        else:
            head = f"# gluedgames {__version__} tol={self.tol:g} seed={self.seed} (text rendering is lossy; use --format json)"
            self.emit("\n".join([head, *lines]) + "\n")


def _game_arg(name: str) -> gm.LcsGame:
    if name in BUILTIN_GAMES:
        return BUILTIN_GAMES[name]()
    return gio.load_game(name)


def _parse_chars(text: str | None, rng) -> np.ndarray:
    if text is None or text == "random":
        return st.random_characters(rng)
    groups = text.split(",")
    if len(groups) != 4 or any(len(g) != 4 or set(g) - {"+", "-"} for g in groups):
        raise gio.FormatError(f"--chars: expected four comma-separated groups of four '+'/'-' signs, got {text!r}")
    return np.array([[1 if c == "+" else -1 for c in g] for g in groups])


def cmd_game_build(ctx, args):
    if args.which == "glue":
        if len(args.parts) != 2:
            raise gio.FormatError("game build glue needs two games")
        game = gm.glue(_game_arg(args.parts[0]), _game_arg(args.parts[1]))
    else:
        if args.parts:
            raise gio.FormatError(f"game build {args.which} takes no further arguments")
        game = BUILTIN_GAMES[args.which]()
    ctx.emit_json(gio.game_to_json(game))
    return EXIT_OK


def cmd_game_value(ctx, args):
    v = gm.classical_value(_game_arg(args.game))
    if ctx.format == "json":
        ctx.emit_json({"meta": ctx.meta(), "classical_value": str(v), "float": float(v)})
    else:
        ctx.emit(f"{v}\n")
    return EXIT_OK


def cmd_strategy_build(ctx, args):
    rng = np.random.default_rng(ctx.seed)
    kind = args.kind
    if kind == "ideal-ms":
        s = st.ideal_magic_square()
    elif kind == "ideal-mp":
        s = st.ideal_magic_pentagram()
    elif kind == "glued":
        rep = st.representation_from_characters(_parse_chars(args.chars, rng))
        s = st.build_glued_strategy(args.part, rep, ctx.tol)
    elif kind == "example":
        if args.alpha is None:
            raise gio.FormatError("strategy build example needs --alpha")
        xi = gio.load_state(args.xi) if args.xi else la.random_state(args.aux_dim, args.aux_dim, rng)
        beta = float(np.sqrt(max(0.0, 1 - args.alpha**2)))
        s = st.example_strategy(args.alpha, beta, xi, ctx.tol)
    elif kind == "convex":
        if not args.file:
            raise gio.FormatError("strategy build convex needs a SPEC file")
        spec_path = Path(args.file)
        spec = gio.read_json(spec_path)
        parts = []
        for n, part in enumerate(spec.get("parts", []) if isinstance(spec, dict) else []):
            where = f"{spec_path}: parts[{n}]"
            w = gio._field(part, "weight", where)
            ref = gio._field(part, "strategy", where)
            parts.append((float(w), gio.load_strategy(spec_path.parent / ref)))
        if not parts:
            raise gio.FormatError(f"{spec_path}: parts must be a nonempty list")
        s = st.convex_combination(parts, ctx.tol)
        if spec.get("conjugate") == "random":
            s = st.conjugate_local(s, la.random_unitary(s.dim_a, rng), la.random_unitary(s.dim_b, rng))
    elif kind == "perturb":
        if not args.file or args.eps is None:
            raise gio.FormatError("strategy build perturb needs FILE and --eps")
        game = _game_arg(args.game) if args.game else gm.glued_magic_square()
        s = rb.perturb_strategy(gio.load_strategy(args.file), args.eps, ctx.seed, game)
    else:  # pragma: no cover - argparse restricts choices
        raise gio.FormatError(f"unknown strategy kind {kind}")
    ctx.emit_json(gio.strategy_to_json(s))
    return EXIT_OK


def cmd_evaluate(ctx, args):
    game = _game_arg(args.game)
    s = gio.load_strategy(args.strategy)
    p = st.winning_probability(game, s)
    if ctx.format == "json":
        ctx.emit_json({"meta": ctx.meta(), "win_probability": p, "measurement_order": "increasing"})
    else:
        ctx.emit(f"{p:.12f}\n")
    return EXIT_OK


def cmd_decompose(ctx, args):
    s = gio.load_strategy(args.strategy)
    try:
        rep = se.decompose_gms(s, ctx.tol)
    except ProofStepError as exc:
        ctx.emit_report({"passed": False, "failed_step": exc.step, "residual": exc.residual}, [f"FAIL {exc}"])
        return EXIT_FAIL
    payload = rep.to_json()
    lines = [f"weights        {', '.join(f'{w:.12f}' for w in rep.weights)}",
             f"blocks (A)     {rep.block_dims_alice}", f"blocks (B)     {rep.block_dims_bob}"]
    lines += [f"{k:<26} {v:.3e}" for k, v in rep.residuals.items()]
    for sub in rep.substrategies:
        if sub.degenerate:
            lines.append(f"substrategy {sub.index}: degenerate (weight {sub.weight:.3e})")
        else:
            lines.append(
                f"substrategy {sub.index}: MS win {sub.ms_win_probability:.12f}, representation "
                f"{'PASS' if sub.representation_alice.passed and sub.representation_bob.passed else 'FAIL'}, "
                f"state {'PASS' if sub.state_selftest.passed else 'FAIL'}"
            )
    lines.append("PASS" if rep.passed else "FAIL")
    ctx.emit_report(payload, lines)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_robust_sweep(ctx, args):
    base = gio.load_strategy(args.strategy)
    try:
        grid = [float(t) for t in args.eps_grid.split(",") if t.strip()]
    except ValueError:
        raise gio.FormatError(f"--eps-grid: cannot parse {args.eps_grid!r}") from None
    seeds = [ctx.seed + n for n in range(args.seeds)]
    res = rb.robust_sweep(lambda seed: base, grid, seeds, include_zero=not args.no_zero,
                          equation_choice=args.equation_choice)
    if args.rows:
        Path(args.rows).write_text(gio.rows_to_csv(res.rows))
    ok = res.summary["min_slack"] >= rb.SLACK_FLOOR and res.summary["monotone"]
    if ctx.format == "csv":
        ctx.emit(gio.rows_to_csv(res.rows))
    else:
        lines = [f"{k}: {v}" for k, v in res.summary.items()] + ["PASS" if ok else "FAIL"]
        ctx.emit_report({"summary": res.summary, "passed": ok}, lines)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_dilation(ctx, args):
    s = gio.load_strategy(args.strategy)
    ideal = gio.load_strategy(args.ideal)
    w = gio.load_witness(args.witness)
    rep = st.verify_local_dilation(s, ideal, w, ctx.tol)
    payload = {
        "state_residual": rep.state_residual,
        "alice_residuals": rep.alice_residuals,
        "bob_residuals": rep.bob_residuals,
        "max_residual": rep.max_residual(),
        "passed": rep.passed,
    }
    lines = [f"max residual {rep.max_residual():.3e}", "PASS" if rep.passed else "FAIL"]
    ctx.emit_report(payload, lines)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("tolerance must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive, default=argparse.SUPPRESS, help="numerical tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--format", choices=("json", "text", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="write output to this path")

    p = argparse.ArgumentParser(prog="gluedgames", parents=[common], description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"gluedgames {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    game = sub.add_parser("game", help="build games or compute classical values").add_subparsers(dest="action", required=True)
    b = game.add_parser("build", parents=[common])
    b.add_argument("which", choices=("ms", "mp", "gms", "glue"))
    b.add_argument("parts", nargs="*", help="for glue: two games (ms, mp, gms or JSON files)")
    b.set_defaults(func=cmd_game_build)
    c = game.add_parser("classical-value", parents=[common])
    c.add_argument("game")
    c.set_defaults(func=cmd_game_value)

    strat = sub.add_parser("strategy", help="build strategies").add_subparsers(dest="action", required=True)
    sb = strat.add_parser("build", parents=[common])
    sb.add_argument("kind", choices=("ideal-ms", "ideal-mp", "glued", "example", "convex", "perturb"))
    sb.add_argument("file", nargs="?", help="SPEC for convex, strategy file for perturb")
    sb.add_argument("--part", type=int, choices=(1, 2), default=1)
    sb.add_argument("--chars", help="four groups of four signs, e.g. ++++,+-+-,--++,+--+ (default random)")
    sb.add_argument("--alpha", type=float)
    sb.add_argument("--xi", help="auxiliary state JSON (default random)")
    sb.add_argument("--aux-dim", type=int, default=5)
    sb.add_argument("--eps", type=float)
    sb.add_argument("--game", help="game for perturb calibration (default gms)")
    sb.set_defaults(func=cmd_strategy_build)

    ev = sub.add_parser("evaluate", parents=[common], help="winning probability")
    ev.add_argument("game")
    ev.add_argument("strategy")
    ev.set_defaults(func=cmd_evaluate)

    dc = sub.add_parser("decompose", parents=[common], help="split a perfect Glued Magic Square strategy")
    dc.add_argument("strategy")
    dc.set_defaults(func=cmd_decompose)

    robust = sub.add_parser("robust", help="robustness sweeps").add_subparsers(dest="action", required=True)
    rs = robust.add_parser("sweep", parents=[common])
    rs.add_argument("strategy")
    rs.add_argument("--eps-grid", default="1e-2,1e-3,1e-4")
    rs.add_argument("--seeds", type=int, default=10, help="number of seeds starting at --seed")
    rs.add_argument("--no-zero", action="store_true", help="skip the eps=0 grid point")
    rs.add_argument("--equation-choice", choices=("first", "last"), default="first")
    rs.add_argument("--rows", help="also write per-record CSV here")
    rs.set_defaults(func=cmd_robust_sweep)

    verify = sub.add_parser("verify", help="verify witnesses").add_subparsers(dest="action", required=True)
    vd = verify.add_parser("dilation", parents=[common])
    vd.add_argument("strategy")
    vd.add_argument("ideal")
    vd.add_argument("witness")
    vd.set_defaults(func=cmd_verify_dilation)
    return p


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    for name, default in (("tol", la.TOL), ("seed", 0), ("format", "text"), ("out", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    ctx = Context(args, out)
    try:
        return args.func(ctx, args)
    except ProofStepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (GluedGamesError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())
