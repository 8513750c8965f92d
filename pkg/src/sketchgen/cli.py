"""Command-line entry point.

Subcommands wire the library modules into pipelines: turtle-exec,
turtle-encode, validate, dedup, tokenize, train, sample, metrics,
render-svg, extrude, constrain.

Conventions: sketch data travels as JSON (single object) or newline-
delimited JSON (streams); `-` means stdin/stdout; diagnostics go to
stderr. Exit codes: 0 success, 1 input error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import (
    dedup as dedup_mod,
    metrics as metrics_mod,
    sketch_io,
    solid as solid_mod,
    tokens as tokens_mod,
    turtle as turtle_mod,
)
from .geometry import GRID_SIZE, SketchHypergraph, validate_sketch
from .model import (
    CurveModel,
    ModelConfig,
    ModelError,
    TurtleModel,
    VertexModel,
    build_model,
    load_checkpoint,
    save_checkpoint,
    train as train_model,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2

INPUT_ERRORS = (
    sketch_io.SketchFormatError,
    turtle_mod.TurtleError,
    tokens_mod.TokenError,
    dedup_mod.DedupError,
    metrics_mod.MetricsError,
    solid_mod.SolidError,
    ModelError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    UnicodeDecodeError,
    json.JSONDecodeError,
)


class CliInputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of calling sys.exit, so run() can map
    unknown flags to exit code 1."""

    def error(self, message):
        raise CliInputError(message)


# --- i/o helpers ----------------------------------------------------------

def _read_text(path) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fp:
        return fp.read()


def _write_text(path, text):
    if path == "-" or path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(text)


def _read_sketches(path) -> list[SketchHypergraph]:
    """Single-object JSON or a newline-delimited stream of sketches."""
    text = _read_text(path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return list(sketch_io.read_sketch_stream(text.splitlines()))
    return [sketch_io.sketch_from_obj(obj)]


def _read_one_sketch(path) -> SketchHypergraph:
    sketches = _read_sketches(path)
    if len(sketches) != 1:
        raise CliInputError(
            f"expected exactly one sketch, got {len(sketches)}"
        )
    return sketches[0]


def _write_sketches(path, sketches):
    lines = "".join(sketch_io.dumps_sketch(g) + "\n" for g in sketches)
    _write_text(path, lines)


def _check_grid(args):
    if getattr(args, "grid", GRID_SIZE) != GRID_SIZE:
        raise CliInputError(f"only --grid {GRID_SIZE} is supported")


# --- subcommand implementations ------------------------------------------

def _cmd_turtle_exec(args):
    program = turtle_mod.parse(_read_text(args.input))
    g = turtle_mod.execute(program)
    _write_text(args.output, sketch_io.dumps_sketch(g) + "\n")
    return EXIT_OK


def _cmd_turtle_encode(args):
    if args.mode == "randomized" and args.seed is None:
        raise CliInputError("--mode randomized requires --seed")
    g = _read_one_sketch(args.input)
    program = turtle_mod.encode(g, mode=args.mode, seed=args.seed)
    _write_text(args.output, turtle_mod.serialize(program) + "\n")
    return EXIT_OK


def _cmd_validate(args):
    total = valid = 0
    out_lines = []
    for g in _read_sketches(args.input):
        total += 1
        report = validate_sketch(g)
        if report.is_valid:
            valid += 1
            out_lines.append(sketch_io.dumps_sketch(g))
        elif not args.quiet:
            reasons = sorted({f.category for f in report.failures})
            print(
                f"sketch {total - 1} invalid: {', '.join(reasons)}",
                file=sys.stderr,
            )
    _write_text(args.output, "".join(l + "\n" for l in out_lines))
    print(
        json.dumps({"total": total, "valid": valid, "invalid": total - valid}),
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_dedup(args):
    sketches = _read_sketches(args.input)
    kept, stats = dedup_mod.filter_dataset(sketches, grid=args.dedup_grid)
    _write_sketches(args.output, kept)
    stats_text = json.dumps(stats.to_obj())
    if args.stats:
        _write_text(args.stats, stats_text + "\n")
    else:
        print(stats_text, file=sys.stderr)
    return EXIT_OK


def _tokenize_one(g, encoding):
    if encoding == "vertex":
        return tokens_mod.encode_vertices(g)
    if encoding == "curve":
        return tokens_mod.encode_curves(g)
    if encoding == "sketch":
        v, c = tokens_mod.encode_sketch(g)
        return {"vertices": v, "curves": c}
    rows = tokens_mod.encode_turtle(turtle_mod.encode(g))
    return [list(r) for r in rows]


def _detokenize_one(obj, encoding):
    if encoding == "vertex":
        verts = tokens_mod.decode_vertices(obj)
        return SketchHypergraph.from_lists(verts, [])
    if encoding == "sketch":
        return tokens_mod.decode_sketch(obj["vertices"], obj["curves"])
    if encoding == "turtle":
        return turtle_mod.execute(tokens_mod.decode_turtle(obj))
    raise CliInputError(
        "--decode supports encodings: vertex, sketch, turtle"
    )


def _cmd_tokenize(args):
    text = _read_text(args.input)
    out_lines = []
    if args.decode:
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            g = _detokenize_one(json.loads(line), args.encoding)
            out_lines.append(sketch_io.dumps_sketch(g))
    else:
        for g in _read_sketches(args.input):
            out_lines.append(
                json.dumps(_tokenize_one(g, args.encoding),
                           separators=(",", ":"))
            )
    _write_text(args.output, "".join(l + "\n" for l in out_lines))
    return EXIT_OK


def _training_corpus(sketches, kind):
    corpus = []
    for g in sketches:
        if kind == "vertex":
            corpus.append(tokens_mod.encode_vertices(g))
        elif kind == "curve":
            order = tokens_mod.sorted_vertex_order(g)
            verts = [g.vertices[i] for i in order]
            corpus.append((verts, tokens_mod.encode_curves(g)))
        else:
            corpus.append(tokens_mod.encode_turtle(turtle_mod.encode(g)))
    return corpus


def _cmd_train(args):
    sketches = _read_sketches(args.input)
    if not sketches:
        raise CliInputError("empty training set")
    corpus = _training_corpus(sketches, args.kind)
    cfg = ModelConfig(
        kind=args.kind,
        blocks=args.blocks,
        heads=args.heads,
        hidden_dim=args.hidden_dim,
        output_dim=args.output_dim,
        max_len=args.max_len,
        seed=args.seed,
    )
    model = build_model(cfg)
    result = train_model(
        model,
        corpus,
        steps=args.steps,
        lr=args.lr,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    save_checkpoint(model, args.output)
    print(
        json.dumps(
            {
                "steps": args.steps,
                "final_loss": result.losses[-1] if result.losses else None,
                "checkpoint": args.output,
            }
        ),
        file=sys.stderr,
    )
    return EXIT_OK


def _sample_one(model, curve_model, top_p, seed, max_len):
    """One sketch from a turtle model or a vertex(+curve) model pair.

    Decode failures yield an empty (invalid) sketch so downstream metrics
    can still count validity.
    """
    try:
        if isinstance(model, TurtleModel):
            res = model.sample(top_p=top_p, seed=seed, max_len=max_len)
            program = tokens_mod.decode_turtle(res.tokens)
            return turtle_mod.execute(program)
        res = model.sample(top_p=top_p, seed=seed, max_len=max_len)
        verts = tokens_mod.decode_vertices(res.tokens)
        if curve_model is None:
            return SketchHypergraph.from_lists(verts, [])
        cres = curve_model.sample(
            verts, top_p=top_p, seed=seed + 1, max_len=max_len
        )
        edges = tokens_mod.decode_curves(cres.tokens, verts)
        return SketchHypergraph.from_lists(verts, edges)
    except (tokens_mod.TokenError, turtle_mod.TurtleError, ValueError):
        return SketchHypergraph.from_lists([], [])


def _cmd_sample(args):
    model = load_checkpoint(args.model)
    curve_model = None
    if args.curve_model:
        curve_model = load_checkpoint(args.curve_model)
        if not isinstance(curve_model, CurveModel):
            raise CliInputError("--curve-model checkpoint is not a curve model")
        if not isinstance(model, VertexModel):
            raise CliInputError("--curve-model requires a vertex --model")
    if isinstance(model, CurveModel):
        raise CliInputError(
            "a curve model cannot sample alone; pass it as --curve-model "
            "next to a vertex --model"
        )
    sketches = [
        _sample_one(model, curve_model, args.top_p, args.seed + 2 * i,
                    args.max_len)
        for i in range(args.count)
    ]
    _write_sketches(args.output, sketches)
    return EXIT_OK


def _cmd_metrics(args):
    samples = _read_sketches(args.samples)
    train_set = _read_sketches(args.train) if args.train else None
    report = metrics_mod.evaluate_samples(samples, train_set)
    _write_text(args.output, json.dumps(report.to_obj()) + "\n")
    return EXIT_OK


def _cmd_render_svg(args):
    sketches = _read_sketches(args.input)
    docs = [solid_mod.svg_dumps(g) for g in sketches]
    _write_text(args.output, "".join(d + "\n" for d in docs))
    return EXIT_OK


def _merged_obj(meshes) -> str:
    """Concatenate meshes into one OBJ with shifted face indices."""
    lines = []
    offset = 0
    for mesh in meshes:
        for x, y, z in mesh.vertices:
            lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
        for a, b, c in mesh.triangles:
            lines.append(f"f {a + 1 + offset} {b + 1 + offset} {c + 1 + offset}")
        offset += len(mesh.vertices)
    return "\n".join(lines) + "\n"


def _cmd_extrude(args):
    g = _read_one_sketch(args.input)
    profile_set = solid_mod.build_profiles(g, segments=args.tess)
    if not profile_set.profiles:
        raise CliInputError("sketch has no closed profiles to extrude")
    if profile_set.open_chains:
        print(
            f"ignoring {len(profile_set.open_chains)} open chain(s)",
            file=sys.stderr,
        )
    meshes = []
    for profile in profile_set.profiles:
        mesh = solid_mod.extrude(profile, args.height, segments=args.tess)
        watertight, oriented, _ = solid_mod.mesh_checks(mesh)
        if not (watertight and oriented):
            raise solid_mod.SolidError("extruded mesh failed integrity checks")
        meshes.append(mesh)
    _write_text(args.output, _merged_obj(meshes))
    return EXIT_OK


def _cmd_constrain(args):
    import math

    g = _read_one_sketch(args.input)
    hints = solid_mod.detect_constraints(
        g, math.radians(args.angle_tol_deg), args.dist_tol
    )
    result = solid_mod.snap_constraints(g, hints)
    _write_text(args.output, sketch_io.dumps_sketch(result.sketch) + "\n")
    print(
        json.dumps(
            {
                "hints": len(hints),
                "applied": len(hints) - len(result.unapplied),
                "unapplied": len(result.unapplied),
            }
        ),
        file=sys.stderr,
    )
    return EXIT_OK


# --- argument wiring ------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="sketchgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("-o", "--output", default="-",
                       help="output path, - for stdout (default)")
        p.add_argument("--grid", type=int, default=GRID_SIZE,
                       help="coordinate grid size (only 256 supported)")
        return p

    p = add("turtle-exec", _cmd_turtle_exec, "run a turtle program")
    p.add_argument("input", help="turtle program file, - for stdin")

    p = add("turtle-encode", _cmd_turtle_encode,
            "encode a sketch as a turtle program")
    p.add_argument("input", help="sketch JSON file, - for stdin")
    p.add_argument("--mode", choices=("canonical", "randomized"),
                   default="canonical")
    p.add_argument("--seed", type=int, help="required for --mode randomized")

    p = add("validate", _cmd_validate,
            "filter a sketch stream to the valid ones")
    p.add_argument("input", help="sketch stream, - for stdin")
    p.add_argument("-q", "--quiet", action="store_true",
                   help="suppress per-sketch failure notes")

    p = add("dedup", _cmd_dedup, "drop invalid and duplicate sketches")
    p.add_argument("input", help="sketch stream, - for stdin")
    p.add_argument("--dedup-grid", type=int, default=dedup_mod.DEDUP_GRID)
    p.add_argument("--stats", help="write stats JSON here instead of stderr")

    p = add("tokenize", _cmd_tokenize, "sketches <-> token sequences")
    p.add_argument("input", help="sketch stream (or token stream with --decode)")
    p.add_argument("--encoding", required=True,
                   choices=("vertex", "curve", "sketch", "turtle"))
    p.add_argument("--decode", action="store_true",
                   help="invert: token JSON lines -> sketch stream")

    p = add("train", _cmd_train, "train a model on a sketch stream")
    p.add_argument("input", help="sketch stream, - for stdin")
    p.add_argument("--kind", required=True,
                   choices=("vertex", "curve", "turtle"))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--output-dim", type=int, default=64)
    p.add_argument("--max-len", type=int, default=220)

    p = add("sample", _cmd_sample, "draw sketches from a trained model")
    p.add_argument("--model", required=True, help="checkpoint (.npz)")
    p.add_argument("--curve-model",
                   help="curve checkpoint paired with a vertex --model")
    p.add_argument("--top-p", type=float, default=0.9)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-n", "--count", type=int, default=1)
    p.add_argument("--max-len", type=int, default=None)

    p = add("metrics", _cmd_metrics, "unique/valid/novel over samples")
    p.add_argument("--samples", required=True, help="sample sketch stream")
    p.add_argument("--train", help="training sketch stream (enables novel%)")

    p = add("render-svg", _cmd_render_svg, "render sketches as SVG")
    p.add_argument("input", help="sketch JSON or stream, - for stdin")

    p = add("extrude", _cmd_extrude, "extrude a sketch to a solid OBJ")
    p.add_argument("input", help="sketch JSON, - for stdin")
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--tess", type=int, default=solid_mod.DEFAULT_TESSELLATION,
                   help="segments per full turn for arcs/circles")

    p = add("constrain", _cmd_constrain,
            "detect and snap parallel/perpendicular/coincident constraints")
    p.add_argument("input", help="sketch JSON, - for stdin")
    p.add_argument("--angle-tol-deg", type=float, default=5.0)
    p.add_argument("--dist-tol", type=float, default=1.5)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _check_grid(args)
        return args.fn(args)
    except (CliInputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 — map anything else to exit 2
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def cli_entry():
    sys.exit(run())


if __name__ == "__main__":
    cli_entry()
