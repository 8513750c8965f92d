"""sketchgen: hypergraph engineering sketches, a turtle DSL, generative
sequence models over sketch tokens, and sketch-to-solid extrusion.
"""

from .geometry import (
    GRID_SIZE,
    Arc,
    Circle,
    GeometryError,
    Line,
    SketchHypergraph,
    ValidityReport,
    circumcircle,
    find_loops,
    fit_circle_lsq,
    isomorphic,
    quantize_sketch,
    recover_primitive,
    validate_sketch,
)
from .sketch_io import (
    SketchFormatError,
    dumps_sketch,
    loads_sketch,
    read_sketch_stream,
    sketch_from_obj,
    sketch_to_obj,
    write_sketch_stream,
)
from .turtle import (
    TurtleCommand,
    TurtleError,
    TurtleProgram,
    encode,
    execute,
    parse,
    serialize,
)
from .dedup import (
    DEDUP_GRID,
    DedupError,
    FilterStats,
    dedup_key,
    filter_dataset,
    is_duplicate,
)
from .tokens import (
    TokenError,
    canonicalize,
    decode_curves,
    decode_sketch,
    decode_turtle,
    decode_vertices,
    encode_curves,
    encode_sketch,
    encode_turtle,
    encode_vertices,
    jitter,
)
from .model import (
    CurveModel,
    ModelConfig,
    ModelError,
    TurtleModel,
    VertexModel,
    build_model,
    gradient_check,
    load_checkpoint,
    nucleus_filter,
    sample_nucleus,
    save_checkpoint,
    train,
)
from .metrics import (
    MetricsReport,
    bits_per_sketch,
    bits_per_vertex,
    evaluate_samples,
    novel_pct,
    unique_pct,
    valid_pct,
)
from .solid import (
    ConstraintHint,
    Profile,
    ProfileSet,
    SnapResult,
    SolidError,
    SolidMesh,
    build_profiles,
    detect_constraints,
    extrude,
    mesh_checks,
    obj_dumps,
    signed_volume,
    snap_constraints,
    svg_dumps,
    tessellate_loop,
)

__version__ = "0.1.0"
