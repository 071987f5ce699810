"""End-to-end extraction: window scan, classification, object labeling.

Training samples windows from exemplar patches on a stride of half the
window, builds feature vectors (normalized window pixels plus the 13
standardized texture statistics), and fits a [dim, 16, 2] sigmoid network
where class 0 means "feature". Extraction stretches the input, classifies
the window around every pixel at stride 1 (border pixels reuse the
nearest valid window), keeps centers the network accepts, then runs
connected components, optional SOM cell assignment, rule evaluation
(label "reject" removes an object), and finally curve-fit gap bridging.

Trained models travel as single-file bundles, format documented on
save_bundle.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import ObjectRecord, bridge_gaps, connected_components
from .mlp import MlpNetwork, TrainConfig, TrainingSet, forward_batch, init_network, train_backprop
from .preprocess import CannyParams, StructuringElement, canny, dilate, opening
from .raster import Mask, Raster, Window, flatten_window, histogram_stretch
from .rules import default_rules_text, evaluate_rules, parse_rules
from .som import SomConfig, SomGrid, bmu_index, train_som
from .texture import (
    FEATURE_NAMES,
    compute_glcm,
    glcm_window_counts,
    haralick_features,
    haralick_features_array,
    quantize,
)

FORMAT_VERSION = 1
_MAGIC = b"GENNBUNDLE\n"

FEATURE_CLASS = 0  # network output index for "is the feature"
REJECT_LABEL = "reject"
NO_RULE = "nn-only"


class BundleError(ValueError):
    """Unreadable, corrupted, or incompatible bundle file."""


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class BridgeParams:
    max_gap: int
    degree: int = 2
    context_len: int = 10

    def __post_init__(self):
        if self.max_gap < 1:
            raise ValueError("max_gap must be at least 1")
        if not (1 <= self.degree <= 3):
            raise ValueError("bridge degree must be 1..3")
        if self.context_len < 2:
            raise ValueError("context_len must be at least 2")


@dataclass(frozen=True)
class PipelineParams:
    window_size: int = 9
    glcm_levels: int = 8
    glcm_offset: tuple[int, int] = (1, 0)
    glcm_symmetric: bool = True
    stretch_low: float = 0.01
    stretch_high: float = 0.99
    canny: CannyParams | None = None
    open_mask: bool = False
    accept_threshold: float = 0.5
    bridge: BridgeParams | None = None
    som_shape: tuple[int, int] | None = None
    som_epochs: int = 30
    learning_rate: float = 0.3
    epochs: int = 200
    target_mse: float = 0.005
    seed: int = 1
    shuffle: bool = True

    def __post_init__(self):
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if not (0.0 <= self.accept_threshold <= 1.0):
            raise ValueError("accept_threshold must be in [0, 1]")
        if self.glcm_levels < 2:
            raise ValueError("glcm_levels must be at least 2")


@dataclass(eq=False)
class ModelBundle:
    """Everything needed to extract one feature class from a raster."""

    class_name: str
    params: PipelineParams
    haralick_means: np.ndarray  # (13,)
    haralick_stds: np.ndarray  # (13,), all > 0
    network: MlpNetwork
    som: SomGrid | None
    ruleset_text: str
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        means = np.asarray(self.haralick_means, dtype=np.float64)
        stds = np.asarray(self.haralick_stds, dtype=np.float64)
        if means.shape != (13,) or stds.shape != (13,):
            raise ValueError("standardization vectors must have 13 entries")
        if (stds <= 0).any():
            raise ValueError("standardization stds must be positive")
        object.__setattr__(self, "haralick_means", means)
        object.__setattr__(self, "haralick_stds", stds)


@dataclass(eq=False)
class LabeledObject:
    record: ObjectRecord
    label: str
    rule_name: str
    som_cell: int


@dataclass(eq=False)
class ExtractionResult:
    mask: Mask
    objects: list[LabeledObject]
    rejected_count: int


# ---------------------------------------------------------------------------
# Feature assembly
# ---------------------------------------------------------------------------


def _exemplar_features(r: Raster, params: PipelineParams, stride: int) -> np.ndarray:
    """Raw feature rows [pixel part | unstandardized texture part] on a grid."""
    s = params.window_size
    vals = r.values
    q = quantize(vals, params.glcm_levels)
    counts = glcm_window_counts(
        q, s, params.glcm_offset, params.glcm_symmetric, params.glcm_levels
    )[::stride, ::stride]
    lv = params.glcm_levels
    flat = counts.reshape(-1, lv * lv).astype(np.float64)
    probs = flat / flat.sum(axis=1, keepdims=True)
    har = haralick_features_array(probs.reshape(-1, lv, lv))
    pix = (
        sliding_window_view(vals, (s, s))[::stride, ::stride]
        .reshape(-1, s * s)
        .astype(np.float64)
        / 255.0
    )
    return np.concatenate([pix, har], axis=1)


def window_feature_vector(
    stretched: Raster, x0: int, y0: int, bundle: ModelBundle
) -> np.ndarray:
    """Standardized feature vector of one window of an already-stretched raster."""
    p = bundle.params
    w = Window(x0, y0, p.window_size)
    pix = flatten_window(stretched, w)
    g = compute_glcm(stretched, p.glcm_offset, p.glcm_levels, p.glcm_symmetric, window=w)
    har = haralick_features(g).as_array()
    har = (har - bundle.haralick_means) / bundle.haralick_stds
    return np.concatenate([pix, har])


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def train_pipeline(
    positives: list[Raster],
    negatives: list[Raster],
    class_name: str,
    params: PipelineParams = PipelineParams(),
    ruleset_text: str | None = None,
) -> ModelBundle:
    """Fit a feature class from exemplar patches.

    Exemplars are consumed as-is; because extraction stretches its input
    first, exemplars should be cropped from a stretched scene (see
    scene.harvest_patches). Raises PipelineError for empty exemplar sets,
    exemplars smaller than the window, or a texture feature that is
    constant over the pool (it cannot be standardized).
    """
    if not positives or not negatives:
        raise PipelineError("need at least one positive and one negative exemplar")
    s = params.window_size
    for r in positives + negatives:
        if r.width < s or r.height < s:
            raise PipelineError(
                f"exemplar {r.width}x{r.height} smaller than window {s}"
            )
    stride = max(1, s // 2)
    pos_rows = np.concatenate([_exemplar_features(r, params, stride) for r in positives])
    neg_rows = np.concatenate([_exemplar_features(r, params, stride) for r in negatives])
    pool = np.concatenate([pos_rows, neg_rows])
    dim_pix = s * s

    means = pool[:, dim_pix:].mean(axis=0)
    stds = pool[:, dim_pix:].std(axis=0)
    for i, sd in enumerate(stds):
        if sd < 1e-12:
            raise PipelineError(f"constant haralick feature: {FEATURE_NAMES[i]}")
    pos_rows[:, dim_pix:] = (pos_rows[:, dim_pix:] - means) / stds
    neg_rows[:, dim_pix:] = (neg_rows[:, dim_pix:] - means) / stds

    x = np.concatenate([pos_rows, neg_rows]).T
    targets = np.zeros((2, x.shape[1]))
    targets[FEATURE_CLASS, : len(pos_rows)] = 1.0
    targets[1 - FEATURE_CLASS, len(pos_rows):] = 1.0
    data = TrainingSet(x, targets)

    net = init_network([dim_pix + 13, 16, 2], params.seed)
    cfg = TrainConfig(
        learning_rate=params.learning_rate,
        max_epochs=params.epochs,
        target_mse=params.target_mse,
        seed=params.seed + 1,
        shuffle=params.shuffle,
    )
    net, _ = train_backprop(net, data, cfg)

    som = None
    if params.som_shape is not None:
        rows, cols = params.som_shape
        som = train_som(
            pos_rows,
            rows,
            cols,
            SomConfig(epochs=params.som_epochs, radius0=max(rows, cols) / 2.0 + 0.5,
                      seed=params.seed + 2),
        )

    text = ruleset_text if ruleset_text is not None else default_rules_text()
    parse_rules(text)  # bundles must always carry parseable rules
    return ModelBundle(
        class_name=class_name,
        params=params,
        haralick_means=means,
        haralick_stds=stds,
        network=net,
        som=som,
        ruleset_text=text,
    )


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


def _scan_windows(
    vals: np.ndarray, counts: np.ndarray, bundle: ModelBundle, workers: int
) -> tuple[np.ndarray, np.ndarray]:
    """Classify the window at every valid position; returns (accepted, feature
    confidence) over the window-origin grid. Bands are computed independently
    and written to disjoint slices, so the result does not depend on workers."""
    p = bundle.params
    s = p.window_size
    lv = p.glcm_levels
    h2 = vals.shape[0] - s + 1
    w2 = vals.shape[1] - s + 1
    accepted = np.zeros((h2, w2), dtype=bool)
    confidence = np.zeros((h2, w2))
    svw = sliding_window_view(vals, (s, s))

    def run_band(y0: int, y1: int) -> None:
        pix = svw[y0:y1].reshape(-1, s * s).astype(np.float64) / 255.0
        flat = counts[y0:y1].reshape(-1, lv * lv).astype(np.float64)
        probs = flat / flat.sum(axis=1, keepdims=True)
        har = haralick_features_array(probs.reshape(-1, lv, lv))
        har = (har - bundle.haralick_means) / bundle.haralick_stds
        out = forward_batch(bundle.network, np.concatenate([pix, har], axis=1))
        cls = np.argmax(out, axis=1)
        conf = out[np.arange(out.shape[0]), cls]
        acc = (cls == FEATURE_CLASS) & (conf >= p.accept_threshold)
        accepted[y0:y1] = acc.reshape(y1 - y0, w2)
        confidence[y0:y1] = out[:, FEATURE_CLASS].reshape(y1 - y0, w2)

    band = max(8, h2 // (max(1, workers) * 4) or 1)
    spans = [(y, min(y + band, h2)) for y in range(0, h2, band)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda span: run_band(*span), spans))
    else:
        for span in spans:
            run_band(*span)
    return accepted, confidence


def extract(r: Raster, bundle: ModelBundle, workers: int = 1) -> ExtractionResult:
    """Run the full pipeline on one raster with a trained bundle."""
    if bundle.format_version > FORMAT_VERSION:
        raise BundleError(
            f"bundle format_version {bundle.format_version} unsupported "
            f"(this build reads <= {FORMAT_VERSION})"
        )
    p = bundle.params
    s = p.window_size
    if r.width < s or r.height < s:
        raise PipelineError(
            f"raster {r.width}x{r.height} smaller than window {s}"
        )
    stretched = histogram_stretch(r, p.stretch_low, p.stretch_high)
    vals = stretched.values
    margin = s // 2

    q = quantize(vals, p.glcm_levels)
    counts = glcm_window_counts(q, s, p.glcm_offset, p.glcm_symmetric, p.glcm_levels)
    accepted_core, conf_core = _scan_windows(vals, counts, bundle, workers)

    accepted = np.pad(accepted_core, margin, mode="edge")
    conf_map = np.pad(conf_core, margin, mode="edge")
    if p.canny is not None:
        edge = canny(stretched, p.canny)
        candidate = dilate(edge, StructuringElement.full(s)).bits
        accepted = accepted & candidate
    rejected_count = int(r.width * r.height - accepted.sum())

    mask_bits = accepted
    if p.open_mask:
        mask_bits = opening(Mask(mask_bits), StructuringElement.full(3)).bits

    ruleset = parse_rules(bundle.ruleset_text)
    records = connected_components(Mask(mask_bits), 8)
    mask_bits = mask_bits.copy()
    objects: list[LabeledObject] = []
    for rec in records:
        xs = rec.pixels[:, 0]
        ys = rec.pixels[:, 1]
        rec.mean_intensity = float(r.values[ys, xs].mean())
        class_prob = float(conf_map[ys, xs].mean())
        som_cell = -1
        if bundle.som is not None:
            cx, cy = rec.centroid
            d2 = (xs - cx) ** 2 + (ys - cy) ** 2
            rep = int(np.argmin(d2))
            x0 = min(max(int(xs[rep]) - margin, 0), r.width - s)
            y0 = min(max(int(ys[rep]) - margin, 0), r.height - s)
            som_cell = bmu_index(bundle.som, window_feature_vector(stretched, x0, y0, bundle))
        attrs = {
            "area": float(rec.area),
            "perimeter": float(rec.perimeter),
            "width": rec.width,
            "elongation": rec.elongation,
            "compactness": rec.compactness,
            "mean_intensity": rec.mean_intensity,
            "class_prob": class_prob,
            "som_cell": float(som_cell),
        }
        decision = evaluate_rules(ruleset, attrs)
        if decision is None:
            label = rule_name = NO_RULE
        else:
            label, rule_name = decision
        if label == REJECT_LABEL:
            mask_bits[ys, xs] = False
            continue
        objects.append(LabeledObject(rec, label, rule_name, som_cell))

    mask = Mask(mask_bits)
    if p.bridge is not None:
        mask = bridge_gaps(mask, p.bridge.max_gap, p.bridge.degree, p.bridge.context_len)
    return ExtractionResult(mask, objects, rejected_count)


# ---------------------------------------------------------------------------
# Bundle serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_bundle(b: ModelBundle, path) -> None:
    """Write a bundle as one self-checking text file.

    Layout: the magic line ``GENNBUNDLE``; ``key=value`` header lines (one
    per scalar field) closed by ``end_header``; then length-prefixed
    sections. ``array <name> <count>`` is followed by count lines, one
    float each with 17 significant digits (lossless for 64-bit floats);
    ``text ruleset <nbytes>`` is followed by exactly nbytes of UTF-8 plus
    a newline. The final line is ``checksum=<crc32 as 8 hex digits>``
    computed over every preceding byte (zlib CRC-32).
    """
    p = b.params
    out = bytearray()
    out += _MAGIC
    header: list[tuple[str, str]] = [
        ("format_version", str(b.format_version)),
        ("class_name", b.class_name),
        ("window_size", str(p.window_size)),
        ("glcm_levels", str(p.glcm_levels)),
        ("glcm_dx", str(p.glcm_offset[0])),
        ("glcm_dy", str(p.glcm_offset[1])),
        ("glcm_symmetric", str(int(p.glcm_symmetric))),
        ("stretch_low", _fmt(p.stretch_low)),
        ("stretch_high", _fmt(p.stretch_high)),
        ("canny_enabled", str(int(p.canny is not None))),
        ("canny_sigma", _fmt(p.canny.sigma if p.canny else 1.0)),
        ("canny_low", _fmt(p.canny.low_thr if p.canny else 20.0)),
        ("canny_high", _fmt(p.canny.high_thr if p.canny else 60.0)),
        ("open_mask", str(int(p.open_mask))),
        ("accept_threshold", _fmt(p.accept_threshold)),
        ("bridge_enabled", str(int(p.bridge is not None))),
        ("bridge_max_gap", str(p.bridge.max_gap if p.bridge else 8)),
        ("bridge_degree", str(p.bridge.degree if p.bridge else 2)),
        ("bridge_context_len", str(p.bridge.context_len if p.bridge else 10)),
        ("som_epochs", str(p.som_epochs)),
        ("learning_rate", _fmt(p.learning_rate)),
        ("epochs", str(p.epochs)),
        ("target_mse", _fmt(p.target_mse)),
        ("seed", str(p.seed)),
        ("shuffle", str(int(p.shuffle))),
        ("layer_sizes", ",".join(str(n) for n in b.network.layer_sizes)),
        ("som_present", str(int(b.som is not None))),
        ("som_rows", str(b.som.rows if b.som else 0)),
        ("som_cols", str(b.som.cols if b.som else 0)),
    ]
    for key, value in header:
        out += f"{key}={value}\n".encode("utf-8")
    out += b"end_header\n"

    def emit_array(name: str, arr: np.ndarray) -> None:
        flat = np.asarray(arr, dtype=np.float64).ravel()
        nonlocal out
        out += f"array {name} {flat.size}\n".encode("ascii")
        out += "".join(_fmt(v) + "\n" for v in flat).encode("ascii")

    emit_array("means", b.haralick_means)
    emit_array("stds", b.haralick_stds)
    for l, (w, bias) in enumerate(zip(b.network.weights, b.network.biases)):
        emit_array(f"weights_{l}", w)
        emit_array(f"biases_{l}", bias)
    if b.som is not None:
        emit_array("som_codebook", b.som.codebook)
    rs = b.ruleset_text.encode("utf-8")
    out += f"text ruleset {len(rs)}\n".encode("ascii")
    out += rs + b"\n"

    crc = zlib.crc32(bytes(out)) & 0xFFFFFFFF
    out += f"checksum={crc:08x}\n".encode("ascii")
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def eof(self) -> bool:
        return self.pos >= len(self.data)

    def line(self) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise BundleError("truncated bundle file")
        raw = self.data[self.pos : end]
        self.pos = end + 1
        return raw.decode("utf-8")

    def exactly(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise BundleError("truncated bundle section")
        raw = self.data[self.pos : self.pos + n]
        self.pos += n
        return raw


def load_bundle(path) -> ModelBundle:
    """Read a bundle written by save_bundle, verifying checksum and version."""
    data = Path(path).read_bytes()
    marker = data.rfind(b"checksum=")
    if marker < 0 or not data.endswith(b"\n"):
        raise BundleError("truncated bundle: missing checksum line")
    body = data[:marker]
    stated = data[marker + len(b"checksum=") : -1].decode("ascii", "replace")
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if stated != f"{actual:08x}":
        raise BundleError(f"checksum mismatch: file says {stated}, content is {actual:08x}")

    r = _Reader(body)
    if r.exactly(len(_MAGIC)) != _MAGIC:
        raise BundleError("not a bundle file (bad magic)")
    header: dict[str, str] = {}
    while True:
        line = r.line()
        if line == "end_header":
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise BundleError(f"malformed header line {line!r}")
        header[key] = value

    try:
        version = int(header["format_version"])
        if version > FORMAT_VERSION:
            raise BundleError(
                f"bundle format_version {version} unsupported (this build reads <= {FORMAT_VERSION})"
            )
        layer_sizes = [int(t) for t in header["layer_sizes"].split(",")]
        params = PipelineParams(
            window_size=int(header["window_size"]),
            glcm_levels=int(header["glcm_levels"]),
            glcm_offset=(int(header["glcm_dx"]), int(header["glcm_dy"])),
            glcm_symmetric=bool(int(header["glcm_symmetric"])),
            stretch_low=float(header["stretch_low"]),
            stretch_high=float(header["stretch_high"]),
            canny=(
                CannyParams(
                    float(header["canny_sigma"]),
                    float(header["canny_low"]),
                    float(header["canny_high"]),
                )
                if int(header["canny_enabled"])
                else None
            ),
            open_mask=bool(int(header["open_mask"])),
            accept_threshold=float(header["accept_threshold"]),
            bridge=(
                BridgeParams(
                    int(header["bridge_max_gap"]),
                    int(header["bridge_degree"]),
                    int(header["bridge_context_len"]),
                )
                if int(header["bridge_enabled"])
                else None
            ),
            som_shape=(
                (int(header["som_rows"]), int(header["som_cols"]))
                if int(header["som_present"])
                else None
            ),
            som_epochs=int(header["som_epochs"]),
            learning_rate=float(header["learning_rate"]),
            epochs=int(header["epochs"]),
            target_mse=float(header["target_mse"]),
            seed=int(header["seed"]),
            shuffle=bool(int(header["shuffle"])),
        )
        class_name = header["class_name"]
    except KeyError as exc:
        raise BundleError(f"bundle header missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, BundleError):
            raise
        raise BundleError(f"bad header value: {exc}") from None

    arrays: dict[str, np.ndarray] = {}
    ruleset_text: str | None = None
    while not r.eof():
        line = r.line()
        parts = line.split()
        if len(parts) == 3 and parts[0] == "array":
            count = int(parts[2])
            vals = np.empty(count)
            for i in range(count):
                vals[i] = float(r.line())
            arrays[parts[1]] = vals
        elif len(parts) == 3 and parts[0] == "text" and parts[1] == "ruleset":
            nbytes = int(parts[2])
            ruleset_text = r.exactly(nbytes).decode("utf-8")
            if r.exactly(1) != b"\n":
                raise BundleError("ruleset section not newline-terminated")
        else:
            raise BundleError(f"unknown bundle section {line!r}")
    if ruleset_text is None:
        raise BundleError("bundle has no ruleset section")

    try:
        weights = []
        biases = []
        for l, (fan_in, fan_out) in enumerate(zip(layer_sizes, layer_sizes[1:])):
            weights.append(arrays[f"weights_{l}"].reshape(fan_out, fan_in))
            biases.append(arrays[f"biases_{l}"])
        network = MlpNetwork(layer_sizes, weights, biases)
        som = None
        if params.som_shape is not None:
            rows, cols = params.som_shape
            dim = layer_sizes[0]
            som = SomGrid(rows, cols, dim, arrays["som_codebook"].reshape(rows * cols, dim), True)
        return ModelBundle(
            class_name=class_name,
            params=params,
            haralick_means=arrays["means"],
            haralick_stds=arrays["stds"],
            network=network,
            som=som,
            ruleset_text=ruleset_text,
            format_version=version,
        )
    except KeyError as exc:
        raise BundleError(f"bundle missing array section {exc.args[0]!r}") from None


def with_overrides(
    bundle: ModelBundle,
    accept_threshold: float | None = None,
    bridge: BridgeParams | None = None,
    disable_bridge: bool = False,
    ruleset_text: str | None = None,
) -> ModelBundle:
    """Copy of the bundle with runtime knobs replaced (used by the CLI)."""
    params = bundle.params
    if accept_threshold is not None:
        params = replace(params, accept_threshold=accept_threshold)
    if disable_bridge:
        params = replace(params, bridge=None)
    elif bridge is not None:
        params = replace(params, bridge=bridge)
    return ModelBundle(
        class_name=bundle.class_name,
        params=params,
        haralick_means=bundle.haralick_means,
        haralick_stds=bundle.haralick_stds,
        network=bundle.network,
        som=bundle.som,
        ruleset_text=bundle.ruleset_text if ruleset_text is None else ruleset_text,
        format_version=bundle.format_version,
    )
