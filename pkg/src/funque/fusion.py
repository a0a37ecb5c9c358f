"""Feature extraction per frame and support-vector-regression fusion.

`extract_frame_features` runs the shared transform exactly once per input
per frame; every feature in the schema reads the same two pyramids. The
fusion regressor is a nu-SVR trained by a sequential two-variable dual
optimizer (working-set selection over the maximal KKT violation within
each of the two constraint classes), with min-max feature normalization
and prediction clipping to the training score range.

Trained models serialize to a versioned plain-text format that round-trips
every float exactly.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from . import features as features_mod
from . import transform as transform_mod
from .csf import build_spatial_csf_kernel
from .dataset import Dataset
from .transform import TransformConfig

DEFAULT_SCHEMA = ("wd_essim", "vif_scale1", "vif_scale2", "dlm", "motion")

MODEL_FORMAT = "funque-svr"
MODEL_VERSION = 1


class SchemaMismatchError(ValueError):
    """Feature schema differs between the model and the input."""


class ModelFormatError(ValueError):
    """Model file is malformed, truncated or of an unknown version."""


class ConvergenceError(RuntimeError):
    """The dual optimizer hit its iteration cap before reaching tolerance."""


@dataclass
class FeatureVector:
    values: np.ndarray
    schema: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.schema = tuple(self.schema)
        if self.values.shape != (len(self.schema),):
            raise ValueError(
                f"{self.values.shape[0] if self.values.ndim else 0} values "
                f"for {len(self.schema)} schema names"
            )


def validate_schema(schema) -> tuple:
    schema = tuple(schema)
    if not schema:
        raise ValueError("schema is empty")
    unknown = [name for name in schema if name not in features_mod.FEATURE_NAMES]
    if unknown:
        raise ValueError(
            f"unknown feature(s) {unknown}; valid names: {list(features_mod.FEATURE_NAMES)}"
        )
    if len(set(schema)) != len(schema):
        raise ValueError("schema contains duplicate feature names")
    return schema


def extract_frame_features(
    ref: np.ndarray,
    dis: np.ndarray,
    prev_ref_approx: np.ndarray | None,
    cfg: TransformConfig,
    schema=DEFAULT_SCHEMA,
    kernel=None,
):
    """Compute one frame pair's feature vector.

    Returns (features, reference approx band) so the caller can feed the
    band back in as `prev_ref_approx` for the next frame's motion value.
    The transform runs once per input regardless of how many features the
    schema lists.
    """
    schema = validate_schema(schema)
    if np.shape(ref) != np.shape(dis):
        raise ValueError(f"frame shape mismatch {np.shape(ref)} vs {np.shape(dis)}")
    if kernel is None and cfg.csf == "spatial_filter":
        kernel = build_spatial_csf_kernel(cfg.pixels_per_degree)
    pyr_ref = transform_mod.unified_transform(ref, cfg, kernel)
    pyr_dis = transform_mod.unified_transform(dis, cfg, kernel)
    dlm_weights = transform_mod.deferred_dlm_weights(cfg)
    values = [
        features_mod.compute_feature(name, pyr_ref, pyr_dis, prev_ref_approx, dlm_weights)
        for name in schema
    ]
    return FeatureVector(np.array(values), schema), pyr_ref.approx.copy()


def extract_sequence_features(
    ref_frames,
    dis_frames,
    cfg: TransformConfig,
    schema=DEFAULT_SCHEMA,
    threads: int = 1,
):
    """Per-frame feature vectors for a clip.

    Frames fan out to a thread pool; only the motion value couples
    consecutive frames, so it is filled in afterwards from the collected
    reference approximation bands. Results are identical for any thread
    count.
    """
    schema = validate_schema(schema)
    pairs = list(zip(ref_frames, dis_frames))
    kernel = None
    if cfg.csf == "spatial_filter":
        kernel = build_spatial_csf_kernel(cfg.pixels_per_degree)

    def frame_work(pair):
        ref, dis = pair
        return extract_frame_features(ref, dis, None, cfg, schema, kernel)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(frame_work, pairs))
    else:
        results = [frame_work(pair) for pair in pairs]

    vectors = [fv for fv, _ in results]
    if "motion" in schema:
        idx = schema.index("motion")
        approxes = [band for _, band in results]
        for i in range(1, len(vectors)):
            vectors[i].values[idx] = features_mod.motion_feature(approxes[i - 1], approxes[i])
    return vectors


def aggregate_video_features(per_frame) -> FeatureVector:
    """Per-feature arithmetic mean over a clip's frame vectors."""
    per_frame = list(per_frame)
    if not per_frame:
        raise ValueError("no frame features to aggregate")
    schema = per_frame[0].schema
    for fv in per_frame:
        if fv.schema != schema:
            raise SchemaMismatchError(f"schemas differ: {fv.schema} vs {schema}")
    stacked = np.stack([fv.values for fv in per_frame])
    return FeatureVector(stacked.mean(axis=0), schema)


# ---------------------------------------------------------------------------
# nu-SVR


@dataclass(frozen=True)
class SvrHyper:
    kernel: str = "rbf"
    gamma: float | None = None  # None -> 1 / num_features
    c: float = 4.0
    nu: float = 0.9
    tol: float = 1e-6
    max_iter: int = 1_000_000

    def __post_init__(self):
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"kernel must be 'rbf' or 'linear', got {self.kernel!r}")
        if self.c <= 0 or not 0 < self.nu <= 1:
            raise ValueError("need c > 0 and nu in (0, 1]")


@dataclass
class SvrModel:
    kernel: str
    gamma: float
    c: float
    nu: float
    support_vectors: np.ndarray  # (n, d), in normalized feature space
    dual_coefs: np.ndarray  # (n,)
    bias: float
    feature_ranges: np.ndarray  # (d, 2) train-time min/max per feature
    schema: tuple
    score_range: tuple  # (lo, hi) prediction clip


def _kernel_matrix(kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@numba.njit(cache=True)
def _smo_kernel(kmat, targets, c, nu, tol, max_iter):  # pragma: no cover - jitted
    """Inner SMO loop; see `_solve_nu_svr` for the algorithm description."""
    l = targets.shape[0]
    alpha = np.zeros(l)
    alpha_star = np.zeros(l)
    remaining = c * nu * l / 2.0
    for i in range(l):
        v = remaining if remaining < c else c
        if v < 0.0:
            v = 0.0
        alpha[i] = v
        alpha_star[i] = v
        remaining -= v
    # alpha == alpha_star at the start, so theta = 0 and u = K theta - z = -z
    u = -targets.copy()
    lo_slack = 1e-12 * c
    hi_slack = c - lo_slack

    converged = False
    for _ in range(max_iter):
        # first-order scan of both groups: the alpha group's gradient is u,
        # the alpha* group's is -u
        ip = -1
        gp_min = np.inf  # min u over raisable alpha
        gp_max = -np.inf  # max u over reducible alpha
        im = -1
        gm_min = np.inf  # min (-u) over raisable alpha*  == -max u
        gm_max = -np.inf  # max (-u) over reducible alpha*
        for r in range(l):
            ur = u[r]
            if alpha[r] < hi_slack and ur < gp_min:
                gp_min = ur
                ip = r
            if alpha[r] > lo_slack and ur > gp_max:
                gp_max = ur
            if alpha_star[r] < hi_slack and -ur < gm_min:
                gm_min = -ur
                im = r
            if alpha_star[r] > lo_slack and -ur > gm_max:
                gm_max = -ur
        viol = -np.inf
        if ip >= 0 and gp_max > -np.inf:
            viol = gp_max - gp_min
        if im >= 0 and gm_max > -np.inf and gm_max - gm_min > viol:
            viol = gm_max - gm_min
        if viol < tol:
            converged = True
            break

        # second-order pair choice: largest guaranteed decrease over both groups
        best_gain = -np.inf
        bi = -1
        bj = -1
        bgroup = 0
        if ip >= 0:
            di = kmat[ip, ip]
            for r in range(l):
                if alpha[r] > lo_slack:
                    diff = u[r] - gp_min
                    if diff > 0.0:
                        quad = di + kmat[r, r] - 2.0 * kmat[ip, r]
                        if quad < 1e-12:
                            quad = 1e-12
                        gain = diff * diff / quad
                        if gain > best_gain:
                            best_gain = gain
                            bi = ip
                            bj = r
                            bgroup = 0
        if im >= 0:
            di = kmat[im, im]
            for r in range(l):
                if alpha_star[r] > lo_slack:
                    diff = -u[r] - gm_min
                    if diff > 0.0:
                        quad = di + kmat[r, r] - 2.0 * kmat[im, r]
                        if quad < 1e-12:
                            quad = 1e-12
                        gain = diff * diff / quad
                        if gain > best_gain:
                            best_gain = gain
                            bi = im
                            bj = r
                            bgroup = 1
        if bi < 0:
            converged = True
            break

        quad = kmat[bi, bi] + kmat[bj, bj] - 2.0 * kmat[bi, bj]
        if quad < 1e-12:
            quad = 1e-12
        if bgroup == 0:
            step = (u[bj] - u[bi]) / quad
            if step > c - alpha[bi]:
                step = c - alpha[bi]
            if step > alpha[bj]:
                step = alpha[bj]
            alpha[bi] += step
            alpha[bj] -= step
            for r in range(l):
                u[r] += step * (kmat[bi, r] - kmat[bj, r])
        else:
            step = ((-u[bj]) - (-u[bi])) / quad
            if step > c - alpha_star[bi]:
                step = c - alpha_star[bi]
            if step > alpha_star[bj]:
                step = alpha_star[bj]
            alpha_star[bi] += step
            alpha_star[bj] -= step
            for r in range(l):
                u[r] -= step * (kmat[bi, r] - kmat[bj, r])

    return alpha, alpha_star, u, converged


def _solve_nu_svr(kmat: np.ndarray, targets: np.ndarray, c: float, nu: float, tol: float, max_iter: int):
    """Sequential dual optimizer for nu-SVR.

    Variables are [alpha; alpha*] with separate sum constraints on the two
    groups, so every update moves a pair within one group. For this dual
    the alpha* gradient is exactly the negative of the alpha gradient, so
    a single residual vector u = K theta - z drives both groups. Pairs are
    chosen by second-order gain (largest guaranteed objective decrease)
    and the loop stops when the largest within-group KKT violation drops
    below `tol`.
    """
    kmat = np.ascontiguousarray(kmat, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    alpha, alpha_star, u, converged = _smo_kernel(
        kmat, targets, float(c), float(nu), float(tol), int(max_iter)
    )
    if not converged:
        raise ConvergenceError(
            f"nu-SVR did not reach tol={tol} within {max_iter} iterations; "
            "consider different hyperparameters"
        )
    lo_slack = 1e-12 * c
    hi_slack = c - lo_slack
    # constraint multipliers per group -> bias and tube width
    rho = []
    for sign, beta in ((1.0, alpha), (-1.0, alpha_star)):
        g = sign * u
        free = (beta > lo_slack) & (beta < hi_slack)
        if free.any():
            rho.append(float(g[free].mean()))
        else:
            up = np.where(beta < hi_slack, g, np.inf).min()
            down = np.where(beta > lo_slack, g, -np.inf).max()
            rho.append(float((up + down) / 2.0))
    bias = (rho[1] - rho[0]) / 2.0
    return alpha - alpha_star, bias


def svr_train(data: Dataset, hyper: SvrHyper | None = None) -> SvrModel:
    """Fit the fusion regressor on aggregated per-video features."""
    hyper = hyper or SvrHyper()
    if len(data) < 2:
        raise ValueError("need at least 2 training rows")
    lo = data.features.min(axis=0)
    hi = data.features.max(axis=0)
    degenerate = np.nonzero(hi - lo == 0)[0]
    if degenerate.size:
        names = [data.schema[i] for i in degenerate]
        raise ValueError(f"degenerate (constant) feature column(s): {names}")
    normalized = (data.features - lo) / (hi - lo)
    gamma = hyper.gamma if hyper.gamma is not None else 1.0 / len(data.schema)
    kmat = _kernel_matrix(hyper.kernel, gamma, normalized, normalized)
    theta, bias = _solve_nu_svr(kmat, data.mos, hyper.c, hyper.nu, hyper.tol, hyper.max_iter)
    support = np.abs(theta) > 1e-12 * hyper.c
    return SvrModel(
        kernel=hyper.kernel,
        gamma=gamma,
        c=hyper.c,
        nu=hyper.nu,
        support_vectors=normalized[support].copy(),
        dual_coefs=theta[support].copy(),
        bias=bias,
        feature_ranges=np.stack([lo, hi], axis=1),
        schema=data.schema,
        score_range=(float(data.mos.min()), float(data.mos.max())),
    )


def _normalize_clamped(model: SvrModel, values: np.ndarray) -> np.ndarray:
    lo = model.feature_ranges[:, 0]
    hi = model.feature_ranges[:, 1]
    return np.clip((values - lo) / (hi - lo), 0.0, 1.0)


def svr_predict(model: SvrModel, features) -> float:
    """Kernel expansion plus bias, clipped to the training score range."""
    if isinstance(features, FeatureVector):
        if features.schema != model.schema:
            raise SchemaMismatchError(
                f"model expects {model.schema}, got {features.schema}"
            )
        values = features.values
    else:
        values = np.asarray(features, dtype=np.float64)
        if values.shape != (len(model.schema),):
            raise SchemaMismatchError(
                f"expected {len(model.schema)} features, got shape {values.shape}"
            )
    x = _normalize_clamped(model, values)[None, :]
    if model.support_vectors.size:
        k = _kernel_matrix(model.kernel, model.gamma, model.support_vectors, x)[:, 0]
        raw = float(model.dual_coefs @ k + model.bias)
    else:
        raw = model.bias
    lo, hi = model.score_range
    return float(np.clip(raw, lo, hi))


# ---------------------------------------------------------------------------
# model serialization


def _schema_digest(schema) -> str:
    return hashlib.sha256(",".join(schema).encode()).hexdigest()


def save_model(model: SvrModel, path):
    """Versioned plain-text dump; every float survives a round trip."""
    if model.support_vectors.shape[0] == 0:
        raise ValueError("refusing to save a model with an empty support set")
    lines = [
        f"{MODEL_FORMAT} {MODEL_VERSION}",
        "schema: " + ",".join(model.schema),
        "schema_sha256: " + _schema_digest(model.schema),
        f"kernel: {model.kernel}",
        f"gamma: {model.gamma!r}",
        f"c: {model.c!r}",
        f"nu: {model.nu!r}",
        f"bias: {model.bias!r}",
        f"score_range: {model.score_range[0]!r} {model.score_range[1]!r}",
        "feature_ranges:",
    ]
    for name, (lo, hi) in zip(model.schema, model.feature_ranges):
        lines.append(f"{name} {float(lo)!r} {float(hi)!r}")
    lines.append(f"support_vectors: {model.support_vectors.shape[0]}")
    for coef, vec in zip(model.dual_coefs, model.support_vectors):
        lines.append(" ".join([repr(float(coef))] + [repr(float(v)) for v in vec]))
    lines.append("end")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _expect(line: str | None, prefix: str) -> str:
    if line is None or not line.startswith(prefix):
        raise ModelFormatError(f"expected {prefix!r}, got {line!r}")
    return line[len(prefix) :].strip()


def load_model(path) -> SvrModel:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    it = iter(lines)
    nxt = lambda: next(it, None)  # noqa: E731

    header = nxt()
    if header is None or not header.startswith(MODEL_FORMAT):
        raise ModelFormatError(f"not a {MODEL_FORMAT} file: {header!r}")
    version = header[len(MODEL_FORMAT) :].strip()
    if version != str(MODEL_VERSION):
        raise ModelFormatError(f"unsupported model version {version!r}")
    schema = tuple(_expect(nxt(), "schema:").split(","))
    digest = _expect(nxt(), "schema_sha256:")
    if digest != _schema_digest(schema):
        raise ModelFormatError("schema hash mismatch; file is corrupt or edited")
    kernel = _expect(nxt(), "kernel:")
    gamma = float(_expect(nxt(), "gamma:"))
    c = float(_expect(nxt(), "c:"))
    nu = float(_expect(nxt(), "nu:"))
    bias = float(_expect(nxt(), "bias:"))
    lo_s, hi_s = _expect(nxt(), "score_range:").split()
    _expect(nxt(), "feature_ranges:")
    ranges = []
    for name in schema:
        row = nxt()
        if row is None:
            raise ModelFormatError("truncated feature_ranges section")
        parts = row.split()
        if len(parts) != 3 or parts[0] != name:
            raise ModelFormatError(f"bad feature range line {row!r}")
        ranges.append((float(parts[1]), float(parts[2])))
    n_sv = int(_expect(nxt(), "support_vectors:"))
    coefs = []
    vecs = []
    for _ in range(n_sv):
        row = nxt()
        if row is None:
            raise ModelFormatError("truncated support vector section")
        parts = row.split()
        if len(parts) != 1 + len(schema):
            raise ModelFormatError(f"bad support vector line {row!r}")
        coefs.append(float(parts[0]))
        vecs.append([float(v) for v in parts[1:]])
    if nxt() != "end":
        raise ModelFormatError("missing end marker; file truncated?")
    return SvrModel(
        kernel=kernel,
        gamma=gamma,
        c=c,
        nu=nu,
        support_vectors=np.array(vecs, dtype=np.float64).reshape(n_sv, len(schema)),
        dual_coefs=np.array(coefs, dtype=np.float64),
        bias=bias,
        feature_ranges=np.array(ranges, dtype=np.float64),
        schema=schema,
        score_range=(float(lo_s), float(hi_s)),
    )
